"""Survey files, score-matrix construction and simulated-dataset writers.

File schemas (headers required)::

    roster.csv            node_id,participated
    nominations.csv       nominator_id,nominee_id,rank      (nominee_id "*" = out of survey)
    node_covariates.csv   node_id,<name>,...
    dyad_covariates.csv   i,j,<name>,...

Rank positions count every nomination a respondent made, including those
to people outside the survey, so an out-of-survey nominee still uses up a
slot of the nomination limit.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special, stats

from .core import DesignData, ScoreError, ScoreMatrix, canonicalize_scores

OUT_OF_SURVEY = "*"
FILES = {"roster": "roster.csv", "nominations": "nominations.csv",
         "node_covariates": "node_covariates.csv", "dyad_covariates": "dyad_covariates.csv"}
_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


class DataError(ValueError):
    """Input files do not satisfy the survey schemas."""


@dataclass
class SurveyDataset:
    """Validated survey: roster, nominations and covariates.

    ``nominations`` holds ``(nominator, nominee, rank)`` with ``nominee``
    either a roster id or ``OUT_OF_SURVEY``. Covariates are aligned with
    ``node_ids``; dyadic covariates are ``(n, n)`` arrays with zero diagonal.
    """

    node_ids: list
    participated: np.ndarray
    nominations: list
    m: int
    node_covariates: dict = field(default_factory=dict)
    dyad_covariates: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def index(self) -> dict:
        return {v: k for k, v in enumerate(self.node_ids)}

    def out_of_survey_counts(self) -> np.ndarray:
        idx = self.index
        out = np.zeros(self.n, dtype=np.int64)
        for who, whom, _ in self.nominations:
            if whom == OUT_OF_SURVEY:
                out[idx[who]] += 1
        return out


def _read_rows(path: Path, required: list[str]) -> tuple[list[str], list[dict]]:
    if not path.exists():
        raise DataError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path.name}: missing column(s) {', '.join(missing)}")
        rows = []
        for line, row in enumerate(reader, start=2):
            clean = {(k or "").strip(): (v or "").strip() for k, v in row.items()}
            if None in row or any(v == "" for v in clean.values()):
                raise DataError(f"{path.name} line {line}: empty or extra field")
            clean["_line"] = line
            rows.append(clean)
    return header, rows


def _as_float(value, where):
    try:
        return float(value)
    except ValueError:
        raise DataError(f"{where}: {value!r} is not a number") from None


def _resolve(paths) -> dict:
    if isinstance(paths, (str, Path)):
        base = Path(paths)
        return {k: base / v for k, v in FILES.items()}
    return {k: Path(v) for k, v in dict(paths).items()}


def load_dataset(paths, m: int) -> SurveyDataset:
    """Read and validate the survey files.

    Parameters
    ----------
    paths : str, Path or mapping
        A directory holding the standard file names, or a mapping with keys
        ``roster``, ``nominations`` and optionally ``node_covariates`` and
        ``dyad_covariates``.
    m : int
        Maximum number of nominations per respondent.
    """
    if int(m) < 0:
        raise DataError("m must be nonnegative")
    files = _resolve(paths)
    _, roster_rows = _read_rows(files["roster"], ["node_id", "participated"])
    ids, part = [], []
    for row in roster_rows:
        flag = row["participated"].lower()
        if flag not in _TRUE | _FALSE:
            raise DataError(f"roster.csv line {row['_line']}: participated must be 0/1, got {row['participated']!r}")
        if row["node_id"] == OUT_OF_SURVEY:
            raise DataError(f"roster.csv line {row['_line']}: {OUT_OF_SURVEY!r} is reserved")
        ids.append(row["node_id"])
        part.append(flag in _TRUE)
    dup = sorted({v for v in ids if ids.count(v) > 1})
    if dup:
        raise DataError(f"roster.csv: duplicate node ids {dup}")
    index = {v: k for k, v in enumerate(ids)}

    _, nom_rows = _read_rows(files["nominations"], ["nominator_id", "nominee_id", "rank"])
    nominations = []
    unknown = set()
    seen = set()
    ranks = defaultdict(list)
    for row in nom_rows:
        who, whom, line = row["nominator_id"], row["nominee_id"], row["_line"]
        try:
            rank = int(row["rank"])
        except ValueError:
            raise DataError(f"nominations.csv line {line}: rank {row['rank']!r} is not an integer") from None
        for v in (who, whom):
            if v != OUT_OF_SURVEY and v not in index:
                unknown.add(v)
        if who == OUT_OF_SURVEY:
            raise DataError(f"nominations.csv line {line}: nominator cannot be out of survey")
        if who == whom:
            raise DataError(f"nominations.csv line {line}: self-nomination by {who}")
        if whom != OUT_OF_SURVEY:
            if (who, whom) in seen:
                raise DataError(f"nominations.csv line {line}: duplicate nomination {who} -> {whom}")
            seen.add((who, whom))
        ranks[who].append(rank)
        nominations.append((who, whom, rank))
    if unknown:
        raise DataError(f"ids not on the roster: {', '.join(sorted(unknown))}")
    for who, rs in ranks.items():
        if sorted(rs) != list(range(1, len(rs) + 1)):
            raise DataError(f"nominator {who}: rank positions {sorted(rs)} are not 1..{len(rs)} without gaps or duplicates")
        if not part[index[who]]:
            raise DataError(f"nominator {who} is marked as a non-participant")
        if len(rs) > int(m):
            raise DataError(f"nominator {who}: {len(rs)} nominations exceed m = {m}")

    node_cov = {}
    if "node_covariates" in files and files["node_covariates"].exists():
        header, rows = _read_rows(files["node_covariates"], ["node_id"])
        names = [h for h in header if h != "node_id"]
        vals = {k: np.full(len(ids), np.nan) for k in names}
        for row in rows:
            if row["node_id"] not in index:
                raise DataError(f"node_covariates.csv line {row['_line']}: unknown node {row['node_id']}")
            for k in names:
                vals[k][index[row["node_id"]]] = _as_float(row[k], f"node_covariates.csv line {row['_line']}")
        for k, v in vals.items():
            if np.isnan(v).any():
                absent = [ids[i] for i in np.flatnonzero(np.isnan(v))[:5]]
                raise DataError(f"node covariate {k!r} missing for {absent}")
        node_cov = vals

    dyad_cov = {}
    if "dyad_covariates" in files and files["dyad_covariates"].exists():
        header, rows = _read_rows(files["dyad_covariates"], ["i", "j"])
        names = [h for h in header if h not in ("i", "j")]
        n = len(ids)
        vals = {k: np.full((n, n), np.nan) for k in names}
        for row in rows:
            a, b = row["i"], row["j"]
            if a not in index or b not in index:
                raise DataError(f"dyad_covariates.csv line {row['_line']}: unknown node")
            if a == b:
                continue
            for k in names:
                vals[k][index[a], index[b]] = _as_float(row[k], f"dyad_covariates.csv line {row['_line']}")
        off = ~np.eye(n, dtype=bool)
        for k, v in vals.items():
            if np.isnan(v[off]).any():
                raise DataError(f"dyad covariate {k!r} is missing for {int(np.isnan(v[off]).sum())} ordered pairs")
            np.fill_diagonal(v, 0.0)
        dyad_cov = vals
    return SurveyDataset(ids, np.array(part, dtype=bool), nominations, int(m), node_cov, dyad_cov)


def build_score_matrix(ds: SurveyDataset) -> ScoreMatrix:
    """Canonical scores with per-row limits ``m_i = m - (out-of-survey nominations)``.

    Rows of non-participants are missing; nominations they receive are kept.
    """
    n = ds.n
    idx = ds.index
    m_i = ds.m - ds.out_of_survey_counts()
    raw = np.zeros((n, n))
    raw[~ds.participated, :] = np.nan
    for who, whom, rank in ds.nominations:
        if whom != OUT_OF_SURVEY:
            raw[idx[who], idx[whom]] = rank
    m_i = np.where(ds.participated, m_i, ds.m)
    try:
        return canonicalize_scores(raw, m_i, kind="rank")
    except ScoreError as exc:
        raise DataError(str(exc)) from None


def normal_score_transform(values) -> np.ndarray:
    """Map values to Phi^{-1}(r / (n + 1)) with r the mid-rank; ties share mid-ranks."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values")
    r = stats.rankdata(x, method="average")
    return special.ndtri(r / (x.size + 1))


def build_design(ds: SurveyDataset, row_covariates=(), col_covariates=(), dyad_covariates=(),
                 intercept: bool = True, normal_scores: bool = False) -> DesignData:
    """Design from named covariates; node covariates may serve as row and column terms."""
    def node(name):
        if name not in ds.node_covariates:
            raise DataError(f"unknown node covariate {name!r}")
        v = ds.node_covariates[name]
        return normal_score_transform(v) if normal_scores else v

    n = ds.n
    x_row = np.column_stack([node(k) for k in row_covariates]) if row_covariates else np.zeros((n, 0))
    x_col = np.column_stack([node(k) for k in col_covariates]) if col_covariates else np.zeros((n, 0))
    mats = []
    for k in dyad_covariates:
        if k not in ds.dyad_covariates:
            raise DataError(f"unknown dyad covariate {k!r}")
        mats.append(ds.dyad_covariates[k])
    x_dyad = np.stack(mats, axis=2) if mats else np.zeros((n, n, 0))
    return DesignData(x_row, x_col, x_dyad, tuple(row_covariates), tuple(col_covariates),
                      tuple(dyad_covariates), intercept=intercept)


def write_dataset(directory, ds: SurveyDataset) -> Path:
    """Write the survey files; reading them back reproduces ``ds``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with (out / FILES["roster"]).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "participated"])
        for v, p in zip(ds.node_ids, ds.participated):
            w.writerow([v, int(p)])
    with (out / FILES["nominations"]).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["nominator_id", "nominee_id", "rank"])
        for row in sorted(ds.nominations, key=lambda r: (ds.index[r[0]], r[2])):
            w.writerow(row)
    if ds.node_covariates:
        names = list(ds.node_covariates)
        with (out / FILES["node_covariates"]).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node_id"] + names)
            for k, v in enumerate(ds.node_ids):
                w.writerow([v] + [repr(float(ds.node_covariates[c][k])) for c in names])
    if ds.dyad_covariates:
        names = list(ds.dyad_covariates)
        with (out / FILES["dyad_covariates"]).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j"] + names)
            for a in range(ds.n):
                for b in range(ds.n):
                    if a != b:
                        w.writerow([ds.node_ids[a], ds.node_ids[b]]
                                   + [repr(float(ds.dyad_covariates[c][a, b])) for c in names])
    return out


def dataset_from_scores(S: ScoreMatrix, design: DesignData | None = None, node_ids=None) -> SurveyDataset:
    """Express a fully observed score matrix (and its design) as a survey."""
    if np.any(S.scores[~np.eye(S.n, dtype=bool)] < 0):
        raise ValueError("scores with missing entries cannot be written as a complete survey")
    n = S.n
    ids = [f"v{k:03d}" for k in range(n)] if node_ids is None else list(node_ids)
    noms = []
    for i in range(n):
        cols = np.flatnonzero(S.scores[i] > 0)
        for j in cols[np.argsort(-S.scores[i, cols])]:
            noms.append((ids[i], ids[j], int(S.max_nominations[i] - S.scores[i, j] + 1)))
    if np.unique(S.max_nominations).size > 1:
        raise ValueError("per-row limits need out-of-survey nominations; not representable here")
    node_cov, dyad_cov = {}, {}
    if design is not None:
        for k, name in enumerate(design.row_names):
            node_cov[name] = design.x_row[:, k]
        for k, name in enumerate(design.col_names):
            node_cov[name] = design.x_col[:, k]
        for k, name in enumerate(design.dyad_names):
            dyad_cov[name] = design.x_dyad[:, :, k]
    m = int(S.max_nominations[0]) if n else 0
    return SurveyDataset(ids, np.ones(n, dtype=bool), noms, m, node_cov, dyad_cov)


def write_truth(path, names, values, a=None, b=None) -> None:
    """``parameter,value`` table of generating values, then sender/receiver effects."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "value"])
        for k, v in zip(names, values):
            w.writerow([k, repr(float(v))])
        if a is not None:
            for i, (ai, bi) in enumerate(zip(a, b)):
                w.writerow([f"a[{i}]", repr(float(ai))])
                w.writerow([f"b[{i}]", repr(float(bi))])


def read_truth(path) -> dict:
    with Path(path).open(newline="") as fh:
        return {row["parameter"]: float(row["value"]) for row in csv.DictReader(fh)}


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    cfg = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path} line {line_no}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        cfg[key] = value
    return cfg
