"""Shared domain types: score matrices, designs, parameters and likelihood families.

Latent relation matrices are plain ``(n, n)`` float arrays whose diagonal is
ignored everywhere.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

MISSING = -1


class Family(str, enum.Enum):
    """Set-based likelihood used to link scores to latent relations."""

    FRN = "FRN"
    RANK = "RANK"
    BINARY = "BINARY"
    CENSORED_BINARY = "CENSORED_BINARY"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        aliases = {"BINOMIAL": "BINARY", "CENSORED_BINOMIAL": "CENSORED_BINARY", "CB": "CENSORED_BINARY"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown likelihood family {value!r}") from None

    @property
    def code(self) -> int:
        return _FAMILY_CODES[self]


_FAMILY_CODES = {Family.FRN: 0, Family.RANK: 1, Family.BINARY: 2, Family.CENSORED_BINARY: 3}


class ScoreError(ValueError):
    """Raised for nomination scores that violate the score-matrix invariants."""


@dataclass(frozen=True)
class Interval:
    """Truncation bounds for one latent entry."""

    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval ({self.lo}, {self.hi}): latent state is inconsistent with the scores")

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class ScoreMatrix:
    """Observed nomination scores.

    ``scores[i, j]`` is 0 for no nomination, a positive score for a ranked
    nominee (larger is more favoured) or ``MISSING``. The diagonal is stored
    as ``MISSING`` and never read. ``max_nominations[i]`` is the per-row
    nomination limit ``m_i``.
    """

    scores: np.ndarray
    max_nominations: np.ndarray

    def __post_init__(self):
        s = np.array(self.scores, dtype=np.int64)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ScoreError("scores must be a square matrix")
        np.fill_diagonal(s, MISSING)
        m = np.broadcast_to(np.asarray(self.max_nominations, dtype=np.int64), (s.shape[0],)).copy()
        s.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "max_nominations", m)
        problems = score_problems(self)
        if problems:
            raise ScoreError("; ".join(problems[:5]))

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def missing(self) -> np.ndarray:
        """Boolean mask of unobserved off-diagonal entries."""
        mask = self.scores == MISSING
        np.fill_diagonal(mask, False)
        return mask

    def out_degrees(self) -> np.ndarray:
        return out_degrees(self)

    def censored_rows(self) -> np.ndarray:
        """Rows whose outdegree reached their nomination limit."""
        return self.out_degrees() >= self.max_nominations


def out_degrees(S: ScoreMatrix) -> np.ndarray:
    """Number of strictly positive, observed scores in each row."""
    return (np.asarray(S.scores) > 0).sum(axis=1)


def score_problems(S: ScoreMatrix) -> list[str]:
    """Check the row-score-set invariant; return a list of human-readable problems."""
    s = S.scores
    m = S.max_nominations
    problems = []
    if np.any(m < 0):
        problems.append("negative nomination limit")
    if np.any(s < MISSING):
        problems.append("negative score")
    for i in range(s.shape[0]):
        row = np.delete(s[i], i)
        pos = np.sort(row[row > 0])
        d = pos.size
        if d > m[i]:
            problems.append(f"row {i}: {d} nominations exceed limit {m[i]}")
            continue
        expected = np.arange(m[i] - d + 1, m[i] + 1)
        if not np.array_equal(pos, expected):
            problems.append(f"row {i}: scores {pos.tolist()} are not the canonical set {expected.tolist()}")
    return problems


def canonicalize_scores(raw, m_per_row, kind: str = "score") -> ScoreMatrix:
    """Turn raw nominations into canonical scores.

    Parameters
    ----------
    raw : array_like, shape (n, n)
        Nonnegative entries; 0 means not nominated, NaN means missing. With
        ``kind="score"`` larger values are more favoured; with ``kind="rank"``
        the values are rank positions and 1 is the most favoured nominee.
    m_per_row : int or array_like
        Nomination limit ``m_i`` for each row.
    kind : {"score", "rank"}

    Returns
    -------
    ScoreMatrix
        In row ``i`` the k-th most favoured nominee scores ``m_i - k + 1``.
    """
    if kind not in ("score", "rank"):
        raise ValueError("kind must be 'score' or 'rank'")
    raw = np.asarray(raw, dtype=float)
    n = raw.shape[0]
    if raw.shape != (n, n):
        raise ScoreError("raw nominations must be a square matrix")
    m = np.broadcast_to(np.asarray(m_per_row, dtype=np.int64), (n,))
    off = ~np.eye(n, dtype=bool)
    missing = np.isnan(raw) & off
    if np.any(raw[off & ~missing] < 0):
        raise ScoreError("negative nomination entry")
    out = np.zeros((n, n), dtype=np.int64)
    out[missing] = MISSING
    for i in range(n):
        cols = np.flatnonzero(off[i] & ~missing[i] & (np.nan_to_num(raw[i]) > 0))
        vals = raw[i, cols]
        if np.unique(vals).size != vals.size:
            raise ScoreError(f"row {i}: duplicate ranks {sorted(vals.tolist())}")
        if cols.size > m[i]:
            raise ScoreError(f"row {i}: {cols.size} nominations exceed limit {m[i]}")
        order = np.argsort(-vals if kind == "score" else vals, kind="stable")
        out[i, cols[order]] = m[i] - np.arange(cols.size)
    return ScoreMatrix(out, m)


@dataclass(frozen=True)
class DesignData:
    """Regressors for the mean ``beta' x_ij``.

    ``x_row`` holds nominator covariates ``(n, p_r)``, ``x_col`` nominee
    covariates ``(n, p_c)`` and ``x_dyad`` pair covariates ``(n, n, p_d)``.
    When ``intercept`` is set a constant-1 pair regressor is prepended.
    """

    x_row: np.ndarray
    x_col: np.ndarray
    x_dyad: np.ndarray
    row_names: tuple = ()
    col_names: tuple = ()
    dyad_names: tuple = ()
    intercept: bool = True

    def __post_init__(self):
        x_row = np.asarray(self.x_row, dtype=float)
        n = x_row.shape[0]
        x_row = x_row.reshape(n, -1)
        x_col = np.asarray(self.x_col, dtype=float)
        if x_col.shape[0] != n:
            raise ValueError("design dimensions disagree with the node count")
        x_col = x_col.reshape(n, -1)
        x_dyad = np.asarray(self.x_dyad, dtype=float)
        if x_dyad.ndim == 2:
            x_dyad = x_dyad[:, :, None]
        if x_col.shape[0] != n or x_dyad.shape[:2] != (n, n):
            raise ValueError("design dimensions disagree with the node count")
        off = ~np.eye(n, dtype=bool)
        if not (np.all(np.isfinite(x_row)) and np.all(np.isfinite(x_col)) and np.all(np.isfinite(x_dyad[off]))):
            raise ValueError("design contains undefined values")
        object.__setattr__(self, "x_row", x_row)
        object.__setattr__(self, "x_col", x_col)
        object.__setattr__(self, "x_dyad", x_dyad)
        for attr, width, prefix in (("row_names", x_row.shape[1], "r"), ("col_names", x_col.shape[1], "c"),
                                    ("dyad_names", x_dyad.shape[2], "d")):
            names = tuple(getattr(self, attr)) or tuple(f"{prefix}{k + 1}" for k in range(width))
            if len(names) != width:
                raise ValueError(f"{attr} has {len(names)} entries for {width} columns")
            object.__setattr__(self, attr, names)

    @property
    def n(self) -> int:
        return self.x_row.shape[0]

    @property
    def names(self) -> list[str]:
        """Coefficient names in the order used for ``beta``."""
        return ((["intercept"] if self.intercept else [])
                + [f"row.{k}" for k in self.row_names]
                + [f"col.{k}" for k in self.col_names]
                + [f"dyad.{k}" for k in self.dyad_names])

    @property
    def p(self) -> int:
        return len(self.names)

    @property
    def has_row_terms(self) -> bool:
        return self.intercept or self.x_row.shape[1] > 0

    def tensor(self) -> np.ndarray:
        """Full ``(n, n, p)`` regressor array with the diagonal zeroed."""
        n = self.n
        blocks = []
        if self.intercept:
            blocks.append(np.ones((n, n, 1)))
        blocks.append(np.broadcast_to(self.x_row[:, None, :], (n, n, self.x_row.shape[1])))
        blocks.append(np.broadcast_to(self.x_col[None, :, :], (n, n, self.x_col.shape[1])))
        blocks.append(self.x_dyad)
        X = np.concatenate(blocks, axis=2)
        X[np.arange(n), np.arange(n)] = 0.0
        return X

    def without_row_terms(self) -> "DesignData":
        return DesignData(np.zeros((self.n, 0)), self.x_col, self.x_dyad, (), self.col_names,
                          self.dyad_names, intercept=False)


@dataclass
class SrmParams:
    """Social relations model parameters; the dyadic error variance is fixed at 1."""

    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    sigma_ab: np.ndarray = field(default_factory=lambda: np.eye(2))
    rho: float = 0.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).copy()
        self.a = np.asarray(self.a, dtype=float).copy()
        self.b = np.asarray(self.b, dtype=float).copy()
        self.sigma_ab = np.asarray(self.sigma_ab, dtype=float).reshape(2, 2).copy()
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        if not np.allclose(self.sigma_ab, self.sigma_ab.T):
            raise ValueError("sigma_ab must be symmetric")
        if np.any(np.linalg.eigvalsh(self.sigma_ab) <= 0):
            raise ValueError("sigma_ab must be positive definite")

    @classmethod
    def initial(cls, p: int, n: int) -> "SrmParams":
        return cls(np.zeros(p), np.zeros(n), np.zeros(n), np.eye(2), 0.0)

    def copy(self) -> "SrmParams":
        return SrmParams(self.beta, self.a, self.b, self.sigma_ab, self.rho)

    def mean_matrix(self, X: np.ndarray) -> np.ndarray:
        """``beta' x_ij + a_i + b_j`` for a regressor tensor ``X``."""
        return X @ self.beta + self.a[:, None] + self.b[None, :]
