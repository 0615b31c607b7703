"""Truncation intervals and set membership for the four set-based likelihoods.

A latent matrix ``Y`` is consistent with scores ``S`` under

* FRN: ranked entries are positive, order follows the scores, and unranked
  entries are nonpositive unless the row is censored (``d_i == m_i``);
* RANK: only the within-row order;
* BINARY: ranked positive, unranked nonpositive, censoring ignored;
* CENSORED_BINARY: ranked positive, unranked nonpositive in uncensored rows,
  and every ranked entry exceeds every unranked one.

The per-pair functions here scan the row literally and are the reference for
the compiled sweep in ``_kernels``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .core import MISSING, Family, Interval, ScoreMatrix

INF = np.inf


class Violation(NamedTuple):
    """A broken association: entry (i, j), partner column k (or -1), rule label."""

    i: int
    j: int
    k: int
    rule: str


@dataclass(frozen=True)
class RowContext:
    """One-pass summary of row i used to bracket its entries."""

    ranked_values: dict
    max_unranked: float
    d: int
    m: int

    @classmethod
    def build(cls, S: ScoreMatrix, Y: np.ndarray, i: int) -> "RowContext":
        s = S.scores[i]
        ranked = {int(s[k]): float(Y[i, k]) for k in np.flatnonzero(s > 0)}
        unranked = Y[i, (s == 0)]
        return cls(ranked, float(unranked.max()) if unranked.size else -INF, len(ranked), int(S.max_nominations[i]))

    @property
    def censored(self) -> bool:
        return self.d >= self.m

    def below(self, score: int) -> float:
        """Largest latent value among entries scored below ``score``."""
        vals = [v for sc, v in self.ranked_values.items() if sc < score]
        if score > 0:
            vals.append(self.max_unranked)
        return max(vals, default=-INF)

    def above(self, score: int) -> float:
        return min((v for sc, v in self.ranked_values.items() if sc > score), default=INF)


def _check(S, i, j):
    if i == j:
        raise ValueError("diagonal entries have no interval")
    if S.scores[i, j] == MISSING:
        raise ValueError(f"score ({i}, {j}) is missing; use interval_missing")


def interval_frn(S: ScoreMatrix, Y: np.ndarray, i: int, j: int) -> Interval:
    _check(S, i, j)
    ctx = RowContext.build(S, Y, i)
    s = int(S.scores[i, j])
    if s > 0:
        return Interval(max(0.0, ctx.below(s)), ctx.above(s))
    if not ctx.censored:
        return Interval(-INF, 0.0)
    return Interval(-INF, ctx.above(0))


def interval_rank(S: ScoreMatrix, Y: np.ndarray, i: int, j: int) -> Interval:
    _check(S, i, j)
    ctx = RowContext.build(S, Y, i)
    s = int(S.scores[i, j])
    return Interval(ctx.below(s), ctx.above(s))


def interval_binary(S: ScoreMatrix, i: int, j: int) -> Interval:
    _check(S, i, j)
    return Interval(0.0, INF) if S.scores[i, j] > 0 else Interval(-INF, 0.0)


def interval_censored_binary(S: ScoreMatrix, Y: np.ndarray, i: int, j: int) -> Interval:
    _check(S, i, j)
    ctx = RowContext.build(S, Y, i)
    if S.scores[i, j] > 0:
        return Interval(max(0.0, ctx.max_unranked), INF)
    if not ctx.censored:
        return Interval(-INF, 0.0)
    return Interval(-INF, min(ctx.ranked_values.values(), default=INF))


def interval_missing() -> Interval:
    return Interval(-INF, INF)


def interval(S: ScoreMatrix, Y: np.ndarray, i: int, j: int, family) -> Interval:
    """Dispatch on the likelihood family; missing scores are unconstrained."""
    family = Family.parse(family)
    if S.scores[i, j] == MISSING:
        return interval_missing()
    if family is Family.FRN:
        return interval_frn(S, Y, i, j)
    if family is Family.RANK:
        return interval_rank(S, Y, i, j)
    if family is Family.BINARY:
        return interval_binary(S, i, j)
    return interval_censored_binary(S, Y, i, j)


def all_intervals(S: ScoreMatrix, Y: np.ndarray, family) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds for every entry, from the compiled row sweep."""
    family = Family.parse(family)
    return _kernels.all_intervals(np.ascontiguousarray(Y, dtype=float), S.scores, S.max_nominations, family.code)


def validate_membership(S: ScoreMatrix, Y: np.ndarray, family, max_violations: int = 1000):
    """Check whether ``Y`` lies in the family's constraint set.

    Returns
    -------
    (bool, list of Violation)
        Rule labels: ``"positive"`` (ranked entry not > 0), ``"order"``
        (score order broken against column k), ``"nonpositive"`` (unranked
        entry > 0 in an uncensored row), ``"ranked-above-unranked"``.
    """
    family = Family.parse(family)
    Y = np.asarray(Y, dtype=float)
    s = S.scores
    n = S.n
    if Y.shape != (n, n):
        raise ValueError("latent matrix shape does not match scores")
    if is_member(S, Y, family):
        return True, []
    off = ~np.eye(n, dtype=bool)
    observed = (s != MISSING) & off
    ranked = (s > 0) & observed
    unranked = (s == 0) & observed
    censored = S.censored_rows()
    violations: list[Violation] = []

    def add(mask, rule):
        for i, j in zip(*np.nonzero(mask)):
            if len(violations) < max_violations:
                violations.append(Violation(int(i), int(j), -1, rule))

    if family in (Family.FRN, Family.BINARY, Family.CENSORED_BINARY):
        add(ranked & ~(Y > 0), "positive")
    if family is Family.BINARY:
        add(unranked & ~(Y <= 0), "nonpositive")
    if family in (Family.FRN, Family.CENSORED_BINARY):
        add(unranked & ~censored[:, None] & ~(Y <= 0), "nonpositive")

    if family in (Family.FRN, Family.RANK, Family.CENSORED_BINARY):
        # compare adjacent score levels: max of a lower level must sit below the next level's min
        if family is Family.CENSORED_BINARY:
            level = np.where(ranked, 1, np.where(unranked, 0, -1))
        else:
            level = np.where(observed, s, -1)
        bad_rows = _order_broken_rows(Y, level)
        for i in bad_rows:
            for j in range(n):
                for k in range(n):
                    if level[i, j] > level[i, k] >= 0 and not Y[i, j] > Y[i, k] and len(violations) < max_violations:
                        violations.append(Violation(int(i), int(j), int(k), "order"
                                                    if family is not Family.CENSORED_BINARY
                                                    else "ranked-above-unranked"))
    return not violations, violations


def is_member(S: ScoreMatrix, Y: np.ndarray, family) -> bool:
    """Compiled membership test without the violation listing."""
    family = Family.parse(family)
    Y = np.ascontiguousarray(Y, dtype=float)
    if Y.shape != (S.n, S.n):
        raise ValueError("latent matrix shape does not match scores")
    return bool(_kernels.membership_ok(Y, S.scores, S.max_nominations, family.code))


def _order_broken_rows(Y: np.ndarray, level: np.ndarray) -> list[int]:
    rows = []
    for i in range(Y.shape[0]):
        lv = level[i]
        keep = lv >= 0
        if not keep.any():
            continue
        y = Y[i, keep]
        lv = lv[keep]
        order = np.lexsort((y, lv))
        y, lv = y[order], lv[order]
        # at each boundary between levels the running max of the lower levels
        # must stay strictly below the next value
        running = np.maximum.accumulate(y)
        boundary = lv[1:] != lv[:-1]
        prev_max = running[:-1][boundary]
        # values of the higher level at the boundary are each level's minimum
        if np.any(~(y[1:][boundary] > prev_max)):
            rows.append(i)
    return rows
