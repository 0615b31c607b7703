"""Gibbs sampler for the social relations regression model under a set-based likelihood.

One iteration resamples the latent matrix within the family's constraint set,
then the regression coefficients and sender/receiver effects, the effect
covariance, and the dyadic correlation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from . import _kernels
from .constraints import validate_membership
from .core import MISSING, DesignData, Family, ScoreMatrix, SrmParams
from .posterior import PosteriorSample

log = logging.getLogger(__name__)

FIXABLE = frozenset({"beta", "ab", "sigma_ab", "rho"})


class SamplerError(RuntimeError):
    """Numerical failure inside the chain."""


@dataclass
class SamplerConfig:
    family: Family = Family.FRN
    n_iter: int = 10_000
    burn_in: int = 500
    thin: int = 5
    seed: int = 0
    prior_beta_variance: float = 100.0
    prior_sigma_df: float = 4.0
    prior_sigma_scale: np.ndarray = field(default_factory=lambda: np.eye(2))
    rho_proposal_sd: float = 0.1
    # "joint" draws (beta, a, b) as one Gaussian block; "sequential" draws
    # beta | a, b and then sweeps (a_i, b_i) node by node
    regression_update: str = "joint"
    # "collapsed" integrates the dyads whose truncation boxes do not depend on
    # each other out of the rho step; "residual" conditions on all of Y
    rho_update: str = "collapsed"
    # generalized Gibbs translations of whole latent rows/columns with a_i/b_j
    translation_moves: bool = True
    fixed: frozenset = frozenset()
    check_membership: bool = True
    debug: bool = False

    def __post_init__(self):
        self.family = Family.parse(self.family)
        self.prior_sigma_scale = np.asarray(self.prior_sigma_scale, dtype=float).reshape(2, 2)
        self.fixed = frozenset(self.fixed)
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.prior_beta_variance < 0 or self.rho_proposal_sd < 0:
            raise ValueError("prior variance and proposal sd must be nonnegative")
        if self.prior_sigma_df < 3:
            raise ValueError("inverse-Wishart prior needs at least 3 degrees of freedom")
        if self.regression_update not in ("joint", "sequential"):
            raise ValueError("regression_update must be 'joint' or 'sequential'")
        if self.rho_update not in ("collapsed", "residual"):
            raise ValueError("rho_update must be 'collapsed' or 'residual'")
        if not self.fixed <= FIXABLE:
            raise ValueError(f"fixed must be a subset of {sorted(FIXABLE)}")

    @property
    def n_saved(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass
class ChainState:
    params: SrmParams
    latent: np.ndarray
    rng: np.random.Generator
    iteration: int = 0
    rho_accepted: int = 0
    rho_proposed: int = 0


def initial_latent(S: ScoreMatrix, rng) -> np.ndarray:
    """A latent matrix inside every family's constraint set.

    Unranked entries get ``-|z|``, ranked entries get sorted ``|z|`` in score
    order and missing entries plain ``z``.
    """
    rng = np.random.default_rng(rng)
    n = S.n
    Y = rng.standard_normal((n, n))
    s = S.scores
    Y[s == 0] = -np.abs(Y[s == 0])
    for i in range(n):
        cols = np.flatnonzero(s[i] > 0)
        if cols.size:
            vals = np.sort(np.abs(Y[i, cols]))
            Y[i, cols[np.argsort(s[i, cols])]] = vals
    np.fill_diagonal(Y, 0.0)
    return Y


class RegressionSystem:
    """Gaussian full conditional of ``theta = (beta, a, b)`` given Y, Sigma_ab and rho.

    Uses the precision ``w11 A1 + w12 A2 + prior`` where ``A1`` sums
    ``d_ij d_ij'`` and ``A2`` sums ``d_ij d_ji'`` over ordered pairs, with
    ``d_ij = (x_ij, e_i, e_j)`` and ``(w11, w12)`` the entries of the inverse
    dyadic correlation matrix. Without sender effects ``a`` drops out.
    """

    def __init__(self, X: np.ndarray, with_a: bool = True):
        n, _, p = X.shape
        self.X = X
        self.n, self.p, self.with_a = n, p, with_a
        R = X.sum(axis=1)  # R[i] = sum_j x_ij
        C = X.sum(axis=0)  # C[j] = sum_i x_ij
        eye, ones = np.eye(n), np.ones((n, n))
        xx = np.einsum("ijk,ijl->kl", X, X)
        xxt = np.einsum("ijk,jil->kl", X, X)
        blocks1 = {("b", "b"): xx, ("b", "a"): R.T, ("b", "r"): C.T,
                   ("a", "a"): (n - 1) * eye, ("a", "r"): ones - eye, ("r", "r"): (n - 1) * eye}
        blocks2 = {("b", "b"): xxt, ("b", "a"): C.T, ("b", "r"): R.T,
                   ("a", "a"): ones - eye, ("a", "r"): (n - 1) * eye, ("r", "r"): ones - eye}
        # "b" is beta, "a" sender effects, "r" receiver effects
        keys = ["b", "a", "r"] if with_a else ["b", "r"]
        self.A1 = self._assemble(blocks1, keys)
        self.A2 = self._assemble(blocks2, keys)
        self.q = self.A1.shape[0]
        self.slices = {}
        start = 0
        for k in keys:
            width = p if k == "b" else n
            self.slices[k] = slice(start, start + width)
            start += width

    def _assemble(self, blocks, keys):
        rows = []
        for r in keys:
            row = []
            for c in keys:
                blk = blocks.get((r, c))
                row.append(blk if blk is not None else blocks[(c, r)].T)
            rows.append(np.hstack(row))
        return np.vstack(rows)

    def precision(self, rho: float, sigma_ab: np.ndarray, prior_beta_variance: float) -> np.ndarray:
        w11, w12 = 1.0 / (1.0 - rho * rho), -rho / (1.0 - rho * rho)
        Q = w11 * self.A1 + w12 * self.A2
        sb = self.slices["b"]
        if prior_beta_variance > 0:
            Q[sb, sb] += np.eye(self.p) / prior_beta_variance
        n = self.n
        idx = np.arange(n)
        if self.with_a:
            P = np.linalg.inv(sigma_ab)
            ia, ir = self.slices["a"].start + idx, self.slices["r"].start + idx
            Q[ia, ia] += P[0, 0]
            Q[ir, ir] += P[1, 1]
            Q[ia, ir] += P[0, 1]
            Q[ir, ia] += P[0, 1]
        else:
            ir = self.slices["r"].start + idx
            Q[ir, ir] += 1.0 / sigma_ab[1, 1]
        return Q

    def linear(self, Y: np.ndarray, rho: float) -> np.ndarray:
        w11, w12 = 1.0 / (1.0 - rho * rho), -rho / (1.0 - rho * rho)
        Yt = w11 * Y + w12 * Y.T
        np.fill_diagonal(Yt, 0.0)
        parts = [np.einsum("ijk,ij->k", self.X, Yt)]
        if self.with_a:
            parts.append(Yt.sum(axis=1))
        parts.append(Yt.sum(axis=0))
        return np.concatenate(parts)

    def pack(self, params: SrmParams) -> np.ndarray:
        parts = [params.beta] + ([params.a] if self.with_a else []) + [params.b]
        return np.concatenate(parts)

    def unpack(self, theta: np.ndarray, params: SrmParams) -> None:
        params.beta = theta[self.slices["b"]].copy()
        if self.with_a:
            params.a = theta[self.slices["a"]].copy()
        params.b = theta[self.slices["r"]].copy()


def _draw_gaussian(Q: np.ndarray, h: np.ndarray, rng) -> np.ndarray:
    """Draw from N(Q^{-1} h, Q^{-1})."""
    try:
        L = linalg.cholesky(Q, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise SamplerError("singular information matrix: the design may be collinear") from None
    w = linalg.solve_triangular(L, h, lower=True, check_finite=False)
    return linalg.solve_triangular(L.T, w + rng.standard_normal(h.size), lower=False, check_finite=False)


class GibbsSampler:
    """Owns the precomputed pieces for one (scores, design, config) triple."""

    def __init__(self, S: ScoreMatrix, design: DesignData, config: SamplerConfig):
        if S.n != design.n:
            raise ValueError("scores and design have different node counts")
        if config.family is Family.RANK and design.has_row_terms:
            raise ValueError("the rank likelihood cannot identify an intercept or nominator (row) regressors: "
                             "they shift whole rows of Y, which leaves within-row orderings unchanged; "
                             "remove them from the design")
        self.S, self.design, self.config = S, design, config
        self.family = config.family
        self.X = design.tensor()
        self.with_a = self.family is not Family.RANK
        self.system = RegressionSystem(self.X, with_a=self.with_a)
        self.scores = np.ascontiguousarray(S.scores)
        self.m = np.ascontiguousarray(S.max_nominations)
        self.ranked, self.pos, self.d = _kernels.row_layout(self.scores)
        iu = np.triu_indices(S.n, 1)
        self._iu = iu
        # dyads whose two boxes are half-lines fixed by the entries outside
        # this set: both entries unranked or missing, or any dyad for BINARY
        sc = self.scores
        if self.family is Family.BINARY:
            free = np.ones(iu[0].size, dtype=bool)
        else:
            free = (sc[iu] <= 0) & (sc.T[iu] <= 0)
        self._free = free
        self._free_i = np.ascontiguousarray(iu[0][free])
        self._free_j = np.ascontiguousarray(iu[1][free])

    # -- state -----------------------------------------------------------------
    def init_state(self, params: SrmParams | None = None, latent: np.ndarray | None = None,
                   rng=None) -> ChainState:
        rng = np.random.default_rng(self.config.seed if rng is None else rng)
        n, p = self.S.n, self.design.p
        params = SrmParams.initial(p, n) if params is None else params.copy()
        if params.beta.size != p:
            raise ValueError(f"beta has {params.beta.size} entries, design has {p}")
        if not self.with_a:
            params.a = np.zeros(n)
        Y = initial_latent(self.S, rng) if latent is None else np.array(latent, dtype=float)
        ok, bad = validate_membership(self.S, Y, self.family)
        if not ok:
            raise ValueError(f"initial latent matrix violates the {self.family.value} constraints: {bad[:3]}")
        return ChainState(params, np.ascontiguousarray(Y), rng)

    def mean(self, params: SrmParams) -> np.ndarray:
        return params.mean_matrix(self.X)

    # -- updates ---------------------------------------------------------------
    def update_y(self, state: ChainState) -> ChainState:
        mu = np.ascontiguousarray(self.mean(state.params))
        try:
            _kernels.sweep_latent(state.latent, self.scores, self.m, mu, float(state.params.rho),
                                  self.family.code, self.ranked, self.pos, self.d, state.rng)
        except ValueError as exc:
            raise SamplerError(str(exc)) from None
        if self.config.debug:
            ok, bad = validate_membership(self.S, state.latent, self.family)
            if not ok:
                raise SamplerError(f"latent matrix left the constraint set at iteration {state.iteration}: {bad[:3]}")
        return state

    def update_translations(self, state: ChainState) -> ChainState:
        """Shift latent rows with their sender effects and columns with their receiver effects."""
        prm = state.params
        a = np.array(prm.a, dtype=float)
        b = np.array(prm.b, dtype=float)
        _kernels.translate_effects(state.latent, self.scores, self.m, self.family.code, a, b,
                                   np.ascontiguousarray(prm.sigma_ab, dtype=float), self.with_a,
                                   self.ranked, self.pos, self.d, state.rng)
        prm.a, prm.b = a, b
        return state

    def _system(self, state):
        prm = state.params
        Q = self.system.precision(prm.rho, prm.sigma_ab, self.config.prior_beta_variance)
        h = self.system.linear(state.latent, prm.rho)
        return Q, h

    def _conditional_block(self, Q, h, theta, idx, rng):
        rest = np.ones(theta.size, dtype=bool)
        rest[idx] = False
        hk = h[idx] - Q[np.ix_(idx, rest)] @ theta[rest]
        return _draw_gaussian(Q[np.ix_(idx, idx)], hk, rng)

    def update_beta(self, state: ChainState) -> ChainState:
        """beta from its full conditional given a, b, Sigma_ab, rho and Y."""
        if self.config.prior_beta_variance == 0:
            state.params.beta = np.zeros(self.design.p)
            return state
        Q, h = self._system(state)
        theta = self.system.pack(state.params)
        idx = np.arange(self.system.slices["b"].start, self.system.slices["b"].stop)
        theta[idx] = self._conditional_block(Q, h, theta, idx, state.rng)
        self.system.unpack(theta, state.params)
        return state

    def update_ab(self, state: ChainState) -> ChainState:
        """(a_i, b_i) node by node from their bivariate full conditionals."""
        Q, h = self._system(state)
        theta = self.system.pack(state.params)
        sl = self.system.slices
        for i in range(self.S.n):
            idx = [sl["r"].start + i] if not self.with_a else [sl["a"].start + i, sl["r"].start + i]
            idx = np.array(idx)
            theta[idx] = self._conditional_block(Q, h, theta, idx, state.rng)
        self.system.unpack(theta, state.params)
        return state

    def update_regression(self, state: ChainState) -> ChainState:
        """(beta, a, b) jointly from their Gaussian full conditional."""
        if self.config.prior_beta_variance == 0:
            state.params.beta = np.zeros(self.design.p)
            return self.update_ab(state)
        Q, h = self._system(state)
        self.system.unpack(_draw_gaussian(Q, h, state.rng), state.params)
        return state

    def update_sigma_ab(self, state: ChainState) -> ChainState:
        cfg, prm = self.config, state.params
        n = prm.b.size
        if not self.with_a:
            # marginal of the inverse-Wishart prior for the receiver variance
            df = cfg.prior_sigma_df - 1 + n
            scale = cfg.prior_sigma_scale[1, 1] + float(prm.b @ prm.b)
            prm.sigma_ab = np.diag([1.0, scale / state.rng.chisquare(df)])
            return state
        E = np.column_stack([prm.a, prm.b])
        scale = cfg.prior_sigma_scale + E.T @ E
        draw = stats.invwishart.rvs(df=cfg.prior_sigma_df + n, scale=scale, random_state=state.rng)
        draw = 0.5 * (draw + draw.T)
        if np.any(np.linalg.eigvalsh(draw) <= 0) or not np.all(np.isfinite(draw)):
            raise SamplerError("inverse-Wishart draw is not positive definite")
        prm.sigma_ab = draw
        return state

    def dyad_sums(self, state: ChainState, mask=None) -> tuple[float, float, float, int]:
        E = state.latent - self.mean(state.params)
        e1, e2 = E[self._iu], E.T[self._iu]
        if mask is not None:
            e1, e2 = e1[mask], e2[mask]
        return float(e1 @ e1), float(e2 @ e2), float(e1 @ e2), e1.size

    def update_rho(self, state: ChainState) -> ChainState:
        """Random-walk Metropolis on atanh(rho) under a uniform prior on rho.

        With ``rho_update="collapsed"`` the dyads in ``_free`` enter through
        their box probabilities rather than their latent values, and are then
        redrawn exactly from their bivariate truncated normal given the new
        rho. Both variants leave the same joint posterior invariant.
        """
        sd = self.config.rho_proposal_sd
        if sd == 0:
            return state
        collapsed = self.config.rho_update == "collapsed" and self._free_i.size > 0
        if collapsed:
            mu = np.ascontiguousarray(self.mean(state.params))
            s1, c1, s2, c2 = _kernels.dyad_boxes(state.latent, self.scores, self.m, mu, self.family.code,
                                                 self._free_i, self._free_j, self.ranked, self.pos, self.d)
            sg = s1 * s2
            s11, s22, s12, ndy = self.dyad_sums(state, ~self._free)
        else:
            s11, s22, s12, ndy = self.dyad_sums(state)

        def log_target(z, slot):
            r = math.tanh(z)
            one = 1.0 - r * r
            if one <= 0.0:
                return -math.inf
            out = math.log(one)
            if ndy:
                out += -0.5 * ndy * math.log(one) - 0.5 * (s11 + s22 - 2.0 * r * s12) / one
            if collapsed:
                out += _kernels.collapsed_loglik(c1, c2, sg, r, probs[slot])
            return out

        z = math.atanh(state.params.rho)
        z_new = z + sd * state.rng.standard_normal()
        if collapsed:
            probs = np.empty((2, sg.size))
        state.rho_proposed += 1
        keep = 0
        if math.log(state.rng.random()) < log_target(z_new, 1) - log_target(z, 0):
            r_new = math.tanh(z_new)
            if abs(r_new) < 1.0:
                state.params.rho = r_new
                state.rho_accepted += 1
                keep = 1
        if collapsed:
            _kernels.redraw_dyads(state.latent, mu, self._free_i, self._free_j, s1, c1, s2, c2,
                                  float(state.params.rho), probs[keep], state.rng)
        return state

    def step(self, state: ChainState) -> ChainState:
        fixed = self.config.fixed
        self.update_y(state)
        if self.config.translation_moves and "ab" not in fixed:
            self.update_translations(state)
        if self.config.regression_update == "joint" and not ({"beta", "ab"} & fixed):
            self.update_regression(state)
        else:
            if "beta" not in fixed:
                self.update_beta(state)
            if "ab" not in fixed:
                self.update_ab(state)
        if "sigma_ab" not in fixed:
            self.update_sigma_ab(state)
        if "rho" not in fixed:
            self.update_rho(state)
        state.iteration += 1
        return state

    # -- output ----------------------------------------------------------------
    def param_names(self) -> list[str]:
        tail = ["sigma_aa", "sigma_ab", "sigma_bb", "rho"] if self.with_a else ["sigma_bb", "rho"]
        return self.design.names + tail

    def record(self, state: ChainState) -> np.ndarray:
        prm = state.params
        sig = prm.sigma_ab
        tail = [sig[0, 0], sig[0, 1], sig[1, 1], prm.rho] if self.with_a else [sig[1, 1], prm.rho]
        return np.concatenate([prm.beta, tail])

    def run(self, params: SrmParams | None = None, latent: np.ndarray | None = None,
            meta: dict | None = None, callback=None) -> PosteriorSample:
        cfg = self.config
        state = self.init_state(params, latent)
        rows = []
        checks = failures = 0
        for it in range(cfg.n_iter):
            self.step(state)
            done = it + 1
            if done > cfg.burn_in and (done - cfg.burn_in) % cfg.thin == 0:
                rows.append(self.record(state))
                if cfg.check_membership:
                    checks += 1
                    ok, _ = validate_membership(self.S, state.latent, self.family)
                    failures += not ok
                if callback is not None:
                    callback(state)
        info = {"family": cfg.family.value, "seed": cfg.seed, "n_iter": cfg.n_iter, "burn_in": cfg.burn_in,
                "thin": cfg.thin, "n": self.S.n,
                "rho_acceptance": round(state.rho_accepted / max(state.rho_proposed, 1), 6),
                "membership_checks": checks, "membership_failures": failures}
        info.update(meta or {})
        self.final_state = state
        return PosteriorSample(self.param_names(), np.array(rows).reshape(len(rows), -1), info)


def run_chain(S: ScoreMatrix, design: DesignData, config: SamplerConfig, params: SrmParams | None = None,
              latent: np.ndarray | None = None, meta: dict | None = None) -> PosteriorSample:
    """Run one chain and return the saved draws of (beta, Sigma_ab, rho).

    Saves every ``thin``-th iteration after ``burn_in``; the result depends
    only on the inputs and ``config.seed``.
    """
    return GibbsSampler(S, design, config).run(params, latent, meta)


def gibbs_update_y(state, S, design, config):
    return GibbsSampler(S, design, config).update_y(state)


def gibbs_update_beta(state, S, design, config):
    return GibbsSampler(S, design, config).update_beta(state)


def gibbs_update_ab(state, S, design, config):
    return GibbsSampler(S, design, config).update_ab(state)


def gibbs_update_sigma_ab(state, S, design, config):
    return GibbsSampler(S, design, config).update_sigma_ab(state)


def gibbs_update_rho(state, S, design, config):
    return GibbsSampler(S, design, config).update_rho(state)


def chain_seed(seed: int, index: int) -> int:
    """Independent 63-bit seed for chain ``index`` derived from a base seed."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0] >> np.uint64(1))


__all__ = ["SamplerConfig", "ChainState", "GibbsSampler", "RegressionSystem", "SamplerError", "run_chain",
           "initial_latent", "gibbs_update_y", "gibbs_update_beta", "gibbs_update_ab", "gibbs_update_sigma_ab",
           "gibbs_update_rho", "chain_seed", "MISSING"]
