"""Synthetic fixed-rank-nomination networks from the social relations model."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import DesignData, ScoreMatrix, SrmParams

GROUP_SCALE = 0.42
BETA_NAMES = ("intercept", "row.xr", "col.xc", "dyad.x1", "dyad.x2")


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation design; ``replicates`` datasets are drawn from it.

    ``beta_true`` is ordered (intercept, row, column, dyad 1, dyad 2) to match
    the standard covariate recipe: standard-normal row, column and first dyad
    covariates plus a scaled group co-membership indicator.
    """

    n: int = 100
    m: int = 5
    beta_true: tuple = (-3.26, 1.0, 1.0, 1.0, 1.0)
    sigma_ab_true: tuple = ((1.0, 0.5), (0.5, 1.0))
    rho_true: float = 0.9
    recipe: str = "standard"
    replicates: int = 1
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two nodes")
        if not 1 <= self.m <= self.n - 1:
            raise ValueError("need 1 <= m <= n - 1")
        if self.recipe != "standard":
            raise ValueError(f"unknown covariate recipe {self.recipe!r}")

    def dataset_seed(self, replicate: int) -> np.random.SeedSequence:
        return np.random.SeedSequence([int(self.seed), int(replicate)])


@dataclass
class SimulatedNetwork:
    spec: ScenarioSpec
    replicate: int
    Y: np.ndarray
    design: DesignData
    truth: SrmParams
    S: ScoreMatrix = field(repr=False, default=None)

    @property
    def beta_true(self) -> dict:
        return dict(zip(self.design.names, self.truth.beta.tolist()))

    @property
    def dataset_id(self) -> str:
        return f"{self.spec.name}_m{self.spec.m}_r{self.replicate:02d}"


def standard_design(n: int, rng) -> DesignData:
    """Row, column and dyadic covariates of the standard recipe."""
    x_row = rng.standard_normal((n, 1))
    x_col = rng.standard_normal((n, 1))
    x1 = rng.standard_normal((n, n))
    z = rng.binomial(1, 0.5, size=n).astype(float)
    x2 = np.outer(z, z) / GROUP_SCALE
    x_dyad = np.stack([x1, x2], axis=2)
    x_dyad[np.arange(n), np.arange(n)] = 0.0
    return DesignData(x_row, x_col, x_dyad, ("xr",), ("xc",), ("x1", "x2"), intercept=True)


def draw_effects(n: int, sigma_ab, rng) -> tuple[np.ndarray, np.ndarray]:
    ab = rng.multivariate_normal(np.zeros(2), np.asarray(sigma_ab, dtype=float), size=n, method="cholesky")
    return ab[:, 0].copy(), ab[:, 1].copy()


def draw_dyadic_errors(n: int, rho: float, rng) -> np.ndarray:
    """Unit-variance errors with corr(e_ij, e_ji) = rho; zero diagonal."""
    iu = np.triu_indices(n, 1)
    u = rng.standard_normal(iu[0].size)
    v = rng.standard_normal(iu[0].size)
    E = np.zeros((n, n))
    E[iu] = u
    E.T[iu] = rho * u + np.sqrt(1.0 - rho * rho) * v
    return E


def simulate_latent(design: DesignData, params: SrmParams, rng, X: np.ndarray | None = None) -> np.ndarray:
    """Y = beta' x_ij + a_i + b_j + e_ij with dyad-correlated unit-variance errors."""
    X = design.tensor() if X is None else X
    Y = params.mean_matrix(X) + draw_dyadic_errors(design.n, params.rho, rng)
    np.fill_diagonal(Y, 0.0)
    return Y


def simulate_srm(spec: ScenarioSpec, replicate: int = 0, rng=None):
    """Draw covariates, random effects and the latent relation matrix.

    Returns
    -------
    (Y, design, truth)
    """
    rng = np.random.default_rng(spec.dataset_seed(replicate) if rng is None else rng)
    design = standard_design(spec.n, rng)
    a, b = draw_effects(spec.n, spec.sigma_ab_true, rng)
    truth = SrmParams(np.array(spec.beta_true, dtype=float), a, b, np.array(spec.sigma_ab_true), spec.rho_true)
    Y = simulate_latent(design, truth, rng)
    return Y, design, truth


def simulate_network(spec: ScenarioSpec, replicate: int = 0) -> SimulatedNetwork:
    Y, design, truth = simulate_srm(spec, replicate)
    net = SimulatedNetwork(spec, replicate, Y, design, truth)
    net.S = frn_transform(Y, spec.m)
    return net


def _row_ranks(Y: np.ndarray, rng=None) -> np.ndarray:
    """Rank of each off-diagonal entry within its row, 1 = largest."""
    n = Y.shape[0]
    V = np.array(Y, dtype=float)
    off = ~np.eye(n, dtype=bool)
    # strict order is required; ties only arise from rounded input
    for i in range(n):
        row = V[i, off[i]]
        if np.unique(row).size != row.size:
            rng = np.random.default_rng(0) if rng is None else rng
            scale = np.spacing(np.abs(row).max() + 1.0) * 16
            V[i, off[i]] = row + scale * rng.standard_normal(row.size)
    V[~off] = -np.inf
    order = np.argsort(-V, axis=1, kind="stable")
    ranks = np.empty((n, n), dtype=np.int64)
    ranks[np.arange(n)[:, None], order] = np.arange(1, n + 1)[None, :]
    return ranks


def frn_transform(Y: np.ndarray, m_per_row) -> ScoreMatrix:
    """Scores s_ij = max(m_i - rank_i(y_ij) + 1, 0) * 1(y_ij > 0)."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    m = np.broadcast_to(np.asarray(m_per_row, dtype=np.int64), (n,))
    ranks = _row_ranks(Y)
    s = np.maximum(m[:, None] - ranks + 1, 0) * (Y > 0)
    np.fill_diagonal(s, 0)
    return ScoreMatrix(s, m)


def uncensored_outdegrees(Y: np.ndarray) -> np.ndarray:
    off = ~np.eye(Y.shape[0], dtype=bool)
    return ((Y > 0) & off).sum(axis=1)


def censoring_rate(Y: np.ndarray, m) -> float:
    """Fraction of rows whose uncensored outdegree exceeds the nomination limit."""
    return float(np.mean(uncensored_outdegrees(Y) > np.asarray(m)))


def positive_fraction(Y: np.ndarray) -> float:
    off = ~np.eye(Y.shape[0], dtype=bool)
    return float(np.mean(Y[off] > 0))


def solve_intercept(target_outdegree: float, n: int = 100, template: ScenarioSpec | None = None,
                    samples: int = 100_000, seed: int = 2013, tol: float = 1e-6) -> float:
    """Intercept giving a Monte Carlo mean uncensored outdegree of ``target_outdegree``.

    Bisection over the intercept with common random numbers for a single
    entry y_ij of the standard recipe.
    """
    template = template or ScenarioSpec(n=n)
    rng = np.random.default_rng(seed)
    beta = np.asarray(template.beta_true, dtype=float)
    xr, xc, x1 = rng.standard_normal((3, samples))
    x2 = rng.binomial(1, 0.5, size=samples) * rng.binomial(1, 0.5, size=samples) / GROUP_SCALE
    sig = np.asarray(template.sigma_ab_true, dtype=float)
    # a_i and b_j belong to different nodes, hence independent
    a = rng.standard_normal(samples) * np.sqrt(sig[0, 0])
    b = rng.standard_normal(samples) * np.sqrt(sig[1, 1])
    eps = rng.standard_normal(samples)
    eta = beta[1] * xr + beta[2] * xc + beta[3] * x1 + beta[4] * x2 + a + b + eps
    target = target_outdegree / (n - 1)

    def excess(b0):
        return np.mean(eta + b0 > 0) - target

    lo, hi = -50.0, 50.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def scenario_presets(name: str = "all") -> list[ScenarioSpec]:
    """Simulation designs.

    ``"ranks"``: n = 100, intercept -3.26, unit slopes, Sigma_ab with
    correlation .5, dyadic correlation .9, eight replicates each at m = 5 and
    m = 15. ``"information"``: the same recipe at m in {5, 15, 30, 50} with the
    intercept solved so the mean uncensored outdegree equals m.
    """
    out = []
    if name in ("ranks", "all"):
        for k, m in enumerate((5, 15)):
            out.append(ScenarioSpec(m=m, replicates=8, seed=1000 + k, name="ranks"))
    if name in ("information", "all"):
        base = ScenarioSpec()
        for k, m in enumerate((5, 15, 30, 50)):
            b0 = solve_intercept(m, n=base.n, template=base)
            beta = (round(b0, 6),) + tuple(base.beta_true[1:])
            out.append(replace(base, m=m, beta_true=beta, replicates=8, seed=2000 + k, name="information"))
    if not out:
        raise ValueError(f"unknown preset {name!r}")
    return out


def iter_datasets(specs):
    for spec in specs:
        for r in range(spec.replicates):
            yield simulate_network(spec, r)
