"""Posterior sample tables, summaries, MCMC diagnostics and cross-likelihood comparisons."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LEVELS = (0.025, 0.5, 0.975)
EFFECT_TYPES = ("intercept", "row", "column", "mean-zero dyadic", "other dyadic")


@dataclass
class PosteriorSample:
    """Saved MCMC draws: one row per saved iteration, one column per parameter."""

    names: list
    draws: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.names = list(self.names)
        self.draws = np.asarray(self.draws, dtype=float).reshape(-1, len(self.names))

    def __len__(self):
        return self.draws.shape[0]

    def __getitem__(self, name) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    @property
    def beta_names(self) -> list[str]:
        return [k for k in self.names if k == "intercept" or k.split(".")[0] in ("row", "col", "dyad")]

    def to_csv(self, path) -> None:
        """Write ``# key=value`` metadata lines, a header and ``%.17g`` rows."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            for key in sorted(self.meta):
                fh.write(f"# {key}={self.meta[key]}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.names)
            for row in self.draws:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "PosteriorSample":
        meta = {}
        rows = []
        with Path(path).open() as fh:
            lines = [ln for ln in fh if ln.strip()]
        body = []
        for ln in lines:
            if ln.startswith("#"):
                key, _, value = ln[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            else:
                body.append(ln)
        reader = csv.reader(body)
        names = next(reader)
        rows = [[float(v) for v in r] for r in reader]
        return cls(names, np.array(rows, dtype=float).reshape(-1, len(names)), meta)


def quantile_intervals(sample: PosteriorSample, levels=LEVELS) -> dict:
    """Empirical quantiles per parameter, linear interpolation between order statistics."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    q = np.quantile(sample.draws, list(levels), axis=0, method="linear")
    return {name: dict(zip(levels, q[:, k].tolist())) for k, name in enumerate(sample.names)}


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0]


def ess_1d(x) -> float:
    """Effective sample size by Geyer's initial positive sequence.

    Returns NaN for a constant chain.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.ptp(x) == 0.0 or not np.all(np.isfinite(x)):
        return math.nan
    rho = _autocorr(x)
    tau = -1.0
    prev = math.inf
    for k in range(0, n - 1, 2):
        gamma = rho[k] + rho[k + 1]
        if gamma <= 0.0:
            break
        # initial monotone sequence keeps the pair sums non-increasing
        gamma = min(gamma, prev)
        prev = gamma
        tau += 2.0 * gamma
    # antithetic chains can push tau toward 0; cap ESS at n*log10(n)
    return n / max(tau, 1.0 / math.log10(max(n, 10)))


def effective_sample_size(sample: PosteriorSample) -> dict:
    """ESS per parameter; degenerate (constant) columns map to NaN."""
    if len(sample) < 100:
        raise ValueError("effective sample size needs at least 100 draws")
    return {name: ess_1d(sample.draws[:, k]) for k, name in enumerate(sample.names)}


def concentration_ratio(sample_f: PosteriorSample, sample_c: PosteriorSample, beta_true: dict) -> dict:
    """E[(beta - beta*)^2 | F] / E[(beta - beta*)^2 | C] for each parameter in ``beta_true``."""
    out = {}
    for name, truth in beta_true.items():
        if name in sample_f.names and name in sample_c.names:
            num = np.mean((sample_f[name] - truth) ** 2)
            den = np.mean((sample_c[name] - truth) ** 2)
            out[name] = float(num / den)
    return out


def effect_type(name: str, dyad_means: dict | None = None, tol: float = 0.1) -> str:
    """Classify a coefficient name into one of ``EFFECT_TYPES``.

    Dyadic regressors count as mean-zero when ``|mean| <= tol * sd`` according
    to ``dyad_means`` (name -> (mean, sd)); without that information they are
    treated as mean-zero.
    """
    if name == "intercept":
        return "intercept"
    kind, _, short = name.partition(".")
    if kind == "row":
        return "row"
    if kind == "col":
        return "column"
    if kind == "dyad":
        if dyad_means and name in dyad_means:
            mean, sd = dyad_means[name]
            return "mean-zero dyadic" if abs(mean) <= tol * sd else "other dyadic"
        return "mean-zero dyadic"
    raise ValueError(f"{name!r} is not a regression coefficient")


def _median_width(sample, name):
    q = np.quantile(sample[name], LEVELS, method="linear")
    return q[1], q[2] - q[0]


def comparison_table(samples: dict, groups: dict | None = None, reference: str = "FRN") -> dict:
    """Geometric-mean ratios of FRN estimates to those of each other family.

    Parameters
    ----------
    samples : dict
        family name -> list of PosteriorSample, index-aligned across families
        (one entry per dataset).
    groups : dict, optional
        coefficient name -> effect type; defaults to ``effect_type``.

    Returns
    -------
    dict
        family -> effect type -> (magnitude ratio, width ratio). Ratios are
        ``|median_FRN| / |median_other|`` and ``width_FRN / width_other``;
        cells without shared coefficients are ``(nan, nan)`` (reported as NA).
    """
    if reference not in samples:
        raise ValueError(f"{reference} samples are required")
    ref = samples[reference]
    table = {}
    for fam, runs in samples.items():
        if len(runs) != len(ref):
            raise ValueError(f"{fam}: {len(runs)} datasets, {reference} has {len(ref)}")
        logs = {t: ([], []) for t in EFFECT_TYPES}
        for s_ref, s_other in zip(ref, runs):
            for name in s_ref.beta_names:
                if name not in s_other.names:
                    continue
                etype = (groups or {}).get(name) or effect_type(name)
                m_ref, w_ref = _median_width(s_ref, name)
                m_oth, w_oth = _median_width(s_other, name)
                logs[etype][0].append(math.log(abs(m_ref)) - math.log(abs(m_oth)))
                logs[etype][1].append(math.log(w_ref) - math.log(w_oth))
        table[fam] = {t: (math.exp(np.mean(a)) if a else math.nan, math.exp(np.mean(b)) if b else math.nan)
                      for t, (a, b) in logs.items()}
    return table


def summary_rows(sample: PosteriorSample) -> list[dict]:
    """Per-parameter mean, sd, quantiles and ESS, for CSV output."""
    q = quantile_intervals(sample)
    ess = effective_sample_size(sample) if len(sample) >= 100 else {k: math.nan for k in sample.names}
    rows = []
    for k, name in enumerate(sample.names):
        col = sample.draws[:, k]
        rows.append({"parameter": name, "mean": float(col.mean()), "sd": float(col.std(ddof=1)) if col.size > 1 else math.nan,
                     "q025": q[name][0.025], "q50": q[name][0.5], "q975": q[name][0.975], "ess": ess[name]})
    return rows
