"""Normal draws restricted to an interval, safe deep in the tails.

Inside six standard deviations the draw inverts the normal CDF in log space;
beyond that it uses exponential (or, for short intervals, uniform) rejection.
"""
import numpy as np

from . import _kernels
from .core import Interval


def sample_truncated_normal(mean, sd, interval=Interval(), rng=None, size=None):
    """Draw from ``Normal(mean, sd**2)`` conditioned on ``interval``.

    Parameters
    ----------
    mean, sd : float
    interval : Interval or (lo, hi) tuple
    rng : numpy.random.Generator
    size : int, optional
        Number of draws; a scalar is returned when omitted.
    """
    lo, hi = (interval.lo, interval.hi) if isinstance(interval, Interval) else map(float, interval)
    if lo > hi:
        raise ValueError(f"empty interval ({lo}, {hi})")
    if not sd > 0:
        raise ValueError("sd must be positive")
    rng = np.random.default_rng(rng)
    if size is None:
        return float(_kernels.truncnorm(float(mean), float(sd), float(lo), float(hi), rng))
    return _kernels.truncnorm_many(float(mean), float(sd), float(lo), float(hi), int(size), rng)


def normal_quantile(p: float) -> float:
    """Standard normal quantile as used by the sampler."""
    return float(_kernels.ndtri(float(p)))


def log_normal_cdf(x: float) -> float:
    return float(_kernels.log_ndtr(float(x)))


def truncated_moments(mean: float, sd: float, lo: float, hi: float) -> tuple[float, float]:
    """Closed-form mean and variance of a truncated normal (for reporting)."""
    from scipy.stats import truncnorm

    a, b = (lo - mean) / sd, (hi - mean) / sd
    m, v = truncnorm.stats(a, b, loc=mean, scale=sd, moments="mv")
    return float(m), float(v)


__all__ = ["sample_truncated_normal", "normal_quantile", "log_normal_cdf", "truncated_moments"]
