"""Compiled inner loops: truncated normal draws and the latent-matrix sweep.

Family codes: 0 FRN, 1 RANK, 2 BINARY, 3 CENSORED_BINARY. Missing scores are
negative and leave the entry unconstrained.
"""
import math

import numpy as np
from numba import njit

SQRT2 = math.sqrt(2.0)
TAIL_START = 6.0
INF = np.inf

# Acklam's rational approximation to the normal quantile function.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)


@njit(cache=True)
def ndtr(x):
    return 0.5 * math.erfc(-x / SQRT2)


@njit(cache=True)
def log_ndtr(x):
    if x == -INF:
        return -INF
    if x > 0.0:
        return math.log1p(-0.5 * math.erfc(x / SQRT2))
    if x > -37.0:
        return math.log(0.5 * math.erfc(-x / SQRT2))
    # asymptotic Mills-ratio series; the next term is below 1e-16 here
    z = 1.0 / (x * x)
    series = 1.0 - z * (1.0 - z * (3.0 - z * (15.0 - z * 105.0)))
    return -0.5 * x * x - math.log(-x) - 0.5 * math.log(2.0 * math.pi) + math.log(series)


@njit(cache=True)
def _ndtri_lower(p):
    """Quantile for 0 < p <= 0.5."""
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    if x > -30.0:
        # one Halley step against erfc brings the error to machine precision
        e = ndtr(x) - p
        u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    else:
        # Newton steps on the log scale, where ndtr would underflow
        lp = math.log(p)
        for _ in range(3):
            lc = log_ndtr(x)
            x = x - (lc - lp) * math.exp(lc + 0.5 * x * x + 0.5 * math.log(2.0 * math.pi))
    return x


@njit(cache=True)
def ndtri(p):
    if p <= 0.0:
        return -INF
    if p >= 1.0:
        return INF
    if p > 0.5:
        # 1 - p is exact for p in (0.5, 1)
        return -_ndtri_lower(1.0 - p)
    return _ndtri_lower(p)


@njit(cache=True)
def _upper_tail(a, b, rng):
    """Standard normal restricted to (a, b) with a >= TAIL_START."""
    if b - a < 1.0 / a:
        while True:
            x = a + (b - a) * rng.random()
            if math.log(rng.random()) < 0.5 * (a * a - x * x):
                return x
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        x = a + rng.exponential() / lam
        if x > b:
            continue
        if math.log(rng.random()) < -0.5 * (x - lam) * (x - lam):
            return x


@njit(cache=True)
def std_truncnorm(a, b, rng):
    """Standard normal restricted to the interval (a, b)."""
    if a > b:
        raise ValueError("empty truncation interval")
    if a == -INF and b == INF:
        return ndtri(rng.random())
    if a >= TAIL_START:
        return _upper_tail(a, b, rng)
    if b <= -TAIL_START:
        return -_upper_tail(-b, -a, rng)
    flip = a > 0.0
    if flip:
        a, b = -b, -a
    # now b > -TAIL_START; sample the lower-tail CDF in log space
    lb = log_ndtr(b)
    la = log_ndtr(a)
    u = rng.random()
    logp = lb + math.log(u + (1.0 - u) * math.exp(la - lb))
    x = ndtri(math.exp(logp))
    if x < a:
        x = a
    elif x > b:
        x = b
    return -x if flip else x


@njit(cache=True)
def truncnorm(mean, sd, lo, hi, rng):
    if sd == 0.0:
        return min(max(mean, lo), hi)
    return mean + sd * std_truncnorm((lo - mean) / sd, (hi - mean) / sd, rng)


@njit(cache=True)
def truncnorm_many(mean, sd, lo, hi, size, rng):
    out = np.empty(size)
    for k in range(size):
        out[k] = truncnorm(mean, sd, lo, hi, rng)
    return out


@njit(cache=True)
def row_layout(S):
    """Ranked columns of each row ordered by increasing score, plus counts."""
    n = S.shape[0]
    d = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if j != i and S[i, j] > 0:
                d[i] += 1
    width = max(1, d.max()) if n > 0 else 1
    ranked = -np.ones((n, width), dtype=np.int64)
    pos = -np.ones((n, n), dtype=np.int64)
    for i in range(n):
        k = 0
        for j in range(n):
            if j != i and S[i, j] > 0:
                ranked[i, k] = j
                k += 1
        # insertion sort by score, rows are short
        for u in range(1, k):
            c = ranked[i, u]
            v = u - 1
            while v >= 0 and S[i, ranked[i, v]] > S[i, c]:
                ranked[i, v + 1] = ranked[i, v]
                v -= 1
            ranked[i, v + 1] = c
        for u in range(k):
            pos[i, ranked[i, u]] = u
    return ranked, pos, d


@njit(cache=True)
def _max_unranked(Y, S, i):
    best = -INF
    arg = -1
    for k in range(S.shape[0]):
        if k != i and S[i, k] == 0 and Y[i, k] > best:
            best = Y[i, k]
            arg = k
    return best, arg


@njit(cache=True)
def _min_ranked_scan(Y, ranked, i, d):
    best = INF
    for u in range(d):
        v = Y[i, ranked[i, u]]
        if v < best:
            best = v
    return best


@njit(cache=True)
def pair_interval(Y, S, i, j, family, censored, ranked, pos, d, max_unranked):
    """Bounds for y_ij given the rest of row i."""
    s = S[i, j]
    if s < 0:
        return -INF, INF
    if family == 2:
        if s > 0:
            return 0.0, INF
        return -INF, 0.0
    di = d[i]
    if family == 3:
        if s > 0:
            return max(0.0, max_unranked), INF
        if not censored:
            return -INF, 0.0
        return -INF, _min_ranked_scan(Y, ranked, i, di)
    # FRN and RANK share the order brackets
    if s > 0:
        p = pos[i, j]
        if p > 0:
            lo = Y[i, ranked[i, p - 1]]
        else:
            lo = max_unranked
        if p < di - 1:
            hi = Y[i, ranked[i, p + 1]]
        else:
            hi = INF
        if family == 0 and lo < 0.0:
            lo = 0.0
        return lo, hi
    if family == 0 and not censored:
        return -INF, 0.0
    if di > 0:
        return -INF, Y[i, ranked[i, 0]]
    return -INF, INF


@njit(cache=True)
def all_intervals(Y, S, m, family):
    """Interval of every entry given the current Y, without updating."""
    n = Y.shape[0]
    ranked, pos, d = row_layout(S)
    lo = np.full((n, n), -INF)
    hi = np.full((n, n), INF)
    for i in range(n):
        mx, _ = _max_unranked(Y, S, i)
        censored = d[i] >= m[i]
        for j in range(n):
            if j != i:
                lo[i, j], hi[i, j] = pair_interval(Y, S, i, j, family, censored, ranked, pos, d, mx)
    return lo, hi


@njit(cache=True)
def sweep_latent(Y, S, m, mu, rho, family, ranked, pos, d, rng):
    """Resample every off-diagonal y_ij once, row by row, in place.

    y_ij | y_ji ~ N(mu_ij + rho (y_ji - mu_ji), 1 - rho^2) truncated to its
    family interval.
    """
    n = Y.shape[0]
    sd = math.sqrt(1.0 - rho * rho)
    for i in range(n):
        censored = d[i] >= m[i]
        mx, amx = _max_unranked(Y, S, i)
        for j in range(n):
            if j == i:
                continue
            lo, hi = pair_interval(Y, S, i, j, family, censored, ranked, pos, d, mx)
            if lo > hi:
                raise ValueError("empty truncation interval: latent state left the constraint set")
            mean = mu[i, j] + rho * (Y[j, i] - mu[j, i])
            v = truncnorm(mean, sd, lo, hi, rng)
            Y[i, j] = v
            if S[i, j] == 0:
                if v > mx:
                    mx = v
                    amx = j
                elif j == amx:
                    mx, amx = _max_unranked(Y, S, i)


# Gauss-Legendre nodes (positive half) and weights for 6, 12 and 20 points,
# as used by Genz's bivariate normal routine.
_GL_W = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
              0.2031674267230659, 0.2334925365383547, 0.2491470458134029]),
    np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
              0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
              0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
              0.1527533871307259]),
)
_GL_X = (
    np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970]),
    np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
              0.5873179542866171, 0.3678314989981802, 0.1252334085114692]),
    np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
              0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
              0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
              0.07652652113349733]),
)
_GL_W0, _GL_W1, _GL_W2 = _GL_W
_GL_X0, _GL_X1, _GL_X2 = _GL_X


@njit(cache=True)
def bvn_upper(h, k, r):
    """P(X > h, Y > k) for standard bivariate normal with correlation r (Genz)."""
    if h == INF or k == INF:
        return 0.0
    if h == -INF:
        return 1.0 if k == -INF else ndtr(-k)
    if k == -INF:
        return ndtr(-h)
    if r == 0.0:
        return ndtr(-h) * ndtr(-k)
    ar = abs(r)
    if ar < 0.3:
        w, x = _GL_W0, _GL_X0
    elif ar < 0.75:
        w, x = _GL_W1, _GL_X1
    else:
        w, x = _GL_W2, _GL_X2
    twopi = 2.0 * math.pi
    hk = h * k
    bvn = 0.0
    if ar < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = math.asin(r)
        for i in range(w.size):
            for sgn in (-1.0, 1.0):
                sn = math.sin(asr * (sgn * x[i] + 1.0) * 0.5)
                bvn += w[i] * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / (2.0 * twopi) + ndtr(-h) * ndtr(-k)
    else:
        if r < 0.0:
            k = -k
            hk = -hk
        if ar < 1.0:
            a_s = (1.0 - r) * (1.0 + r)
            a = math.sqrt(a_s)
            bs = (h - k) ** 2
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 16.0
            bvn = a * math.exp(-0.5 * (bs / a_s + hk)) * \
                (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0)
            if hk > -160.0:
                b = math.sqrt(bs)
                bvn -= math.exp(-0.5 * hk) * math.sqrt(twopi) * ndtr(-b / a) * b * \
                    (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            a = 0.5 * a
            for i in range(w.size):
                for sgn in (-1.0, 1.0):
                    xs = (a * (sgn * x[i] + 1.0)) ** 2
                    rs = math.sqrt(1.0 - xs)
                    asr = -0.5 * (bs / xs + hk)
                    if asr > -100.0:
                        bvn += a * w[i] * math.exp(asr) * \
                            (math.exp(-hk * xs / (2.0 * (1.0 + rs) ** 2)) / rs - (1.0 + c * xs * (1.0 + d * xs)))
            bvn = -bvn / twopi
        if r > 0.0:
            bvn += ndtr(-max(h, k))
        else:
            bvn = -bvn
            if k > h:
                if h < 0.0:
                    bvn += ndtr(k) - ndtr(h)
                else:
                    bvn += ndtr(-h) - ndtr(-k)
    return min(max(bvn, 0.0), 1.0)


@njit(cache=True)
def bvn_lower(h, k, r):
    """P(X <= h, Y <= k)."""
    return bvn_upper(-h, -k, r)


@njit(cache=True)
def _half_lines(lo, hi, mu):
    """Write {lo <= mu + z <= hi} with one infinite end as {s z <= c}."""
    if lo == -INF:
        return 1.0, hi - mu
    if hi == INF:
        return -1.0, mu - lo
    return 0.0, 0.0  # two-sided: not collapsible


@njit(cache=True)
def collapsed_loglik(c1, c2, sg, rho, probs):
    """Sum over dyads of log P(s1 z1 <= c1, s2 z2 <= c2) with corr(z1, z2) = rho.

    The box probabilities are written to ``probs``.
    """
    total = 0.0
    for t in range(c1.size):
        p = bvn_lower(c1[t], c2[t], sg[t] * rho)
        probs[t] = p
        if p <= 0.0:
            return -INF
        total += math.log(p)
    return total


@njit(cache=True)
def _bvn_box_draw(c1, c2, r, joint, rng):
    """(w1, w2) ~ standard bivariate normal with correlation r given w1 <= c1, w2 <= c2.

    ``joint`` is the box probability.
    """
    sd = math.sqrt(1.0 - r * r)
    if joint > 0.25:
        while True:
            w1 = rng.standard_normal()
            w2 = r * w1 + sd * rng.standard_normal()
            if w1 <= c1 and w2 <= c2:
                return w1, w2
    swap = ndtr(c2) < ndtr(c1)
    if swap:
        c1, c2 = c2, c1
    pa = ndtr(c1)
    if pa > 0.0 and joint / pa > 0.02:
        while True:
            w1 = std_truncnorm(-INF, c1, rng)
            if rng.random() < ndtr((c2 - r * w1) / sd):
                break
    else:
        # invert the first margin, F(x) = P(w1 <= x, w2 <= c2) / joint
        target = rng.random() * joint
        lo, hi = -40.0, min(c1, 40.0)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if bvn_lower(mid, c2, r) < target:
                lo = mid
            else:
                hi = mid
        w1 = 0.5 * (lo + hi)
    w2 = r * w1 + sd * std_truncnorm(-INF, (c2 - r * w1) / sd, rng)
    if swap:
        return w2, w1
    return w1, w2


@njit(cache=True)
def redraw_dyads(Y, mu, I, J, s1, c1, s2, c2, rho, probs, rng):
    """Exact joint redraw of the listed dyads inside their half-line boxes.

    ``probs`` holds the box probabilities at ``rho``.
    """
    for t in range(I.size):
        i, j = I[t], J[t]
        w1, w2 = _bvn_box_draw(c1[t], c2[t], s1[t] * s2[t] * rho, probs[t], rng)
        Y[i, j] = mu[i, j] + s1[t] * w1
        Y[j, i] = mu[j, i] + s2[t] * w2


@njit(cache=True)
def dyad_boxes(Y, S, m, mu, family, I, J, ranked, pos, d):
    """Sign and offset of each listed dyad's half-line truncation boxes."""
    nd = I.size
    s1 = np.empty(nd)
    c1 = np.empty(nd)
    s2 = np.empty(nd)
    c2 = np.empty(nd)
    n = Y.shape[0]
    mx = np.empty(n)
    for i in range(n):
        mx[i], _ = _max_unranked(Y, S, i)
    for t in range(nd):
        i, j = I[t], J[t]
        lo, hi = pair_interval(Y, S, i, j, family, d[i] >= m[i], ranked, pos, d, mx[i])
        s1[t], c1[t] = _half_lines(lo, hi, mu[i, j])
        lo, hi = pair_interval(Y, S, j, i, family, d[j] >= m[j], ranked, pos, d, mx[j])
        s2[t], c2[t] = _half_lines(lo, hi, mu[j, i])
        if lo == -INF and hi == INF:
            s2[t], c2[t] = 1.0, INF
    return s1, c1, s2, c2


@njit(cache=True)
def membership_ok(Y, S, m, family):
    """Strict check that Y lies in the family's constraint set."""
    n = Y.shape[0]
    ranked, pos, d = row_layout(S)
    for i in range(n):
        censored = d[i] >= m[i]
        mx, _ = _max_unranked(Y, S, i)
        if family != 1:
            for j in range(n):
                if j == i or S[i, j] < 0:
                    continue
                if S[i, j] > 0 and not Y[i, j] > 0.0:
                    return False
                if S[i, j] == 0 and not Y[i, j] <= 0.0 and (family == 2 or not censored):
                    return False
        if family == 2 or d[i] == 0:
            continue
        if family == 3:
            if not _min_ranked_scan(Y, ranked, i, d[i]) > mx:
                return False
            continue
        prev = mx
        for u in range(d[i]):
            v = Y[i, ranked[i, u]]
            if not v > prev:
                return False
            prev = v
    return True


@njit(cache=True)
def _row_shift_range(Y, S, m, family, i, d):
    """Shifts delta keeping row i of Y + delta in the family's set."""
    lo = -INF
    hi = INF
    censored = d[i] >= m[i]
    for k in range(S.shape[0]):
        if k == i or S[i, k] < 0:
            continue
        if S[i, k] > 0 and -Y[i, k] > lo:
            lo = -Y[i, k]
        if S[i, k] == 0 and (family == 2 or not censored) and -Y[i, k] < hi:
            hi = -Y[i, k]
    return lo, hi


@njit(cache=True)
def translate_effects(Y, S, m, family, a, b, sigma, rows, ranked, pos, d, rng):
    """Generalized Gibbs translations of (row i of Y, a_i) and (column j of Y, b_j).

    Shifting a row of Y together with a_i (or a column with b_j) leaves every
    residual unchanged, so the shift is drawn from the effect's conditional
    prior restricted to the shifts that keep Y in the constraint set.
    """
    n = Y.shape[0]
    saa, sab, sbb = sigma[0, 0], sigma[0, 1], sigma[1, 1]
    if rows:
        sd_a = math.sqrt(max(saa - sab * sab / sbb, 0.0))
        for i in range(n):
            lo, hi = _row_shift_range(Y, S, m, family, i, d)
            cm = sab / sbb * b[i]
            new = truncnorm(cm, sd_a, a[i] + lo, a[i] + hi, rng)
            delta = new - a[i]
            if not (lo < delta <= hi or (lo == -INF and hi == INF)):
                continue
            a[i] = new
            for k in range(n):
                if k != i:
                    Y[i, k] += delta
    mx = np.empty(n)
    amx = np.empty(n, dtype=np.int64)
    for i in range(n):
        mx[i], amx[i] = _max_unranked(Y, S, i)
    sd_b = math.sqrt(max(sbb - sab * sab / saa, 0.0)) if rows else math.sqrt(sbb)
    for j in range(n):
        lo = -INF
        hi = INF
        for i in range(n):
            if i == j:
                continue
            l, h = pair_interval(Y, S, i, j, family, d[i] >= m[i], ranked, pos, d, mx[i])
            if l - Y[i, j] > lo:
                lo = l - Y[i, j]
            if h - Y[i, j] < hi:
                hi = h - Y[i, j]
        cm = sab / saa * a[j] if rows else 0.0
        new = truncnorm(cm, sd_b, b[j] + lo, b[j] + hi, rng)
        delta = new - b[j]
        if not (lo < delta < hi or (lo == -INF and hi == INF)):
            continue
        b[j] = new
        for i in range(n):
            if i == j:
                continue
            Y[i, j] += delta
            if S[i, j] == 0:
                if Y[i, j] > mx[i]:
                    mx[i] = Y[i, j]
                    amx[i] = j
                elif amx[i] == j:
                    mx[i], amx[i] = _max_unranked(Y, S, i)
