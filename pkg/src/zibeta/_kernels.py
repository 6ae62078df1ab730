"""Hot numeric kernels.

Every kernel exists twice: a scalar-loop version compiled with numba
(``*_nb``) and a vectorized numpy version (``*_np``).  The public names
dispatch on :data:`zibeta._accel.USE_NUMBA`.  Both paths take float64
arrays and return float64 arrays; invalid or non-convergent entries come
back as NaN and the callers turn that into exceptions.
"""
from math import exp, lgamma, log, log1p

import numpy as np
from scipy.special import gammaln

from ._accel import USE_NUMBA, njit

MAXIT = 20000
EPS = 1e-15
FPMIN = 1e-300
PPF_MAXIT = 300
PPF_TOL = 1e-12
MIN_MASS = 1e-300


# --------------------------------------------------------------------------
# regularized incomplete beta, numba path
# --------------------------------------------------------------------------


@njit
def _betacf_nb(a, b, x):
    # modified Lentz evaluation of the continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < EPS:
            return h
    return np.nan


@njit
def _betainc_scalar(a, b, x, lnorm):
    # lnorm = lgamma(a + b) - lgamma(a) - lgamma(b)
    if not (a > 0.0 and b > 0.0) or x != x:
        return np.nan
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = lnorm + a * log(x) + b * log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return exp(front) * _betacf_nb(a, b, x) / a
    return 1.0 - exp(front) * _betacf_nb(b, a, 1.0 - x) / b


@njit
def betainc_nb(a, b, x):
    out = np.empty(x.size)
    for i in range(x.size):
        ai = a[i]
        bi = b[i]
        if ai > 0.0 and bi > 0.0:
            lnorm = lgamma(ai + bi) - lgamma(ai) - lgamma(bi)
        else:
            lnorm = np.nan
        out[i] = _betainc_scalar(ai, bi, x[i], lnorm)
    return out


# --------------------------------------------------------------------------
# regularized incomplete beta, numpy path
# --------------------------------------------------------------------------


def _betacf_np(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < FPMIN, FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, MAXIT + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < FPMIN, FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < FPMIN, FPMIN, c)
        d = 1.0 / d
        h = np.where(done, h, h * d * c)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < FPMIN, FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < FPMIN, FPMIN, c)
        d = 1.0 / d
        de = d * c
        h = np.where(done, h, h * de)
        done |= np.abs(de - 1.0) < EPS
        if done.all():
            return h
    return np.where(done, h, np.nan)


def betainc_np(a, b, x):
    a, b, x = np.broadcast_arrays(
        np.asarray(a, float), np.asarray(b, float), np.asarray(x, float)
    )
    out = np.full(x.shape, np.nan)
    valid = (a > 0) & (b > 0) & ~np.isnan(x)
    out[valid & (x <= 0)] = 0.0
    out[valid & (x >= 1)] = 1.0
    inner = valid & (x > 0) & (x < 1)
    if not inner.any():
        return out
    ai, bi, xi = a[inner], b[inner], x[inner]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        front = np.exp(
            gammaln(ai + bi) - gammaln(ai) - gammaln(bi)
            + ai * np.log(xi) + bi * np.log1p(-xi)
        )
        direct = xi < (ai + 1.0) / (ai + bi + 2.0)
        # swap roles where the complement converges faster
        pa = np.where(direct, ai, bi)
        pb = np.where(direct, bi, ai)
        px = np.where(direct, xi, 1.0 - xi)
        cf = _betacf_np(pa, pb, px)
        val = front * cf / pa
    out[inner] = np.where(direct, val, 1.0 - val)
    return out


# --------------------------------------------------------------------------
# Beta log density summed over observations, common psi
# --------------------------------------------------------------------------


@njit
def beta_logpdf_sum_nb(v, mu, psi):
    total = 0.0
    lg_psi = lgamma(psi)
    for i in range(v.size):
        a = mu[i] * psi
        b = psi - a
        total += lg_psi - lgamma(a) - lgamma(b) + (a - 1.0) * log(v[i]) + (b - 1.0) * log1p(-v[i])
    return total


def beta_logpdf_sum_np(v, mu, psi):
    a = mu * psi
    b = psi - a
    return float(np.sum(
        gammaln(psi) - gammaln(a) - gammaln(b) + (a - 1.0) * np.log(v) + (b - 1.0) * np.log1p(-v)
    ))


# --------------------------------------------------------------------------
# truncated Beta inverse CDF (safeguarded Newton on a shrinking bracket)
# --------------------------------------------------------------------------


@njit
def _ppf_scalar(a, b, lo, hi, u):
    lnorm = lgamma(a + b) - lgamma(a) - lgamma(b)
    f_lo = _betainc_scalar(a, b, lo, lnorm)
    f_hi = _betainc_scalar(a, b, hi, lnorm)
    mass = f_hi - f_lo
    if not (mass > MIN_MASS):
        return np.nan
    target = f_lo + u * mass
    tol = PPF_TOL * mass
    left = lo
    right = hi
    # small-x expansion I_x ~ x^a / (a B(a, b)) as a starting point
    v = exp((log(target) + log(a) - lnorm) / a) if target > 0.0 else 0.5 * (lo + hi)
    if not (left < v < right):
        v = 0.5 * (left + right)
    for _ in range(PPF_MAXIT):
        f = _betainc_scalar(a, b, v, lnorm) - target
        if abs(f) <= tol:
            break
        if f > 0.0:
            right = v
        else:
            left = v
        if right - left <= 4e-16 * right:
            break
        dens = exp(lnorm + (a - 1.0) * log(v) + (b - 1.0) * log1p(-v))
        step = v - f / dens if dens > 0.0 else -1.0
        if left < step < right:
            v = step
        elif left > 0.0 and right / left > 1e3:
            v = (left * right) ** 0.5
        else:
            v = 0.5 * (left + right)
    return v


@njit
def beta_trunc_ppf_nb(a, b, lo, hi, u):
    out = np.empty(u.size)
    for i in range(u.size):
        out[i] = _ppf_scalar(a[i], b[i], lo[i], hi[i], u[i])
    return out


def beta_trunc_ppf_np(a, b, lo, hi, u):
    a, b, lo, hi, u = (np.asarray(t, float) for t in np.broadcast_arrays(a, b, lo, hi, u))
    lnorm = gammaln(a + b) - gammaln(a) - gammaln(b)
    f_lo = betainc_np(a, b, lo)
    f_hi = betainc_np(a, b, hi)
    mass = f_hi - f_lo
    bad = ~(mass > MIN_MASS)
    target = f_lo + u * mass
    tol = PPF_TOL * mass
    left = lo.copy()
    right = hi.copy()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v = np.exp((np.log(target) + np.log(a) - lnorm) / a)
    v = np.where((v > left) & (v < right), v, 0.5 * (left + right))
    active = ~bad
    for _ in range(PPF_MAXIT):
        if not active.any():
            break
        f = betainc_np(a, b, v) - target
        active &= np.abs(f) > tol
        right = np.where(active & (f > 0), v, right)
        left = np.where(active & (f <= 0), v, left)
        active &= right - left > 4e-16 * right
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dens = np.exp(lnorm + (a - 1.0) * np.log(v) + (b - 1.0) * np.log1p(-v))
            step = np.where(dens > 0, v - f / dens, -1.0)
            geo = np.sqrt(left * right)
        mid = np.where((left > 0) & (right > 1e3 * left), geo, 0.5 * (left + right))
        nxt = np.where((step > left) & (step < right), step, mid)
        v = np.where(active, nxt, v)
    return np.where(bad, np.nan, v)


# --------------------------------------------------------------------------
# weighted mixture of Beta CDFs evaluated on a set of points
# --------------------------------------------------------------------------


@njit
def mixture_cdf_nb(t, a, b, w):
    m = a.size
    lnorm = np.empty(m)
    for j in range(m):
        lnorm[j] = lgamma(a[j] + b[j]) - lgamma(a[j]) - lgamma(b[j])
    out = np.zeros(t.size)
    for k in range(t.size):
        s = 0.0
        for j in range(m):
            s += w[j] * _betainc_scalar(a[j], b[j], t[k], lnorm[j])
        out[k] = s
    return out


def mixture_cdf_np(t, a, b, w, chunk=256):
    t = np.asarray(t, float)
    out = np.empty(t.size)
    for start in range(0, t.size, chunk):
        tt = t[start:start + chunk]
        vals = betainc_np(a[:, None], b[:, None], tt[None, :])
        out[start:start + chunk] = w @ vals
    return out


def _as1d(*arrays):
    arrs = np.broadcast_arrays(*(np.asarray(x, dtype=np.float64) for x in arrays))
    shape = arrs[0].shape
    return shape, [np.ascontiguousarray(x).ravel() for x in arrs]


def betainc(a, b, x):
    """Regularized incomplete beta ``I_x(a, b)``, broadcasting over inputs."""
    shape, (a1, b1, x1) = _as1d(a, b, x)
    if USE_NUMBA:
        out = betainc_nb(a1, b1, x1)
    else:
        out = betainc_np(a1, b1, x1)
    return out.reshape(shape)


def beta_logpdf_sum(v, mu, psi):
    v = np.ascontiguousarray(v, dtype=np.float64)
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    if USE_NUMBA:
        return float(beta_logpdf_sum_nb(v, mu, float(psi)))
    return beta_logpdf_sum_np(v, mu, float(psi))


def beta_trunc_ppf(a, b, lo, hi, u):
    shape, arrs = _as1d(a, b, lo, hi, u)
    if USE_NUMBA:
        out = beta_trunc_ppf_nb(*arrs)
    else:
        out = beta_trunc_ppf_np(*arrs)
    return out.reshape(shape)


def mixture_cdf(t, a, b, w):
    """``sum_j w[j] * I_t(a[j], b[j])`` for every entry of ``t``."""
    t = np.ascontiguousarray(t, dtype=np.float64).ravel()
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    b = np.ascontiguousarray(b, dtype=np.float64).ravel()
    w = np.ascontiguousarray(w, dtype=np.float64).ravel()
    if USE_NUMBA:
        return mixture_cdf_nb(t, a, b, w)
    return mixture_cdf_np(t, a, b, w)
