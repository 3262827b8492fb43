"""Stable special functions: log of the modified Bessel function of the
first kind, its x-derivative via a ratio continued fraction, and an
overflow-safe log-sum-exp.

Everything works in log space so that quantities like I_v(1e4) never
overflow a float64.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, NumericalError

__all__ = ["log_bessel_i", "log_bessel_i_dx", "bessel_i_ratio", "log_sum_exp"]

# Memoized lgamma tables.  _LG_K[k] = lgamma(k+1); _LG_VK[v][k] = lgamma(v+k+1).
# Built with math.lgamma (a few ulp) rather than cumulative sums of logs,
# whose drift over thousands of terms costs ~1e-10 absolute.
_LG_K = np.zeros(1)
_LG_VK: dict[float, np.ndarray] = {}


def _lgamma_tables(v: float, K: int) -> tuple[np.ndarray, np.ndarray]:
    global _LG_K
    if len(_LG_K) <= K:
        n0, n1 = len(_LG_K), max(K + 1, 2 * len(_LG_K))
        ext = np.empty(n1)
        ext[:n0] = _LG_K
        for i in range(n0, n1):
            ext[i] = math.lgamma(i + 1.0)
        _LG_K = ext
    tab = _LG_VK.get(v)
    if tab is None or len(tab) <= K:
        n1 = max(K + 1, 64, 2 * (0 if tab is None else len(tab)))
        tab = np.empty(n1)
        for i in range(n1):
            tab[i] = math.lgamma(v + i + 1.0)
        _LG_VK[v] = tab
    return _LG_K[: K + 1], _LG_VK[v][: K + 1]


def _series_length(v: float, x: float) -> int:
    # Terms of the ascending series peak near k* = (sqrt(v^2+x^2)-v)/2 and
    # decay like a Gaussian of width ~sqrt(k*); 14 widths reach the 1e-17 tail.
    kpeak = (math.sqrt(v * v + x * x) - v) / 2.0
    return int(kpeak + 14.0 * math.sqrt(kpeak + 10.0) + 24)


def log_bessel_i(order: float, x):
    """log I_order(x) for order >= 0 and x >= 0 (scalar or ndarray x).

    Uses the ascending power series summed in log space; all terms are
    positive so there is no cancellation, and the series converges for
    every finite x.  Absolute error of the returned log is below 1e-11
    for order <= 256 and x <= 1e4 (checked against an arbitrary-precision
    oracle), i.e. exponentiation recovers I to better than 1e-10 relative.
    """
    v = float(order)
    if v < 0.0:
        raise DomainError(f"log_bessel_i: order must be >= 0, got {order}")
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs < 0.0):
        raise DomainError("log_bessel_i: x must be >= 0")
    scalar = xs.ndim == 0
    flat = np.atleast_1d(xs).ravel()
    out = np.empty(flat.shape)
    pos = flat > 0.0
    out[~pos] = 0.0 if v == 0.0 else -math.inf
    if np.any(pos):
        xp = flat[pos]
        vals = np.empty(xp.shape)
        # chunk so the (n, K+1) term matrix stays small; sorting groups
        # similar magnitudes so each chunk gets a tight series length
        order = np.argsort(xp)
        budget = 4_000_000
        lo = 0
        while lo < xp.size:
            hi = min(xp.size,
                     lo + max(1, budget // (_series_length(v, xp[order[lo]]) + 1)))
            K = _series_length(v, float(xp[order[hi - 1]]))
            hi = min(hi, lo + max(1, budget // (K + 1)))
            sel = order[lo:hi]
            K = _series_length(v, float(xp[sel[-1]]))
            lg_k, lg_vk = _lgamma_tables(v, K)
            k = np.arange(K + 1, dtype=np.float64)
            logt = (2.0 * k + v) * np.log(xp[sel] / 2.0)[:, None] - (lg_k + lg_vk)
            m = logt.max(axis=1)
            vals[sel] = m + np.log(np.exp(logt - m[:, None]).sum(axis=1))
            lo = hi
        out[pos] = vals
    if scalar:
        return float(out[0])
    return out.reshape(np.shape(xs))


def bessel_i_ratio(order: float, x, tol: float = 1e-15, max_iter: int = 500_000):
    """I_{order+1}(x) / I_order(x) via the Gauss continued fraction.

    Evaluated with the modified Lentz algorithm; elementwise over x.
    Converges in O(x) iterations, all array elements advanced together.
    """
    v = float(order)
    if v < 0.0:
        raise DomainError(f"bessel_i_ratio: order must be >= 0, got {order}")
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs < 0.0):
        raise DomainError("bessel_i_ratio: x must be >= 0")
    scalar = xs.ndim == 0
    flat = np.atleast_1d(xs).astype(np.float64).ravel()
    tiny = 1e-300
    f = np.full(flat.shape, tiny)
    C = np.full(flat.shape, tiny)
    D = np.zeros(flat.shape)
    active = flat > 0.0
    f[~active] = 0.0  # ratio -> 0 as x -> 0
    safe_x = np.where(flat == 0.0, 1.0, flat)
    for k in range(1, max_iter + 1):
        if not np.any(active):
            break
        b = 2.0 * (v + k) / safe_x
        D = b + D
        np.copyto(D, tiny, where=D == 0.0)
        C = b + 1.0 / C
        np.copyto(C, tiny, where=C == 0.0)
        D = 1.0 / D
        delta = C * D
        f = np.where(active, f * delta, f)
        active = active & (np.abs(delta - 1.0) >= tol)
    if np.any(active):
        raise NumericalError("bessel_i_ratio: continued fraction did not converge")
    if scalar:
        return float(f[0])
    return f.reshape(np.shape(xs))


def log_bessel_i_dx(order: float, x):
    """d/dx log I_order(x) = I_{order+1}(x)/I_order(x) + order/x."""
    v = float(order)
    xs = np.asarray(x, dtype=np.float64)
    r = bessel_i_ratio(v, xs)
    if v == 0.0:
        return r
    with np.errstate(divide="ignore"):
        out = r + v / xs
    if np.ndim(x) == 0:
        return float(out)
    return out


def log_sum_exp(values) -> float:
    """Overflow-safe log(sum(exp(values))) of a nonempty 1-D vector."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise DomainError("log_sum_exp: empty input")
    m = float(v.max())
    if not math.isfinite(m):
        return m
    return m + math.log(np.exp(v - m).sum())
