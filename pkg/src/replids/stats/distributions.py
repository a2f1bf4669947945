"""F and studentized-range distributions.

The regularized incomplete beta function is evaluated with a modified
Lentz continued fraction. The studentized range CDF is a double integral
over the chi-distributed scale and the normal range, done with composite
Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, ndtr

from ..errors import DetectionError

BETA_RTOL = 1e-12
BETA_MAX_ITER = 500
_TINY = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_RTOL:
            return h
    raise DetectionError("beta-no-convergence", f"a={a}, b={b}, x={x}")


def _beta_tails(x: float, y: float, a: float, b: float) -> tuple[float, float]:
    """``(I_x(a, b), 1 - I_x(a, b))`` with ``y = 1 - x`` supplied exactly.

    Whichever tail is small is computed directly from the continued
    fraction so that it keeps full relative precision.
    """
    if x <= 0.0:
        return 0.0, 1.0
    if y <= 0.0:
        return 1.0, 0.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(y)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        lower = math.exp(log_front) * _beta_continued_fraction(a, b, x) / a
        return lower, 1.0 - lower
    upper = math.exp(log_front) * _beta_continued_fraction(b, a, y) / b
    return 1.0 - upper, upper


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """``I_x(a, b)`` for ``a, b > 0`` and ``0 <= x <= 1``."""
    if a <= 0 or b <= 0:
        raise DetectionError("bad-beta-parameters", f"a={a}, b={b}")
    return _beta_tails(x, 1.0 - x, a, b)[0]


def _check_dfs(d1, d2) -> None:
    if d1 < 1 or d2 < 1:
        raise DetectionError("bad-degrees-of-freedom", f"d1={d1}, d2={d2}")


def _f_tails(x: float, d1: float, d2: float) -> tuple[float, float]:
    _check_dfs(d1, d2)
    if x <= 0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    denom = d1 * x + d2
    return _beta_tails(d1 * x / denom, d2 / denom, d1 / 2.0, d2 / 2.0)


def f_cdf(x: float, d1: float, d2: float) -> float:
    """``P(F <= x)`` for an F distribution with ``(d1, d2)`` degrees of freedom."""
    return _f_tails(x, d1, d2)[0]


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper tail ``P(F > x)``; keeps precision for very small p-values."""
    return _f_tails(x, d1, d2)[1]


# --- studentized range -----------------------------------------------------

_GL_ORDER = 20


def _composite_gl(lo: float, hi: float, panels: int):
    nodes, weights = np.polynomial.legendre.leggauss(_GL_ORDER)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


@lru_cache(maxsize=None)
def _normal_grid():
    z, wz = _composite_gl(-8.5, 8.5, 24)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return z, wz * phi, ndtr(z)


@lru_cache(maxsize=512)
def _scale_grid(df: int):
    # density of s = sqrt(chi2_df / df)
    sigma = 1.0 / math.sqrt(2.0 * df)
    lo = max(0.0, 1.0 - 12.0 * sigma)
    hi = 1.0 + 14.0 * sigma
    s, ws = _composite_gl(lo, hi, 16)
    log_f = (
        0.5 * df * math.log(df) + (df - 1) * np.log(s) - 0.5 * df * s * s
        - gammaln(0.5 * df) - (0.5 * df - 1.0) * math.log(2.0)
    )
    return s, ws * np.exp(log_f)


def _range_cdf_normal(w: np.ndarray, k: int) -> np.ndarray:
    """CDF of the range of ``k`` iid standard normals at each entry of ``w``."""
    z, wphi, big_phi = _normal_grid()
    inner = big_phi[None, :] - ndtr(z[None, :] - w[:, None])
    inner = np.clip(inner, 0.0, 1.0)
    return k * (inner ** (k - 1)) @ wphi


def studentized_range_cdf(q: float, k: int, df: int) -> float:
    """``P(Q <= q)`` for the studentized range of ``k`` means with ``df`` error dof."""
    if k < 2 or df < 1:
        raise DetectionError("bad-degrees-of-freedom", f"k={k}, df={df}")
    if q <= 0:
        return 0.0
    s, ws = _scale_grid(int(df))
    val = float(_range_cdf_normal(q * s, int(k)) @ ws)
    return min(1.0, max(0.0, val))


@lru_cache(maxsize=4096)
def studentized_range_quantile(k: int, df: int, alpha: float = 0.05) -> float:
    """Upper-``alpha`` critical value ``q`` with ``P(Q <= q) = 1 - alpha``.

    Found by Brent's method on :func:`studentized_range_cdf`; accurate to
    about ``1e-4``.
    """
    if k < 2 or df < 2:
        raise DetectionError("bad-degrees-of-freedom", f"k={k}, df={df}")
    if not 0.0 < alpha < 1.0:
        raise DetectionError("bad-alpha", f"alpha={alpha}")
    target = 1.0 - alpha

    def gap(q):
        return studentized_range_cdf(q, k, df) - target

    hi = 4.0
    for _ in range(60):
        if gap(hi) > 0:
            break
        hi *= 1.5
    else:
        raise DetectionError("quantile-no-convergence", f"no bracket for k={k}, df={df}, alpha={alpha}")
    try:
        return float(brentq(gap, 1e-9, hi, xtol=1e-7, maxiter=200))
    except RuntimeError as exc:
        raise DetectionError("quantile-no-convergence", str(exc)) from exc
