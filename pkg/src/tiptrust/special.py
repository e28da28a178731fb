"""Log-gamma, digamma, Beta log-density and Beta sampling.

The scalar kernels are compiled with numba so that the fitter and the
Monte-Carlo engine can call them from their own compiled loops. The public
wrappers accept floats or arrays and validate the domain.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import DomainError

# Lanczos approximation, g = 671/128, 14 terms.
_LANCZOS_G = 5.24218750000000000
_LANCZOS_C0 = 0.999999999999997092
_LANCZOS_COEF = np.array(
    [
        57.1562356658629235,
        -59.5979603554754912,
        14.1360979747417471,
        -0.491913816097620199,
        0.339946499848118887e-4,
        0.465236289270485756e-4,
        -0.983744753048795646e-4,
        0.158088703224912494e-3,
        -0.210264441724104883e-3,
        0.217439618115212643e-3,
        -0.164318106536763890e-3,
        0.844182239838527433e-4,
        -0.261908384015814087e-4,
        0.368991826595316234e-5,
    ]
)
_SQRT_2PI = 2.5066282746310005

# Shift threshold for the digamma asymptotic series.
_DIGAMMA_SHIFT = 6.0


@njit(cache=True)
def _log_gamma(x):
    y = x
    tmp = x + _LANCZOS_G
    tmp = (x + 0.5) * math.log(tmp) - tmp
    ser = _LANCZOS_C0
    for c in _LANCZOS_COEF:
        y += 1.0
        ser += c / y
    return tmp + math.log(_SQRT_2PI * ser / x)


@njit(cache=True)
def _digamma(x):
    acc = 0.0
    while x < _DIGAMMA_SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    # Bernoulli terms B_2k / (2k x^2k), k = 1..7
    series = inv2 * (
        1.0 / 12.0
        - inv2
        * (
            1.0 / 120.0
            - inv2
            * (
                1.0 / 252.0
                - inv2
                * (
                    1.0 / 240.0
                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))
                )
            )
        )
    )
    return acc + math.log(x) - 0.5 * inv - series


@njit(cache=True)
def _log_beta_pdf(t, a, b):
    return (
        _log_gamma(a + b)
        - _log_gamma(a)
        - _log_gamma(b)
        + (a - 1.0) * math.log(t)
        + (b - 1.0) * math.log1p(-t)
    )


@njit(cache=True)
def _gamma_draw(shape, rng):
    # Marsaglia-Tsang; shapes below one are boosted by U^(1/shape).
    boost = 1.0
    if shape < 1.0:
        boost = rng.random() ** (1.0 / shape)
        shape += 1.0
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.standard_normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.random()
        if u < 1.0 - 0.0331 * x**4:
            return d * v * boost
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v * boost


_TINY = 2.2250738585072014e-308
_ONE_MINUS = 1.0 - 2.0**-53


@njit(cache=True)
def _beta_draw(a, b, rng):
    g1 = _gamma_draw(a, rng)
    g2 = _gamma_draw(b, rng)
    total = g1 + g2
    if total <= 0.0:
        return 0.5
    t = g1 / total
    if t <= 0.0:
        return _TINY
    if t >= 1.0:
        return _ONE_MINUS
    return t


@njit(cache=True)
def _map_log_gamma(x, out):
    for i in range(x.size):
        out[i] = _log_gamma(x[i])


@njit(cache=True)
def _map_digamma(x, out):
    for i in range(x.size):
        out[i] = _digamma(x[i])


def _positive_array(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} requires finite positive arguments")
    return arr


def _apply(kernel, x, name):
    arr = _positive_array(x, name)
    flat = np.ascontiguousarray(arr).ravel()
    out = np.empty_like(flat)
    kernel(flat, out)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def log_gamma(x):
    """Natural log of the Gamma function for ``x > 0``.

    Accepts a float or an array; raises ``DomainError`` for non-positive input.
    """
    return _apply(_map_log_gamma, x, "log_gamma")


def digamma(x):
    """Digamma function (derivative of ``log_gamma``) for ``x > 0``."""
    return _apply(_map_digamma, x, "digamma")


def beta_logpdf(t: float, alpha: float, beta: float) -> float:
    """Log-density of Beta(alpha, beta) at ``t`` in the open unit interval."""
    if not 0.0 < t < 1.0:
        raise DomainError(f"beta_logpdf needs 0 < t < 1, got {t!r}")
    if not (alpha > 0 and beta > 0):
        raise DomainError("beta_logpdf needs positive shape parameters")
    return float(_log_beta_pdf(float(t), float(alpha), float(beta)))


def beta_sample(alpha: float, beta: float, rng: np.random.Generator) -> float:
    """Draw from Beta(alpha, beta) as a ratio of two Gamma variates."""
    if not (alpha > 0 and beta > 0):
        raise DomainError("beta_sample needs positive shape parameters")
    return float(_beta_draw(float(alpha), float(beta), rng))
