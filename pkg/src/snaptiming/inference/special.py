"""Log-gamma and digamma for positive real arguments.

Both functions accept scalars or numpy arrays and return the same shape.
The scalar kernels are compiled with numba so model code can call them
from inside its own compiled loops.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..errors import DomainError

# Lanczos approximation, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Stirling series coefficients B_2k / (2k (2k-1)).
_STIRLING = np.array([
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
])

# Asymptotic digamma coefficients B_2k / (2k).
_DIGAMMA_ASYM = np.array([
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
])

_STIRLING_CUTOFF = 10.0
_DIGAMMA_CUTOFF = 10.0


def _as_positive(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError(f"{name} requires x > 0")
    return arr


@njit(cache=True)
def _lanczos(x):
    # valid for x >= 0.5
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, 9):
        acc += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * math.log(t) - t + math.log(acc)


@njit(cache=True)
def _stirling(x):
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    for k in range(len(_STIRLING) - 1, -1, -1):
        series = series * inv2 + _STIRLING[k]
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + series * inv


@njit(cache=True)
def lgamma_scalar(x):
    """Unchecked scalar log-gamma; callers guarantee x > 0."""
    if x >= _STIRLING_CUTOFF:
        return _stirling(x)
    if x >= 0.5:
        return _lanczos(x)
    return math.log(math.pi / math.sin(math.pi * x)) - _lanczos(1.0 - x)


@njit(cache=True)
def digamma_scalar(x):
    """Unchecked scalar digamma; callers guarantee x > 0."""
    acc = 0.0
    while x < _DIGAMMA_CUTOFF:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    for k in range(len(_DIGAMMA_ASYM) - 1, -1, -1):
        series = series * inv2 + _DIGAMMA_ASYM[k]
    return acc + math.log(x) - 0.5 * inv - series * inv2


@njit(cache=True)
def _lgamma_array(x):
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = lgamma_scalar(x[i])
    return out


@njit(cache=True)
def _digamma_array(x):
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = digamma_scalar(x[i])
    return out


def lgamma(x):
    """Natural log of the gamma function for x > 0.

    Uses the Lanczos approximation below 10 (with the reflection formula
    under 0.5) and the Stirling series above.
    """
    arr = _as_positive(x, "lgamma")
    if arr.ndim == 0:
        return float(lgamma_scalar(float(arr)))
    return _lgamma_array(np.ascontiguousarray(arr).ravel()).reshape(arr.shape)


def digamma(x):
    """Digamma function psi(x) = d/dx log Gamma(x) for x > 0.

    Shifts the argument above 10 with psi(x) = psi(x + 1) - 1/x, then
    applies the asymptotic expansion.
    """
    arr = _as_positive(x, "digamma")
    if arr.ndim == 0:
        return float(digamma_scalar(float(arr)))
    return _digamma_array(np.ascontiguousarray(arr).ravel()).reshape(arr.shape)
