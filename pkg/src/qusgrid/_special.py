"""Digamma, trigamma and log-gamma for positive arguments.

Implemented with the standard upward recurrence into the asymptotic
(Bernoulli-number) series region. Accurate to better than 1e-12 relative
error for x > 0; verified against arbitrary-precision references in the
test suite. Only the positive real axis is supported, which is all the
Nakagami machinery needs.
"""

from __future__ import annotations

import numpy as np

_SHIFT = 10.0

# B_{2n}/(2n) for the digamma series
_DIGAMMA_COEF = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

# B_{2n} for the trigamma series
_TRIGAMMA_COEF = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)

# B_{2n}/(2n(2n-1)) for the Stirling series
_GAMMALN_COEF = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _prepare(x):
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).astype(np.float64, copy=True)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("argument must be finite and strictly positive")
    return arr, scalar


def _poly(y, coef):
    """c1*y + c2*y^2 + ... via Horner."""
    acc = np.zeros_like(y)
    for c in reversed(coef):
        acc = y * (c + acc)
    return acc


def digamma(x):
    """psi(x) for x > 0. Accepts scalars or arrays."""
    z, scalar = _prepare(x)
    acc = np.zeros_like(z)
    small = z < _SHIFT
    while np.any(small):
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
        small = z < _SHIFT
    y = 1.0 / (z * z)
    out = acc + np.log(z) - 0.5 / z - _poly(y, _DIGAMMA_COEF)
    return out[0] if scalar else out


def trigamma(x):
    """psi'(x) for x > 0. Accepts scalars or arrays."""
    z, scalar = _prepare(x)
    acc = np.zeros_like(z)
    small = z < _SHIFT
    while np.any(small):
        acc[small] += 1.0 / (z[small] * z[small])
        z[small] += 1.0
        small = z < _SHIFT
    y = 1.0 / (z * z)
    out = acc + 1.0 / z + 0.5 * y + _poly(y, _TRIGAMMA_COEF) / z
    return out[0] if scalar else out


def gammaln(x):
    """ln Gamma(x) for x > 0. Accepts scalars or arrays."""
    z, scalar = _prepare(x)
    acc = np.zeros_like(z)
    small = z < _SHIFT
    while np.any(small):
        acc[small] -= np.log(z[small])
        z[small] += 1.0
        small = z < _SHIFT
    y = 1.0 / (z * z)
    series = (_GAMMALN_COEF[0] + _poly(y, _GAMMALN_COEF[1:])) / z
    out = acc + (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + series
    return out[0] if scalar else out
