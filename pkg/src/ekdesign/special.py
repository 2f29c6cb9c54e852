"""Special functions used by the Matérn covariance and its order derivative.

Gamma, digamma and the modified Bessel functions delegate to
:mod:`scipy.special`; this module adds domain checking and the derivative
of :math:`K_\\gamma(z)` with respect to the order :math:`\\gamma`, which
scipy does not provide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError

__all__ = [
    "SeriesControl",
    "gamma_fn",
    "digamma",
    "bessel_k",
    "bessel_i",
    "bessel_k_dorder",
    "INTEGER_ORDER_TOL",
]

#: Orders closer than this to an integer use the finite-sum formula.
INTEGER_ORDER_TOL = 1e-6

# Above this argument the ascending series for dK/dorder cancels badly
# (terms grow like e^z while the result decays like e^-z).
_SERIES_MAX_Z = 5.0


@dataclass(frozen=True)
class SeriesControl:
    """Truncation control for the ascending series of ``bessel_k_dorder``."""

    rel_tol: float = 1e-14
    max_terms: int = 200

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_SERIES = SeriesControl()


def _as_array(x, name, *, allow_zero=False):
    arr = np.asarray(x, dtype=float)
    bad = arr < 0 if allow_zero else arr <= 0
    if np.any(bad) or np.any(np.isnan(arr)):
        bound = ">= 0" if allow_zero else "> 0"
        raise DomainError(f"{name} must be {bound}, got {x!r}")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def gamma_fn(x):
    """Gamma function for positive arguments."""
    return _out(special.gamma(_as_array(x, "x")))


def digamma(x):
    """Digamma (polygamma of order 0) for positive arguments."""
    return _out(special.psi(_as_array(x, "x")))


def bessel_k(order, z):
    """Modified Bessel function of the second kind, :math:`K_{order}(z)`.

    ``K`` is even in the order, so negative orders are accepted.
    """
    z = _as_array(z, "z")
    return _out(special.kv(float(order), z))


def bessel_i(order, z):
    """Modified Bessel function of the first kind, :math:`I_{order}(z)`.

    ``z = 0`` is accepted and returns the limit value (1 for order 0).
    """
    z = _as_array(z, "z", allow_zero=True)
    return _out(special.iv(float(order), z))


def _dk_integer(n, z):
    # d/dv K_v(z) at v = n:  n!/2 (z/2)^-n sum_{k<n} K_k(z) (z/2)^k / ((n-k) k!)
    half = z / 2.0
    total = np.zeros_like(z)
    for k in range(n):
        total += special.kv(k, z) * half**k / ((n - k) * math.factorial(k))
    return 0.5 * math.factorial(n) * half ** (-n) * total


def _dk_series(order, z, ctrl):
    half = z / 2.0
    log_half = np.log(half)
    acc = np.zeros_like(z)
    scale = np.zeros_like(z)
    for k in range(ctrl.max_terms):
        a = k - order + 1.0
        b = k + order + 1.0
        inv_fact = math.exp(-math.lgamma(k + 1.0))
        term = inv_fact * (
            special.psi(a) * special.rgamma(a) * np.exp((2 * k - order) * log_half)
            + special.psi(b) * special.rgamma(b) * np.exp((2 * k + order) * log_half)
        )
        acc += term
        scale = np.maximum(scale, np.abs(acc))
        # the first few terms may straddle a sign change of 1/Gamma(k - order + 1)
        if k >= int(order) + 1 and np.all(np.abs(term) <= ctrl.rel_tol * scale):
            break
    else:
        raise ConvergenceError(
            f"dK/dorder series did not reach rel_tol={ctrl.rel_tol} "
            f"in {ctrl.max_terms} terms (order={order})"
        )
    s = math.pi * order
    bracket = (
        -2.0 * math.cos(s) * special.kv(order, z)
        - log_half * (special.iv(-order, z) + special.iv(order, z))
        + acc
    )
    return 0.5 * math.pi / math.sin(s) * bracket


def _dk_quadrature(order, z):
    # d/dv of K_v(z) = int_0^inf exp(-z cosh t) cosh(v t) dt
    def one(zz):
        upper = 1.0
        while zz * math.cosh(upper) - order * upper < 760.0:
            upper *= 1.5
        val, _ = integrate.quad(
            lambda t: 0.5 * t * (
                math.exp(order * t - zz * math.cosh(t))
                - math.exp(-order * t - zz * math.cosh(t))
            ),
            0.0,
            upper,
            epsabs=0.0,
            epsrel=1e-13,
            limit=200,
        )
        return val

    return np.array([one(zz) for zz in np.ravel(z)]).reshape(np.shape(z))


def bessel_k_dorder(order, z, ctrl: SeriesControl = DEFAULT_SERIES):
    """Derivative :math:`\\partial K_\\gamma(z)/\\partial\\gamma` at ``order``.

    Integer orders (within ``INTEGER_ORDER_TOL``) use the finite sum over
    ``K_k``; other orders use the ascending series in ``I_{\\pm\\gamma}`` and
    digamma terms, truncated per ``ctrl``. For ``z`` above 5 the series
    cancels catastrophically and the integral representation
    :math:`\\int_0^\\infty e^{-z\\cosh t}\\,t\\sinh(\\gamma t)\\,dt` is used.

    Raises
    ------
    DomainError
        If ``z <= 0`` or ``order < 0``.
    ConvergenceError
        If the series needs more than ``ctrl.max_terms`` terms.
    """
    order = float(order)
    if order < 0:
        raise DomainError(f"order must be >= 0, got {order}")
    z = _as_array(z, "z")
    zz = np.atleast_1d(z).astype(float)
    nearest = round(order)
    if abs(order - nearest) < INTEGER_ORDER_TOL:
        res = _dk_integer(int(nearest), zz)
    else:
        res = np.empty_like(zz)
        small = zz <= _SERIES_MAX_Z
        if np.any(small):
            res[small] = _dk_series(order, zz[small], ctrl)
        if np.any(~small):
            res[~small] = _dk_quadrature(order, zz[~small])
    return _out(res.reshape(np.shape(z)))
