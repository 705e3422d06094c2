"""Parameter choice rules driven by a distance function.

With ``d`` a nonincreasing distance function,

    Psi(r) = d(r)**((p - kappa)/kappa) * r**(-gamma*p/kappa)
    Phi(r) = d(r)**(1/kappa) * r**(-gamma/kappa)

and the parameter ``alpha`` is defined by ``delta**p = alpha * d(Psi^{-1}(alpha))``.
The bracketing root finders work in ``log r`` / ``log alpha``.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import DomainError, NumericalFailure, check_positive
from .distance import PowerLawDistance


def _check_exponents(p, kappa):
    check_positive(p, "p")
    check_positive(kappa, "kappa")
    if not kappa < p:
        raise DomainError(f"kappa={kappa!r} must be smaller than p={p!r}")


def _record(diagnostics, extrapolated):
    if diagnostics is not None and extrapolated:
        diagnostics["extrapolated"] = True


def _power_product(d, a, r, b):
    # d**a * r**b, evaluated in logs so that extreme radii give 0 or inf
    if d == 0.0:
        return 0.0
    with np.errstate(over="ignore", under="ignore"):
        return float(np.exp(a * np.log(d) + b * np.log(r)))


def psi(r, table, p, kappa, gamma, diagnostics=None):
    """``d(r)**((p-kappa)/kappa) * r**(-gamma*p/kappa)``."""
    r = check_positive(r, "r")
    _check_exponents(p, kappa)
    d, ext = table.lookup(r)
    _record(diagnostics, ext)
    return _power_product(d, (p - kappa) / kappa, r, -gamma * p / kappa)


def phi(r, table, kappa, gamma, diagnostics=None):
    """``d(r)**(1/kappa) * r**(-gamma/kappa)``."""
    r = check_positive(r, "r")
    check_positive(kappa, "kappa")
    d, ext = table.lookup(r)
    _record(diagnostics, ext)
    return _power_product(d, 1.0 / kappa, r, -gamma / kappa)


def invert_monotone(f, target, bracket, rtol=1e-15, max_iter=400):
    """Solve ``f(r) = target`` for decreasing ``f`` by bisection in ``log r``.

    Requires ``f(lo) >= target >= f(hi)``. Iterates until the bracket is
    narrower than ``rtol`` in ``log r`` or cannot be split in floating point.
    """
    lo, hi = (float(b) for b in bracket)
    if not 0 < lo < hi:
        raise DomainError(f"bracket must satisfy 0 < lo < hi, got {bracket!r}")
    f_lo, f_hi = f(lo), f(hi)
    if not f_lo >= target >= f_hi:
        raise DomainError(
            f"target {target!r} not bracketed: f(lo)={f_lo!r}, f(hi)={f_hi!r}")
    if f_lo == target:
        return lo
    if f_hi == target:
        return hi
    llo, lhi = np.log(lo), np.log(hi)
    mid = 0.5 * (llo + lhi)
    for _ in range(max_iter):
        mid = 0.5 * (llo + lhi)
        if mid in (llo, lhi):
            break
        fm = f(np.exp(mid))
        if fm == target:
            return float(np.exp(mid))
        if fm > target:
            llo = mid
        else:
            lhi = mid
        if lhi - llo <= rtol:
            break
    return float(np.exp(0.5 * (llo + lhi)))


def _table_bracket(table, fun, target):
    # start from the tabulated range (or r = 1) and widen by decades
    lo_w = table.r_min if table.r_min > 0 else 1.0
    hi_w = table.r_max if np.isfinite(table.r_max) else 10.0 * lo_w
    for _ in range(300):
        if fun(lo_w) >= target:
            break
        lo_w /= 10.0
    for _ in range(300):
        if fun(hi_w) <= target:
            break
        hi_w *= 10.0
    if not fun(lo_w) >= target >= fun(hi_w):
        raise DomainError(f"value {target!r} lies outside the range of the table")
    return lo_w, hi_w


def _last_positive_r(table):
    if not np.isfinite(table.r_max):
        return 1e8
    vals = getattr(table, "values", None)
    if vals is None or vals[-1] > 0:
        return table.r_max
    pos = np.flatnonzero(np.asarray(vals) > 0)
    if pos.size == 0:
        raise DomainError("distance table vanishes identically")
    return float(table.r[pos[-1]])


def psi_inverse(alpha, table, p, kappa, gamma, diagnostics=None):
    check_positive(alpha, "alpha")
    fun = lambda r: psi(r, table, p, kappa, gamma, diagnostics)
    lo, hi = _table_bracket(table, fun, alpha)
    return invert_monotone(fun, alpha, (lo, hi))


def phi_inverse(delta, table, kappa, gamma, diagnostics=None):
    check_positive(delta, "delta")
    fun = lambda r: phi(r, table, kappa, gamma, diagnostics)
    lo, hi = _table_bracket(table, fun, delta)
    return invert_monotone(fun, delta, (lo, hi))


def choose_alpha_apriori(delta, p, kappa, c=1.0):
    """``alpha = c * delta**(p - kappa)``."""
    delta = check_positive(delta, "delta")
    c = check_positive(c, "c")
    _check_exponents(p, kappa)
    return c * delta ** (p - kappa)


def choose_alpha_phi(delta, table, p, kappa, gamma, diagnostics=None):
    """Solve ``delta**p = alpha * d(Psi^{-1}(alpha))`` for ``alpha``.

    Returns ``(alpha, r_star)`` with ``r_star = Psi^{-1}(alpha)``. The right
    side increases with ``alpha``; the root is bracketed by expanding in
    decades and refined by bisection in ``log alpha``.
    """
    delta = check_positive(delta, "delta")
    _check_exponents(p, kappa)
    if gamma <= 0:
        raise DomainError("the choice rule needs gamma > 0")
    target = delta ** p
    diag = {} if diagnostics is None else diagnostics

    def rhs(log_alpha):
        a = np.exp(log_alpha)
        r = psi_inverse(a, table, p, kappa, gamma, diag)
        return a * table.lookup(r)[0]

    # Psi at the ends of the positive part of the table starts the bracket
    a_lo = np.log(psi(_last_positive_r(table), table, p, kappa, gamma, diag))
    a_hi = np.log(psi(table.r_min if table.r_min > 0 else 1e-8,
                      table, p, kappa, gamma, diag))
    for _ in range(200):
        if rhs(a_lo) <= target:
            break
        a_lo -= np.log(10.0)
    for _ in range(200):
        if rhs(a_hi) >= target:
            break
        a_hi += np.log(10.0)
    if not rhs(a_lo) <= target <= rhs(a_hi):
        raise DomainError(f"delta={delta!r} lies outside the range of the table")
    for _ in range(300):
        mid = 0.5 * (a_lo + a_hi)
        if mid in (a_lo, a_hi):
            break
        if rhs(mid) < target:
            a_lo = mid
        else:
            a_hi = mid
    alpha = float(np.exp(0.5 * (a_lo + a_hi)))
    r_star = psi_inverse(alpha, table, p, kappa, gamma, diag)
    return alpha, r_star


@dataclass(frozen=True)
class RatePrediction:
    """Predicted error ``d(Phi^{-1}(delta))`` with the identity residual.

    ``identity_residual`` is the relative deviation of
    ``delta**kappa / value`` from ``Phi^{-1}(delta)**(-gamma)``.
    """

    value: float
    r_star: float
    identity_residual: float
    extrapolated: bool = False

    def __float__(self):
        return self.value


def predicted_rate(delta, table, kappa, gamma, use_majorant=None):
    """Predicted size of the Bregman error for noise level ``delta``.

    ``use_majorant=(a, b)`` replaces the table by ``a * r**(-b*gamma)``.
    """
    delta = check_positive(delta, "delta")
    if use_majorant is not None:
        a, b = use_majorant
        table = PowerLawDistance(float(a), float(b), float(gamma))
    diag = {}
    r_star = phi_inverse(delta, table, kappa, gamma, diag)
    value = table.lookup(r_star)[0]
    if value <= 0:
        raise NumericalFailure("distance function vanishes at the predicted radius")
    lhs = delta ** kappa / value
    rhs = r_star ** (-gamma)
    return RatePrediction(float(value), float(r_star), abs(lhs - rhs) / rhs,
                          bool(diag.get("extrapolated", False)))


class AprioriParameterChoice(BaseEstimator):
    """Callable rule ``alpha(delta) = c * delta**(p - kappa)``."""

    def __init__(self, p=2.0, kappa=1.0, c=1.0):
        self.p = p
        self.kappa = kappa
        self.c = c

    def __call__(self, delta):
        return choose_alpha_apriori(delta, self.p, self.kappa, self.c)


class FixedParameterChoice(BaseEstimator):
    """Callable rule returning the same ``alpha`` for every noise level."""

    def __init__(self, alpha=1e-3):
        self.alpha = alpha

    def __call__(self, delta):
        return check_positive(self.alpha, "alpha")


class PhiParameterChoice(BaseEstimator):
    """Callable rule solving ``delta**p = alpha * d(Psi^{-1}(alpha))`` from a table."""

    def __init__(self, table=None, p=2.0, kappa=1.0, gamma=1.0):
        self.table = table
        self.p = p
        self.kappa = kappa
        self.gamma = gamma

    def __call__(self, delta):
        if self.table is None:
            raise DomainError("PhiParameterChoice needs a distance table")
        return choose_alpha_phi(delta, self.table, self.p, self.kappa, self.gamma)[0]
