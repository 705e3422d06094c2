"""Convex stabilizing functionals with subgradients, proximal maps and Bregman distances.

Values and gradients use the h-weighted pairing: ``Omega(u) = h * sum(phi(u_i))``
and the gradient is the Riesz representer, i.e. ``xi(e) = h * sum(grad_i * e_i)``.
"""

import numpy as np
from scipy.special import wrightomega

from ._validation import DomainError, check_in_range, check_same_grid
from .core import SubgradientElement


class Penalty:
    """Base class; subclasses implement the array-level kernels."""

    kind = None
    smooth = True

    def value(self, u):
        return self._value(u.values, u.grid_spacing)

    def __call__(self, u):
        return self.value(u)

    def subgradient(self, u):
        return SubgradientElement(self._grad(u.values, u.grid_spacing), u.grid_spacing)

    def bregman(self, u, u_ref, xi):
        check_same_grid(u, u_ref)
        if xi.size != u.size:
            raise DomainError("subgradient dimension mismatch")
        val = self.value(u)
        if not np.isfinite(val):
            return float("inf")
        diff = u.values - u_ref.values
        return float(val - self.value(u_ref)
                     - u.grid_spacing * np.dot(xi.coefficients, diff))

    def _value(self, x, h):
        raise NotImplementedError

    def _grad(self, x, h):
        raise NotImplementedError

    def _prox(self, x, lam, h):
        """``argmin_u lam*Omega(u) + 0.5*||u - x||_h**2`` (componentwise)."""
        raise NotImplementedError

    def _hess_diag(self, x, h):
        """Diagonal second derivative of the Riesz gradient, or ``None``."""
        return None

    def _value_diff(self, z, x, h):
        """``Omega(z) - Omega(x)``; subclasses avoid the cancellation."""
        return self._value(z, h) - self._value(x, h)

    def _in_domain(self, x):
        return True

    def _project_domain(self, x):
        return x


class SquaredNorm(Penalty):
    """``Omega(u) = ||u||**2``; ``xi = 2u``; Bregman distance ``||u - v||**2``."""

    kind = "squared-norm"

    def _value(self, x, h):
        return float(h * np.dot(x, x))

    def _grad(self, x, h):
        return 2.0 * x

    def _prox(self, x, lam, h):
        return x / (1.0 + 2.0 * lam)

    def _hess_diag(self, x, h):
        return np.full_like(x, 2.0)

    def _value_diff(self, z, x, h):
        return float(h * np.dot(z - x, z + x))

    def bregman(self, u, u_ref, xi=None):
        # exact closed form avoids cancellation; only valid for xi = 2*u_ref
        if xi is not None and not np.allclose(xi.coefficients, 2.0 * u_ref.values,
                                              rtol=1e-14, atol=1e-300):
            return super().bregman(u, u_ref, xi)
        check_same_grid(u, u_ref)
        d = u.values - u_ref.values
        return float(u.grid_spacing * np.dot(d, d))

    def __repr__(self):
        return "SquaredNorm()"


class PowerNorm(Penalty):
    """``Omega(u) = ||u||_t**t = h * sum |u_i|**t`` with ``t`` in ``(1, 2]``."""

    kind = "power-norm"

    def __init__(self, t=1.5):
        self.t = check_in_range(t, "t", 1.0, 2.0, closed_low=False)

    def _value(self, x, h):
        return float(h * np.sum(np.abs(x) ** self.t))

    def _grad(self, x, h):
        return self.t * np.abs(x) ** (self.t - 1.0) * np.sign(x)

    def _prox(self, x, lam, h):
        # y + c*y**(t-1) = |x| with c = lam*t; the left side is concave and
        # increasing, so Newton from a lower bound increases monotonically
        t = self.t
        if t == 2.0:
            return x / (1.0 + 2.0 * lam)
        ax = np.abs(x)
        c = lam * t
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            y = np.maximum(ax - c * ax ** (t - 1.0),
                           np.minimum(1.0, (ax / (1.0 + c)) ** (1.0 / (t - 1.0))))
            for _ in range(100):
                g = y + c * y ** (t - 1.0) - ax
                step = np.where(y > 0, g / (1.0 + c * (t - 1.0) * y ** (t - 2.0)), 0.0)
                y = np.maximum(y - step, 0.0)
                if np.all(np.abs(step) <= 1e-16 * np.maximum(y, 1e-300)):
                    break
        return np.sign(x) * y

    def _hess_diag(self, x, h):
        if np.any(x == 0) and self.t < 2.0:
            return None
        return self.t * (self.t - 1.0) * np.abs(x) ** (self.t - 2.0)

    def _value_diff(self, z, x, h):
        az, ax = np.abs(z), np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = ax ** self.t * np.expm1(self.t * np.log(az / ax))
        return float(h * np.sum(np.where(ax > 0, rel, az ** self.t)))

    def __repr__(self):
        return f"PowerNorm(t={self.t:g})"


class NegativeEntropy(Penalty):
    """Generalized Kullback-Leibler divergence to the uniform density.

    ``Omega(u) = h * sum(u log(u/ubar) - u + ubar)`` with ``ubar = 1/(n h)``.
    On probability densities this equals ``h * sum(u log u) + log(n h)``, so the
    minimum ``0`` is attained at the uniform measure. Negative entries give
    ``+inf``; ``0 log 0 := 0``.
    """

    kind = "negative-entropy"
    smooth = False

    @staticmethod
    def _ubar(x, h):
        return 1.0 / (x.size * h)

    def _value(self, x, h):
        if np.any(x < 0):
            return float("inf")
        ubar = self._ubar(x, h)
        pos = x > 0
        ent = np.zeros_like(x)
        ent[pos] = x[pos] * np.log(x[pos] / ubar)
        return float(h * np.sum(ent - x + ubar))

    def _grad(self, x, h):
        if np.any(x <= 0):
            raise DomainError("entropy has no subgradient at non-positive entries")
        return np.log(x / self._ubar(x, h))

    def _prox(self, x, lam, h):
        # u + lam*log(u/ubar) = x  =>  u = lam * omega(x/lam + log(ubar/lam))
        ubar = self._ubar(x, h)
        z = x / lam + np.log(ubar / lam)
        return lam * np.real(wrightomega(z))

    def _hess_diag(self, x, h):
        return 1.0 / x if np.all(x > 0) else None

    def _in_domain(self, x):
        return bool(np.all(x >= 0))

    def _project_domain(self, x):
        return np.maximum(x, 0.0)

    def __repr__(self):
        return "NegativeEntropy()"


def penalty_value(pen, u):
    return pen.value(u)


def subgradient(pen, u):
    return pen.subgradient(u)


def bregman(pen, u, u_ref, xi):
    return pen.bregman(u, u_ref, xi)


def make_penalty(kind, t=None):
    if kind == "squared-norm":
        return SquaredNorm()
    if kind == "power-norm":
        return PowerNorm(1.5 if t is None else t)
    if kind in ("negative-entropy", "entropy"):
        return NegativeEntropy()
    raise DomainError(f"unknown penalty kind {kind!r}")

