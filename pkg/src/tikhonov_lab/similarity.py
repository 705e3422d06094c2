"""Similarity functionals ``S(v1, v2)`` on the data space.

Each functional exports ``s_constant``, a valid constant in the quasi-triangle
inequality ``S(v1, v2) <= s*S(v1, v3) + s*S(v3, v2)``.
"""

import numpy as np

from ._validation import DomainError, check_in_range, check_same_grid
from .core import MEASURE, GridVector


class Similarity:
    """Base class. Subclasses implement :meth:`_value` on raw arrays."""

    kind = None

    @property
    def s_constant(self):
        raise NotImplementedError

    def value(self, v1, v2):
        check_same_grid(v1, v2)
        return self._value(v1.values, v2.values, v1.grid_spacing, v1.origin)

    def __call__(self, v1, v2):
        return self.value(v1, v2)

    def _value(self, a, b, h, origin=0.0):
        raise NotImplementedError


class NormSimilarity(Similarity):
    """``S(v1, v2) = ||v1 - v2||`` in the h-weighted Euclidean norm."""

    kind = "norm"

    @property
    def s_constant(self):
        return 1.0

    @property
    def exponent(self):
        return 1.0

    def _value(self, a, b, h, origin=0.0):
        d = a - b
        return float(np.sqrt(h * np.dot(d, d)))

    def __repr__(self):
        return "NormSimilarity()"


class NormPowerSimilarity(NormSimilarity):
    """``S(v1, v2) = ||v1 - v2||**q`` for ``q`` in ``[1, 4]``; ``s = 2**(q-1)``."""

    kind = "norm-power"

    def __init__(self, q=2.0):
        self.q = check_in_range(q, "q", 1.0, 4.0)

    @property
    def s_constant(self):
        return 2.0 ** (self.q - 1.0)

    @property
    def exponent(self):
        return self.q

    def _value(self, a, b, h, origin=0.0):
        return super()._value(a, b, h) ** self.q

    def __repr__(self):
        return f"NormPowerSimilarity(q={self.q:g})"


def _quantile_cost(x, m1, m2, q):
    """``int_0^1 |Q1(t) - Q2(t)|**q dt`` for discrete measures on support ``x``.

    ``m1`` and ``m2`` are non-negative mass vectors. Both inverse CDFs are
    piecewise constant, so the integral is an exact finite sum over the merged
    CDF breakpoints.
    """
    c1 = np.cumsum(m1)
    c2 = np.cumsum(m2)
    c1 = c1 / c1[-1]
    c2 = c2 / c2[-1]
    edges = np.union1d(c1, c2)
    edges = np.concatenate(([0.0], edges[edges > 0.0]))
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    n = x.size
    i1 = np.minimum(np.searchsorted(c1, mids, side="left"), n - 1)
    i2 = np.minimum(np.searchsorted(c2, mids, side="left"), n - 1)
    return float(np.sum(widths * np.abs(x[i1] - x[i2]) ** q))


def wasserstein_1d(mu1, mu2, q=1.0):
    """Wasserstein distance ``W_q`` between two measures on a common 1-D grid.

    Uses the quantile representation
    ``W_q = (int_0^1 |F1^{-1}(t) - F2^{-1}(t)|**q dt)**(1/q)``, evaluated exactly.
    """
    q = check_in_range(q, "q", 1.0, np.inf)
    for mu in (mu1, mu2):
        if not isinstance(mu, GridVector) or mu.kind != MEASURE:
            raise DomainError("wasserstein_1d requires probability-measure vectors")
    check_same_grid(mu1, mu2)
    if not np.isclose(mu1.origin, mu2.origin, rtol=0, atol=1e-12 * mu1.grid_spacing):
        raise DomainError("measures live on grids with different origins")
    h = mu1.grid_spacing
    return _quantile_cost(mu1.points, h * mu1.values, h * mu2.values, q) ** (1.0 / q)


class WassersteinSimilarity(Similarity):
    """``S = W_q`` on probability densities over the data grid (a metric, ``s = 1``)."""

    kind = "wasserstein-1d"

    def __init__(self, q=1.0):
        self.q = check_in_range(q, "q", 1.0, np.inf)

    @property
    def s_constant(self):
        return 1.0

    def value(self, v1, v2):
        # operator outputs carry the "function" tag; accept any unit-mass density
        check_same_grid(v1, v2)
        if not np.isclose(v1.origin, v2.origin, rtol=0, atol=1e-12 * v1.grid_spacing):
            raise DomainError("measures live on grids with different origins")
        h = v1.grid_spacing
        for v in (v1, v2):
            mass = h * v.values.sum()
            if abs(mass - 1.0) > 1e-9:
                raise DomainError(f"Wasserstein similarity needs unit mass, got {mass!r}")
        return self._value(v1.values, v2.values, h, v1.origin)

    def _value(self, a, b, h, origin=0.0):
        if np.any(a < 0) or np.any(b < 0):
            raise DomainError("wasserstein similarity needs non-negative densities")
        x = origin + h * np.arange(a.size)
        return _quantile_cost(x, h * a, h * b, self.q) ** (1.0 / self.q)

    def _subgradient_first(self, a, b, h):
        """h-Riesz subgradient of ``W_1(a, b)`` in ``a`` (``q = 1`` only).

        ``W_1 = h * sum_j |C_a(j) - C_b(j)|`` with ``C`` the cumulative mass.
        """
        if self.q != 1.0:
            raise DomainError("analytic subgradient only available for q = 1")
        ca = np.cumsum(h * a)
        cb = np.cumsum(h * b)
        sgn = np.sign(ca - cb)[:-1] * h
        # the last node never enters a cumulative difference
        tail = np.concatenate((np.cumsum(sgn[::-1])[::-1], [0.0]))
        return tail

    def __repr__(self):
        return f"WassersteinSimilarity(q={self.q:g})"


def sim_value(sim, v1, v2):
    return sim.value(v1, v2)


def quasi_triangle_constant(sim):
    return sim.s_constant


def make_similarity(kind, q=None):
    """Factory used by the experiment configuration."""
    if kind == "norm":
        return NormSimilarity()
    if kind == "norm-power":
        return NormPowerSimilarity(2.0 if q is None else q)
    if kind in ("wasserstein", "wasserstein-1d"):
        return WassersteinSimilarity(1.0 if q is None else q)
    raise DomainError(f"unknown similarity kind {kind!r}")
