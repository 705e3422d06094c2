"""Forward operators with directional derivatives and adjoints.

Solution and data share one grid (spacing ``h``), so the adjoint of a
derivative with respect to the h-weighted inner products is the transpose of
its matrix.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from ._validation import DomainError, NumericalFailure, check_array, check_positive
from .core import GridVector


class ForwardOperator:
    """Base class. Subclasses implement ``_apply``, ``_jvp`` and ``_vjp`` on arrays."""

    kind = None
    linear = True

    def __init__(self, n, h=1.0, origin=0.0):
        self.n = int(n)
        if self.n < 1:
            raise DomainError("operator dimension must be >= 1")
        self.h = check_positive(h, "h")
        self.origin = float(origin)

    @property
    def n_u(self):
        return self.n

    @property
    def n_v(self):
        return self.n

    def _check(self, u):
        if u.size != self.n:
            raise DomainError(f"dimension mismatch: operator n={self.n}, vector {u.size}")
        if not np.isclose(u.grid_spacing, self.h, rtol=1e-12, atol=0.0):
            raise DomainError(
                f"grid spacing mismatch: operator h={self.h}, vector {u.grid_spacing}")

    def _wrap(self, values):
        return GridVector(values, self.h, origin=self.origin)

    def apply(self, u):
        self._check(u)
        return self._wrap(self._apply(u.values))

    def __call__(self, u):
        return self.apply(u)

    def derivative_apply(self, u0, direction):
        self._check(u0)
        self._check(direction)
        return self._wrap(self._jvp(u0.values, direction.values))

    def adjoint_derivative_apply(self, u0, w):
        self._check(u0)
        self._check(w)
        return self._wrap(self._vjp(u0.values, w.values))

    def jacobian(self, x0):
        """Dense matrix of ``F'(x0)`` acting on nodal values."""
        eye = np.eye(self.n)
        return np.column_stack([self._jvp(x0, e) for e in eye])

    def _apply(self, x):
        raise NotImplementedError

    def _jvp(self, x0, d):
        return self._apply(d)

    def _vjp(self, x0, w):
        raise NotImplementedError

    def _jtj_diagonal(self, x0):
        """Diagonal of ``F'(x0)^T F'(x0)``."""
        jac = self.jacobian(x0)
        return np.einsum("ij,ij->j", jac, jac)

    def _exact_fit(self, v):
        """Least-norm solution of ``F'(0) x = v`` for linear operators."""
        x, *_ = np.linalg.lstsq(self.jacobian(np.zeros(self.n)), v, rcond=None)
        return x

    def _difference(self, z, x):
        """``F(z) - F(x)`` evaluated without cancellation."""
        if self.linear:
            return self._apply(z - x)
        return self._apply(z) - self._apply(x)


class DiagonalOperator(ForwardOperator):
    """``(Au)_k = sigma_k * u_k`` with positive, nonincreasing ``sigma``."""

    kind = "diagonal"

    def __init__(self, sigma, h=1.0, origin=0.0):
        sigma = check_array(sigma, "sigma")
        if np.any(sigma <= 0):
            raise DomainError("diagonal entries must be positive")
        if np.any(np.diff(sigma) > 0):
            raise DomainError("diagonal entries must be nonincreasing")
        sigma.flags.writeable = False
        self.sigma = sigma
        super().__init__(sigma.size, h, origin)

    @classmethod
    def power_law(cls, n, exponent=1.0, h=1.0):
        """``sigma_k = k**(-exponent)`` for ``k = 1..n``."""
        return cls(np.arange(1, n + 1, dtype=float) ** (-exponent), h)

    def _apply(self, x):
        return self.sigma * x

    def _vjp(self, x0, w):
        return self.sigma * w

    def jacobian(self, x0=None):
        return np.diag(self.sigma)

    def _jtj_diagonal(self, x0=None):
        return self.sigma ** 2

    def _exact_fit(self, v):
        return v / self.sigma

    def __repr__(self):
        return f"DiagonalOperator(n={self.n})"


class IntegrationOperator(ForwardOperator):
    """Cumulative quadrature ``(Au)(t_j) = h * sum_{i <= j} u_i``."""

    kind = "integration"

    def _apply(self, x):
        return self.h * np.cumsum(x)

    def _vjp(self, x0, w):
        return self.h * np.cumsum(w[::-1])[::-1]

    def jacobian(self, x0=None):
        return self.h * np.tril(np.ones((self.n, self.n)))

    def _jtj_diagonal(self, x0=None):
        return self.h ** 2 * np.arange(self.n, 0, -1, dtype=float)

    def _exact_fit(self, v):
        return np.diff(v, prepend=0.0) / self.h

    def __repr__(self):
        return f"IntegrationOperator(n={self.n}, h={self.h:g})"


class AutoconvolutionOperator(ForwardOperator):
    """``F(u)_k = h * sum_{i+j=k} u_i u_j``, truncated to the grid.

    The Taylor remainder is exactly ``h * (u - u0) * (u - u0)``.
    """

    kind = "autoconvolution"
    linear = False

    def _apply(self, x):
        return self.h * np.convolve(x, x)[: self.n]

    def _jvp(self, x0, d):
        return 2.0 * self.h * np.convolve(x0, d)[: self.n]

    def _difference(self, z, x):
        # u*u - x*x = (z - x)*(z + x) by symmetry of the convolution
        return self.h * np.convolve(z - x, z + x)[: self.n]

    def _vjp(self, x0, w):
        # (J^T w)_i = 2h * sum_{k >= i} w_k x0_{k-i}
        return 2.0 * self.h * np.correlate(w, x0, mode="full")[self.n - 1:]

    def jacobian(self, x0):
        n = self.n
        idx = np.arange(n)
        diff = idx[:, None] - idx[None, :]
        mat = np.where(diff >= 0, x0[np.clip(diff, 0, n - 1)], 0.0)
        return 2.0 * self.h * mat

    def __repr__(self):
        return f"AutoconvolutionOperator(n={self.n}, h={self.h:g})"


def apply(op, u):
    return op.apply(u)


def derivative_apply(op, u0, direction):
    return op.derivative_apply(u0, direction)


def adjoint_derivative_apply(op, u0, w):
    return op.adjoint_derivative_apply(u0, w)


def make_operator(kind, n, h=1.0, sigma_exponent=1.0):
    if kind == "diagonal":
        return DiagonalOperator.power_law(n, sigma_exponent, h)
    if kind == "integration":
        return IntegrationOperator(n, h)
    if kind == "autoconvolution":
        return AutoconvolutionOperator(n, h)
    raise DomainError(f"unknown operator kind {kind!r}")


@dataclass(frozen=True)
class NonlinearityDegreeFit:
    """Constants of ``||F(u)-F(u+)-F'(u+)(u-u+)|| <= K ||F(u)-F(u+)||**c1 B(u,u+)**c2``."""

    c1: float
    c2: float
    K: float
    residual: float
    n_samples: int = 0

    def bound(self, residual_norm, bregman_value):
        return self.K * residual_norm ** self.c1 * bregman_value ** self.c2

    def holds(self, remainder, residual_norm, bregman_value, slack=0.0):
        return remainder <= (1.0 + slack) * self.bound(residual_norm, bregman_value)


C2_MAX = 1.0 - 1e-9
_DEGENERATE = 1e-14


def taylor_quantities(problem, u):
    """Return ``(remainder, ||F(u)-F(u+)||, B_xi(u, u+))`` for one sample."""
    op = problem.operator
    x0 = problem.u_true.values
    d = u.values - x0
    h = problem.grid_spacing
    fu = op._apply(u.values)
    f0 = op._apply(x0)
    rem = fu - f0 - op._jvp(x0, d)
    nrm = lambda a: float(np.sqrt(h * np.dot(a, a)))
    return nrm(rem), nrm(fu - f0), problem.bregman(u)


def fit_nonlinearity_degree(problem, sample_points, min_points=10):
    """Fit ``(c1, c2, K)`` by bounded least squares in log space, then inflate ``K``.

    ``K`` is raised to the largest observed ratio so the inequality holds on every
    sample. Samples with a vanishing remainder or vanishing factors are dropped.
    For linear operators the conventional ``(1, 0, 0)`` is returned.
    """
    if problem.operator.linear:
        return NonlinearityDegreeFit(1.0, 0.0, 0.0, 0.0, len(sample_points))
    rows = [taylor_quantities(problem, u) for u in sample_points]
    rows = np.array([r for r in rows if min(r) > _DEGENERATE])
    if len(rows) < min_points:
        raise NumericalFailure(
            f"need at least {min_points} non-degenerate samples, got {len(rows)}")
    log_r, log_d, log_b = np.log(rows).T
    design = np.column_stack([log_d, log_b, np.ones_like(log_d)])
    fit = lsq_linear(design, log_r,
                     bounds=([0.0, 0.0, -np.inf], [np.inf, C2_MAX, np.inf]),
                     method="bvls", tol=1e-14)
    c1, c2, _ = fit.x
    log_k = np.max(log_r - c1 * log_d - c2 * log_b)
    resid = float(np.sqrt(np.mean((design @ fit.x - log_r) ** 2)))
    return NonlinearityDegreeFit(float(c1), float(c2), float(np.exp(log_k)), resid,
                                 len(rows))
