"""Shared domain types, structural constants and level-set membership.

All inner products are weighted by the grid spacing ``h``::

    <a, b> = h * sum(a_i * b_i)

on both the solution space and the data space, so adjoints of operators that
share a grid reduce to plain matrix transposes.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError, check_array, check_positive, check_same_grid

FUNCTION = "function"
MEASURE = "probability-measure"
_KINDS = (FUNCTION, MEASURE)

MEASURE_MASS_TOL = 1e-12
MEMBERSHIP_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class GridVector:
    """A discretized function or probability density on a uniform 1-D grid.

    Parameters
    ----------
    values : array-like
        Nodal values. For ``kind="probability-measure"`` these are densities,
        i.e. the mass at node ``i`` is ``grid_spacing * values[i]``.
    grid_spacing : float
        Positive spacing ``h`` used as quadrature weight.
    kind : {"function", "probability-measure"}
    origin : float
        Coordinate of the first node; node ``i`` sits at ``origin + i*h``.
    """

    values: np.ndarray
    grid_spacing: float = 1.0
    kind: str = FUNCTION
    origin: float = 0.0

    def __post_init__(self):
        arr = check_array(self.values)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "grid_spacing",
                           check_positive(self.grid_spacing, "grid_spacing"))
        if self.kind not in _KINDS:
            raise DomainError(f"unknown vector kind {self.kind!r}")
        if self.kind == MEASURE:
            if np.any(arr < 0):
                raise DomainError("probability measure has negative entries")
            mass = self.grid_spacing * arr.sum()
            if abs(mass - 1.0) > MEASURE_MASS_TOL:
                raise DomainError(f"probability measure has total mass {mass!r}")

    @property
    def size(self):
        return self.values.size

    def __len__(self):
        return self.values.size

    @property
    def points(self):
        return self.origin + self.grid_spacing * np.arange(self.size)

    def inner(self, other):
        check_same_grid(self, other)
        return float(self.grid_spacing * np.dot(self.values, other.values))

    def norm(self):
        return float(np.sqrt(self.grid_spacing * np.dot(self.values, self.values)))

    def with_values(self, values, kind=None):
        """Same grid, new values (kind defaults to ``"function"``)."""
        return GridVector(values, self.grid_spacing, kind or FUNCTION, self.origin)

    def __repr__(self):
        return (f"GridVector(n={self.size}, h={self.grid_spacing:g}, "
                f"kind={self.kind!r})")


def as_measure(values, grid_spacing=1.0, origin=0.0, *, normalize=True):
    """Build a probability-measure vector, optionally renormalizing the mass."""
    arr = np.clip(check_array(values), 0.0, None)
    if normalize:
        arr = arr / (grid_spacing * arr.sum())
    return GridVector(arr, grid_spacing, MEASURE, origin)


@dataclass(frozen=True, eq=False)
class SubgradientElement:
    """Linear functional ``xi(u) = <coefficients, u>`` (h-weighted)."""

    coefficients: np.ndarray
    grid_spacing: float = 1.0

    def __post_init__(self):
        arr = check_array(self.coefficients, "coefficients")
        arr.flags.writeable = False
        object.__setattr__(self, "coefficients", arr)
        object.__setattr__(self, "grid_spacing",
                           check_positive(self.grid_spacing, "grid_spacing"))

    @property
    def size(self):
        return self.coefficients.size

    def __call__(self, u):
        values = u.values if isinstance(u, GridVector) else np.asarray(u, float)
        if values.size != self.size:
            raise DomainError(
                f"dimension mismatch: functional has {self.size}, vector {values.size}")
        return float(self.grid_spacing * np.dot(self.coefficients, values))

    def norm(self):
        c = self.coefficients
        return float(np.sqrt(self.grid_spacing * np.dot(c, c)))

    def as_vector(self):
        return GridVector(self.coefficients, self.grid_spacing)


def c_p(p):
    """Constant in ``(a + b)**p <= c_p * (a**p + b**p)`` for ``a, b >= 0``."""
    p = check_positive(p, "p")
    return 1.0 if p < 1 else 2.0 ** (p - 1)


def rho_default(omega_udagger, p, s=1.0, margin=1.1):
    """Level-set radius strictly above ``c_p * s**p * Omega(u_dagger)``.

    When ``Omega(u_dagger) == 0`` every positive radius qualifies and
    ``margin`` itself is returned.
    """
    omega = check_positive(omega_udagger, "omega_udagger", strict=False)
    if not margin > 1:
        raise DomainError(f"margin must exceed 1, got {margin!r}")
    if s < 1:
        raise DomainError(f"quasi-triangle constant must be >= 1, got {s!r}")
    if omega == 0:
        return float(margin)
    return float(margin * c_p(p) * s ** p * omega)


@dataclass(frozen=True)
class LevelSetSpec:
    """Parameters ``(alpha_bar, rho)`` of the level set ``M_{alpha_bar}(rho*alpha_bar)``."""

    alpha_bar: float
    rho: float

    def __post_init__(self):
        check_positive(self.alpha_bar, "alpha_bar")
        check_positive(self.rho, "rho")

    def validate_for(self, problem):
        bound = c_p(problem.p) * problem.similarity.s_constant ** problem.p \
            * problem.omega_true
        if not self.rho > bound:
            raise DomainError(
                f"rho={self.rho!r} must exceed c_p*s^p*Omega(u_dagger)={bound!r}")
        return self

    @classmethod
    def default_for(cls, problem, alpha_bar=1.0, margin=1.1):
        rho = rho_default(problem.omega_true, problem.p,
                          problem.similarity.s_constant, margin)
        return cls(alpha_bar, rho)


@dataclass(frozen=True, eq=False)
class Problem:
    """One complete test instance: ``F``, ``Omega``, ``S``, ``u_dagger``, exact data, ``p``.

    Use :meth:`build` to derive ``v_exact`` and the subgradient automatically.
    """

    operator: object
    penalty: object
    similarity: object
    u_true: GridVector
    v_exact: GridVector
    p: float
    xi: SubgradientElement
    name: str = field(default="problem", compare=False)

    def __post_init__(self):
        check_positive(self.p, "p")
        mapped = self.operator.apply(self.u_true)
        scale = max(1.0, float(np.max(np.abs(self.v_exact.values))))
        if mapped.size != self.v_exact.size or \
                np.max(np.abs(mapped.values - self.v_exact.values)) > 1e-12 * scale:
            raise DomainError("v_exact does not equal F(u_true)")
        if self.xi.size != self.u_true.size:
            raise DomainError("subgradient dimension differs from the solution grid")

    @classmethod
    def build(cls, operator, penalty, similarity, u_true, p, *, xi=None,
              v_kind=None, name="problem"):
        v = operator.apply(u_true)
        if v_kind == MEASURE:
            v = GridVector(v.values, v.grid_spacing, MEASURE, v.origin)
        if xi is None:
            xi = penalty.subgradient(u_true)
        return cls(operator, penalty, similarity, u_true, v, float(p), xi, name)

    @property
    def omega_true(self):
        return self.penalty.value(self.u_true)

    @property
    def grid_spacing(self):
        return self.u_true.grid_spacing

    def residual_power(self, u, v_data):
        return self.similarity.value(self.operator.apply(u), v_data) ** self.p

    def bregman(self, u):
        return self.penalty.bregman(u, self.u_true, self.xi)


def tikhonov_value(problem, u, v_data, alpha):
    """``S(F(u), v_data)**p + alpha * Omega(u)``."""
    alpha = check_positive(alpha, "alpha")
    check_same_grid(u, problem.u_true)
    check_same_grid(v_data, problem.v_exact)
    omega = problem.penalty.value(u)
    if not np.isfinite(omega):
        return float("inf")
    return problem.residual_power(u, v_data) + alpha * omega


def level_set_member(problem, spec, u, *, slack=MEMBERSHIP_SLACK):
    """Whether ``u`` lies in ``M_{alpha_bar}(rho * alpha_bar)`` (exact data)."""
    value = tikhonov_value(problem, u, problem.v_exact, spec.alpha_bar)
    bound = spec.rho * spec.alpha_bar
    return bool(value <= bound + slack * max(1.0, bound))
