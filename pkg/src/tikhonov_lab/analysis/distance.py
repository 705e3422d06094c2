"""Distance functions measuring how far ``xi`` is from satisfying a source condition.

``asc_distance`` computes ``min{||xi - A*eta|| : ||eta|| <= r}`` for the
(linearized) forward operator ``A``. ``avi_distance`` estimates the largest
violation of a variational inequality whose data term carries the weight
``beta2 * r**gamma``; the numerical value is always a lower bound of the true
supremum because it is attained at feasible points.
"""

from dataclasses import dataclass, field

import numpy as np

from .._validation import DomainError, check_positive, check_sorted_grid
from ..core import LevelSetSpec
from ..solver import SolverConfig

DEFAULT_R_GRID = np.logspace(-2.0, 4.0, 40)


@dataclass(frozen=True)
class AviParams:
    """Constants ``(beta1, beta2, gamma, kappa)`` and the level set they refer to."""

    beta1: float
    beta2: float
    gamma: float
    kappa: float
    spec: LevelSetSpec

    def __post_init__(self):
        if not 0.0 <= self.beta1 < 1.0:
            raise DomainError(f"beta1 must lie in [0, 1), got {self.beta1!r}")
        check_positive(self.beta2, "beta2", strict=False)
        check_positive(self.gamma, "gamma", strict=False)
        check_positive(self.kappa, "kappa")

    def check_rate_exponent(self, p):
        if not self.kappa < p:
            raise DomainError(f"kappa={self.kappa!r} must be smaller than p={p!r}")


# ---------------------------------------------------------------------------
# tables

@dataclass(frozen=True, eq=False)
class DistanceTable:
    """Nonincreasing, non-negative samples ``d(r_i)`` with log-log interpolation.

    Outside ``[r_min, r_max]`` the end values are used (clamped) and
    :meth:`lookup` reports the extrapolation. Zero values are handled by
    linear interpolation on the bracketing interval.
    """

    r: np.ndarray
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        r = check_sorted_grid(self.r, "r")
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.shape != r.shape:
            raise DomainError("table needs one value per grid point")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise DomainError("distance values must be finite and non-negative")
        if np.any(np.diff(vals) > 1e-12 * max(vals.max(), 1e-300)):
            raise DomainError("distance values must be nonincreasing in r")
        vals = np.minimum.accumulate(vals)
        r.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", vals)

    @property
    def r_min(self):
        return float(self.r[0])

    @property
    def r_max(self):
        return float(self.r[-1])

    def lookup(self, r):
        """Return ``(d(r), extrapolated)``."""
        r = float(r)
        if r <= self.r[0]:
            return float(self.values[0]), r < self.r[0]
        if r >= self.r[-1]:
            return float(self.values[-1]), r > self.r[-1]
        i = int(np.searchsorted(self.r, r)) - 1
        r0, r1 = self.r[i], self.r[i + 1]
        d0, d1 = self.values[i], self.values[i + 1]
        if d0 > 0 and d1 > 0:
            w = np.log(r / r0) / np.log(r1 / r0)
            return float(np.exp((1 - w) * np.log(d0) + w * np.log(d1))), False
        w = (r - r0) / (r1 - r0)
        return float((1 - w) * d0 + w * d1), False

    def __call__(self, r):
        return self.lookup(r)[0]

    def is_strictly_decreasing(self):
        return bool(np.all(np.diff(self.values) < 0) and self.values[-1] > 0)

    def rows(self):
        return list(zip(self.r.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class PowerLawDistance:
    """Analytic distance function ``d(r) = a * r**(-b*gamma)`` on ``(0, inf)``."""

    a: float
    b: float
    gamma: float

    r_min = 0.0
    r_max = np.inf

    def lookup(self, r):
        return float(self.a * float(r) ** (-self.b * self.gamma)), False

    def __call__(self, r):
        return self.lookup(r)[0]

    def table(self, r_grid=DEFAULT_R_GRID):
        r_grid = np.asarray(r_grid, dtype=float)
        return DistanceTable(r_grid, self.a * r_grid ** (-self.b * self.gamma))


# ---------------------------------------------------------------------------
# approximate source condition

def _linearization(problem):
    op = problem.operator
    return op.jacobian(problem.u_true.values)


def _hnorm(x, h):
    return float(np.sqrt(h * np.dot(x, x)))


def _secular_newton(sigma, xi, r, h):
    """Multiplier ``lam > 0`` with ``||eta(lam)||_h = r`` for a diagonal operator.

    Newton on ``1/||eta(lam)|| - 1/r``, which is concave in ``lam`` and therefore
    converges monotonically from ``lam = 0``; bisection safeguards the step.
    """
    s2 = sigma * sigma
    num = s2 * xi * xi

    def norm_and_slope(lam):
        den = s2 + lam
        nrm2 = h * np.sum(num / den ** 2)
        dn2 = -2.0 * h * np.sum(num / den ** 3)
        return nrm2, dn2

    lo, hi = 0.0, _hnorm(sigma * xi, h) / r
    lam = 0.0
    for _ in range(200):
        nrm2, dn2 = norm_and_slope(lam)
        nrm = np.sqrt(nrm2)
        g = 1.0 / nrm - 1.0 / r
        if g < 0:
            lo = max(lo, lam)
        else:
            hi = min(hi, lam)
        dg = -0.5 * dn2 / nrm2 ** 1.5
        step = -g / dg
        new = lam + step
        if not lo <= new <= hi or not np.isfinite(new):
            new = 0.5 * (lo + hi)
        if abs(new - lam) <= 1e-15 * max(new, 1e-300):
            lam = new
            break
        lam = new
    return lam


# preimage norms computed by different routes differ in the last bits; a
# radius within a few ulps of the preimage norm counts as reaching it
_FEAS = 1.0 + 16 * np.finfo(float).eps


def _route_diagonal(problem, r):
    op = problem.operator
    sigma = op.sigma
    xi = problem.xi.coefficients
    h = problem.grid_spacing
    with np.errstate(divide="ignore", invalid="ignore"):
        eta0 = np.where(xi != 0, xi / sigma, 0.0)
    if _hnorm(eta0, h) <= r * _FEAS:
        return 0.0, eta0, 0.0
    lam = _secular_newton(sigma, xi, r, h)
    den = sigma ** 2 + lam
    eta = sigma * xi / den
    # xi - sigma*eta = lam*xi/den, free of cancellation
    return _hnorm(lam * xi / den, h), eta, lam


class _DenseSystem:
    """Spectral representation of ``A A^T`` for repeated ``(AA^T + lam I)^{-1}`` solves."""

    def __init__(self, problem):
        a = _linearization(problem)
        self.h = problem.grid_spacing
        self.xi = problem.xi.coefficients
        u, s, vt = np.linalg.svd(a, full_matrices=True)
        self.u = u
        self.s = np.zeros(u.shape[0])
        self.s[: s.size] = s
        self.vt = vt
        self.c = vt[: s.size] @ self.xi  # right singular coordinates of xi
        self.xi_perp2 = max(float(np.dot(self.xi, self.xi) - np.dot(self.c, self.c)), 0.0)

    def eta(self, lam):
        s = self.s[: self.c.size]
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(s * self.c != 0, s * self.c / (s * s + lam), 0.0)
        return self.u[:, : self.c.size] @ coef

    def eta_norm(self, lam):
        s = self.s[: self.c.size]
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(s * self.c != 0, s * self.c / (s * s + lam), 0.0)
        return _hnorm(coef, self.h)

    def residual(self, lam):
        s = self.s[: self.c.size]
        with np.errstate(divide="ignore", invalid="ignore"):
            part = np.where(s > 0, lam * self.c / (s * s + lam), self.c)
        return float(np.sqrt(self.h * (np.dot(part, part) + self.xi_perp2)))


def _route_bisection(problem, r, system=None):
    sys_ = system or _DenseSystem(problem)
    if sys_.eta_norm(0.0) <= r * _FEAS:
        return sys_.residual(0.0), sys_.eta(0.0), 0.0
    lo, hi = 0.0, max(float(np.max(sys_.s)) ** 2, 1.0)
    while sys_.eta_norm(hi) > r:
        hi *= 4.0
    for _ in range(400):
        mid = 0.5 * (lo + hi) if lo == 0.0 or hi / lo > 4 else np.sqrt(lo * hi)
        if mid in (lo, hi):
            break
        if sys_.eta_norm(mid) > r:
            lo = mid
        else:
            hi = mid
    lam = hi
    return sys_.residual(lam), sys_.eta(lam), lam


def _route_grid(problem, r, system=None, points=401, rounds=40):
    """Brute force: dense log-grid over ``lam`` with successive zooming.

    The value decreases and the multiplier-norm increases as ``lam`` decreases,
    so the best feasible grid point is the smallest feasible ``lam``.
    """
    sys_ = system or _DenseSystem(problem)
    if sys_.eta_norm(0.0) <= r * _FEAS:
        return sys_.residual(0.0), sys_.eta(0.0), 0.0
    top = max(float(np.max(sys_.s)) ** 2, 1.0)
    lo_exp, hi_exp = np.log10(top) - 30.0, np.log10(top) + 30.0
    while sys_.eta_norm(10.0 ** hi_exp) > r:
        hi_exp += 10.0
    best = 10.0 ** hi_exp
    for _ in range(rounds):
        grid = np.logspace(lo_exp, hi_exp, points)
        feasible = [lam for lam in grid if sys_.eta_norm(lam) <= r]
        best = min(feasible) if feasible else best
        k = int(np.searchsorted(grid, best))
        lo_exp = np.log10(grid[max(k - 1, 0)])
        hi_exp = np.log10(grid[min(k + 1, points - 1)])
        if hi_exp - lo_exp < 1e-15:
            break
    return sys_.residual(best), sys_.eta(best), best


ROUTES = ("diagonal", "bisection", "grid")


def asc_distance(problem, r, route=None):
    """``min{||xi - F'(u+)* eta|| : ||eta|| <= r}`` and the minimizing ``eta``.

    Parameters
    ----------
    route : {"diagonal", "bisection", "grid"}, optional
        Componentwise secular-equation solve (diagonal operators only), dense
        bisection on the multiplier, or a brute-force multiplier grid. Defaults
        to ``"diagonal"`` when available, else ``"bisection"``.
    """
    r = check_positive(r, "r", strict=False)
    op = problem.operator
    if route is None:
        route = "diagonal" if hasattr(op, "sigma") else "bisection"
    if r == 0.0:
        return problem.xi.norm(), problem.u_true.with_values(np.zeros(op.n))
    if route == "diagonal":
        if not hasattr(op, "sigma"):
            raise DomainError("componentwise route needs a diagonal operator")
        value, eta, _ = _route_diagonal(problem, r)
    elif route == "bisection":
        value, eta, _ = _route_bisection(problem, r)
    elif route == "grid":
        value, eta, _ = _route_grid(problem, r)
    else:
        raise DomainError(f"unknown route {route!r}")
    return float(value), problem.v_exact.with_values(eta)


def asc_distance_table(problem, r_grid=DEFAULT_R_GRID, route=None):
    r_grid = check_sorted_grid(r_grid, "r_grid")
    vals = [asc_distance(problem, r, route)[0] for r in r_grid]
    return DistanceTable(r_grid, np.minimum.accumulate(vals), {"route": route})


def preimage_radius(problem):
    """Norm of the least-norm exact preimage ``eta`` of ``xi``, or ``inf``."""
    sys_ = _DenseSystem(problem)
    if sys_.residual(0.0) > 1e-12 * max(problem.xi.norm(), 1e-300):
        return np.inf
    return sys_.eta_norm(0.0)


# ---------------------------------------------------------------------------
# approximate variational inequality

class _AviObjective:
    """``g_r(u) = xi(u - u+) + beta1*B(u, u+) + beta2*r**gamma*S(F(u), F(u+))**kappa``."""

    def __init__(self, problem, params):
        sim = problem.similarity
        if not hasattr(sim, "exponent"):
            raise DomainError("distance estimation supports norm-type similarities")
        self.problem = problem
        self.params = params
        self.h = problem.grid_spacing
        self.x0 = problem.u_true.values
        self.xi = problem.xi.coefficients
        self.v0 = problem.v_exact.values
        self.op = problem.operator
        self.pen = problem.penalty
        self.q = sim.exponent
        self.omega0 = problem.omega_true
        self.bound = params.spec.rho * params.spec.alpha_bar
        self.bound_tol = 1e-12 * max(1.0, self.bound)

    def parts(self, x):
        """``(xi(u-u+), B(u,u+), S(F(u),F(u+))**kappa)``."""
        d = x - self.x0
        lin = self.h * np.dot(self.xi, d)
        om = self.pen._value(x, self.h)
        breg = om - self.omega0 - lin
        res = _hnorm(self.op._apply(x) - self.v0, self.h)
        return lin, breg, res ** (self.q * self.params.kappa)

    def value(self, x, r):
        lin, breg, sk = self.parts(x)
        pr = self.params
        return lin + pr.beta1 * breg + pr.beta2 * r ** pr.gamma * sk

    def grad(self, x, r):
        pr = self.params
        g = (1.0 - pr.beta1) * self.xi
        if pr.beta1 > 0:
            g = g + pr.beta1 * self.pen._grad(x, self.h)
        e = self.q * pr.kappa
        if pr.beta2 > 0 and pr.gamma >= 0:
            resid = self.op._apply(x) - self.v0
            nrm = _hnorm(resid, self.h)
            if nrm > 0:
                g = g + pr.beta2 * r ** pr.gamma * e * nrm ** (e - 2.0) \
                    * self.op._vjp(x, resid)
        return g

    def level_value(self, x):
        om = self.pen._value(x, self.h)
        if not np.isfinite(om):
            return np.inf
        res = _hnorm(self.op._apply(x) - self.v0, self.h)
        return res ** (self.q * self.problem.p) + self.params.spec.alpha_bar * om

    def feasible(self, x):
        return self.level_value(x) <= self.bound + self.bound_tol

    def project(self, x, iters=60):
        """Pull ``x`` toward ``u+`` along the segment until it is feasible."""
        if self.feasible(x):
            return x
        lo, hi = 0.0, 1.0
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if self.feasible(self.x0 + mid * (x - self.x0)):
                lo = mid
            else:
                hi = mid
        return self.x0 + lo * (x - self.x0)


def _descend(obj, x, r, cfg, max_iter):
    """Projected gradient with step adaptation; returns the best feasible point."""
    val = obj.value(x, r)
    scale = max(_hnorm(x - obj.x0, obj.h), _hnorm(obj.x0, obj.h), 1e-12)
    g = obj.grad(x, r)
    gn = _hnorm(g, obj.h)
    if gn == 0:
        return x, val, 0
    step = 0.1 * scale / gn
    it = 0
    for it in range(1, max_iter + 1):
        g = obj.grad(x, r)
        trial = obj.project(x - step * g)
        tval = obj.value(trial, r)
        if tval < val:
            moved = _hnorm(trial - x, obj.h)
            x, val = trial, tval
            step *= 1.5
            if moved <= cfg.gradient_tolerance * scale:
                break
        else:
            step *= 0.3
            if step * _hnorm(g, obj.h) < 1e-14 * scale:
                break
    return x, val, it


def _boundary_point(obj, direction):
    """``u+ + t*direction`` with ``t`` as large as the level set allows."""
    t = 1.0
    while obj.feasible(obj.x0 + t * direction) and t < 1e12:
        t *= 2.0
    return obj.project(obj.x0 + t * direction)


def _starting_points(obj, rng, n_random):
    h = obj.h
    starts = []
    base = -obj.xi / max(_hnorm(obj.xi, h), 1e-300)
    if np.any(base != 0):
        starts.append(_boundary_point(obj, base))
        starts.append(_boundary_point(obj, 0.5 * base))
    for _ in range(n_random):
        d = rng.standard_normal(obj.x0.size)
        d -= max(h * np.dot(d, obj.xi), 0.0) / max(h * np.dot(obj.xi, obj.xi), 1e-300) \
            * obj.xi  # bias toward xi-descent directions
        d /= max(_hnorm(d, h), 1e-300)
        starts.append(_boundary_point(obj, d))
    return starts


def avi_distance_table(problem, params, r_grid=DEFAULT_R_GRID, cfg=None, *,
                       n_random=4, max_iter=400, seed=0):
    """Tabulate ``d_num(r)`` over ``r_grid``.

    Every local search result enters a shared candidate pool that always
    contains ``u+``. Each table value is the largest violation over the whole
    pool, so the table is nonincreasing in ``r`` and non-negative by
    construction. The pool is returned in ``diagnostics["candidates"]``.
    """
    cfg = cfg or SolverConfig()
    r_grid = check_sorted_grid(r_grid, "r_grid")
    obj = _AviObjective(problem, params)
    rng = np.random.default_rng(seed)
    pool = [obj.x0.copy()]
    starts = _starting_points(obj, rng, n_random)
    iterations = []
    warm = None
    for r in r_grid:
        runs = list(starts) if warm is None else [warm] + starts[:1]
        best_x, best_val = None, np.inf
        for x in runs:
            x_opt, val, its = _descend(obj, x, r, cfg, max_iter)
            iterations.append(its)
            pool.append(x_opt)
            if val < best_val:
                best_x, best_val = x_opt, val
        warm = best_x
    parts = np.array([obj.parts(x) for x in pool])
    pr = params
    values, argbest = [], []
    for r in r_grid:
        g = parts[:, 0] + pr.beta1 * parts[:, 1] + pr.beta2 * r ** pr.gamma * parts[:, 2]
        k = int(np.argmin(g))
        values.append(max(0.0, -float(g[k])))
        argbest.append(k)
    diag = {
        "candidates": pool,
        "argbest": argbest,
        "iterations": iterations,
        "feasible": bool(all(obj.feasible(x) for x in pool)),
    }
    return DistanceTable(r_grid, values, diag)


def avi_distance(problem, params, r, cfg=None, **kwargs):
    """``d_num(r)`` and the point attaining it (``u+`` when the value is 0)."""
    r = check_positive(r, "r", strict=False)
    grid = np.array([r]) if r > 0 else np.array([1e-300])
    table = avi_distance_table(problem, params, grid, cfg, **kwargs)
    k = table.diagnostics["argbest"][0]
    value = float(table.values[0])
    x = table.diagnostics["candidates"][k] if value > 0 else problem.u_true.values
    return value, problem.u_true.with_values(x)


def level_set_radius(problem, spec, samples=200, seed=0, extra_points=(), inflation=1.5):
    """``K = inflation * max ||u - u+||`` over sampled level-set points.

    Samples are boundary points along seeded random directions; ``extra_points``
    (for example distance-function maximizers) are included as long as they lie
    in the level set.
    """
    params = AviParams(0.0, 0.0, 0.0, 1.0, spec)
    obj = _AviObjective(problem, params)
    rng = np.random.default_rng(seed)
    h = problem.grid_spacing
    best = 0.0
    for _ in range(samples):
        d = rng.standard_normal(obj.x0.size)
        d /= _hnorm(d, h)
        best = max(best, _hnorm(_boundary_point(obj, d) - obj.x0, h))
    for x in extra_points:
        x = np.asarray(getattr(x, "values", x), dtype=float)
        if obj.feasible(x):
            best = max(best, _hnorm(x - obj.x0, h))
    return inflation * best


def concentration_trend(problem, table):
    """``S(F(u_r), v0)`` at the maximizers behind each table entry."""
    obj = _AviObjective(problem, AviParams(0.0, 0.0, 0.0, 1.0,
                                           LevelSetSpec(1.0, 1.0)))
    out = []
    for k in table.diagnostics["argbest"]:
        x = table.diagnostics["candidates"][k]
        out.append(_hnorm(obj.op._apply(x) - obj.v0, obj.h))
    return np.array(out)

