"""Minimization of ``S(F(u), v)**p + alpha * Omega(u)``.

Norm-type residuals are handled by an accelerated proximal gradient method in
a diagonal (Gauss-Newton) metric. Residual powers ``e = p*q >= 2`` are smooth
and handled directly; ``e < 2`` goes through a majorize-minimize loop that
replaces ``||r||**e`` by a weighted ``||r||**2``. Wasserstein residuals are
solved on the probability simplex with exponentiated (entropic mirror)
subgradient steps.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, cg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, NumericalFailure, check_positive
from .core import MEASURE, GridVector, c_p, tikhonov_value
from .penalty import Penalty
from .similarity import NormSimilarity, WassersteinSimilarity, wasserstein_1d

INITIAL_POLICIES = ("zero", "u_true_perturbed", "data_backprojection")


@dataclass(frozen=True)
class SolverConfig:
    """Iteration budget, tolerances and multi-start policy.

    Parameters
    ----------
    max_iterations : int
        Budget of proximal steps per inner solve.
    gradient_tolerance : float
        Stopping level for the h-norm of the composite gradient mapping,
        relative to ``1 + ||grad f||`` at the start point.
    shrink, sufficient_decrease : float
        Backtracking factor and constant of the quadratic upper model.
    restarts : int
        Number of starting points for nonconvex instances (``p*q < 1`` or
        nonlinear ``F``). Convex instances use the first policy only.
    initial_policy : str
        Policy for restart 0; later restarts cycle through all policies with
        seeded perturbations.
    max_outer : int
        Majorize-minimize iterations for residual powers below 2.
    seed : int
        Seed of the perturbation stream for restarts.
    """

    max_iterations: int = 20000
    gradient_tolerance: float = 1e-14
    shrink: float = 0.5
    sufficient_decrease: float = 1.0
    restarts: int = 8
    initial_policy: str = "data_backprojection"
    max_outer: int = 200
    seed: int = 0

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise DomainError("max_iterations must be >= 1")
        check_positive(self.gradient_tolerance, "gradient_tolerance")
        if not 0 < self.shrink < 1:
            raise DomainError("shrink factor must lie in (0, 1)")
        if not 0 < self.sufficient_decrease <= 1:
            raise DomainError("sufficient_decrease must lie in (0, 1]")
        if int(self.restarts) < 1:
            raise DomainError("restarts must be >= 1")
        if self.initial_policy not in INITIAL_POLICIES:
            raise DomainError(f"unknown initial policy {self.initial_policy!r}")


@dataclass
class SolveResult:
    minimizer: GridVector
    objective: float
    iterations: int
    converged: bool
    restart_index: int = 0
    history: list = field(default_factory=list, repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)


def _hnorm(x, h):
    return float(np.sqrt(h * np.dot(x, x)))


class _Objective:
    """Array-level evaluation of the pieces of the functional for one solve."""

    def __init__(self, problem, v_data, alpha):
        self.op = problem.operator
        self.pen = problem.penalty
        self.sim = problem.similarity
        self.h = problem.grid_spacing
        self.v = v_data.values
        self.alpha = alpha
        self.p = problem.p
        q = getattr(self.sim, "exponent", None)
        self.e = None if q is None else self.p * q

    def residual(self, x):
        return self.op._apply(x) - self.v

    def data_term(self, x):
        return _hnorm(self.residual(x), self.h) ** self.e

    def total(self, x):
        om = self.pen._value(x, self.h)
        if not np.isfinite(om):
            return np.inf
        return self.data_term(x) + self.alpha * om

    def zero_residual_point(self):
        """Least-norm exact fit ``F(x) = v`` for linear ``F``, or ``None``."""
        if not self.op.linear:
            return None
        x = self.pen._project_domain(self.op._exact_fit(self.v))
        scale = max(_hnorm(self.v, self.h), 1e-300)
        if _hnorm(self.residual(x), self.h) > 1e-14 * scale:
            return None
        return x

    def metric(self, x):
        """Diagonal of ``J^T J`` with a relative floor."""
        dg = self.op._jtj_diagonal(x)
        top = dg.max()
        if top <= 0:
            return np.ones_like(dg)
        return np.maximum(dg, 1e-12 * top)


def _power_diff(s_new, s_old, power):
    """``s_new**power - s_old**power`` given the exact difference ``ds = s_new - s_old``."""
    if power == 1.0:
        return s_new - s_old
    if s_old <= 0.0:
        return s_new ** power
    return s_old ** power * np.expm1(power * np.log1p((s_new - s_old) / s_old))


def _newton_polish(obj, x, weight, tol, decrease, max_steps=10):
    """Gauss-Newton refinement of ``weight*||F(x)-v||**2 + alpha*Omega``.

    Each step solves the Gauss-Newton system by preconditioned conjugate
    gradients and is accepted only if the exactly evaluated objective change
    is negative. Returns the point, the accepted decreases and the final
    h-norm of the gradient (``None`` if the penalty has no second derivative).
    """
    op, pen, alpha, h = obj.op, obj.pen, obj.alpha, obj.h
    n = x.size
    steps = []
    gnorm = None
    for _ in range(max_steps):
        hd = pen._hess_diag(x, h)
        if hd is None or not np.all(np.isfinite(hd)):
            break
        g = 2.0 * weight * op._vjp(x, obj.residual(x)) + alpha * pen._grad(x, h)
        gnorm = _hnorm(g, h)
        if gnorm <= tol:
            break
        x0 = x
        hess = LinearOperator((n, n), dtype=float, matvec=lambda d: 2.0 * weight
                              * op._vjp(x0, op._jvp(x0, d)) + alpha * hd * d)
        pre = 1.0 / (2.0 * weight * obj.metric(x) + alpha * hd)
        prec = LinearOperator((n, n), dtype=float, matvec=lambda d: pre * d)
        d, _ = cg(hess, -g, rtol=1e-15, atol=0.0, maxiter=10 * n, M=prec)
        accepted = False
        for t in 0.5 ** np.arange(12):
            z = x + t * d
            if not pen._in_domain(z):
                continue
            dz = decrease(z, x)
            if dz < 0.0:
                x, accepted = z, True
                steps.append(dz)
                break
        if not accepted:
            break
    return x, steps, gnorm


def _prox_gradient(obj, x0, weight, cfg, on_accept=None, power=1.0):
    """Accelerated proximal gradient on ``weight*s(x)**power + alpha*Omega``.

    Here ``s(x) = ||F(x) - v||**2``; ``power = 1`` is the quadratic case and
    ``power > 1`` covers residual exponents above 2 directly. Accepted iterates
    never increase the objective: a momentum step that would increase it is
    discarded and replaced by a plain proximal step from the current point.
    For a quadratic data term and a twice differentiable penalty the result is
    refined by Gauss-Newton steps (see :func:`_newton_polish`).
    """
    h = obj.h
    op, pen, alpha = obj.op, obj.pen, obj.alpha

    def sq(r):
        return h * np.dot(r, r)

    def smooth_diff(dr, r):
        # weight * (s(x + .)**power - s(x)**power) from the residual change dr
        s_old = sq(r)
        return weight * _power_diff(s_old + h * np.dot(dr, 2.0 * r + dr), s_old, power)

    def grad_at(x, r):
        slope = weight * power * (sq(r) ** (power - 1.0) if power != 1.0 else 1.0)
        return 2.0 * slope * op._vjp(x, r)

    r0 = obj.residual(x0)
    scale0 = power * max(sq(r0), 1e-24 * max(sq(obj.v), 1e-300)) ** (power - 1.0)
    metric = 2.0 * weight * scale0 * obj.metric(x0)
    state = {"L": 1.0}

    def decrease(z, x):
        # objective change without cancelling the two objective values
        return smooth_diff(op._difference(z, x), obj.residual(x)) \
            + alpha * pen._value_diff(z, x, h)

    def step_from(y):
        # backtracking on the quadratic upper model in the diagonal metric
        ry = obj.residual(y)
        gy = grad_at(y, ry)
        L = state["L"]
        while True:
            z = pen._prox(y - gy / (L * metric), alpha / (L * metric), h)
            d = z - y
            change = smooth_diff(op._difference(z, y), ry)
            model = h * np.dot(gy, d) \
                + cfg.sufficient_decrease * 0.5 * L * h * np.dot(metric * d, d)
            if change <= model or L > 1e30:
                break
            L /= cfg.shrink
        state["L"] = L
        return z, L * _hnorm(metric * d, h)

    def f(x):
        return weight * sq(obj.residual(x)) ** power

    x = pen._project_domain(np.array(x0, dtype=float))
    fx = f(x) + alpha * pen._value(x, h)
    if not np.isfinite(fx):
        x = pen._prox(x, 1.0, h)
        fx = f(x) + alpha * pen._value(x, h)
    scale = 1.0 + _hnorm(grad_at(x, obj.residual(x)), h)
    tol = cfg.gradient_tolerance * scale

    def run(x, fx, stage_tol, budget):
        x_prev, t_mom = x.copy(), 1.0
        it = 0
        for it in range(1, budget + 1):
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom ** 2))
            beta = (t_mom - 1.0) / t_next
            gmap = None
            z = None
            if beta > 0.0:
                z, _ = step_from(x + beta * (x - x_prev))
                dz = decrease(z, x)
                if not dz <= 0.0:
                    t_mom, t_next = 1.0, 1.0
                    z = None
            if z is None:
                z, gmap = step_from(x)
                dz = decrease(z, x)
                if gmap <= stage_tol:
                    return (z, fx + dz, it, True) if dz <= 0.0 else (x, fx, it, True)
                if not dz <= 0.0:
                    # no decrease from a plain step: rounding floor reached
                    return x, fx, it, False
            x_prev, x, fx = x, z, fx + dz
            t_mom = t_next
            if on_accept is not None:
                on_accept(fx)
            state["L"] *= cfg.shrink  # let the step grow again
            if gmap is None and (it % 10 == 0
                                 or _hnorm(x - x_prev, h) <= stage_tol / state["L"]):
                _, gmap = step_from(x)
                if gmap <= stage_tol:
                    return x, fx, it, True
        return x, fx, it, False

    budget = int(cfg.max_iterations)
    if power != 1.0 or type(pen)._hess_diag is Penalty._hess_diag:
        x, fx, its, conv = run(x, fx, tol, budget)
        return x, its, conv
    # first-order phase to moderate accuracy, then Gauss-Newton refinement;
    # the first-order method resumes if the refinement is not applicable
    x, fx, its, conv = run(x, fx, max(tol, 1e-8 * scale), budget)
    for attempt in range(2):
        x, steps, gnorm = _newton_polish(obj, x, weight, tol, decrease)
        for dz in steps:
            fx += dz
            if on_accept is not None:
                on_accept(fx)
        its += len(steps)
        if gnorm is not None:
            g = grad_at(x, obj.residual(x)) + alpha * pen._grad(x, h)
            if _hnorm(g, h) <= tol:
                return x, its, True
        if attempt == 1 or its >= budget:
            break
        x, fx, more, conv = run(x, fx, tol, budget - its)
        its += more
    return x, its, conv


def _zero_residual_certificate(obj, x):
    """Dual certificate for ``||A x - v|| + alpha*Omega`` at a zero-residual point.

    Optimal iff some ``zeta`` with ``||zeta|| <= 1`` satisfies
    ``A^T zeta = -alpha * grad Omega(x)``; the least-norm solution is tested.
    """
    try:
        g = obj.pen._grad(x, obj.h)
    except DomainError:
        return False
    jac = obj.op.jacobian(x)
    zeta, *_ = np.linalg.lstsq(jac.T, -obj.alpha * g, rcond=None)
    consistent = np.allclose(jac.T @ zeta, -obj.alpha * g, rtol=1e-8, atol=1e-12)
    return bool(consistent and _hnorm(zeta, obj.h) <= 1.0)


def _run_norm(obj, x0, cfg):
    history = []
    x = np.array(x0, dtype=float)
    e = obj.e
    if e >= 2.0:
        # smooth residual term; no majorization needed
        x, its, conv = _prox_gradient(obj, x, 1.0, cfg, history.append, power=0.5 * e)
        return x, its, conv, history
    total = obj.total(x)
    history.append(total)
    rnorm = _hnorm(obj.residual(x), obj.h)
    scale = max(_hnorm(obj.v, obj.h), 1e-300)
    if e <= 1.0 and rnorm <= 1e-14 * scale:
        if e < 1.0 or _zero_residual_certificate(obj, x):
            return x, 0, True, history
        # not optimal: leave the zero-residual point along the penalty prox
        x = obj.pen._prox(x, obj.alpha, obj.h)
        total = obj.total(x)
    floor = 1e-12 * scale
    its_total, conv = 0, False
    x_zero = obj.zero_residual_point() if e <= 1.0 else None
    for _ in range(int(cfg.max_outer)):
        if x_zero is not None and obj.total(x_zero) <= total:
            # the exact data fit already beats the current iterate; for e < 1 it is
            # a strict local minimizer, for e = 1 the dual certificate decides
            if e < 1.0 or _zero_residual_certificate(obj, x_zero):
                history.append(obj.total(x_zero))
                return x_zero, its_total, True, history
            x_zero = None
        rnorm = max(_hnorm(obj.residual(x), obj.h), floor)
        weight = 0.5 * e * rnorm ** (e - 2.0)
        x_new, its, inner_conv = _prox_gradient(obj, x, weight, cfg)
        its_total += its
        new_total = obj.total(x_new)
        if new_total > total:
            break
        change = total - new_total
        x, total = x_new, new_total
        history.append(total)
        if change <= 1e-14 * max(abs(total), 1e-300) and inner_conv:
            conv = True
            break
    return x, its_total, conv, history


def _run_wasserstein(obj, x0, cfg):
    """Exponentiated subgradient on the simplex; the best iterate is kept."""
    h = obj.h
    sim = obj.sim
    x = np.clip(np.asarray(x0, dtype=float), 1e-300, None)
    x = x / (h * x.sum())
    x = np.maximum(x, 1e-12 / (x.size * h))
    x = x / (h * x.sum())

    def total(u):
        fu = obj.op._apply(u)
        return sim._value(fu, obj.v, h) ** obj.p + obj.alpha * obj.pen._value(u, h)

    best_x, best = x.copy(), total(x)
    history = [best]
    tau0 = 1.0
    for it in range(1, int(cfg.max_iterations) + 1):
        fu = obj.op._apply(x)
        w1 = sim._value(fu, obj.v, h)
        gs = obj.op._vjp(x, sim._subgradient_first(fu, obj.v, h))
        if obj.p != 1.0:
            gs = obj.p * max(w1, 1e-300) ** (obj.p - 1.0) * gs
        g = gs + obj.alpha * obj.pen._grad(x, h)
        g = g - h * np.sum(x * g)  # tangent to the simplex
        gn = _hnorm(g, h)
        if gn == 0.0:
            return best_x, it, True, history
        step = tau0 / (np.sqrt(it) * max(gn, 1.0))
        x = x * np.exp(-step * g)
        x = np.maximum(x / (h * x.sum()), 1e-300)
        x = x / (h * x.sum())
        val = total(x)
        if val < best:
            best, best_x = val, x.copy()
            history.append(best)
    return best_x, int(cfg.max_iterations), False, history


def _backprojection(problem, v):
    op = problem.operator
    if op.linear:
        return op._exact_fit(v)
    # 2-homogeneous heuristic: adjoint of the linearization at a constant,
    # rescaled so that ||F(x)|| matches ||v||
    x = op._vjp(np.ones(op.n), v)
    fx = _hnorm(op._apply(x), problem.grid_spacing)
    if fx == 0.0:
        return np.zeros(op.n)
    return x * np.sqrt(_hnorm(v, problem.grid_spacing) / fx)


def _initial_point(problem, v, policy, rng, perturb):
    n = problem.operator.n
    if policy == "zero":
        x = np.zeros(n)
    elif policy == "u_true_perturbed":
        x = problem.u_true.values.copy()
    else:
        x = _backprojection(problem, v)
    if perturb:
        size = max(float(np.max(np.abs(x))), 1.0)
        x = x + 0.1 * size * rng.standard_normal(n)
    if isinstance(problem.similarity, WassersteinSimilarity):
        x = np.abs(x)
        if not np.any(x > 0):
            x = np.ones(n)
    return x


def _is_convex(problem):
    sim = problem.similarity
    if isinstance(sim, WassersteinSimilarity):
        return problem.operator.linear and problem.p >= 1.0
    return problem.operator.linear and problem.p * sim.exponent >= 1.0


def minimize_tikhonov(problem, v_data, alpha, cfg=None):
    """Minimize the Tikhonov functional for data ``v_data`` and parameter ``alpha``.

    Returns the best point over all restarts. The reported objective is always
    recomputed from the returned minimizer.
    """
    cfg = cfg or SolverConfig()
    alpha = check_positive(alpha, "alpha")
    if v_data.size != problem.v_exact.size:
        raise DomainError("data vector lives on a different grid")
    obj = _Objective(problem, v_data, alpha)
    wasser = isinstance(problem.similarity, WassersteinSimilarity)
    if wasser:
        if not problem.operator.linear:
            raise DomainError("Wasserstein residuals need a linear operator")
        if problem.similarity.q != 1.0:
            raise DomainError("Wasserstein residual solves support q = 1 only")
        runner = _run_wasserstein
    else:
        runner = _run_norm
    n_runs = 1 if _is_convex(problem) else int(cfg.restarts)
    order = [cfg.initial_policy] + [p for p in INITIAL_POLICIES if p != cfg.initial_policy]
    results = []
    for k in range(n_runs):
        rng = np.random.default_rng([cfg.seed, k])
        policy = order[k % len(order)]
        x0 = _initial_point(problem, v_data.values, policy, rng, k >= len(order))
        try:
            x, its, conv, hist = runner(obj, x0, cfg)
        except FloatingPointError as exc:  # pragma: no cover - defensive
            raise NumericalFailure(str(exc)) from exc
        results.append((obj.total(x) if not wasser else None, k, x, its, conv, hist))
    best = None
    for val, k, x, its, conv, hist in results:
        u = problem.u_true.with_values(x)
        value = tikhonov_value(problem, u, v_data, alpha)
        if best is None or value < best[0]:
            best = (value, k, u, its, conv, hist)
    value, k, u, its, conv, hist = best
    if not np.isfinite(value):
        raise NumericalFailure("solver did not reach a point with finite objective")
    return SolveResult(u, value, its, conv, k, hist,
                       {"runs": len(results), "convex": _is_convex(problem)})


def closed_form_linear_l2(op, v_data, alpha):
    """Solve ``(A*A + alpha I) u = A* v`` (quadratic penalty, ``p = 2``)."""
    alpha = check_positive(alpha, "alpha")
    if not op.linear:
        raise DomainError("closed form requires a linear operator")
    v = v_data.values
    if hasattr(op, "sigma"):
        x = op.sigma * v / (op.sigma ** 2 + alpha)
    else:
        a = op.jacobian(np.zeros(op.n))
        x = np.linalg.solve(a.T @ a + alpha * np.eye(op.n), a.T @ v)
    return GridVector(x, op.h, origin=op.origin)


def make_noisy_data(v_exact, delta, direction_seed, similarity=None):
    """Perturb ``v_exact`` so that ``S(v_delta, v_exact)`` equals ``delta``.

    Norm kinds use a standard-normal direction from ``numpy.random.default_rng``
    (PCG64) scaled to the required h-norm. The Wasserstein kind mixes in a point
    mass at the grid endpoint farthest from the mean and calibrates the mixing
    weight by root finding.
    """
    delta = check_positive(delta, "delta")
    sim = similarity or NormSimilarity()
    h = v_exact.grid_spacing
    if isinstance(sim, WassersteinSimilarity):
        if v_exact.kind != MEASURE:
            raise DomainError("Wasserstein noise needs a probability-measure vector")
        x = v_exact.points
        mean = h * np.dot(v_exact.values, x)
        far = 0 if mean - x[0] > x[-1] - mean else x.size - 1
        spike = np.zeros(x.size)
        spike[far] = 1.0 / h

        def mix(theta):
            vals = (1.0 - theta) * v_exact.values + theta * spike
            vals = vals / (h * vals.sum())
            return GridVector(vals, h, MEASURE, v_exact.origin)

        top = wasserstein_1d(mix(1.0), v_exact, sim.q)
        if delta > top:
            raise DomainError(
                f"noise level {delta!r} exceeds the largest attainable distance {top!r}")
        if delta == top:
            return mix(1.0)
        theta = brentq(lambda th: wasserstein_1d(mix(th), v_exact, sim.q) - delta,
                       0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        return mix(theta)
    rng = np.random.default_rng(direction_seed)
    direction = rng.standard_normal(v_exact.size)
    q = getattr(sim, "exponent", 1.0)
    target = delta ** (1.0 / q)
    noise = direction * (target / _hnorm(direction, h))
    return GridVector(v_exact.values + noise, h, origin=v_exact.origin)


def apriori_validity(delta, alpha, spec, problem):
    """Sufficient condition for the regularized minimizer to lie in the level set."""
    p = problem.p
    s = problem.similarity.s_constant
    rhs = spec.rho / (2.0 * c_p(p) * s ** p) - 0.5 * problem.omega_true
    return bool(alpha <= spec.alpha_bar and delta ** p / alpha <= rhs)


class TikhonovRegularizer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`minimize_tikhonov`.

    ``fit`` takes the noisy data (an array of nodal values or a ``GridVector``)
    and stores the regularized solution; ``transform`` maps data to
    reconstructions and ``predict`` returns ``F`` of the reconstruction.

    Parameters
    ----------
    problem : Problem
        Operator, penalty, similarity and exponent ``p``.
    alpha : float
        Regularization parameter.
    solver : SolverConfig, optional
    """

    def __init__(self, problem=None, alpha=1.0, solver=None):
        self.problem = problem
        self.alpha = alpha
        self.solver = solver

    def _as_data(self, v):
        if isinstance(v, GridVector):
            return v
        ref = self.problem.v_exact
        return GridVector(np.asarray(v, dtype=float).reshape(-1), ref.grid_spacing,
                          ref.kind, ref.origin)

    def _solve(self, v):
        if self.problem is None:
            raise DomainError("TikhonovRegularizer needs a problem")
        return minimize_tikhonov(self.problem, self._as_data(v), self.alpha, self.solver)

    def fit(self, X, y=None):
        self.result_ = self._solve(X)
        self.solution_ = self.result_.minimizer
        self.n_features_in_ = self.solution_.size
        return self

    def transform(self, X):
        check_is_fitted(self, "solution_")
        return self._solve(X).minimizer.values

    def predict(self, X=None):
        check_is_fitted(self, "solution_")
        u = self.solution_ if X is None else self._solve(X).minimizer
        return self.problem.operator.apply(u).values

    def score(self, X, y=None):
        """Negative Tikhonov value of the fitted solution for data ``X``."""
        check_is_fitted(self, "solution_")
        return -tikhonov_value(self.problem, self.solution_, self._as_data(X), self.alpha)
