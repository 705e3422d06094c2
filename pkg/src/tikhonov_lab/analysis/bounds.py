"""Upper bounds on the attainable exponent ``kappa``."""

from dataclasses import dataclass

import numpy as np

from .._validation import DomainError, check_positive, check_sorted_grid
from ..core import level_set_member
from .choice import phi_inverse
from .rates import fit_rate

DEFAULT_T_GRID = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def richardson_limit(t, values):
    """Value at ``t = 0`` of the polynomial interpolating ``(t_i, values_i)`` (Neville)."""
    t = np.asarray(t, dtype=float)
    p = np.array(values, dtype=float)
    n = t.size
    for m in range(1, n):
        # p[i] <- interpolant on t[i..i+m] evaluated at 0
        p[: n - m] = (t[: n - m] * p[1: n - m + 1] - t[m:] * p[: n - m]) \
            / (t[: n - m] - t[m:])
    return float(p[0])


@dataclass(frozen=True)
class KappaBoundReport:
    xi_direction: float
    L_omega: float
    L_similarity: float
    q: float
    derivative_matches: bool
    kappa_bound: float
    configured_kappa: float
    violates: bool
    quotients_omega: tuple = ()
    quotients_similarity: tuple = ()


def kappa_upper_bound_check(problem, params, direction, q, t_grid=DEFAULT_T_GRID,
                            tol=1e-6):
    """Estimate the directional limits behind the bound ``kappa <= q``.

    ``L_omega`` and ``L_similarity`` are the limits of
    ``(Omega(u+ + t d) - Omega(u+))/t`` and ``S(F(u+ + t d), F(u+))**q / t``,
    obtained by polynomial extrapolation of the quotients to ``t = 0``.
    The bound applies when ``L_omega == xi(d)`` (within ``tol``) and
    ``L_similarity`` is finite.
    """
    q = check_positive(q, "q")
    t_grid = check_sorted_grid(t_grid, "t_grid", decreasing=True)
    xi_d = problem.xi(direction)
    if not xi_d < 0:
        raise DomainError(f"direction must satisfy xi(direction) < 0, got {xi_d!r}")
    u0 = problem.u_true
    sim, op, pen = problem.similarity, problem.operator, problem.penalty
    f0 = op.apply(u0)
    om0 = pen.value(u0)
    qo, qs = [], []
    for t in t_grid:
        u = u0.with_values(u0.values + t * direction.values)
        if not level_set_member(problem, params.spec, u):
            raise DomainError(f"u+ + t*direction leaves the level set at t={t!r}")
        qo.append(pen._value_diff(u.values, u0.values, u.grid_spacing) / t
                  if hasattr(pen, "_value_diff") else (pen.value(u) - om0) / t)
        qs.append(sim.value(op.apply(u), f0) ** q / t)
    l_om = richardson_limit(t_grid, qo)
    l_s = richardson_limit(t_grid, qs)
    matches = abs(l_om - xi_d) <= tol * max(1.0, abs(xi_d))
    applies = matches and np.isfinite(l_s)
    bound = q if applies else np.inf
    return KappaBoundReport(float(xi_d), l_om, l_s, q, bool(matches), float(bound),
                            float(params.kappa), bool(params.kappa > bound),
                            tuple(qo), tuple(qs))


@dataclass(frozen=True)
class ApproxKappaDiagnostic:
    deltas: tuple
    ratios: tuple
    slope: float
    trends_to_zero: bool


def approx_kappa_diagnostic(table, kappa, gamma, q, delta_grid, slope_tol=0.05):
    """Trend of ``d(Phi^{-1}(delta)) / delta**q`` as ``delta`` decreases.

    A clearly positive log-log slope means the ratio tends to zero, which the
    theory excludes when the directional limits exist.
    """
    deltas = check_sorted_grid(delta_grid, "delta_grid", decreasing=True)
    ratios = []
    for delta in deltas:
        r = phi_inverse(delta, table, kappa, gamma)
        ratios.append(table.lookup(r)[0] / delta ** q)
    ratios = np.array(ratios)
    if np.all(ratios > 0):
        slope = fit_rate(deltas, ratios).slope
    else:
        slope = np.inf
    return ApproxKappaDiagnostic(tuple(deltas), tuple(ratios), float(slope),
                                 bool(slope > slope_tol))
