"""Convergence-rate prediction, measurement and error bounds."""

from dataclasses import dataclass, field

import numpy as np

from .._validation import DomainError, check_in_range, check_positive, check_sorted_grid
from ..core import c_p
from ..solver import SolverConfig, make_noisy_data, minimize_tikhonov


def holder_kappa(mu):
    """Exponent ``2*mu/(1+mu)`` implied by a Hoelder source condition of order ``mu``."""
    mu = check_in_range(mu, "mu", 0.0, 1.0, closed_low=False)
    return 2.0 * mu / (1.0 + mu)


def holder_mu_bound(kappa):
    """Open upper bound ``kappa/(2-kappa)`` on the Hoelder order compatible with ``kappa``."""
    kappa = check_in_range(kappa, "kappa", 0.0, 1.0, closed_low=False)
    return kappa / (2.0 - kappa)


@dataclass
class RateFit:
    """Least-squares line through ``(log delta, log error)``."""

    samples: list
    slope: float
    intercept: float
    r_squared: float
    failures: list = field(default_factory=list)
    rows: list = field(default_factory=list, repr=False)

    def within(self, target, tol=0.1, min_r_squared=0.98):
        return abs(self.slope - target) <= tol and self.r_squared >= min_r_squared


def fit_rate(deltas, errors):
    """Fit ``log error = slope * log delta + intercept``."""
    deltas = np.asarray(deltas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if deltas.size != errors.size or deltas.size < 2:
        raise DomainError("need at least two (delta, error) samples")
    if np.unique(deltas).size != deltas.size:
        raise DomainError("deltas must be distinct")
    if np.any(deltas <= 0) or np.any(errors <= 0):
        raise DomainError("log-log fit needs positive deltas and errors")
    x, y = np.log(deltas), np.log(errors)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(list(zip(deltas.tolist(), errors.tolist())), float(slope),
                   float(intercept), r2)


def empirical_rate(problem, choice, delta_grid, cfg=None, *, seed=0, min_success=4):
    """Measure ``B_xi(u_alpha^delta, u+)`` along a decreasing noise grid.

    For each ``delta`` the data ``v_delta`` uses the same seeded direction, the
    rule ``choice(delta)`` gives ``alpha`` and the functional is minimized.
    """
    cfg = cfg or SolverConfig()
    deltas = check_sorted_grid(delta_grid, "delta_grid", decreasing=True)
    if deltas.size < 5 or deltas[0] / deltas[-1] < 100.0 * (1 - 1e-12):
        raise DomainError("need at least 5 noise levels spanning 2 decades")
    rows, failures = [], []
    for delta in deltas:
        try:
            v = make_noisy_data(problem.v_exact, float(delta), seed, problem.similarity)
            alpha = float(choice(float(delta)))
            res = minimize_tikhonov(problem, v, alpha, cfg)
            err = problem.bregman(res.minimizer)
        except (DomainError, ArithmeticError, RuntimeError) as exc:
            failures.append((float(delta), str(exc)))
            continue
        rows.append({"delta": float(delta), "alpha": alpha, "bregman_error": float(err),
                     "objective": res.objective, "iterations": res.iterations,
                     "converged": res.converged})
    good = [r for r in rows if r["bregman_error"] > 0]
    if len(good) < min_success:
        raise DomainError(f"only {len(good)} successful solves, need {min_success}")
    fit = fit_rate([r["delta"] for r in good], [r["bregman_error"] for r in good])
    fit.failures = failures
    fit.rows = rows
    return fit


def rates_lemma_constants(beta1, beta2, kappa, p, s=1.0):
    """``(K1, K2, K3)`` of the three-term error bound."""
    if not 0.0 <= beta1 < 1.0:
        raise DomainError("beta1 must lie in [0, 1)")
    check_positive(kappa, "kappa")
    if not kappa < p:
        raise DomainError(f"kappa={kappa!r} must be smaller than p={p!r}")
    k1 = 2.0 / (1.0 - beta1)
    k3 = 1.0 / (1.0 - beta1)
    base = c_p(kappa) * beta2 * s ** kappa
    k2 = (2.0 * base ** (p / (p - kappa)) * (kappa / p) ** (kappa / (p - kappa))
          * (p - kappa) / (p * (1.0 - beta1)))
    return k1, k2, k3


def rates_lemma_bound(problem, params, r, delta, alpha, d_value):
    """``K1*delta**p/alpha + K2*alpha**(kappa/(p-kappa))*r**(gamma*p/(p-kappa)) + K3*d``."""
    p = problem.p
    k1, k2, k3 = rates_lemma_constants(params.beta1, params.beta2, params.kappa, p,
                                       problem.similarity.s_constant)
    kap, gam = params.kappa, params.gamma
    return (k1 * delta ** p / alpha
            + k2 * alpha ** (kap / (p - kap)) * r ** (gam * p / (p - kap))
            + k3 * d_value)


def vi_to_avi_majorant(beta2, gamma, kappa, mu):
    """Power-law majorant ``(a, b)`` of ``d`` for an inequality with exponent ``mu``.

    A variational inequality with exponent ``mu`` yields
    ``d(r) <= a * r**(-b*gamma)`` for exponent ``kappa < mu``, with
    ``b = kappa/(mu-kappa)`` and
    ``a = (mu/kappa)**(kappa/(mu-kappa)) * mu/(mu-kappa) * beta2``.
    """
    check_positive(kappa, "kappa")
    check_positive(gamma, "gamma", strict=False)
    beta2 = check_positive(beta2, "beta2")
    if not mu > kappa:
        raise DomainError(f"mu={mu!r} must exceed kappa={kappa!r}")
    b = kappa / (mu - kappa)
    a = (mu / kappa) ** (kappa / (mu - kappa)) * (mu / (mu - kappa)) * beta2
    return float(a), float(b)


def majorant_rate_exponent(b, kappa):
    """Exponent ``b*kappa/(b+1)`` of the rate obtained from ``a*r**(-b*gamma)``."""
    return b * kappa / (b + 1.0)
