import numpy as np
import pytest

from helpers import holder_problem
from tikhonov_lab._validation import DomainError
from tikhonov_lab.analysis import (
    AprioriParameterChoice,
    AviParams,
    FixedParameterChoice,
    asc_distance,
    empirical_rate,
    fit_rate,
    holder_kappa,
    holder_mu_bound,
    level_set_radius,
    majorant_rate_exponent,
    rates_lemma_bound,
    rates_lemma_constants,
    vi_to_avi_majorant,
)
from tikhonov_lab.core import LevelSetSpec
from tikhonov_lab.solver import make_noisy_data, minimize_tikhonov


@pytest.mark.parametrize("mu, kappa", [(0.25, 0.4), (0.5, 2 / 3), (1.0, 1.0)])
def test_holder_kappa(mu, kappa):
    assert holder_kappa(mu) == pytest.approx(kappa)
    assert holder_mu_bound(holder_kappa(mu)) == pytest.approx(mu)
    with pytest.raises(DomainError):
        holder_kappa(0.0)


def test_fit_rate_exact_power_law():
    d = np.logspace(-1, -5, 6)
    fit = fit_rate(d, 3.0 * d ** 0.75)
    assert fit.slope == pytest.approx(0.75)
    assert fit.intercept == pytest.approx(np.log(3.0))
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.within(0.8, tol=0.1) and not fit.within(0.5, tol=0.1)


@pytest.mark.parametrize("d, e", [([1.0], [1.0]), ([1.0, 1.0], [1.0, 2.0]),
                                  ([1.0, 2.0], [0.0, 1.0])])
def test_fit_rate_validation(d, e):
    with pytest.raises(DomainError):
        fit_rate(d, e)


def test_empirical_rate_grid_validation():
    prob = holder_problem(n=20)
    rule = FixedParameterChoice(1e-3)
    with pytest.raises(DomainError):
        empirical_rate(prob, rule, np.logspace(-2, -3, 5))
    with pytest.raises(DomainError):
        empirical_rate(prob, rule, np.logspace(-6, -2, 8))


def test_empirical_rate_rows():
    prob = holder_problem(n=50, mu=1.0)
    fit = empirical_rate(prob, AprioriParameterChoice(2.0, 1.0), np.logspace(-2, -4, 5))
    assert len(fit.rows) == 5 and not fit.failures
    assert [r["alpha"] for r in fit.rows] == pytest.approx([r["delta"] for r in fit.rows])
    assert all(r["converged"] for r in fit.rows)


@pytest.mark.parametrize("mu", [0.25, 0.5, 1.0])
def test_holder_rates_on_resolved_discretization(mu):
    # with n = 10**6 the smallest singular value sits below every alpha used,
    # so the discrete problem behaves like the continuous one
    prob = holder_problem(n=10 ** 6, mu=mu)
    kappa = holder_kappa(mu)
    fit = empirical_rate(prob, AprioriParameterChoice(2.0, kappa), np.logspace(-2, -6, 8),
                         seed=7)
    assert fit.within(kappa, tol=0.1, min_r_squared=0.98)


def test_lemma_constants():
    k1, k2, k3 = rates_lemma_constants(0.0, 1.0, 1.0, 2.0)
    assert (k1, k3) == (2.0, 1.0)
    assert k2 == pytest.approx(0.5)
    k1, _, k3 = rates_lemma_constants(0.5, 1.0, 1.0, 2.0)
    assert (k1, k3) == (4.0, 2.0)
    with pytest.raises(DomainError):
        rates_lemma_constants(0.0, 1.0, 2.0, 2.0)


def test_lemma_bound_holds_on_linear_problem():
    # linear F, beta1 = 0, kappa = gamma = 1: d(r) <= K * dtilde(r) with K
    # the level-set radius, so K * dtilde is an admissible distance value
    prob = holder_problem(n=60, mu=0.5)
    spec = LevelSetSpec.default_for(prob)
    params = AviParams(0.0, 1.0, 1.0, 1.0, spec)
    k_bar = level_set_radius(prob, spec)
    for delta in (1e-2, 1e-3):
        alpha = delta
        v = make_noisy_data(prob.v_exact, delta, 0)
        err = prob.bregman(minimize_tikhonov(prob, v, alpha).minimizer)
        for r in (0.1, 1.0, 10.0, 100.0):
            dval = k_bar * asc_distance(prob, r)[0]
            assert err <= rates_lemma_bound(prob, params, r, delta, alpha, dval)


def test_majorant():
    assert vi_to_avi_majorant(1.0, 1.0, 0.5, 1.0) == (4.0, 1.0)
    a, b = vi_to_avi_majorant(2.0, 1.0, 0.25, 1.0)
    assert b == pytest.approx(1 / 3)
    assert a == pytest.approx(2.0 * 4.0 ** (1 / 3) * 4 / 3)
    assert majorant_rate_exponent(1.0, 0.5) == 0.25
    with pytest.raises(DomainError):
        vi_to_avi_majorant(1.0, 1.0, 1.0, 1.0)
