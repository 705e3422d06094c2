import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tikhonov_lab._validation import DomainError
from tikhonov_lab.core import GridVector, SubgradientElement
from tikhonov_lab.penalty import (
    NegativeEntropy,
    PowerNorm,
    SquaredNorm,
    bregman,
    make_penalty,
    penalty_value,
    subgradient,
)

H = 0.2
PENALTIES = [SquaredNorm(), PowerNorm(1.05), PowerNorm(1.5), PowerNorm(2.0), NegativeEntropy()]


def _sample(pen, values):
    if isinstance(pen, NegativeEntropy):
        values = np.abs(values) + 1e-3
    return GridVector(values, H)


def test_squared_norm():
    u = GridVector([1.0, -2.0], H)
    pen = SquaredNorm()
    assert pen(u) == pytest.approx(H * 5.0)
    np.testing.assert_allclose(pen.subgradient(u).coefficients, [2.0, -4.0])
    v = GridVector([0.0, 1.0], H)
    assert pen.bregman(u, v, pen.subgradient(v)) == pytest.approx(H * 10.0)


def test_power_norm_value_and_range():
    pen = PowerNorm(1.5)
    u = GridVector([4.0, -1.0], 1.0)
    assert pen(u) == pytest.approx(9.0)
    for t in (1.0, 2.5):
        with pytest.raises(DomainError):
            PowerNorm(t)


def test_entropy_minimum_at_uniform():
    pen = NegativeEntropy()
    n, h = 8, 0.125
    assert pen(GridVector(np.full(n, 1.0 / (n * h)), h)) == pytest.approx(0.0, abs=1e-15)
    mu = np.random.default_rng(0).random(n)
    mu /= h * mu.sum()
    assert pen(GridVector(mu, h)) == pytest.approx(h * np.sum(mu * np.log(mu)) + np.log(n * h))


def test_entropy_domain():
    pen = NegativeEntropy()
    assert pen(GridVector([1.0, -0.1])) == np.inf
    assert np.isfinite(pen(GridVector([1.0, 0.0])))
    with pytest.raises(DomainError):
        pen.subgradient(GridVector([1.0, 0.0]))


@pytest.mark.parametrize("pen", PENALTIES, ids=repr)
def test_gradient_matches_finite_differences(pen):
    rng = np.random.default_rng(1)
    u = _sample(pen, rng.standard_normal(7))
    g = pen.subgradient(u)
    for _ in range(5):
        d = rng.standard_normal(7)
        t = 1e-6
        fd = (pen(u.with_values(u.values + t * d)) - pen(u.with_values(u.values - t * d))) / (2 * t)
        assert fd == pytest.approx(g(d), rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("pen", PENALTIES, ids=repr)
@pytest.mark.parametrize("lam", [1e-3, 0.3, 10.0])
def test_prox_optimality(pen, lam):
    rng = np.random.default_rng(2)
    x = 3.0 * rng.standard_normal(9)
    y = pen._prox(x, lam, H)
    keep = slice(None)
    if isinstance(pen, NegativeEntropy):
        # exact solution is positive but may underflow for very negative x
        assert np.all(y >= 0)
        keep = y > 1e-200
        grad = np.log(y[keep] * x.size * H)
    else:
        grad = pen._grad(y, H)
    x, y = x[keep], y[keep]
    # x - y = lam * grad(y) componentwise
    np.testing.assert_allclose(x - y, lam * grad, rtol=1e-9, atol=1e-9 * np.abs(x).max())


@pytest.mark.parametrize("pen", PENALTIES, ids=repr)
def test_value_diff_matches_plain_difference(pen):
    rng = np.random.default_rng(3)
    for _ in range(20):
        z = _sample(pen, rng.standard_normal(6)).values
        x = _sample(pen, rng.standard_normal(6)).values
        assert pen._value_diff(z, x, H) == pytest.approx(
            pen._value(z, H) - pen._value(x, H), rel=1e-10, abs=1e-13)


def test_value_diff_resolves_tiny_steps():
    pen = SquaredNorm()
    x = np.ones(4)
    z = x + 1e-12
    assert pen._value_diff(z, x, 1.0) == pytest.approx(8e-12, rel=1e-6)


def test_factory_and_wrappers():
    assert isinstance(make_penalty("squared-norm"), SquaredNorm)
    assert make_penalty("power-norm", 1.2).t == 1.2
    assert isinstance(make_penalty("entropy"), NegativeEntropy)
    with pytest.raises(DomainError):
        make_penalty("tv")
    u = GridVector([1.0, 2.0])
    pen = SquaredNorm()
    assert penalty_value(pen, u) == pen(u)
    xi = subgradient(pen, u)
    assert bregman(pen, u, u, xi) == 0.0


def test_bregman_rejects_mismatch():
    pen = PowerNorm(1.5)
    u = GridVector([1.0, 2.0])
    with pytest.raises(DomainError):
        pen.bregman(u, u, SubgradientElement([1.0]))


def test_squared_norm_bregman_with_foreign_subgradient():
    # any xi is accepted; the generic formula applies when xi != 2 u_ref
    pen = SquaredNorm()
    u, v = GridVector([1.0, 0.0]), GridVector([0.0, 0.0])
    xi = SubgradientElement([1.0, 0.0])
    assert pen.bregman(u, v, xi) == pytest.approx(0.0)


vec = arrays(np.float64, 5, elements=st.floats(-50, 50))


@pytest.mark.parametrize("pen", PENALTIES, ids=repr)
@given(a=vec, b=vec)
def test_bregman_nonnegative(pen, a, b):
    u, v = _sample(pen, a), _sample(pen, b)
    xi = pen.subgradient(v)
    scale = 1.0 + abs(pen(u)) + abs(pen(v))
    assert pen.bregman(u, v, xi) >= -1e-12 * scale
    # subgradient inequality, evaluated without the Bregman helper
    assert pen(u) >= pen(v) + xi(u.values - v.values) - 1e-12 * scale
