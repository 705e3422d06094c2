"""Acceptance criteria, one test each.

Every test records a single ``[PASS]``/``[FAIL]`` line; pytest repeats them in
an "acceptance criteria" section of the terminal summary. Running this file as
a script prints the same lines.
"""

import itertools
import time

import numpy as np
import sympy as sp

from helpers import diagonal_problem, report, transport_lp
from tikhonov_lab.analysis import (
    DEFAULT_R_GRID,
    AprioriParameterChoice,
    AviParams,
    FixedParameterChoice,
    PowerLawDistance,
    asc_distance,
    asc_distance_table,
    avi_distance_table,
    choose_alpha_phi,
    empirical_rate,
    fit_rate,
    holder_kappa,
    kappa_upper_bound_check,
    phi,
    predicted_rate,
    preimage_radius,
    vi_to_avi_majorant,
)
from tikhonov_lab.core import (
    MEASURE,
    GridVector,
    LevelSetSpec,
    Problem,
    SubgradientElement,
    as_measure,
    level_set_member,
)
from tikhonov_lab.harness import build_problem, get_preset, run
from tikhonov_lab.harness.config import level_set_spec
from tikhonov_lab.harness.runner import noise_seed
from tikhonov_lab.operators import AutoconvolutionOperator, DiagonalOperator, IntegrationOperator
from tikhonov_lab.penalty import NegativeEntropy, PowerNorm, SquaredNorm
from tikhonov_lab.similarity import (
    NormPowerSimilarity,
    NormSimilarity,
    WassersteinSimilarity,
    wasserstein_1d,
)
from tikhonov_lab.solver import closed_form_linear_l2, minimize_tikhonov


def _rates(cfg, choice, problem=None):
    problem = problem or build_problem(cfg)
    return empirical_rate(problem, choice, cfg.delta_grid(), seed=noise_seed(cfg))


def test_criterion_01_holder_rates():
    parts, ok = [], True
    for mu in (0.25, 0.5, 1.0):
        cfg = get_preset(f"holder-mu-{mu}")
        kappa = holder_kappa(mu)
        start = time.perf_counter()
        fit = _rates(cfg, AprioriParameterChoice(2.0, kappa))
        elapsed = time.perf_counter() - start
        good = fit.within(kappa, 0.1, 0.98) and elapsed <= 60.0
        ok &= good
        parts.append(f"mu={mu} slope={fit.slope:.3f} (target {kappa:.3f}) "
                     f"r2={fit.r_squared:.3f} {elapsed:.1f}s")
    report("1 Hoelder rates, n=200", ok, "; ".join(parts))


def test_criterion_02_exact_penalization():
    cfg = get_preset("exact-penalization")
    base = build_problem(cfg)
    op = base.operator
    # source element eta with F'(u+)* eta equal to the penalty gradient at u+
    grad = base.penalty.subgradient(base.u_true).coefficients
    eta = base.v_exact.with_values(grad / op.sigma)
    xi = op.adjoint_derivative_apply(base.u_true, eta)
    assert np.allclose(xi.values, grad, rtol=1e-14, atol=0.0)
    problem = Problem(op, base.penalty, base.similarity, base.u_true, base.v_exact, base.p,
                      SubgradientElement(xi.values, xi.grid_spacing))
    fit = _rates(cfg, FixedParameterChoice(cfg.task_params.alpha), problem)
    ok = abs(fit.slope - 1.0) <= 0.1
    report("2 exact penalization, p=1", ok,
           f"slope={fit.slope:.3f} (target 1) r2={fit.r_squared:.3f} "
           f"alpha={cfg.task_params.alpha:g} ||eta||={eta.norm():.3g}")


def test_criterion_03_qualification_barrier():
    cfg = get_preset("small-p")
    fit = _rates(cfg, AprioriParameterChoice(cfg.problem.p, cfg.task_params.kappa))
    p = cfg.problem.p
    ok = fit.slope <= p + 0.1
    report("3 qualification barrier, p=0.5 (one-sided)", ok,
           f"slope={fit.slope:.3f} (must be <= {p + 0.1:.2f}) r2={fit.r_squared:.3f}")


def _random_linear_instance(rng):
    n = int(rng.integers(5, 120))
    h = float(rng.choice([1.0, 1.0 / n]))
    if rng.random() < 0.5:
        op = DiagonalOperator(np.sort(rng.uniform(1e-3, 1.0, n))[::-1], h)
    else:
        op = IntegrationOperator(n, h)
    u = GridVector(rng.standard_normal(n), h)
    problem = Problem.build(op, SquaredNorm(), NormSimilarity(), u, 2.0)
    v = problem.v_exact.with_values(problem.v_exact.values + 1e-2 * rng.standard_normal(n))
    return problem, v, float(10.0 ** rng.uniform(-6, 0))


def test_criterion_04_oracle_equivalence():
    worst = 0.0
    for k in range(50):
        problem, v, alpha = _random_linear_instance(np.random.default_rng([2024, k]))
        got = minimize_tikhonov(problem, v, alpha).minimizer.values
        ref = closed_form_linear_l2(problem.operator, v, alpha).values
        worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    report("4 iterative vs closed form, 50 instances", worst <= 1e-8,
           f"max relative error {worst:.2e} (limit 1e-8)")


def test_criterion_05_dtilde_routes():
    rng = np.random.default_rng(5)
    worst, zero_ok, tail_ok = 0.0, True, True
    for _ in range(20):
        n = int(rng.integers(2, 40))
        sigma = np.sort(rng.uniform(1e-3, 1.0, n))[::-1]
        problem = diagonal_problem(sigma, rng.standard_normal(n), float(rng.uniform(0.05, 1)))
        for r in np.logspace(-3, 3, 15):
            vals = [asc_distance(problem, r, route)[0]
                    for route in ("diagonal", "bisection", "grid")]
            worst = max(worst, max(vals) - min(vals))
        zero_ok &= all(asc_distance(problem, 0.0, route)[0] == problem.xi.norm()
                       for route in ("diagonal", "bisection", "grid"))
        radius = preimage_radius(problem)
        tail_ok &= all(asc_distance(problem, radius * f, route)[0] == 0.0
                       for f in (1.0, 1.01, 10.0, 1e3)
                       for route in ("diagonal", "bisection", "grid"))
    ok = worst <= 1e-8 and zero_ok and tail_ok
    report("5 dtilde routes", ok, f"max discrepancy {worst:.1e}, dtilde(0)=||xi|| {zero_ok}, "
                                  f"zero beyond preimage radius {tail_ok}")


def test_criterion_06_avi_soundness(tmp_path):
    cfg = get_preset("davi-quadratic")
    assert np.array_equal(cfg.r_grid(), DEFAULT_R_GRID)
    record = run(cfg, out=tmp_path)
    s = record.summary
    rows = record.tables["davi"]
    ratio = max((r[1] / r[3] for r in rows if r[3] > 0), default=0.0)
    ok = s["nonnegative"] and s["nonincreasing"] and s["bound_holds"]
    report("6 AVI distance soundness", ok,
           f"nonnegative={s['nonnegative']} nonincreasing={s['nonincreasing']} "
           f"d_num <= K*dtilde for r >= {DEFAULT_R_GRID[0]:g}: {s['bound_holds']} "
           f"(K={s['K_alpha_bar']:.3g}, max ratio {ratio:.3f})")


def test_criterion_07_psi_phi_identities():
    # (a) Phi(r)**kappa == d(r) * r**(-gamma) on tables
    problem = build_problem(get_preset("phi-choice"))
    tables = [asc_distance_table(problem), PowerLawDistance(2.0, 0.7, 1.5).table()]
    worst_a = 0.0
    probe = np.logspace(-2, 4, 97)
    for table, kappa, gamma in itertools.product(tables, (0.3, 1.0, 1.7), (0.5, 1.0, 2.0)):
        for r in probe:
            d = table(r)
            if d > 0:
                lhs = phi(r, table, kappa, gamma) ** kappa
                worst_a = max(worst_a, abs(lhs - d * r ** -gamma) / (d * r ** -gamma))
    # (b) Phi(Psi^{-1}(alpha)) == delta after the choice rule
    cfg = get_preset("phi-choice")
    spec = level_set_spec(cfg, problem)
    params = AviParams(0.0, 1.0, 1.0, 1.0, spec)
    d_num = avi_distance_table(problem, params, cfg.r_grid())
    worst_b = 0.0
    for table in (d_num, PowerLawDistance(4.0, 1.0, 1.0)):
        for delta in cfg.delta_grid():
            alpha, r_star = choose_alpha_phi(delta, table, 2.0, 1.0, 1.0)
            worst_b = max(worst_b, abs(phi(r_star, table, 1.0, 1.0) - delta) / delta)
    # (c) power-law majorant: predicted error exponent b*kappa/(b+1)
    worst_c = 0.0
    for beta2, gamma, kappa, mu in ((1.0, 1.0, 0.5, 1.0), (2.0, 0.5, 0.25, 0.75),
                                    (0.5, 2.0, 0.9, 1.0)):
        a, b = vi_to_avi_majorant(beta2, gamma, kappa, mu)
        table = PowerLawDistance(a, b, gamma).table(np.logspace(-8, 12, 401))
        deltas = np.logspace(-2, -6, 9)
        preds = [predicted_rate(d, table, kappa, gamma).value for d in deltas]
        slope = fit_rate(deltas, preds).slope
        k, m = sp.nsimplify(kappa), sp.nsimplify(mu)
        b_sym = k / (m - k)
        exact = float(b_sym * k / (b_sym + 1))
        worst_c = max(worst_c, abs(slope - exact))
    ok = worst_a <= 1e-12 and worst_b <= 1e-8 and worst_c <= 1e-6
    report("7 Psi/Phi identities", ok,
           f"Phi^kappa identity {worst_a:.1e} (1e-12), Phi(Psi^-1(alpha))=delta "
           f"{worst_b:.1e} (1e-8), majorant exponent {worst_c:.1e} (1e-6)")


def test_criterion_08_kappa_bound():
    cfg = get_preset("holder-mu-0.5")
    problem = build_problem(cfg)
    params = AviParams(0.0, 1.0, 1.0, cfg.task_params.kappa, level_set_spec(cfg, problem))
    xi = problem.xi.coefficients
    direction = problem.u_true.with_values(-xi / problem.xi.norm())
    rep = kappa_upper_bound_check(problem, params, direction, q=1.0)
    gap = abs(rep.L_omega - rep.xi_direction)
    ok = rep.xi_direction < 0 and gap <= 1e-6 and rep.kappa_bound == 1.0
    report("8 kappa bound", ok, f"xi(d)={rep.xi_direction:.6g} L_Omega={rep.L_omega:.6g} "
                                f"gap={gap:.1e} reported bound={rep.kappa_bound:g}")


def _measure_pair(x, a, b, h):
    return GridVector(a / h, h, MEASURE), GridVector(b / h, h, MEASURE)


def test_criterion_09_wasserstein_kernel():
    worst = 0.0
    h = 0.5
    x = h * np.arange(4)
    rng = np.random.default_rng(9)
    supports = [s for k in range(1, 5) for s in itertools.combinations(range(4), k)]
    for q in (1.0, 2.0):
        # every pair of supports on four nodes, each with two random mass draws
        for s1, s2 in itertools.product(supports, supports):
            for _ in range(2):
                a, b = np.zeros(4), np.zeros(4)
                a[list(s1)] = rng.random(len(s1)) + 0.05
                b[list(s2)] = rng.random(len(s2)) + 0.05
                a, b = a / a.sum(), b / b.sum()
                mu, nu = _measure_pair(x, a, b, h)
                worst = max(worst, abs(wasserstein_1d(mu, nu, q) - transport_lp(x, a, b, q)))
    exhaustive = worst
    x20 = np.arange(20, dtype=float)
    for q in (1.0, 1.5, 2.0):
        for _ in range(100):
            a, b = np.zeros(20), np.zeros(20)
            a[rng.choice(20, rng.integers(1, 21), replace=False)] = 1.0
            b[rng.choice(20, rng.integers(1, 21), replace=False)] = 1.0
            a *= rng.random(20) + 0.01
            b *= rng.random(20) + 0.01
            a, b = a / a.sum(), b / b.sum()
            mu, nu = _measure_pair(x20, a, b, 1.0)
            worst = max(worst, abs(wasserstein_1d(mu, nu, q) - transport_lp(x20, a, b, q)))
    report("9 Wasserstein kernel vs transport LP", worst <= 1e-8,
           f"supports <= 4 (exhaustive) {exhaustive:.1e}, supports <= 20 {worst:.1e} "
           f"(limit 1e-8)")


def _quasi_triangle(sim, draw, count=10_000):
    worst = -np.inf
    for _ in range(count):
        v1, v2, v3 = draw(), draw(), draw()
        s = sim.s_constant
        lhs = sim(v1, v2)
        rhs = s * sim(v1, v3) + s * sim(v3, v2)
        worst = max(worst, lhs - rhs * (1 + 1e-12) - 1e-12)
    return worst <= 0.0


def _bregman(pen, draw, count=10_000):
    for _ in range(count):
        u, v = draw(), draw()
        xi = pen.subgradient(v)
        slack = 1e-12 * (1.0 + abs(pen(u)) + abs(pen(v)))
        if pen.bregman(u, v, xi) < -slack:
            return False
        if pen(u) < pen(v) + xi(u.values - v.values) - slack:
            return False
    return True


def _adjoint(op, rng, count=1_000):
    worst = 0.0
    for _ in range(count):
        u0, d, w = (op.apply(GridVector(np.zeros(op.n), op.h)).with_values(
            rng.standard_normal(op.n) * 10 ** rng.uniform(-3, 3)) for _ in range(3))
        jd = op.derivative_apply(u0, d)
        jtw = op.adjoint_derivative_apply(u0, w)
        scale = jd.norm() * w.norm() + d.norm() * jtw.norm()
        worst = max(worst, abs(jd.inner(w) - d.inner(jtw)) / scale)
    return worst


def _nesting(rng, count=1_000):
    problem = diagonal_problem(1.0 / np.arange(1, 11), np.linspace(1.0, 0.1, 10))
    for _ in range(count):
        u = problem.u_true.with_values(problem.u_true.values
                                       + rng.standard_normal(10) * 10 ** rng.uniform(-2, 1))
        a1, a2 = np.sort(10 ** rng.uniform(-3, 1, 2))
        c1, c2 = np.sort(10 ** rng.uniform(-2, 2, 2))
        # M_alpha(c) shrinks as alpha grows and grows with c
        if level_set_member(problem, LevelSetSpec(a2, c1 / a2), u) and \
                not level_set_member(problem, LevelSetSpec(a1, c1 / a1), u):
            return False
        if level_set_member(problem, LevelSetSpec(a1, c1 / a1), u) and \
                not level_set_member(problem, LevelSetSpec(a1, c2 / a1), u):
            return False
    return True


def test_criterion_10_property_suites():
    rng = np.random.default_rng(10)
    h = 0.1
    vec = lambda: GridVector(rng.standard_normal(8) * 10 ** rng.uniform(-3, 3), h)
    meas = lambda: as_measure(rng.random(8) * (rng.random(8) < 0.7) + 1e-3, h)
    sims = {"norm": (NormSimilarity(), vec), "norm-power q=2": (NormPowerSimilarity(2.0), vec),
            "norm-power q=3": (NormPowerSimilarity(3.0), vec),
            "W1": (WassersteinSimilarity(1.0), meas), "W2": (WassersteinSimilarity(2.0), meas)}
    sim_ok = {k: _quasi_triangle(s, draw) for k, (s, draw) in sims.items()}
    pos = lambda: GridVector(rng.random(8) * 10 ** rng.uniform(-2, 2) + 1e-6, h)
    pens = {"squared": (SquaredNorm(), vec), "power t=1.05": (PowerNorm(1.05), vec),
            "power t=1.5": (PowerNorm(1.5), vec), "entropy": (NegativeEntropy(), pos)}
    pen_ok = {k: _bregman(p, draw) for k, (p, draw) in pens.items()}
    ops = {"diagonal": DiagonalOperator.power_law(8, 1.0, h),
           "integration": IntegrationOperator(8, h), "autoconvolution": AutoconvolutionOperator(8, h)}
    adj = {k: _adjoint(op, rng) for k, op in ops.items()}
    nest_ok = _nesting(rng)
    ok = all(sim_ok.values()) and all(pen_ok.values()) and max(adj.values()) <= 1e-12 and nest_ok
    report("10 property suites", ok,
           f"quasi-triangle {sum(sim_ok.values())}/{len(sim_ok)} kinds x 1e4, "
           f"Bregman {sum(pen_ok.values())}/{len(pen_ok)} kinds x 1e4, "
           f"adjoint max rel {max(adj.values()):.1e} over 3 kinds x 1e3, nesting {nest_ok}")


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    for name, fun in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                if "tmp_path" in fun.__code__.co_varnames[:fun.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as tmp:
                        fun(Path(tmp))
                else:
                    fun()
            except AssertionError:
                pass
