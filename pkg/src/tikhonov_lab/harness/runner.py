"""Execution of experiment tasks and persistence of their results.

Every run writes into its own directory:

``record.json``
    Configuration echo and hash, per-point rows, summary and timings.
``config.ini``
    Canonical configuration text; ``tikhonov-lab run config.ini`` repeats the run.
``<table>.csv``
    ``# schema=<table> v1`` comment line, header row, floats with 17
    significant digits. No timing information, so reruns are byte-identical.
``<curve>.dat``
    Two whitespace-separated columns ``x y`` per curve, for plotting.
"""

import csv
import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .._validation import DomainError, NumericalFailure
from ..analysis import (
    AprioriParameterChoice,
    AviParams,
    FixedParameterChoice,
    PhiParameterChoice,
    asc_distance,
    asc_distance_table,
    avi_distance_table,
    choose_alpha_phi,
    concentration_trend,
    empirical_rate,
    kappa_upper_bound_check,
    level_set_radius,
    phi,
    predicted_rate,
    preimage_radius,
    rates_lemma_bound,
)
from ..core import level_set_member
from ..operators import fit_nonlinearity_degree, taylor_quantities
from ..solver import apriori_validity, make_noisy_data, minimize_tikhonov
from .config import ConfigError, build_problem, level_set_spec

OUTPUT_ROOT_ENV = "TIKLAB_OUTPUT_ROOT"
SCHEMA_VERSION = 1

# stable column sets per table; changing one requires bumping SCHEMA_VERSION
COLUMNS = {
    "solution": ("index", "x", "u_true", "u_alpha", "v_data"),
    "dtilde": ("r", "dtilde"),
    "davi": ("r", "d_num", "dtilde", "K_times_dtilde", "residual_at_maximizer"),
    "rates": ("delta", "alpha", "bregman_error", "objective", "converged"),
    "choose_alpha": ("delta", "alpha", "r_star", "phi_identity_residual",
                     "predicted_error", "bregman_error"),
    "lemma_bound": ("r", "delta", "alpha", "bregman_error", "bound", "holds"),
    "degree": ("remainder", "residual", "bregman", "bound", "holds", "held_out"),
}


@dataclass
class ResultRecord:
    config_hash: str
    tables: dict
    summary: dict
    curves: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)
    output_dir: str = ""

    @property
    def passed(self):
        return bool(self.summary.get("pass", True))


def default_output_root():
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "results"))


def noise_seed(cfg):
    """Seed of the noise direction: ``seed * 1000003 + noise_seed``."""
    return int(cfg.seed) * 1_000_003 + int(cfg.task_params.noise_seed)


def _solver_cfg(cfg):
    return replace(cfg.solver, seed=int(cfg.seed))


def _avi_params(cfg, problem):
    av = cfg.avi
    spec = level_set_spec(cfg, problem)
    try:
        return AviParams(av.beta1, av.beta2, av.gamma, av.kappa, spec)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _avi_table(cfg, problem, params):
    return avi_distance_table(problem, params, cfg.r_grid(), _solver_cfg(cfg),
                              n_random=cfg.avi.n_random, max_iter=cfg.avi.max_iter,
                              seed=cfg.seed)


# ---------------------------------------------------------------------------
# tasks

def _task_solve(cfg, problem):
    tk = cfg.task_params
    v = make_noisy_data(problem.v_exact, tk.delta, noise_seed(cfg), problem.similarity)
    res = minimize_tikhonov(problem, v, tk.alpha, _solver_cfg(cfg))
    u = res.minimizer
    x = u.points
    rows = [(i, x[i], problem.u_true.values[i], u.values[i], v.values[i])
            for i in range(u.size)]
    spec = level_set_spec(cfg, problem)
    summary = {
        "objective": res.objective,
        "bregman_error": problem.bregman(u),
        "data_misfit": problem.similarity.value(problem.operator.apply(u), v),
        "converged": res.converged,
        "iterations": res.iterations,
        "restart_index": res.restart_index,
        "comparison_bound": tk.delta ** problem.p
        + tk.alpha * problem.omega_true,
        "apriori_valid": apriori_validity(tk.delta, tk.alpha, spec, problem),
        "in_level_set": level_set_member(problem, spec, u),
    }
    summary["pass"] = bool(summary["objective"] <= summary["comparison_bound"]
                           * (1 + 1e-9))
    curves = {"solution": (x, u.values), "u_true": (x, problem.u_true.values)}
    return {"solution": rows}, summary, curves


def _task_dtilde(cfg, problem):
    table = asc_distance_table(problem, cfg.r_grid())
    r0 = asc_distance(problem, 0.0)[0]
    vals = table.values
    summary = {
        "dtilde_at_zero": r0,
        "xi_norm": problem.xi.norm(),
        "preimage_radius": preimage_radius(problem),
        "nonincreasing": bool(np.all(np.diff(vals) <= 0)),
    }
    summary["pass"] = summary["nonincreasing"] and r0 == summary["xi_norm"]
    return {"dtilde": table.rows()}, summary, {"dtilde": (table.r, vals)}


def _task_davi(cfg, problem):
    params = _avi_params(cfg, problem)
    table = _avi_table(cfg, problem, params)
    dt = asc_distance_table(problem, cfg.r_grid())
    k_bar = level_set_radius(problem, params.spec, seed=cfg.seed,
                             extra_points=table.diagnostics["candidates"])
    conc = concentration_trend(problem, table)
    bound = k_bar * dt.values
    rows = list(zip(table.r, table.values, dt.values, bound, conc))
    linear_lemma = (problem.operator.linear and params.beta1 == 0.0
                    and params.gamma == 1.0 and params.kappa == 1.0)
    summary = {
        "nonnegative": bool(np.all(table.values >= 0)),
        "nonincreasing": bool(np.all(np.diff(table.values) <= 0)),
        "K_alpha_bar": k_bar,
        "bound_checked": linear_lemma,
        "bound_holds": bool(np.all(table.values <= bound * (1 + 1e-9) + 1e-14))
        if linear_lemma else None,
        "candidates_feasible": table.diagnostics["feasible"],
    }
    summary["pass"] = summary["nonnegative"] and summary["nonincreasing"] and \
        summary["bound_holds"] is not False
    curves = {"davi": (table.r, table.values), "dtilde": (dt.r, dt.values)}
    return {"davi": rows}, summary, curves


def _choice(cfg, problem):
    tk = cfg.task_params
    if tk.alpha_rule == "apriori":
        return AprioriParameterChoice(problem.p, tk.kappa, tk.alpha_c)
    if tk.alpha_rule == "fixed":
        return FixedParameterChoice(tk.alpha)
    params = _avi_params(cfg, problem)
    table = _avi_table(cfg, problem, params)
    return PhiParameterChoice(table, problem.p, params.kappa, params.gamma)


def _task_rates(cfg, problem):
    tk = cfg.task_params
    fit = empirical_rate(problem, _choice(cfg, problem), cfg.delta_grid(),
                         _solver_cfg(cfg), seed=noise_seed(cfg))
    rows = [(r["delta"], r["alpha"], r["bregman_error"], r["objective"], r["converged"])
            for r in fit.rows]
    summary = {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "target_slope": tk.target_slope,
        "one_sided": tk.one_sided,
        "failures": fit.failures,
    }
    if np.isfinite(tk.target_slope):
        if tk.one_sided:
            summary["pass"] = bool(fit.slope <= tk.target_slope + tk.slope_tolerance)
        else:
            summary["pass"] = fit.within(tk.target_slope, tk.slope_tolerance,
                                         tk.min_r_squared)
    d = np.array([r[0] for r in rows])
    e = np.array([r[2] for r in rows])
    return {"rates": rows}, summary, {"rates": (d, e)}


def _task_choose_alpha(cfg, problem):
    params = _avi_params(cfg, problem)
    params.check_rate_exponent(problem.p)
    table = _avi_table(cfg, problem, params)
    rows, failures = [], []
    for delta in cfg.delta_grid():
        try:
            alpha, r_star = choose_alpha_phi(delta, table, problem.p, params.kappa,
                                             params.gamma)
            pred = predicted_rate(delta, table, params.kappa, params.gamma)
        except DomainError as exc:
            failures.append((float(delta), str(exc)))
            continue
        resid = abs(phi(r_star, table, params.kappa, params.gamma) / delta - 1.0)
        v = make_noisy_data(problem.v_exact, delta, noise_seed(cfg), problem.similarity)
        res = minimize_tikhonov(problem, v, alpha, _solver_cfg(cfg))
        rows.append((delta, alpha, r_star, resid, pred.value, problem.bregman(res.minimizer)))
    if not rows:
        raise NumericalFailure("no noise level could be matched to the distance table")
    summary = {
        "max_phi_identity_residual": max(r[3] for r in rows),
        "failures": failures,
        "table_strictly_decreasing": table.is_strictly_decreasing(),
    }
    summary["pass"] = summary["max_phi_identity_residual"] <= 1e-8
    d = np.array([r[0] for r in rows])
    return {"choose_alpha": rows}, summary, {
        "alpha": (d, np.array([r[1] for r in rows])),
        "predicted": (d, np.array([r[4] for r in rows])),
        "measured": (d, np.array([r[5] for r in rows])),
    }


def _sample_level_set(problem, spec, count, rng, scale):
    h = problem.grid_spacing
    out = []
    tries = 0
    while len(out) < count and tries < 100 * count:
        tries += 1
        d = rng.standard_normal(problem.u_true.size)
        d /= np.sqrt(h * np.dot(d, d))
        t = scale * 10.0 ** rng.uniform(-3, 0)
        u = problem.u_true.with_values(problem.u_true.values + t * d)
        if level_set_member(problem, spec, u):
            out.append(u)
    return out


def _task_check_bounds(cfg, problem):
    tk = cfg.task_params
    spec = level_set_spec(cfg, problem)
    tables, summary, curves = {}, {}, {}
    ok = True
    if problem.operator.linear:
        params = _avi_params(cfg, problem)
        direction = problem.xi.as_vector().with_values(-problem.xi.coefficients)
        direction = direction.with_values(direction.values / max(direction.norm(), 1e-300))
        rep = kappa_upper_bound_check(problem, params, direction, tk.q_bound)
        summary.update({"xi_direction": rep.xi_direction, "L_omega": rep.L_omega,
                        "L_similarity": rep.L_similarity, "kappa_bound": rep.kappa_bound,
                        "derivative_matches": rep.derivative_matches,
                        "kappa_violates_bound": rep.violates})
        ok &= rep.derivative_matches and not rep.violates
        if params.kappa < problem.p:
            table = _avi_table(cfg, problem, params)
            rows = []
            for delta in cfg.delta_grid()[:4]:
                alpha = tk.alpha_c * delta ** (problem.p - params.kappa)
                v = make_noisy_data(problem.v_exact, delta, noise_seed(cfg),
                                    problem.similarity)
                res = minimize_tikhonov(problem, v, alpha, _solver_cfg(cfg))
                err = problem.bregman(res.minimizer)
                for r, dval in zip(table.r[::8], table.values[::8]):
                    b = rates_lemma_bound(problem, params, r, delta, alpha, dval)
                    rows.append((r, delta, alpha, err, b, bool(err <= b)))
            tables["lemma_bound"] = rows
            summary["lemma_bound_holds"] = all(r[5] for r in rows)
            ok &= summary["lemma_bound_holds"]
    else:
        rng = np.random.default_rng(cfg.seed)
        scale = np.sqrt(spec.rho * spec.alpha_bar)
        pts = _sample_level_set(problem, spec, 2 * tk.degree_samples, rng, scale)
        fit_pts, held = pts[::2], pts[1::2]
        fit = fit_nonlinearity_degree(problem, fit_pts)
        rows = []
        for flag, group in ((0, fit_pts), (1, held)):
            for u in group:
                rem, res, breg = taylor_quantities(problem, u)
                if min(rem, res, breg) <= 0:
                    continue
                b = fit.bound(res, breg)
                rows.append((rem, res, breg, b, bool(rem <= 1.05 * b), flag))
        tables["degree"] = rows
        summary.update({"c1": fit.c1, "c2": fit.c2, "K": fit.K,
                        "fit_residual": fit.residual,
                        "holds_on_fit": all(r[4] for r in rows if r[5] == 0),
                        "holds_on_held_out": all(r[4] for r in rows if r[5] == 1)})
        ok &= summary["holds_on_fit"]
    summary["pass"] = bool(ok)
    return tables, summary, curves


TASK_RUNNERS = {
    "solve": _task_solve,
    "dtilde": _task_dtilde,
    "davi": _task_davi,
    "rates": _task_rates,
    "choose-alpha": _task_choose_alpha,
    "check-bounds": _task_check_bounds,
}


# ---------------------------------------------------------------------------
# persistence

def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def write_csv(path, name, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema={name} v{SCHEMA_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS[name])
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_curve(path, x, y):
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in zip(np.asarray(x, float), np.asarray(y, float)):
            fh.write("%.17g %.17g\n" % (a, b))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def resolve_output_dir(cfg, out=None):
    if out:
        return Path(out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return default_output_root() / cfg.name


def run(cfg, out=None):
    """Execute ``cfg`` and write its files; returns a :class:`ResultRecord`.

    Raises :class:`ConfigError` for invalid configurations and
    :class:`NumericalFailure` when the computation cannot produce results.
    """
    cfg.validate()
    started = time.time()
    problem = build_problem(cfg)
    try:
        tables, summary, curves = TASK_RUNNERS[cfg.task](cfg, problem)
    except ConfigError:
        raise
    except (DomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise NumericalFailure(f"{cfg.task} failed: {exc}") from exc
    finished = time.time()
    target = resolve_output_dir(cfg, out)
    target.mkdir(parents=True, exist_ok=True)
    for name, rows in tables.items():
        write_csv(target / f"{name}.csv", name, rows)
    for name, (x, y) in curves.items():
        write_curve(target / f"{name}.dat", x, y)
    (target / "config.ini").write_text(cfg.to_ini(), encoding="utf-8")
    record = ResultRecord(cfg.config_hash(), tables, summary, curves,
                          {"started": started, "finished": finished,
                           "elapsed_seconds": finished - started}, str(target))
    payload = {
        "config_hash": record.config_hash,
        "config": cfg.as_dict(),
        "task": cfg.task,
        "summary": summary,
        "tables": {k: {"columns": COLUMNS[k], "rows": v} for k, v in tables.items()},
        "timestamps": record.timestamps,
    }
    with open(target / "record.json", "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return record
