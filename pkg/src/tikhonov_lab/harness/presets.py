"""Named experiment configurations shipped with the package."""

from dataclasses import replace

from ..analysis.rates import holder_kappa
from ..solver import SolverConfig
from .config import AviSpec, ConfigError, ExperimentConfig, ProblemSpec, TaskSpec


def _holder(mu):
    kappa = holder_kappa(mu)
    return ExperimentConfig(
        name=f"holder-mu-{mu}",
        task="rates",
        problem=ProblemSpec(operator="diagonal", n=200, sigma_exponent=1.0,
                            penalty="squared-norm", similarity="norm", p=2.0,
                            u_true="holder", holder_mu=mu, weight_exponent=0.5),
        task_params=TaskSpec(delta_max=1e-2, delta_min=1e-6, delta_points=8,
                             alpha_rule="apriori", kappa=kappa, target_slope=kappa),
    )


def _build():
    out = {}
    for mu in (0.25, 0.5, 1.0):
        cfg = _holder(mu)
        out[cfg.name] = cfg
    out["exact-penalization"] = ExperimentConfig(
        name="exact-penalization",
        task="rates",
        problem=ProblemSpec(operator="diagonal", n=200, penalty="power-norm",
                            penalty_t=1.05, similarity="norm", p=1.0,
                            u_true="sparse", sparse_support=10),
        task_params=TaskSpec(alpha_rule="fixed", alpha=1e-4, target_slope=1.0),
    )
    out["small-p"] = ExperimentConfig(
        name="small-p",
        task="rates",
        problem=ProblemSpec(operator="diagonal", n=200, penalty="squared-norm",
                            similarity="norm", p=0.5, u_true="holder", holder_mu=1.0),
        task_params=TaskSpec(alpha_rule="apriori", kappa=0.4, target_slope=0.5,
                             one_sided=True),
        solver=SolverConfig(restarts=8),
    )
    out["autoconvolution-degree"] = ExperimentConfig(
        name="autoconvolution-degree",
        task="check-bounds",
        problem=ProblemSpec(operator="autoconvolution", n=64, grid_spacing=1.0 / 64,
                            penalty="squared-norm", similarity="norm", p=2.0,
                            u_true="bump"),
        task_params=TaskSpec(degree_samples=60),
    )
    out["wasserstein-entropy"] = ExperimentConfig(
        name="wasserstein-entropy",
        task="solve",
        problem=ProblemSpec(operator="diagonal", n=64, grid_spacing=1.0 / 64,
                            sigma_exponent=0.0, penalty="negative-entropy",
                            similarity="wasserstein-1d", similarity_q=1.0, p=1.0,
                            u_true="bump", bump_center=0.4, bump_width=0.12),
        task_params=TaskSpec(delta=1e-2, alpha=1e-3),
        solver=SolverConfig(max_iterations=4000),
    )
    out["dtilde-diagonal"] = ExperimentConfig(
        name="dtilde-diagonal",
        task="dtilde",
        problem=ProblemSpec(operator="diagonal", n=200, u_true="holder", holder_mu=0.5),
    )
    out["davi-quadratic"] = ExperimentConfig(
        name="davi-quadratic",
        task="davi",
        problem=ProblemSpec(operator="diagonal", n=200, u_true="holder", holder_mu=0.5),
        avi=AviSpec(beta1=0.0, beta2=1.0, gamma=1.0, kappa=1.0),
    )
    out["phi-choice"] = ExperimentConfig(
        name="phi-choice",
        task="choose-alpha",
        problem=ProblemSpec(operator="diagonal", n=200, u_true="holder", holder_mu=0.25),
        task_params=TaskSpec(delta_max=1e-1, delta_min=1e-3, delta_points=5),
        avi=AviSpec(beta1=0.0, beta2=1.0, gamma=1.0, kappa=1.0),
    )
    return out


PRESETS = _build()


def presets():
    """All shipped configurations, in a stable order."""
    return [PRESETS[k] for k in PRESETS]


def get_preset(name, seed=None, output_dir=None):
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; see list-presets") from None
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    if output_dir is not None:
        cfg = replace(cfg, output_dir=str(output_dir))
    return cfg.validate()
