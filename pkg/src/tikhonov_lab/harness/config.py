"""Experiment configuration files (INI format) and problem construction.

A configuration has the sections ``[experiment]``, ``[problem]``, ``[task]``,
``[avi]`` and ``[solver]``; see the README for the full key list. Unknown keys
are rejected so that typos surface as configuration errors.
"""

import configparser
import hashlib
import io
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .._validation import DomainError
from ..core import MEASURE, GridVector, LevelSetSpec, Problem, as_measure
from ..operators import make_operator
from ..penalty import make_penalty
from ..similarity import make_similarity
from ..solver import INITIAL_POLICIES, SolverConfig

TASKS = ("solve", "dtilde", "davi", "rates", "choose-alpha", "check-bounds")
OPERATORS = ("diagonal", "integration", "autoconvolution")
PENALTIES = ("squared-norm", "power-norm", "negative-entropy")
SIMILARITIES = ("norm", "norm-power", "wasserstein-1d")
U_TRUE_RECIPES = ("holder", "sparse", "bump", "random")
ALPHA_RULES = ("apriori", "fixed", "phi")


class ConfigError(DomainError):
    """The experiment configuration is invalid."""


@dataclass(frozen=True)
class ProblemSpec:
    operator: str = "diagonal"
    n: int = 200
    grid_spacing: float = 1.0
    sigma_exponent: float = 1.0
    penalty: str = "squared-norm"
    penalty_t: float = 1.5
    similarity: str = "norm"
    similarity_q: float = 1.0
    p: float = 2.0
    u_true: str = "holder"
    holder_mu: float = 0.5
    weight_exponent: float = 0.5
    sparse_support: int = 10
    bump_center: float = 0.5
    bump_width: float = 0.1
    u_seed: int = 0


@dataclass(frozen=True)
class TaskSpec:
    delta_max: float = 1e-2
    delta_min: float = 1e-6
    delta_points: int = 8
    delta: float = 1e-3
    alpha: float = 1e-3
    alpha_rule: str = "apriori"
    alpha_c: float = 1.0
    kappa: float = 1.0
    target_slope: float = float("nan")
    one_sided: bool = False
    slope_tolerance: float = 0.1
    min_r_squared: float = 0.98
    r_min: float = 1e-2
    r_max: float = 1e4
    r_points: int = 40
    noise_seed: int = 7
    q_bound: float = 1.0
    degree_samples: int = 60


@dataclass(frozen=True)
class AviSpec:
    beta1: float = 0.0
    beta2: float = 1.0
    gamma: float = 1.0
    kappa: float = 1.0
    alpha_bar: float = 1.0
    rho_margin: float = 1.1
    n_random: int = 4
    max_iter: int = 400


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    task: str
    seed: int = 0
    output_dir: str = ""
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    task_params: TaskSpec = field(default_factory=TaskSpec)
    avi: AviSpec = field(default_factory=AviSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def validate(self):
        pr = self.problem
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {TASKS}")
        for value, allowed, what in ((pr.operator, OPERATORS, "operator"),
                                     (pr.penalty, PENALTIES, "penalty"),
                                     (pr.similarity, SIMILARITIES, "similarity"),
                                     (pr.u_true, U_TRUE_RECIPES, "u_true recipe"),
                                     (self.task_params.alpha_rule, ALPHA_RULES,
                                      "alpha_rule")):
            if value not in allowed:
                raise ConfigError(f"unknown {what} {value!r}; choose from {allowed}")
        if pr.n < 2:
            raise ConfigError("n must be at least 2")
        if not pr.grid_spacing > 0 or not pr.p > 0:
            raise ConfigError("grid_spacing and p must be positive")
        tk = self.task_params
        if not 0 < tk.delta_min < tk.delta_max:
            raise ConfigError("need 0 < delta_min < delta_max")
        if tk.delta_points < 2 or tk.r_points < 2:
            raise ConfigError("grids need at least two points")
        if not 0 < tk.r_min < tk.r_max:
            raise ConfigError("need 0 < r_min < r_max")
        return self

    def delta_grid(self):
        tk = self.task_params
        return np.logspace(np.log10(tk.delta_max), np.log10(tk.delta_min), tk.delta_points)

    def r_grid(self):
        tk = self.task_params
        return np.logspace(np.log10(tk.r_min), np.log10(tk.r_max), tk.r_points)

    def to_ini(self):
        """Canonical INI text; reading it back reproduces the text and the hash."""
        cp = configparser.ConfigParser(interpolation=None)
        cp["experiment"] = {"name": self.name, "task": self.task, "seed": str(self.seed)}
        if self.output_dir:
            cp["experiment"]["output_dir"] = self.output_dir
        for section, obj in (("problem", self.problem), ("task", self.task_params),
                             ("avi", self.avi), ("solver", self.solver)):
            cp[section] = {f.name: _fmt(getattr(obj, f.name)) for f in fields(obj)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def config_hash(self):
        return hashlib.sha256(self.to_ini().encode()).hexdigest()

    def as_dict(self):
        return asdict(self)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(cls, section, cp):
    if not cp.has_section(section):
        return cls()
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, raw in cp.items(section):
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        default = getattr(cls(), key)
        try:
            if isinstance(default, bool):
                kwargs[key] = cp.getboolean(section, key)
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            elif isinstance(default, float):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = raw.strip()
        except ValueError as exc:
            raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
    try:
        return cls(**kwargs)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text):
    """Parse INI text into a validated :class:`ExperimentConfig`."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    allowed = {"experiment", "problem", "task", "avi", "solver"}
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    exp = cp["experiment"]
    unknown = set(exp) - {"name", "task", "seed", "output_dir"}
    if unknown:
        raise ConfigError(f"unknown keys in [experiment]: {sorted(unknown)}")
    if "task" not in exp:
        raise ConfigError("[experiment] needs a task")
    try:
        seed = int(exp.get("seed", "0"))
    except ValueError as exc:
        raise ConfigError("seed must be an integer") from exc
    cfg = ExperimentConfig(
        name=exp.get("name", "experiment").strip(),
        task=exp["task"].strip(),
        seed=seed,
        output_dir=exp.get("output_dir", "").strip(),
        problem=_coerce(ProblemSpec, "problem", cp),
        task_params=_coerce(TaskSpec, "task", cp),
        avi=_coerce(AviSpec, "avi", cp),
        solver=_coerce(SolverConfig, "solver", cp),
    )
    if cfg.solver.initial_policy not in INITIAL_POLICIES:
        raise ConfigError(f"unknown initial policy {cfg.solver.initial_policy!r}")
    return cfg.validate()


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path!r}: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------------------
# problem construction

def _u_true_values(spec, op):
    n = spec.n
    k = np.arange(1, n + 1, dtype=float)
    x = spec.grid_spacing * np.arange(n)
    if spec.u_true == "holder":
        sigma = getattr(op, "sigma", None)
        if sigma is None:
            raise ConfigError("the holder recipe needs a diagonal operator")
        return sigma ** spec.holder_mu * k ** (-spec.weight_exponent)
    if spec.u_true == "sparse":
        u = np.zeros(n)
        m = min(spec.sparse_support, n)
        u[:m] = 1.0 / k[:m]
        return u
    if spec.u_true == "bump":
        return np.exp(-0.5 * ((x - spec.bump_center) / spec.bump_width) ** 2) + 0.05
    rng = np.random.default_rng(spec.u_seed)
    return rng.standard_normal(n)


def build_problem(cfg):
    """Construct the :class:`~tikhonov_lab.core.Problem` described by ``cfg``."""
    spec = cfg.problem
    try:
        op = make_operator(spec.operator, spec.n, spec.grid_spacing, spec.sigma_exponent)
        pen = make_penalty(spec.penalty, spec.penalty_t)
        sim = make_similarity(spec.similarity, spec.similarity_q)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    values = _u_true_values(spec, op)
    measure = spec.similarity == "wasserstein-1d"
    if measure:
        u = as_measure(values, spec.grid_spacing)
        if spec.operator != "diagonal" or np.any(op.sigma != 1.0):
            raise ConfigError("Wasserstein problems need the identity operator "
                              "(diagonal with sigma_exponent = 0)")
    else:
        u = GridVector(values, spec.grid_spacing)
    return Problem.build(op, pen, sim, u, spec.p, v_kind=MEASURE if measure else None,
                         name=cfg.name)


def level_set_spec(cfg, problem):
    av = cfg.avi
    try:
        return LevelSetSpec.default_for(problem, av.alpha_bar, av.rho_margin)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
