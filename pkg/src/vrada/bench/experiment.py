"""Experiment runner: build the objective, tune, run every (solver, seed) cell, write CSV."""
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .. import baselines, vrada_solver
from ..core_model import make_objective
from ..data_io import add_bias, normalize_rows, parse_libsvm, synth_a9a_like, synth_ridge
from ..errors import AuditError, ConfigError
from ..trace import write_csv
from .reference import Reference, reference_for
from .tuning import tune_L

SOLVERS = ("vrada",) + baselines.ALGORITHMS
GAP_FLOOR = 1e-12


@dataclass
class ExperimentConfig:
    dataset: str = None
    synthetic: str = None  # "n,d,sigma" ridge instance, or "a9a-like,n[,seed]"
    loss: str = "binary"
    classes: int = None
    lambda2: float = 0.0
    lambda1: float = 0.0
    solvers: list = field(default_factory=lambda: ["vrada"])
    m: int = None
    L_param: float = None
    L_grid: list = None
    tune_criterion: str = "final_objective"
    tune_target: float = None
    epochs: int = 20
    seeds: list = field(default_factory=lambda: [0])
    deterministic: bool = False
    audit: bool = False
    reference: str = None
    compute_reference: bool = False
    out: str = None
    add_bias: bool = False
    normalize: bool = True
    dim: int = None
    timing: bool = True
    gap_target: float = None

    def validate(self):
        if (self.dataset is None) == (self.synthetic is None):
            raise ConfigError("exactly one of dataset and synthetic is required")
        if self.m is not None and self.m < 1:
            raise ConfigError("m must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.L_grid is not None and (not self.L_grid or any(not v > 0 for v in self.L_grid)):
            raise ConfigError("L grid values must be positive")
        if self.L_param is not None and not self.L_param > 0:
            raise ConfigError("L_param must be positive")
        if self.lambda2 < 0 or self.lambda1 < 0:
            raise ConfigError("regularization weights must be nonnegative")
        for s in self.solvers:
            if s not in SOLVERS:
                raise ConfigError(f"unknown solver {s!r}; expected one of {', '.join(SOLVERS)}")
            if s.endswith("-sc") and not self.lambda2 > 0:
                raise ConfigError(f"{s} needs lambda2 > 0 (sigma = lambda2)")
            if s.endswith("-nsc") and self.lambda2 != 0:
                raise ConfigError(f"{s} needs lambda2 = 0")
        return self

    def echo(self):
        keys = ("dataset", "synthetic", "loss", "classes", "lambda2", "lambda1", "solvers", "m",
                "L_param", "L_grid", "tune_criterion", "tune_target", "epochs", "seeds",
                "deterministic", "audit", "reference", "add_bias", "normalize", "dim",
                "gap_target")
        out = {}
        for k in keys:
            v = getattr(self, k)
            if isinstance(v, list):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            out[f"config.{k}"] = "" if v is None else v
        return out


@dataclass
class Problem:
    obj: object
    header: dict
    reference: Reference = None


def _parse_synthetic(spec):
    parts = [p.strip() for p in spec.split(",")]
    if parts[0] == "a9a-like":
        if len(parts) not in (2, 3):
            raise ConfigError("synthetic a9a-like spec is 'a9a-like,n[,seed]'")
        return "a9a-like", int(parts[1]), int(parts[2]) if len(parts) == 3 else 0
    if len(parts) not in (3, 4):
        raise ConfigError("synthetic ridge spec is 'n,d,sigma[,seed]'")
    n, d, sigma = int(parts[0]), int(parts[1]), float(parts[2])
    return "ridge", (n, d, sigma), int(parts[3]) if len(parts) == 4 else 0


def build_problem(cfg):
    """Objective, header fields and (when available) the reference solution."""
    header = {}
    exact = None
    if cfg.synthetic is not None:
        kind, args, seed = _parse_synthetic(cfg.synthetic)
        if kind == "ridge":
            n, d, sigma = args
            if cfg.loss != "squared" or cfg.lambda2 != sigma or cfg.lambda1 != 0:
                raise ConfigError("synthetic ridge instances need loss=squared, "
                                  "lambda2=sigma and lambda1=0")
            obj, x_star, f_star = synth_ridge(n, d, sigma, seed=seed)
            exact = Reference(x_star, f_star, "closed-form")
            ds = None
        else:
            ds = synth_a9a_like(args, seed=seed)
    else:
        ds = parse_libsvm(cfg.dataset, dim=cfg.dim)
    if ds is not None:
        if cfg.normalize:
            ds = normalize_rows(ds)
            header["zero_rows"] = ds.zero_rows
        if cfg.add_bias:
            ds = add_bias(ds)
        header["label_map"] = ";".join(f"{k!r}->{v}" for k, v in ds.label_map.items())
        obj = make_objective(ds, cfg.loss, lambda2=cfg.lambda2, lambda1=cfg.lambda1,
                             classes=cfg.classes)
    header.update(n=obj.n, dim=obj.dim, L=repr(obj.constants.L),
                  sigma=repr(obj.constants.sigma), bias=cfg.add_bias, normalized=cfg.normalize)
    ref = exact
    if exact is None and (cfg.reference is not None or cfg.compute_reference):
        ref, cached = reference_for(obj, cfg.reference, compute=cfg.compute_reference or
                                    cfg.reference is None)
        header["reference_source"] = "file" if cached else "computed"
    elif exact is not None:
        header["reference_source"] = "closed-form"
    if ref is not None:
        header["f_star"] = repr(float(ref.f))
        header["reference_status"] = ref.status
    return Problem(obj, header, ref)


def run_cell(problem, cfg, solver, L_param, seed, epochs=None):
    """One solver run; ``L_param=None`` uses the smoothness bound of the objective."""
    obj, ref = problem.obj, problem.reference
    epochs = cfg.epochs if epochs is None else epochs
    f_star = None if ref is None else ref.f
    if solver == "vrada":
        x_star = None if ref is None or ref.is_infimum_estimate else ref.x
        return vrada_solver.run(obj, vrada_solver.VradaConfig(
            m=cfg.m, epochs=epochs, seed=seed, deterministic=cfg.deterministic, audit=cfg.audit,
            L=L_param, f_star=f_star, x_star=x_star if cfg.deterministic else None,
            gap_target=cfg.gap_target))
    if cfg.deterministic:
        raise ConfigError("deterministic mode is only available for vrada")
    return baselines.run_baseline(obj, baselines.BaselineConfig(
        algorithm=solver, L_param=L_param, m=cfg.m, seed=seed, epochs=epochs, f_star=f_star,
        gap_target=cfg.gap_target))


def worker_count(cells):
    env = os.environ.get("VRADA_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, cells))


@dataclass
class ExperimentResult:
    traces: list
    header: dict
    tuning: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def exit_code(self):
        return 1 if self.failures else 0


def _guarded(fn, label, failures):
    try:
        return fn()
    except AuditError as exc:
        failures.append(f"{label}: {exc}")
        return None


def run_experiment(cfg, stream=None):
    """Run every (solver, seed) cell; write the CSV to ``stream`` or ``cfg.out``."""
    cfg.validate()
    problem = build_problem(cfg)
    header = {**cfg.echo(), **problem.header}
    failures = []
    tuned, tuning = {}, {}
    for solver in cfg.solvers:
        if cfg.L_grid is not None and cfg.L_param is None:
            target = cfg.tune_target if cfg.tune_criterion == "passes" else None
            if target is not None and problem.reference is None:
                raise ConfigError("tuning by passes needs a reference solution")
            res = tune_L(lambda L, s=solver: run_cell(problem, cfg, s, L, 0),
                         cfg.L_grid, cfg.tune_criterion, target)
            tuned[solver], tuning[solver] = res.best, res
            for k, v in res.header().items():
                header[f"{solver}.tune.{k}"] = v
            header[f"{solver}.tune.best"] = repr(res.best)
        else:
            tuned[solver] = cfg.L_param
    cells = [(s, seed) for s in cfg.solvers for seed in cfg.seeds]

    def one(cell):
        s, seed = cell
        return _guarded(lambda: run_cell(problem, cfg, s, tuned[s], seed), f"{s}[{seed}]",
                        failures)

    with ThreadPoolExecutor(max_workers=worker_count(len(cells))) as pool:
        traces = list(pool.map(one, cells))
    for (s, seed), tr in zip(cells, traces):
        if tr is None:
            header[f"{s}[{seed}].status"] = "audit_failed"
    traces = [t for t in traces if t is not None]
    if problem.reference is not None:
        floor = -GAP_FLOOR * max(1.0, abs(problem.reference.f))
        low = min((g for t in traces for g in t.gaps if g is not None), default=0.0)
        header["min_gap"] = repr(low)
        if low < floor and not problem.reference.is_infimum_estimate:
            warnings.warn(f"gap {low!r} below {floor!r}: reference not accurate enough",
                          stacklevel=2)
    result = ExperimentResult(traces, header, tuning, failures)
    if stream is not None:
        write_csv(traces, stream, header, timing=cfg.timing)
    elif cfg.out is not None:
        with open(cfg.out, "w", newline="") as fh:
            write_csv(traces, fh, header, timing=cfg.timing)
    return result


def describe_error(cfg, exc):
    """Error message carrying the offending configuration echo."""
    echo = " ".join(f"{k.split('.', 1)[1]}={v}" for k, v in cfg.echo().items() if v != "")
    return f"{type(exc).__name__}: {exc} [config: {echo}]"

