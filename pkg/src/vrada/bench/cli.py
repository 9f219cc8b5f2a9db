"""``vrada-bench`` command line entry point.

A ``--config`` file holds ``key = value`` lines named like the long flags
(``L-grid = 0.05,0.1``, ``deterministic = true``); flags given on the command
line override file keys.
"""
import argparse
import sys

from ..errors import VradaError
from .experiment import ExperimentConfig, run_experiment, describe_error
from .tuning import DEFAULT_GRID

_BOOL_FLAGS = ("deterministic", "audit", "compute-reference", "add-bias", "no-timing",
               "no-normalize")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _grid(text):
    return list(DEFAULT_GRID) if text.strip() == "default" else _floats(text)


def build_parser():
    p = argparse.ArgumentParser(prog="vrada-bench", description=(
        "Run VRADA and variance-reduced baselines on a LibSVM or synthetic problem "
        "and write per-epoch traces as CSV."))
    src = p.add_argument_group("problem")
    src.add_argument("--dataset", help="LibSVM file (.gz allowed)")
    src.add_argument("--synthetic", help="'n,d,sigma[,seed]' ridge instance or 'a9a-like,n[,seed]'")
    src.add_argument("--loss", choices=("binary", "multinomial", "squared"))
    src.add_argument("--classes", type=int, help="number of classes for multinomial loss")
    src.add_argument("--lambda2", type=float, help="l2 weight; also the strong convexity sigma")
    src.add_argument("--lambda1", type=float, default=0.0)
    src.add_argument("--dim", type=int, help="feature dimension override")
    src.add_argument("--add-bias", action="store_true", help="append a constant-1 feature")
    src.add_argument("--no-normalize", action="store_true", help="keep raw row norms")
    run = p.add_argument_group("solvers")
    run.add_argument("--solver", default="vrada",
                     help="comma list of vrada, svrg, katyusha-sc, katyusha-nsc, mig-sc, mig-nsc")
    run.add_argument("--m", type=int, help="inner iterations per epoch (default 2n)")
    run.add_argument("--L-param", dest="L_param", type=float)
    run.add_argument("--L-grid", dest="L_grid", type=_grid,
                     help="comma list of L values to tune over, or 'default'")
    run.add_argument("--tune-criterion", choices=("final_objective", "passes"),
                     default="final_objective")
    run.add_argument("--tune-target", type=float, help="gap target for --tune-criterion passes")
    run.add_argument("--epochs", type=int, default=20)
    run.add_argument("--seeds", type=_ints, default=[0])
    run.add_argument("--gap-target", type=float, help="stop a run once the gap reaches this")
    run.add_argument("--deterministic", action="store_true", help="exact gradients (vrada only)")
    run.add_argument("--audit", action="store_true", help="check the convergence invariants")
    ref = p.add_argument_group("reference and output")
    ref.add_argument("--reference", help="reference file; loaded if present, else written")
    ref.add_argument("--compute-reference", action="store_true")
    ref.add_argument("--out", help="CSV path (default stdout)")
    ref.add_argument("--no-timing", action="store_true", help="leave elapsed_ms blank")
    ref.add_argument("--config", help="key=value file; command line flags take precedence")
    return p


def config_file_args(path):
    """Translate a key=value file into an argv list."""
    argv = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip().replace("_", "-"), value.strip()
            if not sep or not key:
                raise VradaError(f"{path}:{lineno}: expected key = value")
            if key == "config":
                raise VradaError(f"{path}:{lineno}: nested config files are not supported")
            if key in _BOOL_FLAGS:
                if value.lower() in ("1", "true", "yes", "on"):
                    argv.append("--" + key)
                elif value.lower() not in ("0", "false", "no", "off"):
                    raise VradaError(f"{path}:{lineno}: {key} expects a boolean")
            else:
                argv += ["--" + key, value]
    return argv


def parse_config(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = parser.parse_args(argv)
    if pre.config:
        argv = config_file_args(pre.config) + argv
    a = parser.parse_args(argv)
    loss, lambda2 = a.loss, a.lambda2
    if a.synthetic and not a.synthetic.startswith("a9a-like"):
        # ridge instances: squared loss with lambda2 = sigma unless stated otherwise
        sigma = float(a.synthetic.split(",")[2]) if a.synthetic.count(",") >= 2 else None
        loss = loss or "squared"
        lambda2 = sigma if lambda2 is None else lambda2
    return ExperimentConfig(
        dataset=a.dataset, synthetic=a.synthetic, loss=loss or "binary", classes=a.classes,
        lambda2=0.0 if lambda2 is None else lambda2, lambda1=a.lambda1,
        solvers=[s.strip() for s in a.solver.split(",") if s.strip()], m=a.m,
        L_param=a.L_param, L_grid=a.L_grid, tune_criterion=a.tune_criterion,
        tune_target=a.tune_target, epochs=a.epochs, seeds=a.seeds, deterministic=a.deterministic,
        audit=a.audit, reference=a.reference, compute_reference=a.compute_reference, out=a.out,
        add_bias=a.add_bias, normalize=not a.no_normalize, dim=a.dim, timing=not a.no_timing,
        gap_target=a.gap_target)


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except (VradaError, OSError) as exc:
        print(f"vrada-bench: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg, stream=None if cfg.out else sys.stdout)
    except (VradaError, OSError, ValueError) as exc:
        print(f"vrada-bench: {describe_error(cfg, exc)}", file=sys.stderr)
        return 2
    for line in result.failures:
        print(f"vrada-bench: audit failure {line}", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
