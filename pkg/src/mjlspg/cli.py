"""Command-line front end.

Subcommands: generate, solve, optimize, experiment, estimate-chain.
Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

import argparse
import json
import sys

import numpy as np

from .errors import (
    DivergenceDetected,
    NoConvergence,
    NonErgodic,
    NotStabilizing,
    SingularCorrelation,
)
from .estimation import (
    EstimationConfig,
    estimate_pseudo_spectral_params,
    estimate_transition_matrix,
    required_chain_length,
)
from .exact import exact_cost, solve_coupled_are
from .harness import ExperimentConfig, run_experiment
from .models import (
    GainSchedule,
    generate_random_model,
    load_model,
    model_to_dict,
    sample_mode_chain,
    save_model,
)
from .optimize import METHODS, OptimizerConfig, optimize

_NUMERICAL_FAILURES = (
    DivergenceDetected,
    NoConvergence,
    NonErgodic,
    NotStabilizing,
    SingularCorrelation,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser():
    parser = _Parser(prog="mjlspg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="emit a random model as JSON")
    gen.add_argument("--modes", type=int, default=2)
    gen.add_argument("--state-dim", type=int, default=2)
    gen.add_argument("--input-dim", type=int, default=2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", help="output path (stdout when omitted)")

    solve = sub.add_parser("solve", help="print the optimal gains for a model file")
    solve.add_argument("model", help="model JSON path")

    opt = sub.add_parser("optimize", help="one optimization run, trace to CSV")
    opt.add_argument("model", help="model JSON path")
    opt.add_argument("--method", choices=METHODS, default="ngd")
    opt.add_argument("--eta", type=float, default=None,
                     help="step size override (default: theory formula)")
    opt.add_argument("--iterations", type=int, default=100)
    opt.add_argument("--tolerance", type=float, default=0.0,
                     help="stop when the policy step norm falls below this")
    opt.add_argument("--trajectories", type=int, default=500)
    opt.add_argument("--rollout", type=int, default=150)
    opt.add_argument("--radius", type=float, default=0.05)
    opt.add_argument("--transition", choices=("known", "estimated"), default="known")
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--out", default="trace.csv", help="trace CSV path")

    exp = sub.add_parser("experiment", help="full multi-size, multi-method study")
    exp.add_argument("--out", default="experiment-out")
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--repetitions", type=int, default=15)
    exp.add_argument("--iterations", type=int, default=100)
    exp.add_argument("--method", action="append", choices=METHODS,
                     help="repeatable; default is all four methods")
    exp.add_argument("--modes", type=int, default=None,
                     help="with --state-dim/--input-dim: run one size only")
    exp.add_argument("--state-dim", type=int, default=None)
    exp.add_argument("--input-dim", type=int, default=None)
    exp.add_argument("--eta", type=float, default=None)
    exp.add_argument("--tolerance", type=float, default=0.0)
    exp.add_argument("--trajectories", type=int, default=500)
    exp.add_argument("--rollout", type=int, default=150)
    exp.add_argument("--radius", type=float, default=0.05)
    exp.add_argument("--transition", choices=("known", "estimated"), default="known")
    exp.add_argument("--workers", type=int, default=1)

    chain = sub.add_parser(
        "estimate-chain", help="transition-estimation demo with coverage stats"
    )
    chain.add_argument("model", nargs="?", help="model JSON (default 2-mode chain)")
    chain.add_argument("--seed", type=int, default=0)
    chain.add_argument("--trials", type=int, default=100)
    chain.add_argument("--eps", type=float, default=0.1)
    chain.add_argument("--delta", type=float, default=0.05)
    return parser


def _cmd_generate(args):
    model = generate_random_model(args.modes, args.state_dim, args.input_dim, args.seed)
    if args.out:
        save_model(model, args.out)
        print(f"wrote {args.out}")
    else:
        json.dump(model_to_dict(model), sys.stdout, indent=2)
        print()
    return 0


def _cmd_solve(args):
    model = load_model(args.model)
    _, K_star = solve_coupled_are(model)
    for i in range(model.num_modes):
        print(f"K*[{i}] = {K_star.K[i].tolist()}")
    print(f"C(K*) = {exact_cost(model, K_star)!r}")
    return 0


def _cmd_optimize(args):
    model = load_model(args.model)
    cfg = OptimizerConfig(
        method=args.method,
        step_size="auto" if args.eta is None else args.eta,
        max_iterations=args.iterations,
        stop_tolerance=args.tolerance,
        estimation=EstimationConfig(
            num_trajectories=args.trajectories,
            rollout_length=args.rollout,
            smoothing_radius=args.radius,
            seed=args.seed,
        ),
        transition_source=args.transition,
    )
    trace = optimize(model, GainSchedule.zeros(model), cfg)
    trace.write_csv(args.out)
    print(
        f"{args.method}: {len(trace)} rows, final cost {trace.cost[-1]:.6g}, "
        f"final normalized gap {trace.normalized_gap[-1]:.3e} -> {args.out}"
    )
    return 0


def _cmd_experiment(args):
    one_size = (args.modes, args.state_dim, args.input_dim)
    if any(v is not None for v in one_size) and None in one_size:
        raise _UsageError("--modes, --state-dim and --input-dim go together")
    cfg = ExperimentConfig(
        out_dir=args.out,
        sizes=(one_size,) if args.modes is not None else
        ((2, 2, 2), (4, 4, 4), (6, 6, 6)),
        methods=tuple(args.method) if args.method else ("gd", "ngd", "mf-gd", "mf-ngd"),
        repetitions=args.repetitions,
        iterations=args.iterations,
        seed=args.seed,
        step_size="auto" if args.eta is None else args.eta,
        mf_step_size=args.eta,
        stop_tolerance=args.tolerance,
        num_trajectories=args.trajectories,
        rollout_length=args.rollout,
        smoothing_radius=args.radius,
        transition_source=args.transition,
        workers=args.workers,
    )
    manifest = run_experiment(cfg)
    print(
        f"experiment complete: {len(manifest['seeds'])} runs, "
        f"{len(manifest['failures'])} failures -> {args.out}"
    )
    return 0


def _cmd_estimate_chain(args):
    if args.model:
        model = load_model(args.model)
        P, pi0 = model.P, model.pi0
    else:
        P = np.array([[0.7, 0.3], [0.4, 0.6]])
        pi0 = np.array([0.5, 0.5])
    pi_star, gamma_ps, mu_norm = estimate_pseudo_spectral_params(P, mu=pi0)
    n = required_chain_length(
        args.eps, args.delta, P.shape[0], pi_star, gamma_ps, mu_norm
    )
    print(f"pi_star = {pi_star:.4f}, gamma_ps = {gamma_ps:.4f}, n = {n}")
    errors = []
    hits = 0
    for trial in range(args.trials):
        rng = np.random.default_rng((args.seed, trial))
        chain = sample_mode_chain(P, pi0, n, rng)
        P_hat = estimate_transition_matrix(chain, P.shape[0]).P_hat
        err = float(np.abs(P - P_hat).sum(axis=1).max())
        errors.append(err)
        hits += err < args.eps
    print(
        f"coverage: {hits}/{args.trials} trials with ||P - P_hat||_inf < {args.eps}"
        f" (mean error {np.mean(errors):.4f})"
    )
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "optimize": _cmd_optimize,
    "experiment": _cmd_experiment,
    "estimate-chain": _cmd_estimate_chain,
}


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except _NUMERICAL_FAILURES as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


def main():
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
