"""Command-line front end.

Exit codes: 0 success, 1 validation/usage error, 2 numeric or convergence
failure, 3 truncation-dominated results (more episodes truncated than
completed). Results print as flat key=value lines; experiment records can
additionally be appended to --out as JSONL or CSV.
"""

from __future__ import annotations

import argparse
import sys

from . import bounds as bounds_mod
from . import cylinder as cyl
from . import density as density_mod
from .dpp import compare_mc_vs_dpp, solve_dpp
from .errors import (
    AccuracyError,
    ConfigError,
    EstimationFailureError,
    NonConvergenceError,
    NumericError,
    ParameterError,
    TruncationError,
    TugLabError,
)
from .game import compute_probabilities, estimate_value, play_episode
from .harness import (
    ExperimentConfig,
    estimate_measure_density,
    payoff_from_name,
    run_eps_ladder,
    run_regularity_experiment,
    run_single_experiment,
    strategy_from_name,
    write_records,
)
from .rngutil import make_rng


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _emit(**kv):
    for key, val in kv.items():
        print(f"{key}={val!r}" if isinstance(val, float) else f"{key}={val}")


def _load_config(args, required=True) -> ExperimentConfig | None:
    if getattr(args, "config", None) is None:
        if required:
            raise ConfigError("this subcommand needs --config PATH")
        return None
    cfg = ExperimentConfig.from_file(args.config)
    overrides = {}
    for key in ("seed", "episodes", "out", "format", "threads"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if overrides:
        cfg = cfg.with_values(**overrides)
    return cfg


def _write_if_requested(cfg: ExperimentConfig | None, args, records) -> None:
    out = getattr(args, "out", None) or (cfg.get("out") if cfg else None)
    if out:
        fmt = getattr(args, "format", None) or (
            cfg.get("format") if cfg else None
        ) or "jsonl"
        write_records(records, out, fmt=fmt)


def _dominated(records) -> bool:
    sim = [r for r in records if r.provenance == "simulated"]
    return bool(sim) and any(r.truncated > r.episodes for r in sim)


# --------------------------------------------------------------------------
# handlers

def _cmd_probabilities(args) -> int:
    alpha, beta = compute_probabilities(args.n, args.p)
    _emit(alpha=alpha, beta=beta)
    return 0


def _cmd_play(args) -> int:
    cfg = _load_config(args)
    params = cfg.game_params()
    domain = cfg.domain()
    x0, = cfg.require("x0")
    y = cfg.get("y")
    s1 = strategy_from_name(cfg.get("strategy1", "cancellation"), y=y)
    s2 = strategy_from_name(cfg.get("strategy2", "stay-near-start"), y=y)
    payoff = payoff_from_name(cfg.get("payoff", "constant:0"))
    rng = make_rng(cfg.get("seed", 0), "play")
    trace = play_episode(params, domain, x0, s1, s2, payoff, rng,
                         max_steps=cfg.get("max_steps"))
    counts = [0, 0, 0]
    for c in trace.coins:
        counts[int(c)] += 1
    _emit(steps=trace.tau, exit_point=tuple(trace.exit_point),
          payoff=trace.payoff, p1_wins=counts[0], p2_wins=counts[1],
          random_moves=counts[2])
    return 0


def _cmd_value(args) -> int:
    cfg = _load_config(args)
    params = cfg.game_params()
    domain = cfg.domain()
    x0, episodes, seed = cfg.require("x0", "episodes", "seed")
    y = cfg.get("y")
    s1 = strategy_from_name(cfg.get("strategy1", "cancellation"), y=y)
    s2 = strategy_from_name(cfg.get("strategy2", "stay-near-start"), y=y)
    payoff = payoff_from_name(cfg.get("payoff", "constant:0"))
    est = estimate_value(params, domain, x0, s1, s2, payoff, episodes, seed,
                         max_steps=cfg.get("max_steps"))
    _emit(mean=est.mean, std_error=est.std_error, episodes=est.episodes,
          truncated=est.truncated)
    return 3 if est.truncated > est.episodes else 0


def _cylinder_args_to_config(args) -> ExperimentConfig:
    mapping = {
        "experiment": f"cylinder-{args.mode}",
        "n": args.n, "p": args.p, "r": args.r, "eps": args.eps,
        "t0": args.t0, "episodes": args.episodes, "seed": args.seed,
    }
    if args.mode == "clock":
        mapping["a"] = args.a
    return ExperimentConfig.from_mapping(mapping)


def _cmd_cylinder(args) -> int:
    if args.mode == "theorem3":
        cfg = _load_config(args)
        records = run_single_experiment(
            cfg.with_values(experiment="theorem3")
        )
    else:
        records = run_single_experiment(_cylinder_args_to_config(args))
        cfg = None
    for rec in records:
        _emit(**{f"{rec.metric}": rec.value,
                 f"{rec.metric}.std_error": rec.std_error})
        _emit(**{f"{rec.metric}.episodes": rec.episodes,
                 f"{rec.metric}.truncated": rec.truncated})
    _write_if_requested(cfg, args, records)
    return 3 if _dominated(records) else 0


def _cmd_density(args) -> int:
    if args.mode == "exact":
        _emit(value=density_mod.density1d_exact(args.k, args.eps, args.x))
    elif args.mode == "inversion":
        res = density_mod.density_origin_inversion(args.n, args.eps, args.k,
                                                   tol=args.tol)
        _emit(value=res.value, error_bound=res.error_bound,
              cutoff=res.cutoff, panels=res.panels)
    elif args.mode == "mc":
        prof = density_mod.mc_radial_profile(args.n, args.eps, args.k,
                                             args.samples, args.bins,
                                             args.seed)
        _emit(method=prof.method, mass=prof.mass_check)
        for r, v, se in zip(prof.radii, prof.values, prof.std_errors):
            print(f"bin r={r:.6g} value={v!r} std_error={se!r}")
    elif args.mode == "bounds":
        _emit(origin_bound=density_mod.density1d_origin_bound(args.k, args.eps))
        if args.samples:
            chk = density_mod.lower_bound_check(args.n, args.eps, args.k,
                                                args.cstar, args.samples,
                                                args.seed)
            _emit(mc_value=chk.mc_value, lower_bound=chk.bound,
                  passed=str(chk.passed).lower(), std_error=chk.std_error)
    else:
        consts = density_mod.paper_constants(args.n)
        _emit(C_n=consts.C_n, C1=consts.C1, k0=consts.k0,
              cstar_max=consts.cstar_max, omega_n=consts.omega_n,
              c1=consts.c1, c2=consts.c2, rayleigh=consts.rayleigh)
    return 0


def _cmd_bounds(args) -> int:
    if args.mode == "hoeffding":
        _emit(bound=bounds_mod.hoeffding_bound(args.N, args.b, args.n,
                                               getattr(args, "lam")))
    elif args.mode == "tail":
        _emit(tail=bounds_mod.gaussian_tail(args.l))
    elif args.mode == "reflection":
        lhs, rhs, equal = bounds_mod.reflection_identity_check(args.N, args.l)
        print(f"lhs={lhs} rhs={rhs} equal={str(equal).lower()}")
    elif args.mode == "sin":
        _emit(max_violation=bounds_mod.sin_inequality_check(args.m))
    else:
        consts = bounds_mod.compute_paper_constants(
            args.n, args.p, args.c_density, args.c_hat, cstar=args.cstar
        )
        for line in consts.report_lines():
            print(line)
    return 0


def _cmd_dpp(args) -> int:
    cfg = _load_config(args)
    params = cfg.game_params()
    domain = cfg.domain()
    payoff = payoff_from_name(cfg.require("payoff")[0])
    h, = cfg.require("h")
    if args.mode == "solve":
        fld = solve_dpp(params, domain, payoff, h)
        _emit(iterations=fld.iterations, residual=fld.final_residual,
              interior_nodes=fld.node_count(1), strip_nodes=fld.node_count(2))
        out = args.out or cfg.get("out")
        if out:
            fld.to_csv(out)
            _emit(csv=out)
    else:
        x0, episodes, seed = cfg.require("x0", "episodes", "seed")
        mc, dpp_val, gap = compare_mc_vs_dpp(params, domain, payoff, x0,
                                             episodes, h, seed)
        _emit(mc=mc.mean, mc_std_error=mc.std_error, dpp=dpp_val, gap=gap,
              episodes=mc.episodes, truncated=mc.truncated)
        return 3 if mc.truncated > mc.episodes else 0
    return 0


def _cmd_regularity(args) -> int:
    cfg = _load_config(args)
    records = run_regularity_experiment(cfg)
    for rec in records:
        print(f"{rec.experiment_id} {rec.metric}={rec.value!r} "
              f"std_error={rec.std_error!r} episodes={rec.episodes} "
              f"truncated={rec.truncated}")
    _write_if_requested(cfg, args, records)
    return 3 if _dominated(records) else 0


def _cmd_ladder(args) -> int:
    cfg = _load_config(args)
    report = run_eps_ladder(cfg)
    for key, verdict in sorted(report.verdicts.items()):
        vals = " ".join(repr(v) for v in verdict.values)
        print(f"{key}: eps={list(verdict.eps_values)} values=[{vals}] "
              f"nondecreasing={str(verdict.nondecreasing_within_error).lower()} "
              f"stable={str(verdict.stable_within_error).lower()}")
    _write_if_requested(cfg, args, report.records)
    return 3 if _dominated(report.records) else 0


def _cmd_measure_density(args) -> int:
    cfg = _load_config(args)
    domain = cfg.domain()
    y, radii = cfg.require("y", "radii")
    samples = cfg.get("samples", 100_000)
    est = estimate_measure_density(domain, y, radii, samples,
                                   cfg.get("seed", 0))
    for r, ratio, se in est.rows():
        print(f"radius={r:g} ratio={ratio!r} std_error={se!r}")
    _emit(c_hat=est.c_hat)
    if est.warning:
        print(f"warning: {est.warning}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# parser assembly

def build_parser() -> _Parser:
    parser = _Parser(prog="tuglab", description=__doc__)
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--episodes", type=int, help="episode count override")
    parser.add_argument("--out", help="append records to this path")
    parser.add_argument("--threads", type=int, help="worker hint (records ignore it)")
    parser.add_argument("--format", choices=("csv", "jsonl"),
                        help="record format for --out")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("probabilities", help="coin probabilities for (n, p)")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.set_defaults(func=_cmd_probabilities)

    sp = sub.add_parser("play", help="play one episode from --config")
    sp.set_defaults(func=_cmd_play)

    sp = sub.add_parser("value", help="Monte Carlo game value from --config")
    sp.set_defaults(func=_cmd_value)

    sp = sub.add_parser("cylinder", help="cylinder-walk estimators")
    cylsub = sp.add_subparsers(dest="mode", required=True)
    for mode in ("bottom", "clock", "eventb"):
        spc = cylsub.add_parser(mode)
        spc.add_argument("--n", type=int, required=True)
        spc.add_argument("--p", type=float, required=True)
        spc.add_argument("--r", type=float, required=True)
        spc.add_argument("--eps", type=float, required=True)
        spc.add_argument("--t0", type=float, required=True)
        spc.add_argument("--episodes", type=int, default=10_000)
        spc.add_argument("--seed", type=int, default=0)
        if mode == "clock":
            spc.add_argument("--a", type=float, default=1.0)
        spc.set_defaults(func=_cmd_cylinder, mode=mode)
    spc = cylsub.add_parser("theorem3", help="needs --config for the domain")
    spc.set_defaults(func=_cmd_cylinder, mode="theorem3")

    sp = sub.add_parser("density", help="ball-sum density evaluations")
    dsub = sp.add_subparsers(dest="mode", required=True)
    spd = dsub.add_parser("exact")
    spd.add_argument("--k", type=int, required=True)
    spd.add_argument("--eps", type=float, required=True)
    spd.add_argument("--x", type=float, required=True)
    spd.set_defaults(func=_cmd_density, mode="exact")
    spd = dsub.add_parser("inversion")
    spd.add_argument("--n", type=int, required=True)
    spd.add_argument("--eps", type=float, required=True)
    spd.add_argument("--k", type=int, required=True)
    spd.add_argument("--tol", type=float, default=1e-8)
    spd.set_defaults(func=_cmd_density, mode="inversion")
    spd = dsub.add_parser("mc")
    spd.add_argument("--n", type=int, required=True)
    spd.add_argument("--eps", type=float, required=True)
    spd.add_argument("--k", type=int, required=True)
    spd.add_argument("--samples", type=int, default=100_000)
    spd.add_argument("--bins", type=int, default=40)
    spd.add_argument("--seed", type=int, default=0)
    spd.set_defaults(func=_cmd_density, mode="mc")
    spd = dsub.add_parser("bounds")
    spd.add_argument("--k", type=int, required=True)
    spd.add_argument("--eps", type=float, required=True)
    spd.add_argument("--n", type=int, default=1)
    spd.add_argument("--cstar", type=float, default=0.1)
    spd.add_argument("--samples", type=int, default=0,
                     help="when > 0, also run the shell MC lower-bound check")
    spd.add_argument("--seed", type=int, default=0)
    spd.set_defaults(func=_cmd_density, mode="bounds")
    spd = dsub.add_parser("constants")
    spd.add_argument("--n", type=int, required=True)
    spd.set_defaults(func=_cmd_density, mode="constants")

    sp = sub.add_parser("bounds", help="closed-form bound evaluations")
    bsub = sp.add_subparsers(dest="mode", required=True)
    spb = bsub.add_parser("hoeffding")
    spb.add_argument("--N", type=int, required=True)
    spb.add_argument("--b", type=float, required=True)
    spb.add_argument("--n", type=int, required=True)
    spb.add_argument("--lambda", type=float, required=True, dest="lam")
    spb.set_defaults(func=_cmd_bounds, mode="hoeffding")
    spb = bsub.add_parser("tail")
    spb.add_argument("--l", type=float, required=True)
    spb.set_defaults(func=_cmd_bounds, mode="tail")
    spb = bsub.add_parser("reflection")
    spb.add_argument("--N", type=int, required=True)
    spb.add_argument("--l", type=int, required=True)
    spb.set_defaults(func=_cmd_bounds, mode="reflection")
    spb = bsub.add_parser("sin")
    spb.add_argument("--m", type=float, required=True)
    spb.set_defaults(func=_cmd_bounds, mode="sin")
    spb = bsub.add_parser("constants")
    spb.add_argument("--n", type=int, required=True)
    spb.add_argument("--p", type=float, required=True)
    spb.add_argument("--c-density", type=float, required=True)
    spb.add_argument("--c-hat", type=float, required=True)
    spb.add_argument("--cstar", type=float, default=None)
    spb.set_defaults(func=_cmd_bounds, mode="constants")

    sp = sub.add_parser("dpp", help="grid value iteration")
    psub = sp.add_subparsers(dest="mode", required=True)
    spp = psub.add_parser("solve")
    spp.set_defaults(func=_cmd_dpp, mode="solve")
    spp = psub.add_parser("compare")
    spp.set_defaults(func=_cmd_dpp, mode="compare")

    sp = sub.add_parser("regularity", help="boundary regularity experiment")
    sp.set_defaults(func=_cmd_regularity)

    sp = sub.add_parser("ladder", help="eps-halving trend report")
    sp.set_defaults(func=_cmd_ladder)

    sp = sub.add_parser("measure-density", help="complement volume fractions")
    sp.set_defaults(func=_cmd_measure_density)

    return parser


def cli_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return 0 if code in (0, None) else 1
    try:
        return args.func(args)
    except (ParameterError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, AccuracyError, NonConvergenceError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2
    except (TruncationError, EstimationFailureError) as exc:
        print(f"truncation: {exc}", file=sys.stderr)
        return 3
    except TugLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return cli_dispatch(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
