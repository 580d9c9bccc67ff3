"""Command-line interface: analysis, simulation and export plumbing."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .errors import ValleycrossError
from .esc import certify_esc
from .excursions import excursion_pmf, expected_births
from .lnk import esc_after_fixation, run_lnk
from .metagraph import build_l_scale_graph, build_meta_graph, check_no_cycles
from .model import load_model_file
from .rates import exit_law
from .simulator import StopCondition, esc_initial_counts, simulate
from .validation import compare_lnk, estimate_exit_law, exit_law_trend


@dataclass(frozen=True)
class RunManifest:
    command: str
    model_path: str | None
    overrides: dict
    seed: int | None
    output_dir: str
    version: str
    config_hash: str | None

    def to_dict(self) -> dict:
        return asdict(self)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 0
    try:
        return args.func(args)
    except ValleycrossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="valleycross",
        description=(
            "Metastable transition structure and stochastic simulation of "
            "trait-graph population dynamics."
        ),
    )
    parser.set_defaults(command=None)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("validate-model", help="parse and validate a model file")
    p.add_argument("model")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser(
        "analyze",
        help="enumerate stable configurations, build the metastability graph "
        "and requested time-scale collapses",
    )
    p.add_argument("model")
    p.add_argument("--seed-residents", help="comma-separated resident traits")
    p.add_argument("--levels", help="comma-separated stability levels, e.g. 1,2")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("rates", help="closed-form exit law of a resident set")
    p.add_argument("model")
    p.add_argument("--resident", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_rates)

    p = sub.add_parser(
        "lnk", help="deterministic log-time trajectory from an initial profile"
    )
    p.add_argument("model")
    p.add_argument(
        "--initial", help="comma-separated trait=exponent pairs, e.g. 0=1,1=0.66"
    )
    p.add_argument("--resident", help="resident set; combine with --mutant")
    p.add_argument("--mutant", help="fixating mutant trait")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_lnk)

    p = sub.add_parser("simulate", help="one exact stochastic trajectory")
    p.add_argument("model")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--horizon", type=float, default=math.inf)
    p.add_argument(
        "--esc-start", help="start from the quasi-stationary state of this resident set"
    )
    p.add_argument(
        "--initial", help="comma-separated trait=count pairs (overrides --esc-start)"
    )
    p.add_argument(
        "--stop",
        choices=["horizon", "fixation"],
        default="horizon",
        help="fixation stops when a trait outside the neighbourhood reaches "
        "size of order K**(1/alpha) (requires --esc-start)",
    )
    p.add_argument("--stride", type=int, default=64)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "montecarlo", help="Monte Carlo validation of the exit law at finite K"
    )
    p.add_argument("model")
    p.add_argument("--resident", required=True)
    p.add_argument("--K", help="comma-separated carrying capacities", required=True)
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=-1)
    p.add_argument(
        "--strict",
        action="store_true",
        help="exit 2 when the statistical acceptance thresholds fail",
    )
    p.add_argument("--mean-tolerance", type=float, default=0.25)
    p.add_argument("--ks-significance", type=float, default=0.01)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_montecarlo)

    p = sub.add_parser(
        "excursion", help="birth-count statistics of a subcritical excursion"
    )
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--k-max", type=int, default=10)
    p.set_defaults(func=_cmd_excursion)

    p = sub.add_parser("export-dot", help="DOT export of the metastability graph")
    p.add_argument("model")
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--seed-residents")
    p.set_defaults(func=_cmd_export_dot)

    return parser


# ---------------------------------------------------------------------------
# subcommands


def _cmd_validate(args) -> int:
    model = load_model_file(args.model)
    print(
        f"ok: {len(model.vertices)} traits, {len(model.edges)} edges, "
        f"alpha={model.alpha}"
    )
    return 0


def _cmd_analyze(args) -> int:
    model = load_model_file(args.model)
    manifest = _manifest(args, seed=None)
    outdir = _outdir(args)
    seed_set = _trait_set(args.seed_residents)
    meta = build_meta_graph(model, seed_set)
    doc = meta.to_dict()
    doc["manifest"] = manifest.to_dict()
    _write(outdir, "g_esc.json", json.dumps(doc, indent=2, sort_keys=True))
    _write(outdir, "g_esc.dot", meta.to_dot())
    for level in _int_list(args.levels):
        verdict = check_no_cycles(meta, level)
        if not verdict:
            print(
                f"level {level}: escape assumption fails, witness "
                f"{[sorted(v) for v in verdict.witness]}",
                file=sys.stderr,
            )
            continue
        g = build_l_scale_graph(meta, level)
        gdoc = g.to_dict()
        gdoc["manifest"] = manifest.to_dict()
        _write(outdir, f"g{level}.json", json.dumps(gdoc, indent=2, sort_keys=True))
        _write(outdir, f"g{level}.dot", g.to_dot())
    return 0


def _cmd_rates(args) -> int:
    model = load_model_file(args.model)
    esc = certify_esc(model, _trait_set(args.resident))
    law = exit_law(model, esc)
    doc = law.to_dict()
    doc["manifest"] = _manifest(args, seed=None).to_dict()
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.output:
        _write(_outdir(args), "exit_law.json", text)
    else:
        print(text)
    return 0


def _cmd_lnk(args) -> int:
    model = load_model_file(args.model)
    if args.initial:
        initial = {
            k: float(v)
            for k, v in (pair.split("=") for pair in args.initial.split(","))
        }
        trajectory = run_lnk(model, initial)
    elif args.resident and args.mutant:
        esc = certify_esc(model, _trait_set(args.resident))
        outcome = esc_after_fixation(model, esc, args.mutant)
        tilde = {u: 1.0 for u in esc.resident}
        tilde[args.mutant] = min(1.0 / model.alpha, 1.0)
        trajectory = run_lnk(model, tilde)
        print(f"outcome: {outcome}")
    else:
        print("error: provide --initial or both --resident and --mutant", file=sys.stderr)
        return 1
    doc = trajectory.to_dict()
    doc["manifest"] = _manifest(args, seed=None).to_dict()
    outdir = _outdir(args)
    _write(outdir, "lnk_trajectory.csv", trajectory.to_csv())
    _write(outdir, "lnk_summary.json", json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_simulate(args) -> int:
    model = load_model_file(args.model)
    seed = _ensure_seed(args.seed)
    esc = None
    if args.esc_start:
        esc = certify_esc(model, _trait_set(args.esc_start))
        counts = esc_initial_counts(model, esc, args.K)
    else:
        counts = {}
    if args.initial:
        for pair in args.initial.split(","):
            k, v = pair.split("=")
            counts[k] = int(v)
    if not counts:
        print("error: provide --esc-start or --initial counts", file=sys.stderr)
        return 1
    if args.stop == "fixation":
        if esc is None:
            print("error: --stop fixation requires --esc-start", file=sys.stderr)
            return 1
        stop = StopCondition(
            horizon=args.horizon,
            fix_watch=frozenset(model.vertices) - esc.v_alpha,
        )
    else:
        if math.isinf(args.horizon):
            print("error: --stop horizon requires a finite --horizon", file=sys.stderr)
            return 1
        stop = StopCondition(horizon=args.horizon)
    record = simulate(model, args.K, counts, stop, seed, sample_stride=args.stride)
    outdir = _outdir(args)
    _write(outdir, "trajectory.csv", record.to_csv())
    summary = {
        "K": record.K,
        "seed": record.seed,
        "stop_reason": record.stop_reason,
        "time": record.time,
        "trigger": record.trigger,
        "final_counts": record.final_counts,
        "events": record.events,
        "rate_drift": record.rate_drift,
        "manifest": _manifest(args, seed=seed).to_dict(),
    }
    _write(outdir, "simulation.json", json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_montecarlo(args) -> int:
    model = load_model_file(args.model)
    seed = _ensure_seed(args.seed)
    esc = certify_esc(model, _trait_set(args.resident))
    K_list = _int_list(args.K)
    reports = exit_law_trend(
        model, esc, K_list, args.replicates, seed, workers=args.workers
    )
    outdir = _outdir(args)
    failures = []
    for report in reports:
        doc = report.to_dict()
        doc["manifest"] = _manifest(args, seed=seed).to_dict()
        _write(
            outdir,
            f"montecarlo_K{report.K}.json",
            json.dumps(doc, indent=2, sort_keys=True),
        )
        times = report.empirical["rescaled_times"]
        _write(
            outdir,
            f"rescaled_times_K{report.K}.csv",
            "rescaled_time\n" + "".join(f"{t!r}\n" for t in times),
        )
    last = reports[-1]
    theory_mean = last.theory["mean_rescaled_time"]
    emp_mean = last.empirical["mean_rescaled_time"]
    if abs(emp_mean - theory_mean) > args.mean_tolerance * theory_mean:
        failures.append(
            f"mean rescaled exit time {emp_mean:.4g} deviates more than "
            f"{args.mean_tolerance:.0%} from {theory_mean:.4g}"
        )
    if last.tests["ks_pvalue"] is not None and (
        last.tests["ks_pvalue"] < args.ks_significance
    ):
        failures.append(
            f"KS test rejected at {args.ks_significance} "
            f"(p={last.tests['ks_pvalue']:.4g})"
        )
    for msg in failures:
        print(f"acceptance: {msg}", file=sys.stderr)
    if failures and args.strict:
        return 2
    return 0


def _cmd_excursion(args) -> int:
    rho = args.rho
    print(f"rho      {rho}")
    print(f"lambda   {expected_births(rho)}")
    for k in range(args.k_max + 1):
        print(f"p({k})     {excursion_pmf(rho, k)}")
    return 0


def _cmd_export_dot(args) -> int:
    model = load_model_file(args.model)
    meta = build_meta_graph(model, _trait_set(args.seed_residents))
    if args.level is None:
        print(meta.to_dot())
    else:
        print(build_l_scale_graph(meta, args.level).to_dot())
    return 0


# ---------------------------------------------------------------------------
# helpers


def _manifest(args, seed) -> RunManifest:
    model_path = getattr(args, "model", None)
    config_hash = None
    if model_path and os.path.exists(model_path):
        with open(model_path, "rb") as fh:
            config_hash = hashlib.sha256(fh.read()).hexdigest()
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in {"func", "command", "model", "seed", "output"} and v is not None
    }
    return RunManifest(
        command=args.command,
        model_path=model_path,
        overrides={k: str(v) for k, v in overrides.items()},
        seed=seed,
        output_dir=_outdir(args),
        version=__version__,
        config_hash=config_hash,
    )


def _outdir(args) -> str:
    out = getattr(args, "output", None)
    if out is None:
        out = os.environ.get("VALLEYCROSS_OUTDIR", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _write(outdir: str, name: str, text: str) -> None:
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(path)


def _trait_set(spec):
    if spec is None:
        return None
    return frozenset(s.strip() for s in spec.split(",") if s.strip())


def _int_list(spec) -> list[int]:
    if not spec:
        return []
    return [int(s) for s in spec.split(",") if s.strip()]


def _ensure_seed(seed):
    if seed is None:
        seed = int(np.random.SeedSequence().generate_state(1)[0])
        print(f"seed: {seed}")
    return seed


if __name__ == "__main__":
    sys.exit(main())
