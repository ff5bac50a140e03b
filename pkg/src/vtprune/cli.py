"""Command-line interface.

Subcommands:

* ``prune``        run the pipeline over a bundle (or directory of bundles),
                   writing a result container and a JSON-lines report per
                   bundle
* ``analyze``      print the analytical cost report for a schedule
* ``oracle-check`` run the brute-force equivalence suites on random
                   instances; nonzero exit on any mismatch
* ``inspect``      print a bundle's manifest, meta and validation results

All output is deterministic for fixed inputs, flags and seeds; every number
in the human-readable tables also appears in a machine-readable record.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .bundleio import BundleFormatError, load_bundle, read_manifest, save_token_set
from .costmodel import FlopsConfig, cost_report, flops_layer
from .oracles import run_all_suites
from .pipeline import FIDELITY_NOTE, run_pipeline
from .schedules import PRESET_NAMES, load_schedule
from .types import PruneStrategy, STRATEGY_VARIANTS, validate_bundle


def _record(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vtprune",
        description="Offline visual-token pruning engine",
    )
    parser.add_argument("--version", action="version", version=f"vtprune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prune", help="prune one bundle or a directory of bundles")
    p.add_argument("bundle", help="bundle file or directory of *.vtb files")
    p.add_argument(
        "--schedule",
        required=True,
        help=f"schedule JSON file or preset ({', '.join(PRESET_NAMES)})",
    )
    p.add_argument("--strategy", default="vitcop", choices=STRATEGY_VARIANTS)
    p.add_argument("--seed", type=int, default=None, help="seed for random_baseline")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--ffn-mode", default="paper", choices=("paper", "intermediate"))

    a = sub.add_parser("analyze", help="print the analytical cost report for a schedule")
    a.add_argument(
        "--schedule",
        required=True,
        help=f"schedule JSON file or preset ({', '.join(PRESET_NAMES)})",
    )
    a.add_argument("--ffn-mode", default="paper", choices=("paper", "intermediate"))

    o = sub.add_parser("oracle-check", help="run brute-force oracle equivalence suites")
    o.add_argument("--n", type=int, default=64, help="max instance size")
    o.add_argument("--trials", type=int, default=50, help="random instances per suite")
    o.add_argument("--seed", type=int, default=0)

    i = sub.add_parser("inspect", help="print a bundle's manifest and validation results")
    i.add_argument("bundle")

    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:   # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)

    try:
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "prune":
            return _cmd_prune(args)
        if args.command == "oracle-check":
            return _cmd_oracle_check(args)
        if args.command == "inspect":
            return _cmd_inspect(args)
    except (BundleFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


def _cmd_analyze(args: argparse.Namespace) -> int:
    schedule = load_schedule(args.schedule)
    cfg = FlopsConfig.from_model(schedule.model, ffn_mode=args.ffn_mode)
    report = cost_report(schedule, cfg=cfg)

    print(f"schedule: pi=({schedule.pi1}, {schedule.pi2}, {schedule.pi3})  "
          f"l_s={schedule.l_s} l_d={schedule.l_d}  m={schedule.model.m} "
          f"d={schedule.model.d} layers={schedule.model.n_layers} "
          f"n_text={schedule.model.n_text}  ffn-mode={cfg.ffn_mode}")
    print(f"{'layer':>5}  {'N_v':>6}  {'seq':>6}  {'flops':>12}")
    per_layer = [flops_layer(nv + cfg.n_text, cfg) for nv in report.nv_per_layer]
    for layer, (nv, fl) in enumerate(zip(report.nv_per_layer, per_layer), start=1):
        print(f"{layer:>5}  {nv:>6}  {nv + cfg.n_text:>6}  {fl:>12.4e}")
    print(f"total FLOPs:    {report.flops_total:.6e}")
    print(f"vanilla FLOPs:  {report.flops_vanilla:.6e}")
    print(f"CR_int:         {report.cr_int:.6f}")
    for name, ops in sorted(report.overhead_ops.items()):
        print(f"overhead {name}: {ops:.6e}")
    print(
        _record(
            {
                "record": "cost_report",
                "schedule": schedule.as_dict(),
                "flops_per_layer": per_layer,
                **report.as_dict(),
            }
        )
    )
    return 0


def _bundle_paths(root: str) -> list[str]:
    if os.path.isdir(root):
        names = sorted(n for n in os.listdir(root) if n.endswith(".vtb"))
        if not names:
            raise ValueError(f"no *.vtb bundles in {root}")
        return [os.path.join(root, n) for n in names]
    return [root]


def _cmd_prune(args: argparse.Namespace) -> int:
    schedule = load_schedule(args.schedule)
    strategy = PruneStrategy(variant=args.strategy, seed=args.seed)
    cfg = FlopsConfig.from_model(schedule.model, ffn_mode=args.ffn_mode)
    os.makedirs(args.out, exist_ok=True)

    for path in _bundle_paths(args.bundle):
        stem = os.path.splitext(os.path.basename(path))[0]
        bundle = load_bundle(path)
        tokens, traces, report = run_pipeline(bundle, schedule, strategy, cfg=cfg)

        records = [
            _record(
                {
                    "record": "run_header",
                    "bundle": stem,
                    "strategy": strategy.variant,
                    "seed": strategy.seed,
                    "schedule": schedule.as_dict(),
                    "ffn_mode": cfg.ffn_mode,
                    "note": FIDELITY_NOTE,
                }
            )
        ]
        records += [
            _record({"record": "stage_trace", "bundle": stem, **t.as_dict()}) for t in traces
        ]
        records.append(
            _record(
                {
                    "record": "final_tokens",
                    "bundle": stem,
                    "count": len(tokens),
                    "kept": [min(o) for o in tokens.origin],
                    "kinds": list(tokens.kind),
                    "origins": [list(o) for o in tokens.origin],
                }
            )
        )
        records.append(_record({"record": "cost_report", "bundle": stem, **report.as_dict()}))

        report_path = os.path.join(args.out, f"{stem}.report.jsonl")
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(records) + "\n")
        result_path = os.path.join(args.out, f"{stem}.result.vtb")
        save_token_set(
            tokens,
            result_path,
            run_meta={
                "bundle": stem,
                "strategy": strategy.variant,
                "seed": strategy.seed,
                "schedule": schedule.as_dict(),
            },
        )
        counts = " -> ".join(str(t.output_count) for t in traces)
        print(f"{stem}: {bundle.meta.m} -> {counts} tokens; report {report_path}")
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    if args.trials < 1 or args.n < 2:
        raise ValueError("need --trials >= 1 and --n >= 2")
    results = run_all_suites(seed=args.seed, trials=args.trials, max_n=args.n)
    failed = 0
    for res in results:
        status = "ok" if res.ok else f"MISMATCH ({res.detail})"
        print(f"{res.name}: {res.trials} trials, {res.mismatches} mismatches, {status}")
        print(
            _record(
                {
                    "record": "oracle_suite",
                    "suite": res.name,
                    "trials": res.trials,
                    "mismatches": res.mismatches,
                    "detail": res.detail,
                }
            )
        )
        failed += res.mismatches
    print(f"oracle-check: {'ok' if failed == 0 else 'FAILED'}")
    return 0 if failed == 0 else 1


def _cmd_inspect(args: argparse.Namespace) -> int:
    manifest = read_manifest(args.bundle)
    print(f"kind: {manifest.kind}")
    print(f"checksum: {manifest.checksum}")
    print("meta:")
    for key, value in sorted(manifest.meta.items()):
        print(f"  {key}: {value}")
    print("tensors:")
    for entry in manifest.tensors:
        print(
            f"  {entry.name}: shape={list(entry.shape)} dtype={entry.dtype} "
            f"offset={entry.offset} length={entry.length}"
        )
    violations: list[str] = []
    if manifest.kind == "bundle":
        bundle = load_bundle(args.bundle, validate=False)
        violations = validate_bundle(bundle)
        if violations:
            print("validation:")
            for v in violations:
                print(f"  VIOLATION {v}")
        else:
            print("validation: ok (0 violations)")
    print(
        _record(
            {
                "record": "inspect",
                "bundle": args.bundle,
                "manifest": manifest.as_dict(),
                "violations": violations,
            }
        )
    )
    return 1 if violations else 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
