"""Command-line entry point: ``neuroage {gen-trace,simulate,sweep,validate-config}``.

Exit codes: 0 success, 2 configuration error, 3 input/output data error,
4 internal invariant violation. Failures print one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional, Sequence, Tuple

from . import config as cfg
from .harness import InvariantViolation, RunError, run, sweep
from .output import OutputSchemaError, append_events, append_results, write_figures
from .scheduler import ConfigError
from .trace import TraceError, generate_poisson, save_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--seed", help="workload seed (unsigned 64-bit)")

    parser = argparse.ArgumentParser(
        prog="neuroage",
        description="Simulate NBTI/TDDB aging of neuromorphic neurons under periodic destress.",
        epilog="Any config key may also be given directly, e.g. --workload.class dense.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-trace", parents=[common], help="write a synthetic spike trace CSV")
    sub.add_parser("simulate", parents=[common], help="run one configuration")
    sub.add_parser("sweep", parents=[common], help="run the tdsi x temperature grid")
    sub.add_parser("validate-config", parents=[common], help="resolve and check a configuration")
    return parser


def _dotted_overrides(extra: Sequence[str]) -> List[Tuple[str, str]]:
    """Turn leftover ``--key value`` / ``--key=value`` tokens into overrides."""
    out = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok.split("=", 1)[0]:
            raise ConfigError(f"unrecognized argument {tok!r}")
        body = tok[2:]
        if "=" in body:
            out.append(cfg.parse_override(body))
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            out.append(cfg.parse_override(f"{body}={extra[i + 1]}"))
            i += 2
    return out


def _resolve(args, extra):
    overrides = [cfg.parse_override(item) for item in args.overrides]
    overrides += _dotted_overrides(extra)
    if args.seed is not None:
        overrides.append(("workload.seed", args.seed))
    return cfg.resolve(args.config, overrides)


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def cmd_gen_trace(values, out_dir: str) -> int:
    spec = cfg.workload_spec(values)
    trains = generate_poisson(spec)
    path = os.path.join(_ensure_out(out_dir), "trace.csv")
    save_trace(trains.values(), path)
    spikes = sum(len(t) for t in trains.values())
    rate = spikes / (len(trains) * spec.horizon)
    print(f"wrote {path}: {len(trains)} neurons, {spikes} spikes, mean rate {rate:.4f} spikes/ms")
    return EXIT_OK


def cmd_simulate(values, out_dir: str) -> int:
    config = cfg.run_config(values)
    report = run(config)
    out = _ensure_out(out_dir)
    append_results(os.path.join(out, "results.csv"), [report])
    append_events(os.path.join(out, "events.jsonl"), [report])
    s = report.summary
    print(
        f"{report.run_id}: nbti={s.nbti_aging_total:.6g} tddb={s.tddb_aging_total:.6g} "
        f"isi_distortion={s.isi_distortion:.6g} ms disorder={s.disorder:.6g} overhead={s.overhead:.6g}"
    )
    return EXIT_OK


def cmd_sweep(values, out_dir: str) -> int:
    config = cfg.sweep_config(values)
    reports = sweep(config)
    out = _ensure_out(out_dir)
    append_results(os.path.join(out, "results.csv"), reports)
    append_events(os.path.join(out, "events.jsonl"), reports, detail=False)
    for path in write_figures(out, reports):
        print(f"wrote {path}")
    print(f"{len(reports)} cells written to {os.path.join(out, 'results.csv')}")
    return EXIT_OK


def cmd_validate_config(values, out_dir: str) -> int:
    cfg.sweep_config(values)
    for key in sorted(values):
        value = values[key]
        if isinstance(value, tuple):
            value = ",".join(repr(v) for v in value)
        print(f"{key} = {'' if value is None else value}")
    return EXIT_OK


COMMANDS = {
    "gen-trace": cmd_gen_trace,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "validate-config": cmd_validate_config,
}


def _fail(code: int, kind: str, exc: BaseException) -> int:
    print(json.dumps({"error": kind, "exit_code": code, "message": str(exc)}), file=sys.stderr)
    return code


def _classify(exc: BaseException) -> Tuple[int, str]:
    if isinstance(exc, RunError):
        exc = exc.cause
    if isinstance(exc, InvariantViolation):
        return EXIT_INTERNAL, "invariant"
    if isinstance(exc, (TraceError, OutputSchemaError, OSError)):
        return EXIT_DATA, "data"
    if isinstance(exc, (ConfigError, ValueError)):
        return EXIT_CONFIG, "config"
    return EXIT_INTERNAL, "internal"


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        values = _resolve(args, extra)
        return COMMANDS[args.command](values, args.out)
    except Exception as exc:
        code, kind = _classify(exc)
        return _fail(code, kind, exc)


if __name__ == "__main__":
    sys.exit(main())
