"""Command-line entry point: ``evplug simulate|campaign|analyze|compare|recount|config``.

Exit status is 0 on success, 1 on a runtime or validation error and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import UnclassifiableError, analyze_oscillation, delta_stats
from .campaign import (CampaignReport, TrialConfig, compare_strategies, format_comparison,
                       load_results, run_campaign, run_trial, success_from_traces)
from .config import ConfigError, dump_config, load_config
from .trace import TraceFormatError, load_trace, save_trace


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evplug", description="EV charger insertion simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="TOML config path, or 'default' for built-in values "
                                        "(falls back to $EVPLUG_CONFIG)")
        return p

    p = with_config(sub.add_parser("simulate", help="run one trial"))
    p.add_argument("--strategy", required=True, help="LR, UD, SP or Admittance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="trace CSV path")
    p.add_argument("--result", help="trial result JSON path (default: alongside the trace)")

    p = with_config(sub.add_parser("campaign", help="compare strategies over seeded trials"))
    p.add_argument("--trials", type=int, help="trials per strategy")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--text", help="plain-text table path (printed when omitted)")
    p.add_argument("--traces", help="directory to store every trial trace")

    p = sub.add_parser("analyze", help="wave statistics and strategy of trace files")
    p.add_argument("traces", nargs="+")
    p.add_argument("--json", action="store_true", help="print JSON lines")

    p = sub.add_parser("compare", help="ANOVA and paired t-tests from report files")
    p.add_argument("reports", nargs="+")

    p = sub.add_parser("recount", help="success rates recounted from stored traces")
    p.add_argument("directory")

    with_config(sub.add_parser("config", help="print the effective configuration"))
    return ap


def _simulate(args) -> int:
    cfg = load_config(args.config)
    result, trace = run_trial(TrialConfig(args.strategy, cfg, args.seed))
    out = Path(args.out)
    save_trace(trace, out)
    res_path = Path(args.result) if args.result else out.with_suffix(".json")
    res_path.write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    status = "success" if result.success else "failure"
    print(f"{result.strategy} seed {result.seed}: {status}, plug-in {result.plugin_time:.2f} s, "
          f"plug-out {result.plugout_time:.2f} s")
    print(f"wrote {out} and {res_path}")
    return 0


def _campaign(args) -> int:
    cfg = load_config(args.config)
    rep: CampaignReport = run_campaign(cfg, args.trials, args.seed, args.workers, args.traces)
    if args.out:
        Path(args.out).write_text(rep.to_json() + "\n")
    text = rep.format_text()
    if args.text:
        Path(args.text).write_text(text)
    if args.text is None or args.out is None:
        print(text, end="")
    return 0


def _analyze(args) -> int:
    for path in args.traces:
        trace = load_trace(path)
        pin = trace.segment("plugin")
        try:
            cls = analyze_oscillation(pin)
            kind = cls.kind.value
        except UnclassifiableError as exc:
            cls, kind = None, f"unclassifiable ({exc})"
        stats = delta_stats(trace)
        if args.json:
            print(json.dumps({"trace": str(path), "classification": kind,
                              "period": cls.period if cls else None,
                              "deltas": stats.to_dict()}))
            continue
        print(f"{path}: classification {kind}")
        for name, value in stats.to_dict().items():
            print(f"  {name:<16}{value:10.3f}")
    return 0


def _compare(args) -> int:
    for path in args.reports:
        anova, ttests = compare_strategies(load_results(path))
        print(f"{path}:")
        print(format_comparison(anova, ttests))
    return 0


def _recount(args) -> int:
    for name, rate in success_from_traces(args.directory).items():
        print(f"{name}: {100 * rate:.1f}%")
    return 0


def _config(args) -> int:
    print(dump_config(load_config(args.config)), end="")
    return 0


COMMANDS = {"simulate": _simulate, "campaign": _campaign, "analyze": _analyze,
            "compare": _compare, "recount": _recount, "config": _config}


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:   # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, TraceFormatError, UnclassifiableError, ValueError, OSError) as exc:
        print(f"evplug: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
