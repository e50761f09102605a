"""Command-line entry point: ``widths``, ``conformance`` and ``campaign``.

Configuration is one JSON object; every key is optional::

    {
      "design": "relobi",                 # or "obi"
      "bus": {"addr_width": 32, ...},     # BusConfig fields
      "plan": {"tmr_signals": [...], "groups": [{"name": ..., "members": [...]}]},
      "topology": {"n_managers": 6, "n_subordinates": 8, "pipeline_in": 1, ...},
      "txns_per_manager": 1000, "n_faults": 10000, "seed": 1,
      "fault_classes": ["FLOP", "PORT"], "recovery": "inline",
      "sampling": "random", "exhaustive_cycles": 16, "jobs": 1
    }

Command-line flags override file values.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .codec import plan_width
from .conformance import run_conformance
from .faults import CampaignConfig, run_campaign
from .obi import total_width

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def load_config(path: str | None, overrides: dict | None = None) -> CampaignConfig:
    data: dict = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"{path}: file not found") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = CampaignConfig.from_dict(data)
        cfg.grouping()  # surface plan errors early
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"{path or '<defaults>'}: {e}") from e
    return cfg


def width_report(cfg: CampaignConfig) -> dict:
    """Width accounting of the protected plan, whatever ``design`` says."""
    base = total_width(cfg.bus)
    plan = replace(cfg, design="relobi").grouping()
    pw = plan_width(plan)
    tmr = (plan.lanes - 1) * len(plan.tmr_signals)
    ecc = sum(g.r for g in plan.groups)
    return {
        "total_width": base,
        "plan_width": pw,
        "tmr_overhead": tmr,
        "ecc_overhead": ecc,
        "increase_pct": round(100.0 * (pw - base) / base, 2),
        "groups": [{"name": g.name, "members": list(g.members), "k": g.k, "r": g.r} for g in plan.groups],
        "tmr_signals": list(plan.tmr_signals),
    }


def cmd_widths(cfg: CampaignConfig, output: str | None = None) -> int:
    rep = width_report(cfg)
    print(f"OBI bus width        {rep['total_width']:>5} bits")
    print(f"relOBI bus width     {rep['plan_width']:>5} bits")
    print(f"  TMR overhead       {rep['tmr_overhead']:>5} bits ({', '.join(rep['tmr_signals'])})")
    print(f"  ECC check bits     {rep['ecc_overhead']:>5} bits")
    for g in rep["groups"]:
        print(f"    {g['name']:<8} k={g['k']:<3} r={g['r']}  [{', '.join(g['members'])}]")
    print(f"increase             {rep['increase_pct']:.2f}% (~{round(rep['increase_pct'])}%)")
    if output:
        Path(output).write_text(json.dumps(rep, indent=2) + "\n")
    return EXIT_OK


def cmd_conformance(cfg: CampaignConfig, seeds=(1, 2, 3)) -> int:
    print(f"{'':<6}{'property':<40} {'checked':>9}")
    results = run_conformance(txns=cfg.txns_per_manager, seeds=seeds, topology=cfg.topology,
                              progress=lambda r: print(r.line(), flush=True))
    ok = all(r.passed for r in results)
    print("conformance:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_campaign(cfg: CampaignConfig, output: str | None, csv_path: str | None = None,
                 quiet: bool = False) -> int:
    def progress(done, total):
        if not quiet:
            print(f"  {done}/{total} faults", file=sys.stderr, flush=True)

    rep = run_campaign(cfg, progress)
    print(rep.table())
    print(f"golden run: {rep.golden_cycles} cycles; hangs: {rep.hangs}; runtime {rep.runtime_s:.1f} s")
    try:
        if output:
            Path(output).write_text(rep.to_json())
        if csv_path:
            with open(csv_path, "w", newline="") as f:
                csv.writer(f).writerows(rep.csv_rows())
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    if cfg.design == "relobi" and rep.incorrect:
        print(f"FAIL: {rep.incorrect} faults caused incorrect interface behavior", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relobi", description="OBI / relOBI crossbar simulator and fault campaigns")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", help="JSON configuration file")
        sp.add_argument("--design", choices=("obi", "relobi"))
        sp.add_argument("--txns", type=int, help="transactions per manager")
        sp.add_argument("--seed", type=int)

    w = sub.add_parser("widths", help="bus width accounting")
    common(w)
    w.add_argument("-o", "--output", help="write the width report as JSON")

    c = sub.add_parser("conformance", help="run the property suites")
    common(c)
    c.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])

    k = sub.add_parser("campaign", help="fault-injection campaign")
    common(k)
    k.add_argument("-o", "--output", help="report JSON path")
    k.add_argument("--csv", help="per-fault CSV log path")
    k.add_argument("--faults", type=int, help="number of sampled faults")
    k.add_argument("--fault-class", choices=("flop", "port", "both"))
    k.add_argument("--recovery", choices=("inline", "abort-retry"))
    k.add_argument("--sampling", choices=("random", "exhaustive"))
    k.add_argument("--jobs", type=int)
    k.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    ov = {"design": args.design, "txns_per_manager": args.txns, "seed": args.seed}
    if args.command == "campaign":
        fc = {"flop": ["FLOP"], "port": ["PORT"], "both": ["FLOP", "PORT"]}.get(args.fault_class)
        ov.update(n_faults=args.faults, fault_classes=fc, recovery=args.recovery,
                  sampling=args.sampling, jobs=args.jobs)
    try:
        cfg = load_config(args.config, ov)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "widths":
        return cmd_widths(cfg, args.output)
    if args.command == "conformance":
        return cmd_conformance(cfg, tuple(args.seeds))
    return cmd_campaign(cfg, args.output, args.csv, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
