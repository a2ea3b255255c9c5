"""Command-line surface.

Subcommands: branching-ratio, enhance, protocol, bsm, optimize, sweep.
Each writes delimited output (CSV or JSON) with an embedded provenance
block; --plot additionally renders the matching figure next to the data.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bsm import NodePair, simulate_ion_ion, sweep_enhancement
from .config import RunConfig, resolve_config
from .engine import Strategy, branching_ratio_curve
from .errors import ConfigError, IonmuxError
from .optimize import OptimizationProblem, solve_dp, solve_exhaustive
from .protocol import simulate_rates
from .report import provenance_block, write_csv, write_json
from .timing import EnhancementCurve, LinkParams, t_eff


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="named preset from the bundled data files")
    p.add_argument("--config", help="path to a config file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--plot", action="store_true",
                   help="also render a figure next to the data file")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ionmux",
        description="Multiplexed trapped-ion entanglement rate simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("branching-ratio",
                       help="effective branching ratio vs pulse number")
    b.add_argument("--strategy", default="every",
                   choices=("none", "every", "paper-3m", "paper-1km"))
    b.add_argument("--n", type=int, default=200)
    b.add_argument("--window", default="inf",
                   help="detection window, e.g. '13 ns' or 'inf'")
    _common_flags(b)

    e = sub.add_parser("enhance", help="timing-only enhancement curve")
    _common_flags(e)

    r = sub.add_parser("protocol", help="scenario rate report")
    _common_flags(r)

    m = sub.add_parser("bsm", help="two-node coincidence enhancement sweep")
    m.add_argument("--windows", action="store_true",
                   help="emit the per-window outcome table instead of the sweep")
    _common_flags(m)

    o = sub.add_parser("optimize", help="search pump-insertion strategies")
    o.add_argument("--n", type=int, default=12)
    o.add_argument("--objective", default="total_emission",
                   choices=("total_emission", "emission_rate"))
    o.add_argument("--interval", default="200 ns")
    o.add_argument("--pump-duration", default="100 ns")
    o.add_argument("--window", default="inf")
    o.add_argument("--solver", default="auto",
                   choices=("auto", "exhaustive", "dp"))
    _common_flags(o)

    s = sub.add_parser("sweep", help="grid driver over a scenario axis")
    _common_flags(s)
    return p


def _parse_time(text: str, key: str) -> float:
    from .config import parse_quantity
    return parse_quantity(text, "time", key)


def _load(args) -> RunConfig:
    return resolve_config(preset=args.preset, config_path=args.config,
                          overrides=args.overrides, seed=args.seed,
                          output_format=args.format)


def _out(args, stem: str, fmt: str) -> Path:
    return Path(args.out) / f"{stem}.{fmt}"


def _emit(args, cfg: RunConfig, stem: str, columns, payload) -> Path:
    prov = provenance_block(cfg.canonical(), cfg.seed)
    if cfg.output_format == "json":
        path = _out(args, stem, "json")
        write_json(path, payload, prov)
    else:
        path = _out(args, stem, "csv")
        write_csv(path, columns, prov)
    return path


def cmd_branching_ratio(args) -> int:
    cfg = _load(args)
    window = _parse_time(args.window, "window") \
        if args.window != "inf" else math.inf
    strategy = Strategy.named(args.strategy, pulse_count=args.n, window=window)
    curve = branching_ratio_curve(strategy)
    pulses = list(range(1, len(curve) + 1))
    columns = {"pulses": pulses, "branching_ratio": list(curve)}
    payload = {"strategy": args.strategy, "pulses": pulses,
               "branching_ratio": list(curve)}
    path = _emit(args, cfg, "branching_ratio", columns, payload)
    if args.plot:
        from .plots import plot_branching_ratio
        plot_branching_ratio(pulses, curve, args.strategy,
                             path.with_suffix(".png"))
    print(f"wrote {path} (final BR {curve[-1]:.6f})")
    return 0


def _link_from_config(cfg: RunConfig) -> tuple:
    sc = cfg.scenario or {}
    link = sc.get("link", {})
    dt = sc.get("pulse_interval", 2e-6)
    base = LinkParams(L=link.get("length", 12000.0),
                      T_ovh=link.get("overhead", 50e-6),
                      dt=dt, N=1,
                      c_fiber=link.get("fiber_speed", 2.0e8))
    grid = (cfg.sweep or {}).get("grid") or list(range(1, 201))
    return base, grid


def cmd_enhance(args) -> int:
    cfg = _load(args)
    base, grid = _link_from_config(cfg)
    curve = EnhancementCurve.sample(base, grid)
    ns = [n for n, _ in curve.points]
    ms = [m for _, m in curve.points]
    teffs = [t_eff(replace(base, N=n)) for n in ns]
    columns = {"N": ns, "M": ms, "t_eff_s": teffs}
    payload = {"N": ns, "M": ms, "t_eff_s": teffs,
               "n_half": curve.n_half, "m_saturated": curve.m_saturated}
    path = _emit(args, cfg, "enhancement", columns, payload)
    if args.plot:
        from .plots import plot_enhancement
        plot_enhancement(ns, ms, curve.n_half, path.with_suffix(".png"))
    print(f"wrote {path} (N_0 = {curve.n_half:.3f})")
    return 0


def cmd_protocol(args) -> int:
    cfg = _load(args)
    spec = cfg.protocol_spec()
    report = simulate_rates(spec)
    modes = list(range(1, report.mode_count + 1))
    columns = {"mode": modes, "p_mode": list(report.per_mode_p)}
    payload = report.to_dict()
    path = _emit(args, cfg, f"protocol_{spec.name}", columns, payload)
    if cfg.output_format == "csv":
        # the scalar report always accompanies the per-mode table
        write_json(_out(args, f"protocol_{spec.name}", "json"), payload,
                   provenance_block(cfg.canonical(), cfg.seed))
    if args.plot:
        from .plots import plot_mode_profile
        plot_mode_profile(modes, report.per_mode_p, spec.name,
                          path.with_suffix(".png"))
    print(f"wrote {path} (rate {report.success_rate:.4g} /s, "
          f"M' = {report.M_prime:.3f})")
    return 0


def _node_pair(cfg: RunConfig) -> NodePair:
    spec = cfg.protocol_spec()
    return NodePair(spec_a=spec, spec_b=spec,
                    bsm_efficiency=cfg.bsm_efficiency)


def cmd_bsm(args) -> int:
    cfg = _load(args)
    pair = _node_pair(cfg)
    if args.windows:
        rep = simulate_ion_ion(pair)
        t = rep.table
        columns = {"mode": list(t.modes),
                   "heralded": list(t.heralded),
                   "both_emit": list(t.both_emit),
                   "one_emits": list(t.one_emits),
                   "terminated": list(t.terminated),
                   "continuing": list(t.continuing)}
        payload = {"windows": columns, **rep.to_dict()}
        path = _emit(args, cfg, "bsm_windows", columns, payload)
        print(f"wrote {path} (coincidence/round {rep.p_coincidence:.4g})")
        return 0
    sweep = cfg.sweep or {}
    axis = sweep.get("axis", "mode_count")
    grid = sweep.get("grid") or [1, 2, 4, 8, 12, 16, 24, 32]
    corrected, uncorrected = sweep_enhancement(pair, axis, grid)
    ns = [n for n, _ in corrected.points]
    columns = {"N": ns,
               "M_corrected": [v for _, v in corrected.points],
               "M_uncorrected": [v for _, v in uncorrected.points]}
    payload = {**columns, "n_half": corrected.n_half}
    path = _emit(args, cfg, "bsm_sweep", columns, payload)
    if args.plot:
        from .plots import plot_enhancement
        plot_enhancement(ns, columns["M_corrected"], corrected.n_half,
                         path.with_suffix(".png"),
                         extra={"timing only": columns["M_uncorrected"]})
    print(f"wrote {path} (peak enhancement "
          f"{max(columns['M_corrected']):.3f})")
    return 0


def cmd_optimize(args) -> int:
    cfg = _load(args)
    problem = OptimizationProblem(
        N=args.n, objective=args.objective,
        pulse_interval=_parse_time(args.interval, "interval"),
        pump_duration=_parse_time(args.pump_duration, "pump-duration"),
        window=_parse_time(args.window, "window")
        if args.window != "inf" else math.inf)
    if args.solver == "exhaustive" or (args.solver == "auto" and args.n <= 20):
        result = solve_exhaustive(problem)
    else:
        result = solve_dp(problem)
    pumps = [len(s.pump_after) for s, _ in result.frontier]
    values = [v for _, v in result.frontier]
    columns = {"pump_count": pumps, "value": values}
    payload = {
        "objective": args.objective,
        "best_pulses": result.best.pulse_count,
        "best_pump_after": sorted(result.best.pump_after),
        "best_value": result.value,
        "frontier_pump_count": pumps,
        "frontier_value": values,
    }
    path = _emit(args, cfg, "optimize", columns, payload)
    if cfg.output_format == "csv":
        write_json(_out(args, "optimize", "json"), payload,
                   provenance_block(cfg.canonical(), cfg.seed))
    if args.plot:
        from .plots import plot_frontier
        plot_frontier(pumps, values, args.objective, path.with_suffix(".png"))
    print(f"wrote {path} (best value {result.value:.6g}, pumps after "
          f"{sorted(result.best.pump_after)})")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    sweep = cfg.sweep
    if not sweep:
        raise ConfigError("sweep subcommand needs a sweep block "
                          "(sweep.axis, sweep.grid)")
    axis = sweep.get("axis", "mode_count")
    grid = sweep["grid"]
    spec = cfg.protocol_spec()
    rows = []
    for g in grid:
        if axis == "mode_count":
            s = spec.per_ion_strategy
            pumps = frozenset(i for i in s.pump_after if i <= g) \
                if s.pump_after != frozenset(range(1, s.pulse_count + 1)) \
                else frozenset(range(1, g + 1))
            variant = replace(spec, per_ion_strategy=Strategy(
                g, pumps, s.window))
        else:
            variant = replace(spec, ions=g, shuttle_plan=None)
        rows.append(simulate_rates(variant))
    columns = {
        "grid": list(grid),
        "N": [r.mode_count for r in rows],
        "M": [r.M for r in rows],
        "M_prime": [r.M_prime for r in rows],
        "p_round": [r.p_round for r in rows],
        "success_rate_per_s": [r.success_rate for r in rows],
        "eta_link": [r.eta_link for r in rows],
    }
    payload = dict(columns)
    path = _emit(args, cfg, "sweep", columns, payload)
    if args.plot:
        from .plots import plot_enhancement
        plot_enhancement(columns["N"], columns["M_prime"], math.inf,
                         path.with_suffix(".png"))
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "branching-ratio": cmd_branching_ratio,
    "enhance": cmd_enhance,
    "protocol": cmd_protocol,
    "bsm": cmd_bsm,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except IonmuxError as exc:
        record = {"error": {"kind": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
