"""Command-line front end.

Exit status: 0 success, 2 configuration or usage error, 3 infeasible
deployment, 4 internal invariant breach.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .capacity import PhiEvaluator
from .dgv import MAX_EXHAUSTIVE_PATCHES, exhaustive_dgv, gssa
from .errors import ConfigError, ConstraintViolation, InvalidScenarioError
from .geometry import region_of
from .propagation import bias_loss_ratio
from .rpp import VirtualGroupSet
from .scenario import MODES
from .simrun import (ScenarioConfig, build_scenario, load_config, run, sweep, with_overrides, write_csv,
                     write_manifest, write_sweep, write_trace, SWEEP_AXES)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _load(args) -> ScenarioConfig:
    raw = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["capacity_mode"] = args.mode
    if getattr(args, "zeta", None) is not None:
        overrides["zeta"] = args.zeta
    if getattr(args, "team_size", None) is not None:
        overrides["rct.team_size"] = args.team_size
    return build_scenario(with_overrides(raw, overrides))


def cmd_validate(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    print(f"ok: {args.config}")
    print(f"  road {sc.road_length:g} m, {sc.n_steps} steps of {sc.dt:.6g} s, mode {sc.capacity_mode}")
    print(f"  {sc.array.count} patches, {len(sc.interferers)} interferers, {len(sc.sus)} users")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    trace = run(cfg)
    write_trace(trace, out, cfg.probe_x)
    write_manifest(out, cfg, {"command": "run"})
    s = trace.summary(cfg.probe_x)
    print(f"groups: {s['groups'] or '(none)'}")
    print(f"phi_tar {s['phi_tar']:.6f}  phi_sen {s['phi_sen']:.6f}  phi {s['phi']:.6f}")
    print(f"mean rank {s['mean_rank_org']:.3f} -> {s['mean_rank_enh']:.3f}, "
          f"mean SE {s['mean_se_org']:.3f} -> {s['mean_se_enh']:.3f} bit/s/Hz")
    for w in trace.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {out}/trace.csv, su_trace.csv, summary.csv, result.json, manifest.json")
    return EXIT_OK


def _parse_values(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--values must be comma-separated integers, got {text!r}") from exc


def _parse_seeds(text: str | None) -> list[int] | None:
    if text is None:
        return None
    if ".." in text:
        a, b = text.split("..", 1)
        try:
            return list(range(int(a), int(b) + 1))
        except ValueError as exc:
            raise UsageError(f"--seeds range must look like 0..99, got {text!r}") from exc
    return _parse_values(text)


def cmd_sweep(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise UsageError(f"unknown --axis {args.axis!r}; choose from {', '.join(sorted(SWEEP_AXES))}")
    cfg = _load(args)
    values = _parse_values(args.values)
    if not values:
        raise UsageError("--values needs at least one value")
    seeds = _parse_seeds(args.seeds)
    rows = sweep(cfg.raw, args.axis, values, seeds)
    out = Path(args.out)
    write_sweep(rows, out)
    write_manifest(out, cfg, {"command": "sweep", "axis": args.axis, "values": values,
                              "seeds": seeds if seeds is not None else [cfg.seed]})
    for r in rows:
        print(f"{args.axis}={r['value']}: phi {r['phi_mean']:.6f}  SE {r['mean_se_org_mean']:.3f} -> "
              f"{r['mean_se_enh_mean']:.3f}  SU loss {r['mean_su_se_loss_mean']:.4f}")
    print(f"wrote {out}/sweep.csv")
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    if args.oracle and sc.array.count > MAX_EXHAUSTIVE_PATCHES:
        raise UsageError(
            f"--oracle refused: {sc.array.count} patches would mean 2^{sc.array.count} candidate masks; "
            f"the exhaustive search is limited to {MAX_EXHAUSTIVE_PATCHES} patches")
    ev = PhiEvaluator(sc, args.mode if args.mode != "hybrid" else None, cfg.zeta)
    res = gssa(sc, evaluator=ev)
    _print_solution("greedy", res.groups, res.ratios)
    if args.oracle:
        groups, ratios = exhaustive_dgv(sc, evaluator=ev)
        _print_solution("exhaustive", groups, ratios)
        print(f"gap {ratios.joint - res.phi:.12g}")
    return EXIT_OK


def _print_solution(name: str, groups: VirtualGroupSet, r) -> None:
    text = " ".join(f"[{a},{b}]" for a, b in groups.bounds()) or "(none)"
    print(f"{name}: {text}")
    print(f"  phi_tar {r.tv_ratio:.12g}  phi_sen {r.su_ratio:.12g}  phi {r.joint:.12g}")


def cmd_geometry(args) -> int:
    if not args.grid_step > 0:
        raise UsageError("--grid-step must be positive")
    cfg = _load(args)
    sc = cfg.scenario
    groups = (VirtualGroupSet.from_bounds(cfg.groups, sc.array.count) if cfg.groups is not None
              else sc.initial_group_set())
    areas = sc.areas(groups)
    n = int(np.floor(sc.road_length / args.grid_step + 1e-9))
    xs = [min(k * args.grid_step, sc.road_length) for k in range(n + 1)]
    if xs[-1] < sc.road_length:
        xs.append(sc.road_length)
    rows = []
    for x in xs:
        owners = [i for i, a in enumerate(areas) if a.contains(x)]
        labels = {a.label(x) for a in areas}
        label = "DRA" if "DRA" in labels else "IDRA" if "IDRA" in labels else "GAP"
        rows.append((x, bias_loss_ratio(x, [(a, True) for a in areas]), label, region_of(x, sc.road_length),
                     ";".join(map(str, owners))))
    header = ("x", "bias_ratio", "label", "region", "groups")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "geometry.csv", header, rows)
        write_manifest(out, cfg, {"command": "geometry", "grid_step": args.grid_step})
        print(f"wrote {out}/geometry.csv")
    else:
        write_csv(sys.stdout, header, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="retf", description="Reflecting-panel vehicular link simulator.")
    p.add_argument("--version", action="version", version=f"retf {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False):
        sp.add_argument("--config", required=True, help="scenario YAML file")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        if out_required:
            sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("validate", help="check a scenario file and list every problem")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("run", help="simulate one drive and write the trace")
    common(sp, True)
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--zeta", type=float)
    sp.add_argument("--team-size", type=int, help="collaborating groups per team")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="repeat runs over one parameter axis")
    common(sp, True)
    sp.add_argument("--axis", required=True, help="rctTeamSize, suCount or antennaCount")
    sp.add_argument("--values", required=True, help="comma-separated integers")
    sp.add_argument("--seeds", help="comma-separated seeds or a range like 0..99")
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--zeta", type=float)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("optimize", help="choose the panel groups only")
    common(sp)
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--zeta", type=float)
    sp.add_argument("--oracle", action="store_true", help="also run the exhaustive search (small arrays)")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("geometry", help="tabulate reflection areas along the road")
    common(sp)
    sp.add_argument("--grid-step", type=float, default=1.0, help="sample spacing in metres")
    sp.add_argument("--out", help="output directory (default: print CSV)")
    sp.set_defaults(func=cmd_geometry)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConstraintViolation, InvalidScenarioError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001 - anything else is a bug, reported with its own status
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
