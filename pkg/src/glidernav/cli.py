"""Command-line entry points.

Exit codes: 0 success/arrived, 1 mission ended without arriving,
2 config error, 3 connectivity/auth failure, 4 planner blocked.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import flowcmp as flowcmp_mod
from . import flowfield, planning
from .config import ConfigError, load_config, make_flow_source
from .dockserver import AuthError, DockserverError, serve_mock
from .formats import parse_surfacing_log
from .geo import CoordinateError, parse_latlon
from .mission import ARRIVED, TRANSITS_DONE, run_remote, run_sim

EXIT_OK = 0
EXIT_INCOMPLETE = 1
EXIT_CONFIG = 2
EXIT_CONNECTIVITY = 3
EXIT_BLOCKED = 4


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="glidernav", description="Flow-aware glider navigation toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="run a simulated closed-loop mission")
    p_sim.add_argument("config")
    p_sim.add_argument("--out", default="mission_out", help="output directory")
    p_sim.add_argument("--seed", type=int, default=None)

    p_rem = sub.add_parser("remote", help="run the pilot loop against a dockserver")
    p_rem.add_argument("config")
    p_rem.add_argument("--checkpoint", default=None)
    p_rem.add_argument("--polls", type=int, default=None, help="stop after N polls")

    p_plan = sub.add_parser("plan", help="plan a path across the flow field")
    p_plan.add_argument("config")
    p_plan.add_argument("--start", required=True, help="latNMEA,lonNMEA")
    p_plan.add_argument("--goal", required=True, help="latNMEA,lonNMEA")
    p_plan.add_argument("--out", default="plan.csv")

    p_cmp = sub.add_parser("flowcmp", help="compare glider/model/fused flow")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--events", required=True, help="surfacing log file")
    p_cmp.add_argument("--out-csv", default="flowcmp.csv")
    p_cmp.add_argument("--out-svg", default="flowcmp.svg")

    p_gen = sub.add_parser("gen-flow", help="write an analytic field to a GFLOW file")
    p_gen.add_argument("kind", choices=["uniform", "rotating_tide", "gyre"])
    p_gen.add_argument("params", nargs="*", type=float)
    p_gen.add_argument("--sw", required=True, help="south-west corner latNMEA,lonNMEA")
    p_gen.add_argument("--ne", required=True, help="north-east corner latNMEA,lonNMEA")
    p_gen.add_argument("--nx", type=int, default=8)
    p_gen.add_argument("--ny", type=int, default=8)
    p_gen.add_argument("--t0", type=float, default=0.0)
    p_gen.add_argument("--dt", type=float, default=3600.0)
    p_gen.add_argument("--nt", type=int, default=24)
    p_gen.add_argument("--out", required=True)

    p_mock = sub.add_parser("mock-dockserver", help="serve glider file trees")
    p_mock.add_argument("--root", required=True)
    p_mock.add_argument("--listen", default="127.0.0.1:7700")
    p_mock.add_argument("--token", required=True)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AuthError as exc:
        print(f"auth error: {exc}", file=sys.stderr)
        return EXIT_CONNECTIVITY
    except DockserverError as exc:
        print(f"connectivity error: {exc}", file=sys.stderr)
        return EXIT_CONNECTIVITY
    except CoordinateError as exc:
        print(f"coordinate error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "sim":
        return _cmd_sim(args)
    if args.command == "remote":
        return _cmd_remote(args)
    if args.command == "plan":
        return _cmd_plan(args)
    if args.command == "flowcmp":
        return _cmd_flowcmp(args)
    if args.command == "gen-flow":
        return _cmd_gen_flow(args)
    if args.command == "mock-dockserver":
        return _cmd_mock(args)
    raise AssertionError(args.command)


def _cmd_sim(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    report = run_sim(cfg, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_bytes(report.trajectory_csv())
    (out / "events.log").write_bytes(report.event_log())
    gotos = out / "gotos"
    gotos.mkdir(exist_ok=True)
    for i, data in enumerate(report.gotos):
        (gotos / f"goto_{i:04d}.gt").write_bytes(data)
    if report.events:
        model = make_flow_source(
            cfg.deployment.model_flow or cfg.deployment.flow, cfg.base_dir
        )
        fusion = cfg.fusion_state()
        from .fusion import update_residual

        for ev in report.events:
            fusion = update_residual(fusion, ev, model)
        table = flowcmp_mod.build_table(
            report.events, model, fusion, cfg.deployment.shore_bearing
        )
        (out / "flowcmp.csv").write_bytes(flowcmp_mod.emit_csv(table))
        (out / "flowcmp.svg").write_bytes(flowcmp_mod.emit_svg(table))
    (out / "report.txt").write_text(report.summary() + "\n")
    print(report.summary())
    if report.outcome in (ARRIVED, TRANSITS_DONE):
        return EXIT_OK
    return EXIT_INCOMPLETE


def _cmd_remote(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    run_remote(cfg, checkpoint_path=args.checkpoint, max_polls=args.polls)
    return EXIT_OK


def _cmd_plan(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if cfg.planner.bbox_sw is None or cfg.planner.bbox_ne is None:
        raise ConfigError("planner.bbox_sw", "planning needs planner.bbox_sw/bbox_ne")
    grid = planning.PlanGrid.from_bbox(
        cfg.planner.bbox_sw, cfg.planner.bbox_ne, cfg.planner.cell, cfg.deployment.t0
    )
    flow = make_flow_source(cfg.deployment.flow, cfg.base_dir)
    result = planning.astar_plan(
        parse_latlon(args.start),
        parse_latlon(args.goal),
        flow,
        grid,
        cfg.glider.speed,
        bucket_s=cfg.planner.dt_plan,
    )
    if result.blocked:
        print("planner: goal unreachable (blocked)", file=sys.stderr)
        return EXIT_BLOCKED
    Path(args.out).write_bytes(planning.path_csv(result))
    print(
        f"planned {len(result.path)} cells, {result.total_time:.0f} s, "
        f"{result.expanded_nodes} nodes expanded -> {args.out}"
    )
    return EXIT_OK


def _cmd_flowcmp(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    log_path = Path(args.events)
    if not log_path.is_file():
        raise ConfigError("events", f"event log {log_path} does not exist")
    events, malformed = parse_surfacing_log(log_path.read_bytes())
    if not events:
        print("flowcmp: no surfacing events in log", file=sys.stderr)
        return EXIT_CONFIG
    model = make_flow_source(
        cfg.deployment.model_flow or cfg.deployment.flow, cfg.base_dir
    )
    from .fusion import update_residual

    fusion = cfg.fusion_state()
    for ev in events:
        fusion = update_residual(fusion, ev, model)
    table = flowcmp_mod.build_table(events, model, fusion, cfg.deployment.shore_bearing)
    Path(args.out_csv).write_bytes(flowcmp_mod.emit_csv(table))
    Path(args.out_svg).write_bytes(flowcmp_mod.emit_svg(table))
    alerts = flowcmp_mod.detect_strong_flow(table)
    print(
        f"{len(table.rows)} rows, {len(alerts)} strong-flow alerts, "
        f"{malformed} malformed records -> {args.out_csv}, {args.out_svg}"
    )
    return EXIT_OK


def _cmd_gen_flow(args: argparse.Namespace) -> int:
    sw = parse_latlon(args.sw)
    ne = parse_latlon(args.ne)
    if args.kind == "uniform":
        src = flowfield.analytic("uniform", u=args.params[0], v=args.params[1])
    elif args.kind == "rotating_tide":
        src = flowfield.analytic(
            "rotating_tide",
            amplitude=args.params[0],
            period_s=args.params[1],
            phase_rad=args.params[2] if len(args.params) > 2 else 0.0,
        )
    else:
        src = flowfield.analytic(
            "gyre",
            center_lat=args.params[0],
            center_lon=args.params[1],
            omega_rad_s=args.params[2],
            r_max_m=args.params[3],
        )
    grid = flowfield.grid_from_source(
        src, sw, ne, args.nx, args.ny, args.t0, args.dt, args.nt
    )
    Path(args.out).write_bytes(flowfield.save_grid(grid))
    print(f"wrote {args.nx}x{args.ny}x{args.nt} grid -> {args.out}")
    return EXIT_OK


def _cmd_mock(args: argparse.Namespace) -> int:
    root = Path(args.root)
    root.mkdir(parents=True, exist_ok=True)
    server = serve_mock(root, args.listen, args.token)
    host, port = server.address
    print(f"mock dockserver on {host}:{port}, root {root} (Ctrl-C to stop)")
    try:
        import threading

        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
