"""Command-line entry points: serve, run, bench, to-csv.

Exit codes: 0 success, 2 scenario/configuration error, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
import time

from .errors import LbsteerError, ScenarioError


def _parse_bind(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"bind address must be host:port, got {text!r}")
    return host, int(port)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lbsteer",
                                description="Steerable lattice-Boltzmann flow simulator")
    sub = p.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the steering server")
    serve.add_argument("--scenario", help="scenario file providing initial geometry")
    serve.add_argument("--bind-tcp", type=_parse_bind, default=("127.0.0.1", 7070),
                       metavar="HOST:PORT")
    serve.add_argument("--bind-ws", type=_parse_bind, default=("127.0.0.1", 7071),
                       metavar="HOST:PORT")
    serve.add_argument("--max-frame-mb", type=int, default=64)
    serve.add_argument("--stats-period", type=float, default=1.0)
    serve.add_argument("--threads", type=int, default=1)
    serve.add_argument("--autostart", action="store_true",
                       help="start stepping immediately instead of waiting for START")

    run = sub.add_parser("run", help="run a scenario headless and dump frames")
    run.add_argument("--scenario", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--iterations", type=int, default=None,
                     help="override the scenario's step count")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--threads", type=int, default=1)

    bench = sub.add_parser("bench", help="measure iteration throughput")
    bench.add_argument("--scenario", required=True)
    bench.add_argument("--seconds", type=float, default=5.0)
    bench.add_argument("--warmup", type=int, default=50)
    bench.add_argument("--threads", type=int, default=1)
    bench.add_argument("--json", action="store_true", dest="as_json")

    csv = sub.add_parser("to-csv", help="convert a dumped .f32 frame to CSV")
    csv.add_argument("frame", help="path to a .f32 frame file")
    csv.add_argument("-o", "--out", default=None)
    return p


def _load(path: str):
    from .scenario import load_scenario

    try:
        return load_scenario(path)
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        sys.exit(2)
    except ScenarioError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        sys.exit(2)


def cmd_serve(args) -> int:
    import numba

    from .core import FluidParams
    from .engine import CmdControl, SteeringEngine
    from .scenario import build_simulation
    from .server import SteeringServer

    if args.threads > 1:
        numba.set_num_threads(args.threads)
    sim = None
    params = FluidParams()
    if args.scenario:
        scn = _load(args.scenario)
        sim, repairs = build_simulation(scn, parallel=args.threads > 1)
        params = sim.params
        if repairs:
            print(f"geometry auto-repair converted {repairs} cells to interface")
    engine = SteeringEngine(sim=sim, params=params, stats_period=args.stats_period,
                            parallel=args.threads > 1,
                            max_frame_bytes=args.max_frame_mb * 1024 * 1024)
    if args.autostart and sim is not None:
        engine.submit(CmdControl("start"))
    server = SteeringServer(engine, bind_tcp=args.bind_tcp, bind_ws=args.bind_ws)
    server.start()
    print(f"lbsteer serving tcp on {args.bind_tcp[0]}:{server.tcp_port} "
          f"and ws on {args.bind_ws[0]}:{server.ws_port}")
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        server.stop()
    return 0


def cmd_run(args) -> int:
    from .runner import run_headless

    scn = _load(args.scenario)
    try:
        report = run_headless(scn, args.out, iterations=args.iterations,
                              threads=args.threads, seed=args.seed)
    except LbsteerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(report, indent=2, default=str))
    if not report.get("ok", False):
        return 3
    return 0


def cmd_bench(args) -> int:
    from .runner import bench

    scn = _load(args.scenario)
    report = bench(scn, seconds=args.seconds, warmup=args.warmup, threads=args.threads)
    if args.as_json:
        print(json.dumps(report, indent=2))
    else:
        hw = report["hardware"]
        print(f"scenario : {report['scenario'] or args.scenario}")
        print(f"lattice  : {report['lattice']}  dims {report['dims']}  "
              f"{report['cells']} cells")
        print(f"hardware : {hw['cpu']} ({hw['logical_cores']} cores, "
              f"{hw['threads_used']} used)")
        print(f"timed    : {report['iterations_timed']} iterations "
              f"(+{report['warmup_iterations']} warmup)")
        print(f"mean     : {report['mean_it_per_sec']:.2f} it/s")
        print(f"median   : {report['median_it_per_sec']:.2f} it/s")
        print(f"updates  : {report['cell_updates_per_sec'] / 1e6:.2f} Mcells/s")
        for phase, share in report["phase_share"].items():
            print(f"  {phase:<14s} {share * 100:5.1f}%")
    return 0


def cmd_to_csv(args) -> int:
    from .runner import frame_to_csv

    out = frame_to_csv(args.frame, args.out)
    print(out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"serve": cmd_serve, "run": cmd_run, "bench": cmd_bench,
                "to-csv": cmd_to_csv}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
