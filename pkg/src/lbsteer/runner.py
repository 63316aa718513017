"""Headless scenario execution, frame dumping, and throughput benchmarking."""

from __future__ import annotations

import json
import os
import platform
import statistics
import time

import numpy as np

from . import flags as fl
from .engine import (CmdConfigure, CmdControl, CmdSubscribe, RecordingSink,
                     SteeringEngine)
from .errors import DivergenceError
from .scenario import Scenario, apply_perturbation, build_flag_grid, build_simulation
from .core import FluidParams


class DumpSink(RecordingSink):
    """Writes every published frame as raw little-endian f32 plus a text sidecar."""

    def __init__(self, out_dir: str, session_id: int = 0):
        super().__init__(session_id)
        self.out_dir = out_dir
        self.sub_meta: dict[int, tuple[str, int, int]] = {}  # sub_id -> (field, axis, index)
        self.files: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def on_frame(self, sub_id, iteration, dims, payload):
        super().on_frame(sub_id, iteration, dims, payload)
        field, axis, index = self.sub_meta.get(sub_id, (f"sub{sub_id}", 2, 0))
        stem = f"{field}_a{axis}i{index}_it{iteration:06d}"
        raw = os.path.join(self.out_dir, stem + ".f32")
        with open(raw, "wb") as fh:
            fh.write(payload)
        with open(os.path.join(self.out_dir, stem + ".meta"), "w") as fh:
            fh.write(f"field={field}\naxis={axis}\nindex={index}\n"
                     f"iteration={iteration}\ndims={dims[0]}x{dims[1]}x{dims[2]}\n"
                     f"dtype=f32le\n")
        self.files.append(raw)


def front_position(sim) -> int:
    """Leading-edge x index of the liquid (fill > 0.5), or -1 if none."""
    filled = (sim.grid("fill") > 0.5)
    cols = np.flatnonzero(filled.reshape(sim.dims[0], -1).any(axis=1))
    return int(cols.max()) if cols.size else -1


def run_headless(scn: Scenario, out_dir: str | None, iterations: int | None = None,
                 threads: int = 1, seed: int = 0,
                 sink: RecordingSink | None = None) -> dict:
    """Run a scenario without any client, dumping frames at the configured cadence.

    Scheduled commands travel through the same mailbox/drain path as network
    commands, so a network twin fed the identical schedule at the identical
    iteration boundaries produces bit-identical frame payloads.
    """
    parallel = threads > 1
    if parallel:
        import numba

        numba.set_num_threads(threads)
    steps = scn.steps if iterations is None else iterations
    engine = SteeringEngine(params=FluidParams(tau=scn.tau,
                                               gravity=scn.gravity or (0.0,) * len(scn.dims)),
                            parallel=parallel, stats_period=1e9)
    if sink is None:
        sink = DumpSink(out_dir) if out_dir is not None else RecordingSink()
    engine.register_session(sink)

    flags, fill = build_flag_grid(scn)
    seq = 0

    def submit(cmd):
        nonlocal seq
        seq += 1
        engine.submit(cmd, session=sink, seq=seq)

    submit(CmdConfigure(scn.dims, flags, fill))
    engine.drain_and_apply()
    if sink.errors:
        raise DivergenceError(f"configuration failed: {sink.errors}")  # pragma: no cover
    sim = engine.sim
    if scn.inlet_velocity:
        sim.set_param("inlet_velocity", np.asarray(scn.inlet_velocity))
    for box in scn.boxes:
        if box.vel is not None:
            v = np.zeros(3)
            v[: len(box.vel)] = box.vel
            sim.bc_vel[:, sim.box_indices(box.lo, box.hi)] = v[:, None]
    if scn.perturb:
        apply_perturbation(sim, scn.perturb, seed=seed)

    every = scn.frame_every if scn.frame_every > 0 else steps + 1
    for ff in scn.frame_fields:
        if isinstance(sink, DumpSink):
            # ids are assigned sequentially at apply time; drain per subscribe
            # so the prediction (and the immediate frame's name) line up
            sink.sub_meta[sink.next_sub_id] = (ff.field, ff.axis, ff.index)
        submit(CmdSubscribe(field=ff.field, axis=ff.axis, index=ff.index, every_n=every))
        engine.drain_and_apply()
    submit(CmdControl("start"))
    engine.drain_and_apply()
    if sink.errors:
        codes = "; ".join(e[2] for e in sink.errors)
        return {"ok": False, "error": f"setup rejected: {codes}", "iterations": 0}

    schedule: dict[int, list] = {}
    for it, factory in scn.schedule:
        schedule.setdefault(it, []).append(factory)

    mass0 = sim.total_mass()
    max_speed = 0.0
    fronts: list[tuple[int, int]] = [(0, front_position(sim))]
    t0 = time.perf_counter()
    diverged = None
    while sim.iteration < steps:
        for factory in schedule.get(sim.iteration, []):
            submit(factory(sim))
        engine.drain_and_apply()
        if not engine.step_once():
            diverged = engine.divergence
            break
        diag = sim.last_diagnostics
        max_speed = max(max_speed, diag.max_speed)
        if sim.iteration % every == 0:
            fronts.append((sim.iteration, front_position(sim)))
    elapsed = time.perf_counter() - t0

    mass1 = sim.total_mass()
    report = {
        "ok": diverged is None,
        "scenario": scn.name,
        "iterations": sim.iteration,
        "wall_time_s": elapsed,
        "it_per_sec": sim.iteration / elapsed if elapsed > 0 else 0.0,
        "mass_initial": mass0,
        "mass_final": mass1,
        "mass_drift_rel": abs(mass1 - mass0) / mass0 if mass0 else 0.0,
        "mass_lost_tracked": sim.mass_lost,
        "max_speed": max_speed,
        "repairs": engine.last_repairs,
        "front_x": fronts,
        "command_errors": sink.errors,
        "frames_written": len(getattr(sink, "files", [])),
    }
    if diverged is not None:
        report["divergence"] = str(diverged)
        report["last_stable_iteration"] = sim.iteration
    if out_dir is not None:
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2)
    return report


def _cpu_name() -> str:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def hardware_report(threads: int) -> dict:
    import numba

    return {
        "cpu": _cpu_name(),
        "logical_cores": os.cpu_count(),
        "threads_used": threads,
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
    }


def bench(scn: Scenario, seconds: float = 5.0, warmup: int = 50,
          threads: int = 1) -> dict:
    """Iteration-throughput benchmark: mean/median it/s plus phase timings."""
    parallel = threads > 1
    if parallel:
        import numba

        numba.set_num_threads(threads)
    sim, _ = build_simulation(scn, parallel=parallel)
    for _ in range(warmup):
        sim.step()
    step_times: list[float] = []
    phase_totals: dict[str, float] = {}
    t_end = time.perf_counter() + seconds
    while time.perf_counter() < t_end:
        diag = sim.step()
        step_times.append(diag.wall_time)
        for k, v in diag.timings.items():
            phase_totals[k] = phase_totals.get(k, 0.0) + v
    n = len(step_times)
    total = sum(step_times)
    cells = sim.n
    report = {
        "scenario": scn.name,
        "lattice": sim.model.name,
        "dims": list(sim.dims),
        "cells": cells,
        "iterations_timed": n,
        "warmup_iterations": warmup,
        "mean_it_per_sec": n / total if total else 0.0,
        "median_it_per_sec": 1.0 / statistics.median(step_times) if n else 0.0,
        "cell_updates_per_sec": cells * n / total if total else 0.0,
        "phase_seconds": {k: round(v, 4) for k, v in phase_totals.items()},
        "phase_share": {k: round(v / total, 3) for k, v in phase_totals.items()} if total else {},
        "data_parallel": parallel,
        "hardware": hardware_report(threads),
    }
    return report


def frame_to_csv(raw_path: str, out_path: str | None = None) -> str:
    """Convert a dumped .f32 frame (with its .meta sidecar) to CSV."""
    meta_path = raw_path.rsplit(".", 1)[0] + ".meta"
    meta = {}
    with open(meta_path) as fh:
        for line in fh:
            key, _, value = line.strip().partition("=")
            meta[key] = value
    d = tuple(int(v) for v in meta["dims"].split("x"))
    data = np.fromfile(raw_path, dtype="<f4")
    out_path = out_path or raw_path.rsplit(".", 1)[0] + ".csv"
    field = meta["field"]
    with open(out_path, "w") as fh:
        if field == "interface":
            nv, ns, _ = d
            fh.write("kind,a,b,c,d\n")
            verts = data[: 4 * nv].reshape(nv, 4)
            segs = data[4 * nv: 4 * nv + 2 * ns].reshape(ns, 2)
            for v in verts:
                fh.write(f"vertex,{v[0]},{v[1]},{v[2]},{v[3]}\n")
            for s in segs:
                fh.write(f"segment,{int(s[0])},{int(s[1])},,\n")
        elif field == "streamlines":
            fh.write("line,point,x,y\n")
            k = 0
            line_id = 0
            while k < data.size:
                count = int(data[k])
                pts = data[k + 1: k + 1 + 2 * count].reshape(count, 2)
                for p_id, p in enumerate(pts):
                    fh.write(f"{line_id},{p_id},{p[0]},{p[1]}\n")
                k += 1 + 2 * count
                line_id += 1
        else:
            n1, n2, channels = d
            planes = data.reshape(channels, n1, n2)
            names = {2: ["value", "valid"], 3: ["u1", "u2", "valid"]}[channels]
            fh.write("i,j," + ",".join(names) + "\n")
            for i in range(n1):
                for j in range(n2):
                    vals = ",".join(repr(float(planes[c, i, j])) for c in range(channels))
                    fh.write(f"{i},{j},{vals}\n")
    return out_path
