"""Line-based scenario files: geometry, parameters and a scripted edit schedule.

Directives (one per line, '#' comments, coordinates are half-open boxes):

    name <free text>
    dims <nx> <ny> [nz]
    lattice d2q9 | d3q19          (optional; inferred from dims)
    tau <float>
    gravity <gx> <gy> [gz]
    background fluid | gas        (default fluid)
    border wall | none            (1-cell shell, default none)
    box <flag> <lo...> <hi...> [fill <f>] [vel <ux> <uy> [uz]]
    inlet_velocity <ux> <uy> [uz]
    perturb <amplitude>           (seeded velocity noise at init)
    steps <n>
    frame_every <n>               (0 = only the iteration-0 frame)
    frame_fields <field>[@<axis><index>] ...
    at <iter> set_cells <flag> <lo...> <hi...> [fill <f>]
    at <iter> move_region <lo...> <hi...> offset <d...>
    at <iter> set_param <name> <value...>

Unknown directives or malformed values are rejected with their line number.
Scenario schedules carry only state edits (set_cells/move_region/set_param);
run control in scripted runs is the runner's job, keeping runs deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import flags as fl
from .core import FluidParams, Simulation, validate_speed
from .engine import CmdMoveRegion, CmdSetCells, CmdSetParam
from .errors import ScenarioError
from .extract import ALL_FIELDS
from .lattice import MODELS, model_for_dims

_AXIS_BY_LETTER = {"x": 0, "y": 1, "z": 2}


@dataclass
class BoxOp:
    flag: int
    lo: tuple
    hi: tuple
    fill: float | None = None
    vel: tuple | None = None


@dataclass
class FrameField:
    field: str
    axis: int = 2
    index: int = 0


@dataclass
class Scenario:
    name: str = ""
    dims: tuple = ()
    lattice: str = ""
    tau: float = 1.0
    gravity: tuple = ()
    background: int = fl.FLUID
    border: str = "none"
    boxes: list = dc_field(default_factory=list)
    inlet_velocity: tuple = ()
    perturb: float = 0.0
    steps: int = 0
    frame_every: int = 0
    frame_fields: list = dc_field(default_factory=list)
    schedule: list = dc_field(default_factory=list)  # (iteration, factory(dims) -> cmd)


def _floats(tokens, n_min, n_max, line):
    if not (n_min <= len(tokens) <= n_max):
        raise ScenarioError(line, f"expected {n_min}..{n_max} numbers, got {len(tokens)}")
    try:
        return tuple(float(t) for t in tokens)
    except ValueError as exc:
        raise ScenarioError(line, f"bad number: {exc}") from exc


def _ints(tokens, count, line):
    if len(tokens) != count:
        raise ScenarioError(line, f"expected {count} integers, got {len(tokens)}")
    try:
        return tuple(int(t) for t in tokens)
    except ValueError as exc:
        raise ScenarioError(line, f"bad integer: {exc}") from exc


def _flag(token, line) -> int:
    if token not in fl.FLAG_BY_NAME:
        raise ScenarioError(line, f"unknown flag {token!r} (expected one of "
                                  f"{sorted(fl.FLAG_BY_NAME)})")
    return fl.FLAG_BY_NAME[token]


def _parse_box_tail(tokens, dim, line):
    """[fill <f>] [vel <u...>] suffix of a box directive."""
    fill = None
    vel = None
    k = 0
    while k < len(tokens):
        if tokens[k] == "fill":
            fill = _floats(tokens[k + 1:k + 2], 1, 1, line)[0]
            k += 2
        elif tokens[k] == "vel":
            vel = _floats(tokens[k + 1:k + 1 + dim], dim, dim, line)
            k += 1 + dim
        else:
            raise ScenarioError(line, f"unexpected token {tokens[k]!r}")
    return fill, vel


def parse_scenario(text: str) -> Scenario:
    scn = Scenario()
    seen_dims = False
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        word, args = tokens[0], tokens[1:]
        if word == "name":
            scn.name = " ".join(args)
        elif word == "dims":
            vals = [int(t) for t in args] if all(t.lstrip("-").isdigit() for t in args) else None
            if vals is None or len(vals) not in (2, 3):
                raise ScenarioError(ln, "dims takes 2 or 3 integers")
            scn.dims = tuple(vals)
            seen_dims = True
        elif word == "lattice":
            if len(args) != 1 or args[0] not in MODELS:
                raise ScenarioError(ln, f"lattice must be one of {sorted(MODELS)}")
            scn.lattice = args[0]
        elif word == "tau":
            scn.tau = _floats(args, 1, 1, ln)[0]
        elif word == "gravity":
            scn.gravity = _floats(args, 2, 3, ln)
        elif word == "background":
            if args != ["fluid"] and args != ["gas"]:
                raise ScenarioError(ln, "background must be 'fluid' or 'gas'")
            scn.background = fl.FLAG_BY_NAME[args[0]]
        elif word == "border":
            if args != ["wall"] and args != ["none"]:
                raise ScenarioError(ln, "border must be 'wall' or 'none'")
            scn.border = args[0]
        elif word == "box":
            if not seen_dims:
                raise ScenarioError(ln, "box before dims")
            d = len(scn.dims)
            if len(args) < 1 + 2 * d:
                raise ScenarioError(ln, f"box needs a flag and {2 * d} coordinates")
            flag = _flag(args[0], ln)
            coords = _ints(args[1:1 + 2 * d], 2 * d, ln)
            fill, vel = _parse_box_tail(args[1 + 2 * d:], d, ln)
            scn.boxes.append(BoxOp(flag, coords[:d], coords[d:], fill, vel))
        elif word == "inlet_velocity":
            scn.inlet_velocity = _floats(args, 2, 3, ln)
        elif word == "perturb":
            scn.perturb = _floats(args, 1, 1, ln)[0]
        elif word == "steps":
            scn.steps = _ints(args, 1, ln)[0]
        elif word == "frame_every":
            scn.frame_every = _ints(args, 1, ln)[0]
        elif word == "frame_fields":
            for spec in args:
                name, _, at = spec.partition("@")
                if name not in ALL_FIELDS:
                    raise ScenarioError(ln, f"unknown field {name!r}")
                if at:
                    if at[0] not in _AXIS_BY_LETTER or not at[1:].isdigit():
                        raise ScenarioError(ln, f"bad slice spec {at!r} (want e.g. z0)")
                    scn.frame_fields.append(FrameField(name, _AXIS_BY_LETTER[at[0]], int(at[1:])))
                else:
                    scn.frame_fields.append(FrameField(name))
        elif word == "at":
            if not seen_dims:
                raise ScenarioError(ln, "'at' before dims")
            if len(args) < 2 or not args[0].isdigit():
                raise ScenarioError(ln, "'at' takes an iteration then a command")
            scn.schedule.append((int(args[0]), _parse_scheduled(args[1:], scn.dims, ln)))
        else:
            raise ScenarioError(ln, f"unknown directive {word!r}")
    if not seen_dims:
        raise ScenarioError(1, "scenario must declare dims")
    if scn.lattice and MODELS[scn.lattice].dim != len(scn.dims):
        raise ScenarioError(1, f"lattice {scn.lattice} does not match {len(scn.dims)}D dims")
    return scn


def _parse_scheduled(tokens, dims, ln):
    d = len(dims)
    word, args = tokens[0], tokens[1:]
    if word == "set_cells":
        if len(args) < 1 + 2 * d:
            raise ScenarioError(ln, f"set_cells needs a flag and {2 * d} coordinates")
        flag = _flag(args[0], ln)
        coords = _ints(args[1:1 + 2 * d], 2 * d, ln)
        fill, vel = _parse_box_tail(args[1 + 2 * d:], d, ln)
        if vel is not None:
            raise ScenarioError(ln, "scheduled set_cells does not take velocities")
        lo, hi = coords[:d], coords[d:]

        def factory(sim, lo=lo, hi=hi, flag=flag, fill=fill):
            return CmdSetCells(sim.box_indices(lo, hi), flag, fill)

        return factory
    if word == "move_region":
        if len(args) != 2 * d + 1 + d or args[2 * d] != "offset":
            raise ScenarioError(ln, f"move_region takes {2 * d} coordinates, "
                                    f"'offset', then {d} deltas")
        coords = _ints(args[:2 * d], 2 * d, ln)
        deltas = _ints(args[2 * d + 1:], d, ln)

        def factory(sim, lo=coords[:d], hi=coords[d:], off=deltas):
            return CmdMoveRegion(lo, hi, off)

        return factory
    if word == "set_param":
        if len(args) < 2:
            raise ScenarioError(ln, "set_param takes a name and values")
        name = args[0]
        if name not in ("tau", "gravity", "inlet_velocity", "wall_velocity"):
            raise ScenarioError(ln, f"unknown parameter {name!r}")
        values = _floats(args[1:], 1, 3, ln)

        def factory(sim, name=name, values=values):
            return CmdSetParam(name, np.asarray(values))

        return factory
    raise ScenarioError(ln, f"unknown scheduled command {word!r} "
                            "(run control is not scriptable)")


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def build_flag_grid(scn: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Flag and fill arrays from background, border and box directives."""
    dims = scn.dims
    flags = np.full(dims, scn.background, dtype=np.uint8)
    if scn.border == "wall":
        for ax in range(len(dims)):
            sl = [slice(None)] * len(dims)
            sl[ax] = 0
            flags[tuple(sl)] = fl.WALL
            sl[ax] = dims[ax] - 1
            flags[tuple(sl)] = fl.WALL
    for box in scn.boxes:
        sl = tuple(slice(box.lo[a], box.hi[a]) for a in range(len(dims)))
        flags[sl] = box.flag
    flat = flags.ravel()
    fill = fl.default_fill(flat, None)
    for box in scn.boxes:
        if box.fill is not None:
            sl = tuple(slice(box.lo[a], box.hi[a]) for a in range(len(dims)))
            fill.reshape(dims)[sl] = box.fill
    return flat, fill


def build_simulation(scn: Scenario, parallel: bool = False) -> tuple[Simulation, int]:
    """Instantiate the scenario's initial simulation state."""
    model = MODELS[scn.lattice] if scn.lattice else model_for_dims(scn.dims)
    flags, fill = build_flag_grid(scn)
    params = FluidParams(tau=scn.tau, gravity=scn.gravity or (0.0,) * len(scn.dims))
    sim, repairs = Simulation.from_flags(
        scn.dims, flags, fill=fill, params=params, model=model, parallel=parallel,
        inlet_velocity=scn.inlet_velocity or None)
    for box in scn.boxes:
        if box.vel is not None:
            v = np.zeros(3)
            v[: len(box.vel)] = box.vel
            validate_speed(v, "box velocity")
            cells = sim.box_indices(box.lo, box.hi)
            sim.bc_vel[:, cells] = v[:, None]
    if scn.perturb:
        apply_perturbation(sim, scn.perturb, seed=0)
    return sim, repairs


def apply_perturbation(sim: Simulation, amplitude: float, seed: int = 0) -> None:
    """Deterministic seeded velocity noise on fluid cells (symmetry breaking)."""
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amplitude, amplitude, size=(3, sim.n))
    noise[sim.model.dim:] = 0.0
    active = sim.flags == fl.FLUID
    u = np.where(active[None, :], sim.u + noise, sim.u)
    sim.set_state(sim.rho, u)
