"""Simulation ownership, command mailbox and frame publication.

Exactly one stepping context owns the simulation. Network sessions (or the
headless runner) enqueue commands from any thread; the engine drains the
mailbox only between iterations, applies commands in arrival order, and hands
immutable frame payloads to session callbacks. Identical initial flags plus an
identical command/arrival schedule reproduce bit-identical fields.
"""

from __future__ import annotations

import queue
import threading
import time
from collections import deque
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from .core import FluidParams, Simulation
from .errors import CommandError, DivergenceError
from .extract import SliceSpec, build_frame_payload
from .lattice import model_for_dims


class Phase(Enum):
    CONFIGURING = "configuring"
    RUNNING = "running"
    PAUSED = "paused"
    DIVERGED = "diverged"
    RESETTING = "resetting"


_TRANSITIONS = {
    Phase.CONFIGURING: {Phase.RUNNING, Phase.CONFIGURING, Phase.RESETTING},
    Phase.RUNNING: {Phase.RUNNING, Phase.PAUSED, Phase.DIVERGED, Phase.RESETTING},
    Phase.PAUSED: {Phase.PAUSED, Phase.RUNNING, Phase.RESETTING},
    Phase.DIVERGED: {Phase.RESETTING},
    Phase.RESETTING: {Phase.CONFIGURING},
}


# ------------------------------------------------------------------- commands

@dataclass
class CmdConfigure:
    """Build the simulation from a flag grid (GEOMETRY handshake)."""

    dims: tuple
    flags: np.ndarray
    fill: np.ndarray | None = None


@dataclass
class CmdReset(CmdConfigure):
    """Rebuild from a flags snapshot; the only command accepted while diverged."""


@dataclass
class CmdSetCells:
    cells: np.ndarray
    flags: np.ndarray | int = 0
    fills: np.ndarray | float | None = None


@dataclass
class CmdMoveRegion:
    lo: tuple
    hi: tuple
    offset: tuple


@dataclass
class CmdSetParam:
    name: str
    values: np.ndarray


@dataclass
class CmdControl:
    action: str  # start | pause | resume | step_n
    n: int = 0


@dataclass
class CmdSubscribe:
    field: str
    axis: int = 2
    index: int = 0
    every_n: int = 1


@dataclass
class CmdUnsubscribe:
    sub_id: int


@dataclass
class CmdSessionClosed:
    session_id: int


@dataclass
class Subscription:
    session: object
    sub_id: int
    spec: SliceSpec
    every_n: int


class NullSink:
    """Session stand-in that drops every outcome (fire-and-forget submits)."""

    session_id = -1

    def __init__(self):
        self.next_sub_id = 1

    def on_ack(self, seq):
        pass

    def on_command_error(self, seq, code, message):
        pass

    def on_frame(self, sub_id, iteration, dims, payload):
        pass

    def on_stats(self, iteration, it_per_sec, mass):
        pass

    def on_engine_error(self, code, message):
        pass


class RecordingSink(NullSink):
    """Collects outcomes and frames; used by the headless runner and tests."""

    def __init__(self, session_id: int = 0):
        super().__init__()
        self.session_id = session_id
        self.acks: list[int] = []
        self.errors: list[tuple[int, int, str]] = []
        self.frames: list[tuple[int, int, tuple, bytes]] = []
        self.engine_errors: list[tuple[int, str]] = []

    def on_ack(self, seq):
        self.acks.append(seq)

    def on_command_error(self, seq, code, message):
        self.errors.append((seq, code, message))

    def on_frame(self, sub_id, iteration, dims, payload):
        self.frames.append((sub_id, iteration, dims, payload))

    def on_engine_error(self, code, message):
        self.engine_errors.append((code, message))


def _adapt_region(dim: int, lo, hi, offset):
    """Trim wire-format 3-component regions to the simulation's rank."""
    if len(lo) == dim:
        return tuple(lo), tuple(hi), tuple(offset)
    if dim == 2 and len(lo) == 3:
        if lo[2] != 0 or hi[2] != 1 or offset[2] != 0:
            raise CommandError(3, "2D simulations take z0=0, z1=1, dz=0 regions")
        return tuple(lo[:2]), tuple(hi[:2]), tuple(offset[:2])
    raise CommandError(3, f"region rank {len(lo)} does not match a {dim}D grid")


# --------------------------------------------------------------------- engine

class SteeringEngine:
    """Owns the stepping loop; applies steering commands at iteration
    boundaries only and publishes consistent snapshots."""

    def __init__(self, sim: Simulation | None = None, params: FluidParams | None = None,
                 stats_period: float = 1.0, parallel: bool = False,
                 max_frame_bytes: int = 64 * 1024 * 1024):
        self.sim = sim
        self.default_params = params or FluidParams()
        self.parallel = parallel if sim is None else sim.parallel
        self.stats_period = stats_period
        self.max_frame_bytes = max_frame_bytes
        self.phase = Phase.CONFIGURING
        self.pending_steps: int | None = 0  # None = free-running
        self.mailbox: queue.Queue = queue.Queue()
        self.subscriptions: dict[tuple[int, int], Subscription] = {}
        self._sessions: dict[int, object] = {}
        self._sessions_lock = threading.Lock()
        self._wakeup = threading.Event()
        self._step_times: deque = deque(maxlen=128)
        self._last_stats = 0.0
        self._post_ack: list = []
        self.divergence: DivergenceError | None = None
        self.last_repairs = 0

    # ------------------------------------------------------------- lifecycle

    @property
    def iteration(self) -> int:
        return self.sim.iteration if self.sim is not None else 0

    def it_per_sec(self) -> float:
        if len(self._step_times) < 2:
            return 0.0
        (t0, i0), (t1, i1) = self._step_times[0], self._step_times[-1]
        return (i1 - i0) / (t1 - t0) if t1 > t0 else 0.0

    def _set_phase(self, new: Phase) -> None:
        if new not in _TRANSITIONS[self.phase]:
            raise CommandError(4, f"illegal phase transition {self.phase.value} -> {new.value}")
        self.phase = new

    def register_session(self, session) -> None:
        with self._sessions_lock:
            self._sessions[session.session_id] = session

    def _session_list(self) -> list:
        with self._sessions_lock:
            return list(self._sessions.values())

    # ---------------------------------------------------------------- mailbox

    def submit(self, cmd, session=None, seq: int = 0) -> None:
        """Enqueue a command from any thread; applied at the next boundary."""
        self.mailbox.put((cmd, session, seq))
        self._wakeup.set()

    def drain_and_apply(self) -> int:
        """Apply every queued command in arrival order. Engine thread only."""
        applied = 0
        while True:
            try:
                cmd, session, seq = self.mailbox.get_nowait()
            except queue.Empty:
                return applied
            if isinstance(cmd, CmdSessionClosed):
                self._drop_session(cmd.session_id)
                continue
            if self.phase is Phase.DIVERGED and not isinstance(cmd, CmdReset):
                self._outcome_error(session, seq, CommandError(
                    4, "simulation diverged; only RESET is accepted"))
                continue
            self._post_ack = []
            try:
                self._apply(cmd, session)
            except CommandError as err:
                self._outcome_error(session, seq, err)
            else:
                applied += 1
                if session is not None:
                    session.on_ack(seq)
                for publish in self._post_ack:  # initial frames follow the ACK
                    publish()
            self._post_ack = []

    def _outcome_error(self, session, seq, err: CommandError) -> None:
        if session is not None:
            session.on_command_error(seq, err.code, err.message)

    def _drop_session(self, session_id: int) -> None:
        with self._sessions_lock:
            self._sessions.pop(session_id, None)
        for key in [k for k in self.subscriptions if k[0] == session_id]:
            del self.subscriptions[key]

    # ------------------------------------------------------------ application

    def _require_sim(self) -> Simulation:
        if self.sim is None:
            raise CommandError(4, "no geometry configured yet")
        return self.sim

    def _apply(self, cmd, session) -> None:
        if isinstance(cmd, (CmdConfigure, CmdReset)):
            self._apply_configure(cmd)
        elif isinstance(cmd, CmdSetCells):
            self._require_sim().set_cells(cmd.cells, cmd.flags, cmd.fills)
        elif isinstance(cmd, CmdMoveRegion):
            sim = self._require_sim()
            lo, hi, off = _adapt_region(sim.model.dim, cmd.lo, cmd.hi, cmd.offset)
            sim.move_region(lo, hi, off)
        elif isinstance(cmd, CmdSetParam):
            self._require_sim().set_param(cmd.name, cmd.values)
        elif isinstance(cmd, CmdControl):
            self._apply_control(cmd)
        elif isinstance(cmd, CmdSubscribe):
            self._apply_subscribe(cmd, session)
        elif isinstance(cmd, CmdUnsubscribe):
            sid = session.session_id if session is not None else NullSink.session_id
            key = (sid, cmd.sub_id)
            if key not in self.subscriptions:
                raise CommandError(3, f"unknown subscription id {cmd.sub_id}")
            del self.subscriptions[key]
        else:
            raise CommandError(3, f"unknown command {type(cmd).__name__}")

    def _apply_configure(self, cmd: CmdConfigure) -> None:
        dims = tuple(int(d) for d in cmd.dims)
        if len(dims) == 3 and dims[2] == 1:
            dims = dims[:2]  # nz == 1 selects the 2D model
        params = self.sim.params if self.sim is not None else self.default_params
        inlet_v = self.sim.default_inlet_velocity if self.sim is not None else None
        try:
            sim, repairs = Simulation.from_flags(
                dims, cmd.flags, fill=cmd.fill, params=params,
                model=model_for_dims(dims), parallel=self.parallel,
                inlet_velocity=inlet_v)
        except Exception as exc:
            raise CommandError(3, f"geometry rejected: {exc}") from exc
        if self.phase is not Phase.CONFIGURING:
            self._set_phase(Phase.RESETTING)
            self._set_phase(Phase.CONFIGURING)
        self.sim = sim
        self.last_repairs = repairs
        self.pending_steps = 0
        self.divergence = None
        self._step_times.clear()
        self._revalidate_subscriptions()
        for sub in list(self.subscriptions.values()):
            self._post_ack.append(lambda s=sub: self._publish(s))

    def _revalidate_subscriptions(self) -> None:
        for key, sub in list(self.subscriptions.items()):
            try:
                sub.spec.validate(self.sim.dims)
            except CommandError as err:
                del self.subscriptions[key]
                sub.session.on_command_error(0, err.code,
                                             f"subscription {sub.sub_id} cancelled: {err.message}")

    def _apply_control(self, cmd: CmdControl) -> None:
        if cmd.action == "start":
            self._require_sim()
            if self.phase in (Phase.CONFIGURING, Phase.PAUSED):
                self._set_phase(Phase.RUNNING)
                self.pending_steps = None
            elif self.phase is not Phase.RUNNING:
                raise CommandError(4, f"cannot start from phase {self.phase.value}")
        elif cmd.action == "pause":
            if self.phase is Phase.RUNNING:
                self._set_phase(Phase.PAUSED)
                self.pending_steps = 0
            elif self.phase is not Phase.PAUSED:
                raise CommandError(4, f"cannot pause from phase {self.phase.value}")
        elif cmd.action == "resume":
            if self.phase is Phase.PAUSED:
                self._set_phase(Phase.RUNNING)
                self.pending_steps = None
            elif self.phase is not Phase.RUNNING:
                raise CommandError(4, f"cannot resume from phase {self.phase.value}")
        elif cmd.action == "step_n":
            self._require_sim()
            if cmd.n <= 0:
                raise CommandError(3, "step_n takes a positive count")
            if self.phase in (Phase.CONFIGURING, Phase.PAUSED):
                self.pending_steps = cmd.n
                self._set_phase(Phase.RUNNING)
            elif self.pending_steps is not None:
                self.pending_steps += cmd.n
        else:
            raise CommandError(3, f"unknown control action {cmd.action!r}")

    def _apply_subscribe(self, cmd: CmdSubscribe, session) -> None:
        sim = self._require_sim()
        if cmd.every_n < 1:
            raise CommandError(3, "subscription cadence must be >= 1")
        spec = SliceSpec(field=cmd.field, axis=cmd.axis, index=cmd.index)
        spec.validate(sim.dims)
        self._check_frame_budget(spec, sim)
        if session is None:
            session = NullSink()
        sub_id = session.next_sub_id
        session.next_sub_id += 1
        sub = Subscription(session=session, sub_id=sub_id, spec=spec, every_n=cmd.every_n)
        self.subscriptions[(session.session_id, sub_id)] = sub
        self._post_ack.append(lambda: self._publish(sub))  # initial frame after the ACK

    def _check_frame_budget(self, spec: SliceSpec, sim: Simulation) -> None:
        axes = [d for a, d in enumerate(sim.dims) if len(sim.dims) == 2 or a != spec.axis]
        cells = int(np.prod(axes))
        if cells * 4 * 3 > self.max_frame_bytes:
            raise CommandError(5, f"slice of {cells} cells exceeds the frame budget")

    # ---------------------------------------------------------------- stepping

    def step_once(self) -> bool:
        """Run one iteration if the phase allows it; publishes due frames."""
        if self.sim is None or self.phase is not Phase.RUNNING:
            return False
        try:
            self.sim.step()
        except DivergenceError as err:
            self.divergence = err
            self._set_phase(Phase.DIVERGED)
            for session in self._session_list():
                session.on_engine_error(4, str(err))
            return False
        self._step_times.append((time.perf_counter(), self.sim.iteration))
        self.publish_due()
        self._maybe_stats()
        if self.pending_steps is not None:
            self.pending_steps -= 1
            if self.pending_steps <= 0:
                self.pending_steps = 0
                self._set_phase(Phase.PAUSED)
        return True

    def publish_due(self) -> None:
        it = self.sim.iteration
        for sub in list(self.subscriptions.values()):
            if it % sub.every_n == 0:
                self._publish(sub)

    def _publish(self, sub: Subscription) -> None:
        try:
            dims3, payload = build_frame_payload(self.sim, sub.spec)
        except CommandError as err:
            self.subscriptions.pop((sub.session.session_id, sub.sub_id), None)
            sub.session.on_command_error(0, err.code,
                                         f"subscription {sub.sub_id} cancelled: {err.message}")
            return
        sub.session.on_frame(sub.sub_id, self.sim.iteration, dims3, payload)

    def _maybe_stats(self, force: bool = False) -> None:
        now = time.monotonic()
        if not force and now - self._last_stats < self.stats_period:
            return
        self._last_stats = now
        if self.sim is None:
            return
        mass = self.sim.total_mass()
        for session in self._session_list():
            session.on_stats(self.sim.iteration, self.it_per_sec(), mass)

    def advance(self, idle_wait: float = 0.02) -> bool:
        """One loop body: drain, then step if running. Returns True if stepped."""
        self.drain_and_apply()
        if self.phase is Phase.RUNNING:
            return self.step_once()
        self._maybe_stats()
        self._wakeup.wait(idle_wait)
        self._wakeup.clear()
        return False

    def run_loop(self, stop_event: threading.Event) -> None:
        """Thread target: step and serve commands until stopped."""
        while not stop_event.is_set():
            self.advance()
