"""The lattice-Boltzmann simulation state and step loop.

State lives in flat arrays over a C-ordered grid; a step is
collide+stream (fused kernel) -> mass exchange -> inlet/outlet passes ->
moments -> divergence check -> commit -> free-surface conversions.
Nothing is committed if the divergence check fails, so `f`, `rho`, `u`,
`mass` and `flags` always hold the last good state.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import flags as fl
from .errors import CommandError, ConfigError, DivergenceError
from .freesurface import ConversionStats, convert_cells
from .kernels import get_kernels
from .lattice import MAX_SPEED, LatticeModel, equilibrium, equilibrium_cell, model_for_dims

PARAM_NAMES = ("tau", "gravity", "inlet_velocity", "wall_velocity")


@dataclass
class FluidParams:
    """Relaxation time and body force (lattice units)."""

    tau: float = 1.0
    gravity: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        g = np.zeros(3)
        gv = np.asarray(self.gravity, dtype=np.float64).ravel()
        g[: gv.size] = gv
        self.gravity = g
        validate_tau(self.tau)


def validate_tau(tau: float) -> None:
    if not np.isfinite(tau) or tau <= 0.5:
        raise CommandError(3, f"tau must be > 0.5 (got {tau})")


def validate_speed(vec: np.ndarray, what: str) -> None:
    s = float(np.linalg.norm(vec))
    if not np.isfinite(s) or s >= MAX_SPEED:
        raise CommandError(3, f"|{what}| must be < {MAX_SPEED} (got {s:.3g})")


@dataclass
class StepDiagnostics:
    iteration: int
    total_mass: float
    max_speed: float
    wall_time: float
    timings: dict
    conversions: ConversionStats


class Simulation:
    """Owns the lattice field, flags and mass field for one running domain."""

    def __init__(self, model: LatticeModel, dims: tuple, parallel: bool = False):
        if len(dims) != model.dim:
            raise ConfigError(f"grid rank {len(dims)} does not match {model.name}")
        if any(d < 3 for d in dims):
            raise ConfigError(f"every grid extent must be >= 3, got {dims}")
        self.model = model
        self.dims = tuple(int(d) for d in dims)
        self.n = int(np.prod(self.dims))
        self.parallel = bool(parallel)
        self._kernels = get_kernels(parallel)
        self.params = FluidParams()
        self.nbr = fl.neighbor_table(self.dims, model)
        q = model.q
        self.f = np.zeros((q, self.n))
        self.f_tmp = np.zeros((q, self.n))
        self.flags = np.full(self.n, fl.GAS, dtype=np.uint8)
        self.fill = np.zeros(self.n)
        self.mass = np.zeros(self.n)
        self.rho = np.ones(self.n)
        self.u = np.zeros((3, self.n))
        self._rho_next = np.empty(self.n)
        self._u_next = np.empty((3, self.n))
        self.bc_vel = np.zeros((3, self.n))
        self.default_inlet_velocity = np.zeros(3)
        self.iteration = 0
        self.flags_version = 0  # any flag change
        self._io_version = 0  # inlet/outlet/wall layout changes (edits only)
        self._io_cache = None
        self._io_cache_version = -1
        self._bset_cache = None
        self._bset_cache_version = -1
        self.mass_lost = 0.0
        self.last_diagnostics: StepDiagnostics | None = None

    # ------------------------------------------------------------------ setup

    @classmethod
    def from_flags(
        cls,
        dims: tuple,
        flag_grid: np.ndarray,
        fill: np.ndarray | None = None,
        params: FluidParams | None = None,
        model: LatticeModel | None = None,
        parallel: bool = False,
        inlet_velocity=None,
    ) -> tuple["Simulation", int]:
        """Build a simulation from a flag array (the geometry handshake).

        Fluid cells start at equilibrium(rho=1, u=0); interface cells carry
        the provided fill (default 0.5). Fluid cells touching gas are repaired
        to interface; the repair count is returned.
        """
        model = model or model_for_dims(dims)
        sim = cls(model, dims, parallel=parallel)
        flag_grid = np.ascontiguousarray(np.asarray(flag_grid, dtype=np.uint8).ravel())
        if flag_grid.size != sim.n:
            raise ConfigError(f"flag array has {flag_grid.size} cells, grid needs {sim.n}")
        fl.validate_flags(flag_grid, sim.dims)
        sim.flags = flag_grid
        if params is not None:
            sim.params = params
        if inlet_velocity is not None:
            v = np.zeros(3)
            v[: len(inlet_velocity)] = inlet_velocity
            validate_speed(v, "inlet velocity")
            sim.default_inlet_velocity = v

        provided_fill = None
        if fill is not None:
            provided_fill = np.asarray(fill, dtype=np.float64).ravel()
            if provided_fill.size != sim.n:
                raise ConfigError("fill array size does not match grid")
        sim.fill = fl.default_fill(sim.flags, provided_fill)

        repaired = fl.repair_fluid_gas_contacts(sim.flags, sim.nbr)
        sim.fill[repaired] = 1.0  # repaired cells were fluid

        active = sim.flags <= fl.INTERFACE
        idx = np.flatnonzero(active)
        sim.f[:, idx] = equilibrium(np.ones(idx.size), np.zeros((3, idx.size)), model)
        io = np.flatnonzero(sim.flags == fl.INLET)
        if io.size:
            sim.bc_vel[:, io] = sim.default_inlet_velocity[:, None]
            sim.f[:, io] = equilibrium(np.ones(io.size), sim.bc_vel[:, io], model)
        oo = np.flatnonzero(sim.flags == fl.OUTLET)
        if oo.size:
            sim.f[:, oo] = equilibrium(np.ones(oo.size), np.zeros((3, oo.size)), model)
        sim.refresh_moments()
        sim.mass[:] = 0.0
        sim.mass[sim.flags == fl.FLUID] = sim.rho[sim.flags == fl.FLUID]
        ifc = sim.flags == fl.INTERFACE
        sim.mass[ifc] = sim.fill[ifc] * sim.rho[ifc]
        for grp in (fl.INLET, fl.OUTLET):
            m = sim.flags == grp
            sim.mass[m] = sim.rho[m]
        sim.flags_version += 1
        sim._io_version += 1
        return sim, int(repaired.size)

    def set_state(self, rho: np.ndarray, u: np.ndarray) -> None:
        """Reset populations to equilibrium(rho, u) on active cells (validation runs)."""
        rho = np.asarray(rho, dtype=np.float64).ravel()
        u = np.asarray(u, dtype=np.float64).reshape(-1, self.n) if u.ndim > 1 else u
        u3 = np.zeros((3, self.n))
        u3[: u.shape[0]] = u
        feq = equilibrium(rho, u3, self.model)
        active = self.flags <= fl.INTERFACE
        self.f[:, active] = feq[:, active]
        self.refresh_moments()
        m = (self.flags == fl.FLUID) | (self.flags >= fl.INLET)
        self.mass[m] = self.rho[m]

    # ------------------------------------------------------------ derived data

    def _io_lists(self):
        if self._io_cache_version != self._io_version:
            bset = fl.BoundarySet.build(self.flags, self.dims, self.nbr)
            self._io_cache = (bset.inlet_cells, bset.inlet_src,
                              bset.outlet_cells, bset.outlet_src)
            self._io_cache_version = self._io_version
        return self._io_cache

    def boundary_set(self) -> fl.BoundarySet:
        if self._bset_cache_version != self.flags_version:
            self._bset_cache = fl.BoundarySet.build(self.flags, self.dims, self.nbr)
            self._bset_cache_version = self.flags_version
        return self._bset_cache

    def refresh_moments(self) -> None:
        self._kernels.moments(self.f, self.flags, self.model.velocities,
                              self.params.gravity, self.rho, self.u)

    def _refresh_fill(self) -> None:
        flags = self.flags
        self.fill[(flags == fl.FLUID) | (flags >= fl.INLET)] = 1.0
        self.fill[(flags == fl.WALL) | (flags == fl.GAS)] = 0.0
        ifc = np.flatnonzero(flags == fl.INTERFACE)
        if ifc.size:
            self.fill[ifc] = np.clip(self.mass[ifc] / self.rho[ifc], 0.0, 1.0)

    def total_mass(self) -> float:
        return float(np.sum(self.mass))

    def grid(self, name: str) -> np.ndarray:
        """Reshaped view of a flat field ('rho', 'fill', 'flags', 'mass')."""
        return getattr(self, name).reshape(self.dims)

    def velocity_grid(self) -> np.ndarray:
        return self.u.reshape((3,) + self.dims)

    # ------------------------------------------------------------------- step

    def step(self) -> StepDiagnostics:
        """Advance one iteration; raises DivergenceError leaving state intact."""
        t0 = time.perf_counter()
        m = self.model
        self._kernels.fused(self.f, self.f_tmp, self.flags, self.nbr, m.opposite,
                            m.weights, m.velocities, self.rho, self.u, self.bc_vel,
                            self.params.tau, self.params.gravity)
        t1 = time.perf_counter()
        iface = np.flatnonzero(self.flags == fl.INTERFACE)
        dm = np.zeros(iface.size)
        if iface.size:
            self._kernels.mass_exchange(self.f_tmp, self.flags, self.fill,
                                        self.nbr, m.opposite, iface, dm)
        t2 = time.perf_counter()
        inlet_cells, inlet_src, outlet_cells, outlet_src = self._io_lists()
        if inlet_cells.size:
            # prescribed velocity at the density of the adjacent interior cell
            # (a fixed reference density leaves the steady flux indeterminate)
            self.f_tmp[:, inlet_cells] = equilibrium(
                self.rho[inlet_src], self.bc_vel[:, inlet_cells], m)
        if outlet_cells.size:
            self.f_tmp[:, outlet_cells] = self.f_tmp[:, outlet_src]
        t3 = time.perf_counter()
        self._kernels.moments(self.f_tmp, self.flags, m.velocities,
                              self.params.gravity, self._rho_next, self._u_next)
        speed2 = self._u_next[0] ** 2 + self._u_next[1] ** 2 + self._u_next[2] ** 2
        max_speed2 = float(speed2.max())
        self._check_divergence(max_speed2)
        # commit
        self.f, self.f_tmp = self.f_tmp, self.f
        self.rho, self._rho_next = self._rho_next, self.rho
        self.u, self._u_next = self._u_next, self.u
        if iface.size:
            self.mass[iface] += dm
        tracked = (self.flags == fl.FLUID) | (self.flags >= fl.INLET)
        self.mass[tracked] = self.rho[tracked]
        self.iteration += 1
        t4 = time.perf_counter()
        conv = convert_cells(self)
        self.mass_lost += conv.mass_lost
        self._refresh_fill()
        t5 = time.perf_counter()
        diag = StepDiagnostics(
            iteration=self.iteration,
            total_mass=float(np.sum(self.mass)),
            max_speed=float(np.sqrt(max_speed2)),
            wall_time=t5 - t0,
            timings={
                "collide_stream": t1 - t0,
                "free_surface": (t2 - t1) + (t5 - t4),
                "boundary": t3 - t2,
                "moments": t4 - t3,
            },
            conversions=conv,
        )
        self.last_diagnostics = diag
        return diag

    def _check_divergence(self, max_speed2: float) -> None:
        rho_min = float(self._rho_next.min())
        if rho_min > 0.0 and np.isfinite(rho_min) and np.isfinite(max_speed2):
            return
        # slow path: locate the first offending cell for the error report
        finite = np.isfinite(self._rho_next)
        for a in range(3):
            finite &= np.isfinite(self._u_next[a])
        active = self.flags <= fl.INTERFACE
        bad = (~finite) | (active & (self._rho_next <= 0.0))
        x = int(np.argmax(bad)) if bad.any() else int(np.argmin(self._rho_next))
        cell = tuple(int(c) for c in np.unravel_index(x, self.dims))
        if not finite[x]:
            reason = "non-finite population state"
        else:
            reason = f"non-positive density rho={self._rho_next[x]:.4g}"
        raise DivergenceError(reason, cell=cell, iteration=self.iteration)

    # ------------------------------------------------------------------ edits

    def box_indices(self, lo, hi) -> np.ndarray:
        """Flat indices of the half-open box lo <= c < hi."""
        lo = tuple(int(v) for v in lo)
        hi = tuple(int(v) for v in hi)
        if len(lo) != len(self.dims) or len(hi) != len(self.dims):
            raise CommandError(3, "region rank does not match grid")
        for a in range(len(self.dims)):
            if not (0 <= lo[a] < hi[a] <= self.dims[a]):
                raise CommandError(3, f"region out of bounds on axis {a}: [{lo[a]}, {hi[a]})")
        sl = tuple(slice(lo[a], hi[a]) for a in range(len(self.dims)))
        return np.arange(self.n, dtype=np.int64).reshape(self.dims)[sl].ravel()

    def set_cells(self, cells, flag, fill=None) -> np.ndarray:
        """Apply a flag edit; returns the cells whose flags changed.

        `flag` and `fill` may be scalars or per-cell arrays. Cells are applied
        in list order (later entries win). Populations change only on the
        edited cells; neighbor repairs (fluid touching gas becomes interface)
        change flags but keep populations.
        """
        cells = np.atleast_1d(np.asarray(cells, dtype=np.int64))
        if cells.size == 0:
            return cells
        if cells.min() < 0 or cells.max() >= self.n:
            raise CommandError(3, "cell index out of bounds")
        flag_arr = np.broadcast_to(np.asarray(flag, dtype=np.uint8), cells.shape)
        if flag_arr.max() > fl.MAX_FLAG:
            raise CommandError(3, f"unknown flag value {int(flag_arr.max())}")
        if fill is None:
            fill_arr = np.full(cells.shape, np.nan)
        else:
            fill_arr = np.broadcast_to(np.asarray(fill, dtype=np.float64), cells.shape)
        io_mask = (flag_arr == fl.INLET) | (flag_arr == fl.OUTLET)
        if io_mask.any():
            on_boundary = fl.boundary_cell_mask(self.dims)
            if not on_boundary[cells[io_mask]].all():
                raise CommandError(3, "inlet/outlet cells must lie on the domain boundary")

        for x, new_flag, f_val in zip(cells.tolist(), flag_arr.tolist(), fill_arr.tolist()):
            self._apply_cell(x, int(new_flag), f_val)

        self._repair_after_edit(cells)
        self.flags_version += 1
        self._io_version += 1
        return cells

    def _apply_cell(self, x: int, new_flag: int, f_val: float) -> None:
        old = int(self.flags[x])
        if new_flag == fl.FLUID:
            if old in (fl.WALL, fl.GAS):
                rs = [self.rho[s] for s in self._nbrs(x) if self.flags[s] == fl.FLUID]
                rm = float(np.mean(rs)) if rs else 1.0
                self.f[:, x] = equilibrium_cell(rm, (0.0, 0.0, 0.0), self.model)
                self.rho[x] = rm
                self.u[:, x] = 0.0
            self.mass[x] = self.rho[x]
            self.fill[x] = 1.0
            self.bc_vel[:, x] = 0.0
        elif new_flag in (fl.WALL, fl.GAS):
            self.f[:, x] = 0.0
            self.mass[x] = 0.0
            self.fill[x] = 0.0
            self.rho[x] = 1.0
            self.u[:, x] = 0.0
            self.bc_vel[:, x] = 0.0
        elif new_flag == fl.INTERFACE:
            if old in (fl.WALL, fl.GAS):
                self.f[:, x] = equilibrium_cell(1.0, (0.0, 0.0, 0.0), self.model)
                self.rho[x] = 1.0
                self.u[:, x] = 0.0
            tf = f_val if np.isfinite(f_val) else (1.0 if old == fl.FLUID else 0.5)
            tf = min(max(tf, 0.0), 1.0)
            self.mass[x] = tf * self.rho[x]
            self.fill[x] = tf
            self.bc_vel[:, x] = 0.0
        elif new_flag == fl.INLET:
            self.bc_vel[:, x] = self.default_inlet_velocity
            self.f[:, x] = equilibrium_cell(1.0, self.bc_vel[:, x], self.model)
            self.rho[x] = 1.0
            self.u[:, x] = self.bc_vel[:, x]
            self.mass[x] = 1.0
            self.fill[x] = 1.0
        elif new_flag == fl.OUTLET:
            self.f[:, x] = equilibrium_cell(1.0, (0.0, 0.0, 0.0), self.model)
            self.rho[x] = 1.0
            self.u[:, x] = 0.0
            self.mass[x] = 1.0
            self.fill[x] = 1.0
        self.flags[x] = new_flag

    def _nbrs(self, x: int) -> list[int]:
        seen: list[int] = []
        for i in range(1, self.model.q):
            s = int(self.nbr[i, x])
            if s != x and s not in seen:
                seen.append(s)
        return seen

    def _repair_after_edit(self, cells: np.ndarray) -> int:
        """Restore the no-fluid-next-to-gas invariant around edited cells.

        Fluid cells are demoted to interface (keeping their populations), so
        non-edited cells' populations stay bit-identical.
        """
        candidates: list[int] = []
        for x in cells.tolist():
            candidates.append(int(x))
            candidates.extend(self._nbrs(int(x)))
        repaired = 0
        for x in sorted(set(candidates)):
            if self.flags[x] != fl.FLUID:
                continue
            if any(self.flags[s] == fl.GAS for s in self._nbrs(x)):
                self.flags[x] = fl.INTERFACE
                self.mass[x] = self.rho[x]
                self.fill[x] = 1.0
                repaired += 1
        return repaired

    def move_region(self, lo, hi, offset) -> None:
        """Move a region by offset: vacated cells become fluid, target becomes wall.

        Equivalent to set_cells(region -> fluid) then set_cells(region+offset -> wall).
        """
        offset = tuple(int(v) for v in offset)
        if len(offset) != len(self.dims):
            raise CommandError(3, "offset rank does not match grid")
        old = self.box_indices(lo, hi)
        new_lo = tuple(lo[a] + offset[a] for a in range(len(self.dims)))
        new_hi = tuple(hi[a] + offset[a] for a in range(len(self.dims)))
        new = self.box_indices(new_lo, new_hi)  # validates target bounds
        self.set_cells(old, fl.FLUID)
        self.set_cells(new, fl.WALL)

    def set_param(self, name: str, values) -> None:
        values = np.asarray(values, dtype=np.float64).ravel()
        if name == "tau":
            if values.size != 1:
                raise CommandError(3, "tau takes exactly one value")
            validate_tau(float(values[0]))
            self.params.tau = float(values[0])
        elif name == "gravity":
            if values.size != self.model.dim:
                raise CommandError(3, f"gravity takes {self.model.dim} components")
            if not np.isfinite(values).all():
                raise CommandError(3, "gravity must be finite")
            g = np.zeros(3)
            g[: values.size] = values
            self.params.gravity = g
        elif name in ("inlet_velocity", "wall_velocity"):
            if values.size != self.model.dim:
                raise CommandError(3, f"{name} takes {self.model.dim} components")
            v = np.zeros(3)
            v[: values.size] = values
            validate_speed(v, name)
            target = fl.INLET if name == "inlet_velocity" else fl.WALL
            idx = np.flatnonzero(self.flags == target)
            self.bc_vel[:, idx] = v[:, None]
            if name == "inlet_velocity":
                self.default_inlet_velocity = v
        else:
            raise CommandError(3, f"unknown parameter {name!r}")

    # ------------------------------------------------------------- validation

    def validate_invariants(self) -> list[str]:
        return fl.scan_invariants(self.flags, self.fill, self.dims, self.nbr)
