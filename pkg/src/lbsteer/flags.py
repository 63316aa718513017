"""Cell type flags, grid adjacency, invariant checks and derived boundary sets.

Grids are stored flat in C order over dims (nx, ny[, nz]); the flat index of
cell (x, y, z) is (x * ny + y) * nz + z. The same linearization is used on the
wire (SET_CELLS indices, GEOMETRY arrays).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .lattice import LatticeModel

FLUID = 0
INTERFACE = 1
WALL = 2
GAS = 3
INLET = 4
OUTLET = 5

FLAG_NAMES = {
    FLUID: "fluid",
    INTERFACE: "interface",
    WALL: "wall",
    GAS: "gas",
    INLET: "inlet",
    OUTLET: "outlet",
}
FLAG_BY_NAME = {v: k for k, v in FLAG_NAMES.items()}
MAX_FLAG = OUTLET


def neighbor_table(dims: tuple, model: LatticeModel) -> np.ndarray:
    """Pull-neighbor table: nbr[i, x] = flat index of cell x - c_i (periodic).

    The push destination of direction i from cell x is nbr[opposite[i], x].
    """
    idx = np.arange(int(np.prod(dims)), dtype=np.int32).reshape(dims)
    axes = tuple(range(len(dims)))
    nbr = np.empty((model.q, idx.size), dtype=np.int32)
    for i in range(model.q):
        shift = tuple(int(c) for c in model.velocities_int[i, : len(dims)])
        nbr[i] = np.roll(idx, shift=shift, axis=axes).ravel()
    return np.ascontiguousarray(nbr)


def default_fill(flags: np.ndarray, fill: np.ndarray | None) -> np.ndarray:
    """Normalize a fill array against flags (fluid 1, wall/gas 0, interface clipped)."""
    out = np.zeros(flags.shape, dtype=np.float64)
    if fill is not None:
        out[:] = np.clip(np.asarray(fill, dtype=np.float64), 0.0, 1.0)
    else:
        out[flags == INTERFACE] = 0.5
    out[(flags == FLUID) | (flags == INLET) | (flags == OUTLET)] = 1.0
    out[(flags == WALL) | (flags == GAS)] = 0.0
    return out


def boundary_cell_mask(dims: tuple) -> np.ndarray:
    """Boolean flat mask of cells on the domain boundary."""
    mask = np.zeros(dims, dtype=bool)
    for ax in range(len(dims)):
        sl = [slice(None)] * len(dims)
        sl[ax] = 0
        mask[tuple(sl)] = True
        sl[ax] = dims[ax] - 1
        mask[tuple(sl)] = True
    return mask.ravel()


def validate_flags(flags: np.ndarray, dims: tuple) -> None:
    """Reject unknown flag bytes and off-boundary inlet/outlet cells."""
    if flags.max(initial=0) > MAX_FLAG:
        bad = int(np.argmax(flags > MAX_FLAG))
        raise ConfigError(f"unknown flag byte {int(flags[bad])} at cell index {bad}")
    io = (flags == INLET) | (flags == OUTLET)
    if io.any():
        off = io & ~boundary_cell_mask(dims)
        if off.any():
            bad = int(np.argmax(off))
            raise ConfigError(f"inlet/outlet cell {bad} is not on the domain boundary")


def repair_fluid_gas_contacts(flags: np.ndarray, nbr: np.ndarray) -> np.ndarray:
    """Turn fluid cells that touch gas into interface cells.

    Returns the flat indices of converted cells. A single pass suffices:
    converting fluid cells cannot create new fluid/gas adjacencies.
    """
    gas_adjacent = np.zeros(flags.shape, dtype=bool)
    for i in range(1, nbr.shape[0]):
        gas_adjacent |= flags[nbr[i]] == GAS
    converted = np.flatnonzero((flags == FLUID) & gas_adjacent)
    flags[converted] = INTERFACE
    return converted


def scan_invariants(flags: np.ndarray, fill: np.ndarray, dims: tuple, nbr: np.ndarray) -> list[str]:
    """Full-grid invariant scan; returns human-readable violations (empty = ok)."""
    problems: list[str] = []
    fluid = flags == FLUID
    for i in range(1, nbr.shape[0]):
        bad = fluid & (flags[nbr[i]] == GAS)
        if bad.any():
            x = int(np.argmax(bad))
            problems.append(f"fluid cell {x} is lattice-adjacent to gas (direction {i})")
            break
    if (fill[fluid] != 1.0).any():
        problems.append("fluid cell with fill != 1")
    zero = (flags == WALL) | (flags == GAS)
    if (fill[zero] != 0.0).any():
        problems.append("wall/gas cell with fill != 0")
    iface = flags == INTERFACE
    if ((fill[iface] < 0.0) | (fill[iface] > 1.0)).any():
        problems.append("interface cell with fill outside [0, 1]")
    io = (flags == INLET) | (flags == OUTLET)
    if (io & ~boundary_cell_mask(dims)).any():
        problems.append("inlet/outlet cell off the domain boundary")
    return problems


class BoundarySet:
    """Link lists derived from the flag grid, rebuilt lazily on flag edits.

    wall_links: (cell, direction) pairs where an active cell's pull source
    along `direction` is a wall; inlet_cells / outlet_cells are flat indices;
    outlet_src[k] is the interior cell an outlet cell copies from (nearest
    non-wall cell along the inward normal).
    """

    def __init__(self, wall_links: np.ndarray, inlet_cells: np.ndarray,
                 inlet_src: np.ndarray, outlet_cells: np.ndarray,
                 outlet_src: np.ndarray):
        self.wall_links = wall_links  # (m, 2) int64, sorted by (cell, dir)
        self.inlet_cells = inlet_cells
        self.inlet_src = inlet_src  # adjacent interior cell providing the density
        self.outlet_cells = outlet_cells
        self.outlet_src = outlet_src

    @staticmethod
    def _links_for(flags: np.ndarray, nbr: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
        active = (flags == FLUID) | (flags == INTERFACE)
        rows = []
        for i in range(1, nbr.shape[0]):
            wall_src = flags[nbr[i]] == WALL
            m = active & wall_src
            if cells is not None:
                keep = np.zeros(flags.shape, dtype=bool)
                keep[cells] = True
                m &= keep
            found = np.flatnonzero(m)
            if found.size:
                rows.append(np.stack([found, np.full(found.size, i, dtype=np.int64)], axis=1))
        if not rows:
            return np.empty((0, 2), dtype=np.int64)
        links = np.concatenate(rows, axis=0)
        order = np.lexsort((links[:, 1], links[:, 0]))
        return links[order]

    @staticmethod
    def _outlet_sources(flags: np.ndarray, dims: tuple, cells: np.ndarray) -> np.ndarray:
        grid_flags = flags.reshape(dims)
        src = np.empty(cells.size, dtype=np.int64)
        strides = np.array([int(np.prod(dims[a + 1:])) for a in range(len(dims))], dtype=np.int64)
        for k, x in enumerate(cells):
            coord = list(np.unravel_index(int(x), dims))
            normal = None
            for a in range(len(dims)):
                if coord[a] == 0:
                    normal = (a, 1)
                    break
                if coord[a] == dims[a] - 1:
                    normal = (a, -1)
                    break
            if normal is None:  # not on boundary; validated elsewhere
                src[k] = x
                continue
            a, step = normal
            c = coord[a] + step
            while 0 <= c < dims[a]:
                probe = coord.copy()
                probe[a] = c
                flat = int(np.dot(probe, strides))
                if grid_flags.ravel()[flat] != WALL and flat != x:
                    src[k] = flat
                    break
                c += step
            else:
                src[k] = x
        return src

    @classmethod
    def build(cls, flags: np.ndarray, dims: tuple, nbr: np.ndarray) -> "BoundarySet":
        inlet = np.flatnonzero(flags == INLET)
        outlet = np.flatnonzero(flags == OUTLET)
        return cls(
            wall_links=cls._links_for(flags, nbr),
            inlet_cells=inlet,
            inlet_src=cls._outlet_sources(flags, dims, inlet),
            outlet_cells=outlet,
            outlet_src=cls._outlet_sources(flags, dims, outlet),
        )

    def updated(self, flags: np.ndarray, dims: tuple, nbr: np.ndarray,
                edited_cells: np.ndarray) -> "BoundarySet":
        """Incremental rebuild: only links whose cell is in the edit
        neighborhood are recomputed; must equal a from-scratch build."""
        affected = set(int(c) for c in edited_cells)
        for i in range(1, nbr.shape[0]):
            for c in edited_cells:
                affected.add(int(nbr[i, c]))
        aff = np.fromiter(affected, dtype=np.int64)
        keep = ~np.isin(self.wall_links[:, 0], aff)
        fresh = self._links_for(flags, nbr, cells=aff)
        links = np.concatenate([self.wall_links[keep], fresh], axis=0)
        order = np.lexsort((links[:, 1], links[:, 0]))
        inlet = np.flatnonzero(flags == INLET)
        outlet = np.flatnonzero(flags == OUTLET)
        return BoundarySet(links[order], inlet,
                           self._outlet_sources(flags, dims, inlet), outlet,
                           self._outlet_sources(flags, dims, outlet))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BoundarySet)
            and np.array_equal(self.wall_links, other.wall_links)
            and np.array_equal(self.inlet_cells, other.inlet_cells)
            and np.array_equal(self.inlet_src, other.inlet_src)
            and np.array_equal(self.outlet_cells, other.outlet_cells)
            and np.array_equal(self.outlet_src, other.outlet_src)
        )
