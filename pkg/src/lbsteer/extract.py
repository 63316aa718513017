"""Visualization data extracted from simulation state.

Slices are 2D planes over the grid's remaining axes in ascending order, with
wall cells masked (NaN value + validity 0). Interface contours come from
marching squares (2D) or marching cubes (3D) on the fill fraction at level
0.5, streamlines from RK4 over a bilinearly interpolated velocity slice.
All functions are pure and operate on snapshots taken between iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flags as fl
from ._mc_tables import CUBE_EDGES, EDGE_TABLE, TRI_TABLE
from .errors import CommandError
from .lattice import CS2

FIELD_DENSITY = "density"
FIELD_PRESSURE = "pressure"
FIELD_SPEED = "speed"
FIELD_VELOCITY = "velocity_xy"
FIELD_FILL = "fill"
FIELD_VORTICITY = "vorticity"
FIELD_INTERFACE = "interface"
FIELD_STREAMLINES = "streamlines"

SCALAR_FIELDS = (FIELD_DENSITY, FIELD_PRESSURE, FIELD_SPEED, FIELD_FILL, FIELD_VORTICITY)
ALL_FIELDS = SCALAR_FIELDS + (FIELD_VELOCITY, FIELD_INTERFACE, FIELD_STREAMLINES)

# streamline subscriptions are auto-seeded on a sparse lattice
STREAM_SEED_SPACING = 8
STREAM_STEP = 0.25
STREAM_MAX_STEPS = 400
STREAM_MIN_SPEED = 1e-8


@dataclass(frozen=True)
class SliceSpec:
    """A cutting plane: axis in {0,1,2}, cell layer index, field name."""

    field: str
    axis: int = 2
    index: int = 0

    def validate(self, dims: tuple) -> None:
        if self.field not in ALL_FIELDS:
            raise CommandError(5, f"unknown field {self.field!r}")
        if len(dims) == 2:
            if self.axis != 2 or self.index != 0:
                raise CommandError(5, "2D simulations expose only the z=0 slice (axis 2, index 0)")
            return
        if self.axis not in (0, 1, 2):
            raise CommandError(5, f"slice axis must be 0, 1 or 2 (got {self.axis})")
        if not (0 <= self.index < dims[self.axis]):
            raise CommandError(5, f"slice index {self.index} out of bounds for axis {self.axis}")


def plane_axes(dims: tuple, axis: int) -> tuple[int, ...]:
    """In-plane source axes (ascending) for a slice along `axis`."""
    if len(dims) == 2:
        return (0, 1)
    return tuple(a for a in range(3) if a != axis)


def _take_plane(grid: np.ndarray, dims: tuple, axis: int, index: int) -> np.ndarray:
    if len(dims) == 2:
        return grid
    return np.take(grid, index, axis=axis)


def slice_planes(sim, spec: SliceSpec) -> dict:
    """Raw planes needed to build any field: rho, fill, flags, in-plane velocity."""
    spec.validate(sim.dims)
    dims = sim.dims
    axes = plane_axes(dims, spec.axis)
    rho = _take_plane(sim.grid("rho"), dims, spec.axis, spec.index).copy()
    fill = _take_plane(sim.grid("fill"), dims, spec.axis, spec.index).copy()
    flags = _take_plane(sim.grid("flags"), dims, spec.axis, spec.index).copy()
    ug = sim.velocity_grid()
    u1 = _take_plane(ug[axes[0]], dims, spec.axis, spec.index).copy()
    u2 = _take_plane(ug[axes[1]], dims, spec.axis, spec.index).copy()
    if len(dims) == 3:
        u3 = _take_plane(ug[spec.axis], dims, spec.axis, spec.index).copy()
    else:
        u3 = np.zeros_like(u1)
    return {"rho": rho, "fill": fill, "flags": flags, "u1": u1, "u2": u2, "u_out": u3}


def extract_slice(sim, spec: SliceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Scalar or vector slice plus a validity mask (0 at wall cells).

    Wall cells carry NaN in the value channels. Pressure is cs2*(rho - 1).
    """
    p = slice_planes(sim, spec)
    wall = p["flags"] == fl.WALL
    validity = (~wall).astype(np.float64)
    if spec.field == FIELD_DENSITY:
        data = p["rho"]
    elif spec.field == FIELD_PRESSURE:
        data = CS2 * (p["rho"] - 1.0)
    elif spec.field == FIELD_SPEED:
        data = np.sqrt(p["u1"] ** 2 + p["u2"] ** 2 + p["u_out"] ** 2)
    elif spec.field == FIELD_FILL:
        data = p["fill"]
    elif spec.field == FIELD_VORTICITY:
        data = vorticity(p["u1"], p["u2"], validity.astype(bool))
    elif spec.field == FIELD_VELOCITY:
        data = np.stack([p["u1"], p["u2"]], axis=-1)
        data[wall] = np.nan
        return data, validity
    else:
        raise CommandError(5, f"field {spec.field!r} is not a slice field")
    data = data.copy()
    data[wall] = np.nan
    return data, validity


def vorticity(u1: np.ndarray, u2: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Plane curl d(u2)/d1 - d(u1)/d2, central differences where both neighbors
    are valid, one-sided toward the valid side, 0 if neither; exact on linear
    fields in the interior."""

    def deriv(a: np.ndarray, axis: int) -> np.ndarray:
        vp = np.zeros_like(valid, dtype=bool)
        vm = np.zeros_like(vp)
        ap = np.zeros_like(a)
        am = np.zeros_like(a)
        sl_in = [slice(None)] * a.ndim
        sl_hi = [slice(None)] * a.ndim
        sl_in[axis] = slice(None, -1)
        sl_hi[axis] = slice(1, None)
        vp[tuple(sl_in)] = valid[tuple(sl_hi)]
        ap[tuple(sl_in)] = a[tuple(sl_hi)]
        vm[tuple(sl_hi)] = valid[tuple(sl_in)]
        am[tuple(sl_hi)] = a[tuple(sl_in)]
        fwd = np.where(vp, ap, a)
        back = np.where(vm, am, a)
        steps = vp.astype(np.float64) + vm.astype(np.float64)
        return np.where(steps > 0, (fwd - back) / np.maximum(steps, 1.0), 0.0)

    out = deriv(u2, 0) - deriv(u1, 1)
    out[~valid] = np.nan
    return out


# ------------------------------------------------------------ marching squares

# segment endpoints per case, as pairs of local edge ids; edges of block (i,j):
# 0 bottom (c0-c1), 1 right (c1-c2), 2 top (c2-c3), 3 left (c3-c0); corner bit
# set when fill > level. Cases 5 and 10 resolve via the asymptotic decider.
_MS_SEGMENTS = {
    0: [], 15: [],
    1: [(3, 0)], 14: [(3, 0)],
    2: [(0, 1)], 13: [(0, 1)],
    3: [(3, 1)], 12: [(3, 1)],
    4: [(1, 2)], 11: [(1, 2)],
    6: [(0, 2)], 9: [(0, 2)],
    7: [(3, 2)], 8: [(3, 2)],
}


def marching_squares(fill: np.ndarray, level: float = 0.5):
    """Contour of a 2D scalar grid at `level`.

    Returns (vertices (V,2) float64 in cell-center coordinates, normals (V,2)
    pointing from high fill toward low, segments (S,2) int vertex indices).
    Vertices lie on cell edges, deduplicated so shared crossings are shared.
    """
    a = np.asarray(fill, dtype=np.float64)
    n1, n2 = a.shape
    inside = a > level
    c0 = inside[:-1, :-1]
    c1 = inside[1:, :-1]
    c2 = inside[1:, 1:]
    c3 = inside[:-1, 1:]
    case = (c0.astype(np.int8) + (c1 << 1) + (c2 << 2) + (c3 << 3))
    mixed = np.argwhere((case != 0) & (case != 15))

    gx, gy = _grid_gradient(a)
    verts: list[tuple[float, float]] = []
    normals: list[tuple[float, float]] = []
    segments: list[tuple[int, int]] = []
    vert_ids: dict[tuple, int] = {}

    def edge_vertex(i: int, j: int, edge: int) -> int:
        # global edge key: (orientation, low corner); 0 = along axis 0
        if edge == 0:
            key = (0, i, j)
            pa, pb = (i, j), (i + 1, j)
        elif edge == 1:
            key = (1, i + 1, j)
            pa, pb = (i + 1, j), (i + 1, j + 1)
        elif edge == 2:
            key = (0, i, j + 1)
            pa, pb = (i, j + 1), (i + 1, j + 1)
        else:
            key = (1, i, j)
            pa, pb = (i, j), (i, j + 1)
        vid = vert_ids.get(key)
        if vid is not None:
            return vid
        fa = a[pa]
        fb = a[pb]
        t = (level - fa) / (fb - fa)
        pos = (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))
        g1 = _bilinear(gx, pos[0], pos[1])
        g2 = _bilinear(gy, pos[0], pos[1])
        norm = np.hypot(g1, g2)
        nvec = (-g1 / norm, -g2 / norm) if norm > 0 else (0.0, 0.0)
        vid = len(verts)
        verts.append(pos)
        normals.append(nvec)
        vert_ids[key] = vid
        return vid

    for i, j in mixed:
        c = int(case[i, j])
        if c == 5 or c == 10:
            center_inside = 0.25 * (a[i, j] + a[i + 1, j] + a[i + 1, j + 1] + a[i, j + 1]) > level
            if c == 5:  # corners c0, c2 inside
                segs = [(0, 1), (2, 3)] if center_inside else [(3, 0), (1, 2)]
            else:  # corners c1, c3 inside
                segs = [(3, 0), (1, 2)] if center_inside else [(0, 1), (2, 3)]
        else:
            segs = _MS_SEGMENTS[c]
        for ea, eb in segs:
            segments.append((edge_vertex(i, j, ea), edge_vertex(i, j, eb)))

    v = np.asarray(verts, dtype=np.float64).reshape(-1, 2)
    nr = np.asarray(normals, dtype=np.float64).reshape(-1, 2)
    s = np.asarray(segments, dtype=np.int64).reshape(-1, 2)
    return v, nr, s


def _grid_gradient(a: np.ndarray):
    if a.ndim == 2:
        gx, gy = np.gradient(a)
        return gx, gy
    return np.gradient(a)


def _bilinear(a: np.ndarray, x: float, y: float) -> float:
    n1, n2 = a.shape
    x = min(max(x, 0.0), n1 - 1.0)
    y = min(max(y, 0.0), n2 - 1.0)
    i = min(int(x), n1 - 2) if n1 > 1 else 0
    j = min(int(y), n2 - 2) if n2 > 1 else 0
    tx = x - i
    ty = y - j
    return float(
        a[i, j] * (1 - tx) * (1 - ty)
        + a[min(i + 1, n1 - 1), j] * tx * (1 - ty)
        + a[i, min(j + 1, n2 - 1)] * (1 - tx) * ty
        + a[min(i + 1, n1 - 1), min(j + 1, n2 - 1)] * tx * ty
    )


# -------------------------------------------------------------- marching cubes

_CORNER_OFFSETS = (
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
)


def marching_cubes(fill: np.ndarray, level: float = 0.5):
    """Isosurface of a 3D scalar grid at `level` using the fixed 256-case table.

    Returns (vertices (V,3), normals (V,3), triangles (T,3)). Vertices lie on
    cell edges; shared edges share vertices, so closed surfaces are watertight.
    """
    a = np.asarray(fill, dtype=np.float64)
    inside = a > level
    c = [inside[ox:a.shape[0] - 1 + ox, oy:a.shape[1] - 1 + oy, oz:a.shape[2] - 1 + oz]
         for ox, oy, oz in _CORNER_OFFSETS]
    case = np.zeros(c[0].shape, dtype=np.int32)
    for bit, corner in enumerate(c):
        case |= corner.astype(np.int32) << bit
    mixed = np.argwhere((case != 0) & (case != 255))

    grads = np.gradient(a)
    verts: list[tuple] = []
    normals: list[tuple] = []
    tris: list[tuple] = []
    vert_ids: dict[tuple, int] = {}

    def edge_vertex(origin, edge: int) -> int:
        ca, cb = CUBE_EDGES[edge]
        pa = tuple(origin[k] + _CORNER_OFFSETS[ca][k] for k in range(3))
        pb = tuple(origin[k] + _CORNER_OFFSETS[cb][k] for k in range(3))
        axis = next(k for k in range(3) if pa[k] != pb[k])
        low = tuple(min(pa[k], pb[k]) for k in range(3))
        key = (axis, low)
        vid = vert_ids.get(key)
        if vid is not None:
            return vid
        fa = a[pa]
        fb = a[pb]
        t = (level - fa) / (fb - fa)
        pos = tuple(pa[k] + t * (pb[k] - pa[k]) for k in range(3))
        g = [_trilinear(grads[k], pos) for k in range(3)]
        norm = float(np.sqrt(g[0] ** 2 + g[1] ** 2 + g[2] ** 2))
        nvec = tuple(-gk / norm for gk in g) if norm > 0 else (0.0, 0.0, 0.0)
        vid = len(verts)
        verts.append(pos)
        normals.append(nvec)
        vert_ids[key] = vid
        return vid

    for origin in mixed:
        tri = TRI_TABLE[int(case[tuple(origin)])]
        for k in range(0, len(tri), 3):
            tris.append(tuple(edge_vertex(origin, tri[k + m]) for m in range(3)))

    v = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    nr = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    return v, nr, t


def _trilinear(a: np.ndarray, pos) -> float:
    x = [min(max(pos[k], 0.0), a.shape[k] - 1.0) for k in range(3)]
    i = [min(int(x[k]), a.shape[k] - 2) if a.shape[k] > 1 else 0 for k in range(3)]
    t = [x[k] - i[k] for k in range(3)]
    out = 0.0
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                w = ((t[0] if dx else 1 - t[0])
                     * (t[1] if dy else 1 - t[1])
                     * (t[2] if dz else 1 - t[2]))
                out += w * a[min(i[0] + dx, a.shape[0] - 1),
                             min(i[1] + dy, a.shape[1] - 1),
                             min(i[2] + dz, a.shape[2] - 1)]
    return float(out)


def extract_interface(fill: np.ndarray, level: float = 0.5):
    """Dimension dispatch: marching squares for 2D grids, cubes for 3D."""
    if fill.ndim == 2:
        return marching_squares(fill, level)
    if fill.ndim == 3:
        return marching_cubes(fill, level)
    raise ValueError(f"fill grid must be 2D or 3D, got {fill.ndim}D")


# ----------------------------------------------------------------- streamlines

def trace_streamlines(velocity: np.ndarray, wall_mask: np.ndarray, seeds,
                      h: float = STREAM_STEP, max_steps: int = STREAM_MAX_STEPS,
                      min_speed: float = STREAM_MIN_SPEED) -> list[np.ndarray]:
    """RK4 streamlines through a bilinearly interpolated velocity slice.

    velocity: (n1, n2, 2); seeds: iterable of (x, y) in cell-center
    coordinates. A line ends on domain exit, wall entry, stagnation
    (|u| < min_speed) or after max_steps. Seeds on walls yield empty lines.
    """
    n1, n2 = wall_mask.shape
    u1 = velocity[..., 0]
    u2 = velocity[..., 1]

    def vel(p):
        return _bilinear(u1, p[0], p[1]), _bilinear(u2, p[0], p[1])

    def in_domain(p):
        return 0.0 <= p[0] <= n1 - 1.0 and 0.0 <= p[1] <= n2 - 1.0

    def on_wall(p):
        return bool(wall_mask[int(round(p[0])), int(round(p[1]))])

    lines = []
    for seed in seeds:
        p = (float(seed[0]), float(seed[1]))
        if not in_domain(p) or on_wall(p):
            lines.append(np.empty((0, 2)))
            continue
        pts = [p]
        for _ in range(max_steps):
            k1 = vel(p)
            if np.hypot(*k1) < min_speed:
                break
            q = (p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1])
            if not in_domain(q):
                break
            k2 = vel(q)
            q = (p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1])
            if not in_domain(q):
                break
            k3 = vel(q)
            q = (p[0] + h * k3[0], p[1] + h * k3[1])
            if not in_domain(q):
                break
            k4 = vel(q)
            p = (
                p[0] + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                p[1] + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            )
            if not in_domain(p) or on_wall(p):
                break
            pts.append(p)
        lines.append(np.asarray(pts, dtype=np.float64))
    return lines


def default_seeds(n1: int, n2: int, spacing: int = STREAM_SEED_SPACING):
    half = spacing // 2
    return [(float(i), float(j))
            for i in range(half, n1, spacing)
            for j in range(half, n2, spacing)]


# ------------------------------------------------------------- frame payloads

def build_frame_payload(sim, spec: SliceSpec) -> tuple[tuple[int, int, int], bytes]:
    """(dims triple, little-endian f32 payload) for a subscription frame.

    Scalar fields: dims (n1, n2, 2), planes [values, validity].
    velocity_xy:   dims (n1, n2, 3), planes [u1, u2, validity].
    interface:     dims (V, S, 2), V vertices as (x, y, nx, ny) then S segment
                   index pairs, all f32.
    streamlines:   dims (L, total_points, 0), per line [count, x0, y0, ...].
    """
    if spec.field == FIELD_INTERFACE:
        p = slice_planes(sim, spec)
        fill = np.where(p["flags"] == fl.WALL, 0.0, p["fill"])
        v, nr, s = marching_squares(fill, 0.5)
        payload = np.concatenate([
            np.concatenate([v, nr], axis=1).ravel(),
            s.astype(np.float64).ravel(),
        ]) if v.size or s.size else np.empty(0)
        return (v.shape[0], s.shape[0], 2), payload.astype("<f4").tobytes()
    if spec.field == FIELD_STREAMLINES:
        p = slice_planes(sim, spec)
        wall = p["flags"] == fl.WALL
        velocity = np.stack([p["u1"], p["u2"]], axis=-1)
        lines = trace_streamlines(velocity, wall, default_seeds(*wall.shape))
        lines = [ln for ln in lines if ln.shape[0] > 1]
        chunks = []
        total = 0
        for ln in lines:
            chunks.append(np.concatenate([[float(ln.shape[0])], ln.ravel()]))
            total += ln.shape[0]
        payload = np.concatenate(chunks) if chunks else np.empty(0)
        return (len(lines), total, 0), payload.astype("<f4").tobytes()
    if spec.field == FIELD_VELOCITY:
        data, validity = extract_slice(sim, spec)
        planes = np.stack([data[..., 0], data[..., 1], validity])
        return (data.shape[0], data.shape[1], 3), planes.astype("<f4").tobytes()
    data, validity = extract_slice(sim, spec)
    planes = np.stack([data, validity])
    return (data.shape[0], data.shape[1], 2), planes.astype("<f4").tobytes()
