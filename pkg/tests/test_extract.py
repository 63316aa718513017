"""Slices, contours, isosurfaces, streamlines and vorticity."""

import numpy as np
import pytest

from conftest import closed_box, dam_box
from flows import taylor_green

from lbsteer import flags as fl
from lbsteer.core import FluidParams, Simulation
from lbsteer.errors import CommandError
from lbsteer.extract import (SliceSpec, build_frame_payload, default_seeds,
                             extract_interface, extract_slice, marching_cubes,
                             marching_squares, trace_streamlines, vorticity)
from lbsteer.lattice import CS2


# ---------------------------------------------------------------------- slices

def test_uniform_rest_fluid_slices():
    sim = closed_box((20, 14))
    rho, validity = extract_slice(sim, SliceSpec("density"))
    speed, _ = extract_slice(sim, SliceSpec("speed"))
    interior = validity.astype(bool)
    assert np.allclose(rho[interior], 1.0, atol=1e-12)
    assert np.allclose(speed[interior], 0.0, atol=1e-12)
    assert np.isnan(rho[~interior]).all()


def test_pressure_convention():
    sim = closed_box((12, 10))
    sim.set_state(np.full(sim.n, 1.2), np.zeros((2, sim.n)))
    p, validity = extract_slice(sim, SliceSpec("pressure"))
    assert np.allclose(p[validity.astype(bool)], CS2 * 0.2, atol=1e-12)


def test_hydrostatic_pressure_slice(hydrostatic_column):
    sim, g, surface = hydrostatic_column
    p, _ = extract_slice(sim, SliceSpec("pressure"))
    col = p[sim.dims[0] // 2]
    ys = np.arange(3, int(surface) - 3)
    expected = CS2 * 3.0 * g * (surface - ys)  # cs2 * (rho - 1)
    assert np.max(np.abs(col[ys] - expected) / expected) < 0.02


def test_mirrored_field_mirrors_slice():
    sim, _ = dam_box(dims=(30, 20), column=(10, 12))
    for _ in range(50):
        sim.step()
    data, validity = extract_slice(sim, SliceSpec("fill"))

    mirror, _ = dam_box(dims=(30, 20), column=(10, 12))
    mirror.flags = np.ascontiguousarray(sim.flags.reshape(sim.dims)[::-1]).ravel()
    mirror.fill = np.ascontiguousarray(sim.fill.reshape(sim.dims)[::-1]).ravel()
    mirror.mass = np.ascontiguousarray(sim.mass.reshape(sim.dims)[::-1]).ravel()
    mirror.rho = np.ascontiguousarray(sim.rho.reshape(sim.dims)[::-1]).ravel()
    m_data, m_validity = extract_slice(mirror, SliceSpec("fill"))
    assert np.array_equal(m_data, data[::-1], equal_nan=True)
    assert np.array_equal(m_validity, validity[::-1])


def test_3d_slice_axes():
    grid = np.full((8, 10, 6), fl.FLUID, dtype=np.uint8)
    sim, _ = Simulation.from_flags((8, 10, 6), grid)
    for axis, shape in ((0, (10, 6)), (1, (8, 6)), (2, (8, 10))):
        data, validity = extract_slice(sim, SliceSpec("density", axis=axis, index=2))
        assert data.shape == shape


def test_slice_spec_validation():
    sim = closed_box((10, 10))
    with pytest.raises(CommandError):
        SliceSpec("density", axis=0, index=0).validate(sim.dims)
    with pytest.raises(CommandError):
        SliceSpec("nope").validate(sim.dims)
    grid3 = np.full((6, 6, 6), fl.FLUID, dtype=np.uint8)
    sim3, _ = Simulation.from_flags((6, 6, 6), grid3)
    with pytest.raises(CommandError):
        SliceSpec("density", axis=1, index=6).validate(sim3.dims)


def test_slices_never_read_gas_populations():
    sim, _ = dam_box(dims=(30, 20), column=(10, 12))
    sim.f[:, sim.flags == fl.GAS] = np.nan
    for field in ("density", "pressure", "speed", "velocity_xy", "fill", "vorticity"):
        data, _ = extract_slice(sim, SliceSpec(field))
        gas_plane = (sim.grid("flags") == fl.GAS)
        interior = ~(sim.grid("flags") == fl.WALL)
        # values exist everywhere outside walls, even with poisoned gas f
        region = interior & ~gas_plane
        assert np.isfinite(np.asarray(data)[region]).all()


# ------------------------------------------------------------ marching squares

def test_step_function_contour_is_vertical_line():
    fill = np.zeros((8, 6))
    fill[:4, :] = 1.0
    verts, normals, segs = marching_squares(fill, 0.5)
    assert segs.shape[0] > 0
    assert np.allclose(verts[:, 0], 3.5, atol=1e-12)  # crossing between rows 3 and 4
    # normals point from fluid (low x) toward gas (high x)
    assert np.allclose(normals[:, 0], 1.0, atol=1e-12)


def test_all_fluid_grid_has_empty_contour():
    verts, normals, segs = marching_squares(np.ones((6, 6)), 0.5)
    assert verts.shape == (0, 2)
    assert segs.shape == (0, 2)


def test_contour_vertices_lie_on_level():
    rng = np.random.default_rng(12)
    base = rng.random((5, 5))
    # smooth random field via bilinear upsampling
    from numpy import interp
    x = np.linspace(0, 4, 33)
    fill = np.empty((33, 33))
    for k in range(33):
        rows = np.array([interp(x[k], np.arange(5), base[:, j]) for j in range(5)])
        fill[k] = interp(x, np.arange(5), rows)
    verts, _, segs = marching_squares(fill, 0.5)
    assert verts.shape[0] > 0

    def bilinear(a, p):
        i, j = int(min(p[0], 31)), int(min(p[1], 31))
        tx, ty = p[0] - i, p[1] - j
        return (a[i, j] * (1 - tx) * (1 - ty) + a[i + 1, j] * tx * (1 - ty)
                + a[i, j + 1] * (1 - tx) * ty + a[i + 1, j + 1] * tx * ty)

    for v in verts:
        assert abs(bilinear(fill, v) - 0.5) < 1e-6


def test_contour_is_watertight_in_the_interior():
    # every interior vertex is used by exactly two segments
    rng = np.random.default_rng(5)
    fill = rng.random((4, 4))
    x = np.linspace(0, 3, 25)
    up = np.empty((25, 25))
    for k in range(25):
        rows = np.array([np.interp(x[k], np.arange(4), fill[:, j]) for j in range(4)])
        up[k] = np.interp(x, np.arange(4), rows)
    verts, _, segs = marching_squares(up, 0.5)
    use = np.zeros(verts.shape[0], dtype=int)
    for a, b in segs:
        use[a] += 1
        use[b] += 1
    border = ((verts[:, 0] < 0.5) | (verts[:, 0] > 23.5)
              | (verts[:, 1] < 0.5) | (verts[:, 1] > 23.5))
    assert np.all(use[~border] == 2)
    assert np.all(use > 0)


def test_saddle_cases_resolved_by_asymptotic_decider():
    # checkerboard block (case 5): connectivity follows the centre average
    fill = np.array([[1.0, 0.0], [0.0, 1.0]])

    def segment_midpoints(level):
        verts, _, segs = marching_squares(fill, level)
        assert segs.shape[0] == 2
        return [0.5 * (verts[a] + verts[b]) for a, b in segs]

    # centre (0.5) above the level: fluid corners join, contours hug gas corners
    mids = segment_midpoints(0.4)
    gas_corners = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    for corner in gas_corners:
        assert min(np.linalg.norm(m - corner) for m in mids) < 0.45
    # centre below the level: fluid corners separate, contours hug them instead
    mids = segment_midpoints(0.6)
    fluid_corners = [np.array([0.0, 0.0]), np.array([1.0, 1.0])]
    for corner in fluid_corners:
        assert min(np.linalg.norm(m - corner) for m in mids) < 0.45


def test_vertex_count_scales_with_interface_length():
    def circle_fill(n, r):
        x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        d = np.sqrt((x - n / 2) ** 2 + (y - n / 2) ** 2)
        return np.clip(r + 0.5 - d, 0.0, 1.0)

    v1, _, _ = marching_squares(circle_fill(32, 8), 0.5)
    v2, _, _ = marching_squares(circle_fill(64, 16), 0.5)
    ratio = v2.shape[0] / v1.shape[0]
    assert 1.5 < ratio < 2.6  # vertex count tracks circumference, not area


# -------------------------------------------------------------- marching cubes

def _sphere_fill(n, r):
    x, y, z = np.meshgrid(*[np.arange(n)] * 3, indexing="ij")
    d = np.sqrt((x - n / 2) ** 2 + (y - n / 2) ** 2 + (z - n / 2) ** 2)
    return np.clip(r + 0.5 - d, 0.0, 1.0)


def test_marching_cubes_sphere_is_watertight():
    fill = _sphere_fill(24, 7)
    verts, normals, tris = marching_cubes(fill, 0.5)
    assert tris.shape[0] > 100
    edges = {}
    for t in tris:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    assert all(v == 2 for v in edges.values())  # closed 2-manifold
    # Euler characteristic of a sphere: V - E + F = 2
    assert verts.shape[0] - len(edges) + tris.shape[0] == 2


def test_marching_cubes_vertices_on_level_and_radius():
    fill = _sphere_fill(24, 7)
    verts, normals, _ = marching_cubes(fill, 0.5)
    center = np.array([12.0, 12.0, 12.0])
    radii = np.linalg.norm(verts - center, axis=1)
    # edge-linear interpolation of a curved level set: O(h^2) radial error
    assert np.max(np.abs(radii - 7.0)) < 0.1
    # normals point outward (away from the filled interior)
    outward = (verts - center) / radii[:, None]
    dots = np.einsum("ij,ij->i", normals, outward)
    assert np.min(dots) > 0.9


def test_extract_interface_dispatches_by_rank():
    v2 = extract_interface(np.ones((5, 5)))
    assert len(v2) == 3 and v2[0].shape[1] == 2
    v3 = extract_interface(np.zeros((4, 4, 4)))
    assert len(v3) == 3 and v3[0].shape[1] == 3


# ----------------------------------------------------------------- streamlines

def test_uniform_velocity_gives_straight_lines():
    vel = np.zeros((20, 12, 2))
    vel[..., 0] = 0.04
    walls = np.zeros((20, 12), dtype=bool)
    lines = trace_streamlines(vel, walls, [(2.0, 6.0)], h=0.5, max_steps=200)
    ln = lines[0]
    assert ln.shape[0] > 10
    assert np.allclose(ln[:, 1], 6.0, atol=1e-12)
    assert np.all(np.diff(ln[:, 0]) > 0)


def test_rigid_rotation_streamline_stays_circular():
    n = 64
    omega = 0.1
    x, y = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float),
                       indexing="ij")
    c = (n - 1) / 2.0
    vel = np.stack([-omega * (y - c), omega * (x - c)], axis=-1)
    walls = np.zeros((n, n), dtype=bool)
    r0 = 10.0
    steps_per_rev = int(np.ceil(2 * np.pi / (0.1 * omega)))
    lines = trace_streamlines(vel, walls, [(c + r0, c)], h=0.1,
                              max_steps=steps_per_rev)
    ln = lines[0]
    radii = np.hypot(ln[:, 0] - c, ln[:, 1] - c)
    assert abs(radii[-1] - r0) / r0 < 0.01  # drift < 1% per revolution


def test_seed_inside_wall_gives_empty_polyline():
    vel = np.ones((10, 10, 2)) * 0.05
    walls = np.zeros((10, 10), dtype=bool)
    walls[5, 5] = True
    lines = trace_streamlines(vel, walls, [(5.1, 5.0)])
    assert lines[0].shape[0] == 0


def test_streamlines_terminate_on_stagnation_and_exit():
    vel = np.zeros((10, 10, 2))
    walls = np.zeros((10, 10), dtype=bool)
    still = trace_streamlines(vel, walls, [(4.0, 4.0)])
    assert still[0].shape[0] == 1  # no motion past the seed
    vel[..., 0] = 1.0
    runaway = trace_streamlines(vel, walls, [(8.0, 4.0)], h=0.5, max_steps=100)
    assert runaway[0][-1, 0] <= 9.0


def test_streamline_determinism():
    rng = np.random.default_rng(2)
    vel = rng.standard_normal((16, 16, 2)) * 0.01
    walls = np.zeros((16, 16), dtype=bool)
    seeds = default_seeds(16, 16)
    a = trace_streamlines(vel, walls, seeds)
    b = trace_streamlines(vel, walls, seeds)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


# ------------------------------------------------------------------- vorticity

def test_vorticity_uniform_flow_is_zero():
    u1 = np.full((12, 10), 0.05)
    u2 = np.full((12, 10), -0.02)
    valid = np.ones((12, 10), dtype=bool)
    w = vorticity(u1, u2, valid)
    assert np.allclose(w, 0.0, atol=1e-14)


def test_vorticity_rigid_rotation_exact():
    n = 16
    omega = 0.07
    x, y = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float),
                       indexing="ij")
    c = (n - 1) / 2
    u1 = -omega * (y - c)
    u2 = omega * (x - c)
    valid = np.ones((n, n), dtype=bool)
    w = vorticity(u1, u2, valid)
    # central differences are exact on linear fields, including the one-sided edges
    assert np.max(np.abs(w - 2 * omega)) < 1e-10


def test_vorticity_taylor_green_second_order_convergence():
    def tg_rel_error(n):
        sim, k = taylor_green(n=n, tau=0.8)
        u = sim.velocity_grid()
        valid = np.ones((n, n), dtype=bool)
        w = vorticity(u[0], u[1], valid)
        x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        analytic = 2 * 0.02 * k * np.cos(k * x) * np.cos(k * y)
        return np.max(np.abs(w - analytic)) / (2 * 0.02 * k)

    e32, e64, e128 = tg_rel_error(32), tg_rel_error(64), tg_rel_error(128)
    assert e32 / e64 == pytest.approx(4.0, rel=0.2)  # second order in k*h
    assert e64 / e128 == pytest.approx(4.0, rel=0.2)


def test_vorticity_one_sided_near_walls():
    u1 = np.tile(np.arange(8, dtype=float), (8, 1))  # du1/d2 = 1 -> w = -1
    u2 = np.zeros((8, 8))
    valid = np.ones((8, 8), dtype=bool)
    valid[4, 4] = False
    w = vorticity(u1, u2, valid)
    assert np.isnan(w[4, 4])
    mask = valid.copy()
    assert np.allclose(w[mask], -1.0, atol=1e-12)


# ---------------------------------------------------------------- frame payloads

def test_scalar_frame_payload_layout():
    sim = closed_box((10, 8))
    dims, payload = build_frame_payload(sim, SliceSpec("density"))
    assert dims == (10, 8, 2)
    arr = np.frombuffer(payload, dtype="<f4").reshape(2, 10, 8)
    assert np.isnan(arr[0, 0, 0])  # wall sentinel
    assert arr[1, 0, 0] == 0.0  # validity 0 at walls
    assert arr[0, 5, 4] == pytest.approx(1.0)
    assert arr[1, 5, 4] == 1.0


def test_velocity_frame_payload_layout():
    sim = closed_box((10, 8))
    dims, payload = build_frame_payload(sim, SliceSpec("velocity_xy"))
    assert dims == (10, 8, 3)
    assert len(payload) == 10 * 8 * 3 * 4


def test_interface_frame_payload_layout():
    sim, _ = dam_box(dims=(30, 20), column=(10, 12))
    dims, payload = build_frame_payload(sim, SliceSpec("interface"))
    nv, ns, two = dims
    assert two == 2 and nv > 0 and ns > 0
    assert len(payload) == (4 * nv + 2 * ns) * 4


def test_streamline_frame_payload_layout():
    sim = closed_box((40, 30))
    interior = sim.flags == fl.FLUID
    u = np.zeros((2, sim.n))
    u[0, interior] = 0.03
    sim.set_state(np.ones(sim.n), u)
    dims, payload = build_frame_payload(sim, SliceSpec("streamlines"))
    n_lines, total, _ = dims
    assert n_lines > 0
    arr = np.frombuffer(payload, dtype="<f4")
    k = 0
    for _ in range(n_lines):
        count = int(arr[k])
        assert count > 1
        k += 1 + 2 * count
    assert k == arr.size
