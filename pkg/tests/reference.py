"""Independent scalar reference for one simulation step.

Plain-Python loops, no shared code with the production kernels beyond the
lattice constants. Mirrors the documented arithmetic exactly (same operation
order), so small grids can be compared bit-for-bit against the fused kernel.
Conversions are excluded: reference states must stay within the conversion
thresholds (covered by their own tests).
"""

from __future__ import annotations

import numpy as np

FLUID, INTERFACE, WALL, GAS, INLET, OUTLET = 0, 1, 2, 3, 4, 5


def post_collision_cell(f_cell, rho, u, w, cf, tau, grav):
    """BGK relaxation with Guo forcing for a single cell; returns list of q values."""
    q = len(f_cell)
    inv_tau = 1.0 / tau
    pref = 1.0 - 0.5 * inv_tau
    ux, uy, uz = u[0], u[1], u[2]
    usq = ux * ux + uy * uy + uz * uz
    fx, fy, fz = rho * grav[0], rho * grav[1], rho * grav[2]
    uF = ux * fx + uy * fy + uz * fz
    out = []
    for i in range(q):
        fi = f_cell[i]
        cx, cy, cz = cf[i][0], cf[i][1], cf[i][2]
        cu = cx * ux + cy * uy + cz * uz
        feq = w[i] * rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq)
        cF = cx * fx + cy * fy + cz * fz
        out.append(fi - (fi - feq) * inv_tau + pref * (w[i] * (3.0 * (cF - uF) + 9.0 * cu * cF)))
    return out


def reference_step(sim):
    """One step on copies of `sim` arrays (no mutation); returns the arrays
    (f_new, rho_new, u_new, mass_new) the production step should commit."""
    model = sim.model
    q = model.q
    w = [float(v) for v in model.weights]
    cf = [[float(c) for c in row] for row in model.velocities]
    opp = [int(v) for v in model.opposite]
    nbr = sim.nbr
    n = sim.n
    flags = sim.flags
    tau = sim.params.tau
    grav = [float(g) for g in sim.params.gravity]

    f = sim.f
    rho = sim.rho
    u = sim.u
    bcv = sim.bc_vel
    fill = sim.fill

    # post-collision values (inlet/outlet stream their prescribed populations)
    fpc = [[0.0] * n for _ in range(q)]
    for x in range(n):
        if flags[x] in (WALL, GAS):
            continue
        if flags[x] <= INTERFACE:
            vals = post_collision_cell([f[i, x] for i in range(q)], rho[x],
                                       (u[0, x], u[1, x], u[2, x]), w, cf, tau, grav)
        else:
            vals = [f[i, x] for i in range(q)]
        for i in range(q):
            fpc[i][x] = vals[i]

    # streaming with bounce-back and gas-link reconstruction (pull form)
    ft = [[0.0] * n for _ in range(q)]
    inv_tau = 1.0 / tau
    pref = 1.0 - 0.5 * inv_tau
    for x in range(n):
        fl = flags[x]
        if fl in (WALL, GAS):
            continue
        for i in range(q):
            src = int(nbr[i, x])
            sf = flags[src]
            if sf == WALL:
                io = opp[i]
                dot = (cf[io][0] * bcv[0, src] + cf[io][1] * bcv[1, src]
                       + cf[io][2] * bcv[2, src])
                ft[i][x] = fpc[io][x] - 6.0 * w[io] * rho[x] * dot
            elif sf == GAS:
                ux, uy, uz = u[0, x], u[1, x], u[2, x]
                usq = ux * ux + uy * uy + uz * uz
                cu = cf[i][0] * ux + cf[i][1] * uy + cf[i][2] * uz
                quad = 4.5 * cu * cu - 1.5 * usq
                e_i = w[i] * (1.0 + 3.0 * cu + quad)
                e_o = w[opp[i]] * (1.0 - 3.0 * cu + quad)
                ft[i][x] = e_i + e_o - fpc[opp[i]][x]
            else:
                ft[i][x] = fpc[i][src]

    # mass exchange from streamed values, before inlet/outlet prescription
    dm = {}
    for x in range(n):
        if flags[x] != INTERFACE:
            continue
        acc = 0.0
        for i in range(1, q):
            src = int(nbr[i, x])
            sf = flags[src]
            if sf in (WALL, GAS):
                continue
            d = ft[i][x] - ft[opp[i]][src]
            if sf == INTERFACE:
                d *= 0.5 * (fill[x] + fill[src])
            acc += d
        dm[x] = acc

    # inlet/outlet prescription; inlet density comes from the adjacent interior
    # cell's pre-step state
    bset = sim.boundary_set()
    for x, src in zip(bset.inlet_cells, bset.inlet_src):
        x = int(x)
        r_in = rho[int(src)]
        ux, uy, uz = bcv[0, x], bcv[1, x], bcv[2, x]
        usq = ux * ux + uy * uy + uz * uz
        for i in range(q):
            cu = cf[i][0] * ux + cf[i][1] * uy + cf[i][2] * uz
            ft[i][x] = w[i] * r_in * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq)
    for x, s in zip(bset.outlet_cells, bset.outlet_src):
        for i in range(q):
            ft[i][int(x)] = ft[i][int(s)]

    # moments with the half-force velocity correction
    rho_new = np.ones(n)
    u_new = np.zeros((3, n))
    for x in range(n):
        fl = flags[x]
        if fl in (WALL, GAS):
            continue
        r = 0.0
        mx = my = mz = 0.0
        for i in range(q):
            fi = ft[i][x]
            r += fi
            mx += fi * cf[i][0]
            my += fi * cf[i][1]
            mz += fi * cf[i][2]
        rho_new[x] = r
        inv = 1.0 / r
        if fl <= INTERFACE:
            u_new[0, x] = mx * inv + 0.5 * grav[0]
            u_new[1, x] = my * inv + 0.5 * grav[1]
            u_new[2, x] = mz * inv + 0.5 * grav[2]
        else:
            u_new[0, x] = mx * inv
            u_new[1, x] = my * inv
            u_new[2, x] = mz * inv

    mass_new = sim.mass.copy()
    for x, d in dm.items():
        mass_new[x] += d
    for x in range(n):
        if flags[x] == FLUID or flags[x] >= INLET:
            mass_new[x] = rho_new[x]
        elif flags[x] in (WALL, GAS):
            mass_new[x] = 0.0

    f_new = np.array(ft)
    return f_new, rho_new, u_new, mass_new
