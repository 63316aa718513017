"""Numba kernels for the BGK step: fused collide+stream, moments, mass exchange.

One code path serves D2Q9 and D3Q19: velocity sets are (q, 3) arrays with a
zero z column in 2D, grids are flat arrays indexed by a periodic pull-neighbor
table (nbr[i, x] = x - c_i; push target of direction i is nbr[opp[i], x]).

The fused kernel reads `f` and writes only `f_tmp`, so a step can be discarded
without corrupting state (divergence handling). Cell updates are independent;
`parallel=True` compiles a data-parallel variant with identical results.

Flag byte values are hard-coded here to keep kernels self-contained:
0 fluid, 1 interface, 2 wall, 3 gas, 4 inlet, 5 outlet (see flags.py).
"""

from __future__ import annotations

from types import SimpleNamespace

from numba import njit, prange


def _fused_collide_stream(f, ft, flags, nbr, opp, w, cf, rho, u, bcv, tau, grav):
    q, n = f.shape
    inv_tau = 1.0 / tau
    pref = 1.0 - 0.5 * inv_tau  # Guo forcing prefactor
    gx = grav[0]
    gy = grav[1]
    gz = grav[2]
    for x in prange(n):
        fl = flags[x]
        if fl == 2 or fl == 3:  # wall/gas cells carry no populations
            for i in range(q):
                ft[i, x] = 0.0
            continue
        collide = fl <= 1  # only fluid and interface cells are collided
        r = rho[x]
        ux = u[0, x]
        uy = u[1, x]
        uz = u[2, x]
        usq = ux * ux + uy * uy + uz * uz
        fx = r * gx
        fy = r * gy
        fz = r * gz
        uF = ux * fx + uy * fy + uz * fz
        for i in range(q):
            io = opp[i]
            fi = f[i, x]
            if collide:
                cx = cf[i, 0]
                cy = cf[i, 1]
                cz = cf[i, 2]
                cu = cx * ux + cy * uy + cz * uz
                feq = w[i] * r * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq)
                cF = cx * fx + cy * fy + cz * fz
                val = fi - (fi - feq) * inv_tau + pref * (w[i] * (3.0 * (cF - uF) + 9.0 * cu * cF))
            else:  # inlet/outlet cells stream their prescribed populations
                val = fi
            dst = nbr[io, x]  # push target x + c_i
            df = flags[dst]
            if df == 2:
                # bounce-back on the link; a moving wall adds 2 w_i rho (c_i.u_w)/cs2
                dot = cf[i, 0] * bcv[0, dst] + cf[i, 1] * bcv[1, dst] + cf[i, 2] * bcv[2, dst]
                ft[io, x] = val - 6.0 * w[i] * r * dot
            elif df == 3:
                pass  # gas absorbs nothing
            else:
                ft[i, dst] = val
        if collide:
            # populations arriving from gas neighbors do not exist; reconstruct
            # them from equilibrium at atmospheric density (rho = 1) and the
            # cell's own velocity: e_i + e_opp(i) - f_post[opp(i)].
            for i in range(1, q):
                s = nbr[i, x]
                if flags[s] == 3:
                    cx = cf[i, 0]
                    cy = cf[i, 1]
                    cz = cf[i, 2]
                    cu = cx * ux + cy * uy + cz * uz
                    quad = 4.5 * cu * cu - 1.5 * usq
                    e_i = w[i] * (1.0 + 3.0 * cu + quad)
                    io = opp[i]
                    e_o = w[io] * (1.0 - 3.0 * cu + quad)
                    fo = f[io, x]
                    cxo = cf[io, 0]
                    cyo = cf[io, 1]
                    czo = cf[io, 2]
                    cuo = cxo * ux + cyo * uy + czo * uz
                    feqo = w[io] * r * (1.0 + 3.0 * cuo + 4.5 * cuo * cuo - 1.5 * usq)
                    cFo = cxo * fx + cyo * fy + czo * fz
                    fpo = fo - (fo - feqo) * inv_tau + pref * (w[io] * (3.0 * (cFo - uF) + 9.0 * cuo * cFo))
                    ft[i, x] = e_i + e_o - fpo


def _moments(f, flags, cf, grav, rho, u):
    q, n = f.shape
    hx = 0.5 * grav[0]
    hy = 0.5 * grav[1]
    hz = 0.5 * grav[2]
    for x in prange(n):
        fl = flags[x]
        if fl == 2 or fl == 3:
            rho[x] = 1.0
            u[0, x] = 0.0
            u[1, x] = 0.0
            u[2, x] = 0.0
            continue
        r = 0.0
        mx = 0.0
        my = 0.0
        mz = 0.0
        for i in range(q):
            fi = f[i, x]
            r += fi
            mx += fi * cf[i, 0]
            my += fi * cf[i, 1]
            mz += fi * cf[i, 2]
        rho[x] = r
        inv = 1.0 / r
        if fl <= 1:
            # half-force correction: u = (sum f_i c_i + F/2) / rho with F = rho g
            u[0, x] = mx * inv + hx
            u[1, x] = my * inv + hy
            u[2, x] = mz * inv + hz
        else:
            u[0, x] = mx * inv
            u[1, x] = my * inv
            u[2, x] = mz * inv


def _mass_exchange(ft, flags, fill, nbr, opp, iface, dm):
    # Per interface cell: dm = sum over links of (f_in - f_out) * factor, where
    # factor is 1 for fluid-like neighbors, the average fill for interface
    # neighbors, 0 for wall/gas. Uses post-stream populations: f_in is what
    # arrived (ft[i, x]), f_out is what we sent (ft[opp[i], s], now at s).
    q = ft.shape[0]
    for k in prange(iface.shape[0]):
        x = iface[k]
        acc = 0.0
        for i in range(1, q):
            s = nbr[i, x]
            sf = flags[s]
            if sf == 2 or sf == 3:
                continue
            d = ft[i, x] - ft[opp[i], s]
            if sf == 1:
                d *= 0.5 * (fill[x] + fill[s])
            acc += d
        dm[k] = acc


_OPTS = dict(cache=True, fastmath=False, error_model="numpy")
_compiled: dict[bool, SimpleNamespace] = {}


def get_kernels(parallel: bool = False) -> SimpleNamespace:
    """Compiled kernel set; serial and data-parallel variants share one source."""
    key = bool(parallel)
    if key not in _compiled:
        _compiled[key] = SimpleNamespace(
            fused=njit(parallel=key, **_OPTS)(_fused_collide_stream),
            moments=njit(parallel=key, **_OPTS)(_moments),
            mass_exchange=njit(parallel=key, **_OPTS)(_mass_exchange),
        )
    return _compiled[key]
