"""Canonical flow setups reused across physics tests and the acceptance suite."""

from __future__ import annotations

import numpy as np

from lbsteer import flags as fl
from lbsteer.core import FluidParams, Simulation
from lbsteer.lattice import viscosity


def taylor_green(n=64, tau=0.8, u0=0.02):
    """Doubly periodic decaying vortex array; returns (sim, wavenumber)."""
    dims = (n, n)
    grid = np.full(dims, fl.FLUID, dtype=np.uint8)
    sim, _ = Simulation.from_flags(dims, grid, params=FluidParams(tau=tau))
    k = 2.0 * np.pi / n
    x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ux = -u0 * np.cos(k * x) * np.sin(k * y)
    uy = u0 * np.sin(k * x) * np.cos(k * y)
    rho = 1.0 - (3.0 * u0 ** 2 / 4.0) * (np.cos(2 * k * x) + np.cos(2 * k * y))
    sim.set_state(rho.ravel(), np.stack([ux.ravel(), uy.ravel()]))
    return sim, k


def kinetic_energy(sim) -> float:
    speed2 = (sim.u ** 2).sum(axis=0)
    return float(0.5 * np.sum(sim.rho * speed2))


def taylor_green_decay_rate(tau: float, n: int = 64, u0: float = 0.02):
    """Measured amplitude decay rate over one half-life vs the analytic 2 nu k^2."""
    sim, k = taylor_green(n=n, tau=tau, u0=u0)
    nu = viscosity(tau)
    target = 2.0 * nu * k * k
    steps = max(1, int(round(np.log(2.0) / target)))
    e0 = kinetic_energy(sim)
    for _ in range(steps):
        sim.step()
    e1 = kinetic_energy(sim)
    measured = -np.log(e1 / e0) / (2.0 * steps)  # KE decays at twice the amplitude rate
    return measured, target


def poiseuille(width=32, tau=0.8, g=2e-5, nx=8, max_steps=40000, tol=1e-12):
    """Body-force channel run to steady state.

    Returns (sim, y coordinates from the lower wall plane, measured u_x
    profile, analytic profile g*y*(H - y)/(2 nu) with half-way walls).
    """
    dims = (nx, width + 2)
    grid = np.full(dims, fl.FLUID, dtype=np.uint8)
    grid[:, 0] = fl.WALL
    grid[:, -1] = fl.WALL
    sim, _ = Simulation.from_flags(dims, grid,
                                   params=FluidParams(tau=tau, gravity=(g, 0.0)))
    prev = None
    for _ in range(max_steps // 200):
        for _ in range(200):
            sim.step()
        profile = sim.velocity_grid()[0, nx // 2, 1:-1].copy()
        if prev is not None and np.max(np.abs(profile - prev)) < tol:
            break
        prev = profile
    nu = viscosity(tau)
    y = np.arange(1, width + 1) - 0.5  # half-way bounce-back: wall plane at 0.5
    analytic = g * y * (width - y) / (2.0 * nu)
    return sim, y, profile, analytic


def rel_l2(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
