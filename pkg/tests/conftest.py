import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lbsteer import flags as fl
from lbsteer.core import FluidParams, Simulation


def closed_box(dims, inner_flag=fl.FLUID, tau=0.8, gravity=None, parallel=False):
    """Simulation with a one-cell wall shell and a uniform interior."""
    grid = np.full(dims, inner_flag, dtype=np.uint8)
    for ax in range(len(dims)):
        sl = [slice(None)] * len(dims)
        sl[ax] = 0
        grid[tuple(sl)] = fl.WALL
        sl[ax] = dims[ax] - 1
        grid[tuple(sl)] = fl.WALL
    params = FluidParams(tau=tau, gravity=gravity or (0.0,) * len(dims))
    sim, _ = Simulation.from_flags(dims, grid, params=params, parallel=parallel)
    return sim


def dam_box(dims=(60, 40), column=(24, 30), tau=0.7, gravity=(0.0, -1e-4)):
    """Classic dam: water column against the left wall of a closed box."""
    grid = np.full(dims, fl.GAS, dtype=np.uint8)
    grid[1:1 + column[0], 1:1 + column[1]] = fl.FLUID
    grid[0, :] = fl.WALL
    grid[-1, :] = fl.WALL
    grid[:, 0] = fl.WALL
    grid[:, -1] = fl.WALL
    params = FluidParams(tau=tau, gravity=gravity)
    return Simulation.from_flags(dims, grid, params=params)


def channel(nx=64, width=32, tau=0.8, gravity=(0.0, 0.0)):
    """Periodic-x channel with wall rows top and bottom."""
    dims = (nx, width + 2)
    grid = np.full(dims, fl.FLUID, dtype=np.uint8)
    grid[:, 0] = fl.WALL
    grid[:, -1] = fl.WALL
    params = FluidParams(tau=tau, gravity=gravity)
    sim, _ = Simulation.from_flags(dims, grid, params=params)
    return sim


@pytest.fixture(scope="session")
def hydrostatic_column():
    """Settled free-surface column: 30 gas layers above 40 of water, g = -5e-5.

    Shared oracle for the hydrostatic pressure checks. Returns (sim, g, surface_y).
    """
    dims = (24, 72)
    g = 5e-5
    grid = np.full(dims, fl.GAS, dtype=np.uint8)
    grid[1:-1, 1:41] = fl.FLUID
    grid[0, :] = fl.WALL
    grid[-1, :] = fl.WALL
    grid[:, 0] = fl.WALL
    grid[:, -1] = fl.WALL
    sim, _ = Simulation.from_flags(dims, grid,
                                   params=FluidParams(tau=0.8, gravity=(0.0, -g)))
    for _ in range(4000):
        sim.step()
    fill = sim.grid("fill")[dims[0] // 2]
    surface = float(np.max(np.flatnonzero(fill > 0.5))) + 0.5
    return sim, g, surface
