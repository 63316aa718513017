"""Free-surface cell conversions and mass bookkeeping.

Mass tracking follows the single-phase approach: interface cells carry a
fractional mass m (fill = m / rho); fluid cells have m = rho, gas cells m = 0.
Per-step mass exchange lives in kernels.py; this module handles the threshold
conversions, the adjacency repairs that keep fluid and gas separated, and the
redistribution of conversion excess mass.

The conversion pass is sequential and order-dependent by design: cells are
processed in ascending flat (row-major) index so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flags import FLUID, GAS, INTERFACE
from .lattice import equilibrium

#: conversion hysteresis: interface -> fluid at fill >= 1 + eps, -> gas at <= -eps
CONVERSION_EPS = 1e-3

#: floor below which excess mass is dropped rather than scaled into a fluid cell
_MIN_SCALED_RHO = 0.2


@dataclass
class ConversionStats:
    to_fluid: int = 0
    to_gas: int = 0
    new_interface: int = 0
    mass_lost: float = 0.0
    converted_cells: list = field(default_factory=list)


def _neighbor_indices(sim, x: int) -> list[int]:
    seen: list[int] = []
    for i in range(1, sim.model.q):
        s = int(sim.nbr[i, x])
        if s != x and s not in seen:
            seen.append(s)
    return seen


def _init_fresh_interface(sim, s: int) -> None:
    """Populations for an interface cell created from gas: equilibrium at the
    neighborhood-averaged density and velocity (rho=1, u=0 if no neighbors)."""
    rs = []
    us = np.zeros(3)
    for t in _neighbor_indices(sim, s):
        if sim.flags[t] == FLUID or sim.flags[t] == INTERFACE:
            rs.append(sim.rho[t])
            us += sim.u[:, t]
    if rs:
        r = float(np.mean(rs))
        uu = us / len(rs)
    else:
        r, uu = 1.0, np.zeros(3)
    sim.f[:, s] = equilibrium(np.array([r]), uu[:, None], sim.model)[:, 0]
    sim.rho[s] = r
    sim.u[:, s] = uu
    sim.mass[s] = 0.0
    sim.fill[s] = 0.0


def convert_cells(sim) -> ConversionStats:
    """Apply threshold conversions, adjacency repairs and mass redistribution."""
    stats = ConversionStats()
    flags = sim.flags
    mass = sim.mass
    rho = sim.rho
    fill = sim.fill

    iface = np.flatnonzero(flags == INTERFACE)
    if iface.size == 0:
        return stats
    r = rho[iface]
    filled = [int(x) for x in iface[mass[iface] >= (1.0 + CONVERSION_EPS) * r]]
    emptied = set(int(x) for x in iface[mass[iface] <= -CONVERSION_EPS * r])

    excesses: list[tuple[int, float]] = []

    for x in filled:
        excesses.append((x, float(mass[x] - rho[x])))
        flags[x] = FLUID
        mass[x] = rho[x]
        fill[x] = 1.0
        stats.to_fluid += 1
        stats.converted_cells.append(x)
        for s in _neighbor_indices(sim, x):
            emptied.discard(s)  # a neighbor of a fresh fluid cell may not empty
            if flags[s] == GAS:
                flags[s] = INTERFACE
                _init_fresh_interface(sim, s)
                stats.new_interface += 1

    for x in sorted(emptied):
        if flags[x] != INTERFACE:
            continue
        excesses.append((x, float(mass[x])))
        flags[x] = GAS
        mass[x] = 0.0
        fill[x] = 0.0
        sim.f[:, x] = 0.0
        sim.rho[x] = 1.0
        sim.u[:, x] = 0.0
        stats.to_gas += 1
        stats.converted_cells.append(x)
        for s in _neighbor_indices(sim, x):
            if flags[s] == FLUID:
                flags[s] = INTERFACE  # keeps its populations; fill stays 1
                mass[s] = rho[s]
                fill[s] = 1.0
                stats.new_interface += 1

    # absorb isolated remnants: an interface cell with neither gas nor
    # interface neighbors is a closed bubble (becomes fluid); one with neither
    # fluid nor interface neighbors is a stray droplet (becomes gas).
    for x in np.flatnonzero(flags == INTERFACE):
        x = int(x)
        has_gas = has_fluid = has_iface = False
        for s in _neighbor_indices(sim, x):
            fl = flags[s]
            if fl == GAS:
                has_gas = True
            elif fl == FLUID:
                has_fluid = True
            elif fl == INTERFACE:
                has_iface = True
        if not has_gas and not has_iface:
            excesses.append((x, float(mass[x] - rho[x])))
            flags[x] = FLUID
            mass[x] = rho[x]
            fill[x] = 1.0
            stats.to_fluid += 1
            stats.converted_cells.append(x)
        elif not has_fluid and not has_iface:
            excesses.append((x, float(mass[x])))
            flags[x] = GAS
            mass[x] = 0.0
            fill[x] = 0.0
            sim.f[:, x] = 0.0
            sim.rho[x] = 1.0
            sim.u[:, x] = 0.0
            stats.to_gas += 1
            stats.converted_cells.append(x)

    # redistribute conversion excess: to adjacent interface cells weighted by
    # fill, else scaled into adjacent fluid cells, else dropped (tracked).
    for x, exc in excesses:
        if exc == 0.0:
            continue
        nbrs = _neighbor_indices(sim, x)
        targets = [s for s in nbrs if flags[s] == INTERFACE]
        if targets:
            wts = np.array([fill[s] + 1e-6 for s in targets])
            shares = exc * wts / wts.sum()
            for s, sh in zip(targets, shares):
                mass[s] += sh
            continue
        fluids = [s for s in nbrs if flags[s] == FLUID]
        if fluids:
            share = exc / len(fluids)
            for s in fluids:
                new_rho = rho[s] + share
                if new_rho <= _MIN_SCALED_RHO:
                    stats.mass_lost += share
                    continue
                sim.f[:, s] *= new_rho / rho[s]
                rho[s] = new_rho
                mass[s] = new_rho
            continue
        stats.mass_lost += exc

    if stats.to_fluid or stats.to_gas or stats.new_interface:
        sim.flags_version += 1
    return stats
