"""Lattice models (D2Q9, D3Q19) and the BGK equilibrium distribution.

Velocity sets are stored with three components everywhere; 2D models carry a
zero z column so that a single kernel code path serves both dimensions.
All quantities are in lattice units (dx = dt = 1, cs^2 = 1/3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CS2 = 1.0 / 3.0

#: soft Mach-validity bound used by parameter validation (|u| must stay below)
MAX_SPEED = 0.3


@dataclass(frozen=True)
class LatticeModel:
    """Discrete velocity set: c_i, weights, opposite-direction index."""

    name: str
    dim: int
    q: int
    velocities: np.ndarray  # (q, 3) float64, z column zero for 2D
    velocities_int: np.ndarray  # (q, 3) int64, for neighbor-table construction
    weights: np.ndarray  # (q,)
    opposite: np.ndarray = field(default=None)  # (q,) int32

    def __post_init__(self):
        if self.opposite is None:
            opp = np.empty(self.q, dtype=np.int32)
            for i in range(self.q):
                matches = np.nonzero((self.velocities_int == -self.velocities_int[i]).all(axis=1))[0]
                opp[i] = matches[0]
            object.__setattr__(self, "opposite", opp)


def _make_model(name: str, dim: int, vel: list[tuple], weights: list[float]) -> LatticeModel:
    vi = np.zeros((len(vel), 3), dtype=np.int64)
    for i, v in enumerate(vel):
        vi[i, : len(v)] = v
    return LatticeModel(
        name=name,
        dim=dim,
        q=len(vel),
        velocities=vi.astype(np.float64),
        velocities_int=vi,
        weights=np.asarray(weights, dtype=np.float64),
    )


# rest, axis-aligned, then diagonals; weights 4/9, 1/9, 1/36
_D2Q9_VEL = [
    (0, 0),
    (1, 0), (0, 1), (-1, 0), (0, -1),
    (1, 1), (-1, 1), (-1, -1), (1, -1),
]
_D2Q9_W = [4 / 9] + [1 / 9] * 4 + [1 / 36] * 4

D2Q9 = _make_model("d2q9", 2, _D2Q9_VEL, _D2Q9_W)


def _d3q19_velocities() -> list[tuple]:
    vel = [(0, 0, 0)]
    for a in range(3):
        for s in (1, -1):
            v = [0, 0, 0]
            v[a] = s
            vel.append(tuple(v))
    for a in range(3):
        for b in range(a + 1, 3):
            for sa in (1, -1):
                for sb in (1, -1):
                    v = [0, 0, 0]
                    v[a] = sa
                    v[b] = sb
                    vel.append(tuple(v))
    return vel


_D3Q19_VEL = _d3q19_velocities()
_D3Q19_W = [1 / 3] + [1 / 18] * 6 + [1 / 36] * 12

D3Q19 = _make_model("d3q19", 3, _D3Q19_VEL, _D3Q19_W)

MODELS = {"d2q9": D2Q9, "d3q19": D3Q19}


def model_for_dims(dims) -> LatticeModel:
    """D2Q9 for 2D grids, D3Q19 for 3D grids."""
    if len(dims) == 2:
        return D2Q9
    if len(dims) == 3:
        return D3Q19
    raise ValueError(f"unsupported grid rank {len(dims)}")


def equilibrium(rho: np.ndarray, u: np.ndarray, model: LatticeModel) -> np.ndarray:
    """Second-order BGK equilibrium populations.

    rho: (n,) densities, u: (3, n) velocities. Returns (q, n).
    f_i^eq = w_i rho (1 + 3 c.u + 4.5 (c.u)^2 - 1.5 u.u), cs^2 = 1/3.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        u = u[:, None]
    cu = model.velocities @ u  # (q, n)
    usq = np.einsum("an,an->n", u, u)
    return model.weights[:, None] * rho[None, :] * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq[None, :])


def equilibrium_cell(rho: float, u, model: LatticeModel) -> np.ndarray:
    """Equilibrium for a single cell; u is a length-2 or length-3 vector."""
    u3 = np.zeros(3)
    u3[: len(u)] = u
    return equilibrium(np.array([rho]), u3[:, None], model)[:, 0]


def viscosity(tau: float) -> float:
    """Kinematic viscosity nu = cs^2 (tau - 1/2)."""
    return CS2 * (tau - 0.5)
