"""Periodic cell problems on Z_h = {-h(y1) < y3 < 0} and the slip coefficients.

Longitudinal direction: Stokes with unit body force e1, w = e1 on the rough
surface, w = 0 on y3 = 0, periodic in y1.  Transverse direction (extruded
profile): the out-of-plane component decouples into the scalar problem
-lap(phi) = 1 with the same boundary data.  Both are solved on the same u
faces with the same conductance links, so c1 and c2 share one quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import spsolve

from .fields import (BoundaryCondition, FlowState, Topology, ViscosityField,
                     link_deltas, no_slip, periodic)
from .grid import MacGrid, _sample, build_cell_domain
from .stokes import SolverConfig, SolveStats, solve_stokes

_PROFILE_PROBE = np.linspace(-0.5, 0.5, 257)


@dataclass
class CellResult:
    direction: str
    grid: MacGrid
    w: FlowState
    c: float
    profile: np.ndarray
    stats: SolveStats | None = None

    @property
    def q(self) -> np.ndarray:
        return self.w.p


@dataclass
class EffectiveMatrix:
    K: np.ndarray
    c: tuple
    cross: float


def _cell_bc() -> BoundaryCondition:
    return BoundaryCondition(bottom=no_slip((1.0, 0.0)), top=no_slip(),
                             left=periodic(), right=periodic(), solid_velocity=(1.0, 0.0))


def _cell_topology(grid: MacGrid) -> Topology:
    return Topology(grid, ViscosityField.uniform(grid, 1.0), _cell_bc())


def solve_cell_longitudinal(h, nx: int = 128, ny: int = 128,
                            cfg: SolverConfig | None = None) -> CellResult:
    grid = build_cell_domain(h, nx, ny)
    top = _cell_topology(grid)
    w, stats = solve_stokes(grid, top.visc, top.bc, (1.0, 0.0), cfg)
    g, d = link_deltas(top, w)
    return CellResult("longitudinal", grid, w, float(np.dot(g, d * d)),
                      _sample(h, _PROFILE_PROBE), stats)


def solve_cell_transverse(h, nx: int = 128, ny: int = 128) -> CellResult:
    """phi on the u faces: -lap(phi) = 1, phi = 1 on the surface, 0 on top."""
    grid = build_cell_domain(h, nx, ny)
    top = _cell_topology(grid)
    A, b = top.velocity_system()
    d = top.dof_faces
    ud = d[d < top.nu_faces]
    sel = np.flatnonzero(d < top.nu_faces)
    Auu = A[sel][:, sel].tocsc()
    rhs = b[sel] + top.face_area[ud]
    x = top.known_vector()
    x[ud] = spsolve(Auu, rhs)
    phi, _ = top.unpack(x)
    state = FlowState(phi, np.zeros((grid.ny + 1, grid.nx)), np.zeros(grid.mask.shape))
    g, dl = link_deltas(top, state)
    # the v links carry no transverse energy: phi lives on u faces only
    is_u = _u_link_mask(top)
    c = float(np.dot(g[is_u], dl[is_u] ** 2))
    return CellResult("transverse", grid, state, c, _sample(h, _PROFILE_PROBE))


def _u_link_mask(top: Topology) -> np.ndarray:
    nu = top.nu_faces
    return np.concatenate([top.pair_a < nu, top.wall_a < nu,
                           np.ones(top.bottom_cols.size, bool)])


def cross_coefficient(long: CellResult, trans: CellResult) -> float:
    """int grad w1 . grad w2 over the extruded cell, summed over the three
    velocity components: w1 = (w1_1, w1_2, 0), w2 = (0, 0, phi)."""
    top = _cell_topology(long.grid)
    g, d1 = link_deltas(top, long.w)
    _, dphi = link_deltas(top, trans.w)
    is_u = _u_link_mask(top)
    w1 = [np.where(is_u, d1, 0.0), np.where(is_u, 0.0, d1), np.zeros_like(d1)]
    w2 = [np.zeros_like(d1), np.zeros_like(d1), np.where(is_u, dphi, 0.0)]
    return float(sum(np.dot(g, a * b) for a, b in zip(w1, w2)))


def effective_matrix(long: CellResult, trans: CellResult, nu: float) -> EffectiveMatrix:
    if long.grid.mask.shape != trans.grid.mask.shape or \
            not np.array_equal(long.profile, trans.profile):
        raise ValueError("cell results were computed on different profiles")
    if not nu > 0:
        raise ValueError("nu must be positive")
    cross = cross_coefficient(long, trans)
    K = np.array([[nu * long.c, nu * cross], [nu * cross, nu * trans.c]])
    return EffectiveMatrix(K, (long.c, trans.c), cross)


def flat_coefficient(H: float) -> float:
    """Closed form of c for h = H: -phi'' = 1, phi(-H) = 1, phi(0) = 0."""
    a = -(1.0 + H * H / 2.0) / H
    return ((a + H) ** 3 - a ** 3) / 3.0
