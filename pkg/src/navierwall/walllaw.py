"""The limit problem on Omega alone with a diagonal Navier wall law on y = 0.

The wall law is  -nu du1/dy + mu u1 = 0,  v = 0  at y = 0  (outward normal
(0, -1)), with mu a density against arc length.  ``infinite`` is an explicit
tag that turns the wall into a no-slip wall; it is never a large float.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (BoundaryCondition, FlowState, Topology, ViscosityField,
                     boundary_integral, dirichlet_energy, navier_slip, no_slip)
from .grid import MacGrid, _sample
from .stokes import SolverConfig, SolveStats, solve_navier_stokes, solve_stokes

KINDS = ("constant", "over_h", "per_face", "infinite", "zero")


@dataclass(frozen=True)
class WallLawSpec:
    """Density mu of the tangential wall law on the bottom edge.

    ``per_face`` samples live on the nx + 1 wall u columns and may contain
    ``np.inf`` entries, which act as the infinite tag on those columns.
    """

    kind: str
    value: float = 0.0
    nu: float = 1.0
    h: object = None
    samples: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown wall law {self.kind!r}")
        if self.kind == "constant" and not self.value >= 0:
            raise ValueError("wall-law density must be >= 0")
        if self.kind == "over_h" and (self.h is None or not self.nu > 0):
            raise ValueError("over_h needs nu > 0 and a profile h")
        if self.kind == "per_face":
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 1 or np.any(np.isnan(s)) or np.any(s < 0):
                raise ValueError("per-face densities must be a 1-d array >= 0")

    @classmethod
    def constant(cls, value: float) -> "WallLawSpec":
        return cls("constant", value=float(value))

    @classmethod
    def over_h(cls, nu: float, h) -> "WallLawSpec":
        return cls("over_h", nu=float(nu), h=h)

    @classmethod
    def per_face(cls, samples) -> "WallLawSpec":
        return cls("per_face", samples=np.asarray(samples, dtype=float))

    @classmethod
    def infinite(cls) -> "WallLawSpec":
        return cls("infinite")

    @classmethod
    def zero(cls) -> "WallLawSpec":
        return cls("zero")

    def density(self, grid: MacGrid) -> np.ndarray:
        """mu at the wall u columns (length nx + 1), ``inf`` where no-slip."""
        n = grid.nx + 1
        if self.kind == "infinite":
            return np.full(n, np.inf)
        if self.kind == "zero":
            return np.zeros(n)
        if self.kind == "constant":
            return np.full(n, self.value)
        if self.kind == "per_face":
            s = np.asarray(self.samples, dtype=float)
            if s.shape != (n,):
                raise ValueError(f"per-face densities need {n} entries, got {s.size}")
            return s.copy()
        h = _sample(self.h, grid.x_faces)
        if np.any(h < 0):
            raise ValueError("profile h must be nonnegative")
        with np.errstate(divide="ignore"):
            return np.where(h > 0, self.nu / np.where(h > 0, h, 1.0), np.inf)

    def boundary_condition(self, grid: MacGrid) -> BoundaryCondition:
        bottom = no_slip() if self.kind == "infinite" else navier_slip(self.density(grid))
        return BoundaryCondition.walls(grid.periodic_x, bottom)


def solve_limit(f, nu: float, spec: WallLawSpec, ns_mode: str, grid: MacGrid,
                cfg: SolverConfig | None = None) -> tuple[FlowState, SolveStats]:
    if ns_mode not in ("stokes", "navier_stokes"):
        raise ValueError(f"unknown ns_mode {ns_mode!r}")
    visc = ViscosityField.uniform(grid, nu)
    solve = solve_stokes if ns_mode == "stokes" else solve_navier_stokes
    return solve(grid, visc, spec.boundary_condition(grid), f, cfg)


def g0_energy(state: FlowState, nu: float, spec: WallLawSpec, grid: MacGrid) -> float:
    """nu int |grad u|^2 + int mu u1^2 on the wall; ``inf`` when the trace is
    nonzero where the wall law is infinite."""
    mu = spec.density(grid)
    bc = spec.boundary_condition(grid)
    if state.trace is None:
        state = FlowState(state.u, state.v, state.p, _implied_trace(state, grid, bc, nu))
    s = state.trace
    if np.any((s != 0) & np.isinf(mu)):
        return float("inf")
    bulk = dirichlet_energy(state, ViscosityField.uniform(grid, nu), grid, bc)
    return bulk + boundary_integral(np.where(np.isinf(mu), 0.0, mu) * s ** 2, grid)


def _implied_trace(state: FlowState, grid: MacGrid, bc: BoundaryCondition,
                   nu: float) -> np.ndarray:
    top = Topology(grid, ViscosityField.uniform(grid, nu), bc)
    return top.bottom_trace(state.u[0])


def tangential_traction(state: FlowState, nu: float, grid: MacGrid) -> np.ndarray:
    """-nu du1/dy at y = 0 on the wall u columns, from the one-sided quadratic
    through the trace and the first two u rows."""
    j = grid.wall_row()
    s = np.zeros(grid.nx + 1) if state.trace is None else state.trace
    dy = grid.dy
    y1 = 0.5 * dy[j]
    y2 = dy[j] + 0.5 * dy[j + 1]
    d1 = state.u[j] - s
    d2 = state.u[j + 1] - s
    slope = (d1 * y2 ** 2 - d2 * y1 ** 2) / (y1 * y2 * (y2 - y1))
    return -nu * slope


def flux_traction(state: FlowState, nu: float, grid: MacGrid) -> np.ndarray:
    """-nu (u1 - s) / (dy0 / 2): the traction that makes the discrete energy
    balance exact (first order in the spacing)."""
    j = grid.wall_row()
    s = np.zeros(grid.nx + 1) if state.trace is None else state.trace
    return -nu * (state.u[j] - s) / (0.5 * grid.dy[j])


class CondensedWall:
    """Static condensation of the limit problem onto the wall traces.

    With s the tangential trace on the wall columns, the slip solution is
    u = u_f + sum_j s_j Z_j, where u_f is the no-slip flow for the force and
    Z_j the force-free flow with unit trace on column j.  The traces solve
    the dense system (P + diag(w mu)) s = q, P being the discrete
    Dirichlet-to-Neumann map of the bulk.  This reproduces the assembled
    slip solve to roundoff at the cost of one no-slip solve per force.
    """

    def __init__(self, grid: MacGrid, nu: float, cfg: SolverConfig | None = None):
        from .stokes import StokesSystem

        self.grid, self.nu, self.cfg = grid, nu, cfg
        visc = ViscosityField.uniform(grid, nu)
        self.system = StokesSystem(grid, visc, BoundaryCondition.walls(grid.periodic_x))
        top = self.system.top
        self.cols = top.bottom_cols
        self.gb = top.bottom_gbulk
        self.width = grid.u_width[self.cols]
        n = self.cols.size
        area = top.face_area[top.uid[0, self.cols]]
        zu, zv, zp = [], [], []
        fv = np.zeros((grid.ny + 1, grid.nx))
        for j in range(n):
            fu = np.zeros((grid.ny, grid.nx + 1))
            fu[0, self.cols[j]] = self.gb[j] / area[j]
            z, _ = self.system.solve(fu, fv, cfg)
            zu.append(z.u); zv.append(z.v); zp.append(z.p)
        self.zu, self.zv, self.zp = np.array(zu), np.array(zv), np.array(zp)
        P = np.diag(self.gb) - self.gb[:, None] * self.zu[:, 0, self.cols].T
        self.P = 0.5 * (P + P.T)

    def forced(self, fu: np.ndarray, fv: np.ndarray) -> tuple[FlowState, np.ndarray]:
        """No-slip flow for the force and the condensed right-hand side."""
        uf, _ = self.system.solve(fu, fv, self.cfg)
        return uf, self.gb * uf.u[0, self.cols]

    def traces(self, mu: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Wall traces on the condensed columns for densities ``mu`` given
        on all nx + 1 wall columns."""
        ws = self.width * mu[self.cols]
        s = np.zeros(self.cols.size)
        free = np.isfinite(ws)
        if free.any():
            idx = np.flatnonzero(free)
            M = self.P[np.ix_(idx, idx)] + np.diag(ws[idx])
            s[idx] = np.linalg.solve(M, q[idx])
        return s

    def assemble(self, uf: FlowState, s: np.ndarray) -> FlowState:
        u = uf.u + np.tensordot(s, self.zu, axes=1)
        v = uf.v + np.tensordot(s, self.zv, axes=1)
        p = uf.p + np.tensordot(s, self.zp, axes=1)
        trace = np.zeros(self.grid.nx + 1)
        trace[self.cols] = s
        if self.grid.periodic_x:
            trace[-1] = trace[0]
            u[:, -1] = u[:, 0]
        return FlowState(u, v, p, trace)

    def solve(self, fu: np.ndarray, fv: np.ndarray, mu: np.ndarray) -> FlowState:
        uf, q = self.forced(fu, fv)
        return self.assemble(uf, self.traces(mu, q))
