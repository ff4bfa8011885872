"""Saddle-point solvers on the MAC grid.

Linear Stokes is solved by Uzawa iteration on the pressure Schur complement
``S = B A^-1 B^T`` with preconditioned conjugate gradients; the viscous block
``A`` is factorised once per system and reused for every application of
``A^-1`` (and across Picard sweeps).  Steady Navier-Stokes is a damped Picard
loop that lags the advection term into the body force.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fields import (BoundaryCondition, FlowState, Topology, ViscosityField,
                     advection_term, discrete_divergence, l2_norm, l2_weights, sample_faces)
from .grid import FLUID_LAYER, MacGrid


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, stats=None, state=None):
        super().__init__(msg)
        self.stats = stats
        self.state = state


class WellPosednessError(ValueError):
    pass


@dataclass
class SolverConfig:
    linear_tol: float = 1e-10
    max_cg_iters: int = 2000
    picard_tol: float = 1e-10
    picard_max: int = 200
    picard_damping: float = 1.0
    drop_layer_advection: bool = False

    def __post_init__(self):
        for name in ("linear_tol", "picard_tol"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_cg_iters < 1 or self.picard_max < 1:
            raise ValueError("iteration caps must be >= 1")
        if not 0 < self.picard_damping <= 1:
            raise ValueError("picard_damping must lie in (0, 1]")


@dataclass
class SolveStats:
    cg_iters: int = 0
    picard_iters: int = 0
    div_residual: float = 0.0
    momentum_residual: float = 0.0
    picard_residual: float = 0.0
    wall_time: float = 0.0
    converged: bool = True
    history: list = field(default_factory=list)


def pcg(apply_a, b, apply_m, x0=None, tol=1e-10, maxiter=1000, stop=None,
        project=None):
    """Preconditioned conjugate gradients for a symmetric positive
    semi-definite operator.

    ``stop(r)`` overrides the default relative-residual test; ``project``
    removes a known null-space component from iterates and residuals.
    Returns ``(x, iterations, converged)``.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_a(x) if x0 is not None else b.copy()
    if project is not None:
        r = project(r)
    bnorm = np.linalg.norm(b)
    done = stop if stop is not None else (lambda res: np.linalg.norm(res) <= tol * bnorm)
    if done(r):
        return x, 0, True
    z = apply_m(r)
    if project is not None:
        z = project(z)
    d = z.copy()
    rz = r @ z
    for k in range(1, maxiter + 1):
        ad = apply_a(d)
        dad = d @ ad
        if dad <= 0:
            return x, k, done(r)
        alpha = rz / dad
        x += alpha * d
        r -= alpha * ad
        if project is not None:
            r = project(r)
        if done(r):
            return x, k, True
        z = apply_m(r)
        if project is not None:
            z = project(z)
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    return x, maxiter, False


class StokesSystem:
    """Assembled discrete Stokes operator for one grid / viscosity / boundary
    condition; solve repeatedly for different body forces."""

    def __init__(self, grid: MacGrid, visc: ViscosityField, bc: BoundaryCondition):
        self.grid, self.visc, self.bc = grid, visc, bc
        self.top = top = Topology(grid, visc, bc)
        if top.n_dof == 0:
            raise WellPosednessError("no velocity unknowns")
        self.A, self.b_bc = top.velocity_system()
        D = top.divergence_matrix
        known = top.known_vector()
        self.B = D[:, top.dof_faces].tocsr()
        self.BT = self.B.T.tocsr()
        self.g = -(D @ known)
        jj, ii = top.fluid_cells
        self.area = grid.cell_area[jj, ii]
        self.cell_nu = visc.values[jj, ii]
        self._null = np.abs(self.BT @ np.ones(self.B.shape[0])).max() \
            <= 1e-12 * max(1.0, abs(self.B).max())
        if self._null:
            # boundary data must carry zero net flux
            self.g -= self.g.sum() / self.g.size
        try:
            self.lu = splu(self.A.tocsc(), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise WellPosednessError(f"viscous block is singular: {exc}") from exc

    def _project(self, r):
        return r - r.mean() if self._null else r

    def force_vector(self, fu: np.ndarray, fv: np.ndarray) -> np.ndarray:
        f = np.concatenate([np.asarray(fu, float).ravel(), np.asarray(fv, float).ravel()])
        d = self.top.dof_faces
        return f[d] * self.top.face_area[d]

    def solve(self, fu, fv, cfg: SolverConfig | None = None,
              p0: np.ndarray | None = None) -> tuple[FlowState, SolveStats]:
        cfg = cfg or SolverConfig()
        t0 = time.perf_counter()
        b = self.b_bc + self.force_vector(fu, fv)
        lu, B, BT = self.lu, self.B, self.BT
        u_base = lu.solve(b)
        rhs = self._project(self.g - B @ u_base)

        def schur(p):
            return B @ lu.solve(BT @ p)

        def precond(r):
            return r * self.cell_nu / self.area

        scale = [1.0 + self._unorm(u_base)]

        def stop(r):
            return np.max(np.abs(r) / self.area, initial=0.0) <= cfg.linear_tol * scale[0]

        p = np.zeros(B.shape[0]) if p0 is None else p0.copy()
        total = 0
        for _ in range(4):
            p, it, ok = pcg(schur, rhs, precond, x0=p if total or p0 is not None else None,
                            maxiter=cfg.max_cg_iters - total, stop=stop,
                            project=self._project)
            total += it
            u = lu.solve(b + BT @ p)
            scale[0] = 1.0 + self._unorm(u)
            true_r = self.g - B @ u
            if stop(true_r) or total >= cfg.max_cg_iters:
                break
        state = self._to_state(u, p)
        stats = SolveStats(cg_iters=total)
        stats.div_residual = float(np.max(np.abs(true_r) / self.area, initial=0.0))
        res = self.A @ u - BT @ p - b
        stats.momentum_residual = float(np.linalg.norm(res) / max(np.linalg.norm(b), 1e-300))
        stats.wall_time = time.perf_counter() - t0
        stats.converged = bool(stop(true_r))
        if not stats.converged:
            raise NonConvergenceError(
                f"Schur CG stopped after {total} iterations, "
                f"divergence residual {stats.div_residual:.3e}", stats, state)
        return state, stats

    def _unorm(self, udof):
        x = self.top.known_vector()
        x[self.top.dof_faces] = udof
        u, v = self.top.unpack(x)
        return l2_norm(FlowState(u, v, np.zeros(self.grid.mask.shape)), self.grid)

    def _to_state(self, udof, p) -> FlowState:
        top, grid = self.top, self.grid
        x = top.known_vector()
        x[top.dof_faces] = udof
        u, v = top.unpack(x)
        pf = np.zeros(grid.mask.shape)
        jj, ii = top.fluid_cells
        if self._null:
            p = p - np.dot(p, self.area) / self.area.sum()
        pf[jj, ii] = p
        return FlowState(u, v, pf, top.bottom_trace(u[0]))


def _force_arrays(grid: MacGrid, f):
    """Accept (fu, fv) face arrays or a pair of callables/constants."""
    fx, fy = f
    if isinstance(fx, np.ndarray) and fx.shape == (grid.ny, grid.nx + 1):
        return fx, fy
    return sample_faces(grid, fx, fy)


def solve_stokes(grid: MacGrid, visc: ViscosityField, bc: BoundaryCondition, f,
                 cfg: SolverConfig | None = None,
                 system: StokesSystem | None = None) -> tuple[FlowState, SolveStats]:
    """Linear Stokes  -div(visc grad u) + grad p = f,  div u = 0."""
    fu, fv = _force_arrays(grid, f)
    if not (np.all(np.isfinite(fu)) and np.all(np.isfinite(fv))):
        raise ValueError("body force must be finite")
    system = system or StokesSystem(grid, visc, bc)
    return system.solve(fu, fv, cfg)


def _layer_weight(grid: MacGrid):
    layer = grid.mask == FLUID_LAYER
    if not layer.any():
        return None
    wu_l, wv_l = l2_weights(grid, layer)
    wu, wv = l2_weights(grid)
    if grid.periodic_x:
        wu_l[:, -1], wu[:, -1] = wu_l[:, 0], wu[:, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        keep_u = np.where(wu > 0, 1.0 - wu_l / wu, 1.0)
        keep_v = np.where(wv > 0, 1.0 - wv_l / wv, 1.0)
    return keep_u, keep_v


def solve_navier_stokes(grid: MacGrid, visc: ViscosityField, bc: BoundaryCondition, f,
                        cfg: SolverConfig | None = None,
                        system: StokesSystem | None = None) -> tuple[FlowState, SolveStats]:
    """Steady Navier-Stokes by Picard iteration  u <- S(f - (u.grad)u)  with
    damping; the damping is halved whenever the update norm grows."""
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    fu, fv = _force_arrays(grid, f)
    system = system or StokesSystem(grid, visc, bc)
    keep = _layer_weight(grid) if cfg.drop_layer_advection else None
    state, st = system.solve(fu, fv, cfg)
    stats = SolveStats(cg_iters=st.cg_iters, picard_iters=1)
    theta = cfg.picard_damping
    prev_change = np.inf
    change = 0.0
    for k in range(1, cfg.picard_max + 1):
        unorm = l2_norm(state, grid)
        if unorm == 0.0:
            change = 0.0
            break
        au, av = advection_term(state, state, grid, bc)
        if keep is not None:
            au, av = au * keep[0], av * keep[1]
        new, st = system.solve(fu - au, fv - av, cfg)
        stats.cg_iters += st.cg_iters
        diff = FlowState(new.u - state.u, new.v - state.v, new.p)
        change = l2_norm(diff, grid) / max(l2_norm(new, grid), 1e-300)
        stats.history.append(change)
        if change > prev_change and theta > 1.0 / 64:
            theta *= 0.5
        prev_change = change
        state = FlowState((1 - theta) * state.u + theta * new.u,
                          (1 - theta) * state.v + theta * new.v,
                          (1 - theta) * state.p + theta * new.p,
                          (1 - theta) * state.trace + theta * new.trace)
        stats.picard_iters = k + 1
        if change <= cfg.picard_tol:
            break
    stats.picard_residual = change
    stats.div_residual = float(np.max(np.abs(discrete_divergence(state, grid))))
    stats.wall_time = time.perf_counter() - t0
    if change > cfg.picard_tol:
        stats.converged = False
        raise NonConvergenceError(
            f"Picard stopped after {stats.picard_iters} iterations, "
            f"relative change {change:.3e}", stats, state)
    return state, stats
