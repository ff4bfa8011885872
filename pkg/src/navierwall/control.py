"""Optimal boundary coefficients of prescribed mass and their m -> 0 limit.

For h >= 0 on the wall with int h = m, the state u^h solves the limit
problem with slip density 1/h (h = 0 is a no-slip column), and

    F(h, u) = nu/2 int |grad u|^2 + 1/2 int u1^2 / h
              + int (u^h . grad) u^h . u - int f . u.

Minimising over h for fixed u gives h = m |u1| / int |u1|, which is the
update of the fixed-point iteration below.  As m -> 0 the normalised
coefficients h/m concentrate where the wall traction of the no-slip flow
is extremal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import (BoundaryCondition, FlowState, ViscosityField, advection_term,
                     dirichlet_energy, l2_inner, l2_norm, navier_slip, sample_faces)
from .grid import MacGrid
from .stokes import NonConvergenceError, SolverConfig, solve_stokes
from .walllaw import (CondensedWall, WallLawSpec, flux_traction, solve_limit,
                      tangential_traction)


@dataclass
class ControlState:
    m: float
    h: np.ndarray
    state: FlowState | None = None
    F: float = 0.0
    work: float = 0.0
    iterations: int = 0
    change: float = 0.0
    theta: float = 1.0
    converged: bool = False
    inactive: bool = False
    history: list = field(default_factory=list)

    def mass(self, grid: MacGrid) -> float:
        return float(np.dot(grid.gamma2_weights(), self.h))


def _weights(grid: MacGrid) -> np.ndarray:
    return grid.gamma2_weights()


def renormalize(h: np.ndarray, m: float, grid: MacGrid) -> np.ndarray:
    """Scale h >= 0 so that its wall integral is m; the duplicated periodic
    column is kept equal to column 0."""
    h = np.maximum(np.asarray(h, dtype=float), 0.0)
    if grid.periodic_x:
        h[-1] = h[0]
    total = np.dot(_weights(grid), h)
    if not total > 0:
        raise ValueError("cannot renormalise a coefficient with zero mass")
    return h * (m / total)


def uniform_h(m: float, grid: MacGrid) -> np.ndarray:
    return renormalize(np.ones(grid.nx + 1), m, grid)


def slip_density(h: np.ndarray) -> np.ndarray:
    """1/h, with the infinite tag on columns where h = 0."""
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(h > 0, 1.0 / np.where(h > 0, h, 1.0), np.inf)


def slip_spec(h: np.ndarray) -> WallLawSpec:
    return WallLawSpec.per_face(slip_density(h))


def _forces(grid: MacGrid, f):
    fx, fy = f
    if isinstance(fx, np.ndarray) and fx.shape == (grid.ny, grid.nx + 1):
        return fx, fy
    return sample_faces(grid, fx, fy)


def _bulk_bc(grid: MacGrid) -> BoundaryCondition:
    return BoundaryCondition.walls(grid.periodic_x, navier_slip(0.0))


def energy_F(h: np.ndarray, state: FlowState, f, nu: float, grid: MacGrid) -> float:
    """Quadrature value of F(h, u) with u = u^h in the advection term."""
    s = np.zeros(grid.nx + 1) if state.trace is None else state.trace
    w = _weights(grid)
    active = w > 0
    if np.any(active & (h <= 0) & (s != 0)):
        return float("inf")
    st = FlowState(state.u, state.v, state.p, s)
    bulk = dirichlet_energy(st, ViscosityField.uniform(grid, nu), grid, _bulk_bc(grid))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(h > 0, s * s / np.where(h > 0, h, 1.0), 0.0)
    wall = float(np.dot(w, ratio))
    au, av = advection_term(st, st, grid, _bulk_bc(grid))
    fu, fv = _forces(grid, f)
    return 0.5 * bulk + 0.5 * wall + l2_inner(au, av, st, grid) - l2_inner(fu, fv, st, grid)


def solve_control_fixed_point(m: float, f, nu: float, grid: MacGrid, theta: float = 1.0,
                              tol: float = 1e-9, max_iters: int = 20000,
                              cfg: SolverConfig | None = None,
                              ns_mode: str = "navier_stokes",
                              h0: np.ndarray | None = None,
                              wall: CondensedWall | None = None) -> ControlState:
    """Damped fixed point h <- (1 - theta) h + theta m|u1| / int|u1|.

    Each state solve goes through the condensed wall system, which is the
    assembled slip solve restricted to the wall traces.  The advection is
    lagged in an outer Picard loop; the inner h-loop runs to ``tol`` for
    each frozen advection.  The damping is halved whenever F increases.
    """
    if not m > 0:
        raise ValueError("mass m must be positive")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if ns_mode not in ("stokes", "navier_stokes"):
        raise ValueError(f"unknown ns_mode {ns_mode!r}")
    cfg = cfg or SolverConfig()
    fu, fv = _forces(grid, f)
    wall = wall or CondensedWall(grid, nu, cfg)
    h = uniform_h(m, grid) if h0 is None else renormalize(h0, m, grid)
    ctl = ControlState(m, h, theta=theta)
    au, av = np.zeros_like(fu), np.zeros_like(fv)
    state = None
    picard_change = np.inf
    for _ in range(cfg.picard_max):
        gu, gv = fu - au, fv - av
        uf, q = wall.forced(gu, gv)
        base = l2_inner(gu, gv, uf, grid)
        h, s = _inner_fixed_point(ctl, h, q, base, wall, tol, max_iters)
        new = wall.assemble(uf, s)
        if state is not None:
            picard_change = l2_norm(FlowState(new.u - state.u, new.v - state.v, new.p), grid) \
                / max(l2_norm(new, grid), 1e-300)
        state = new
        if ns_mode == "stokes" or picard_change <= cfg.picard_tol or ctl.inactive:
            break
        au, av = advection_term(state, state, grid, _bulk_bc(grid))
    ctl.h, ctl.state = h, state
    ctl.F = energy_F(h, state, (fu, fv), nu, grid)
    ctl.work = l2_inner(fu, fv, state, grid)
    if ns_mode == "navier_stokes" and picard_change > cfg.picard_tol and not ctl.inactive:
        ctl.converged = False
    if not ctl.converged:
        raise NonConvergenceError(
            f"control fixed point stopped after {ctl.iterations} iterations, "
            f"relative change {ctl.change:.3e}", None, ctl)
    return ctl


def _inner_fixed_point(ctl: ControlState, h, q, base, wall, tol, max_iters):
    grid, m = wall.grid, ctl.m
    w = _weights(grid)
    cols = wall.cols
    ctl.converged = False
    prev_F = np.inf
    for k in range(1, max_iters + 1):
        s = wall.traces(slip_density(h), q)
        # F for the frozen advection; reciprocity gives <g, Z_j> = q_j
        F = -0.5 * (base + float(q @ s))
        ctl.history.append((h.copy(), F))
        if F > prev_F + 1e-13 * abs(prev_F) and ctl.theta > 1.0 / 1024:
            ctl.theta *= 0.5
        prev_F = F
        full = np.zeros(grid.nx + 1)
        full[cols] = np.abs(s)
        if grid.periodic_x:
            full[-1] = full[0]
        total = float(np.dot(w, full))
        ctl.iterations += 1
        if total == 0.0:
            ctl.inactive = ctl.converged = True
            return uniform_h(m, grid), s
        new = renormalize((1 - ctl.theta) * h + ctl.theta * m * full / total, m, grid)
        ctl.change = float(np.dot(w, np.abs(new - h))) / m
        h = new
        if ctl.change < tol:
            ctl.converged = True
            break
    return h, wall.traces(slip_density(h), q)


def update_residual(ctl: ControlState, grid: MacGrid) -> float:
    """|| h - m|u1| / int|u1| ||_L1 for the stored state."""
    w = _weights(grid)
    s = np.abs(ctl.state.trace)
    total = float(np.dot(w, s))
    if total == 0.0:
        return 0.0
    return float(np.dot(w, np.abs(ctl.h - ctl.m * s / total)))


# ---------------------------------------------------------------------------
# linearised perturbation
# ---------------------------------------------------------------------------

@dataclass
class Perturbation:
    v: FlowState
    u0m: FlowState
    J: float
    bulk: float
    total_variation: float
    pairing: float


def linearized_perturbation(m: float, um: FlowState, f, nu: float, grid: MacGrid,
                            cfg: SolverConfig | None = None) -> Perturbation:
    """v = (u^m - u^{0,m}) / m and the value of the functional at it.

    u^{0,m} is the no-slip Stokes flow driven by f - (u^m . grad) u^m.  The
    traction in the pairing term is the flux-consistent one of u^{0,m}, so
    the value equals [E(u^{0,m} + m v) - E(u^{0,m})] / m for the discrete
    energy E minimised by u^m, and is therefore <= 0 at a minimiser.
    """
    fu, fv = _forces(grid, f)
    bc = _bulk_bc(grid)
    au, av = advection_term(um, um, grid, bc)
    noslip = BoundaryCondition.walls(grid.periodic_x)
    u0m, _ = solve_stokes(grid, ViscosityField.uniform(grid, nu), noslip,
                          (fu - au, fv - av), cfg)
    trace = np.zeros(grid.nx + 1) if um.trace is None else um.trace
    v = FlowState((um.u - u0m.u) / m, (um.v - u0m.v) / m, um.p - u0m.p, trace / m)
    w = _weights(grid)
    bulk = 0.5 * m * dirichlet_energy(v, ViscosityField.uniform(grid, nu), grid, bc)
    tv = float(np.dot(w, np.abs(v.trace)))
    pairing = float(np.dot(w, flux_traction(u0m, nu, grid) * v.trace))
    return Perturbation(v, u0m, bulk + 0.5 * tv * tv + pairing, bulk, tv, pairing)


# ---------------------------------------------------------------------------
# m sweep and concentration
# ---------------------------------------------------------------------------

@dataclass
class ConcentrationReport:
    M: float
    traction: np.ndarray
    band: np.ndarray
    delta: float
    m: list = field(default_factory=list)
    band_fraction: list = field(default_factory=list)
    int_abs_u_over_m: list = field(default_factory=list)
    F: list = field(default_factory=list)
    work: list = field(default_factory=list)
    work_identity_residual: list = field(default_factory=list)
    mass_residual: list = field(default_factory=list)
    J: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    band_sign: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    degenerate: bool = False
    argmax_x: float = float("nan")


def traction_band(t: np.ndarray, M: float, delta: float) -> np.ndarray:
    return (np.abs(t - M) <= delta * M) | (np.abs(t + M) <= delta * M)


def m_sweep(m_list, f, nu: float, grid: MacGrid, cfg: SolverConfig | None = None,
            delta: float = 0.05, theta: float = 1.0, tol: float = 1e-9,
            max_iters: int = 500, ns_mode: str = "navier_stokes") -> ConcentrationReport:
    m_list = [float(m) for m in m_list]
    if len(m_list) < 3 or any(b >= a for a, b in zip(m_list, m_list[1:])):
        raise ValueError("m_list needs >= 3 strictly decreasing values")
    if any(m <= 0 for m in m_list):
        raise ValueError("masses must be positive")
    fu, fv = _forces(grid, f)
    w = _weights(grid)
    u0, _ = solve_limit((fu, fv), nu, WallLawSpec.infinite(), ns_mode, grid, cfg)
    t = tangential_traction(u0, nu, grid)
    t = np.where(w > 0, t, 0.0)
    M = float(np.max(np.abs(t)))
    band = traction_band(t, M, delta) & (w > 0) if M > 0 else np.zeros(t.shape, bool)
    rep = ConcentrationReport(M, t, band, delta, degenerate=M == 0.0)
    if M > 0:
        rep.argmax_x = float(grid.x_faces[int(np.argmax(np.abs(t)))])
    x = grid.x_faces
    wall = CondensedWall(grid, nu, cfg)
    h_prev = None
    for m in m_list:
        try:
            ctl = solve_control_fixed_point(m, (fu, fv), nu, grid, theta, tol, max_iters,
                                            cfg, ns_mode, h0=h_prev, wall=wall)
        except NonConvergenceError as exc:
            rep.failures.append((m, str(exc)))
            continue
        h_prev = ctl.h
        hm = ctl.h / m
        s = ctl.state.trace
        rep.m.append(m)
        rep.iterations.append(ctl.iterations)
        rep.band_fraction.append(float(np.dot(w, hm * band)))
        rep.int_abs_u_over_m.append(float(np.dot(w, np.abs(s))) / m)
        rep.F.append(ctl.F)
        rep.work.append(ctl.work)
        rep.work_identity_residual.append(abs(ctl.F + ctl.work))
        rep.mass_residual.append(abs(ctl.mass(grid) - m) / m)
        rep.moments.append([float(np.dot(w, hm * x ** k)) for k in range(3)])
        signs = np.sign(s[band]) if band.any() else np.zeros(0)
        rep.band_sign.append(float(np.mean(signs)) if signs.size else 0.0)
        rep.J.append(linearized_perturbation(m, ctl.state, (fu, fv), nu, grid, cfg).J)
    return rep
