"""The composite thin-layer problem on Omega plus the layer below the wall.

Viscosity is nu in Omega and nu * eps in the layer; the whole outer boundary
of the composite fluid set carries homogeneous Dirichlet data.  Velocity and
flux continuity across y = 0 come for free from the shared staggered
unknowns and the series (harmonic) conductances of the interface links.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import (BoundaryCondition, FlowState, ViscosityField, dirichlet_energy,
                     l2_norm, pressure_l2)
from .grid import (FLUID_LAYER, FLUID_OMEGA, DomainSpec, MacGrid, Resolution,
                   build_domain_grid, rasterize_layer)
from .stokes import SolverConfig, SolveStats, solve_navier_stokes, solve_stokes

ENVELOPE = 10.0


@dataclass(frozen=True)
class ThinLayerProblem:
    domain: DomainSpec
    nu: float = 1.0
    f: tuple = (1.0, 0.0)
    ns_mode: str = "stokes"

    def __post_init__(self):
        if self.domain.layer is None:
            raise ValueError("thin-layer problem needs a layer profile")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.ns_mode not in ("stokes", "navier_stokes"):
            raise ValueError(f"unknown ns_mode {self.ns_mode!r}")

    @property
    def eps(self) -> float:
        return self.domain.layer.eps


def layer_grid(prob: ThinLayerProblem, res: Resolution) -> MacGrid:
    """Omega rows identical to ``build_domain_grid(.., res)`` plus the
    rasterised layer below."""
    g = build_domain_grid(prob.domain, res.nx, res.ny, res.grading, res.layer_rows)
    return rasterize_layer(prob.domain.layer, g)


def layer_bc(grid: MacGrid) -> BoundaryCondition:
    return BoundaryCondition.walls(grid.periodic_x)


def solve_thin_layer(prob: ThinLayerProblem, res: Resolution,
                     cfg: SolverConfig | None = None,
                     grid: MacGrid | None = None) -> tuple[FlowState, SolveStats]:
    grid = grid or layer_grid(prob, res)
    visc = ViscosityField.layered(grid, prob.nu, prob.eps)
    solve = solve_stokes if prob.ns_mode == "stokes" else solve_navier_stokes
    return solve(grid, visc, layer_bc(grid), prob.f, cfg)


def phi_eps_energy(state: FlowState, prob: ThinLayerProblem, grid: MacGrid) -> float:
    """nu int_Omega |grad u|^2 + nu eps int_layer |grad u|^2."""
    visc = ViscosityField.layered(grid, prob.nu, prob.eps)
    return dirichlet_energy(state, visc, grid, layer_bc(grid))


def restrict_to_omega(state: FlowState, grid: MacGrid) -> FlowState:
    """Rows above y = 0, as a state on the layer-free grid."""
    j = grid.wall_row()
    return FlowState(state.u[j:].copy(), state.v[j:].copy(), state.p[j:].copy())


def omega_mask(grid: MacGrid) -> np.ndarray:
    return grid.mask == FLUID_OMEGA


def layer_mask(grid: MacGrid) -> np.ndarray:
    return grid.mask == FLUID_LAYER


# ---------------------------------------------------------------------------
# a-priori bounds
# ---------------------------------------------------------------------------

@dataclass
class BoundsRecord:
    eps: float
    phi: float
    u_sq: float
    p_norm: float


def bounds_record(state: FlowState, prob: ThinLayerProblem, grid: MacGrid) -> BoundsRecord:
    return BoundsRecord(prob.eps, phi_eps_energy(state, prob, grid),
                        l2_norm(state, grid) ** 2, pressure_l2(state.p, grid))


@dataclass
class BoundsReport:
    eps: list
    phi: list
    u_sq: list
    p_norm: list
    ratios: dict = field(default_factory=dict)
    envelope: float = ENVELOPE
    passed: bool = True
    note: str = ("bounded-ratio proxy for the uniform a-priori bounds; "
                 "the true constants are not explicit")


def _ratio(vals) -> float:
    vals = np.asarray(vals, dtype=float)
    hi, lo = vals.max(), vals.min()
    if hi == 0.0:
        return 1.0
    return float(hi / lo) if lo > 0 else float("inf")


def check_a_priori_bounds(results: list) -> BoundsReport:
    """Max/min ratio of each bounded quantity across an eps sweep."""
    if len(results) < 2:
        raise ValueError("a-priori bound check needs at least two values of eps")
    recs = sorted(results, key=lambda r: -r.eps)
    rep = BoundsReport([r.eps for r in recs], [r.phi for r in recs],
                       [r.u_sq for r in recs], [r.p_norm for r in recs])
    rep.ratios = {k: _ratio(getattr(rep, k)) for k in ("phi", "u_sq", "p_norm")}
    rep.passed = all(r < ENVELOPE for r in rep.ratios.values())
    return rep
