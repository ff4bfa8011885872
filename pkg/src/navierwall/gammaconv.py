"""Sweeps over the layer scale eps: thin-layer solutions against the limit
wall-law solution, energies, a-priori bounds and a fitted rate."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fields import FlowState, l2_norm, pressure_l2
from .grid import (DomainSpec, GridError, LayerProfile, Resolution, build_domain_grid)
from .stokes import NonConvergenceError, SolverConfig
from .thinlayer import (BoundsReport, ThinLayerProblem, bounds_record, check_a_priori_bounds,
                        layer_grid, phi_eps_energy, restrict_to_omega, solve_thin_layer)
from .walllaw import WallLawSpec, g0_energy, solve_limit


class RateError(ValueError):
    pass


@dataclass
class SweepRow:
    eps: float
    phi_eps: float = math.nan
    g_eps: float = math.nan
    l2_err_u: float = math.nan
    l2_err_p: float = math.nan
    cg_iters: int = 0
    picard_iters: int = 0
    failure: str = ""


@dataclass
class SweepReport:
    rows: list
    g0: float
    u0_norm: float
    rate: float = math.nan
    rate_const: float = math.nan
    fit_residual: float = math.nan
    rate_note: str = ""
    bounds: BoundsReport | None = None
    status: int = 0

    @property
    def eps(self) -> list:
        return [r.eps for r in self.rows]

    @property
    def errors(self) -> list:
        return [r.l2_err_u for r in self.rows]

    def energy_gaps(self) -> list:
        return [abs(r.g_eps - self.g0) for r in self.rows]


@dataclass(frozen=True)
class SweepSetup:
    """Everything but eps: geometry, physics, reference wall law, grid."""

    h: object = 1.0
    kind: str = "fixed"
    f: tuple = (1.0, 0.0)
    nu: float = 1.0
    spec: WallLawSpec = field(default_factory=lambda: WallLawSpec.over_h(1.0, 1.0))
    res: Resolution = field(default_factory=Resolution)
    lx: float = 1.0
    periodic_x: bool = True
    ns_mode: str = "stokes"


def _member(setup: SweepSetup, eps: float, ref: FlowState, ref_grid, cfg):
    row = SweepRow(eps)
    try:
        prof = LayerProfile(setup.kind, setup.h, eps)
        prob = ThinLayerProblem(DomainSpec(setup.lx, prof, setup.periodic_x),
                                setup.nu, setup.f, setup.ns_mode)
        grid = layer_grid(prob, setup.res)
        state, stats = solve_thin_layer(prob, setup.res, cfg, grid)
    except GridError as exc:
        row.failure = f"rejected: {exc}"
        return row, None
    except NonConvergenceError as exc:
        row.failure = f"non-convergence: {exc}"
        return row, None
    om = restrict_to_omega(state, grid)
    diff = FlowState(om.u - ref.u, om.v - ref.v, om.p - ref.p)
    row.l2_err_u = l2_norm(diff, ref_grid)
    row.l2_err_p = pressure_l2(diff.p, ref_grid)
    row.phi_eps = phi_eps_energy(state, prob, grid)
    # the constraint part of G^eps vanishes on the discrete solution
    row.g_eps = row.phi_eps
    row.cg_iters, row.picard_iters = stats.cg_iters, stats.picard_iters
    return row, bounds_record(state, prob, grid)


def run_sweep(eps_list, setup: SweepSetup, cfg: SolverConfig | None = None,
              jobs: int = 1) -> SweepReport:
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3 or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list needs >= 3 strictly decreasing values")
    if any(e <= 0 for e in eps_list):
        raise ValueError("eps values must be positive")
    ref_grid = build_domain_grid(DomainSpec(setup.lx, None, setup.periodic_x),
                                 setup.res.nx, setup.res.ny, setup.res.grading)
    u0, _ = solve_limit(setup.f, setup.nu, setup.spec, setup.ns_mode, ref_grid, cfg)
    g0 = g0_energy(u0, setup.nu, setup.spec, ref_grid)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(lambda e: _member(setup, e, u0, ref_grid, cfg), eps_list))
    else:
        out = [_member(setup, e, u0, ref_grid, cfg) for e in eps_list]

    rep = SweepReport([r for r, _ in out], g0, l2_norm(u0, ref_grid))
    recs = [b for _, b in out if b is not None]
    if any(r.failure for r in rep.rows):
        rep.status = 1
    if len(recs) >= 2:
        rep.bounds = check_a_priori_bounds(recs)
    try:
        rep.rate, rep.rate_const, rep.fit_residual = estimate_rate(rep)
    except RateError as exc:
        rep.rate_note = str(exc)
    return rep


def estimate_rate(report) -> tuple[float, float, float]:
    """Least-squares fit of log err = log C + alpha log eps.

    Accepts a :class:`SweepReport` or a pair ``(eps, errors)``; the residual
    is the root-mean-square misfit in log space.
    """
    if isinstance(report, SweepReport):
        eps, err = report.eps, report.errors
    else:
        eps, err = report
    eps = np.asarray(eps, dtype=float)
    err = np.asarray(err, dtype=float)
    if eps.size != err.size:
        raise RateError("eps and error lists differ in length")
    if eps.size < 3:
        raise RateError("need at least three errors for a rate")
    if not np.all(np.isfinite(err)) or np.any(err <= 0) or np.any(eps <= 0):
        raise RateError("rate undefined: errors must be finite and nonzero")
    x, y = np.log(eps), np.log(err)
    (alpha, logc), res, *_ = np.polyfit(x, y, 1, full=True)
    fit = alpha * x + logc
    resid = float(np.sqrt(np.mean((y - fit) ** 2)))
    return float(alpha), float(np.exp(logc)), resid
