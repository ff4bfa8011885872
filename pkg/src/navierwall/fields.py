"""Staggered velocity/pressure containers and the discrete operators.

The viscous term is assembled as a finite-volume "conductance network": every
pair of neighbouring faces of the same velocity component (or a face and a
wall) is joined by a link with conductance ``g``, so that

    energy  = sum_links g * (difference across the link)**2
    A u     = gradient of energy / 2

Normal fluxes across rows of different viscosity combine as resistances in
series (harmonic mean), which is how the flux continuity condition at the
layer/fluid interface is met without explicit constraint rows.  A Navier slip
wall is one more resistance ``1 / beta`` in series with the half-cell next to
the wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .grid import FLUID_LAYER, SOLID, GridError, MacGrid

DOF, KNOWN, SOLID_FACE = 2, 1, 0


class ConformanceError(ValueError):
    """A field does not match the grid it is used with."""


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------

@dataclass
class ViscosityField:
    values: np.ndarray

    @classmethod
    def uniform(cls, grid: MacGrid, nu: float) -> "ViscosityField":
        return cls(np.full(grid.mask.shape, float(nu)))

    @classmethod
    def layered(cls, grid: MacGrid, nu: float, eps: float) -> "ViscosityField":
        """nu on the fluid domain, nu * eps in the thin layer."""
        vals = np.full(grid.mask.shape, float(nu))
        vals[grid.mask == FLUID_LAYER] = nu * eps
        return cls(vals)

    def check(self, grid: MacGrid) -> None:
        if self.values.shape != grid.mask.shape:
            raise ConformanceError("viscosity shape does not match grid")
        if np.any(~(self.values[grid.fluid] > 0)):
            raise ValueError("viscosity must be strictly positive on fluid cells")


@dataclass(frozen=True)
class EdgeCondition:
    """Condition on one edge of the grid rectangle.

    kind: ``dirichlet`` (velocity ``value``), ``navier_slip`` (tangential
    Robin coefficient ``beta`` per wall column, ``np.inf`` = no slip, plus
    zero normal velocity) or ``periodic``.
    """

    kind: str = "dirichlet"
    value: tuple = (0.0, 0.0)
    beta: object = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "navier_slip", "periodic"):
            raise ValueError(f"unknown edge condition {self.kind!r}")
        if self.kind == "navier_slip":
            b = np.asarray(self.beta, dtype=float)
            if np.any(np.isnan(b)) or np.any(b < 0):
                raise ValueError("slip coefficient must be >= 0")


def no_slip(value=(0.0, 0.0)) -> EdgeCondition:
    return EdgeCondition("dirichlet", tuple(map(float, value)))


def navier_slip(beta) -> EdgeCondition:
    return EdgeCondition("navier_slip", (0.0, 0.0), beta)


def periodic() -> EdgeCondition:
    return EdgeCondition("periodic")


@dataclass(frozen=True)
class BoundaryCondition:
    bottom: EdgeCondition = field(default_factory=no_slip)
    top: EdgeCondition = field(default_factory=no_slip)
    left: EdgeCondition = field(default_factory=no_slip)
    right: EdgeCondition = field(default_factory=no_slip)
    solid_velocity: tuple = (0.0, 0.0)

    @classmethod
    def walls(cls, periodic_x: bool = False, bottom: EdgeCondition | None = None,
              solid_velocity=(0.0, 0.0)) -> "BoundaryCondition":
        side = periodic() if periodic_x else no_slip()
        return cls(bottom or no_slip(), no_slip(), side, side, tuple(solid_velocity))

    def check(self, grid: MacGrid) -> None:
        lat = (self.left.kind == "periodic", self.right.kind == "periodic")
        if lat[0] != lat[1]:
            raise ValueError("periodic edges must come in a matched pair")
        if lat[0] != grid.periodic_x:
            raise ValueError("periodic tags do not match the grid")
        if self.top.kind != "dirichlet":
            raise ValueError("top edge must be a Dirichlet edge")
        if self.left.kind == "navier_slip":
            raise ValueError("slip is supported on the bottom edge only")
        if self.bottom.kind == "periodic":
            raise ValueError("bottom edge cannot be periodic")

    def bottom_beta(self, grid: MacGrid) -> np.ndarray | None:
        if self.bottom.kind != "navier_slip":
            return None
        beta = np.broadcast_to(np.asarray(self.bottom.beta, float), (grid.nx + 1,)).copy()
        if grid.periodic_x:
            beta[-1] = beta[0]
        return beta


@dataclass
class FlowState:
    """u on vertical faces, v on horizontal faces, p at cell centres.

    ``trace`` is the tangential velocity on the bottom edge at the u columns;
    solvers fill it (it differs from the wall value only on slip walls).
    """

    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    trace: np.ndarray | None = None

    @classmethod
    def zeros(cls, grid: MacGrid) -> "FlowState":
        ny, nx = grid.mask.shape
        return cls(np.zeros((ny, nx + 1)), np.zeros((ny + 1, nx)), np.zeros((ny, nx)))

    def check(self, grid: MacGrid) -> None:
        ny, nx = grid.mask.shape
        if self.u.shape != (ny, nx + 1) or self.v.shape != (ny + 1, nx) \
                or self.p.shape != (ny, nx):
            raise ConformanceError("state does not conform to grid")
        if self.trace is not None and self.trace.shape != (nx + 1,):
            raise ConformanceError("trace does not conform to grid")

    def copy(self) -> "FlowState":
        return FlowState(self.u.copy(), self.v.copy(), self.p.copy(),
                         None if self.trace is None else self.trace.copy())


def sample_faces(grid: MacGrid, fx, fy) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a vector field (two callables of x, y, or constants) at the
    u and v face centres."""
    ux, uy = np.meshgrid(grid.x_faces, grid.yc)
    vx, vy = np.meshgrid(grid.xc, grid.y_faces)
    fu = fx(ux, uy) if callable(fx) else np.full(ux.shape, float(fx))
    fv = fy(vx, vy) if callable(fy) else np.full(vx.shape, float(fy))
    return np.broadcast_to(fu, ux.shape).astype(float), np.broadcast_to(fv, vx.shape).astype(float)


# ---------------------------------------------------------------------------
# face topology and conductance links
# ---------------------------------------------------------------------------

class Topology:
    """Face classification and conductance links for one (grid, viscosity,
    boundary condition) triple.  Faces are numbered u first (row major, shape
    (ny, nx + 1)) then v (shape (ny + 1, nx)); the duplicated periodic u
    column aliases column 0."""

    def __init__(self, grid: MacGrid, visc: ViscosityField, bc: BoundaryCondition):
        visc.check(grid)
        bc.check(grid)
        self.grid, self.visc, self.bc = grid, visc, bc
        ny, nx = grid.mask.shape
        self.ny, self.nx = ny, nx
        self.nu_faces = ny * (nx + 1)
        self.n_faces = self.nu_faces + (ny + 1) * nx
        self._classify()
        self._build_links()

    # -- classification ----------------------------------------------------
    def _classify(self):
        g, bc = self.grid, self.bc
        ny, nx = self.ny, self.nx
        fluid = g.fluid
        per = g.periodic_x

        uid = np.arange(self.nu_faces).reshape(ny, nx + 1)
        if per:
            uid[:, nx] = uid[:, 0]
        left = np.zeros((ny, nx + 1), bool)
        right = np.zeros((ny, nx + 1), bool)
        left[:, 1:] = fluid
        right[:, :nx] = fluid
        if per:
            left[:, 0] = fluid[:, nx - 1]
            right[:, nx] = fluid[:, 0]
        ukind = np.where(left & right, DOF, np.where(left | right, KNOWN, SOLID_FACE))
        uval = np.zeros((ny, nx + 1))
        uval[ukind == KNOWN] = bc.solid_velocity[0]
        if not per:
            uval[:, 0] = np.where(ukind[:, 0] == KNOWN, bc.left.value[0], 0.0)
            uval[:, nx] = np.where(ukind[:, nx] == KNOWN, bc.right.value[0], 0.0)

        vid = self.nu_faces + np.arange((ny + 1) * nx).reshape(ny + 1, nx)
        below = np.zeros((ny + 1, nx), bool)
        above = np.zeros((ny + 1, nx), bool)
        below[1:] = fluid
        above[:ny] = fluid
        vkind = np.where(below & above, DOF, np.where(below | above, KNOWN, SOLID_FACE))
        vval = np.zeros((ny + 1, nx))
        vval[vkind == KNOWN] = bc.solid_velocity[1]
        bottom_v = 0.0 if bc.bottom.kind == "navier_slip" else bc.bottom.value[1]
        vval[0] = np.where(vkind[0] == KNOWN, bottom_v, 0.0)
        vval[ny] = np.where(vkind[ny] == KNOWN, bc.top.value[1], 0.0)

        self.uid, self.vid = uid, vid
        self.ukind, self.vkind = ukind, vkind
        kind = np.concatenate([ukind.ravel(), vkind.ravel()])
        known_vals = np.concatenate([uval.ravel(), vval.ravel()])
        if per:
            # alias column carries no independent unknown
            kind_u = kind[: self.nu_faces].reshape(ny, nx + 1)
            kind_u[:, nx] = -1
            kind[: self.nu_faces] = kind_u.ravel()
        self.kind = kind
        self.known_vals = known_vals
        self.dof_faces = np.flatnonzero(kind == DOF)
        self.known_faces = np.flatnonzero(kind == KNOWN)
        self.n_dof = self.dof_faces.size
        self.face_to_dof = np.full(self.n_faces, -1)
        self.face_to_dof[self.dof_faces] = np.arange(self.n_dof)

        # viscosity seen by each face: mean over adjacent fluid cells
        nu = np.where(fluid, self.visc.values, 0.0)
        cnt = fluid.astype(float)
        nl = np.zeros((ny, nx + 1)); nr = np.zeros((ny, nx + 1))
        cl = np.zeros((ny, nx + 1)); cr = np.zeros((ny, nx + 1))
        nl[:, 1:], cl[:, 1:] = nu, cnt
        nr[:, :nx], cr[:, :nx] = nu, cnt
        if per:
            nl[:, 0], cl[:, 0] = nu[:, nx - 1], cnt[:, nx - 1]
            nr[:, nx], cr[:, nx] = nu[:, 0], cnt[:, 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            self.nu_u = np.where(cl + cr > 0, (nl + nr) / (cl + cr), 0.0)
        dy = g.dy
        kap = np.zeros((ny + 1, nx))
        kap[1:] += 0.5 * dy[:, None] * nu
        kap[:ny] += 0.5 * dy[:, None] * nu
        self.kappa_v = kap

    # -- links ---------------------------------------------------------------
    def _build_links(self):
        g, bc = self.grid, self.bc
        ny, nx = self.ny, self.nx
        per = g.periodic_x
        fluid = g.fluid
        dx, dy = g.dx, g.dy
        w = g.u_width
        nu = self.visc.values
        ukind, vkind, uid, vid = self.ukind, self.vkind, self.uid, self.vid
        nu_u, kap = self.nu_u, self.kappa_v

        pa, pb, pg = [], [], []          # face-face links
        wa, wg, wv = [], [], []          # face-wall links

        # u, x-direction, through fluid cells
        jj, ii = np.nonzero(fluid)
        pa.append(uid[jj, ii]); pb.append(uid[jj, ii + 1])
        pg.append(nu[jj, ii] * dy[jj] / dx[ii])

        # u, y-direction, at cell vertices
        cols = np.arange(nx if per else nx + 1)
        ka, kb = ukind[:-1, cols], ukind[1:, cols]
        jlo = np.arange(ny - 1)[:, None] * np.ones_like(cols)[None, :]
        ic = np.ones((ny - 1, 1), int) * cols[None, :]
        with np.errstate(divide="ignore"):
            ra = dy[jlo] / (2 * nu_u[jlo, ic])
            rb = dy[jlo + 1] / (2 * nu_u[jlo + 1, ic])
        both = (ka != SOLID_FACE) & (kb != SOLID_FACE)
        pa.append(uid[jlo, ic][both]); pb.append(uid[jlo + 1, ic][both])
        pg.append((w[ic] / (ra + rb))[both])
        lo_only = (ka != SOLID_FACE) & (kb == SOLID_FACE)
        hi_only = (ka == SOLID_FACE) & (kb != SOLID_FACE)
        wa.append(uid[jlo, ic][lo_only]); wg.append((w[ic] / ra)[lo_only])
        wv.append(np.full(lo_only.sum(), bc.solid_velocity[0]))
        wa.append(uid[jlo + 1, ic][hi_only]); wg.append((w[ic] / rb)[hi_only])
        wv.append(np.full(hi_only.sum(), bc.solid_velocity[0]))

        # u, top edge
        top = ukind[ny - 1, cols] != SOLID_FACE
        c = cols[top]
        wa.append(uid[ny - 1, c]); wg.append(w[c] * 2 * nu_u[ny - 1, c] / dy[ny - 1])
        wv.append(np.full(c.size, bc.top.value[0]))

        # u, bottom edge: bulk half-cell conductance, optional slip in series
        bot = ukind[0, cols] != SOLID_FACE
        self.bottom_cols = cols[bot]
        self.bottom_gbulk = w[self.bottom_cols] * 2 * nu_u[0, self.bottom_cols] / dy[0]
        beta = bc.bottom_beta(g)
        if beta is None:
            self.bottom_beta = None
            self.bottom_value = bc.bottom.value[0]
        else:
            self.bottom_beta = beta[self.bottom_cols]
            self.bottom_value = 0.0

        # v, y-direction, through fluid cells
        pa.append(vid[jj, ii]); pb.append(vid[jj + 1, ii])
        pg.append(nu[jj, ii] * dx[ii] / dy[jj])

        # v, x-direction, at vertices
        jr = np.arange(ny + 1)[:, None] * np.ones(nx - 1, int)[None, :]
        il = np.ones((ny + 1, 1), int) * np.arange(nx - 1)[None, :]
        self._v_x_links(pa, pb, pg, wa, wg, wv, jr, il, il + 1)
        if per:
            jr1 = np.arange(ny + 1)[:, None]
            self._v_x_links(pa, pb, pg, wa, wg, wv, jr1,
                            np.full((ny + 1, 1), nx - 1), np.zeros((ny + 1, 1), int))
        else:
            # lateral edge walls
            for col, edge in ((0, bc.left), (nx - 1, bc.right)):
                ok = vkind[:, col] != SOLID_FACE
                rows = np.arange(ny + 1)[ok]
                wa.append(vid[rows, col])
                wg.append(kap[rows, col] / (0.5 * dx[col]))
                wv.append(np.full(rows.size, edge.value[1]))

        self.pair_a = np.concatenate(pa)
        self.pair_b = np.concatenate(pb)
        self.pair_g = np.concatenate(pg)
        self.wall_a = np.concatenate(wa)
        self.wall_g = np.concatenate(wg)
        self.wall_v = np.concatenate(wv).astype(float)

    def _v_x_links(self, pa, pb, pg, wa, wg, wv, jr, il, ir):
        g, bc = self.grid, self.bc
        dx = g.dx
        vkind, vid, kap = self.vkind, self.vid, self.kappa_v
        ka, kb = vkind[jr, il], vkind[jr, ir]
        with np.errstate(divide="ignore"):
            ra = 0.5 * dx[il] / kap[jr, il]
            rb = 0.5 * dx[ir] / kap[jr, ir]
        both = (ka != SOLID_FACE) & (kb != SOLID_FACE)
        pa.append(vid[jr, il][both]); pb.append(vid[jr, ir][both])
        pg.append((1.0 / (ra + rb))[both])
        lo = (ka != SOLID_FACE) & (kb == SOLID_FACE)
        hi = (ka == SOLID_FACE) & (kb != SOLID_FACE)
        wa.append(vid[jr, il][lo]); wg.append((1.0 / ra)[lo])
        wv.append(np.full(lo.sum(), bc.solid_velocity[1]))
        wa.append(vid[jr, ir][hi]); wg.append((1.0 / rb)[hi])
        wv.append(np.full(hi.sum(), bc.solid_velocity[1]))

    # -- bottom wall ----------------------------------------------------------
    def bottom_conductance(self) -> np.ndarray:
        """Series conductance of the bottom wall links (bulk half cell plus
        slip resistance)."""
        gb = self.bottom_gbulk
        if self.bottom_beta is None:
            return gb
        ws = self.grid.u_width[self.bottom_cols] * self.bottom_beta
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(np.isinf(ws), gb, gb * ws / (gb + ws))
        return np.where(ws == 0, 0.0, out)

    def bottom_trace(self, u_row0: np.ndarray) -> np.ndarray:
        """Tangential velocity on the bottom edge at the u columns."""
        trace = np.zeros(self.nx + 1)
        cols = self.bottom_cols
        if self.bottom_beta is None:
            trace[cols] = self.bottom_value
        else:
            gb = self.bottom_gbulk
            ws = self.grid.u_width[cols] * self.bottom_beta
            with np.errstate(invalid="ignore"):
                frac = np.where(np.isinf(ws), 0.0, gb / (gb + ws))
            trace[cols] = frac * u_row0[cols]
        if self.grid.periodic_x:
            trace[-1] = trace[0]
        return trace

    # -- vectors -------------------------------------------------------------
    def pack(self, state: FlowState) -> np.ndarray:
        return np.concatenate([state.u.ravel(), state.v.ravel()])

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = x[: self.nu_faces].reshape(self.ny, self.nx + 1).copy()
        v = x[self.nu_faces:].reshape(self.ny + 1, self.nx).copy()
        if self.grid.periodic_x:
            u[:, -1] = u[:, 0]
        return u, v

    @cached_property
    def face_area(self) -> np.ndarray:
        g = self.grid
        au = np.outer(g.dy, g.u_width)
        av = np.outer(g.v_height, g.dx)
        return np.concatenate([au.ravel(), av.ravel()])

    @cached_property
    def pair_laplacian(self) -> sp.csr_matrix:
        a, b, gg = self.pair_a, self.pair_b, self.pair_g
        n = self.n_faces
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([a, b, b, a])
        vals = np.concatenate([gg, gg, -gg, -gg])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def wall_diag_rhs(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_faces
        diag = np.bincount(self.wall_a, self.wall_g, minlength=n)
        rhs = np.bincount(self.wall_a, self.wall_g * self.wall_v, minlength=n)
        bot = self.uid[0, self.bottom_cols]
        gbot = self.bottom_conductance()
        diag += np.bincount(bot, gbot, minlength=n)
        rhs += np.bincount(bot, gbot * self.bottom_value, minlength=n)
        return diag, rhs

    def known_vector(self) -> np.ndarray:
        x = np.zeros(self.n_faces)
        x[self.known_faces] = self.known_vals[self.known_faces]
        return x

    def velocity_system(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """Viscous matrix on the unknown faces and the right-hand side from
        the known faces and walls."""
        L = self.pair_laplacian
        diag, wrhs = self.wall_diag_rhs()
        d = self.dof_faces
        A = L[d][:, d] + sp.diags(diag[d])
        b = wrhs[d] - L[d] @ self.known_vector()
        return A.tocsr(), b

    @cached_property
    def divergence_matrix(self) -> sp.csr_matrix:
        """Integrated divergence (net outflow) on fluid cells, all faces."""
        g = self.grid
        ny, nx = self.ny, self.nx
        jj, ii = np.nonzero(g.fluid)
        cells = np.arange(jj.size)
        dy, dx = g.dy[jj], g.dx[ii]
        rows = np.concatenate([cells] * 4)
        cols = np.concatenate([self.uid[jj, ii + 1], self.uid[jj, ii],
                               self.vid[jj + 1, ii], self.vid[jj, ii]])
        vals = np.concatenate([dy, -dy, dx, -dx])
        return sp.csr_matrix((vals, (rows, cols)), shape=(jj.size, self.n_faces))

    @cached_property
    def fluid_cells(self) -> tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.grid.fluid)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def _default_bc(grid: MacGrid) -> BoundaryCondition:
    return BoundaryCondition.walls(grid.periodic_x)


def discrete_divergence(state: FlowState, grid: MacGrid) -> np.ndarray:
    """Cell-centred divergence; zero on solid cells."""
    state.check(grid)
    flux = (state.u[:, 1:] - state.u[:, :-1]) * grid.dy[:, None] \
        + (state.v[1:] - state.v[:-1]) * grid.dx[None, :]
    return np.where(grid.fluid, flux / grid.cell_area, 0.0)


def discrete_gradient(p: np.ndarray, grid: MacGrid) -> tuple[np.ndarray, np.ndarray]:
    """Pressure gradient on faces between two fluid cells; zero elsewhere."""
    if p.shape != grid.mask.shape:
        raise ConformanceError("pressure does not conform to grid")
    ny, nx = grid.mask.shape
    fluid = grid.fluid
    xc, yc = grid.xc, grid.yc
    gu = np.zeros((ny, nx + 1))
    gv = np.zeros((ny + 1, nx))
    both = fluid[:, 1:] & fluid[:, :-1]
    gu[:, 1:nx] = np.where(both, (p[:, 1:] - p[:, :-1]) / np.diff(xc)[None, :], 0.0)
    if grid.periodic_x:
        dxw = grid.u_width[0]
        seam = fluid[:, 0] & fluid[:, -1]
        gu[:, 0] = np.where(seam, (p[:, 0] - p[:, -1]) / dxw, 0.0)
        gu[:, nx] = gu[:, 0]
    both = fluid[1:] & fluid[:-1]
    gv[1:ny] = np.where(both, (p[1:] - p[:-1]) / np.diff(yc)[:, None], 0.0)
    return gu, gv


def viscous_operator(state: FlowState, visc: ViscosityField, bc: BoundaryCondition,
                     grid: MacGrid) -> tuple[np.ndarray, np.ndarray]:
    """-div(visc grad u) per unit area on the unknown faces (zero elsewhere),
    with the boundary data of ``bc`` entering through the wall links."""
    state.check(grid)
    top = Topology(grid, visc, bc)
    x = top.pack(state)
    x[top.known_faces] = top.known_vals[top.known_faces]
    diag, wrhs = top.wall_diag_rhs()
    y = top.pair_laplacian @ x + diag * x - wrhs
    out = np.zeros(top.n_faces)
    d = top.dof_faces
    out[d] = y[d] / top.face_area[d]
    return top.unpack(out)


def _deriv(um, u0, up, hm, hp):
    return (hm ** 2 * (up - u0) + hp ** 2 * (u0 - um)) / (hm * hp * (hm + hp))


def advection_term(a: FlowState, u: FlowState, grid: MacGrid,
                   bc: BoundaryCondition | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(a . grad) u on the unknown faces, centred second-order differences."""
    a.check(grid)
    u.check(grid)
    bc = bc or _default_bc(grid)
    ny, nx = grid.mask.shape
    per = grid.periodic_x
    dx, dy = grid.dx, grid.dy
    top = Topology(grid, ViscosityField.uniform(grid, 1.0), bc)
    ukind, vkind = top.ukind, top.vkind
    sv = bc.solid_velocity

    # ---- u component at u faces
    xf = grid.x_faces
    uu = u.u
    if per:
        um_ = np.roll(uu[:, :nx], 1, axis=1)
        up_ = np.roll(uu[:, :nx], -1, axis=1)
        um = np.hstack([um_, um_[:, :1]])
        up = np.hstack([up_, up_[:, :1]])
        hx = np.concatenate([[dx[-1]], dx, [dx[0]]])
        hm, hp = hx[:-1], hx[1:]
    else:
        um = np.hstack([uu[:, :1], uu[:, :-1]])
        up = np.hstack([uu[:, 1:], uu[:, -1:]])
        hm = np.concatenate([[dx[0]], dx])
        hp = np.concatenate([dx, [dx[-1]]])
    dudx = _deriv(um, uu, up, hm[None, :], hp[None, :])

    # y neighbours of u
    trace = u.trace if u.trace is not None else top.bottom_trace(uu[0])
    dyc = dy[:, None] * np.ones((1, nx + 1))
    kup = np.vstack([ukind[1:], np.full((1, nx + 1), SOLID_FACE)])
    kdn = np.vstack([np.full((1, nx + 1), SOLID_FACE), ukind[:-1]])
    u_up = np.vstack([uu[1:], np.zeros((1, nx + 1))])
    u_dn = np.vstack([np.zeros((1, nx + 1)), uu[:-1]])
    h_up = np.vstack([0.5 * (dyc[1:] + dyc[:-1]), 0.5 * dyc[-1:]])
    h_dn = np.vstack([0.5 * dyc[:1], 0.5 * (dyc[1:] + dyc[:-1])])
    wall_up = kup == SOLID_FACE
    wall_dn = kdn == SOLID_FACE
    u_up = np.where(wall_up, sv[0], u_up)
    u_dn = np.where(wall_dn, sv[0], u_dn)
    h_up = np.where(wall_up, 0.5 * dyc, h_up)
    h_dn = np.where(wall_dn, 0.5 * dyc, h_dn)
    u_up[-1] = bc.top.value[0]
    u_dn[0] = trace
    dudy = _deriv(u_dn, uu, u_up, h_dn, h_up)

    vv = a.v
    if per:
        vl = np.roll(vv, 1, axis=1)
        vl = np.hstack([vl, vl[:, :1]])
        vr = np.hstack([vv, vv[:, :1]])
    else:
        vl = np.hstack([vv[:, :1], vv])
        vr = np.hstack([vv, vv[:, -1:]])
    ay_u = 0.25 * (vl[:-1] + vl[1:] + vr[:-1] + vr[1:])
    adv_u = a.u * dudx + ay_u * dudy

    # ---- v component at v faces
    vv_u = u.v
    v_dn = np.vstack([vv_u[:1], vv_u[:-1]])
    v_up = np.vstack([vv_u[1:], vv_u[-1:]])
    hdn = np.concatenate([[dy[0]], dy])[:, None]
    hup = np.concatenate([dy, [dy[-1]]])[:, None]
    dvdy = _deriv(v_dn, vv_u, v_up, hdn, hup)

    dxr = dx[None, :] * np.ones((ny + 1, 1))
    if per:
        v_l = np.roll(vv_u, 1, axis=1); v_r = np.roll(vv_u, -1, axis=1)
        k_l = np.roll(vkind, 1, axis=1); k_r = np.roll(vkind, -1, axis=1)
        h_l = 0.5 * (dxr + np.roll(dxr, 1, axis=1))
        h_r = 0.5 * (dxr + np.roll(dxr, -1, axis=1))
    else:
        v_l = np.hstack([np.zeros((ny + 1, 1)), vv_u[:, :-1]])
        v_r = np.hstack([vv_u[:, 1:], np.zeros((ny + 1, 1))])
        k_l = np.hstack([np.full((ny + 1, 1), SOLID_FACE), vkind[:, :-1]])
        k_r = np.hstack([vkind[:, 1:], np.full((ny + 1, 1), SOLID_FACE)])
        h_l = np.hstack([0.5 * dxr[:, :1], 0.5 * (dxr[:, 1:] + dxr[:, :-1])])
        h_r = np.hstack([0.5 * (dxr[:, 1:] + dxr[:, :-1]), 0.5 * dxr[:, -1:]])
    wl, wr = k_l == SOLID_FACE, k_r == SOLID_FACE
    v_l = np.where(wl, sv[1], v_l); h_l = np.where(wl, 0.5 * dxr, h_l)
    v_r = np.where(wr, sv[1], v_r); h_r = np.where(wr, 0.5 * dxr, h_r)
    if not per:
        v_l[:, 0] = bc.left.value[1]; h_l[:, 0] = 0.5 * dx[0]
        v_r[:, -1] = bc.right.value[1]; h_r[:, -1] = 0.5 * dx[-1]
    dvdx = _deriv(v_l, vv_u, v_r, h_l, h_r)

    ua = a.u
    uc = 0.5 * (ua[:, :-1] + ua[:, 1:])          # u at cell centres
    ax_v = np.zeros((ny + 1, nx))
    ax_v[1:-1] = 0.5 * (uc[1:] + uc[:-1])
    ax_v[0], ax_v[-1] = uc[0], uc[-1]
    adv_v = ax_v * dvdx + vv * dvdy

    out_u = np.where(ukind == DOF, adv_u, 0.0)
    out_v = np.where(vkind == DOF, adv_v, 0.0)
    if per:
        out_u[:, -1] = out_u[:, 0]
    return out_u, out_v


# ---------------------------------------------------------------------------
# energies and quadrature
# ---------------------------------------------------------------------------

def dirichlet_energy(state: FlowState, visc: ViscosityField, grid: MacGrid,
                     bc: BoundaryCondition | None = None) -> float:
    """Midpoint quadrature of  int visc |grad u|^2  over the fluid.

    The bottom wall contributes the half cell between the first row and the
    wall trace (``state.trace``, or the value implied by ``bc``).
    """
    state.check(grid)
    return _energy(Topology(grid, visc, bc or _default_bc(grid)), state)


def link_deltas(top: Topology, state: FlowState) -> tuple[np.ndarray, np.ndarray]:
    """Conductances and velocity jumps of every link, so that the energy is
    ``sum(g * d**2)`` and bilinear forms are ``sum(g * d1 * d2)``."""
    x = top.pack(state)
    x[top.known_faces] = top.known_vals[top.known_faces]
    wv = top.wall_v
    trace = state.trace if state.trace is not None else top.bottom_trace(state.u[0])
    cols = top.bottom_cols
    d = np.concatenate([x[top.pair_a] - x[top.pair_b], x[top.wall_a] - wv,
                        state.u[0, cols] - trace[cols]])
    g = np.concatenate([top.pair_g, top.wall_g, top.bottom_gbulk])
    return g, d


def _energy(top: Topology, state: FlowState) -> float:
    g, d = link_deltas(top, state)
    return float(np.dot(g, d * d))


def boundary_integral(g: np.ndarray, grid: MacGrid) -> float:
    """Quadrature over the wall y = 0.

    ``g`` sampled at the nx cell faces of the wall (midpoint rule) or at the
    nx + 1 u columns (trapezoid weights from the u control volumes).
    """
    g = np.asarray(g, dtype=float)
    if grid.nx < 1:
        raise GridError("empty wall")
    if g.shape == (grid.nx,):
        return float(np.dot(g, grid.dx))
    if g.shape == (grid.nx + 1,):
        return float(np.dot(g, grid.gamma2_weights()))
    raise ConformanceError("boundary field does not conform to the wall")


def l2_weights(grid: MacGrid, region: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Face weights for L2 norms: each face collects half of every adjacent
    cell inside ``region`` (default: the fluid)."""
    region = grid.fluid if region is None else region & grid.fluid
    ny, nx = grid.mask.shape
    half = 0.5 * grid.cell_area * region
    wu = np.zeros((ny, nx + 1))
    wu[:, 1:] += half
    wu[:, :nx] += half
    if grid.periodic_x:
        wu[:, 0] += wu[:, nx]
        wu[:, nx] = 0.0
    wv = np.zeros((ny + 1, nx))
    wv[1:] += half
    wv[:ny] += half
    return wu, wv


def l2_norm(state: FlowState, grid: MacGrid, region: np.ndarray | None = None) -> float:
    wu, wv = l2_weights(grid, region)
    return float(np.sqrt(np.sum(wu * state.u ** 2) + np.sum(wv * state.v ** 2)))


def pressure_l2(p: np.ndarray, grid: MacGrid, region: np.ndarray | None = None) -> float:
    """L2 norm modulo constants over ``region``."""
    region = grid.fluid if region is None else region & grid.fluid
    area = grid.cell_area * region
    mean = np.sum(area * p) / np.sum(area)
    return float(np.sqrt(np.sum(area * (p - mean) ** 2)))


def l2_inner(fu: np.ndarray, fv: np.ndarray, state: FlowState, grid: MacGrid,
             region: np.ndarray | None = None) -> float:
    """int f . u with the face weights of :func:`l2_weights`."""
    wu, wv = l2_weights(grid, region)
    return float(np.sum(wu * fu * state.u) + np.sum(wv * fv * state.v))
