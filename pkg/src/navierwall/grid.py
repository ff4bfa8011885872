"""Staggered (MAC) grids for the fluid domain, the thin layer below it and the
periodic cell domain.

Layout, with ``ny`` rows and ``nx`` columns of pressure cells::

    p[j, i]  cell centres        (xc[i],      yc[j])        shape (ny, nx)
    u[j, i]  vertical faces      (x_faces[i], yc[j])        shape (ny, nx + 1)
    v[j, i]  horizontal faces    (xc[i],      y_faces[j])   shape (ny + 1, nx)

Row 0 is the bottom of the grid.  The wall Gamma_2 is the line y = 0 and the
outward normal of the fluid domain there is (0, -1).  For x-periodic grids the
last u column duplicates the first one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

SOLID = 0
FLUID_OMEGA = 1
FLUID_LAYER = 2

MIN_LAYER_ROWS = 8


class GridError(ValueError):
    """Invalid grid parameters."""


class ResolutionError(GridError):
    """The thin layer is not resolved by enough cell rows."""


class DegenerateLayerError(GridError):
    """The thin layer (or cell domain) is empty at the grid resolution."""


Profile = Callable[[np.ndarray], np.ndarray]


def _sample(h: Profile | float, x: np.ndarray) -> np.ndarray:
    if callable(h):
        out = np.asarray(h(x), dtype=float)
        return np.broadcast_to(out, np.shape(x)).astype(float)
    return np.full(np.shape(x), float(h))


@dataclass(frozen=True)
class LayerProfile:
    """Depth profile of the thin layer, depth(x) = eps * h_eps(x).

    ``kind="periodic"``: ``h`` lives on the unit cell Y = (-1/2, 1/2) and
    h_eps(x) = h(x / eps) repeated periodically.  ``kind="fixed"``: ``h`` is a
    function of x on the wall itself.
    """

    kind: str
    h: Profile | float
    eps: float
    lipschitz_bound: float = float("inf")
    n_samples: int = 513

    def __post_init__(self):
        if self.kind not in ("periodic", "fixed"):
            raise GridError(f"unknown layer kind {self.kind!r}")
        if not self.eps > 0:
            raise GridError("layer scale eps must be positive")
        lo = -0.5 if self.kind == "periodic" else 0.0
        s = _sample(self.h, np.linspace(lo, lo + 1.0, self.n_samples))
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise GridError("layer profile must be finite and nonnegative")
        if self.kind == "periodic" and (abs(s[0]) > 1e-12 or abs(s[-1]) > 1e-12):
            raise GridError("periodic profile must vanish at the cell ends y = +-1/2")
        if self.kind == "fixed" and not np.all(s > 0):
            raise GridError("fixed profile must be strictly positive")

    def h_eps(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "periodic":
            y = np.mod(x / self.eps + 0.5, 1.0) - 0.5
            return _sample(self.h, y)
        return _sample(self.h, x)

    def depth(self, x: np.ndarray) -> np.ndarray:
        return self.eps * self.h_eps(x)

    def max_depth(self, lx: float) -> float:
        if self.kind == "periodic":
            xs = np.linspace(-0.5, 0.5, self.n_samples)
        else:
            xs = np.linspace(0.0, lx, self.n_samples)
        return float(self.eps * np.max(_sample(self.h, xs)))


@dataclass(frozen=True)
class DomainSpec:
    """Rectangle (0, lx) x (0, 1) with Gamma_2 the bottom edge.

    With ``periodic_x`` the lateral edges are identified and Gamma_1 is the top
    edge only.
    """

    lx: float = 1.0
    layer: LayerProfile | None = None
    periodic_x: bool = False

    def __post_init__(self):
        if not self.lx > 0:
            raise GridError("lx must be positive")

    @property
    def gamma1(self) -> frozenset:
        return frozenset({"top"} if self.periodic_x else {"top", "left", "right"})

    @property
    def gamma2(self) -> frozenset:
        return frozenset({"bottom"})


@dataclass(frozen=True)
class MacGrid:
    x_faces: np.ndarray
    y_faces: np.ndarray
    mask: np.ndarray
    periodic_x: bool = False
    bc_tags: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("x_faces", "y_faces", "mask"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.x_faces) <= 0) or np.any(np.diff(self.y_faces) <= 0):
            raise GridError("face coordinates must be strictly increasing")
        if self.mask.shape != (self.ny, self.nx):
            raise GridError("mask shape does not match the face arrays")

    @property
    def nx(self) -> int:
        return len(self.x_faces) - 1

    @property
    def ny(self) -> int:
        return len(self.y_faces) - 1

    @property
    def lx(self) -> float:
        return float(self.x_faces[-1] - self.x_faces[0])

    @property
    def dx(self) -> np.ndarray:
        return np.diff(self.x_faces)

    @property
    def dy(self) -> np.ndarray:
        return np.diff(self.y_faces)

    @property
    def xc(self) -> np.ndarray:
        return 0.5 * (self.x_faces[1:] + self.x_faces[:-1])

    @property
    def yc(self) -> np.ndarray:
        return 0.5 * (self.y_faces[1:] + self.y_faces[:-1])

    @property
    def fluid(self) -> np.ndarray:
        return self.mask != SOLID

    @property
    def cell_area(self) -> np.ndarray:
        return np.outer(self.dy, self.dx)

    @property
    def u_width(self) -> np.ndarray:
        """Control-volume width of each u column (distance between the cell
        centres on either side; half cells at non-periodic edges)."""
        xc, dx = self.xc, self.dx
        w = np.empty(self.nx + 1)
        w[1:-1] = np.diff(xc)
        if self.periodic_x:
            w[0] = w[-1] = 0.5 * (dx[0] + dx[-1])
        else:
            w[0], w[-1] = 0.5 * dx[0], 0.5 * dx[-1]
        return w

    @property
    def v_height(self) -> np.ndarray:
        dy = self.dy
        hgt = np.empty(self.ny + 1)
        hgt[1:-1] = 0.5 * (dy[1:] + dy[:-1])
        hgt[0], hgt[-1] = 0.5 * dy[0], 0.5 * dy[-1]
        return hgt

    def wall_row(self) -> int:
        """Index j of the horizontal face line y = 0."""
        j = int(np.argmin(np.abs(self.y_faces)))
        if abs(self.y_faces[j]) > 1e-12 * max(1.0, abs(self.y_faces[-1])):
            raise GridError("grid has no face line at y = 0")
        return j

    def gamma2_weights(self) -> np.ndarray:
        """Quadrature weights for tangential traces at the u columns on the
        wall (length nx + 1; the duplicated periodic column gets weight 0)."""
        w = self.u_width.copy()
        if self.periodic_x:
            w[-1] = 0.0
        return w

    def with_mask(self, mask: np.ndarray, **tags) -> "MacGrid":
        return replace(self, mask=mask, bc_tags={**self.bc_tags, **tags})


@dataclass(frozen=True)
class Resolution:
    """Cell counts and grading shared by the limit and thin-layer grids."""

    nx: int = 64
    ny: int = 64
    grading: float = 1.0
    layer_rows: int = MIN_LAYER_ROWS

    def __post_init__(self):
        _check_counts(self.nx, self.ny)
        if not 1.0 <= self.grading <= 10.0:
            raise GridError("grading must lie in [1, 10]")
        if self.layer_rows < MIN_LAYER_ROWS:
            raise ResolutionError(f"need at least {MIN_LAYER_ROWS} layer rows")


def _check_counts(nx: int, ny: int) -> None:
    if int(nx) != nx or int(ny) != ny or nx < 8 or ny < 8:
        raise GridError(f"cell counts must be integers >= 8, got nx={nx}, ny={ny}")


def graded_rows(ny: int, height: float, grading: float) -> np.ndarray:
    """Row heights growing geometrically from the bottom; the top/bottom
    height ratio equals ``grading`` and the heights sum to ``height``."""
    if not 1.0 <= grading <= 10.0:
        raise GridError("grading must lie in [1, 10]")
    if grading == 1.0:
        return np.full(ny, height / ny)
    q = grading ** (1.0 / (ny - 1))
    rows = q ** np.arange(ny)
    return height * rows / rows.sum()


def _faces_from_widths(start: float, widths: np.ndarray, stop: float) -> np.ndarray:
    faces = start + np.concatenate([[0.0], np.cumsum(widths)])
    faces[-1] = stop
    return faces


def build_domain_grid(spec: DomainSpec, nx: int, ny: int, grading: float = 1.0,
                      layer_rows: int = MIN_LAYER_ROWS) -> MacGrid:
    """Grid on (0, lx) x (0, 1), rows graded toward the wall.

    When ``spec.layer`` is set, ``layer_rows`` uniform rows are added below
    y = 0 down to the maximal layer depth; they start out solid and are
    opened by :func:`rasterize_layer`.
    """
    _check_counts(nx, ny)
    x_faces = np.linspace(0.0, spec.lx, nx + 1)
    y_faces = _faces_from_widths(0.0, graded_rows(ny, 1.0, grading), 1.0)
    mask = np.full((ny, nx), FLUID_OMEGA, dtype=np.int8)
    if spec.layer is not None:
        if layer_rows < MIN_LAYER_ROWS:
            raise ResolutionError(f"need at least {MIN_LAYER_ROWS} layer rows")
        depth = spec.layer.max_depth(spec.lx)
        if depth <= 0:
            raise DegenerateLayerError("layer has zero depth")
        below = np.linspace(-depth, 0.0, layer_rows + 1)[:-1]
        y_faces = np.concatenate([below, y_faces])
        mask = np.vstack([np.full((layer_rows, nx), SOLID, dtype=np.int8), mask])
    tags = {"top": "dirichlet", "bottom": "dirichlet",
            "left": "periodic" if spec.periodic_x else "dirichlet",
            "right": "periodic" if spec.periodic_x else "dirichlet"}
    return MacGrid(x_faces, y_faces, mask, spec.periodic_x, tags)


def rasterize_layer(profile: LayerProfile, grid: MacGrid) -> MacGrid:
    """Open the cells whose centres lie in {-eps h_eps(x) < y < 0}."""
    yc, xc = grid.yc, grid.xc
    below = yc < 0
    depth = profile.depth(xc)
    dmax = float(depth.max())
    if dmax < grid.dy.min():
        raise DegenerateLayerError("layer depth is below the grid spacing")
    if grid.y_faces[0] > -dmax * (1 - 1e-12):
        raise GridError("grid does not extend below y = 0 by the layer depth")
    rows_across = np.count_nonzero(below & (yc > -dmax))
    if rows_across < MIN_LAYER_ROWS:
        raise ResolutionError(
            f"layer is resolved by {rows_across} rows, need {MIN_LAYER_ROWS}")
    mask = np.array(grid.mask)
    inside = below[:, None] & (yc[:, None] > -depth[None, :])
    mask[below, :] = SOLID
    mask[inside] = FLUID_LAYER
    return grid.with_mask(mask, bottom="dirichlet", layer="dirichlet")


def build_cell_domain(h: Profile | float, nx: int, ny: int) -> MacGrid:
    """Grid on Y x (-max h, 0), Y = (-1/2, 1/2) periodic, with the stair-step
    mask of Z_h = {-h(y1) < y3 < 0}."""
    _check_counts(nx, ny)
    x_faces = np.linspace(-0.5, 0.5, nx + 1)
    xc = 0.5 * (x_faces[1:] + x_faces[:-1])
    hs = _sample(h, xc)
    fine = _sample(h, np.linspace(-0.5, 0.5, 1025))
    if np.any(fine < 0):
        raise GridError("cell profile must be nonnegative")
    hmax = float(fine.max())
    if hmax <= 0:
        raise DegenerateLayerError("cell profile vanishes identically")
    flat = np.ptp(fine) <= 1e-12 * hmax
    if not flat and (abs(fine[0]) > 1e-12 or abs(fine[-1]) > 1e-12):
        raise GridError("non-flat cell profile must vanish at y1 = +-1/2")
    y_faces = np.linspace(-hmax, 0.0, ny + 1)
    yc = 0.5 * (y_faces[1:] + y_faces[:-1])
    mask = np.where(yc[:, None] > -hs[None, :], FLUID_LAYER, SOLID).astype(np.int8)
    if not mask.any():
        raise DegenerateLayerError("cell domain is empty at this resolution")
    tags = {"top": "dirichlet-zero", "bottom": "dirichlet", "left": "periodic",
            "right": "periodic"}
    return MacGrid(x_faces, y_faces, mask, True, tags)


def fluid_is_connected(grid: MacGrid) -> bool:
    """Edge-connectivity of the fluid cells (lateral wrap for periodic grids)."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    ny, nx = grid.mask.shape
    idx = np.arange(ny * nx).reshape(ny, nx)
    fluid = grid.fluid
    right = np.roll(idx, -1, axis=1) if grid.periodic_x else idx[:, 1:]
    left_ok = fluid & np.roll(fluid, -1, axis=1) if grid.periodic_x else fluid[:, :-1] & fluid[:, 1:]
    src = [idx[:, :right.shape[1]][left_ok], idx[:-1][fluid[:-1] & fluid[1:]]]
    dst = [right[left_ok], idx[1:][fluid[:-1] & fluid[1:]]]
    src, dst = np.concatenate(src), np.concatenate(dst)
    graph = coo_matrix((np.ones(src.size), (src, dst)), shape=(ny * nx, ny * nx))
    _, labels = connected_components(graph, directed=False)
    return np.unique(labels[fluid.ravel()]).size <= 1
