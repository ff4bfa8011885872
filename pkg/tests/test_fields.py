import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from navierwall.fields import (BoundaryCondition, FlowState, Topology, ViscosityField,
                               advection_term, boundary_integral, discrete_divergence,
                               discrete_gradient, dirichlet_energy, l2_inner, navier_slip,
                               no_slip, periodic, viscous_operator)
from navierwall.grid import DomainSpec, build_domain_grid


def faces(grid, fx, fy):
    ux, uy = np.meshgrid(grid.x_faces, grid.yc)
    vx, vy = np.meshgrid(grid.xc, grid.y_faces)
    return FlowState(fx(ux, uy) + 0 * ux, fy(vx, vy) + 0 * vx, np.zeros(grid.mask.shape))


def from_stream(grid, psi):
    """Discretely divergence-free field from nodal stream function values."""
    X, Y = np.meshgrid(grid.x_faces, grid.y_faces)
    P = psi(X, Y)
    u = np.diff(P, axis=0) / grid.dy[:, None]
    v = -np.diff(P, axis=1) / grid.dx[None, :]
    return FlowState(u, v, np.zeros(grid.mask.shape))


def weights_uv(grid):
    top = Topology(grid, ViscosityField.uniform(grid, 1.0), BoundaryCondition())
    return top.unpack(top.face_area)


# divergence ---------------------------------------------------------------

def test_divergence_of_constant_and_linear(box16):
    assert np.max(np.abs(discrete_divergence(faces(box16, lambda x, y: 1.0, lambda x, y: 0.0),
                                             box16))) == 0.0
    g = build_domain_grid(DomainSpec(1.0), 16, 16, 3.0)
    lin = faces(g, lambda x, y: x, lambda x, y: -y)
    assert np.max(np.abs(discrete_divergence(lin, g))) <= 1e-12


def test_divergence_of_quadratic():
    errs = []
    for n in (16, 32):
        g = build_domain_grid(DomainSpec(1.0), n, n)
        d = discrete_divergence(faces(g, lambda x, y: x ** 2, lambda x, y: 0.0), g)
        errs.append(np.max(np.abs(d - 2 * g.xc[None, :])))
    assert errs[1] <= max(errs[0] / 3.5, 1e-12)


# gradient -----------------------------------------------------------------

def test_gradient_of_constant_and_linear(box16):
    gu, gv = discrete_gradient(np.full(box16.mask.shape, 3.0), box16)
    assert np.all(gu == 0) and np.all(gv == 0)
    p = np.broadcast_to(box16.xc[None, :], box16.mask.shape).copy()
    gu, gv = discrete_gradient(p, box16)
    assert np.allclose(gu[:, 1:-1], 1.0, atol=1e-12) and np.all(gv == 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), grading=st.floats(1.0, 4.0), periodic_x=st.booleans())
def test_gradient_divergence_duality(seed, grading, periodic_x):
    rng = np.random.default_rng(seed)
    g = build_domain_grid(DomainSpec(1.0, None, periodic_x), 12, 10, grading)
    p = rng.standard_normal(g.mask.shape)
    u = rng.standard_normal((g.ny, g.nx + 1))
    v = rng.standard_normal((g.ny + 1, g.nx))
    v[0] = v[-1] = 0.0
    if periodic_x:
        u[:, -1] = u[:, 0]
    else:
        u[:, 0] = u[:, -1] = 0.0
    s = FlowState(u, v, p)
    gu, gv = discrete_gradient(p, g)
    wu = g.dy[:, None] * g.u_width[None, :]
    if periodic_x:
        wu[:, -1] = 0.0
    wv = g.dx[None, :] * g.v_height[:, None]
    lhs = np.sum(wu * gu * u) + np.sum(wv * gv * v)
    rhs = np.sum(g.cell_area * p * discrete_divergence(s, g))
    assert abs(lhs + rhs) <= 1e-12 * (1 + np.sum(np.abs(wu * gu * u)))


# viscous operator ---------------------------------------------------------

def test_viscous_operator_linear_is_zero():
    g = build_domain_grid(DomainSpec(1.0, None, True), 16, 16)
    bc = BoundaryCondition(no_slip((0.0, 0.0)), no_slip((1.0, 0.0)), periodic(), periodic())
    s = faces(g, lambda x, y: y, lambda x, y: 0.0)
    au, av = viscous_operator(s, ViscosityField.uniform(g, 1.0), bc, g)
    assert np.max(np.abs(au)) <= 1e-10 and np.max(np.abs(av)) <= 1e-10


def test_viscous_operator_sine_oracle():
    errs = []
    for n in (16, 32, 64):
        g = build_domain_grid(DomainSpec(1.0), n, n)
        f = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
        s = faces(g, f, lambda x, y: 0.0)
        au, _ = viscous_operator(s, ViscosityField.uniform(g, 1.0), BoundaryCondition(), g)
        inner = (slice(1, -1), slice(1, -1))
        errs.append(np.max(np.abs(au[inner] - 2 * np.pi ** 2 * s.u[inner])))
    assert errs[1] < errs[0] and errs[2] < errs[1]
    assert np.log2(errs[1] / errs[2]) > 1.0


def test_viscous_operator_symmetric_and_spd():
    rng = np.random.default_rng(0)
    g = build_domain_grid(DomainSpec(1.0), 8, 8, 2.0)
    visc = ViscosityField(rng.uniform(0.1, 3.0, g.mask.shape))
    top = Topology(g, visc, BoundaryCondition())
    A, _ = top.velocity_system()
    A = A.toarray()
    assert np.max(np.abs(A - A.T)) <= 1e-12 * np.max(np.abs(A))
    assert np.linalg.eigvalsh(A).min() > 0

    wu, wv = weights_uv(g)

    def rand():
        s = FlowState(rng.standard_normal((g.ny, g.nx + 1)), rng.standard_normal((g.ny + 1, g.nx)),
                      np.zeros(g.mask.shape))
        s.u[:, 0] = s.u[:, -1] = 0.0
        s.v[0] = s.v[-1] = 0.0
        return s

    a, b = rand(), rand()
    Aa = viscous_operator(a, visc, BoundaryCondition(), g)
    Ab = viscous_operator(b, visc, BoundaryCondition(), g)
    lhs = np.sum(wu * Aa[0] * b.u) + np.sum(wv * Aa[1] * b.v)
    rhs = np.sum(wu * Ab[0] * a.u) + np.sum(wv * Ab[1] * a.v)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_viscous_operator_is_local(box16):
    visc = ViscosityField.uniform(box16, 1.0)
    s = FlowState.zeros(box16)
    base = viscous_operator(s, visc, BoundaryCondition(), box16)
    s.u[8, 8] = 1.0
    au, av = viscous_operator(s, visc, BoundaryCondition(), box16)
    changed = np.argwhere(au != base[0])
    assert np.all(np.abs(changed - [8, 8]).max(axis=1) <= 1)
    assert np.all(av == base[1])


# advection ----------------------------------------------------------------

def test_advection_zero_and_linear(box16):
    zero = FlowState.zeros(box16)
    u = faces(box16, lambda x, y: x, lambda x, y: 0.0)
    au, av = advection_term(zero, u, box16)
    assert np.all(au == 0) and np.all(av == 0)
    a = faces(box16, lambda x, y: 1.0, lambda x, y: 0.0)
    au, av = advection_term(a, u, box16)
    assert np.allclose(au[1:-1, 1:-1], 1.0, atol=1e-12)
    assert np.allclose(av[1:-1, 1:-1], 0.0, atol=1e-12)


def test_advection_near_skew_symmetric():
    psi = lambda x, y: (np.sin(np.pi * x) * np.sin(np.pi * y)) ** 2
    vals = []
    for n in (32, 64):
        g = build_domain_grid(DomainSpec(1.0), n, n)
        a = from_stream(g, psi)
        assert np.max(np.abs(discrete_divergence(a, g))) <= 1e-10
        au, av = advection_term(a, a, g)
        vals.append(abs(l2_inner(au, av, a, g)) / l2_inner(a.u, a.v, a, g))
    assert vals[1] <= 10 * (1 / 64) ** 2
    assert vals[1] <= vals[0]


# energies -----------------------------------------------------------------

def test_dirichlet_energy_oracles():
    g = build_domain_grid(DomainSpec(1.0, None, True), 16, 16)
    bc = BoundaryCondition(no_slip(), no_slip((1.0, 0.0)), periodic(), periodic())
    assert dirichlet_energy(FlowState.zeros(g), ViscosityField.uniform(g, 1.0), g,
                            BoundaryCondition.walls(True)) == 0.0
    s = faces(g, lambda x, y: y, lambda x, y: 0.0)
    e1 = dirichlet_energy(s, ViscosityField.uniform(g, 1.0), g, bc)
    e2 = dirichlet_energy(s, ViscosityField.uniform(g, 2.0), g, bc)
    assert e1 == pytest.approx(1.0, abs=1e-3)
    assert e2 == 2 * e1


def test_slip_trace_is_series_conductance():
    g = build_domain_grid(DomainSpec(1.0, None, True), 16, 16)
    bc = BoundaryCondition.walls(True, navier_slip(2.0))
    top = Topology(g, ViscosityField.uniform(g, 1.0), bc)
    u0 = np.full(g.nx + 1, 1.0)
    gb = 2 * 1.0 / g.dy[0]
    assert np.allclose(top.bottom_trace(u0), gb / (gb + 2.0))


def test_boundary_integral(box16):
    assert boundary_integral(np.ones(16), box16) == pytest.approx(1.0, abs=1e-15)
    g = build_domain_grid(DomainSpec(2.5), 16, 16)
    assert boundary_integral(np.full(17, 3.0), g) == pytest.approx(7.5, abs=1e-13)
    assert boundary_integral(box16.xc, box16) == pytest.approx(0.5, abs=1e-12)
