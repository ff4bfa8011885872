import numpy as np
import pytest

from conftest import assert_div_free
from navierwall.fields import FlowState, ViscosityField, dirichlet_energy, l2_norm
from navierwall.grid import DomainSpec, LayerProfile, Resolution
from navierwall.thinlayer import (BoundsRecord, ThinLayerProblem, bounds_record,
                                  check_a_priori_bounds, layer_bc, layer_grid, layer_mask,
                                  omega_mask, phi_eps_energy, restrict_to_omega,
                                  solve_thin_layer)

RES = Resolution(16, 16, 1.0, 8)


def problem(eps, f=(1.0, 0.0), h=1.0, kind="fixed", periodic=True):
    return ThinLayerProblem(DomainSpec(1.0, LayerProfile(kind, h, eps), periodic), 1.0, f)


def solve(prob, res=RES):
    grid = layer_grid(prob, res)
    st, _ = solve_thin_layer(prob, res, None, grid)
    assert_div_free(st, grid)
    return st, grid


def test_zero_force():
    st, grid = solve(problem(0.1, (0.0, 0.0)))
    assert np.all(st.u == 0) and np.all(st.v == 0)


def test_flat_layer_slips():
    st, grid = solve(problem(0.1))
    j = grid.wall_row()
    trace = 0.5 * (st.u[j - 1] + st.u[j])
    assert np.all(trace > 0)
    assert l2_norm(st, grid) > 0
    # the layer profile decays toward the no-slip floor at y = -0.1
    col = st.u[:j, 3]
    assert np.all(np.diff(col) > 0) and col[0] < trace[3] / 4
    assert abs(np.sum(st.p * grid.cell_area * grid.fluid)) <= 1e-12


def test_interface_is_shared():
    f = (lambda x, y: 1 + 0.5 * np.cos(2 * np.pi * x), lambda x, y: np.sin(2 * np.pi * x))
    prob = problem(0.1, f, h=lambda x: 1 + 0.4 * np.sin(2 * np.pi * x))
    st, grid = solve(prob, Resolution(16, 16, 1.0, 12))
    # one v unknown per interface face: the interface is permeable, not a wall
    assert np.max(np.abs(st.v[grid.wall_row()])) > 1e-6


def test_energy_bounded_when_eps_halves():
    phis = []
    for eps in (0.2, 0.1):
        prob = problem(eps)
        st, grid = solve(prob)
        phis.append(phi_eps_energy(st, prob, grid))
    assert max(phis) / min(phis) < 10


def test_phi_zero_and_region_splits():
    prob = problem(0.1)
    grid = layer_grid(prob, RES)
    zero = FlowState.zeros(grid)
    assert phi_eps_energy(zero, prob, grid) == 0.0
    rng = np.random.default_rng(0)
    j = grid.wall_row()

    om = FlowState.zeros(grid)
    om.u[j + 2:-2, :] = rng.standard_normal(om.u[j + 2:-2].shape)
    om.u[:, -1] = om.u[:, 0]
    plain = dirichlet_energy(om, ViscosityField.uniform(grid, 1.0), grid, layer_bc(grid))
    assert phi_eps_energy(om, prob, grid) == pytest.approx(plain, rel=1e-14)

    lay = FlowState.zeros(grid)
    lay.u[2:j - 2, :] = rng.standard_normal(lay.u[2:j - 2].shape)
    lay.u[:, -1] = lay.u[:, 0]
    other = problem(0.05)
    e1 = phi_eps_energy(lay, prob, grid)
    e2 = phi_eps_energy(lay, other, grid)
    assert e1 == pytest.approx(0.1 * plain_energy(lay, grid), rel=1e-13)
    assert e1 / e2 == pytest.approx(2.0, rel=1e-13)


def plain_energy(state, grid):
    return dirichlet_energy(state, ViscosityField.uniform(grid, 1.0), grid, layer_bc(grid))


def test_restriction_and_masks():
    prob = problem(0.1)
    st, grid = solve(prob)
    om = restrict_to_omega(st, grid)
    assert om.u.shape == (16, 17) and om.v.shape == (17, 16)
    assert np.count_nonzero(omega_mask(grid)) == 256
    assert np.count_nonzero(layer_mask(grid)) == 16 * 8


def test_bounds_need_a_sweep():
    with pytest.raises(ValueError):
        check_a_priori_bounds([BoundsRecord(0.1, 1.0, 1.0, 1.0)])


def test_bounds_zero_sweep_passes():
    recs = []
    for eps in (0.2, 0.1):
        prob = problem(eps, (0.0, 0.0))
        st, grid = solve(prob)
        recs.append(bounds_record(st, prob, grid))
    rep = check_a_priori_bounds(recs)
    assert rep.passed and all(r == 1.0 for r in rep.ratios.values())
    assert rep.phi == [0.0, 0.0]


def test_bounds_flat_sweep():
    recs = []
    for eps in (0.2, 0.1, 0.05):
        prob = problem(eps, (lambda x, y: 1 + 0.5 * np.cos(2 * np.pi * x),
                             lambda x, y: np.sin(2 * np.pi * x) * y))
        st, grid = solve(prob, Resolution(16, 16, 1.0, 8))
        recs.append(bounds_record(st, prob, grid))
    rep = check_a_priori_bounds(recs[::-1])
    assert rep.eps == [0.2, 0.1, 0.05]
    assert rep.passed and all(r < 10 for r in rep.ratios.values())


def test_problem_validation():
    with pytest.raises(ValueError):
        ThinLayerProblem(DomainSpec(1.0), 1.0)
    with pytest.raises(ValueError):
        problem(0.1).__class__(DomainSpec(1.0, LayerProfile("fixed", 1.0, 0.1)), -1.0)
    with pytest.raises(ValueError):
        ThinLayerProblem(DomainSpec(1.0, LayerProfile("fixed", 1.0, 0.1)), 1.0, (1, 0), "euler")


def test_navier_stokes_mode():
    prob = ThinLayerProblem(DomainSpec(1.0, LayerProfile("fixed", 1.0, 0.1), True), 1.0,
                            (lambda x, y: 1 + 0.5 * np.cos(2 * np.pi * x), lambda x, y: 0 * x),
                            "navier_stokes")
    st, grid = solve(prob)
    assert l2_norm(st, grid) > 0
