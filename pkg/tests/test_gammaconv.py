import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from navierwall.gammaconv import RateError, SweepSetup, estimate_rate, run_sweep
from navierwall.grid import Resolution
from navierwall.walllaw import WallLawSpec

F2D = (lambda x, y: 1 + 0.5 * np.cos(2 * np.pi * x), lambda x, y: np.sin(2 * np.pi * x) * y)
EPS = [0.2, 0.1, 0.05]


def flat_setup(n=16, f=F2D, **kw):
    return SweepSetup(h=1.0, f=f, spec=WallLawSpec.over_h(1.0, 1.0), res=Resolution(n, n), **kw)


def test_estimate_rate_exact():
    a, c, r = estimate_rate(([0.4, 0.2, 0.1], [0.4, 0.2, 0.1]))
    assert a == pytest.approx(1.0, abs=1e-12) and c == pytest.approx(1.0) and r <= 1e-12
    a, _, _ = estimate_rate(([0.4, 0.2, 0.1], [0.16, 0.04, 0.01]))
    assert a == pytest.approx(2.0, abs=1e-12)


def test_estimate_rate_errors():
    with pytest.raises(RateError):
        estimate_rate(([0.2, 0.1], [1.0, 0.5]))
    with pytest.raises(RateError):
        estimate_rate(([0.2, 0.1, 0.05], [0.0, 0.0, 0.0]))
    with pytest.raises(RateError):
        estimate_rate(([0.2, 0.1, 0.05], [1.0, math.nan, 0.1]))


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.2, 3.0), c=st.floats(0.01, 100.0))
def test_estimate_rate_recovers_power_law(alpha, c):
    eps = np.array([0.3, 0.15, 0.07, 0.03])
    a, cc, r = estimate_rate((eps, c * eps ** alpha))
    assert a == pytest.approx(alpha, rel=1e-9) and cc == pytest.approx(c, rel=1e-8)


def test_zero_force_sweep():
    rep = run_sweep(EPS, flat_setup(f=(0.0, 0.0)))
    assert all(e == 0 for e in rep.errors)
    assert math.isnan(rep.rate) and "undefined" in rep.rate_note
    assert rep.bounds.passed


def test_flat_sweep_converges():
    rep = run_sweep(EPS, flat_setup())
    errs = rep.errors
    assert all(b < a for a, b in zip(errs, errs[1:]))
    gaps = rep.energy_gaps()
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert rep.rate > 0 and rep.fit_residual < 0.2
    assert rep.bounds.passed
    assert rep.status == 0


def test_sweep_is_reproducible():
    a = run_sweep(EPS, flat_setup())
    b = run_sweep(EPS, flat_setup())
    c = run_sweep(EPS, flat_setup(), jobs=3)
    assert a.rows == b.rows == c.rows
    assert a.g0 == b.g0 == c.g0


def test_refinement_does_not_inflate_errors():
    coarse = run_sweep(EPS, flat_setup(16))
    fine = run_sweep(EPS, flat_setup(32))
    for a, b in zip(coarse.errors, fine.errors):
        assert b <= 1.05 * a


def test_under_resolved_member_is_rejected():
    n = 16
    setup = SweepSetup(h=lambda y: np.cos(np.pi * y) ** 2, kind="periodic", f=F2D,
                       spec=WallLawSpec.zero(), res=Resolution(n, n))
    rep = run_sweep([0.25, 0.125, 1.0 / n], setup)
    assert rep.rows[-1].failure.startswith("rejected")
    assert math.isnan(rep.rows[-1].l2_err_u)
    assert rep.status == 1


def test_sweep_validation():
    with pytest.raises(ValueError):
        run_sweep([0.1, 0.2, 0.05], flat_setup())
    with pytest.raises(ValueError):
        run_sweep([0.2, 0.1], flat_setup())
    with pytest.raises(ValueError):
        run_sweep([0.2, 0.1, -0.1], flat_setup())
