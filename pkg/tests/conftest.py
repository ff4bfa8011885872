import numpy as np
import pytest

from navierwall.fields import discrete_divergence, l2_norm
from navierwall.grid import DomainSpec, build_domain_grid


def assert_div_free(state, grid, rel=1e-8):
    div = np.max(np.abs(discrete_divergence(state, grid)))
    assert div <= rel * (1.0 + l2_norm(state, grid)), div


@pytest.fixture
def box16():
    return build_domain_grid(DomainSpec(1.0), 16, 16)


@pytest.fixture
def channel32():
    return build_domain_grid(DomainSpec(1.0, None, True), 16, 32)
