import numpy as np
import pytest

import gpeps as gp
from gpeps.lattice import BoundaryTwist


@pytest.fixture(scope="session")
def lat22():
    return gp.TorusLattice.build(2, 2)


@pytest.fixture(scope="session")
def z2():
    group = gp.build_group("Z2")
    rep = gp.regular_rep(group)
    tensor = gp.build_site_tensor(rep)
    return group, rep, tensor


@pytest.fixture(scope="session")
def z3():
    group = gp.build_group("Z3")
    rep = gp.regular_rep(group)
    tensor = gp.build_site_tensor(rep)
    return group, rep, tensor


@pytest.fixture(scope="session")
def z2_twisted(z2, lat22):
    group, rep, tensor = z2
    return {
        (g, h): gp.contract_isometric_state(lat22, rep, BoundaryTwist(g, h), tensor=tensor)
        for (g, h) in group.commuting_pairs()
    }


@pytest.fixture(scope="session")
def z3_twisted(z3, lat22):
    group, rep, tensor = z3
    return {
        (g, h): gp.contract_isometric_state(lat22, rep, BoundaryTwist(g, h), tensor=tensor)
        for (g, h) in group.commuting_pairs()
    }


def stack_columns(states):
    """(dim, m) column stack of normalized state amplitudes."""
    return np.array([s.amplitudes for s in states]).T
