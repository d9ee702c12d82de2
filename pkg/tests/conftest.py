import numpy as np
import pytest

from dualis import ModelSpec, build_lattice
from dualis.rng import stream


@pytest.fixture
def rng():
    return stream(20260808, "tests", 0)


def make_ising(dims, periodic, J, H):
    topo = build_lattice(dims, periodic)
    J = np.full(topo.n_bonds, J) if np.isscalar(J) else np.asarray(J)
    H = np.full(topo.n_sites, H) if np.isscalar(H) else np.asarray(H)
    return ModelSpec(family="ising", q=2, topo=topo, J=J, H=H)


def make_potts(dims, periodic, q, J, H):
    topo = build_lattice(dims, periodic)
    J = np.full(topo.n_bonds, J) if np.isscalar(J) else np.asarray(J)
    H = np.full(topo.n_sites, H) if np.isscalar(H) else np.asarray(H)
    return ModelSpec(family="potts", q=q, topo=topo, J=J, H=H)
