"""Lattice topology: bond counts, orientation, incidence consistency."""

import itertools

import numpy as np
import pytest

from dualis import bond_endpoints, build_lattice, incident_bonds
from dualis.lattice import coords_to_site, site_to_coords


def brute_force_neighbor_pairs(dims, periodic):
    """Independent bond enumeration from coordinate arithmetic.

    Returns a sorted multiset of unordered site pairs, one entry per bond
    (so extent-2 periodic dimensions contribute the pair twice).
    """
    ranges = [range(d) for d in dims]
    pairs = []
    for coords in itertools.product(*ranges):
        for axis, (extent, wrap) in enumerate(zip(dims, periodic)):
            nxt = list(coords)
            if coords[axis] + 1 < extent:
                nxt[axis] += 1
            elif wrap and extent >= 2:
                nxt[axis] = 0
            else:
                continue
            a = int(np.ravel_multi_index(coords, dims))
            b = int(np.ravel_multi_index(nxt, dims))
            pairs.append(tuple(sorted((a, b))))
    return sorted(pairs)


def test_bond_counts_from_spec_examples():
    assert build_lattice([3, 3], [True, True]).n_bonds == 18
    assert build_lattice([3, 3], [True, True]).n_sites == 9
    assert build_lattice([2, 3], [False, False]).n_bonds == 7
    topo = build_lattice([10, 10, 10], [True, True, True])
    assert topo.n_sites == 1000
    assert topo.n_bonds == 3000


@pytest.mark.parametrize(
    "dims,periodic",
    [
        ([5], [True]),
        ([5], [False]),
        ([2], [True]),
        ([4, 3], [True, False]),
        ([2, 2], [True, True]),
        ([3, 4, 2], [False, True, True]),
        ([4, 4, 4], [True, True, True]),
    ],
)
def test_bonds_match_brute_force_enumeration(dims, periodic):
    topo = build_lattice(dims, periodic)
    got = sorted(tuple(sorted(b)) for b in topo.bonds.tolist())
    assert got == brute_force_neighbor_pairs(dims, periodic)


def test_open_grid_contributes_partial_bonds():
    # An open dimension of extent L contributes N*(L-1)/L bonds.
    topo = build_lattice([4, 5], [False, False])
    assert topo.n_bonds == 20 // 4 * 3 + 20 // 5 * 4


def test_degrees():
    torus = build_lattice([3, 3], [True, True])
    assert all(len(incident_bonds(torus, s)) == 4 for s in range(9))
    cube = build_lattice([10, 10, 10], [True, True, True])
    assert all(len(incident_bonds(cube, s)) == 6 for s in range(0, 1000, 97))
    open_grid = build_lattice([2, 3], [False, False])
    corner = coords_to_site(open_grid, (0, 0))
    assert len(incident_bonds(open_grid, corner)) == 2
    # Handshake: total degree is twice the bond count.
    for topo in (torus, cube, open_grid):
        assert topo.degrees.sum() == 2 * topo.n_bonds


def test_orientation_tail_is_smaller_index_within_row():
    topo = build_lattice([3, 3], [True, True])
    for k in range(topo.n_bonds):
        tail, head = bond_endpoints(topo, k)
        tc, hc = site_to_coords(topo, tail), site_to_coords(topo, head)
        axis = next(i for i in range(2) if tc[i] != hc[i])
        if hc[axis] == 0 and tc[axis] == topo.dims[axis] - 1:
            assert tail > head  # wraparound points to coordinate 0
        else:
            assert tail < head


def test_wraparound_bond_orientation_dim0():
    topo = build_lattice([3, 3], [True, True])
    wrap = [
        k
        for k in range(topo.n_bonds)
        if site_to_coords(topo, bond_endpoints(topo, k)[0])[0] == 2
        and site_to_coords(topo, bond_endpoints(topo, k)[1])[0] == 0
    ]
    assert len(wrap) == 3


def test_extent_two_periodic_gives_parallel_bonds():
    topo = build_lattice([2], [True])
    assert topo.n_bonds == 2
    assert bond_endpoints(topo, 0) == (0, 1)
    assert bond_endpoints(topo, 1) == (1, 0)
    # Each site sees both bonds once, with opposite roles.
    assert sorted(incident_bonds(topo, 0)) == [(0, 1), (1, -1)]
    assert sorted(incident_bonds(topo, 1)) == [(0, -1), (1, 1)]


def test_incident_bonds_and_endpoints_are_mutually_consistent():
    for dims, periodic in [([4, 4, 4], [True, True, True]), ([3, 5], [True, False])]:
        topo = build_lattice(dims, periodic)
        seen = {k: [] for k in range(topo.n_bonds)}
        for site in range(topo.n_sites):
            for k, sign in incident_bonds(topo, site):
                tail, head = bond_endpoints(topo, k)
                assert (site, sign) in ((tail, 1), (head, -1))
                seen[k].append(site)
        assert all(len(v) == 2 for v in seen.values())


def test_no_self_loops():
    for dims, periodic in [([2, 2], [True, True]), ([2, 2, 2], [True, True, True])]:
        topo = build_lattice(dims, periodic)
        assert np.all(topo.bonds[:, 0] != topo.bonds[:, 1])


def test_determinism():
    a = build_lattice([4, 3, 2], [True, False, True])
    b = build_lattice([4, 3, 2], [True, False, True])
    assert np.array_equal(a.bonds, b.bonds)
    assert np.array_equal(a.site_bonds, b.site_bonds)
    assert np.array_equal(a.site_signs, b.site_signs)


def test_site_indexing_is_row_major():
    topo = build_lattice([2, 3], [False, False])
    assert coords_to_site(topo, (0, 0)) == 0
    assert coords_to_site(topo, (0, 2)) == 2
    assert coords_to_site(topo, (1, 0)) == 3
    assert site_to_coords(topo, 5) == (1, 2)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        build_lattice([], [])
    with pytest.raises(ValueError):
        build_lattice([3, 0], [False, False])
    with pytest.raises(ValueError):
        build_lattice([1, 3], [True, False])  # periodic extent 1
    with pytest.raises(ValueError):
        build_lattice([2, 2, 2, 2], [True] * 4)
    with pytest.raises(ValueError):
        build_lattice([3, 3], [True])
    with pytest.raises(IndexError):
        bond_endpoints(build_lattice([2], [False]), 5)
    with pytest.raises(IndexError):
        incident_bonds(build_lattice([2], [False]), 2)


def test_single_site_lattice_has_no_bonds():
    topo = build_lattice([1], [False])
    assert topo.n_bonds == 0
    assert incident_bonds(topo, 0) == []
