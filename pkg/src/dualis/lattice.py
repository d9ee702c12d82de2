"""Hypercubic lattice topology with oriented nearest-neighbor bonds.

Sites of a 1D/2D/3D lattice are indexed in row-major order over ``dims``
(the last dimension varies fastest).  Bonds are enumerated dimension-major,
then site-major, each with a fixed global index and a fixed orientation:

* within a row, the tail is the site with the smaller index;
* a wraparound bond points from the site at the largest coordinate to the
  site at coordinate 0 of the same row.

Equivalently every bond points in the +direction of its dimension.  The
orientation is decided here, once, and shared by the spin models and the
dual-graph linear map, which both rely on it being stable.

Periodic dimensions of extent 2 produce a pair of parallel bonds with
opposite orientations (multi-edges).  They are kept as distinct bonds so a
fully periodic d-dimensional lattice always has exactly d*N bonds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_DIMENSIONS = 3


@dataclass(frozen=True)
class LatticeTopology:
    """Immutable incidence structure of a hypercubic lattice.

    Attributes:
        dims: sites per dimension.
        periodic: per-dimension wraparound flag.
        n_sites: total number of sites (product of dims).
        bonds: (n_bonds, 2) array of (tail, head) site indices.
        site_bonds: (n_sites, max_degree) bond indices incident to each
            site, padded with 0 where a site has fewer bonds.
        site_signs: (n_sites, max_degree) orientation signs, +1 where the
            site is the bond's tail, -1 where it is the head, 0 on padding.
    """

    dims: tuple[int, ...]
    periodic: tuple[bool, ...]
    n_sites: int
    bonds: np.ndarray
    site_bonds: np.ndarray = field(repr=False)
    site_signs: np.ndarray = field(repr=False)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def degrees(self) -> np.ndarray:
        """Per-site bond count (multi-edges counted separately)."""
        return np.count_nonzero(self.site_signs, axis=1)


def _strides(dims: tuple[int, ...]) -> tuple[int, ...]:
    # Row-major: stride of the last dimension is 1.
    out = []
    acc = 1
    for d in reversed(dims):
        out.append(acc)
        acc *= d
    return tuple(reversed(out))


def site_to_coords(topo: LatticeTopology, site: int) -> tuple[int, ...]:
    """Row-major coordinates of a site index."""
    return tuple((site // s) % d for s, d in zip(_strides(topo.dims), topo.dims))


def coords_to_site(topo: LatticeTopology, coords) -> int:
    """Site index of row-major coordinates."""
    return int(sum(c * s for c, s in zip(coords, _strides(topo.dims))))


def build_lattice(dims, periodic) -> LatticeTopology:
    """Build the topology for the given extents and boundary conditions.

    Args:
        dims: 1 to 3 positive extents.
        periodic: one flag per dimension; a periodic dimension needs
            extent >= 2 (extent 1 would wrap a bond onto a single site).

    Returns:
        A :class:`LatticeTopology` with deterministically ordered bonds.
    """
    dims = tuple(int(d) for d in dims)
    periodic = tuple(bool(p) for p in periodic)
    if not 1 <= len(dims) <= MAX_DIMENSIONS:
        raise ValueError(f"expected 1..{MAX_DIMENSIONS} dimensions, got {len(dims)}")
    if len(periodic) != len(dims):
        raise ValueError("dims and periodic must have the same length")
    if any(d < 1 for d in dims):
        raise ValueError(f"every extent must be >= 1, got {dims}")
    for d, p in zip(dims, periodic):
        if p and d < 2:
            raise ValueError("periodic dimension of extent 1 would create a self-loop")

    n_sites = math.prod(dims)
    strides = _strides(dims)

    pairs: list[tuple[int, int]] = []
    for axis, (extent, stride, wrap) in enumerate(zip(dims, strides, periodic)):
        del axis
        for site in range(n_sites):
            coord = (site // stride) % extent
            if coord + 1 < extent:
                pairs.append((site, site + stride))
            elif wrap:
                # Wraparound: tail sits at the largest coordinate.
                pairs.append((site, site - (extent - 1) * stride))

    bonds = np.asarray(pairs, dtype=np.int64).reshape(len(pairs), 2)

    degrees = np.zeros(n_sites, dtype=np.int64)
    for tail, head in pairs:
        degrees[tail] += 1
        degrees[head] += 1
    max_degree = int(degrees.max()) if n_sites and len(pairs) else 0

    site_bonds = np.zeros((n_sites, max_degree), dtype=np.int64)
    site_signs = np.zeros((n_sites, max_degree), dtype=np.int8)
    cursor = np.zeros(n_sites, dtype=np.int64)
    for k, (tail, head) in enumerate(pairs):
        site_bonds[tail, cursor[tail]] = k
        site_signs[tail, cursor[tail]] = 1
        cursor[tail] += 1
        site_bonds[head, cursor[head]] = k
        site_signs[head, cursor[head]] = -1
        cursor[head] += 1

    for arr in (bonds, site_bonds, site_signs):
        arr.setflags(write=False)
    return LatticeTopology(dims, periodic, n_sites, bonds, site_bonds, site_signs)


def bond_endpoints(topo: LatticeTopology, bond: int) -> tuple[int, int]:
    """(tail, head) site indices of a bond."""
    if not 0 <= bond < topo.n_bonds:
        raise IndexError(f"bond index {bond} out of range for {topo.n_bonds} bonds")
    tail, head = topo.bonds[bond]
    return int(tail), int(head)


def incident_bonds(topo: LatticeTopology, site: int) -> list[tuple[int, int]]:
    """All bonds touching ``site`` as (bond index, sign) pairs.

    The sign is +1 where the site is the bond's tail and -1 where it is the
    head.  Parallel bonds appear once each, so the list length equals the
    site's degree.
    """
    if not 0 <= site < topo.n_sites:
        raise IndexError(f"site index {site} out of range for {topo.n_sites} sites")
    out = []
    for k, sign in zip(topo.site_bonds[site], topo.site_signs[site]):
        if sign != 0:
            out.append((int(k), int(sign)))
    return out
