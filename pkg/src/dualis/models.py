"""Ferromagnetic Ising and q-state Potts models in an external field.

Spins take values in {0, ..., q-1} (q = 2 for Ising).  The inverse
temperature is fixed at 1; temperature only enters through the magnitudes
of the couplings and fields.

Energy conventions (beta = 1):

* Ising:  E(x) = - sum_bonds J_k * (+1 if x_tail == x_head else -1)
                 - sum_sites H_m * (+1 if x_m == 1 else -1)
* Potts:  E(x) = - sum_bonds J_k * [x_tail == x_head]
                 - sum_sites H_m * [x_m == 0]

Fields must be sign-consistent.  For Ising the partition function is
invariant under flipping the sign of every field, so an all-nonnegative
field vector is canonicalized to its negation at construction; mixed signs
are rejected because the dual-graph factor tables would then take negative
values.  Potts fields must be nonnegative.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeTopology

ISING = "ising"
POTTS = "potts"

BETA = 1.0


@dataclass(frozen=True)
class ModelSpec:
    """Immutable model: topology, family, alphabet and parameters.

    ``J`` holds one positive coupling per bond, ``H`` one field per site
    (already canonicalized, see module docstring).
    """

    family: str
    q: int
    topo: LatticeTopology
    J: np.ndarray
    H: np.ndarray
    beta: float = field(default=BETA)

    def __post_init__(self):
        if self.family not in (ISING, POTTS):
            raise ValueError(f"unknown model family {self.family!r}")
        if self.family == ISING and self.q != 2:
            raise ValueError("Ising models have a binary alphabet (q = 2)")
        if self.family == POTTS and (int(self.q) != self.q or self.q < 2):
            raise ValueError(f"Potts alphabet size must be an integer >= 2, got {self.q}")
        if self.q > 255:
            # Dual bond values are stored as uint8 throughout.
            raise ValueError("alphabet sizes above 255 are not supported")
        if self.beta != BETA:
            raise ValueError("inverse temperature is fixed at 1")

        J = np.ascontiguousarray(np.asarray(self.J, dtype=np.float64))
        H = np.ascontiguousarray(np.asarray(self.H, dtype=np.float64))
        if J.shape != (self.topo.n_bonds,):
            raise ValueError(f"J must have one entry per bond ({self.topo.n_bonds}), got shape {J.shape}")
        if H.shape != (self.topo.n_sites,):
            raise ValueError(f"H must have one entry per site ({self.topo.n_sites}), got shape {H.shape}")
        if not np.all(J > 0):
            raise ValueError("couplings must be strictly positive (ferromagnetic)")

        if self.family == ISING:
            if np.all(H >= 0):
                # Z is invariant under global field negation; keep fields <= 0
                # so every dual factor table stays nonnegative.
                H = -H
            elif not np.all(H <= 0):
                raise ValueError("Ising fields must not mix signs")
        else:
            if not np.all(H >= 0):
                raise ValueError("Potts fields must be nonnegative")
        if np.any(H == 0):
            warnings.warn(
                "some fields are exactly zero: dual importance weights can vanish",
                stacklevel=3,
            )

        J.setflags(write=False)
        H.setflags(write=False)
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "H", H)


@dataclass(frozen=True)
class SpinConfig:
    """A spin assignment: one value in {0, ..., q-1} per site."""

    x: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x))
        x.setflags(write=False)
        object.__setattr__(self, "x", x)


def _config_array(x) -> np.ndarray:
    if isinstance(x, SpinConfig):
        return x.x
    return np.asarray(x)


def hamiltonian(model: ModelSpec, x) -> float | np.ndarray:
    """Energy of one configuration, or of a batch with shape (..., n_sites).

    Returns a float for a single configuration and an array matching the
    leading batch shape otherwise.
    """
    x = _config_array(x)
    if x.shape[-1] != model.topo.n_sites:
        raise ValueError(f"configuration length {x.shape[-1]} != {model.topo.n_sites} sites")
    if x.size and (x.min() < 0 or x.max() >= model.q):
        raise ValueError(f"spin values must lie in 0..{model.q - 1}")

    tails = x[..., model.topo.bonds[:, 0]]
    heads = x[..., model.topo.bonds[:, 1]]
    agree = tails == heads
    if model.family == ISING:
        pair = np.where(agree, 1.0, -1.0) @ model.J
        site = np.where(x == 1, 1.0, -1.0) @ model.H
    else:
        pair = agree.astype(np.float64) @ model.J
        site = (x == 0).astype(np.float64) @ model.H
    energy = -(pair + site)
    return float(energy) if energy.ndim == 0 else energy


def boltzmann_log_weight(model: ModelSpec, x) -> float | np.ndarray:
    """Log Boltzmann weight, -beta * E(x) with beta = 1.

    Summing ``exp`` of this over all q**n_sites configurations gives the
    partition function.
    """
    return -hamiltonian(model, x)


def _draw(spec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Realize a parameter spec: a scalar constant or a (low, high) range."""
    if np.isscalar(spec):
        return np.full(size, float(spec))
    lo, hi = (float(v) for v in spec)
    if lo > hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    return rng.uniform(lo, hi, size=size)


def _range_of(spec) -> tuple[float, float]:
    if np.isscalar(spec):
        return float(spec), float(spec)
    lo, hi = (float(v) for v in spec)
    return lo, hi


def sample_params(
    topo: LatticeTopology,
    family: str,
    q: int,
    J,
    H,
    rng: np.random.Generator,
) -> ModelSpec:
    """Draw i.i.d. per-bond couplings and per-site fields.

    ``J`` and ``H`` are either scalars (constant parameters) or (low, high)
    pairs for uniform draws.  Ranges must respect the family's constraints:
    couplings strictly positive, fields sign-consistent.  The result is
    deterministic given the generator state.
    """
    j_lo, _ = _range_of(J)
    if j_lo <= 0:
        raise ValueError("coupling range must be strictly positive (ferromagnetic)")
    h_lo, h_hi = _range_of(H)
    if family == ISING and h_lo < 0 < h_hi:
        raise ValueError("Ising field range must not straddle zero (mixed signs)")
    if family == POTTS and h_lo < 0:
        raise ValueError("Potts field range must be nonnegative")

    # Bond draws first, then site draws: the stream layout is part of the
    # reproducibility contract.
    couplings = _draw(J, topo.n_bonds, rng)
    fields = _draw(H, topo.n_sites, rng)
    return ModelSpec(family=family, q=q, topo=topo, J=couplings, H=fields)
