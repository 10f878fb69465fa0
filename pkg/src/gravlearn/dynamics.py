"""Exact Newtonian n-body vector field and conserved-quantity oracles.

States are flat float64 vectors laid out body by body,
``[r_1, v_1, r_2, v_2, ..., r_n, v_n]`` with each ``r_i``/``v_i`` of
length ``spatial_dim``, so a state has ``2 * spatial_dim * n`` entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoincidentBodies, DimensionMismatch

__all__ = [
    "COINCIDENCE_EPS",
    "BodySpec",
    "as_state",
    "split_state",
    "gravitational_rhs",
    "pairwise_true_interaction",
    "total_energy",
]

# Pairwise distances below this raise CoincidentBodies instead of producing
# huge finite accelerations.  The potential is deliberately unsoftened.
COINCIDENCE_EPS = 1e-8


@dataclass(frozen=True)
class BodySpec:
    """Masses, gravitational constant and spatial dimension of a system."""

    masses: np.ndarray
    gravitational_constant: float = 1.0
    spatial_dim: int = 3

    def __post_init__(self):
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if masses.ndim != 1 or masses.size < 1:
            raise ValueError("masses must be a non-empty 1-D vector")
        if not np.all(masses > 0):
            raise ValueError("all masses must be strictly positive")
        if not self.gravitational_constant > 0:
            raise ValueError("gravitational constant must be strictly positive")
        if self.spatial_dim not in (2, 3):
            raise ValueError("spatial_dim must be 2 or 3")
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(
            self, "gravitational_constant", float(self.gravitational_constant)
        )

    @property
    def n(self) -> int:
        return self.masses.size

    @property
    def state_size(self) -> int:
        return 2 * self.spatial_dim * self.n


def as_state(values, spec: BodySpec | None = None) -> np.ndarray:
    """Validate and return a state vector as a flat float64 array."""
    state = np.asarray(values, dtype=float).ravel()
    if not np.isfinite(state).all():
        raise ValueError("state contains NaN or Inf")
    if spec is not None and state.size != spec.state_size:
        raise DimensionMismatch(
            f"state has {state.size} entries, spec implies {spec.state_size}"
        )
    if spec is None and state.size % 2 != 0:
        raise DimensionMismatch("state length must be even")
    return state


def split_state(state: np.ndarray, spec: BodySpec):
    """Return (positions, velocities) views of shape (n, spatial_dim)."""
    if state.size != spec.state_size:
        raise DimensionMismatch(
            f"state has {state.size} entries, spec implies {spec.state_size}"
        )
    d = spec.spatial_dim
    per_body = state.reshape(spec.n, 2 * d)
    return per_body[:, :d], per_body[:, d:]


def _pairwise_displacements(pos: np.ndarray):
    """diff[i, j] = r_j - r_i and the pairwise distance matrix."""
    diff = pos[np.newaxis, :, :] - pos[:, np.newaxis, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return diff, dist


def _check_separation(dist: np.ndarray):
    n = dist.shape[0]
    if n < 2:
        return
    off_diag = dist[~np.eye(n, dtype=bool)]
    if off_diag.min() < COINCIDENCE_EPS:
        raise CoincidentBodies(
            f"minimum pairwise distance {off_diag.min():.3e} below "
            f"{COINCIDENCE_EPS:.0e}"
        )


def gravitational_rhs(state: np.ndarray, spec: BodySpec) -> np.ndarray:
    """Time derivative of the state under Newtonian pairwise gravity.

    Position slots receive the velocities; velocity slots receive
    ``G * sum_{j != i} m_j (r_j - r_i) / |r_j - r_i|^3``.
    """
    pos, vel = split_state(np.asarray(state, dtype=float), spec)
    diff, dist = _pairwise_displacements(pos)
    _check_separation(dist)
    np.fill_diagonal(dist, 1.0)  # avoid 0/0 on the excluded i == j terms
    weights = spec.gravitational_constant * spec.masses[np.newaxis, :] / dist**3
    np.fill_diagonal(weights, 0.0)
    acc = np.einsum("ij,ijk->ik", weights, diff)

    d = spec.spatial_dim
    out = np.empty_like(state, dtype=float).reshape(spec.n, 2 * d)
    out[:, :d] = vel
    out[:, d:] = acc
    return out.reshape(-1)


def pairwise_true_interaction(r_i, r_j, m_i, m_j, G: float = 1.0) -> np.ndarray:
    """Ground-truth acceleration exerted on body i by body j.

    ``m_i`` is accepted only for interface symmetry with the learned
    interaction network; the Newtonian term does not depend on it.
    """
    r_i = np.asarray(r_i, dtype=float)
    r_j = np.asarray(r_j, dtype=float)
    if r_i.shape != r_j.shape:
        raise DimensionMismatch("r_i and r_j must have the same shape")
    diff = r_j - r_i
    dist = float(np.linalg.norm(diff))
    if dist < COINCIDENCE_EPS:
        raise CoincidentBodies(f"separation {dist:.3e} below {COINCIDENCE_EPS:.0e}")
    return G * m_j * diff / dist**3


def total_energy(state: np.ndarray, spec: BodySpec) -> float:
    """Kinetic plus pairwise gravitational potential energy."""
    pos, vel = split_state(np.asarray(state, dtype=float), spec)
    kinetic = 0.5 * float(np.sum(spec.masses * np.einsum("ij,ij->i", vel, vel)))
    _, dist = _pairwise_displacements(pos)
    _check_separation(dist)
    n = spec.n
    potential = 0.0
    if n > 1:
        iu, ju = np.triu_indices(n, k=1)
        potential = -spec.gravitational_constant * float(
            np.sum(spec.masses[iu] * spec.masses[ju] / dist[iu, ju])
        )
    return kinetic + potential
