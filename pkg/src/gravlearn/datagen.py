"""Ground-truth simulation, Gaussian noise injection and prefix splits.

The default system is the equal-mass figure-eight three-body choreography
(G = 1, planar motion embedded in d = 3), integrated at rtol = atol = 1e-9
and sampled on 70 uniform points over [0, 7].  Noise is Gaussian per state
component with standard deviation equal to a stated fraction of that
component's range over the full trajectory, applied to positions and
velocities alike.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import BodySpec, gravitational_rhs, total_energy
from .errors import EmptyTrain
from .integrators import TimeGrid, Trajectory, integrate_adaptive

__all__ = [
    "NoiseLevel",
    "SplitSpec",
    "figure_eight_spec",
    "figure_eight_state",
    "FIGURE_EIGHT_PERIOD",
    "DEFAULT_T_SPAN",
    "DEFAULT_N_POINTS",
    "generate_ground_truth",
    "energy_drift",
    "add_noise",
    "split_prefix",
    "component_ranges",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

# Chenciner-Montgomery figure-eight choreography, a standard stable
# three-body orbit.  v1 = v2 = -v3 / 2.
_FE_R1 = (0.97000436, -0.24308753, 0.0)
_FE_V3 = (-0.93240737, -0.86473146, 0.0)
FIGURE_EIGHT_PERIOD = 6.3259

DEFAULT_T_SPAN = (0.0, 7.0)
DEFAULT_N_POINTS = 70


def figure_eight_spec() -> BodySpec:
    return BodySpec(masses=np.ones(3), gravitational_constant=1.0, spatial_dim=3)


def figure_eight_state() -> np.ndarray:
    r1 = np.array(_FE_R1)
    v3 = np.array(_FE_V3)
    v1 = -0.5 * v3
    state = np.concatenate([r1, v1, -r1, v1, np.zeros(3), v3])
    return state


@dataclass(frozen=True)
class NoiseLevel:
    """Noise standard deviation as a fraction of each component's range."""

    fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.fraction < 0:
            raise ValueError("noise fraction must be >= 0")


@dataclass(frozen=True)
class SplitSpec:
    """Fraction of the time grid used as the training prefix."""

    train_fraction: float = 1.0

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise ValueError("train_fraction must lie in (0, 1]")


def generate_ground_truth(
    spec: BodySpec,
    ic,
    t_span=DEFAULT_T_SPAN,
    n_points: int = DEFAULT_N_POINTS,
    rtol: float = 1e-9,
    atol: float = 1e-9,
) -> Trajectory:
    """Integrate the exact dynamics onto a uniform save grid."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    grid = TimeGrid.uniform(t_span[0], t_span[1], n_points)
    rhs = lambda state, t: gravitational_rhs(state, spec)
    return integrate_adaptive(rhs, ic, t_span, rtol=rtol, atol=atol, save_at=grid)


def energy_drift(traj: Trajectory, spec: BodySpec) -> float:
    """Maximum relative energy drift across the saved states."""
    e0 = total_energy(traj.states[0], spec)
    energies = np.array([total_energy(s, spec) for s in traj.states])
    return float(np.max(np.abs(energies - e0)) / abs(e0))


def component_ranges(traj: Trajectory) -> np.ndarray:
    """Per-component max minus min over the whole trajectory."""
    return traj.states.max(axis=0) - traj.states.min(axis=0)


def add_noise(traj: Trajectory, level: NoiseLevel) -> Trajectory:
    """Add i.i.d. Gaussian noise, sigma = fraction * per-component range."""
    if level.fraction == 0.0:
        return traj
    rng = np.random.default_rng(level.seed)
    sigma = level.fraction * component_ranges(traj)
    noise = rng.standard_normal(traj.states.shape) * sigma
    return Trajectory(traj.grid, traj.states + noise)


def split_prefix(traj: Trajectory, spec: SplitSpec):
    """Split into (train, test): the first ceil(fraction * N) points and the rest."""
    n = len(traj)
    n_train = int(np.ceil(spec.train_fraction * n))
    if n_train < 2:
        raise EmptyTrain(
            f"prefix of {n_train} point(s) from fraction {spec.train_fraction} "
            "is too short to train on"
        )
    train = Trajectory(TimeGrid(traj.times[:n_train]), traj.states[:n_train])
    if n_train == n:
        return train, None
    test = Trajectory(TimeGrid(traj.times[n_train:]), traj.states[n_train:])
    return train, test


def _csv_header(d: int) -> list[str]:
    axes = "xyz"[:d]
    return (
        ["t", "body"]
        + [f"r{a}" for a in axes]
        + [f"v{a}" for a in axes]
    )


def write_trajectory_csv(path, traj: Trajectory, spec: BodySpec, config_echo=None):
    """One row per (time, body); floats carry 17 significant digits."""
    n, d = spec.n, spec.spatial_dim
    path = Path(path)
    with path.open("w", newline="") as fh:
        if config_echo is not None:
            fh.write(f"# config: {json.dumps(config_echo)}\n")
        writer = csv.writer(fh)
        writer.writerow(_csv_header(d))
        for t, state in zip(traj.times, traj.states):
            per_body = state.reshape(n, 2 * d)
            for body in range(n):
                row = [f"{t:.17g}", str(body + 1)]
                row += [f"{v:.17g}" for v in per_body[body]]
                writer.writerow(row)


def read_trajectory_csv(path):
    """Inverse of :func:`write_trajectory_csv`; returns (Trajectory, n, d)."""
    path = Path(path)
    with path.open() as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    d = sum(1 for name in header if name.startswith("r"))
    records = [(float(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader]
    times = sorted({t for t, _, _ in records})
    bodies = sorted({b for _, b, _ in records})
    n = len(bodies)
    t_index = {t: i for i, t in enumerate(times)}
    b_index = {b: i for i, b in enumerate(bodies)}
    states = np.zeros((len(times), 2 * d * n))
    for t, b, values in records:
        i, j = t_index[t], b_index[b]
        states[i, j * 2 * d : (j + 1) * 2 * d] = values
    return Trajectory(TimeGrid(np.array(times)), states), n, d
