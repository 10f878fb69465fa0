"""Runge-Kutta integrators generic over any right-hand-side function.

``rk4_step``/``integrate_fixed`` implement the classical fixed-step
fourth-order scheme used for differentiable training rollouts.
``integrate_adaptive`` is an embedded Dormand-Prince 5(4) pair with PI
step-size control used to produce ground-truth trajectories; it lands
on every requested save point exactly rather than interpolating.

All right-hand sides have the signature ``rhs(state, t) -> dstate``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteState, StepSizeUnderflow

__all__ = [
    "TimeGrid",
    "Trajectory",
    "rk4_step",
    "integrate_fixed",
    "integrate_adaptive",
]


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times."""

    times: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float)).ravel()
        if times.size < 1:
            raise ValueError("time grid must hold at least one point")
        if not np.isfinite(times).all():
            raise ValueError("time grid contains NaN or Inf")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("time grid must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, t0: float, t1: float, n_points: int) -> "TimeGrid":
        return cls(np.linspace(t0, t1, n_points))

    def __len__(self) -> int:
        return self.times.size

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def is_uniform(self) -> bool:
        if len(self) < 3:
            return True
        diffs = np.diff(self.times)
        mean = diffs.mean()
        return bool(np.max(np.abs(diffs - mean)) < 1e-12 * abs(mean))


@dataclass(frozen=True)
class Trajectory:
    """One state per grid point, stored as a (len(grid), state_size) array."""

    grid: TimeGrid
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] != len(self.grid):
            raise ValueError(
                f"states shape {states.shape} does not match grid of "
                f"{len(self.grid)} points"
            )
        if not np.isfinite(states).all():
            raise ValueError("trajectory contains NaN or Inf")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return len(self.grid)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


def rk4_step(rhs, state: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of size ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(x, t))
    k2 = np.asarray(rhs(x + (0.5 * dt) * k1, t + 0.5 * dt))
    k3 = np.asarray(rhs(x + (0.5 * dt) * k2, t + 0.5 * dt))
    k4 = np.asarray(rhs(x + dt * k3, t + dt))
    for k in (k1, k2, k3, k4):
        if not np.isfinite(k).all():
            raise NonFiniteState("rhs evaluated to NaN/Inf inside an RK4 step")
    return x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def integrate_fixed(rhs, state0, grid: TimeGrid, substeps: int = 1) -> Trajectory:
    """Integrate with ``substeps`` RK4 steps per save interval."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    x = np.asarray(state0, dtype=float).copy()
    states = np.empty((len(grid), x.size))
    states[0] = x
    times = grid.times
    for i in range(len(grid) - 1):
        h = (times[i + 1] - times[i]) / substeps
        t = times[i]
        try:
            for _ in range(substeps):
                x = rk4_step(rhs, x, t, h)
                t += h
        except NonFiniteState as exc:
            raise NonFiniteState(
                f"non-finite state in save interval {i}", interval=i
            ) from exc
        states[i + 1] = x
    return Trajectory(grid, states)


# Dormand-Prince 5(4) tableau (FSAL).  The spec of this artifact accepts any
# standard embedded order-5(4) pair; accuracy is pinned by tests, not
# coefficients.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = (
    np.array([], dtype=float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_DP_ERR = _DP_B5 - _DP_B4

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_PI_ALPHA = 0.17  # 1/5 - 0.75 * beta
_PI_BETA = 0.04


def _error_norm(delta, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((delta / scale) ** 2)))


def _initial_step(rhs, t0, y0, f0, direction_span, rtol, atol):
    """Hairer-style automatic selection of the first trial step."""
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = np.asarray(rhs(y1, t0 + h0))
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, direction_span)


def integrate_adaptive(
    rhs,
    state0,
    t_span,
    rtol: float = 1e-9,
    atol: float = 1e-9,
    save_at: TimeGrid | None = None,
    max_steps: int = 10_000_000,
) -> Trajectory:
    """Integrate over ``t_span`` saving states exactly at ``save_at`` times."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be ordered with t1 > t0")
    if not (rtol > 0 and atol > 0):
        raise ValueError("rtol and atol must be positive")
    if save_at is None:
        save_at = TimeGrid(np.array([t0, t1]))
    save_times = save_at.times
    if save_times[0] < t0 - 1e-12 or save_times[-1] > t1 + 1e-12:
        raise ValueError("save_at must lie within t_span")

    y = np.asarray(state0, dtype=float).copy()
    states = np.empty((save_times.size, y.size))
    i_save = 0
    if abs(save_times[0] - t0) <= 1e-14 * max(1.0, abs(t0)):
        states[0] = y
        i_save = 1

    f = np.asarray(rhs(y, t0))
    if not np.isfinite(f).all():
        raise NonFiniteState("rhs is non-finite at the initial state")

    span = t1 - t0
    dt_floor = 1e-12 * span
    dt = max(_initial_step(rhs, t0, y, f, span, rtol, atol), dt_floor)
    t = t0
    err_prev = 1e-4
    k = np.empty((7, y.size))

    n_steps = 0
    while i_save < save_times.size:
        if n_steps >= max_steps:
            raise RuntimeError(f"adaptive integrator exceeded {max_steps} steps")
        n_steps += 1

        target = save_times[i_save]
        h = dt
        lands_on_save = False
        if t + h >= target - 1e-14 * max(1.0, abs(target)):
            h = target - t
            lands_on_save = True
        if h < dt_floor:
            raise StepSizeUnderflow(
                f"step size {h:.3e} below floor {dt_floor:.3e} at t={t:.6g}"
            )

        k[0] = f
        for s in range(1, 7):
            ts = t + _DP_C[s] * h
            ys = y + h * (_DP_A[s] @ k[:s])
            k[s] = rhs(ys, ts)
        y_new = ys  # stage 7 input equals the 5th-order solution (FSAL)
        err_vec = h * (_DP_ERR @ k)

        if np.isfinite(y_new).all() and np.isfinite(err_vec).all():
            err = _error_norm(err_vec, y, y_new, rtol, atol)
        else:
            err = np.inf

        if err <= 1.0:
            y = y_new
            f = k[6]
            if lands_on_save:
                t = target
                states[i_save] = y
                i_save += 1
            else:
                t += h
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** (-_PI_ALPHA) * err_prev**_PI_BETA
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            # A save-clipped step says nothing about the natural step size,
            # so never let it shrink the proposal.
            dt = max(dt, h * factor) if lands_on_save else h * factor
            err_prev = max(err, 1e-10)
        else:
            factor = max(_MIN_FACTOR, _SAFETY * err ** (-0.2)) if np.isfinite(err) else _MIN_FACTOR
            dt = h * factor
            if dt < dt_floor:
                raise StepSizeUnderflow(
                    f"step size {dt:.3e} below floor {dt_floor:.3e} at t={t:.6g}"
                )

    return Trajectory(save_at, states)
