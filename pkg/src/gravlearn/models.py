"""Learnable dynamical models and the differentiable trajectory loss.

Two model families share one interface:

* ``node`` - the whole state derivative is a network mapping the flat
  state to its time derivative.
* ``ude`` - the kinematic half (dr/dt = v) and the pairwise-sum structure
  of the acceleration are hard-coded; a shared network maps
  ``[r_i, r_j, m_i, m_j]`` to body j's contribution to body i's
  acceleration.

Both vector fields are autonomous: the integration time is accepted but
never fed to the network.

``trajectory_loss`` is the mean squared error between a fixed-step RK4
rollout and the data over every grid point and state component.
``loss_gradient`` differentiates that discrete loss exactly by sweeping
the stored forward tape in reverse through every stage of every substep.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .dynamics import BodySpec
from .errors import DimensionMismatch, Diverged, GridMismatch
from .integrators import TimeGrid, Trajectory
from .neural import (
    MLPSpec,
    forward_cached,
    forward_plain,
    init_params,
    unpack_params,
    vjp_from_cache,
)

__all__ = [
    "KIND_NODE",
    "KIND_UDE",
    "ModelKind",
    "node_model",
    "ude_model",
    "node_rhs",
    "ude_rhs",
    "model_rhs",
    "rhs_function",
    "predict",
    "trajectory_loss",
    "loss_gradient",
    "loss_and_gradient",
    "extract_interaction",
    "interaction_sum_rhs",
    "save_checkpoint",
    "load_checkpoint",
    "DEFAULT_SUBSTEPS",
]

KIND_NODE = "node"
KIND_UDE = "ude"

# RK4 substeps per save interval during training rollouts; at the default
# 0.1 grid spacing this integrates at dt = 0.025.
DEFAULT_SUBSTEPS = 4


@dataclass(frozen=True)
class ModelKind:
    """Model family tag plus its network and body layout."""

    kind: str
    mlp_spec: MLPSpec
    body_spec: BodySpec

    def __post_init__(self):
        if self.kind not in (KIND_NODE, KIND_UDE):
            raise ValueError(f"unknown model kind {self.kind!r}")
        d = self.body_spec.spatial_dim
        state_size = self.body_spec.state_size
        sizes = self.mlp_spec.layer_sizes
        if self.kind == KIND_NODE:
            if sizes[0] != state_size or sizes[-1] != state_size:
                raise DimensionMismatch(
                    f"node network must map state to state ({state_size} -> "
                    f"{state_size}), got {sizes[0]} -> {sizes[-1]}"
                )
        else:
            if sizes[0] != 2 * d + 2 or sizes[-1] != d:
                raise DimensionMismatch(
                    f"ude network must map [r_i, r_j, m_i, m_j] to a {d}-vector "
                    f"({2 * d + 2} -> {d}), got {sizes[0]} -> {sizes[-1]}"
                )

    @property
    def state_size(self) -> int:
        return self.body_spec.state_size


def node_model(
    body_spec: BodySpec,
    hidden_layers: int = 3,
    units: int = 64,
    activation: str = "tanh",
    seed: int = 0,
) -> ModelKind:
    """Neural ODE with the selected defaults: tanh, 3 hidden layers of 64."""
    size = body_spec.state_size
    sizes = (size,) + (units,) * hidden_layers + (size,)
    return ModelKind(KIND_NODE, MLPSpec(sizes, activation, seed), body_spec)


def ude_model(
    body_spec: BodySpec,
    hidden_layers: int = 1,
    units: int = 32,
    activation: str = "swish",
    seed: int = 0,
) -> ModelKind:
    """UDE with the selected defaults: swish, 1 hidden layer of 32."""
    d = body_spec.spatial_dim
    sizes = (2 * d + 2,) + (units,) * hidden_layers + (d,)
    return ModelKind(KIND_UDE, MLPSpec(sizes, activation, seed), body_spec)


@lru_cache(maxsize=64)
def _pair_structure(n: int):
    """Ordered pairs grouped by receiving body, plus the j-scatter matrix."""
    idx_i = []
    idx_j = []
    for i in range(n):
        for j in range(n):
            if j != i:
                idx_i.append(i)
                idx_j.append(j)
    idx_i = np.array(idx_i, dtype=np.intp)
    idx_j = np.array(idx_j, dtype=np.intp)
    scatter_j = np.zeros((n, idx_j.size))
    scatter_j[idx_j, np.arange(idx_j.size)] = 1.0
    return idx_i, idx_j, scatter_j


class _NodeEngine:
    """Fast path for one (model, params) pair; params views are zero-copy."""

    def __init__(self, model: ModelKind, params: np.ndarray):
        self.activation = model.mlp_spec.hidden_activation
        self.layers = unpack_params(model.mlp_spec, params)
        self.state_size = model.state_size

    def rhs(self, x):
        return forward_plain(self.activation, self.layers, x)

    def rhs_cached(self, x):
        return forward_cached(self.activation, self.layers, x)

    def rhs_vjp(self, cache, kbar, grads):
        return vjp_from_cache(self.activation, self.layers, cache, kbar, grads)


class _UdeEngine:
    def __init__(self, model: ModelKind, params: np.ndarray):
        spec = model.body_spec
        self.activation = model.mlp_spec.hidden_activation
        self.layers = unpack_params(model.mlp_spec, params)
        self.n = spec.n
        self.d = spec.spatial_dim
        self.state_size = model.state_size
        idx_i, idx_j, scatter_j = _pair_structure(self.n)
        self.idx_i = idx_i
        self.idx_j = idx_j
        self.scatter_j = scatter_j
        self.m_i = spec.masses[idx_i]
        self.m_j = spec.masses[idx_j]

    def _pair_inputs(self, per_body):
        d = self.d
        u = np.empty((self.idx_i.size, 2 * d + 2))
        pos = per_body[:, :d]
        u[:, :d] = pos[self.idx_i]
        u[:, d : 2 * d] = pos[self.idx_j]
        u[:, 2 * d] = self.m_i
        u[:, 2 * d + 1] = self.m_j
        return u

    def _assemble(self, per_body, pair_out):
        n, d = self.n, self.d
        k = np.empty_like(per_body)
        k[:, :d] = per_body[:, d:]  # dr/dt = v, hard-coded
        k[:, d:] = pair_out.reshape(n, n - 1, d).sum(axis=1) if n > 1 else 0.0
        return k.reshape(-1)

    def rhs(self, x):
        per_body = x.reshape(self.n, 2 * self.d)
        y = forward_plain(self.activation, self.layers, self._pair_inputs(per_body))
        return self._assemble(per_body, y)

    def rhs_cached(self, x):
        per_body = x.reshape(self.n, 2 * self.d)
        y, cache = forward_cached(
            self.activation, self.layers, self._pair_inputs(per_body)
        )
        return self._assemble(per_body, y), cache

    def rhs_vjp(self, cache, kbar, grads):
        n, d = self.n, self.d
        kbar = kbar.reshape(n, 2 * d)
        xbar = np.zeros((n, 2 * d))
        xbar[:, d:] = kbar[:, :d]  # cotangent of the kinematic copy
        if n > 1:
            ybar = np.repeat(kbar[:, d:], n - 1, axis=0)
            ubar = vjp_from_cache(self.activation, self.layers, cache, ybar, grads)
            xbar[:, :d] += ubar[:, :d].reshape(n, n - 1, d).sum(axis=1)
            xbar[:, :d] += self.scatter_j @ ubar[:, d : 2 * d]
        return xbar.reshape(-1)


def _engine(model: ModelKind, params: np.ndarray):
    params = np.asarray(params, dtype=float)
    if params.size != model.mlp_spec.n_params:
        raise DimensionMismatch(
            f"parameter vector has {params.size} entries, model needs "
            f"{model.mlp_spec.n_params}"
        )
    if model.kind == KIND_NODE:
        return _NodeEngine(model, params)
    return _UdeEngine(model, params)


def _check_state(model, state):
    state = np.asarray(state, dtype=float).ravel()
    if state.size != model.state_size:
        raise DimensionMismatch(
            f"state has {state.size} entries, model expects {model.state_size}"
        )
    return state


def node_rhs(model: ModelKind, params, state, t: float = 0.0) -> np.ndarray:
    """Full learned state derivative; ``t`` is accepted but ignored."""
    if model.kind != KIND_NODE:
        raise ValueError("node_rhs requires a node model")
    return _engine(model, params).rhs(_check_state(model, state))


def ude_rhs(model: ModelKind, params, state, t: float = 0.0) -> np.ndarray:
    """Hard-coded kinematics plus the learned pairwise acceleration sum."""
    if model.kind != KIND_UDE:
        raise ValueError("ude_rhs requires a ude model")
    return _engine(model, params).rhs(_check_state(model, state))


def model_rhs(model: ModelKind, params, state, t: float = 0.0) -> np.ndarray:
    return _engine(model, params).rhs(_check_state(model, state))


def rhs_function(model: ModelKind, params):
    """Bind (model, params) into an ``rhs(state, t)`` callable."""
    eng = _engine(model, params)
    return lambda state, t=0.0: eng.rhs(np.asarray(state, dtype=float))


def extract_interaction(model: ModelKind, params, probe) -> np.ndarray:
    """Raw network output at one ``(r_i, r_j, m_i, m_j)`` probe point."""
    if model.kind != KIND_UDE:
        raise ValueError("extract_interaction requires a ude model")
    r_i, r_j, m_i, m_j = probe
    u = np.concatenate(
        [
            np.asarray(r_i, dtype=float).ravel(),
            np.asarray(r_j, dtype=float).ravel(),
            [float(m_i), float(m_j)],
        ]
    )
    if u.size != model.mlp_spec.in_size:
        raise DimensionMismatch(
            f"probe has {u.size} entries, network expects {model.mlp_spec.in_size}"
        )
    eng = _engine(model, params)
    return forward_plain(eng.activation, eng.layers, u)


def interaction_sum_rhs(state, body_spec: BodySpec, pair_force) -> np.ndarray:
    """Reference rhs built from any pairwise force ``f(r_i, r_j, m_i, m_j)``.

    Plain-loop counterpart of ``ude_rhs``'s batched pair sum; useful as an
    oracle when ``pair_force`` is the ground-truth interaction.
    """
    n, d = body_spec.n, body_spec.spatial_dim
    state = np.asarray(state, dtype=float)
    per_body = state.reshape(n, 2 * d)
    out = np.zeros_like(per_body)
    out[:, :d] = per_body[:, d:]
    masses = body_spec.masses
    for i in range(n):
        for j in range(n):
            if j != i:
                out[i, d:] += pair_force(
                    per_body[i, :d], per_body[j, :d], masses[i], masses[j]
                )
    return out.reshape(-1)


def _check_alignment(data: Trajectory, grid: TimeGrid | None) -> TimeGrid:
    if grid is None:
        return data.grid
    if len(grid) != len(data.grid) or not np.array_equal(grid.times, data.grid.times):
        raise GridMismatch("data is not aligned with the requested grid")
    return grid


def _rollout(eng, shape, times, state0, substeps, with_tape):
    n_pts, size = shape
    pred = np.empty((n_pts, size))
    x = np.asarray(state0, dtype=float).copy()
    if x.size != size:
        raise DimensionMismatch("state0 does not match the data state size")
    pred[0] = x
    tape = [] if with_tape else None
    for seg in range(n_pts - 1):
        h = (times[seg + 1] - times[seg]) / substeps
        for _ in range(substeps):
            if with_tape:
                k1, c1 = eng.rhs_cached(x)
                x2 = x + (0.5 * h) * k1
                k2, c2 = eng.rhs_cached(x2)
                x3 = x + (0.5 * h) * k2
                k3, c3 = eng.rhs_cached(x3)
                x4 = x + h * k3
                k4, c4 = eng.rhs_cached(x4)
                tape.append((h, c1, c2, c3, c4))
            else:
                k1 = eng.rhs(x)
                k2 = eng.rhs(x + (0.5 * h) * k1)
                k3 = eng.rhs(x + (0.5 * h) * k2)
                k4 = eng.rhs(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.isfinite(x).all():
            raise Diverged(f"rollout became non-finite in save interval {seg}", seg)
        pred[seg + 1] = x
    return pred, tape


def _rk4_reverse(eng, entry, ybar, grads):
    """Cotangent of one RK4 substep; accumulates parameter cotangents."""
    h, c1, c2, c3, c4 = entry
    k4bar = (h / 6.0) * ybar
    x4bar = eng.rhs_vjp(c4, k4bar, grads)
    k3bar = (h / 3.0) * ybar + h * x4bar
    x3bar = eng.rhs_vjp(c3, k3bar, grads)
    k2bar = (h / 3.0) * ybar + (0.5 * h) * x3bar
    x2bar = eng.rhs_vjp(c2, k2bar, grads)
    k1bar = (h / 6.0) * ybar + (0.5 * h) * x2bar
    x1bar = eng.rhs_vjp(c1, k1bar, grads)
    return ybar + x1bar + x2bar + x3bar + x4bar


def trajectory_loss(
    model: ModelKind,
    params,
    data: Trajectory,
    grid: TimeGrid | None = None,
    state0=None,
    substeps: int = DEFAULT_SUBSTEPS,
) -> float:
    """MSE between the model rollout and ``data`` over all grid points."""
    grid = _check_alignment(data, grid)
    if state0 is None:
        state0 = data.states[0]
    eng = _engine(model, params)
    pred, _ = _rollout(eng, data.states.shape, grid.times, state0, substeps, False)
    resid = pred - data.states
    return float(np.mean(resid * resid))


def loss_and_gradient(
    model: ModelKind,
    params,
    data: Trajectory,
    grid: TimeGrid | None = None,
    state0=None,
    substeps: int = DEFAULT_SUBSTEPS,
):
    """The trajectory loss and its exact gradient w.r.t. the parameters."""
    grid = _check_alignment(data, grid)
    if state0 is None:
        state0 = data.states[0]
    params = np.asarray(params, dtype=float)
    eng = _engine(model, params)
    times = grid.times
    pred, tape = _rollout(eng, data.states.shape, times, state0, substeps, True)
    resid = pred - data.states
    loss = float(np.mean(resid * resid))

    grad = np.zeros_like(params)
    grads = unpack_params(model.mlp_spec, grad)
    n_pts = pred.shape[0]
    scale = 2.0 / resid.size
    xbar = scale * resid[n_pts - 1]
    entry = len(tape)
    for seg in range(n_pts - 2, -1, -1):
        for _ in range(substeps):
            entry -= 1
            xbar = _rk4_reverse(eng, tape[entry], xbar, grads)
        if seg > 0:  # state0 is fixed, so its cotangent is never needed
            xbar = xbar + scale * resid[seg]
    return loss, grad


def loss_gradient(
    model: ModelKind,
    params,
    data: Trajectory,
    grid: TimeGrid | None = None,
    state0=None,
    substeps: int = DEFAULT_SUBSTEPS,
) -> np.ndarray:
    return loss_and_gradient(model, params, data, grid, state0, substeps)[1]


def predict(
    model: ModelKind,
    params,
    grid: TimeGrid,
    state0,
    substeps: int = DEFAULT_SUBSTEPS,
) -> Trajectory:
    """Roll the model out over ``grid`` with the training integrator."""
    eng = _engine(model, params)
    pred, _ = _rollout(eng, (len(grid), model.state_size), grid.times, state0, substeps, False)
    return Trajectory(grid, pred)


def init_model_params(model: ModelKind, seed: int | None = None) -> np.ndarray:
    """Initialize parameters, optionally overriding the spec's seed."""
    spec = model.mlp_spec
    if seed is not None and seed != spec.seed:
        spec = MLPSpec(spec.layer_sizes, spec.hidden_activation, seed)
    return init_params(spec)


def save_checkpoint(path, model: ModelKind, params) -> None:
    """JSON checkpoint: model kind tag, network header, body spec, flat params."""
    payload = {
        "kind": model.kind,
        "mlp": {
            "layer_sizes": list(model.mlp_spec.layer_sizes),
            "hidden_activation": model.mlp_spec.hidden_activation,
            "seed": model.mlp_spec.seed,
        },
        "body": {
            "masses": [float(m) for m in model.body_spec.masses],
            "gravitational_constant": model.body_spec.gravitational_constant,
            "spatial_dim": model.body_spec.spatial_dim,
        },
        "params": [float(v) for v in np.asarray(params, dtype=float)],
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(model, params)``."""
    payload = json.loads(Path(path).read_text())
    mlp = MLPSpec(
        layer_sizes=tuple(payload["mlp"]["layer_sizes"]),
        hidden_activation=payload["mlp"]["hidden_activation"],
        seed=payload["mlp"]["seed"],
    )
    body = BodySpec(
        masses=np.asarray(payload["body"]["masses"], dtype=float),
        gravitational_constant=payload["body"]["gravitational_constant"],
        spatial_dim=payload["body"]["spatial_dim"],
    )
    model = ModelKind(payload["kind"], mlp, body)
    params = np.asarray(payload["params"], dtype=float)
    if params.size != mlp.n_params:
        raise DimensionMismatch("checkpoint parameter count does not match header")
    return model, params
