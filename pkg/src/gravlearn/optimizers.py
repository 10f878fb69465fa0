"""Adam, AdamW and a limited-memory BFGS stage, plus the training driver.

Training is full-batch: every step sees the loss over the whole training
trajectory.  Stage 1 runs a fixed number of Adam or AdamW epochs; the
optional stage 2 polishes with L-BFGS (memory 10) under an Armijo
backtracking line search.  Everything is deterministic given the config
seed, which also selects the network initialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .integrators import Trajectory
from .errors import Diverged
from .models import (
    DEFAULT_SUBSTEPS,
    ModelKind,
    init_model_params,
    loss_and_gradient,
    trajectory_loss,
)

__all__ = [
    "AdamState",
    "Stage1Config",
    "Stage2Config",
    "TrainConfig",
    "TrainResult",
    "adam_init",
    "adam_step",
    "adamw_step",
    "bfgs_minimize",
    "BFGSResult",
    "train",
    "node_default_config",
    "ude_default_config",
]

_BETA1 = 0.9
_BETA2 = 0.999
_EPS = 1e-8


@dataclass(frozen=True)
class AdamState:
    """Exponential moment estimates plus the bias-correction step count."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0


def adam_init(n_params: int) -> AdamState:
    return AdamState(np.zeros(n_params), np.zeros(n_params), 0)


def adam_step(state: AdamState, params, grad, lr: float):
    """One bias-corrected Adam update; returns ``(new_state, new_params)``."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape or state.first_moment.shape != params.shape:
        raise ValueError("params, grad and optimizer state must share one shape")
    t = state.step_count + 1
    m = _BETA1 * state.first_moment + (1.0 - _BETA1) * grad
    v = _BETA2 * state.second_moment + (1.0 - _BETA2) * grad * grad
    m_hat = m / (1.0 - _BETA1**t)
    v_hat = v / (1.0 - _BETA2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + _EPS)
    return AdamState(m, v, t), new_params


def adamw_step(state: AdamState, params, grad, lr: float, weight_decay: float):
    """Adam update followed by decoupled decay ``p -= lr * wd * p``."""
    state, new_params = adam_step(state, params, grad, lr)
    return state, new_params - lr * weight_decay * np.asarray(params, dtype=float)


@dataclass
class BFGSResult:
    params: np.ndarray
    losses: list[float]
    converged: bool = False
    line_search_failed: bool = False
    n_iters: int = 0


def _two_loop(grad, s_hist, y_hist, rho_hist):
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if y_hist:
        gamma = np.dot(s_hist[-1], y_hist[-1]) / np.dot(y_hist[-1], y_hist[-1])
        q *= gamma
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def bfgs_minimize(
    loss_fn,
    grad_fn,
    params0,
    max_iters: int,
    *,
    memory: int = 10,
    grad_tol: float = 1e-8,
    c1: float = 1e-4,
    max_halvings: int = 40,
    value_and_grad_fn=None,
) -> BFGSResult:
    """L-BFGS with Armijo backtracking (step halving, c1 = 1e-4).

    Non-finite trial losses are treated as line-search rejections.  The
    returned loss never exceeds the starting loss; if the line search
    exhausts its 40 halvings the best point so far comes back with
    ``line_search_failed`` set.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if value_and_grad_fn is None:
        value_and_grad_fn = lambda p: (loss_fn(p), grad_fn(p))

    p = np.asarray(params0, dtype=float).copy()
    f, g = value_and_grad_fn(p)
    result = BFGSResult(params=p.copy(), losses=[float(f)])
    best_f = f

    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []

    for it in range(max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm < grad_tol:
            result.converged = True
            break
        direction = _two_loop(g, s_hist, y_hist, rho_hist)
        slope = float(np.dot(g, direction))
        if slope >= 0.0:  # curvature memory is unusable; restart from steepest descent
            s_hist.clear()
            y_hist.clear()
            rho_hist.clear()
            direction = -g
            slope = -gnorm * gnorm

        step = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            trial = p + step * direction
            f_trial = loss_fn(trial)
            if np.isfinite(f_trial) and f_trial <= f + c1 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            result.line_search_failed = True
            break

        f_new, g_new = value_and_grad_fn(trial)
        s = trial - p
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)

        p, f, g = trial, f_new, g_new
        result.n_iters = it + 1
        result.losses.append(float(f))
        if f < best_f:
            best_f = f
            result.params = p.copy()

    return result


@dataclass(frozen=True)
class Stage1Config:
    """First-order stage: full-gradient Adam or AdamW epochs."""

    optimizer: str = "adam"
    lr: float = 1e-3
    epochs: int = 200
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.optimizer not in ("adam", "adamw"):
            raise ValueError(f"unknown stage-1 optimizer {self.optimizer!r}")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass(frozen=True)
class Stage2Config:
    """Second-order polish: L-BFGS iteration budget."""

    max_iters: int = 200

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    stage1: Stage1Config = field(default_factory=Stage1Config)
    stage2: Stage2Config | None = None
    seed: int = 0

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)


def node_default_config(seed: int = 0) -> TrainConfig:
    """Selected Neural ODE schedule: Adam 1e-3 x 200, then BFGS 200."""
    return TrainConfig(
        stage1=Stage1Config(optimizer="adam", lr=1e-3, epochs=200),
        stage2=Stage2Config(max_iters=200),
        seed=seed,
    )


def ude_default_config(seed: int = 0) -> TrainConfig:
    """Selected UDE schedule: AdamW 1e-3 x 700, no second stage."""
    return TrainConfig(
        stage1=Stage1Config(optimizer="adamw", lr=1e-3, epochs=700, weight_decay=0.01),
        stage2=None,
        seed=seed,
    )


@dataclass
class TrainResult:
    params: np.ndarray
    loss_history: np.ndarray
    diverged: bool = False
    line_search_failed: bool = False
    final_loss: float = np.nan


_MAX_REJECTIONS = 5


def train(
    model: ModelKind,
    data: Trajectory,
    config: TrainConfig,
    state0=None,
    substeps: int = DEFAULT_SUBSTEPS,
) -> TrainResult:
    """Two-stage training of ``model`` on ``data``; deterministic in the seed.

    The config seed selects the network initialization.  A rollout that
    turns non-finite rejects the offending update and retries it at half
    the step; five consecutive rejections abort with the best parameters
    seen so far.
    """
    if len(data) < 1:
        raise ValueError("training data must be nonempty")
    params = init_model_params(model, seed=config.seed)
    history: list[float] = []
    if config.stage1.epochs == 0 and config.stage2 is None:
        return TrainResult(params, np.array(history))

    def value_and_grad(p):
        return loss_and_gradient(model, p, data, state0=state0, substeps=substeps)

    def value_only(p):
        try:
            return trajectory_loss(model, p, data, state0=state0, substeps=substeps)
        except Diverged:
            return np.inf

    stage1 = config.stage1

    def apply_update(opt, p, g, lr):
        if stage1.optimizer == "adamw":
            return adamw_step(opt, p, g, lr, stage1.weight_decay)
        return adam_step(opt, p, g, lr)

    opt_state = adam_init(params.size)
    best_loss = np.inf
    best_params = params.copy()
    prev = None  # (params, grad, opt_state) at the last good evaluation
    diverged = False

    for _ in range(stage1.epochs):
        try:
            loss, grad = value_and_grad(params)
            good = np.isfinite(loss)
        except Diverged:
            good = False
        if not good:
            # The update that produced these params is rejected; retry it
            # from the last good point at half the learning rate each time.
            for retry in range(1, _MAX_REJECTIONS + 1):
                if prev is None:
                    break
                p0, g0, opt0 = prev
                opt_state, params = apply_update(opt0, p0, g0, stage1.lr / 2.0**retry)
                try:
                    loss, grad = value_and_grad(params)
                    good = np.isfinite(loss)
                except Diverged:
                    good = False
                if good:
                    break
            if not good:
                return TrainResult(
                    best_params,
                    np.array(history),
                    diverged=True,
                    final_loss=best_loss if np.isfinite(best_loss) else np.nan,
                )
        history.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_params = params.copy()
        prev = (params, grad, opt_state)
        opt_state, params = apply_update(opt_state, params, grad, stage1.lr)

    line_search_failed = False
    if config.stage2 is not None:
        start = params
        if not np.isfinite(value_only(start)):
            diverged = True
            start = best_params.copy()
        try:
            res = bfgs_minimize(
                value_only,
                None,
                start,
                config.stage2.max_iters,
                value_and_grad_fn=value_and_grad,
            )
        except Diverged:
            # nothing evaluated finite, not even the fallback start
            return TrainResult(
                best_params, np.array(history), diverged=True, final_loss=np.nan
            )
        history.extend(res.losses)
        line_search_failed = res.line_search_failed
        cand_loss = min(res.losses) if res.losses else np.inf
        if cand_loss < best_loss:
            best_loss = cand_loss
            best_params = res.params

    return TrainResult(
        best_params,
        np.array(history),
        diverged=diverged,
        line_search_failed=line_search_failed,
        final_loss=best_loss if np.isfinite(best_loss) else np.nan,
    )
