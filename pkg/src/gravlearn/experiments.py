"""Case runner, forecast metrics and the forecasting-breakdown-point sweep.

A "case" trains one model kind on the (possibly noisy) prefix of the
dataset and evaluates the rollout over the full grid against the clean
ground truth, separately on the training window and the forecast window.
Errors are normalized RMSE per state component, where the normalizer is
that component's range over the full clean trajectory; a forecast is
called plausible when the aggregate nRMSE stays below the configured
threshold (default 0.15).

Training is stochastic in its initialization only, so each case runs
``n_seeds`` trainings and reports the best by aggregate forecast nRMSE
(train nRMSE when there is no forecast window).
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .datagen import (
    NoiseLevel,
    SplitSpec,
    add_noise,
    component_ranges,
    split_prefix,
)
from .errors import GridMismatch
from .integrators import TimeGrid, Trajectory
from .models import DEFAULT_SUBSTEPS, ModelKind, predict
from .optimizers import TrainConfig, train

__all__ = [
    "Metrics",
    "CaseConfig",
    "CaseResult",
    "DataBundle",
    "BreakdownReport",
    "forecast_metrics",
    "run_case",
    "breakdown_point",
    "DEFAULT_FRACTION_GRID",
]

DEFAULT_PLAUSIBILITY_THRESHOLD = 0.15
DEFAULT_FRACTION_GRID = (0.9, 0.8, 0.4, 0.2, 0.1)


@dataclass(frozen=True)
class Metrics:
    """Per-component and aggregate normalized RMSE."""

    per_component: np.ndarray
    aggregate: float

    def to_dict(self):
        return {
            "per_component": [float(v) for v in self.per_component],
            "aggregate": float(self.aggregate),
        }


def _normalizers(ranges: np.ndarray) -> np.ndarray:
    """Component ranges with a fallback for degenerate (constant) components.

    A component whose ground-truth range is zero (e.g. the out-of-plane
    coordinates of a planar orbit) is normalized by the largest component
    range instead, so spurious drift there still counts against the model.
    """
    ranges = np.asarray(ranges, dtype=float)
    largest = ranges.max() if ranges.size else 0.0
    if largest <= 0.0:
        return np.ones_like(ranges)
    return np.where(ranges > 1e-9 * largest, ranges, largest)


def forecast_metrics(
    pred: Trajectory, truth: Trajectory, reference: Trajectory | None = None
) -> Metrics:
    """nRMSE of ``pred`` against ``truth`` on their shared grid.

    ``reference`` supplies the normalizing ranges (the full clean
    trajectory); it defaults to ``truth`` itself.
    """
    if len(pred) != len(truth) or not np.array_equal(pred.times, truth.times):
        raise GridMismatch("prediction and truth grids differ")
    ranges = component_ranges(reference if reference is not None else truth)
    rmse = np.sqrt(np.mean((pred.states - truth.states) ** 2, axis=0))
    per_component = rmse / _normalizers(ranges)
    return Metrics(per_component, float(per_component.mean()))


@dataclass(frozen=True)
class DataBundle:
    """Clean ground truth plus the noisy variant actually trained on."""

    clean: Trajectory
    noisy: Trajectory

    @classmethod
    def from_truth(cls, truth: Trajectory, noise: NoiseLevel) -> "DataBundle":
        return cls(clean=truth, noisy=add_noise(truth, noise))


@dataclass(frozen=True)
class CaseConfig:
    model_kind: ModelKind
    noise: NoiseLevel
    split: SplitSpec
    train_config: TrainConfig
    plausibility_threshold: float = DEFAULT_PLAUSIBILITY_THRESHOLD
    n_seeds: int = 3
    substeps: int = DEFAULT_SUBSTEPS

    def __post_init__(self):
        if not self.plausibility_threshold > 0:
            raise ValueError("plausibility threshold must be positive")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")


@dataclass
class SeedOutcome:
    seed: int
    params: np.ndarray
    loss_history: np.ndarray
    train_nrmse: Metrics
    forecast_nrmse: Metrics | None
    diverged: bool
    wall_time: float

    @property
    def selection_key(self) -> float:
        metrics = self.forecast_nrmse if self.forecast_nrmse is not None else self.train_nrmse
        if self.diverged or not np.isfinite(metrics.aggregate):
            return np.inf
        return metrics.aggregate


@dataclass
class CaseResult:
    config: CaseConfig
    seed: int
    trained_params: np.ndarray
    loss_history: np.ndarray
    train_nrmse: Metrics
    forecast_nrmse: Metrics | None
    plausible: bool
    wall_time: float
    diverged: bool
    seed_outcomes: list[dict]

    def to_dict(self):
        cfg = self.config
        return {
            "config_echo": {
                "model_kind": cfg.model_kind.kind,
                "layer_sizes": list(cfg.model_kind.mlp_spec.layer_sizes),
                "activation": cfg.model_kind.mlp_spec.hidden_activation,
                "noise_fraction": cfg.noise.fraction,
                "noise_seed": cfg.noise.seed,
                "train_fraction": cfg.split.train_fraction,
                "base_seed": cfg.train_config.seed,
                "n_seeds": cfg.n_seeds,
                "plausibility_threshold": cfg.plausibility_threshold,
                "substeps": cfg.substeps,
            },
            "seed": self.seed,
            "train_nrmse": self.train_nrmse.to_dict(),
            "forecast_nrmse": (
                self.forecast_nrmse.to_dict() if self.forecast_nrmse is not None else None
            ),
            "plausible": bool(self.plausible),
            "diverged": bool(self.diverged),
            "wall_time": float(self.wall_time),
            "seed_outcomes": self.seed_outcomes,
        }


def _window_metrics(pred: Trajectory, clean: Trajectory, n_train: int) -> tuple:
    """Split the full-grid comparison at the train/forecast boundary."""
    full_ranges_source = clean
    train_pred = Trajectory(TimeGrid(pred.times[:n_train]), pred.states[:n_train])
    train_true = Trajectory(TimeGrid(clean.times[:n_train]), clean.states[:n_train])
    train_m = forecast_metrics(train_pred, train_true, reference=full_ranges_source)
    if n_train >= len(clean):
        return train_m, None
    fc_pred = Trajectory(TimeGrid(pred.times[n_train:]), pred.states[n_train:])
    fc_true = Trajectory(TimeGrid(clean.times[n_train:]), clean.states[n_train:])
    return train_m, forecast_metrics(fc_pred, fc_true, reference=full_ranges_source)


def _run_seed(config: CaseConfig, bundle: DataBundle, seed: int) -> SeedOutcome:
    t_start = time.perf_counter()
    train_data, _ = split_prefix(bundle.noisy, config.split)
    n_train = len(train_data)
    result = train(
        config.model_kind,
        train_data,
        config.train_config.with_seed(seed),
        substeps=config.substeps,
    )
    state0 = bundle.noisy.states[0]
    try:
        pred = predict(
            config.model_kind,
            result.params,
            bundle.clean.grid,
            state0,
            substeps=config.substeps,
        )
        train_m, forecast_m = _window_metrics(pred, bundle.clean, n_train)
        diverged = result.diverged
    except Exception:
        nan = Metrics(np.full(bundle.clean.states.shape[1], np.nan), np.nan)
        train_m, forecast_m = nan, (None if n_train >= len(bundle.clean) else nan)
        diverged = True
    return SeedOutcome(
        seed=seed,
        params=result.params,
        loss_history=result.loss_history,
        train_nrmse=train_m,
        forecast_nrmse=forecast_m,
        diverged=diverged,
        wall_time=time.perf_counter() - t_start,
    )


def _seed_job(payload):
    config, bundle, seed = payload
    return seed, _run_seed(config, bundle, seed)


def _assemble_case(config: CaseConfig, outcomes: list[SeedOutcome]) -> CaseResult:
    outcomes = sorted(outcomes, key=lambda o: (o.selection_key, o.seed))
    best = outcomes[0]
    plausible = best.selection_key < config.plausibility_threshold
    summary = [
        {
            "seed": o.seed,
            "train_nrmse": float(o.train_nrmse.aggregate),
            "forecast_nrmse": (
                float(o.forecast_nrmse.aggregate) if o.forecast_nrmse is not None else None
            ),
            "diverged": bool(o.diverged),
        }
        for o in sorted(outcomes, key=lambda o: o.seed)
    ]
    return CaseResult(
        config=config,
        seed=best.seed,
        trained_params=best.params,
        loss_history=best.loss_history,
        train_nrmse=best.train_nrmse,
        forecast_nrmse=best.forecast_nrmse,
        plausible=bool(plausible),
        wall_time=sum(o.wall_time for o in outcomes),
        diverged=best.diverged,
        seed_outcomes=summary,
    )


def run_case(config: CaseConfig, bundle: DataBundle, jobs: int = 1) -> CaseResult:
    """Train best-of-``n_seeds`` and evaluate against the clean truth."""
    seeds = [config.train_config.seed + k for k in range(config.n_seeds)]
    payloads = [(config, bundle, s) for s in seeds]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = [o for _, o in pool.map(_seed_job, payloads)]
    else:
        outcomes = [_run_seed(config, bundle, s) for s in seeds]
    return _assemble_case(config, outcomes)


@dataclass
class BreakdownReport:
    fractions: list[float]
    plausibility: list[bool]
    aggregate_nrmse: list[float]
    breakdown_fraction: float | None
    anomalies: list[float]
    results: list[CaseResult]
    errors: list[str | None]

    def to_dict(self):
        return {
            "fractions": [float(f) for f in self.fractions],
            "plausibility": [bool(p) for p in self.plausibility],
            "aggregate_nrmse": [
                float(v) if np.isfinite(v) else None for v in self.aggregate_nrmse
            ],
            "breakdown_fraction": (
                float(self.breakdown_fraction)
                if self.breakdown_fraction is not None
                else None
            ),
            "anomalies": [float(f) for f in self.anomalies],
            "errors": self.errors,
            "cases": [r.to_dict() if r is not None else None for r in self.results],
        }


def breakdown_point(
    model_kind: ModelKind,
    noise: NoiseLevel,
    fraction_grid,
    base_config: CaseConfig,
    bundle: DataBundle,
    jobs: int = 1,
) -> BreakdownReport:
    """Sweep descending training fractions for the smallest plausible one.

    The returned breakdown fraction is the last entry of the leading
    plausible run of the grid, so every larger grid fraction is plausible
    too.  Plausible entries appearing below a failure are reported as
    anomalies rather than silently extending the run.  Per-case errors are
    recorded and the sweep continues.
    """
    fractions = [float(f) for f in fraction_grid]
    if not fractions:
        raise ValueError("fraction grid must be nonempty")
    if any(not 0 < f < 1 for f in fractions):
        raise ValueError("breakdown fractions must lie in (0, 1)")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValueError("fraction grid must be strictly descending")

    configs = [
        replace(base_config, model_kind=model_kind, noise=noise, split=SplitSpec(f))
        for f in fractions
    ]
    payloads = [
        (cfg, bundle, cfg.train_config.seed + k)
        for cfg in configs
        for k in range(cfg.n_seeds)
    ]

    results: list[CaseResult | None] = []
    errors: list[str | None] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            mapped = list(pool.map(_seed_job, payloads))
        k = 0
        for i, cfg in enumerate(configs):
            outs = [mapped[k + j][1] for j in range(cfg.n_seeds)]
            k += cfg.n_seeds
            try:
                results.append(_assemble_case(cfg, outs))
                errors.append(None)
            except Exception as exc:  # pragma: no cover - defensive
                results.append(None)
                errors.append(str(exc))
    else:
        for cfg in configs:
            try:
                results.append(run_case(cfg, bundle))
                errors.append(None)
            except Exception as exc:
                results.append(None)
                errors.append(f"{type(exc).__name__}: {exc}")

    plausibility = [bool(r.plausible) if r is not None else False for r in results]
    aggregates = []
    for r in results:
        if r is None:
            aggregates.append(np.nan)
        else:
            m = r.forecast_nrmse if r.forecast_nrmse is not None else r.train_nrmse
            aggregates.append(float(m.aggregate))

    breakdown = None
    for frac, ok in zip(fractions, plausibility):
        if not ok:
            break
        breakdown = frac
    first_failure = next(
        (i for i, ok in enumerate(plausibility) if not ok), len(fractions)
    )
    anomalies = [
        fractions[i] for i in range(first_failure, len(fractions)) if plausibility[i]
    ]

    return BreakdownReport(
        fractions=fractions,
        plausibility=plausibility,
        aggregate_nrmse=aggregates,
        breakdown_fraction=breakdown,
        anomalies=anomalies,
        results=results,
        errors=errors,
    )
