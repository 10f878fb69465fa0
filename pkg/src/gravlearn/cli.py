"""Command-line entry point: simulate, train, forecast, breakdown, sweep.

Configuration is one JSON document with sections ``system``, ``noise``,
``split``, ``model``, ``training``, ``evaluation``, ``sweep`` and
``output``.  Every section may be omitted; unknown keys are rejected by
name.  Selected command-line flags override their config-file fields.

Exit codes: 0 ok, 2 config error, 3 integration failure, 4 training
divergence, 5 checkpoint/config mismatch.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from .datagen import (
    DEFAULT_N_POINTS,
    DEFAULT_T_SPAN,
    NoiseLevel,
    SplitSpec,
    add_noise,
    default_initial_state,
    default_masses,
    energy_drift,
    generate_ground_truth,
    read_trajectory_csv,
    split_prefix,
    write_trajectory_csv,
)
from .dynamics import BodySpec
from .errors import ConfigError, GravlearnError, NonFiniteState, StepSizeUnderflow
from .experiments import (
    CaseConfig,
    DataBundle,
    DEFAULT_FRACTION_GRID,
    DEFAULT_PLAUSIBILITY_THRESHOLD,
    breakdown_point,
    forecast_metrics,
    run_case,
)
from .integrators import TimeGrid, Trajectory
from .models import (
    KIND_NODE,
    KIND_UDE,
    ModelKind,
    init_model_params,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from .neural import MLPSpec
from .optimizers import Stage1Config, Stage2Config, TrainConfig, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_DIVERGED = 4
EXIT_MISMATCH = 5

_MODEL_DEFAULTS = {
    KIND_NODE: {
        "activation": "tanh",
        "hidden_layers": 3,
        "units": 64,
        "stage1": {"optimizer": "adam", "lr": 1e-3, "epochs": 200, "weight_decay": 0.0},
        "stage2": {"max_iters": 200},
    },
    KIND_UDE: {
        "activation": "swish",
        "hidden_layers": 1,
        "units": 32,
        "stage1": {"optimizer": "adamw", "lr": 1e-3, "epochs": 700, "weight_decay": 0.01},
        "stage2": None,
    },
}

# Appendix search spaces; the selected values are the _MODEL_DEFAULTS above.
_SWEEP_DEFAULTS = {
    KIND_NODE: {
        "activation": ["relu", "tanh", "swish"],
        "hidden_layers": [2, 3, 4],
        "units": [16, 32, 64, 128],
        "lr": [1e-4, 1e-3, 1e-2],
        "epochs": [100, 200, 500],
        "stage2_iters": [100, 200, 500],
    },
    KIND_UDE: {
        "optimizer": ["adam", "adamw"],
        "activation": ["relu", "tanh", "swish"],
        "hidden_layers": [1, 2, 3],
        "units": [16, 32, 64],
        "lr": [1e-4, 1e-3, 1e-2],
        "epochs": [500, 700, 1000],
    },
}


def _default_config() -> dict:
    return {
        "system": {
            "masses": [float(m) for m in default_masses()],
            "gravitational_constant": 1.0,
            "spatial_dim": 3,
            "initial_state": [float(v) for v in default_initial_state()],
            "t_span": list(DEFAULT_T_SPAN),
            "n_points": DEFAULT_N_POINTS,
        },
        "noise": {"fraction": 0.0, "seed": 1000},
        "split": {"train_fraction": 1.0},
        "model": {"kind": KIND_UDE, "layer_sizes": None, "activation": None, "seed": 0},
        "training": {"stage1": None, "stage2": "default", "substeps": 4, "seed": 0},
        "evaluation": {
            "plausibility_threshold": DEFAULT_PLAUSIBILITY_THRESHOLD,
            "n_seeds": 3,
            "fraction_grid": list(DEFAULT_FRACTION_GRID),
        },
        "sweep": None,
        "output": {"directory": "runs"},
    }


def _merge_section(name, defaults, user):
    if user is None:
        return dict(defaults) if isinstance(defaults, dict) else defaults
    if not isinstance(user, dict):
        raise ConfigError(f"section {name!r} must be a JSON object")
    merged = dict(defaults) if isinstance(defaults, dict) else {}
    for key, value in user.items():
        if key not in merged and name != "sweep":
            raise ConfigError(f"unknown key {name}.{key}")
        merged[key] = value
    return merged


def load_config(path, overrides=None) -> dict:
    """Read, validate and default-fill a config file; raises ConfigError."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        user = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")

    defaults = _default_config()
    for key in user:
        if key not in defaults:
            raise ConfigError(f"unknown key {key}")

    cfg = {}
    for section, section_defaults in defaults.items():
        raw = user.get(section)
        if section == "training":
            cfg[section] = _merge_training(raw)
        elif section == "sweep":
            cfg[section] = raw  # validated later against the model kind
        else:
            cfg[section] = _merge_section(section, section_defaults, raw)

    if overrides:
        _apply_overrides(cfg, overrides)
    _validate_config(cfg)
    return cfg


def _merge_training(raw):
    merged = {"stage1": None, "stage2": "default", "substeps": 4, "seed": 0}
    if raw is None:
        return merged
    if not isinstance(raw, dict):
        raise ConfigError("section 'training' must be a JSON object")
    for key, value in raw.items():
        if key not in merged:
            raise ConfigError(f"unknown key training.{key}")
        merged[key] = value
    if isinstance(merged["stage1"], dict):
        for key in merged["stage1"]:
            if key not in ("optimizer", "lr", "epochs", "weight_decay"):
                raise ConfigError(f"unknown key training.stage1.{key}")
    if isinstance(merged["stage2"], dict):
        for key in merged["stage2"]:
            if key != "max_iters":
                raise ConfigError(f"unknown key training.stage2.{key}")
    return merged


def _apply_overrides(cfg, overrides):
    if overrides.get("model") is not None:
        cfg["model"]["kind"] = overrides["model"]
    if overrides.get("noise") is not None:
        cfg["noise"]["fraction"] = overrides["noise"]
    if overrides.get("split") is not None:
        cfg["split"]["train_fraction"] = overrides["split"]
    if overrides.get("seed") is not None:
        cfg["training"]["seed"] = overrides["seed"]
        cfg["model"]["seed"] = overrides["seed"]
    if overrides.get("out") is not None:
        cfg["output"]["directory"] = overrides["out"]
    if overrides.get("jobs") is not None:
        cfg["evaluation"]["jobs"] = overrides["jobs"]


def _validate_config(cfg):
    sys_cfg = cfg["system"]
    try:
        spec = BodySpec(
            masses=np.asarray(sys_cfg["masses"], dtype=float),
            gravitational_constant=float(sys_cfg["gravitational_constant"]),
            spatial_dim=int(sys_cfg["spatial_dim"]),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"system: {exc}") from exc
    state = np.asarray(sys_cfg["initial_state"], dtype=float)
    if state.size != spec.state_size:
        raise ConfigError(
            f"system.initial_state has {state.size} entries, expected {spec.state_size}"
        )
    t_span = sys_cfg["t_span"]
    if len(t_span) != 2 or not float(t_span[1]) > float(t_span[0]):
        raise ConfigError("system.t_span must be [t0, t1] with t1 > t0")
    if int(sys_cfg["n_points"]) < 2:
        raise ConfigError("system.n_points must be >= 2")
    if cfg["model"]["kind"] not in (KIND_NODE, KIND_UDE):
        raise ConfigError(f"model.kind must be 'node' or 'ude', got {cfg['model']['kind']!r}")
    if float(cfg["noise"]["fraction"]) < 0:
        raise ConfigError("noise.fraction must be >= 0")
    frac = float(cfg["split"]["train_fraction"])
    if not 0 < frac <= 1:
        raise ConfigError("split.train_fraction must lie in (0, 1]")
    if float(cfg["evaluation"]["plausibility_threshold"]) <= 0:
        raise ConfigError("evaluation.plausibility_threshold must be positive")
    if int(cfg["evaluation"]["n_seeds"]) < 1:
        raise ConfigError("evaluation.n_seeds must be >= 1")


def body_spec_from(cfg) -> BodySpec:
    sys_cfg = cfg["system"]
    return BodySpec(
        masses=np.asarray(sys_cfg["masses"], dtype=float),
        gravitational_constant=float(sys_cfg["gravitational_constant"]),
        spatial_dim=int(sys_cfg["spatial_dim"]),
    )


def model_from(cfg) -> ModelKind:
    spec = body_spec_from(cfg)
    m_cfg = cfg["model"]
    kind = m_cfg["kind"]
    defaults = _MODEL_DEFAULTS[kind]
    activation = m_cfg["activation"] or defaults["activation"]
    if m_cfg["layer_sizes"] is not None:
        sizes = tuple(int(s) for s in m_cfg["layer_sizes"])
    else:
        d = spec.spatial_dim
        in_size = spec.state_size if kind == KIND_NODE else 2 * d + 2
        out_size = spec.state_size if kind == KIND_NODE else d
        sizes = (in_size,) + (defaults["units"],) * defaults["hidden_layers"] + (out_size,)
    try:
        mlp = MLPSpec(sizes, activation, int(m_cfg["seed"]))
        return ModelKind(kind, mlp, spec)
    except (ValueError, GravlearnError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def train_config_from(cfg) -> TrainConfig:
    kind = cfg["model"]["kind"]
    defaults = _MODEL_DEFAULTS[kind]
    t_cfg = cfg["training"]
    stage1_raw = t_cfg["stage1"] if t_cfg["stage1"] is not None else defaults["stage1"]
    stage1_merged = dict(defaults["stage1"])
    stage1_merged.update(stage1_raw)
    try:
        stage1 = Stage1Config(
            optimizer=stage1_merged["optimizer"],
            lr=float(stage1_merged["lr"]),
            epochs=int(stage1_merged["epochs"]),
            weight_decay=float(stage1_merged["weight_decay"]),
        )
        stage2_raw = t_cfg["stage2"]
        if stage2_raw == "default":
            stage2_raw = defaults["stage2"]
        stage2 = (
            Stage2Config(max_iters=int(stage2_raw["max_iters"]))
            if isinstance(stage2_raw, dict)
            else None
        )
        return TrainConfig(stage1=stage1, stage2=stage2, seed=int(t_cfg["seed"]))
    except ValueError as exc:
        raise ConfigError(f"training: {exc}") from exc


def _truth_path(out_dir):
    return out_dir / "truth.csv"


def _noisy_path(out_dir, fraction):
    return out_dir / f"noisy_{fraction:g}.csv"


def _config_echo(cfg) -> dict:
    echo = json.loads(json.dumps(cfg))
    return echo


def _generate_datasets(cfg, out_dir):
    spec = body_spec_from(cfg)
    sys_cfg = cfg["system"]
    truth = generate_ground_truth(
        spec,
        np.asarray(sys_cfg["initial_state"], dtype=float),
        t_span=tuple(float(t) for t in sys_cfg["t_span"]),
        n_points=int(sys_cfg["n_points"]),
    )
    noise = NoiseLevel(float(cfg["noise"]["fraction"]), int(cfg["noise"]["seed"]))
    noisy = add_noise(truth, noise)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = _config_echo(cfg)
    write_trajectory_csv(_truth_path(out_dir), truth, spec, config_echo=echo)
    write_trajectory_csv(_noisy_path(out_dir, noise.fraction), noisy, spec, config_echo=echo)
    return spec, truth, noisy


def cmd_simulate(cfg) -> int:
    out_dir = Path(cfg["output"]["directory"])
    try:
        spec, truth, _ = _generate_datasets(cfg, out_dir)
    except (NonFiniteState, StepSizeUnderflow, GravlearnError) as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    drift = energy_drift(truth, spec)
    print(f"wrote {_truth_path(out_dir)} ({len(truth)} points)")
    print(f"relative energy drift: {drift:.3e}")
    return EXIT_OK


def _load_datasets(cfg, out_dir, generate: bool):
    truth_path = _truth_path(out_dir)
    noisy_path = _noisy_path(out_dir, float(cfg["noise"]["fraction"]))
    if generate or not (truth_path.exists() and noisy_path.exists()):
        if not generate and not truth_path.exists():
            raise ConfigError(
                f"dataset {truth_path} not found; run simulate or pass --generate"
            )
        if not generate:
            raise ConfigError(
                f"dataset {noisy_path} not found; run simulate or pass --generate"
            )
        spec, truth, noisy = _generate_datasets(cfg, out_dir)
        return spec, truth, noisy
    spec = body_spec_from(cfg)
    truth, _, _ = read_trajectory_csv(truth_path)
    noisy, _, _ = read_trajectory_csv(noisy_path)
    return spec, truth, noisy


def cmd_train(cfg, generate: bool = False) -> int:
    out_dir = Path(cfg["output"]["directory"])
    spec, truth, noisy = _load_datasets(cfg, out_dir, generate)
    model = model_from(cfg)
    train_cfg = train_config_from(cfg)
    substeps = int(cfg["training"]["substeps"])
    split = SplitSpec(float(cfg["split"]["train_fraction"]))
    train_data, _ = split_prefix(noisy, split)

    result = train(model, train_data, train_cfg, substeps=substeps)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint = out_dir / "model.json"
    save_checkpoint(checkpoint, model, result.params)

    history_path = out_dir / "loss_history.csv"
    with history_path.open("w", newline="") as fh:
        fh.write(f"# config: {json.dumps(_config_echo(cfg))}\n")
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for i, loss in enumerate(result.loss_history):
            writer.writerow([i, f"{loss:.17g}"])

    n_train = len(train_data)
    pred = predict(model, result.params, train_data.grid, noisy.states[0], substeps=substeps)
    clean_train = Trajectory(TimeGrid(truth.times[:n_train]), truth.states[:n_train])
    metrics = forecast_metrics(pred, clean_train, reference=truth)
    print(f"wrote {checkpoint}")
    print(f"final train nRMSE: {metrics.aggregate:.6g}")
    if result.diverged:
        print("training diverged; checkpoint holds best-so-far parameters", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _checkpoint_matches(cfg, model_loaded: ModelKind) -> bool:
    expected = model_from(cfg)
    return (
        model_loaded.kind == expected.kind
        and model_loaded.mlp_spec.layer_sizes == expected.mlp_spec.layer_sizes
        and model_loaded.mlp_spec.hidden_activation == expected.mlp_spec.hidden_activation
        and model_loaded.body_spec.state_size == expected.body_spec.state_size
    )


def cmd_forecast(cfg, checkpoint_path=None) -> int:
    out_dir = Path(cfg["output"]["directory"])
    checkpoint_path = Path(checkpoint_path or out_dir / "model.json")
    if not checkpoint_path.exists():
        raise ConfigError(f"checkpoint not found: {checkpoint_path}")
    model, params = load_checkpoint(checkpoint_path)
    if not _checkpoint_matches(cfg, model):
        print(
            f"checkpoint {checkpoint_path} does not match the config's model section",
            file=sys.stderr,
        )
        return EXIT_MISMATCH
    spec, truth, noisy = _load_datasets(cfg, out_dir, generate=False)
    substeps = int(cfg["training"]["substeps"])
    pred = predict(model, params, truth.grid, noisy.states[0], substeps=substeps)
    write_trajectory_csv(out_dir / "prediction.csv", pred, spec, config_echo=_config_echo(cfg))

    split = SplitSpec(float(cfg["split"]["train_fraction"]))
    n_train = int(np.ceil(split.train_fraction * len(truth)))
    windows = {}
    train_pred = Trajectory(TimeGrid(pred.times[:n_train]), pred.states[:n_train])
    train_true = Trajectory(TimeGrid(truth.times[:n_train]), truth.states[:n_train])
    windows["train_window"] = forecast_metrics(train_pred, train_true, reference=truth).to_dict()
    if n_train < len(truth):
        fc_pred = Trajectory(TimeGrid(pred.times[n_train:]), pred.states[n_train:])
        fc_true = Trajectory(TimeGrid(truth.times[n_train:]), truth.states[n_train:])
        windows["forecast_window"] = forecast_metrics(fc_pred, fc_true, reference=truth).to_dict()
    payload = {"config_echo": _config_echo(cfg), **windows}
    (out_dir / "metrics.json").write_text(json.dumps(payload, indent=2))
    print(f"wrote {out_dir / 'prediction.csv'} and {out_dir / 'metrics.json'}")
    for name, block in windows.items():
        print(f"{name} aggregate nRMSE: {block['aggregate']:.6g}")
    return EXIT_OK


def _case_config(cfg, model: ModelKind) -> CaseConfig:
    return CaseConfig(
        model_kind=model,
        noise=NoiseLevel(float(cfg["noise"]["fraction"]), int(cfg["noise"]["seed"])),
        split=SplitSpec(float(cfg["split"]["train_fraction"])),
        train_config=train_config_from(cfg),
        plausibility_threshold=float(cfg["evaluation"]["plausibility_threshold"]),
        n_seeds=int(cfg["evaluation"]["n_seeds"]),
        substeps=int(cfg["training"]["substeps"]),
    )


def cmd_breakdown(cfg) -> int:
    out_dir = Path(cfg["output"]["directory"])
    fractions = cfg["evaluation"]["fraction_grid"]
    if not fractions:
        raise ConfigError("evaluation.fraction_grid must be nonempty")
    spec, truth, noisy = _load_datasets(cfg, out_dir, generate=True)
    model = model_from(cfg)
    case = _case_config(cfg, model)
    bundle = DataBundle(clean=truth, noisy=noisy)
    jobs = int(cfg["evaluation"].get("jobs", 1))
    report = breakdown_point(model, case.noise, fractions, case, bundle, jobs=jobs)
    payload = {"config_echo": _config_echo(cfg), **report.to_dict()}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "breakdown.json").write_text(json.dumps(payload, indent=2))
    frac = report.breakdown_fraction
    print(f"wrote {out_dir / 'breakdown.json'}")
    print(f"breakdown fraction: {frac if frac is not None else 'not found'}")
    return EXIT_OK


def _sweep_space(cfg) -> dict:
    kind = cfg["model"]["kind"]
    space = dict(_SWEEP_DEFAULTS[kind])
    user = cfg.get("sweep")
    if user is not None:
        if not isinstance(user, dict):
            raise ConfigError("section 'sweep' must be a JSON object")
        for key, values in user.items():
            if key not in space:
                raise ConfigError(f"unknown key sweep.{key}")
            if not isinstance(values, list) or not values:
                raise ConfigError(f"sweep.{key} must be a nonempty list")
            space[key] = values
    return space


def cmd_sweep(cfg) -> int:
    out_dir = Path(cfg["output"]["directory"])
    spec, truth, noisy = _load_datasets(cfg, out_dir, generate=True)
    kind = cfg["model"]["kind"]
    space = _sweep_space(cfg)
    split = SplitSpec(float(cfg["split"]["train_fraction"]))
    substeps = int(cfg["training"]["substeps"])
    train_data, _ = split_prefix(noisy, split)
    n_train = len(train_data)

    keys = list(space.keys())
    rows = []
    for combo in itertools.product(*(space[k] for k in keys)):
        combo_cfg = dict(zip(keys, combo))
        d = spec.spatial_dim
        in_size = spec.state_size if kind == KIND_NODE else 2 * d + 2
        out_size = spec.state_size if kind == KIND_NODE else d
        sizes = (
            (in_size,)
            + (int(combo_cfg["units"]),) * int(combo_cfg["hidden_layers"])
            + (out_size,)
        )
        stage1 = Stage1Config(
            optimizer=combo_cfg.get("optimizer", _MODEL_DEFAULTS[kind]["stage1"]["optimizer"]),
            lr=float(combo_cfg["lr"]),
            epochs=int(combo_cfg["epochs"]),
            weight_decay=float(_MODEL_DEFAULTS[kind]["stage1"]["weight_decay"]),
        )
        stage2 = (
            Stage2Config(max_iters=int(combo_cfg["stage2_iters"]))
            if "stage2_iters" in combo_cfg
            else None
        )
        t_config = TrainConfig(stage1=stage1, stage2=stage2, seed=int(cfg["training"]["seed"]))
        row = dict(zip(keys, combo))
        try:
            model = ModelKind(kind, MLPSpec(sizes, combo_cfg["activation"], t_config.seed), spec)
            result = train(model, train_data, t_config, substeps=substeps)
            pred = predict(model, result.params, truth.grid, noisy.states[0], substeps=substeps)
            train_pred = Trajectory(TimeGrid(pred.times[:n_train]), pred.states[:n_train])
            train_true = Trajectory(TimeGrid(truth.times[:n_train]), truth.states[:n_train])
            row["final_loss"] = result.final_loss
            row["train_nrmse"] = forecast_metrics(train_pred, train_true, reference=truth).aggregate
            if n_train < len(truth):
                fc_pred = Trajectory(TimeGrid(pred.times[n_train:]), pred.states[n_train:])
                fc_true = Trajectory(TimeGrid(truth.times[n_train:]), truth.states[n_train:])
                row["forecast_nrmse"] = forecast_metrics(
                    fc_pred, fc_true, reference=truth
                ).aggregate
            else:
                row["forecast_nrmse"] = ""
            row["failed"] = int(result.diverged)
        except GravlearnError as exc:
            row.update(final_loss="", train_nrmse="", forecast_nrmse="", failed=1)
            row["error"] = str(exc)
        rows.append(row)

    def row_key(r):
        if r.get("failed"):
            return np.inf
        fc = r.get("forecast_nrmse")
        return fc if isinstance(fc, float) else r.get("train_nrmse", np.inf)

    best_idx = min(range(len(rows)), key=lambda i: row_key(rows[i]))
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep_path = out_dir / "sweep.csv"
    fieldnames = keys + ["final_loss", "train_nrmse", "forecast_nrmse", "failed", "best"]
    with sweep_path.open("w", newline="") as fh:
        fh.write(f"# config: {json.dumps(_config_echo(cfg))}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for i, row in enumerate(rows):
            row = dict(row)
            row["best"] = int(i == best_idx)
            for key in ("final_loss", "train_nrmse", "forecast_nrmse"):
                if isinstance(row.get(key), float):
                    row[key] = f"{row[key]:.17g}"
            writer.writerow(row)
    print(f"wrote {sweep_path} ({len(rows)} rows)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gravlearn",
        description="n-body trajectory learning: simulate, train, forecast, sweep",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "train", "forecast", "breakdown", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--model", choices=[KIND_NODE, KIND_UDE], help="override model.kind")
        p.add_argument("--noise", type=float, help="override noise.fraction")
        p.add_argument("--split", type=float, help="override split.train_fraction")
        p.add_argument("--seed", type=int, help="override training/model seed")
        p.add_argument("--jobs", type=int, help="parallel jobs for sweeps")
        p.add_argument("--out", help="override output.directory")
        if name == "train":
            p.add_argument(
                "--generate", action="store_true", help="generate datasets on the fly"
            )
        if name == "forecast":
            p.add_argument("--checkpoint", help="path to model.json (default: <out>/model.json)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "model": args.model,
        "noise": args.noise,
        "split": args.split,
        "seed": args.seed,
        "jobs": args.jobs,
        "out": args.out,
    }
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "train":
            return cmd_train(cfg, generate=args.generate)
        if args.command == "forecast":
            return cmd_forecast(cfg, checkpoint_path=args.checkpoint)
        if args.command == "breakdown":
            return cmd_breakdown(cfg)
        return cmd_sweep(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteState, StepSizeUnderflow) as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
