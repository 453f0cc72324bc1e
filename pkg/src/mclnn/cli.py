"""Command-line surface: dataset generation, training, forward simulation,
conservation evaluation, architecture sweeps, interpretability export.

Configuration resolves in three layers: built-in defaults, then a flat
``key = value`` config file (``--config``), then command-line flags. Config
keys mirror the benchmark parameter names (dt, stride, runs, samples, lr,
layers, epochs, seed, mass, k, q0, G, ...); unknown keys are rejected.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from .errors import (
    ConfigurationError,
    ContractViolationError,
    NumericalFailureError,
    UnsupportedOperationError,
)
from . import evaluation, systems, training
from .lagrangian import Trajectory, read_trajectory_csv, write_trajectory_csv
from .nn import load_checkpoint, save_checkpoint, adam_init
from .systems import (
    DatasetConfig,
    SystemSpec,
    initial_conditions,
    perturb_initial_conditions,
    scaled_initial_conditions,
)
from .training import TrainConfig, train_baseline, train_mclnn, training_distance_values

# --- configuration ---------------------------------------------------------------

_DEFAULTS = {
    "task": "linear_spring",
    "model": "mclnn",
    "dt": 0.01,
    "stride": 10,
    "runs": 20,            # points per trajectory
    "samples": 100,        # number of trajectories
    "seed": 100,
    "mass": 1.0,
    "k": 1.0,
    "q0": 1.0,
    "G": 1.0,
    "lr": 1.0e-3,
    "layers": [10, 10],
    "epochs": 100000,
    "loss_threshold": 1.0e-8,
    "batch": "full",
    "perturbation": 0.1,
    "n_particles": None,   # task default when unset
    "records": 100,
    "baseline_samples": 10000,
    "baseline_batch": 1000,
    "validation_fraction": 0.2,
    "checkpoint_interval": 1000,
    "r_min": 0.5,
    "r_max": 3.0,
    "n_points": 100,
}

_INT_KEYS = {"stride", "runs", "samples", "seed", "epochs", "records",
             "baseline_samples", "baseline_batch", "checkpoint_interval",
             "n_particles", "n_points"}
_FLOAT_KEYS = {"dt", "mass", "k", "q0", "G", "lr", "loss_threshold",
               "perturbation", "validation_fraction", "r_min", "r_max"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "layers":
        inner = raw.strip("[]")
        try:
            return [int(p) for p in inner.replace(";", ",").split(",") if p.strip()]
        except ValueError:
            raise ConfigurationError(f"layers must be integers, got {raw!r}")
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigurationError(f"{key} must be an integer, got {raw!r}")
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigurationError(f"{key} must be a number, got {raw!r}")
    if key == "batch" and raw not in ("full", "per-trajectory"):
        try:
            return int(raw)
        except ValueError:
            raise ConfigurationError(
                f"batch must be 'full', 'per-trajectory' or an int, got {raw!r}")
    return raw


def read_config_file(path: str) -> dict:
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', "
                                         f"got {line.rstrip()!r}")
            key, raw = (part.strip() for part in text.split("=", 1))
            if key not in _DEFAULTS:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    config = dict(_DEFAULTS)
    if getattr(args, "config", None):
        config.update(read_config_file(args.config))
    for flag, key in (("task", "task"), ("model", "model"), ("seed", "seed"),
                      ("epochs", "epochs"), ("n_particles", "n_particles"),
                      ("records", "records")):
        value = getattr(args, flag, None)
        if value is not None:
            config[key] = value
    if config["task"] not in systems.TASKS:
        raise ConfigurationError(f"unknown task {config['task']!r}")
    if config["model"] not in training.MODEL_KINDS:
        raise ConfigurationError(f"unknown model {config['model']!r}")
    return config


def _system_spec(config: dict, n_particles: int | None = None) -> SystemSpec:
    n = n_particles or config["n_particles"] \
        or systems.default_spec(config["task"]).n_particles
    return SystemSpec(config["task"], int(n), k=config["k"], q0=config["q0"],
                      G=config["G"], masses=np.full(int(n), config["mass"]))


def _dataset_config(config: dict) -> DatasetConfig:
    return DatasetConfig(n_trajectories=config["samples"],
                         points_per_trajectory=config["runs"],
                         dt=config["dt"], stride=config["stride"],
                         seed=config["seed"], perturbation=config["perturbation"])


def _train_config(config: dict) -> TrainConfig:
    return TrainConfig(learning_rate=config["lr"], epochs=config["epochs"],
                       loss_threshold=config["loss_threshold"],
                       batch=config["batch"], seed=config["seed"],
                       model_kind=config["model"],
                       hidden_layers=tuple(config["layers"]),
                       validation_fraction=config["validation_fraction"],
                       baseline_batch_size=config["baseline_batch"])


# --- shared I/O helpers --------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _prepare_out_dir(path: str, force: bool) -> None:
    if os.path.exists(path) and os.listdir(path) and not force:
        raise OSError(f"output directory {path!r} is not empty; pass --force to reuse")
    os.makedirs(path, exist_ok=True)


def dataset_content_hash(directory: str) -> str:
    digest = hashlib.sha256()
    for name in sorted(os.listdir(directory)):
        if name.endswith(".csv"):
            digest.update(name.encode())
            with open(os.path.join(directory, name), "rb") as fh:
                digest.update(fh.read())
    return digest.hexdigest()


ACCEL_HEADER = ["sample", "particle", "qx", "qy", "qz", "vx", "vy", "vz",
                "ax", "ay", "az"]


def _write_accel_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ACCEL_HEADER)
        for s, (q, v, a) in enumerate(samples):
            for i in range(q.shape[0]):
                writer.writerow([s, i] + [_fmt(x) for x in (*q[i], *v[i], *a[i])])


def _read_accel_samples_csv(path):
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ACCEL_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ContractViolationError(f"{path}: missing columns {missing}")
        for row in reader:
            entry = rows.setdefault(int(row["sample"]), {})
            entry[int(row["particle"])] = row
    samples = []
    for s in sorted(rows):
        particles = rows[s]
        n = len(particles)
        q = np.array([[float(particles[i][c]) for c in ("qx", "qy", "qz")]
                      for i in range(n)])
        v = np.array([[float(particles[i][c]) for c in ("vx", "vy", "vz")]
                      for i in range(n)])
        a = np.array([[float(particles[i][c]) for c in ("ax", "ay", "az")]
                      for i in range(n)])
        samples.append((q, v, a))
    return samples


def _load_dataset_dir(path: str):
    manifest_path = os.path.join(path, "manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    return manifest


def _spec_to_doc(spec: SystemSpec) -> dict:
    return {"kind": spec.kind, "n_particles": spec.n_particles, "k": spec.k,
            "q0": spec.q0, "G": spec.G, "masses": [float(m) for m in spec.masses]}


def _spec_from_doc(doc: dict) -> SystemSpec:
    return SystemSpec(doc["kind"], doc["n_particles"], k=doc["k"], q0=doc["q0"],
                      G=doc["G"], masses=np.asarray(doc["masses"]))


# --- commands -------------------------------------------------------------------------


def cmd_generate(args) -> int:
    config = resolve_config(args)
    spec = _system_spec(config)
    _prepare_out_dir(args.out, args.force)
    if config["model"] == "baseline":
        samples = systems.sample_acceleration_dataset(
            spec, n_samples=config["baseline_samples"], seed=config["seed"],
            config=_dataset_config(config))
        _write_accel_samples_csv(os.path.join(args.out, "samples.csv"), samples)
        _write_json(os.path.join(args.out, "manifest.json"), {
            "command": "generate",
            "kind": "acceleration",
            "task": config["task"],
            "spec": _spec_to_doc(spec),
            "config": {k: config[k] for k in ("baseline_samples", "seed", "dt",
                                              "stride", "runs", "perturbation")},
            "n_samples": len(samples),
        })
        print(f"wrote {len(samples)} acceleration samples to {args.out}")
        return 0

    ds_config = _dataset_config(config)
    result = systems.generate_dataset(spec, ds_config)
    files = []
    for idx, traj in enumerate(result.trajectories):
        name = f"traj_{idx:04d}.csv"
        write_trajectory_csv(os.path.join(args.out, name), traj)
        files.append({"file": name, "seed": result.seeds[idx]})
    momentum_drift = 0.0
    for traj in result.trajectories:
        from .lagrangian import linear_momentum
        p = np.array([linear_momentum(s) for s in traj.states])
        momentum_drift = max(momentum_drift, float(np.abs(p - p[0]).max()))
    _write_json(os.path.join(args.out, "manifest.json"), {
        "command": "generate",
        "kind": "trajectory",
        "task": config["task"],
        "spec": _spec_to_doc(spec),
        "config": {"n_trajectories": ds_config.n_trajectories,
                   "points_per_trajectory": ds_config.points_per_trajectory,
                   "dt": ds_config.dt, "stride": ds_config.stride,
                   "seed": ds_config.seed, "perturbation": ds_config.perturbation},
        "trajectories": files,
        "resampled": result.resampled,
        "max_linear_momentum_drift": momentum_drift,
    })
    print(f"wrote {len(files)} trajectories "
          f"({ds_config.points_per_trajectory} records each) to {args.out}; "
          f"max linear-momentum drift {momentum_drift:.3e}")
    return 0


def _load_trajectories(data_dir: str, manifest: dict):
    cfg = manifest["config"]
    masses = manifest["spec"]["masses"]
    trajectories = []
    for entry in manifest["trajectories"]:
        trajectories.append(read_trajectory_csv(
            os.path.join(data_dir, entry["file"]),
            recorded_dt=cfg["dt"] * cfg["stride"], substeps=cfg["stride"],
            masses=masses))
    return trajectories


def cmd_train(args) -> int:
    config = resolve_config(args)
    manifest = _load_dataset_dir(args.data)
    if manifest["task"] != config["task"]:
        raise ConfigurationError(
            f"dataset task {manifest['task']!r} does not match requested task "
            f"{config['task']!r}")
    spec = _spec_from_doc(manifest["spec"])
    train_config = _train_config(config)
    _prepare_out_dir(args.out, args.force)

    if config["model"] == "baseline":
        if manifest.get("kind") != "acceleration":
            raise ConfigurationError(
                "the baseline trains on acceleration samples; generate the dataset "
                "with --model baseline (got a trajectory dataset)")
        samples = _read_accel_samples_csv(os.path.join(args.data, "samples.csv"))
        params, report = train_baseline(spec, samples, train_config)
        distance_clusters = []
        extra_meta = {}
        # held-out force fidelity snapshot for the scatter interface
        train_idx, val_idx = training.split_indices(
            len(samples), train_config.validation_fraction, train_config.seed)
        if len(val_idx):
            import jax.numpy as jnp
            from .training import baseline_acceleration_from_arrays
            rows = []
            for i in val_idx:
                q, v, a_true = samples[i]
                a_pred = np.asarray(baseline_acceleration_from_arrays(
                    params, jnp.asarray(q), jnp.asarray(spec.masses)))
                rows.extend(zip(a_true.ravel(), a_pred.ravel()))
            with open(os.path.join(args.out, "force_scatter.csv"), "w",
                      newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["a_true", "a_pred"])
                for t, p in rows:
                    writer.writerow([_fmt(t), _fmt(p)])
            a_t = np.array([t for t, _ in rows])
            a_p = np.array([p for _, p in rows])
            slope = float(np.polyfit(a_t, a_p, 1)[0]) if a_t.std() > 0 else float("nan")
            extra_meta["heldout_force_slope"] = slope
    else:
        if manifest.get("kind") != "trajectory":
            raise ConfigurationError("the pairwise model trains on trajectory "
                                     "datasets (got an acceleration dataset)")
        trajectories = _load_trajectories(args.data, manifest)
        params, report = train_mclnn(spec, trajectories, train_config)
        train_idx, _ = training.split_indices(
            len(trajectories), train_config.validation_fraction, train_config.seed)
        values = training_distance_values([trajectories[i] for i in train_idx])
        distance_clusters = evaluation.cluster_intervals(values)
        extra_meta = {}

    metadata = {
        "task": config["task"],
        "model_kind": config["model"],
        "seed": train_config.seed,
        "epoch": report.epochs_run,
        "train_loss": report.final_train_loss,
        "val_loss": report.final_val_loss,
        "stop_reason": report.stop_reason,
        "system": _spec_to_doc(spec),
        "hidden_layers": list(train_config.hidden_layers),
        "training_distance_clusters": [list(c) for c in distance_clusters],
        **extra_meta,
    }
    save_checkpoint(os.path.join(args.out, "checkpoint.json"), params,
                    metadata=metadata)
    with open(os.path.join(args.out, "loss_history.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for e, (tl, vl) in enumerate(zip(report.loss_history, report.val_history),
                                     start=1):
            writer.writerow([e, _fmt(tl), _fmt(vl)])
    _write_json(os.path.join(args.out, "run_manifest.json"), {
        "command": "train",
        "config": {k: config[k] for k in ("task", "model", "lr", "layers", "epochs",
                                          "loss_threshold", "batch", "seed",
                                          "validation_fraction", "baseline_batch")},
        "dataset": {"path": os.path.abspath(args.data),
                    "content_hash": dataset_content_hash(args.data)},
        "stop_reason": report.stop_reason,
        "epochs_run": report.epochs_run,
        "final_train_loss": report.final_train_loss,
        "final_val_loss": report.final_val_loss,
        "wall_clock_s": report.wall_clock_s,
        "diagnostic": report.diagnostic,
    })
    print(f"{config['model']} on {config['task']}: "
          f"train loss {report.final_train_loss:.3e}, "
          f"val loss {report.final_val_loss:.3e}, "
          f"stopped by {report.stop_reason} after {report.epochs_run} epochs "
          f"({report.wall_clock_s:.1f}s)")
    if report.stop_reason == "numerical_failure":
        print(f"numerical failure: {report.diagnostic}", file=sys.stderr)
        return 3
    return 0


def _initial_state_for_eval(task: str, n_particles: int, seed: int,
                            perturbation: float):
    base = initial_conditions(task)
    if n_particles != base.n_particles:
        base = scaled_initial_conditions(task, n_particles)
    return perturb_initial_conditions(base, seed, perturbation)


def cmd_simulate(args) -> int:
    config = resolve_config(args)
    params, _, metadata = load_checkpoint(args.checkpoint)
    task = metadata["task"]
    model_kind = metadata["model_kind"]
    spec = _spec_from_doc(metadata["system"])
    n_particles = int(args.n_particles or spec.n_particles)
    if n_particles != spec.n_particles:
        if model_kind == "baseline":
            raise UnsupportedOperationError(
                "the baseline feeds all particle positions to one network and "
                f"cannot simulate {n_particles} particles (trained on "
                f"{spec.n_particles})")
        spec = spec.with_particles(n_particles)
    _prepare_out_dir(args.out, args.force)
    state0 = _initial_state_for_eval(task, n_particles, config["seed"],
                                     config["perturbation"])
    if config["records"] == 1:
        # trivial run: the initial state is the whole trajectory
        meta = {"task": task, "dt": config["dt"],
                "recorded_dt": config["dt"] * config["stride"],
                "substeps": config["stride"], "seed": config["seed"]}
        traj = Trajectory((state0,), config["dt"] * config["stride"],
                          config["stride"])
        for name in ("model_trajectory.csv", "true_trajectory.csv"):
            write_trajectory_csv(os.path.join(args.out, name), traj, metadata=meta)
        _write_json(os.path.join(args.out, "manifest.json"), {
            "command": "simulate", "checkpoint": os.path.abspath(args.checkpoint),
            "task": task, "model_kind": model_kind, "n_particles": n_particles,
            "records": 1, "seed": config["seed"],
        })
        print(f"{model_kind} on {task}: single-record run, nothing to integrate")
        return 0
    report = evaluation.evaluate_forward(params, model_kind, spec, state0,
                                         n_records=config["records"],
                                         substeps=config["stride"],
                                         dt=config["dt"])
    meta = {"task": task, "dt": config["dt"], "recorded_dt":
            config["dt"] * config["stride"], "substeps": config["stride"],
            "seed": config["seed"]}
    write_trajectory_csv(os.path.join(args.out, "model_trajectory.csv"),
                         report.model_trajectory, metadata=meta)
    write_trajectory_csv(os.path.join(args.out, "true_trajectory.csv"),
                         report.true_trajectory, metadata=meta)
    evaluation.write_report_csv(os.path.join(args.out, "report.csv"), report)
    _write_json(os.path.join(args.out, "manifest.json"), {
        "command": "simulate",
        "checkpoint": os.path.abspath(args.checkpoint),
        "task": task, "model_kind": model_kind, "n_particles": n_particles,
        "records": config["records"], "dt": config["dt"],
        "stride": config["stride"], "seed": config["seed"],
        "perturbation": config["perturbation"],
        "gauge_shift": report.gauge_shift,
        "diverged_at": report.diverged_at,
        "maes": report.maes,
    })
    status = (f"diverged at record {report.diverged_at}"
              if report.diverged_at is not None else "completed")
    print(f"{model_kind} on {task} ({n_particles} particles): {status}; "
          + ", ".join(f"{k} MAE {v:.3e}" for k, v in report.maes.items()
                      if not k.endswith("_raw")))
    return 0


def cmd_potential(args) -> int:
    params, _, metadata = load_checkpoint(args.checkpoint)
    if metadata.get("model_kind") != "mclnn":
        raise UnsupportedOperationError(
            "only the pairwise model exposes a pair potential curve")
    spec = _spec_from_doc(metadata["system"])
    clusters = [tuple(c) for c in metadata.get("training_distance_clusters", [])]
    curve = evaluation.export_potential_curve(
        params, spec, args.r_min, args.r_max, args.n_points,
        training_clusters=clusters)
    evaluation.write_potential_curve_csv(args.out, curve)
    print(f"wrote {args.n_points} grid points to {args.out} "
          f"(offset {curve.offset:+.3e}, "
          f"{int(curve.in_range.sum())} in training range)")
    return 0


def cmd_sweep(args) -> int:
    config = resolve_config(args)
    widths = []
    for chunk in args.widths.split(";"):
        chunk = chunk.strip()
        if chunk:
            widths.append(tuple(int(p) for p in chunk.split(",")))
    if not widths:
        raise ConfigurationError("empty widths list; expected e.g. '2,2;4,4'")
    manifest = _load_dataset_dir(args.data)
    if manifest["task"] != config["task"]:
        raise ConfigurationError(
            f"dataset task {manifest['task']!r} does not match requested task "
            f"{config['task']!r}")
    if manifest.get("kind") != "trajectory":
        raise ConfigurationError("sweeps train the pairwise model and need a "
                                 "trajectory dataset")
    spec = _spec_from_doc(manifest["spec"])
    trajectories = _load_trajectories(args.data, manifest)
    rows = training.hyperparameter_sweep(spec, trajectories, widths,
                                         _train_config(config))
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hidden_layers", "train_loss", "val_loss"])
        for row in rows:
            writer.writerow([",".join(str(h) for h in row["hidden_layers"]),
                             _fmt(row["train_loss"]), _fmt(row["val_loss"])])
    _write_json(args.out + ".manifest.json", {
        "command": "sweep",
        "config": {k: config[k] for k in ("task", "lr", "epochs", "loss_threshold",
                                          "batch", "seed", "validation_fraction")},
        "dataset": {"path": os.path.abspath(args.data),
                    "content_hash": dataset_content_hash(args.data)},
        "rows": [{**row, "hidden_layers": list(row["hidden_layers"])}
                 for row in rows],
    })
    for row in rows:
        print(f"hidden {row['hidden_layers']}: train {row['train_loss']:.3e}, "
              f"val {row['val_loss']:.3e} ({row['stop_reason']})")
    return 0 if any(np.isfinite(row["train_loss"]) for row in rows) else 3


COMPARE_QUANTITIES = ["L", "H", "px", "py", "pz", "lx", "ly", "lz"]


def _report_columns(report):
    return {
        "L": report.lagrangian_model, "H": report.hamiltonian_model,
        "px": report.linear_momentum_model[:, 0],
        "py": report.linear_momentum_model[:, 1],
        "pz": report.linear_momentum_model[:, 2],
        "lx": report.angular_momentum_model[:, 0],
        "ly": report.angular_momentum_model[:, 1],
        "lz": report.angular_momentum_model[:, 2],
    }


def cmd_compare(args) -> int:
    config = resolve_config(args)
    m_params, _, m_meta = load_checkpoint(args.mclnn_checkpoint)
    b_params, _, b_meta = load_checkpoint(args.baseline_checkpoint)
    if m_meta["model_kind"] != "mclnn" or b_meta["model_kind"] != "baseline":
        raise ConfigurationError("compare expects one pairwise-model checkpoint "
                                 "and one baseline checkpoint, in that order")
    if m_meta["task"] != b_meta["task"]:
        raise ConfigurationError("checkpoints were trained on different tasks")
    spec = _spec_from_doc(m_meta["system"])
    _prepare_out_dir(args.out, args.force)
    state0 = _initial_state_for_eval(m_meta["task"], spec.n_particles,
                                     config["seed"], config["perturbation"])
    reports = {}
    for name, params, kind in (("mclnn", m_params, "mclnn"),
                               ("baseline", b_params, "baseline")):
        reports[name] = evaluation.evaluate_forward(
            params, kind, spec, state0, n_records=config["records"],
            substeps=config["stride"], dt=config["dt"])
        evaluation.write_report_csv(
            os.path.join(args.out, f"report_{name}.csv"), reports[name])

    n = config["records"]
    truth = reports["mclnn"]  # truth series are identical across reports
    true_cols = {
        "L": truth.lagrangian_true, "H": truth.hamiltonian_true,
        "px": truth.linear_momentum_true[:, 0],
        "py": truth.linear_momentum_true[:, 1],
        "pz": truth.linear_momentum_true[:, 2],
        "lx": truth.angular_momentum_true[:, 0],
        "ly": truth.angular_momentum_true[:, 1],
        "lz": truth.angular_momentum_true[:, 2],
    }
    model_cols = {name: _report_columns(reports[name]) for name in reports}

    def cell(series, i):
        return _fmt(series[i]) if i < len(series) else "nan"

    header = (["record"] + [f"{q}_true" for q in COMPARE_QUANTITIES]
              + [f"{q}_mclnn" for q in COMPARE_QUANTITIES]
              + [f"{q}_baseline" for q in COMPARE_QUANTITIES])
    with open(os.path.join(args.out, "compare.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            row = [i]
            row += [cell(true_cols[q], i) for q in COMPARE_QUANTITIES]
            row += [cell(model_cols["mclnn"][q], i) for q in COMPARE_QUANTITIES]
            row += [cell(model_cols["baseline"][q], i) for q in COMPARE_QUANTITIES]
            writer.writerow(row)
    _write_json(os.path.join(args.out, "manifest.json"), {
        "command": "compare",
        "task": m_meta["task"],
        "records": n,
        "seed": config["seed"],
        "perturbation": config["perturbation"],
        "mclnn_checkpoint": os.path.abspath(args.mclnn_checkpoint),
        "baseline_checkpoint": os.path.abspath(args.baseline_checkpoint),
        "maes": {name: reports[name].maes for name in reports},
        "diverged_at": {name: reports[name].diverged_at for name in reports},
        "gauge_shift": {name: reports[name].gauge_shift for name in reports},
    })
    for name in ("mclnn", "baseline"):
        r = reports[name]
        status = (f"diverged at {r.diverged_at}" if r.diverged_at is not None
                  else "completed")
        print(f"{name}: {status}; Lagrangian MAE {r.maes['lagrangian']:.3e}, "
              f"linear momentum MAE {r.maes['linear_momentum']:.3e}")
    return 0


# --- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mclnn",
        description="Momentum-conserving Lagrangian neural networks: data "
                    "generation, training, simulation and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--force", action="store_true",
                       help="allow writing into a non-empty output directory")
        if out_required:
            p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("generate", help="forward-simulate a training dataset")
    p.add_argument("--task", choices=systems.TASKS)
    p.add_argument("--model", choices=training.MODEL_KINDS,
                   help="baseline generates acceleration samples instead of "
                        "trajectories")
    p.add_argument("--n-particles", type=int)
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a model to a generated dataset")
    p.add_argument("--task", choices=systems.TASKS)
    p.add_argument("--model", choices=training.MODEL_KINDS)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--epochs", type=int)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="forward-simulate a trained model "
                                        "against the ground truth")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--records", type=int)
    p.add_argument("--n-particles", type=int,
                   help="evaluate at a different system size (pairwise model only)")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("potential", help="export the learned pair potential curve")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--r-min", type=float, default=_DEFAULTS["r_min"])
    p.add_argument("--r-max", type=float, default=_DEFAULTS["r_max"])
    p.add_argument("--n-points", type=int, default=_DEFAULTS["n_points"])
    common(p)
    p.set_defaults(func=cmd_potential)

    p = sub.add_parser("sweep", help="train one model per architecture")
    p.add_argument("--task", choices=systems.TASKS)
    p.add_argument("--data", required=True)
    p.add_argument("--widths", required=True,
                   help="semicolon-separated layer lists, e.g. '2,2;4,4;8,8'")
    p.add_argument("--epochs", type=int)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="run both models side by side")
    p.add_argument("--mclnn-checkpoint", required=True)
    p.add_argument("--baseline-checkpoint", required=True)
    p.add_argument("--records", type=int)
    common(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, UnsupportedOperationError, ContractViolationError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except NumericalFailureError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
