"""Trained-model fixtures shared by the acceptance suite.

Training at benchmark scale takes minutes per model, so results are cached
under .cache/acceptance keyed by the full generating configuration; delete
the directory to retrain from scratch.
"""

import hashlib
import json
import os
import time

import numpy as np

from mclnn import (
    DatasetConfig,
    TrainConfig,
    default_spec,
    generate_dataset,
    load_checkpoint,
    sample_acceleration_dataset,
    save_checkpoint,
    train_baseline,
    train_mclnn,
)
from mclnn.evaluation import cluster_intervals
from mclnn.training import split_indices, training_distance_values

CACHE_DIR = os.path.join(os.path.dirname(__file__), "..", ".cache", "acceptance")

DATASET_CONFIG = DatasetConfig()  # benchmark defaults: 100 x 20, dt 0.01, stride 10

MCLNN_EPOCHS = {"linear_spring": 12000, "nonlinear_spring": 8000, "gravity": 8000}
BASELINE_EPOCHS = 2500
BASELINE_SAMPLES = 10000


def _mclnn_config(task):
    return TrainConfig(epochs=MCLNN_EPOCHS[task], hidden_layers=(10, 10), seed=100)


def _baseline_config():
    return TrainConfig(epochs=BASELINE_EPOCHS, hidden_layers=(10, 10), seed=100,
                       model_kind="baseline", baseline_batch_size=1000)


def _config_digest(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _cache_paths(name):
    os.makedirs(CACHE_DIR, exist_ok=True)
    return (os.path.join(CACHE_DIR, f"{name}.json"),
            os.path.join(CACHE_DIR, f"{name}.key"))


def _train_or_load(name, key_doc, builder):
    ckpt_path, key_path = _cache_paths(name)
    digest = _config_digest(key_doc)
    if os.path.exists(ckpt_path) and os.path.exists(key_path):
        if open(key_path).read().strip() == digest:
            params, _, metadata = load_checkpoint(ckpt_path)
            return params, metadata
    params, metadata = builder()
    save_checkpoint(ckpt_path, params, metadata=metadata)
    with open(key_path, "w") as fh:
        fh.write(digest)
    return params, metadata


def get_dataset(task):
    return generate_dataset(default_spec(task), DATASET_CONFIG)


def get_trained_mclnn(task):
    """Benchmark-scale pairwise model for ``task`` (cached across runs)."""
    config = _mclnn_config(task)
    key = {"task": task, "dataset": DATASET_CONFIG.__dict__,
           "train": {"lr": config.learning_rate, "epochs": config.epochs,
                     "threshold": config.loss_threshold, "seed": config.seed,
                     "hidden": list(config.hidden_layers),
                     "val": config.validation_fraction, "batch": config.batch},
           "kind": "mclnn"}

    def build():
        spec = default_spec(task)
        dataset = get_dataset(task)
        t0 = time.perf_counter()
        params, report = train_mclnn(spec, dataset, config)
        train_idx, _ = split_indices(len(dataset.trajectories),
                                     config.validation_fraction, config.seed)
        values = training_distance_values(
            [dataset.trajectories[i] for i in train_idx])
        metadata = {
            "task": task, "model_kind": "mclnn", "seed": config.seed,
            "epoch": report.epochs_run,
            "train_loss": report.final_train_loss,
            "val_loss": report.final_val_loss,
            "min_train_loss": float(np.nanmin(report.loss_history)),
            "stop_reason": report.stop_reason,
            "wall_clock_s": report.wall_clock_s,
            "loss_history": [float(x) for x in report.loss_history],
            "training_distance_clusters": [list(c) for c in
                                           cluster_intervals(values)],
            "training_distance_range": [float(values.min()), float(values.max())],
            "system": {"kind": spec.kind, "n_particles": spec.n_particles,
                       "k": spec.k, "q0": spec.q0, "G": spec.G,
                       "masses": [float(m) for m in spec.masses]},
        }
        print(f"[acceptance] trained mclnn/{task}: "
              f"final {report.final_train_loss:.3e}, "
              f"min {metadata['min_train_loss']:.3e}, "
              f"{report.epochs_run} epochs, {report.wall_clock_s:.0f}s "
              f"(total with data {time.perf_counter() - t0:.0f}s)")
        return params, metadata

    return _train_or_load(f"mclnn_{task}", key, build)


SWEEP_WIDTHS = ((2, 2), (4, 4), (8, 8), (16, 16))
SWEEP_EPOCHS = 2500


def get_sweep(task="linear_spring"):
    """Architecture sweep rows with the threshold stopping rule (cached)."""
    from mclnn import hyperparameter_sweep

    config = TrainConfig(epochs=SWEEP_EPOCHS, seed=100)
    key = {"task": task, "dataset": DATASET_CONFIG.__dict__,
           "widths": [list(w) for w in SWEEP_WIDTHS],
           "train": {"lr": config.learning_rate, "epochs": config.epochs,
                     "threshold": config.loss_threshold, "seed": config.seed,
                     "val": config.validation_fraction}}
    os.makedirs(CACHE_DIR, exist_ok=True)
    path = os.path.join(CACHE_DIR, f"sweep_{task}.json")
    digest = _config_digest(key)
    if os.path.exists(path):
        doc = json.load(open(path))
        if doc.get("key") == digest:
            return doc["rows"]
    spec = default_spec(task)
    dataset = get_dataset(task)
    t0 = time.perf_counter()
    rows = []
    for width in SWEEP_WIDTHS:
        run_t0 = time.perf_counter()
        run = hyperparameter_sweep(spec, dataset, [width], config)[0]
        run["wall_clock_s"] = time.perf_counter() - run_t0
        run["hidden_layers"] = list(run["hidden_layers"])
        rows.append(run)
        print(f"[acceptance] sweep {width}: train {run['train_loss']:.3e}, "
              f"val {run['val_loss']:.3e}, {run['wall_clock_s']:.0f}s")
    print(f"[acceptance] sweep total {time.perf_counter() - t0:.0f}s")
    with open(path, "w") as fh:
        json.dump({"key": digest, "rows": rows}, fh)
    return rows


def get_trained_baseline(task):
    """Benchmark-scale baseline network for ``task`` (cached across runs)."""
    config = _baseline_config()
    key = {"task": task, "samples": BASELINE_SAMPLES, "seed": 100,
           "train": {"lr": config.learning_rate, "epochs": config.epochs,
                     "threshold": config.loss_threshold, "seed": config.seed,
                     "hidden": list(config.hidden_layers),
                     "batch_size": config.baseline_batch_size,
                     "val": config.validation_fraction},
           "kind": "baseline"}

    def build():
        spec = default_spec(task)
        samples = sample_acceleration_dataset(spec, BASELINE_SAMPLES, seed=100)
        params, report = train_baseline(spec, samples, config)
        # held-out force fidelity for the scatter criterion
        import jax.numpy as jnp
        from mclnn.training import baseline_acceleration_from_arrays
        _, val_idx = split_indices(len(samples), config.validation_fraction,
                                   config.seed)
        a_true, a_pred = [], []
        for i in val_idx:
            q, v, a = samples[i]
            pred = np.asarray(baseline_acceleration_from_arrays(
                params, jnp.asarray(q), jnp.asarray(spec.masses)))
            a_true.extend(a.ravel())
            a_pred.extend(pred.ravel())
        slope = float(np.polyfit(np.array(a_true), np.array(a_pred), 1)[0])
        metadata = {
            "task": task, "model_kind": "baseline", "seed": config.seed,
            "epoch": report.epochs_run,
            "train_loss": report.final_train_loss,
            "val_loss": report.final_val_loss,
            "stop_reason": report.stop_reason,
            "wall_clock_s": report.wall_clock_s,
            "heldout_force_slope": slope,
            "heldout_scatter": {"a_true": [float(x) for x in a_true],
                                "a_pred": [float(x) for x in a_pred]},
            "system": {"kind": spec.kind, "n_particles": spec.n_particles,
                       "k": spec.k, "q0": spec.q0, "G": spec.G,
                       "masses": [float(m) for m in spec.masses]},
        }
        print(f"[acceptance] trained baseline/{task}: "
              f"final {report.final_train_loss:.3e}, slope {slope:.4f}, "
              f"{report.epochs_run} epochs, {report.wall_clock_s:.0f}s")
        return params, metadata

    return _train_or_load(f"baseline_{task}", key, build)
