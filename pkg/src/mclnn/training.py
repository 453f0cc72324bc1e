"""Training loops: the pairwise model learns from position trajectories by
backpropagating through its own velocity-Verlet rollouts; the baseline
potential network learns from acceleration supervision.

Both trainers are deterministic given (config.seed, dataset) and run Adam
in 64-bit floats. The trajectory loss is the mean squared position error of
prediction records 2..|T|, averaged over trajectories, records, particles
and coordinate components alike.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .errors import ConfigurationError, ContractViolationError, NumericalFailureError
from .lagrangian import (
    MlpParams,
    ParticleState,
    Trajectory,
    fixedke_acceleration_from_arrays,
    mclnn_potential_from_positions,
    pair_distance_array,
)
from .nn import (
    AdamState,
    adam_init,
    adam_step,
    init_params,
    mlp_forward,
    params_to_vector,
    vector_to_params,
)

MODEL_KINDS = ("mclnn", "baseline")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100000
    loss_threshold: float = 1e-8
    batch: str | int = "full"  # "full", "per-trajectory", or a minibatch size
    seed: int = 100
    model_kind: str = "mclnn"
    hidden_layers: tuple = (10, 10)
    validation_fraction: float = 0.2
    baseline_batch_size: int = 1000

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ContractViolationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.epochs) < 1:
            raise ContractViolationError(f"epochs must be >= 1, got {self.epochs}")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigurationError(f"model_kind must be one of {MODEL_KINDS}")
        if isinstance(self.batch, str):
            if self.batch not in ("full", "per-trajectory"):
                raise ConfigurationError(
                    f"batch must be 'full', 'per-trajectory' or an int, got {self.batch!r}"
                )
        elif int(self.batch) < 1:
            raise ConfigurationError(f"batch size must be >= 1, got {self.batch}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ContractViolationError("validation_fraction must be in [0, 1)")


@dataclass
class TrainReport:
    loss_history: np.ndarray
    val_history: np.ndarray
    final_train_loss: float
    final_val_loss: float
    wall_clock_s: float
    stop_reason: str  # "loss_threshold" | "epoch_budget" | "numerical_failure"
    epochs_run: int
    diagnostic: str = ""


# --- trajectory loss ----------------------------------------------------------


def _stack_trajectories(trajectories: Sequence[Trajectory]):
    """Common (q0, v0, masses, targets, records, substeps, dt) arrays."""
    if not trajectories:
        raise ContractViolationError("need at least one trajectory")
    first = trajectories[0]
    n_records = len(first)
    for tr in trajectories:
        if tr.n_particles != first.n_particles:
            raise ContractViolationError("all trajectories must share the particle count")
        if len(tr) != n_records:
            raise ContractViolationError("all trajectories must share the record count")
        if not (np.isclose(tr.recorded_dt, first.recorded_dt) and tr.substeps == first.substeps):
            raise ContractViolationError("all trajectories must share recorded_dt and substeps")
    q0 = np.stack([tr.states[0].positions for tr in trajectories])
    v0 = np.stack([tr.states[0].velocities for tr in trajectories])
    targets = np.stack([tr.positions_array() for tr in trajectories])
    masses = np.asarray(first.states[0].masses)
    return q0, v0, masses, targets, n_records, first.substeps, first.dt


def _rollout_positions(params, q, v, masses, n_steps, dt):
    """Positions after every integrator step, via a scanned Verlet loop."""

    def step(carry, _):
        q, v, a = carry
        v_half = v + (0.5 * dt) * a
        q_new = q + dt * v_half
        a_new = fixedke_acceleration_from_arrays(params, q_new, masses)
        v_new = v_half + (0.5 * dt) * a_new
        return (q_new, v_new, a_new), q_new

    a0 = fixedke_acceleration_from_arrays(params, q, masses)
    _, positions = jax.lax.scan(step, (q, v, a0), None, length=n_steps)
    return positions


def _trajectory_loss_arrays(params, q0, v0, masses, targets, n_records, substeps, dt):
    """Mean squared prediction error; targets is (batch, records, N, 3)."""

    def per_trajectory(q, v, target):
        positions = _rollout_positions(params, q, v, masses, (n_records - 1) * substeps, dt)
        predicted = positions[substeps - 1 :: substeps]  # records 2..|T|
        err = predicted - target[1:]
        return jnp.mean(err * err)

    return jnp.mean(jax.vmap(per_trajectory)(q0, v0, targets))


def mclnn_loss(params: MlpParams, trajectories: Sequence[Trajectory], spec=None) -> float:
    """Mean squared position error of rollouts from each trajectory's first
    record, averaged per the trajectory-loss definition."""
    q0, v0, masses, targets, n_records, substeps, dt = _stack_trajectories(trajectories)
    if spec is not None and spec.n_particles != q0.shape[1]:
        raise ContractViolationError(
            f"dataset has {q0.shape[1]} particles, spec expects {spec.n_particles}"
        )
    value = _trajectory_loss_arrays(params, q0, v0, masses, targets,
                                    n_records, substeps, dt)
    value = float(value)
    if not np.isfinite(value):
        raise NumericalFailureError("trajectory loss is non-finite", context="mclnn_loss")
    return value


def mclnn_loss_gradient(params: MlpParams, trajectories: Sequence[Trajectory],
                        spec=None) -> np.ndarray:
    """d(loss)/d(flattened params), differentiating through every rollout
    substep (forces are inner gradients, so this is second-order)."""
    q0, v0, masses, targets, n_records, substeps, dt = _stack_trajectories(trajectories)

    def loss_of_vector(vec):
        p = vector_to_params(vec, params.layer_sizes)
        return _trajectory_loss_arrays(p, q0, v0, masses, targets, n_records, substeps, dt)

    g = jax.grad(loss_of_vector)(params_to_vector(params))
    return np.asarray(g)


# --- baseline loss --------------------------------------------------------------


def _stack_samples(samples):
    if not samples:
        raise ContractViolationError("need at least one sample")
    q = np.stack([np.asarray(s[0]) for s in samples])
    v = np.stack([np.asarray(s[1]) for s in samples])
    a = np.stack([np.asarray(s[2]) for s in samples])
    return q, v, a


def baseline_potential_from_positions(params: MlpParams, positions):
    """Baseline network: all flattened coordinates in, scalar potential out."""
    return mlp_forward(params, jnp.ravel(positions))


def baseline_acceleration_from_arrays(params: MlpParams, positions, masses):
    g = jax.grad(baseline_potential_from_positions, argnums=1)(params, positions)
    return -g / masses[:, None]


def _baseline_loss_arrays(params, q, a_true, masses):
    def predict(positions):
        return baseline_acceleration_from_arrays(params, positions, masses)

    a_pred = jax.vmap(predict)(q)
    err = a_pred - a_true
    return jnp.mean(err * err)


def baseline_loss(params: MlpParams, samples, masses=None) -> float:
    """MSE between Euler-Lagrange accelerations of the baseline potential
    and the supervised accelerations, over all components and samples."""
    q, _, a_true = _stack_samples(samples)
    n = q.shape[1]
    if params.layer_sizes[0] != 3 * n:
        raise ContractViolationError(
            f"baseline network input must be {3 * n} (flattened positions), "
            f"got {params.layer_sizes[0]}"
        )
    masses = np.ones(n) if masses is None else np.asarray(masses, dtype=np.float64)
    value = float(_baseline_loss_arrays(params, q, a_true, masses))
    if not np.isfinite(value):
        raise NumericalFailureError("baseline loss is non-finite", context="baseline_loss")
    return value


# --- optimization loops -----------------------------------------------------------


def split_indices(n_items: int, validation_fraction: float, seed: int):
    """Seeded shuffle split; validation gets floor(fraction * n) items."""
    order = np.random.default_rng(seed).permutation(n_items)
    n_val = int(np.floor(validation_fraction * n_items))
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def training_distance_values(trajectories: Sequence[Trajectory]) -> np.ndarray:
    """Every pair distance observed across all records of all trajectories."""
    values = [pair_distance_array(s.positions) for tr in trajectories for s in tr.states]
    return np.sort(np.concatenate(values))


def _make_update(loss_arrays_fn):
    @jax.jit
    def update(vec, state: AdamState, *batch):
        def loss_of_vector(v):
            return loss_arrays_fn(v, *batch)

        loss, grad = jax.value_and_grad(loss_of_vector)(vec)
        new_vec, new_state = _adam_flat(vec, grad, state)
        return loss, new_vec, new_state

    return update


def _adam_flat(vec, grad, state: AdamState):
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_vec = vec - state.learning_rate * m_hat / (jnp.sqrt(v_hat) + state.eps)
    return new_vec, AdamState(m, v, t, state.learning_rate, state.beta1,
                              state.beta2, state.eps)


def train_mclnn(spec, dataset, config: TrainConfig):
    """Fit the pairwise potential to position trajectories.

    ``dataset`` is a sequence of Trajectory (a DatasetResult also works).
    Returns (MlpParams, TrainReport). On a non-finite loss the parameters
    from the last finite epoch are returned with stop_reason
    "numerical_failure".
    """
    trajectories = list(getattr(dataset, "trajectories", dataset))
    train_idx, val_idx = split_indices(len(trajectories), config.validation_fraction,
                                       config.seed)
    train_set = [trajectories[i] for i in train_idx]
    val_set = [trajectories[i] for i in val_idx]

    q0, v0, masses, targets, n_records, substeps, dt = _stack_trajectories(train_set)
    layer_sizes = (1, *config.hidden_layers, 1)
    params = init_params(layer_sizes, config.seed)
    vec = params_to_vector(params)
    opt = adam_init(vec.size, learning_rate=config.learning_rate)

    def loss_arrays(v, qb, vb, tb):
        p = vector_to_params(v, layer_sizes)
        return _trajectory_loss_arrays(p, qb, vb, masses, tb, n_records, substeps, dt)

    update = _make_update(loss_arrays)
    full_loss = jax.jit(lambda v: loss_arrays(v, q0, v0, targets))
    if val_set:
        vq0, vv0, _, vtargets, _, _, _ = _stack_trajectories(val_set)
        val_loss = jax.jit(lambda v: loss_arrays(v, vq0, vv0, vtargets))
    else:
        val_loss = None

    if config.batch == "full":
        batch_size = len(train_set)
    elif config.batch == "per-trajectory":
        batch_size = 1
    else:
        batch_size = min(int(config.batch), len(train_set))

    rng = np.random.default_rng(config.seed)
    history, val_history = [], []
    best_vec = vec
    stop_reason = "epoch_budget"
    diagnostic = ""
    epochs_run = 0
    t0 = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        if batch_size == len(train_set):
            # loss is evaluated at the pre-update parameters; on threshold
            # stop those are the parameters returned
            loss, vec_new, opt = update(vec, opt, q0, v0, targets)
            epoch_loss = float(loss)
            loss_at = vec
        else:
            order = rng.permutation(len(train_set))
            for start in range(0, len(order) - batch_size + 1, batch_size):
                idx = order[start : start + batch_size]
                _, vec_new, opt = update(vec, opt, q0[idx], v0[idx], targets[idx])
                vec = vec_new
            epoch_loss = float(full_loss(vec_new))
            loss_at = vec_new
        epochs_run = epoch
        if not np.isfinite(epoch_loss):
            stop_reason = "numerical_failure"
            diagnostic = f"non-finite training loss at epoch {epoch}"
            vec = best_vec
            history.append(epoch_loss)
            val_history.append(float("nan"))
            break
        history.append(epoch_loss)
        val_history.append(float(val_loss(loss_at)) if val_loss is not None
                           else float("nan"))
        if epoch_loss <= config.loss_threshold:
            stop_reason = "loss_threshold"
            vec = loss_at
            break
        vec = vec_new
        best_vec = vec
    wall = time.perf_counter() - t0

    params = vector_to_params(vec, layer_sizes)
    report = TrainReport(
        loss_history=np.asarray(history),
        val_history=np.asarray(val_history),
        final_train_loss=history[-1] if history else float("nan"),
        final_val_loss=val_history[-1] if val_history else float("nan"),
        wall_clock_s=wall,
        stop_reason=stop_reason,
        epochs_run=epochs_run,
        diagnostic=diagnostic,
    )
    return params, report


def train_baseline(spec, samples, config: TrainConfig):
    """Fit the baseline potential network to (q, qdot, qddot) samples with
    seeded mini-batch Adam. Returns (MlpParams, TrainReport)."""
    q, v, a = _stack_samples(samples)
    n = q.shape[1]
    masses = np.asarray(spec.masses, dtype=np.float64)
    train_idx, val_idx = split_indices(len(samples), config.validation_fraction,
                                       config.seed)
    q_tr, a_tr = q[train_idx], a[train_idx]
    q_va, a_va = q[val_idx], a[val_idx]

    layer_sizes = (3 * n, *config.hidden_layers, 1)
    params = init_params(layer_sizes, config.seed)
    vec = params_to_vector(params)
    opt = adam_init(vec.size, learning_rate=config.learning_rate)

    def loss_arrays(vp, qb, ab):
        p = vector_to_params(vp, layer_sizes)
        return _baseline_loss_arrays(p, qb, ab, masses)

    update = _make_update(loss_arrays)
    full_loss = jax.jit(lambda vp: loss_arrays(vp, q_tr, a_tr))
    val_loss = jax.jit(lambda vp: loss_arrays(vp, q_va, a_va)) if len(q_va) else None

    batch_size = min(config.baseline_batch_size, len(q_tr))
    rng = np.random.default_rng(config.seed)
    history, val_history = [], []
    best_vec = vec
    stop_reason = "epoch_budget"
    diagnostic = ""
    epochs_run = 0
    t0 = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(q_tr))
        for start in range(0, len(order) - batch_size + 1, batch_size):
            idx = order[start : start + batch_size]
            _, vec_new, opt = update(vec, opt, q_tr[idx], a_tr[idx])
            vec = vec_new
        epochs_run = epoch
        epoch_loss = float(full_loss(vec))
        if not np.isfinite(epoch_loss):
            stop_reason = "numerical_failure"
            diagnostic = f"non-finite training loss at epoch {epoch}"
            vec = best_vec
            history.append(epoch_loss)
            val_history.append(float("nan"))
            break
        best_vec = vec
        history.append(epoch_loss)
        val_history.append(float(val_loss(vec)) if val_loss is not None else float("nan"))
        if epoch_loss <= config.loss_threshold:
            stop_reason = "loss_threshold"
            break
    wall = time.perf_counter() - t0

    params = vector_to_params(vec, layer_sizes)
    report = TrainReport(
        loss_history=np.asarray(history),
        val_history=np.asarray(val_history),
        final_train_loss=history[-1] if history else float("nan"),
        final_val_loss=val_history[-1] if val_history else float("nan"),
        wall_clock_s=wall,
        stop_reason=stop_reason,
        epochs_run=epochs_run,
        diagnostic=diagnostic,
    )
    return params, report


def hyperparameter_sweep(spec, dataset, widths: Sequence[Sequence[int]],
                         config: TrainConfig):
    """Train one model per hidden-layer configuration with the threshold
    stopping rule; per-run failures are recorded and the sweep continues.

    Returns a list of dicts with keys hidden_layers, train_loss, val_loss,
    stop_reason, epochs_run.
    """
    if not widths:
        raise ContractViolationError("widths must be nonempty")
    rows = []
    for hidden in widths:
        run_config = replace(config, hidden_layers=tuple(int(h) for h in hidden))
        try:
            _, report = train_mclnn(spec, dataset, run_config)
            rows.append({
                "hidden_layers": tuple(int(h) for h in hidden),
                "train_loss": report.final_train_loss,
                "val_loss": report.final_val_loss,
                "stop_reason": report.stop_reason,
                "epochs_run": report.epochs_run,
            })
        except Exception as err:  # per-run failure stays in the table
            rows.append({
                "hidden_layers": tuple(int(h) for h in hidden),
                "train_loss": float("nan"),
                "val_loss": float("nan"),
                "stop_reason": f"error: {err}",
                "epochs_run": 0,
            })
    return rows
