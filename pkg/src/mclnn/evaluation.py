"""Forward-simulation evaluation: conserved-quantity tracking against the
analytic ground truth, generalization to unseen particle counts, and export
of the learned pair potential.

Forces pin a potential only up to an additive constant, so comparisons of
learned Lagrangian/Hamiltonian against analytic values gauge-fix the learned
potential with a single least-squares constant (reported, with raw series
kept alongside). Conservation statements (momentum drift, energy band) never
involve the gauge.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ContractViolationError,
    NumericalFailureError,
    UnsupportedOperationError,
)
from .lagrangian import (
    MlpParams,
    ParticleState,
    Trajectory,
    angular_momentum,
    el_acceleration_fixedke,
    kinetic_energy,
    linear_momentum,
    mclnn_potential_from_positions,
    pair_distance_array,
    velocity_verlet_step,
)
from .nn import mlp_forward
from .systems import (
    SystemSpec,
    analytic_acceleration_fn,
    analytic_pair_potential,
    analytic_potential_from_positions,
    perturb_initial_conditions,
    scaled_initial_conditions,
)
from .training import baseline_acceleration_from_arrays, baseline_potential_from_positions

import jax.numpy as jnp

DIVERGENCE_POSITION_LIMIT = 1e6


def mae(pred, true) -> float:
    """Mean absolute error; vector series average over all components."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(true, dtype=np.float64)
    if p.shape != t.shape:
        raise ContractViolationError(f"series shapes differ: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ContractViolationError("series must have at least one entry")
    return float(np.mean(np.abs(p - t)))


@dataclass
class ConservationReport:
    """Per-record series for model and ground truth plus MAE summaries.

    ``lagrangian_model``/``hamiltonian_model`` are gauge-fixed by
    ``gauge_shift`` (a single constant added to the model's total potential);
    the raw series are kept under ``*_model_raw``.
    """

    records: np.ndarray
    lagrangian_model: np.ndarray
    lagrangian_true: np.ndarray
    hamiltonian_model: np.ndarray
    hamiltonian_true: np.ndarray
    linear_momentum_model: np.ndarray
    linear_momentum_true: np.ndarray
    angular_momentum_model: np.ndarray
    angular_momentum_true: np.ndarray
    lagrangian_model_raw: np.ndarray
    hamiltonian_model_raw: np.ndarray
    gauge_shift: float
    maes: dict
    diverged_at: int | None = None
    model_trajectory: Trajectory | None = None
    true_trajectory: Trajectory | None = None

    @property
    def n_records(self) -> int:
        return len(self.records)


def model_functions(model_params: MlpParams, model_kind: str, spec: SystemSpec):
    """(acceleration_fn(state), potential_fn(positions)) for a model kind."""
    masses = np.asarray(spec.masses, dtype=np.float64)
    if model_kind == "mclnn":
        if model_params.layer_sizes[0] != 1:
            raise ContractViolationError("pair network must take a single distance input")

        def accel(state: ParticleState):
            return el_acceleration_fixedke(model_params, state)

        def potential(positions):
            return float(mclnn_potential_from_positions(model_params, positions))

    elif model_kind == "baseline":
        expected = 3 * spec.n_particles
        if model_params.layer_sizes[0] != expected:
            raise UnsupportedOperationError(
                f"baseline network expects {model_params.layer_sizes[0] // 3} particles "
                f"and cannot simulate {spec.n_particles}: positions of all particles "
                "feed the network jointly"
            )

        def accel(state: ParticleState):
            a = np.asarray(baseline_acceleration_from_arrays(
                model_params, jnp.asarray(state.positions), jnp.asarray(masses)))
            if not np.all(np.isfinite(a)):
                raise NumericalFailureError("non-finite baseline acceleration",
                                            context="baseline acceleration")
            return a

        def potential(positions):
            return float(baseline_potential_from_positions(model_params,
                                                           jnp.asarray(positions)))

    else:
        raise ContractViolationError(f"unknown model kind {model_kind!r}")
    return accel, potential


def _roll_with_divergence_guard(accel, state0: ParticleState, dt: float,
                                substeps: int, n_records: int):
    """Record-by-record rollout; returns (states, diverged_at_record)."""
    states = [state0]
    current = state0
    for rec in range(1, n_records):
        try:
            for _ in range(substeps):
                current = velocity_verlet_step(accel, current, dt)
        except NumericalFailureError:
            return states, rec
        if np.abs(current.positions).max() > DIVERGENCE_POSITION_LIMIT:
            return states, rec
        states.append(current)
    return states, None


def evaluate_forward(model_params: MlpParams, model_kind: str, spec: SystemSpec,
                     state0: ParticleState, n_records: int, substeps: int = 10,
                     dt: float = 0.01) -> ConservationReport:
    """Roll model and ground truth from the same state and report L, H and
    momenta per record with MAE summaries.

    A diverging model rollout (non-finite values or runaway positions)
    truncates the report; ``diverged_at`` carries the first bad record.
    """
    accel_model, potential_model = model_functions(model_params, model_kind, spec)
    return evaluate_forward_functions(accel_model, potential_model, spec, state0,
                                      n_records, substeps, dt)


def evaluate_forward_functions(accel_model: Callable, potential_model: Callable,
                               spec: SystemSpec, state0: ParticleState,
                               n_records: int, substeps: int = 10,
                               dt: float = 0.01) -> ConservationReport:
    """evaluate_forward with explicit model callables: ``accel_model`` maps a
    state to (N,3) accelerations, ``potential_model`` maps positions to a
    scalar. Lets any potential (including the analytic one) play the model."""
    if n_records < 2:
        raise ContractViolationError(f"need n_records >= 2, got {n_records}")
    accel_true = analytic_acceleration_fn(spec)

    model_states, diverged_at = _roll_with_divergence_guard(
        accel_model, state0, dt, substeps, n_records)
    n_kept = len(model_states)
    true_states, true_fail = _roll_with_divergence_guard(
        accel_true, state0, dt, substeps, n_kept)
    if true_fail is not None:
        model_states = model_states[: len(true_states)]
        n_kept = len(model_states)
        diverged_at = true_fail if diverged_at is None else min(diverged_at, true_fail)

    def potential_true(positions):
        return float(analytic_potential_from_positions(spec, positions))

    t_model = np.array([kinetic_energy(s) for s in model_states])
    t_true = np.array([kinetic_energy(s) for s in true_states])
    v_model = np.array([potential_model(s.positions) for s in model_states])
    v_true = np.array([potential_true(s.positions) for s in true_states])

    # single least-squares constant aligning the learned potential with the
    # analytic one on the ground-truth records (pure gauge, cannot mask
    # force errors)
    gauge_shift = float(np.mean(
        [potential_true(s.positions) - potential_model(s.positions) for s in true_states]
    ))

    lagr_model_raw = t_model - v_model
    ham_model_raw = t_model + v_model
    lagr_model = t_model - (v_model + gauge_shift)
    ham_model = t_model + (v_model + gauge_shift)
    lagr_true = t_true - v_true
    ham_true = t_true + v_true

    p_model = np.array([linear_momentum(s) for s in model_states])
    p_true = np.array([linear_momentum(s) for s in true_states])
    l_model = np.array([angular_momentum(s) for s in model_states])
    l_true = np.array([angular_momentum(s) for s in true_states])

    recorded_dt = dt * substeps
    maes = {
        "lagrangian": mae(lagr_model, lagr_true),
        "hamiltonian": mae(ham_model, ham_true),
        "linear_momentum": mae(p_model, p_true),
        "angular_momentum": mae(l_model, l_true),
        "lagrangian_raw": mae(lagr_model_raw, lagr_true),
        "hamiltonian_raw": mae(ham_model_raw, ham_true),
    }
    return ConservationReport(
        records=np.arange(n_kept),
        lagrangian_model=lagr_model,
        lagrangian_true=lagr_true,
        hamiltonian_model=ham_model,
        hamiltonian_true=ham_true,
        linear_momentum_model=p_model,
        linear_momentum_true=p_true,
        angular_momentum_model=l_model,
        angular_momentum_true=l_true,
        lagrangian_model_raw=lagr_model_raw,
        hamiltonian_model_raw=ham_model_raw,
        gauge_shift=gauge_shift,
        maes=maes,
        diverged_at=diverged_at,
        model_trajectory=Trajectory(tuple(model_states), recorded_dt, substeps),
        true_trajectory=Trajectory(tuple(true_states), recorded_dt, substeps),
    )


def generalization_eval(model_params: MlpParams, spec_small: SystemSpec,
                        n_large: int, seed: int, n_records: int = 100,
                        substeps: int = 10, dt: float = 0.01,
                        perturbation: float = 0.05) -> ConservationReport:
    """Evaluate a pair model trained at one system size on ``n_large``
    particles: the same per-pair network simply sums over all new pairs."""
    if n_large == spec_small.n_particles:
        raise ContractViolationError("n_large must differ from the training size")
    if model_params.layer_sizes[0] != 1:
        raise UnsupportedOperationError(
            "only the pairwise model generalizes across system sizes"
        )
    spec_large = spec_small.with_particles(n_large)
    base = scaled_initial_conditions(spec_large.kind, n_large)
    state0 = perturb_initial_conditions(base, seed, perturbation)
    return evaluate_forward(model_params, "mclnn", spec_large, state0,
                            n_records, substeps, dt)


# --- learned-potential export ----------------------------------------------------


def cluster_intervals(values, gap_fraction: float = 0.05):
    """[min, max] intervals of contiguous clusters of sorted values; a gap
    wider than gap_fraction * (overall span) starts a new cluster."""
    v = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if v.size == 0:
        return []
    span = v[-1] - v[0]
    if span == 0.0:
        return [(float(v[0]), float(v[0]))]
    threshold = gap_fraction * span
    intervals = []
    lo = v[0]
    prev = v[0]
    for x in v[1:]:
        if x - prev > threshold:
            intervals.append((float(lo), float(prev)))
            lo = x
        prev = x
    intervals.append((float(lo), float(prev)))
    return intervals


def in_any_interval(r, intervals) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    flags = np.zeros(r.shape, dtype=bool)
    for lo, hi in intervals:
        flags |= (r >= lo) & (r <= hi)
    return flags


@dataclass
class PotentialCurve:
    r: np.ndarray
    v_learned: np.ndarray
    v_learned_shifted: np.ndarray
    v_analytic: np.ndarray
    in_range: np.ndarray
    offset: float


def export_potential_curve(params: MlpParams, spec: SystemSpec, r_min: float,
                           r_max: float, n_points: int,
                           training_r_values=None,
                           training_clusters=None) -> PotentialCurve:
    """Learned vs analytic pair potential on a uniform grid.

    ``in_range`` marks grid points inside the contiguous clusters of the
    training distances; the shifted curve adds the least-squares constant
    computed on in-range points only (all points if none are in range).
    """
    if not r_min < r_max:
        raise ContractViolationError(f"need r_min < r_max, got [{r_min}, {r_max}]")
    if n_points < 2:
        raise ContractViolationError(f"need n_points >= 2, got {n_points}")
    if spec.kind == "gravity" and r_min <= 0:
        raise ContractViolationError("gravity potential needs r_min > 0")
    grid = np.linspace(r_min, r_max, n_points)
    v_learned = np.asarray(mlp_forward(params, grid[:, None]))
    v_analytic = np.asarray(analytic_pair_potential(spec, grid))
    if training_clusters is None:
        training_clusters = (cluster_intervals(training_r_values)
                             if training_r_values is not None else [])
    flags = in_any_interval(grid, training_clusters)
    basis = flags if flags.any() else np.ones_like(flags)
    offset = float(np.mean(v_analytic[basis] - v_learned[basis]))
    return PotentialCurve(grid, v_learned, v_learned + offset, v_analytic, flags, offset)


# --- CSV interfaces -----------------------------------------------------------------

REPORT_HEADER = [
    "record",
    "L_model", "L_true", "H_model", "H_true",
    "px_model", "px_true", "py_model", "py_true", "pz_model", "pz_true",
    "lx_model", "lx_true", "ly_model", "ly_true", "lz_model", "lz_true",
    "L_model_raw", "H_model_raw",
]

CURVE_HEADER = ["r", "V_learned", "V_learned_shifted", "V_analytic", "in_range"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_report_csv(path, report: ConservationReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for i in range(report.n_records):
            writer.writerow([int(report.records[i])] + [_fmt(x) for x in (
                report.lagrangian_model[i], report.lagrangian_true[i],
                report.hamiltonian_model[i], report.hamiltonian_true[i],
                report.linear_momentum_model[i][0], report.linear_momentum_true[i][0],
                report.linear_momentum_model[i][1], report.linear_momentum_true[i][1],
                report.linear_momentum_model[i][2], report.linear_momentum_true[i][2],
                report.angular_momentum_model[i][0], report.angular_momentum_true[i][0],
                report.angular_momentum_model[i][1], report.angular_momentum_true[i][1],
                report.angular_momentum_model[i][2], report.angular_momentum_true[i][2],
                report.lagrangian_model_raw[i], report.hamiltonian_model_raw[i],
            )])


def write_potential_curve_csv(path, curve: PotentialCurve) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_HEADER)
        for i in range(len(curve.r)):
            writer.writerow([
                _fmt(curve.r[i]), _fmt(curve.v_learned[i]),
                _fmt(curve.v_learned_shifted[i]), _fmt(curve.v_analytic[i]),
                int(curve.in_range[i]),
            ])
