import numpy as np
import pytest

from mclnn import (
    ContractViolationError,
    SystemSpec,
    UnsupportedOperationError,
    cluster_intervals,
    default_spec,
    evaluate_forward,
    evaluate_forward_functions,
    export_potential_curve,
    generalization_eval,
    init_params,
    initial_conditions,
    mae,
    perturb_initial_conditions,
    write_potential_curve_csv,
    write_report_csv,
)
from mclnn.evaluation import CURVE_HEADER, REPORT_HEADER, in_any_interval, model_functions
from mclnn.nn import params_to_vector, vector_to_params
from mclnn.systems import (
    analytic_acceleration_fn,
    analytic_pair_potential,
    analytic_potential_from_positions,
)

from conftest import random_state


def _rich_pair_params(seed, hidden=(8, 8), scale=0.3):
    params = init_params((1, *hidden, 1), seed)
    rng = np.random.default_rng(seed + 900)
    vec = np.asarray(params_to_vector(params)) + scale * rng.normal(size=params.n_parameters)
    return vector_to_params(vec, params.layer_sizes)


# --- mae ----------------------------------------------------------------------


def test_mae_identical_series():
    assert mae([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0


def test_mae_uniform_offset():
    x = np.linspace(0, 1, 7)
    assert mae(x + 1.0, x) == 1.0


def test_mae_matches_explicit_loop():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(10, 3))
    b = rng.normal(size=(10, 3))
    total = 0.0
    for i in range(10):
        for c in range(3):
            total += abs(a[i, c] - b[i, c])
    assert abs(mae(a, b) - total / 30) < 1e-15


def test_mae_length_mismatch():
    with pytest.raises(ContractViolationError):
        mae([1.0, 2.0], [1.0])


# --- evaluate_forward -----------------------------------------------------------


def test_analytic_model_is_a_fixed_point():
    spec = default_spec("linear_spring")
    state0 = perturb_initial_conditions(initial_conditions("linear_spring"), seed=900)
    report = evaluate_forward_functions(
        analytic_acceleration_fn(spec),
        lambda q: float(analytic_potential_from_positions(spec, q)),
        spec, state0, n_records=100,
    )
    assert report.diverged_at is None
    for key in ("lagrangian", "hamiltonian", "linear_momentum", "angular_momentum"):
        assert report.maes[key] < 1e-8
    assert abs(report.gauge_shift) < 1e-12


def test_report_lengths():
    spec = default_spec("linear_spring")
    params = _rich_pair_params(0)
    state0 = perturb_initial_conditions(initial_conditions("linear_spring"), seed=901)
    report = evaluate_forward(params, "mclnn", spec, state0, n_records=7)
    assert report.n_records == 7
    assert len(report.lagrangian_model) == 7
    assert len(report.lagrangian_true) == 7
    assert report.linear_momentum_model.shape == (7, 3)
    assert report.angular_momentum_true.shape == (7, 3)
    assert len(report.model_trajectory) == 7


def test_model_momentum_conservation_random_network():
    spec = default_spec("linear_spring")
    params = _rich_pair_params(1)
    state0 = perturb_initial_conditions(initial_conditions("linear_spring"), seed=902)
    report = evaluate_forward(params, "mclnn", spec, state0, n_records=100)
    p = report.linear_momentum_model
    l = report.angular_momentum_model
    assert np.abs(p - p[0]).max() < 1e-8
    assert np.abs(l - l[0]).max() < 1e-6


def test_gauge_shift_moves_raw_series():
    spec = default_spec("linear_spring")
    params = _rich_pair_params(2)
    state0 = perturb_initial_conditions(initial_conditions("linear_spring"), seed=903)
    report = evaluate_forward(params, "mclnn", spec, state0, n_records=10)
    np.testing.assert_allclose(
        report.lagrangian_model, report.lagrangian_model_raw - report.gauge_shift,
        atol=1e-12)
    np.testing.assert_allclose(
        report.hamiltonian_model, report.hamiltonian_model_raw + report.gauge_shift,
        atol=1e-12)


def test_divergence_truncates_report():
    spec = default_spec("linear_spring")
    state0 = perturb_initial_conditions(initial_conditions("linear_spring"), seed=904)

    def exploding_accel(state):
        return 1e5 * state.positions  # anti-restoring: runs away fast

    report = evaluate_forward_functions(
        exploding_accel, lambda q: 0.0, spec, state0, n_records=50)
    assert report.diverged_at is not None
    assert report.n_records < 50
    assert len(report.lagrangian_true) == report.n_records


def test_baseline_size_mismatch_rejected():
    spec = default_spec("linear_spring")  # 3 particles
    baseline_params = init_params((12, 8, 1), seed=0)  # built for 4 particles
    with pytest.raises(UnsupportedOperationError):
        model_functions(baseline_params, "baseline", spec)


# --- generalization ---------------------------------------------------------------


def test_generalization_runs_on_larger_system():
    params = _rich_pair_params(3)
    spec = default_spec("linear_spring")
    report = generalization_eval(params, spec, n_large=6, seed=11, n_records=10)
    assert report.n_records == 10
    p = report.linear_momentum_model
    assert np.abs(p - p[0]).max() < 1e-8


def test_generalization_rejects_same_size_and_baseline():
    spec = default_spec("linear_spring")
    with pytest.raises(ContractViolationError):
        generalization_eval(_rich_pair_params(4), spec, n_large=3, seed=1)
    baseline_params = init_params((9, 8, 1), seed=0)
    with pytest.raises(UnsupportedOperationError):
        generalization_eval(baseline_params, spec, n_large=6, seed=1)


# --- cluster intervals ----------------------------------------------------------------


def test_cluster_intervals_single_cluster():
    values = np.linspace(1.0, 2.0, 50)
    assert cluster_intervals(values) == [(1.0, 2.0)]


def test_cluster_intervals_two_clusters():
    values = np.concatenate([np.linspace(1, 2, 40), np.linspace(8, 12, 40)])
    intervals = cluster_intervals(values)
    assert len(intervals) == 2
    assert intervals[0] == (1.0, 2.0)
    assert intervals[1] == (8.0, 12.0)


def test_in_any_interval():
    flags = in_any_interval(np.array([0.5, 1.5, 5.0, 9.0]), [(1.0, 2.0), (8.0, 12.0)])
    assert flags.tolist() == [False, True, False, True]


def test_cluster_intervals_empty_and_constant():
    assert cluster_intervals([]) == []
    assert cluster_intervals([2.0, 2.0]) == [(2.0, 2.0)]


# --- potential curve --------------------------------------------------------------------


def test_potential_curve_grid_and_offset():
    spec = default_spec("linear_spring")
    params = _rich_pair_params(5)
    training_r = np.linspace(0.9, 1.6, 200)
    curve = export_potential_curve(params, spec, 0.5, 2.5, 101,
                                   training_r_values=training_r)
    assert len(curve.r) == 101
    assert curve.r[0] == 0.5 and curve.r[-1] == 2.5
    flags = (curve.r >= 0.9) & (curve.r <= 1.6)
    assert np.array_equal(curve.in_range, flags)
    expected_offset = float(np.mean(curve.v_analytic[flags] - curve.v_learned[flags]))
    assert abs(curve.offset - expected_offset) < 1e-14
    np.testing.assert_allclose(curve.v_learned_shifted,
                               curve.v_learned + curve.offset, atol=1e-14)
    in_err = np.abs(curve.v_learned_shifted - curve.v_analytic)[flags]
    # shifted curve has zero mean error on the in-range grid by construction
    assert abs(np.mean((curve.v_learned_shifted - curve.v_analytic)[flags])) < 1e-12


def test_potential_curve_validation():
    spec = default_spec("gravity")
    params = _rich_pair_params(6)
    with pytest.raises(ContractViolationError):
        export_potential_curve(params, spec, 2.0, 1.0, 10)
    with pytest.raises(ContractViolationError):
        export_potential_curve(params, spec, 0.0, 1.0, 10)
    with pytest.raises(ContractViolationError):
        export_potential_curve(params, spec, 0.5, 1.0, 1)


# --- CSV output ----------------------------------------------------------------------------


def test_report_csv_schema(tmp_path):
    spec = default_spec("linear_spring")
    params = _rich_pair_params(7)
    state0 = perturb_initial_conditions(initial_conditions("linear_spring"), seed=905)
    report = evaluate_forward(params, "mclnn", spec, state0, n_records=5)
    path = tmp_path / "report.csv"
    write_report_csv(path, report)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(REPORT_HEADER)
    assert len(lines) == 6
    write_report_csv(tmp_path / "again.csv", report)
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_potential_curve_csv_schema(tmp_path):
    spec = default_spec("linear_spring")
    params = _rich_pair_params(8)
    curve = export_potential_curve(params, spec, 0.5, 2.0, 25,
                                   training_r_values=np.linspace(0.9, 1.5, 50))
    path = tmp_path / "curve.csv"
    write_potential_curve_csv(path, curve)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(CURVE_HEADER)
    assert len(lines) == 26
