import csv
import hashlib

import numpy as np
import pytest

from mclnn_figures import FigureSpec, SchemaError, render
from mclnn_figures.cli import main
from mclnn_figures.schemas import (
    CURVE_COLUMNS,
    REPORT_COLUMNS,
    SCATTER_COLUMNS,
    read_csv_columns,
)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return str(path)


def _report_csv(path, n=40, amplitude=1.0):
    rng = np.random.default_rng(n)
    rows = []
    for rec in range(n):
        t = 0.1 * rec
        l_true = np.sin(t)
        h_true = 1.0
        model_noise = amplitude * 0.01 * rng.normal()
        row = [rec,
               l_true + model_noise, l_true, h_true + model_noise, h_true,
               0.1 + model_noise, 0.1, -0.2, -0.2, 0.0, 0.0,
               0.3, 0.3, 0.0, 0.0, 0.05 + model_noise, 0.05]
        rows.append([f"{x:.17g}" if isinstance(x, float) else x for x in row])
    return _write_csv(path, REPORT_COLUMNS, rows)


def _curve_csv(path, n=50, any_in_range=True):
    rows = []
    for i in range(n):
        r = 0.5 + 2.0 * i / (n - 1)
        v_an = 0.5 * (r - 1.0) ** 2
        in_range = int(any_in_range and 0.9 <= r <= 1.8)
        rows.append([f"{r:.17g}", f"{v_an + 0.3:.17g}", f"{v_an + 0.01:.17g}",
                     f"{v_an:.17g}", in_range])
    return _write_csv(path, CURVE_COLUMNS, rows)


def _scatter_csv(path, n=200):
    rng = np.random.default_rng(0)
    rows = []
    for _ in range(n):
        a = rng.normal()
        rows.append([f"{a:.17g}", f"{a + 0.02 * rng.normal():.17g}"])
    return _write_csv(path, SCATTER_COLUMNS, rows)


def _sha256(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


# --- rendering each documented schema ---------------------------------------------


def test_conservation_panel_renders(tmp_path):
    report = _report_csv(tmp_path / "report.csv")
    out = tmp_path / "panel.png"
    render(FigureSpec([report], "conservation-panel", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_conservation_panel_multiple_models_and_divergence(tmp_path):
    full = _report_csv(tmp_path / "report_mclnn.csv", n=50)
    short = _report_csv(tmp_path / "report_baseline.csv", n=20, amplitude=30.0)
    out = tmp_path / "compare.png"
    render(FigureSpec([full, short], "conservation-panel", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_generalization_panel_renders(tmp_path):
    report = _report_csv(tmp_path / "report.csv")
    out = tmp_path / "general.png"
    render(FigureSpec([report], "generalization-panel", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_potential_curve_renders_with_and_without_shading(tmp_path):
    shaded = _curve_csv(tmp_path / "curve.csv", any_in_range=True)
    bare = _curve_csv(tmp_path / "bare.csv", any_in_range=False)
    out1, out2 = tmp_path / "c1.png", tmp_path / "c2.png"
    render(FigureSpec([shaded], "potential-curve", str(out1)))
    render(FigureSpec([bare], "potential-curve", str(out2)))
    assert out1.exists() and out2.exists()
    assert _sha256(out1) != _sha256(out2)


def test_potential_curve_raw_flag_changes_output(tmp_path):
    curve = _curve_csv(tmp_path / "curve.csv")
    out1, out2 = tmp_path / "c1.png", tmp_path / "c2.png"
    render(FigureSpec([curve], "potential-curve", str(out1)))
    render(FigureSpec([curve], "potential-curve", str(out2), show_raw_curve=True))
    assert _sha256(out1) != _sha256(out2)


def test_force_scatter_renders(tmp_path):
    scatter = _scatter_csv(tmp_path / "scatter.csv")
    out = tmp_path / "scatter.png"
    render(FigureSpec([scatter], "force-scatter", str(out)))
    assert out.exists() and out.stat().st_size > 0


# --- determinism -------------------------------------------------------------------


@pytest.mark.parametrize("kind,maker", [
    ("conservation-panel", _report_csv),
    ("generalization-panel", _report_csv),
    ("potential-curve", _curve_csv),
    ("force-scatter", _scatter_csv),
])
def test_rendering_is_checksum_deterministic(tmp_path, kind, maker):
    src = maker(tmp_path / "input.csv")
    out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
    render(FigureSpec([src], kind, str(out1)))
    render(FigureSpec([src], kind, str(out2)))
    assert _sha256(out1) == _sha256(out2)


def test_rendering_does_not_modify_inputs(tmp_path):
    src = _report_csv(tmp_path / "input.csv")
    before = open(src, "rb").read()
    render(FigureSpec([src], "conservation-panel", str(tmp_path / "x.png")))
    assert open(src, "rb").read() == before


# --- schema validation -----------------------------------------------------------------


def test_missing_columns_named(tmp_path):
    bad = _write_csv(tmp_path / "bad.csv", ["record", "L_model"], [[0, 1.0]])
    with pytest.raises(SchemaError) as excinfo:
        render(FigureSpec([bad], "conservation-panel", str(tmp_path / "x.png")))
    assert "L_true" in str(excinfo.value)
    assert "H_model" in str(excinfo.value)
    assert excinfo.value.missing  # structured list of names


def test_wrong_schema_for_kind_rejected(tmp_path):
    curve = _curve_csv(tmp_path / "curve.csv")
    with pytest.raises(SchemaError):
        render(FigureSpec([curve], "force-scatter", str(tmp_path / "x.png")))


def test_read_csv_columns_keeps_extras(tmp_path):
    path = _write_csv(tmp_path / "extra.csv", ["a_true", "a_pred", "extra"],
                      [[1.0, 1.1, 9.0]])
    data = read_csv_columns(path, SCATTER_COLUMNS)
    assert "extra" in data


# --- CLI ------------------------------------------------------------------------------------


def test_cli_renders(tmp_path):
    report = _report_csv(tmp_path / "report.csv")
    out = tmp_path / "cli.png"
    assert main(["--kind", "conservation-panel", "--in", report,
                 "--out", str(out)]) == 0
    assert out.exists()


def test_cli_schema_error_exit_2(tmp_path, capsys):
    bad = _write_csv(tmp_path / "bad.csv", ["r"], [[1.0]])
    code = main(["--kind", "potential-curve", "--in", bad,
                 "--out", str(tmp_path / "x.png")])
    assert code == 2
    err = capsys.readouterr().err
    assert "V_learned" in err


def test_cli_missing_input_exit_4(tmp_path):
    code = main(["--kind", "force-scatter", "--in", str(tmp_path / "gone.csv"),
                 "--out", str(tmp_path / "x.png")])
    assert code == 4
