"""Figure builders: conservation panels, potential curves, force scatters.

Layouts are fixed and all styling is pinned explicitly so identical inputs
produce checksum-identical PNGs.
"""

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import (
    CURVE_COLUMNS,
    REPORT_COLUMNS,
    SCATTER_COLUMNS,
    SchemaError,
    read_csv_columns,
)

DPI = 150

_RC = {
    "figure.dpi": DPI,
    "savefig.dpi": DPI,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "mclnn-figures",
}

_MODEL_COLORS = ["#d62728", "#1f77b4", "#9467bd", "#8c564b"]
_TRUTH_COLOR = "#222222"

KINDS = ("conservation-panel", "generalization-panel", "potential-curve",
         "force-scatter")


@dataclass
class FigureSpec:
    """One rendering job: input CSVs, figure kind, output path, options."""

    inputs: list
    kind: str
    output: str
    show_raw_curve: bool = False
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        for path in self.inputs:
            if not Path(path).exists():
                raise FileNotFoundError(f"input CSV not found: {path}")


def _label_for(spec, index):
    if index < len(spec.labels):
        return spec.labels[index]
    stem = Path(spec.inputs[index]).stem
    return stem.replace("report_", "") or f"model {index + 1}"


def _save(fig, output):
    fig.savefig(output, dpi=DPI, format="png",
                metadata={"Software": "mclnn-figures"})
    plt.close(fig)


def _momentum_norm(data, prefix, who):
    comps = [data[f"{axis}_{who}"] for axis in (f"{prefix}x", f"{prefix}y",
                                                f"{prefix}z")]
    return np.sqrt(sum(c * c for c in comps))


_QUANTITIES = (
    ("Lagrangian", lambda d, who: d[f"L_{who}"]),
    ("Hamiltonian", lambda d, who: d[f"H_{who}"]),
    ("linear momentum", lambda d, who: _momentum_norm(d, "p", who)),
    ("angular momentum", lambda d, who: _momentum_norm(d, "l", who)),
)


def render_conservation_panel(spec: FigureSpec) -> str:
    """2x4 panel: per-quantity series (top) and |model - truth| (bottom).

    Every input is a conservation-report CSV; the first provides the
    ground-truth curves. Inputs shorter than the longest one get a
    divergence marker where they stop.
    """
    reports = [read_csv_columns(path, REPORT_COLUMNS) for path in spec.inputs]
    longest = max(len(r["record"]) for r in reports)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 4, figsize=(13, 5.5))
        truth = reports[0]
        for col, (title, extract) in enumerate(_QUANTITIES):
            ax_series, ax_error = axes[0, col], axes[1, col]
            ax_series.plot(truth["record"], extract(truth, "true"),
                           color=_TRUTH_COLOR, label="ground truth")
            for m, report in enumerate(reports):
                color = _MODEL_COLORS[m % len(_MODEL_COLORS)]
                label = _label_for(spec, m)
                series = extract(report, "model")
                records = report["record"]
                ax_series.plot(records, series, linestyle="--", color=color,
                               label=label)
                err = np.abs(series - extract(report, "true"))
                ax_error.plot(records, err, color=color, label=label)
                if len(records) < longest:
                    for ax in (ax_series, ax_error):
                        ax.axvline(records[-1], color=color, linestyle=":",
                                   linewidth=1.0)
                    ax_series.annotate("diverged", (records[-1], series[-1]),
                                       color=color, fontsize=7,
                                       xytext=(2, 2), textcoords="offset points")
            ax_series.set_title(title)
            ax_error.set_yscale("log")
            ax_error.set_xlabel("record")
            if col == 0:
                ax_series.set_ylabel("value")
                ax_error.set_ylabel("|model - truth|")
                ax_series.legend(loc="best")
        fig.tight_layout()
        _save(fig, spec.output)
    return spec.output


def render_generalization_panel(spec: FigureSpec) -> str:
    """1x3 panel for unseen-size runs: Lagrangian overlay plus momentum
    drift of the model rollout (conservation at the new size)."""
    reports = [read_csv_columns(path, REPORT_COLUMNS) for path in spec.inputs]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
        truth = reports[0]
        axes[0].plot(truth["record"], truth["L_true"], color=_TRUTH_COLOR,
                     label="ground truth")
        for m, report in enumerate(reports):
            color = _MODEL_COLORS[m % len(_MODEL_COLORS)]
            label = _label_for(spec, m)
            axes[0].plot(report["record"], report["L_model"], "--", color=color,
                         label=label)
            axes[1].plot(report["record"],
                         np.abs(report["L_model"] - report["L_true"]),
                         color=color, label=label)
            p = _momentum_norm(report, "p", "model")
            l = _momentum_norm(report, "l", "model")
            axes[2].plot(report["record"], np.abs(p - p[0]), color=color,
                         label=f"{label} linear")
            axes[2].plot(report["record"], np.abs(l - l[0]), ":", color=color,
                         label=f"{label} angular")
        axes[0].set_title("Lagrangian at unseen size")
        axes[0].set_ylabel("L")
        axes[0].legend(loc="best")
        axes[1].set_title("|L error|")
        axes[1].set_yscale("log")
        axes[2].set_title("momentum drift")
        axes[2].set_yscale("log")
        axes[2].legend(loc="best")
        for ax in axes:
            ax.set_xlabel("record")
        fig.tight_layout()
        _save(fig, spec.output)
    return spec.output


def _shade_in_range(ax, r, in_range):
    flags = in_range.astype(bool)
    if not flags.any():
        return
    edges = np.flatnonzero(np.diff(np.concatenate([[0], flags.view(np.int8), [0]])))
    for lo, hi in zip(edges[::2], edges[1::2]):
        ax.axvspan(r[lo], r[min(hi, len(r)) - 1], color="#cfe2f3", zorder=0)


def render_potential_curve(spec: FigureSpec) -> str:
    """Learned vs analytic pair potential with the training range shaded.

    Plots the offset-corrected learned curve; ``show_raw_curve`` adds the
    uncorrected network output.
    """
    curve = read_csv_columns(spec.inputs[0], CURVE_COLUMNS)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        _shade_in_range(ax, curve["r"], curve["in_range"])
        ax.plot(curve["r"], curve["V_analytic"], color=_TRUTH_COLOR,
                label="analytic")
        ax.plot(curve["r"], curve["V_learned_shifted"], "--",
                color=_MODEL_COLORS[0], label="learned (offset-corrected)")
        if spec.show_raw_curve:
            ax.plot(curve["r"], curve["V_learned"], ":",
                    color=_MODEL_COLORS[1], label="learned (raw)")
        ax.set_xlabel("pair distance")
        ax.set_ylabel("pair potential")
        ax.set_title("learned pair potential")
        ax.legend(loc="best")
        fig.tight_layout()
        _save(fig, spec.output)
    return spec.output


def render_force_scatter(spec: FigureSpec) -> str:
    """Predicted vs true acceleration components with the identity line and
    the least-squares slope in the title."""
    data = read_csv_columns(spec.inputs[0], SCATTER_COLUMNS)
    a_true, a_pred = data["a_true"], data["a_pred"]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 4.0))
        lo = float(min(a_true.min(), a_pred.min()))
        hi = float(max(a_true.max(), a_pred.max()))
        pad = 0.05 * (hi - lo or 1.0)
        ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], color="#999999",
                linewidth=1.0, zorder=1)
        ax.scatter(a_true, a_pred, s=6, color=_MODEL_COLORS[1], alpha=0.6,
                   linewidths=0, zorder=2)
        slope = (float(np.polyfit(a_true, a_pred, 1)[0])
                 if a_true.std() > 0 else float("nan"))
        ax.set_xlabel("true acceleration component")
        ax.set_ylabel("predicted acceleration component")
        ax.set_title(f"held-out force fidelity (slope {slope:.3f})")
        ax.set_xlim(lo - pad, hi + pad)
        ax.set_ylim(lo - pad, hi + pad)
        fig.tight_layout()
        _save(fig, spec.output)
    return spec.output


_RENDERERS = {
    "conservation-panel": render_conservation_panel,
    "generalization-panel": render_generalization_panel,
    "potential-curve": render_potential_curve,
    "force-scatter": render_force_scatter,
}


def render(spec: FigureSpec) -> str:
    """Dispatch a FigureSpec to its renderer; returns the output path."""
    return _RENDERERS[spec.kind](spec)
