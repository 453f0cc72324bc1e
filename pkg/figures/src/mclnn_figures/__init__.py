"""Figure rendering for mclnn CSV outputs.

Pure file-in, file-out: reads the documented CSV schemas (conservation
reports, potential curves, force scatters), writes PNG files at a fixed DPI,
and never recomputes any physics. Input files are validated against their
schema before any drawing happens.
"""

from .schemas import SchemaError, read_csv_columns
from .render import (
    FigureSpec,
    render,
    render_conservation_panel,
    render_force_scatter,
    render_potential_curve,
)

__version__ = "0.1.0"

__all__ = [
    "FigureSpec",
    "SchemaError",
    "read_csv_columns",
    "render",
    "render_conservation_panel",
    "render_force_scatter",
    "render_potential_curve",
]
