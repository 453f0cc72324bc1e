"""CSV schemas of the simulation pipeline's outputs, and checked readers."""

import csv

import numpy as np


class SchemaError(ValueError):
    """An input CSV does not carry the columns its figure kind requires."""

    def __init__(self, path, missing):
        self.path = str(path)
        self.missing = list(missing)
        super().__init__(
            f"{path}: missing required columns: {', '.join(self.missing)}")


REPORT_COLUMNS = [
    "record",
    "L_model", "L_true", "H_model", "H_true",
    "px_model", "px_true", "py_model", "py_true", "pz_model", "pz_true",
    "lx_model", "lx_true", "ly_model", "ly_true", "lz_model", "lz_true",
]

CURVE_COLUMNS = ["r", "V_learned", "V_learned_shifted", "V_analytic", "in_range"]

SCATTER_COLUMNS = ["a_true", "a_pred"]


def read_csv_columns(path, required):
    """Read a CSV as {column: float array}, verifying ``required`` columns.

    Raises SchemaError naming every missing column. Extra columns are kept.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fieldnames = reader.fieldnames or []
        missing = [c for c in required if c not in fieldnames]
        if missing:
            raise SchemaError(path, missing)
        rows = list(reader)
    out = {}
    for name in fieldnames:
        out[name] = np.array([float(row[name]) for row in rows])
    return out
