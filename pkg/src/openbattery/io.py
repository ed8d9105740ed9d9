"""Deterministic CSV / JSON / SVG writers.

Every CSV starts with a ``# schema: <name>/<version> <col,col,...>`` line.
Floats are written with 17 significant digits so files round-trip exactly,
and all writes go through a temporary file followed by a rename.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

SCHEMA_VERSION = 1


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".17g")
    return str(v)


def atomic_write_text(path, text: str):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path, schema: str, columns, rows):
    lines = [f"# schema: {schema}/{SCHEMA_VERSION} {','.join(columns)}", ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Returns ``(schema_line, columns, rows)`` with numeric fields parsed."""
    with open(path) as fh:
        schema = fh.readline().rstrip("\n")
        columns = fh.readline().rstrip("\n").split(",")
        rows = []
        for line in fh:
            row = []
            for tok in line.rstrip("\n").split(","):
                try:
                    row.append(float(tok))
                except ValueError:
                    row.append(tok)
            rows.append(row)
    return schema, columns, rows


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def line_chart_svg(path, series, xlabel, ylabel, title=""):
    """Static line chart; ``series`` maps a label to ``(x, y)`` arrays."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "openbattery", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for label, (x, y) in series.items():
            ax.plot(x, y, label=label, lw=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        tmp = Path(path).with_name(Path(path).name + ".tmp")
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        plt.close(fig)
    os.replace(tmp, path)
