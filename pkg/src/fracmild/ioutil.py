"""Serialization helpers.

All floating point values written by the package go through ``fmt17``,
which prints 17 significant digits so that every IEEE-754 double
round-trips exactly through text.
"""
from __future__ import annotations

import json

import numpy as np


def fmt17(x) -> str:
    """Format a float with 17 significant digits (exact double round-trip)."""
    return format(float(x), ".17g")


def float_list_json(values) -> str:
    """Render a 1-d array as a JSON list of 17-digit floats."""
    return "[" + ", ".join(fmt17(v) for v in np.asarray(values, dtype=float).ravel()) + "]"


def dumps_with_arrays(scalars: dict, arrays: dict) -> str:
    """Serialize a flat document of scalar fields plus named float arrays.

    ``scalars`` is dumped through :mod:`json`; each entry of ``arrays`` is
    appended as a JSON list rendered by :func:`float_list_json` so the
    17-digit contract holds.
    """
    parts = []
    for key, value in scalars.items():
        parts.append(f"{json.dumps(key)}: {json.dumps(value)}")
    for key, value in arrays.items():
        parts.append(f"{json.dumps(key)}: {float_list_json(value)}")
    return "{" + ", ".join(parts) + "}"


def write_csv(path, header, rows):
    """Write rows of floats/strings as CSV with 17-digit float formatting."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [cell if isinstance(cell, str) else fmt17(cell) for cell in row]
            fh.write(",".join(cells) + "\n")
