"""Deterministic CSV/JSON table writers shared by the output types and the CLI.

Floats are serialized with repr (shortest round-trip form) so identical runs
produce byte-identical files; no timestamps or absolute paths are embedded.
"""

from __future__ import annotations

import json
import math


def format_cell(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(x) for x in row) + "\n")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_json_table(path, header: list[str], rows, metadata: dict) -> None:
    payload = {
        "columns": list(header),
        "rows": [[None if isinstance(x, float) and math.isnan(x) else x for x in row]
                 for row in rows],
        "metadata": metadata,
    }
    write_json(path, payload)
