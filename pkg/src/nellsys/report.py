"""Report documents: canonical JSON and CSV serialization.

A report carries a machine-readable payload plus a provenance block
(grid, tolerances, seed, wall time) from which every number in the
payload is reproducible.  JSON serialization is canonical (sorted keys,
fixed indentation), so parse -> serialize round-trips byte-identically;
CSV prints numbers with 17 significant digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class ReportDocument:
    command: str
    payload: dict
    provenance: dict
    csv_table: tuple[list[str], list[list]] | None = field(default=None, repr=False)

    def to_tree(self) -> dict:
        return {"command": self.command, "payload": self.payload,
                "provenance": self.provenance}

    def to_json(self) -> str:
        return canonical_json(self.to_tree())

    def to_csv(self) -> str:
        if self.csv_table is not None:
            header, rows = self.csv_table
        else:
            header = ["name", "value"]
            rows = sorted(_flatten(self.payload).items())
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"


def canonical_json(tree: dict) -> str:
    return json.dumps(tree, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _flatten(tree, prefix: str = "") -> dict:
    flat = {}
    if isinstance(tree, dict):
        for key, val in tree.items():
            flat.update(_flatten(val, f"{prefix}.{key}" if prefix else str(key)))
    elif isinstance(tree, (list, tuple)):
        for i, val in enumerate(tree):
            flat.update(_flatten(val, f"{prefix}[{i}]"))
    else:
        flat[prefix] = tree
    return flat


def node_table(grid, fields: dict[str, "object"]) -> tuple[list[str], list[list]]:
    """One row per grid node with columns x1, x2 and the given fields."""
    header = ["x1", "x2", *fields.keys()]
    columns = [grid.x, grid.y, *(f.values for f in fields.values())]
    rows = [[float(col[k]) for col in columns] for k in range(grid.n_nodes)]
    return header, rows


def export_result(report: ReportDocument, fmt: str = "json") -> bytes:
    """Serialize a report to bytes in json or csv format."""
    if fmt == "json":
        return report.to_json().encode("utf-8")
    if fmt == "csv":
        return report.to_csv().encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")
