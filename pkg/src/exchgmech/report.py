"""Rendering of reports as JSON, CSV and aligned plain-text tables.

JSON and CSV keep full float precision (``repr``) so both carry identical
numbers; tables trim to six decimals for reading.
"""

from __future__ import annotations

import csv
import io
import json
import math


def fmt(value) -> str:
    """Human-oriented number formatting: at most six decimals, trailing zeros trimmed."""
    if isinstance(value, bool) or not isinstance(value, float):
        return str(value)
    if math.isinf(value) or math.isnan(value):
        return str(value)
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def table(headers: list[str], rows: list[list]) -> str:
    cells = [[fmt(c) for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _summary_items(report: dict) -> list[tuple[str, object]]:
    items = []
    for key in sorted(report):
        value = report[key]
        if key == "config":
            items.extend((f"config.{k}", v) for k, v in sorted(value.items()))
        elif not isinstance(value, (list, dict)):
            items.append((key, value))
    return items


def _rows(report: dict) -> tuple[list[str], list[list]]:
    if report.get("mode") == "ratio":
        headers = ["trial", "n", "opt_welfare", "achieved_welfare", "ratio"]
        return headers, [[r[h] for h in headers] for r in report["rows"]]
    headers = [
        "case", "agent", "report", "scope", "truthful_utility", "deviating_utility", "gain",
    ]
    rows = []
    for w in report.get("witnesses", []):
        for v in w["violations"]:
            rows.append([w["case"]] + [v[h] for h in headers[1:]])
    return headers, rows


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    for key, value in _summary_items(report):
        buf.write(f"# {key}={json.dumps(value)}\n")
    headers, rows = _rows(report)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(headers)
    for row in rows:
        writer.writerow([repr(c) if isinstance(c, float) else c for c in row])
    return buf.getvalue()


def to_table(report: dict) -> str:
    out = [table(["field", "value"], [[k, v] for k, v in _summary_items(report)])]
    headers, rows = _rows(report)
    if rows:
        out.append(table(headers, rows))
    return "\n".join(out)


RENDERERS = {"json": to_json, "csv": to_csv, "table": to_table}


def render(report: dict, output_format: str) -> str:
    return RENDERERS[output_format](report)
