"""Report emission: ablation-style metric tables and companion figures.

Reports mirror the HOTA / MOTA / FP / FN / IDs column layout; HOTA is not
implemented by this pipeline and is printed as ``n/a``. The figure renderer
writes a two-panel bar chart (MOTA, then error counts) next to the delimited
output.
"""

from __future__ import annotations

import csv
from typing import IO, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport

COLUMNS = ("method", "hota", "mota", "fp", "fn", "ids")


def report_row(name: str, report: EvalReport) -> dict[str, str]:
    return {
        "method": name,
        "hota": "n/a",
        "mota": f"{report.mota_pct:.2f}",
        "fp": str(report.fp),
        "fn": str(report.fn),
        "ids": str(report.id_switches),
    }


def write_report_csv(rows: Sequence[dict[str, str]], sink: IO[str]) -> None:
    writer = csv.DictWriter(sink, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


def read_report_csv(stream: IO[str]) -> list[dict[str, str]]:
    reader = csv.DictReader(stream)
    missing = set(COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"report csv missing columns: {sorted(missing)}")
    return [dict(row) for row in reader]


def format_report_text(rows: Sequence[dict[str, str]]) -> str:
    """Fixed-width table in the HOTA MOTA FP FN IDs column order."""
    headers = ("Method", "HOTA", "MOTA", "FP", "FN", "IDs")
    table = [headers] + [
        (r["method"], r["hota"], r["mota"], r["fp"], r["fn"], r["ids"]) for r in rows
    ]
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = []
    for row in table:
        cells = [row[0].ljust(widths[0])] + [
            row[i].rjust(widths[i]) for i in range(1, len(headers))
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def render_report_figure(rows: Sequence[dict[str, str]], path: str) -> None:
    """Save a bar-chart summary of the table: MOTA panel plus FP/FN/IDs panel."""
    methods = [r["method"] for r in rows]
    mota = [float(r["mota"]) for r in rows]
    fig, (ax_mota, ax_err) = plt.subplots(1, 2, figsize=(10, 4))

    xs = range(len(methods))
    ax_mota.bar(xs, mota, color="tab:blue")
    ax_mota.set_xticks(list(xs))
    ax_mota.set_xticklabels(methods, rotation=20, ha="right")
    ax_mota.set_ylabel("MOTA (%)")
    ax_mota.set_title("MOTA")

    width = 0.25
    for k, (key, color) in enumerate(
        (("fp", "tab:orange"), ("fn", "tab:red"), ("ids", "tab:green"))
    ):
        vals = [int(r[key]) for r in rows]
        ax_err.bar([x + (k - 1) * width for x in xs], vals, width, label=key.upper(), color=color)
    ax_err.set_xticks(list(xs))
    ax_err.set_xticklabels(methods, rotation=20, ha="right")
    ax_err.set_ylabel("count")
    ax_err.set_title("Errors")
    ax_err.legend()

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
