"""Serialized run reports: JSON, delimited sweeps, and rendered figures.

Every JSON document carries a schemaVersion and keeps wall-clock timing in
its own top-level field, so reruns with the same seed are byte-identical
everywhere else.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

SCHEMA_VERSION = 1

CSV_COLUMNS = ("eps", "meanQueries", "maxQueries", "rejectionRate", "runtime")


def verdict_dict(verdict) -> dict:
    """Single-run outcome with the certificate spelled out."""
    doc = {
        "decision": verdict.decision,
        "queriesUsed": verdict.queries_used,
        "budgetExhausted": verdict.budget_exhausted,
        "seed": verdict.seed,
        "witness": None,
    }
    w = verdict.witness
    if w is not None:
        doc["witness"] = {
            "level": w.level,
            "squareSide": w.k,
            "squareOrigin": list(w.origin),
            "kind": w.kind,
            "certificatePixels": [list(p) for p in w.pixels],
            "outsidePixel": list(w.outside_pixel),
        }
    return doc


def json_document(kind: str, result, timing_s: float | None = None) -> dict:
    doc = {"schemaVersion": SCHEMA_VERSION, "kind": kind, "result": result}
    if timing_s is not None:
        doc["timing"] = {"seconds": timing_s}
    return doc


def to_json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=str) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(to_json_text(obj))


def write_csv(rows, path, columns=CSV_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns),
                                extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def sibling_figure_path(out_path, suffix: str) -> Path:
    out = Path(out_path)
    return out.with_name(f"{out.stem}_{suffix}.png")


def _agg_pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_sweep_figures(rows, out_path) -> list[Path]:
    """Query scaling (log-log in 1/eps) and rejection rates, one PNG each."""
    plt = _agg_pyplot()
    inv_eps = [float(1 / Fraction(r["eps"])) for r in rows]
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(inv_eps, [r["meanQueries"] for r in rows], "o-", label="mean")
    ax.loglog(inv_eps, [r["maxQueries"] for r in rows], "s--", label="max")
    ax.set_xlabel("1 / eps")
    ax.set_ylabel("queries")
    ax.set_title("Query count scaling")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    path = sibling_figure_path(out_path, "queries")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [r["eps"] for r in rows]
    ax.bar(range(len(rows)), [r["rejectionRate"] for r in rows])
    ax.set_xticks(range(len(rows)), labels, rotation=45)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("eps")
    ax.set_ylabel("rejection rate")
    ax.set_title("Rejection rates")
    path = sibling_figure_path(out_path, "rates")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written


def render_probability_figure(entries, out_path) -> Path:
    """Bar chart of exact revealing probabilities with Monte Carlo error
    bars; entries hold name, exact, mc, mcStderr."""
    plt = _agg_pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = range(len(entries))
    ax.bar(xs, [e["exact"] for e in entries], alpha=0.7, label="exact")
    ax.errorbar(
        xs, [e["mc"] for e in entries],
        yerr=[3 * e["mcStderr"] for e in entries],
        fmt="k.", capsize=4, label="Monte Carlo (3 sigma)",
    )
    ax.axhline(1 / 3, color="red", linestyle=":", label="1/3")
    ax.set_xticks(list(xs), [e["name"] for e in entries], rotation=30)
    ax.set_ylabel("Pr[revealing]")
    ax.set_title("Query strategies against the hard distribution")
    ax.legend()
    path = sibling_figure_path(out_path, "revealing")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_instance_figure(image_bits, out_path, title: str = "") -> Path:
    plt = _agg_pyplot()
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(image_bits, cmap="gray_r", interpolation="nearest")
    ax.set_title(title)
    ax.set_axis_off()
    path = sibling_figure_path(out_path, "image")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path
