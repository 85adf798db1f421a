"""Delimited reports and matplotlib figures for suite runs.

Everything here is deterministic for a fixed (config, seed): tables use
fixed-width float formatting and figures carry no timestamps.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import SceneRun
from .volume import signed_volume_entropy

__all__ = [
    "scene_label",
    "suite_table",
    "format_table",
    "write_csv",
    "save_epe_figure",
    "save_entropy_figure",
    "save_probe_figure",
]

SUITE_HEADER = [
    "scene",
    "kind",
    "density",
    "noise",
    "epe_base",
    "epe_final",
    "bad1_base",
    "bad1_final",
    "d1_base",
    "d1_final",
    "improvement_pct",
]


def scene_label(run: SceneRun, index: int) -> str:
    spec = run.spec
    if spec is None:
        return f"pair_{index:02d}"
    if spec.constant is not None:
        return f"const_{spec.constant:g}"
    if len(spec.planes) == 1:
        return f"plane_{spec.planes[0].a:g}_{spec.planes[0].b:g}"
    return f"boxes_{len(spec.planes) - 1}"


def suite_table(runs: list[SceneRun]) -> tuple[list[str], list[list[str]]]:
    """Per-scene metric rows plus a trailing mean row."""
    rows = []
    epe_base, epe_final = [], []
    for i, run in enumerate(runs):
        if run.baseline_report is None or run.final_report is None:
            continue
        base, final = run.baseline_report, run.final_report
        improvement = 100.0 * (base.epe - final.epe) / base.epe if base.epe > 0 else 0.0
        spec = run.spec
        rows.append(
            [
                scene_label(run, i),
                "constant" if spec and spec.constant is not None else "planar",
                f"{spec.density:.2f}" if spec else "",
                f"{spec.noise_sigma:.3f}" if spec else "",
                f"{base.epe:.4f}",
                f"{final.epe:.4f}",
                f"{base.bad_1:.2f}",
                f"{final.bad_1:.2f}",
                f"{base.d1_all:.2f}",
                f"{final.d1_all:.2f}",
                f"{improvement:.2f}",
            ]
        )
        epe_base.append(base.epe)
        epe_final.append(final.epe)
    if epe_base:
        mean_base = float(np.mean(epe_base))
        mean_final = float(np.mean(epe_final))
        mean_gain = 100.0 * (mean_base - mean_final) / mean_base if mean_base > 0 else 0.0
        rows.append(
            [
                "mean",
                "",
                "",
                "",
                f"{mean_base:.4f}",
                f"{mean_final:.4f}",
                "",
                "",
                "",
                "",
                f"{mean_gain:.2f}",
            ]
        )
    return SUITE_HEADER, rows


def format_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def write_csv(path: str | Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def save_epe_figure(path: str | Path, runs: list[SceneRun]) -> None:
    """Grouped bars: baseline vs integrated end-point error per scene."""
    labels, base, final = [], [], []
    for i, run in enumerate(runs):
        if run.baseline_report is None or run.final_report is None:
            continue
        labels.append(scene_label(run, i))
        base.append(run.baseline_report.epe)
        final.append(run.final_report.epe)
    if not labels:
        return
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(max(6.0, 0.5 * len(labels)), 3.5))
    ax.bar(x - 0.2, base, width=0.4, label="baseline")
    ax.bar(x + 0.2, final, width=0.4, label="filtered")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("EPE [px]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_entropy_figure(path: str | Path, traces: list[list[float]], labels: list[str] | None = None) -> None:
    """Mean filter-volume entropy across sampling steps, one line per run."""
    if not traces:
        return
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for i, trace in enumerate(traces):
        label = labels[i] if labels else None
        ax.plot(range(1, len(trace) + 1), trace, marker="o", lw=1.0, label=label)
    ax.set_xlabel("sampling step")
    ax.set_ylabel("mean column entropy [nats]")
    if labels:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_probe_figure(
    path: str | Path,
    snapshots: list[np.ndarray],
    pixel: tuple[int, int],
    timesteps: list[int],
) -> None:
    """Per-step filter column histograms at one pixel, entropy in the title.

    One panel per sampling step, showing the renormalized filter column
    over disparity levels as it sharpens toward a unimodal distribution.
    """
    x, y = pixel
    n = len(snapshots)
    fig, axes = plt.subplots(1, n, figsize=(2.4 * n, 2.6), sharey=True)
    if n == 1:
        axes = [axes]
    for ax, dv, t in zip(axes, snapshots, timesteps):
        unit = np.clip((dv[:, y, x] + 1.0) / 2.0, 0.0, None)
        total = unit.sum()
        column = unit / total if total > 0 else np.full_like(unit, 1.0 / unit.size)
        entropy = float(signed_volume_entropy(dv[:, y : y + 1, x : x + 1])[0, 0])
        ax.bar(np.arange(column.size), column, width=1.0)
        ax.set_title(f"t={t}\nH={entropy:.2f}", fontsize=8)
        ax.set_xlabel("level", fontsize=7)
    axes[0].set_ylabel("weight")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
