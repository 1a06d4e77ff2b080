"""Figure rendering for the report path.

The delimited report stays the contract; these charts are a convenience
written next to it. One grouped bar chart per metric (lr, lc, bleu),
with pool/shots combinations on the x axis and one bar per model. The
lr chart shades the compliance band.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .corpus import COMPLIANCE_MAX, COMPLIANCE_MIN  # noqa: E402

_METRICS = ("lr", "lc", "bleu")
_LABELS = {"lr": "length ratio", "lc": "length compliance (%)",
           "bleu": "BLEU"}


def render_figures(rows: Sequence[Mapping], out_dir: str | Path
                   ) -> list[Path]:
    """Render one PNG per metric from report rows; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    models = sorted({r["model"] for r in rows})
    conditions = []
    for r in rows:
        key = (r["pool_type"], r["shots"])
        if key not in conditions:
            conditions.append(key)
    written = []
    for metric in _METRICS:
        fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(conditions)), 4))
        width = 0.8 / max(1, len(models))
        for mi, model in enumerate(models):
            xs, ys = [], []
            for ci, cond in enumerate(conditions):
                match = [r for r in rows
                         if (r["pool_type"], r["shots"]) == cond
                         and r["model"] == model
                         and r.get(metric) not in (None, "")]
                if match:
                    xs.append(ci + mi * width)
                    ys.append(match[0][metric])
            ax.bar(xs, ys, width=width, label=model)
        if metric == "lr":
            ax.axhspan(COMPLIANCE_MIN, COMPLIANCE_MAX, color="green",
                       alpha=0.12, label="compliance band")
            ax.axhline(1.0, color="green", linewidth=0.8, alpha=0.6)
        ax.set_xticks([i + width * (len(models) - 1) / 2
                       for i in range(len(conditions))])
        ax.set_xticklabels([f"{p}\n{s}-shot" for p, s in conditions],
                           fontsize=8)
        ax.set_ylabel(_LABELS[metric])
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / f"{metric}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
