"""Figures for sweep and validation reports, written straight to files."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {"analytic_approx": "-o", "analytic_exact": "--s", "mcpt": ":^"}


def _curves(rows):
    curves = {}
    for row in rows:
        if row.result is None:
            continue
        r, l_db = row.r, row.result.l_db
        curves.setdefault(row.model.value, ([], []))
        curves[row.model.value][0].append(r)
        curves[row.model.value][1].append(l_db)
    return curves


def plot_sweep(rows, path, title: str = "", reference=None) -> None:
    """Path loss against range, one curve per model.

    ``reference`` optionally adds rows from a second sweep (e.g. with the
    obstacle removed) drawn in grey.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    for model, (r, l_db) in _curves(rows).items():
        ax.plot(r, l_db, _STYLE.get(model, "-"), label=model)
    if reference:
        for model, (r, l_db) in _curves(reference).items():
            ax.plot(r, l_db, _STYLE.get(model, "-"), color="0.6", label=f"{model}, no obstacle")
    ax.set_xlabel("range r (m)")
    ax.set_ylabel("path loss (dB)")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_validation(rows, deltas, path, title: str = "") -> None:
    """Curves on top, per-range differences against the reference model below."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 6), sharex=True,
                                      gridspec_kw={"height_ratios": [2, 1]})
    for model, (r, l_db) in _curves(rows).items():
        top.plot(r, l_db, _STYLE.get(model, "-"), label=model)
    top.set_ylabel("path loss (dB)")
    top.grid(alpha=0.3)
    top.legend()
    if title:
        top.set_title(title)
    for label, (r, d) in deltas.items():
        bottom.plot(r, d, "-o", label=label)
    bottom.axhline(0.0, color="0.5", lw=0.8)
    bottom.set_xlabel("range r (m)")
    bottom.set_ylabel("difference (dB)")
    bottom.grid(alpha=0.3)
    if deltas:
        bottom.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
