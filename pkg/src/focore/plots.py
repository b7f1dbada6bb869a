"""Figure rendering for the report commands.

Each report command writes its delimited data first; these helpers render a
matching PNG next to it. Agg backend, fixed styling, no interactivity.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update(
    {
        "figure.figsize": (5.2, 3.4),
        "figure.dpi": 130,
        "font.size": 9,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "axes.grid": True,
        "grid.alpha": 0.3,
    }
)


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_bench(rows: list[dict], path: str) -> None:
    """Per-strategy mean steps and speedup from the aggregate rows."""
    agg = [r for r in rows if r["task"] == "ALL"]
    if not agg:
        return
    names = [r["strategy"] for r in agg]
    steps = [float(r["steps_used"]) for r in agg]
    speed = [float(r["steps_speedup"]) for r in agg]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.2, 3.2))
    x = np.arange(len(names))
    ax1.bar(x, steps, color="#4878b0")
    ax1.set_xticks(x, names, rotation=30, ha="right")
    ax1.set_ylabel("mean decode steps")
    ax2.bar(x, speed, color="#b04848")
    ax2.set_xticks(x, names, rotation=30, ha="right")
    ax2.set_ylabel("step speedup vs reference")
    ax2.axhline(1.0, color="black", lw=0.8, ls="--")
    _save(fig, path)


def plot_delta_grid(rows: list[dict], path: str) -> None:
    """Heatmap of mean confidence drop over (mask ratio, position)."""
    ratios = sorted({r["mask_ratio"] for r in rows})
    positions = sorted({r["position"] for r in rows})
    grid = np.zeros((len(ratios), len(positions)))
    for r in rows:
        grid[ratios.index(r["mask_ratio"]), positions.index(r["position"])] = r[
            "mean_delta"
        ]
    fig, ax = plt.subplots()
    vmax = max(abs(grid).max(), 1e-9)
    im = ax.imshow(
        grid, aspect="auto", cmap="RdBu", vmin=-vmax, vmax=vmax, origin="lower"
    )
    ax.set_xticks(range(len(positions)), positions)
    ax.set_yticks(range(len(ratios)), [f"{r:.2f}" for r in ratios])
    ax.set_xlabel("generated position")
    ax.set_ylabel("prompt mask ratio")
    ax.grid(False)
    fig.colorbar(im, ax=ax, label="mean confidence drop")
    _save(fig, path)


def plot_order_curves(rows: list[dict], path: str) -> None:
    """Cumulative decoded fraction of HD vs LD positions by step."""
    steps = [r["step"] for r in rows]
    fig, ax = plt.subplots()
    ax.plot(steps, [r["hd_cum"] for r in rows], marker="o", label="HD positions")
    ax.plot(steps, [r["ld_cum"] for r in rows], marker="s", label="LD positions")
    ax.set_xlabel("decode step")
    ax.set_ylabel("cumulative fraction decoded")
    ax.set_ylim(0, 1.05)
    ax.legend()
    _save(fig, path)


def plot_verify(rows: list[dict], path: str) -> None:
    """One bar per hard property; green pass, red fail."""
    hard = [r for r in rows if not r["informational"]]
    fig, ax = plt.subplots(figsize=(6.4, 0.28 * len(hard) + 1.2))
    names = [r["name"] for r in hard]
    colors = ["#3f8f4a" if r["passed"] else "#b03a3a" for r in hard]
    ax.barh(range(len(hard)), [1] * len(hard), color=colors)
    ax.set_yticks(range(len(hard)), names, fontsize=7)
    ax.set_xticks([])
    ax.invert_yaxis()
    ax.set_title("verification properties", fontsize=9)
    ax.grid(False)
    _save(fig, path)
