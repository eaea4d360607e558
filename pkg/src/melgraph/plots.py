"""Figures for training reports, synthesized spectrograms, and benchmarks.

matplotlib is imported lazily with the Agg backend so the library works
headless and nothing graphical loads unless a figure is actually rendered.
"""
from __future__ import annotations


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_loss_curve(path, report) -> None:
    """Total/L1/BCE per step on a log scale."""
    plt = _plt()
    steps = report.series("step")
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(steps, report.series("loss"), label="total", lw=1.5)
    ax.plot(steps, report.series("l1"), label="L1", lw=1.0, alpha=0.8)
    ax.plot(steps, report.series("bce"), label="stop BCE", lw=1.0, alpha=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend(frameon=False)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_mel_figure(path, mel, attention=None) -> None:
    """Spectrogram heatmap, optionally with the alignment matrix below it."""
    plt = _plt()
    n_panels = 2 if attention is not None else 1
    fig, axes = plt.subplots(n_panels, 1, figsize=(8, 3 * n_panels), squeeze=False)
    ax = axes[0][0]
    im = ax.imshow(mel.frames.T, origin="lower", aspect="auto",
                   interpolation="nearest", cmap="magma")
    ax.set_xlabel("frame")
    ax.set_ylabel("mel bin")
    fig.colorbar(im, ax=ax, fraction=0.046)
    if attention is not None:
        ax = axes[1][0]
        im = ax.imshow(attention.weights.T, origin="lower", aspect="auto",
                       interpolation="nearest", cmap="viridis")
        ax.set_xlabel("decoder step")
        ax.set_ylabel("memory position")
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_figure(path, rows) -> None:
    """Seconds/step and steps-to-threshold against propagation depth."""
    plt = _plt()
    iters = [row.iters for row in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(iters, [row.median_step_seconds for row in rows], marker="o")
    ax1.set_xlabel("propagation iterations")
    ax1.set_ylabel("median seconds / step")
    ax1.grid(True, alpha=0.25)
    reached = [(r.iters, r.steps_to_threshold) for r in rows
               if r.steps_to_threshold is not None]
    if reached:
        ax2.plot([x for x, _ in reached], [y for _, y in reached], marker="s",
                 color="tab:orange")
    ax2.set_xlabel("propagation iterations")
    ax2.set_ylabel("steps to loss threshold")
    ax2.grid(True, alpha=0.25)
    missing = [r.iters for r in rows if r.steps_to_threshold is None]
    if missing:
        ax2.set_title(f"threshold not reached for iters {missing}", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
