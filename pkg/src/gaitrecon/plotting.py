"""Report figures, rendered off-screen to PNG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .segmentation import PHASE_ORDER  # noqa: E402

_PNG_META = {"Software": None}
CONTACT_LABELS = ("LH", "LT", "RH", "RT", "LCE", "RCE")


def _save(fig, path):
    fig.savefig(path, dpi=110, bbox_inches="tight", metadata=_PNG_META)
    plt.close(fig)


def _phase_codes(labels):
    order = [p.value for p in PHASE_ORDER]
    return np.array([order.index(getattr(p, "value", p)) for p in labels])


def plot_errors(errors_cm: np.ndarray, joint_names, path, pred_phases=None, true_phases=None, fps: float = 30.0):
    """Per-frame error, per-joint RMSE and (optionally) the phase tracks."""
    rows = 3 if pred_phases is not None else 2
    fig, axes = plt.subplots(rows, 1, figsize=(10, 3 * rows))
    t = np.arange(len(errors_cm)) / fps
    axes[0].plot(t, errors_cm.mean(axis=1), lw=1, label="mean over joints")
    axes[0].plot(t, errors_cm.max(axis=1), lw=0.8, alpha=0.6, label="worst joint")
    axes[0].set_xlabel("time (s)")
    axes[0].set_ylabel("position error (cm)")
    axes[0].legend(loc="upper right")
    rmse = np.sqrt(np.mean(errors_cm ** 2, axis=0))
    axes[1].bar(np.arange(len(rmse)), rmse)
    axes[1].set_xticks(np.arange(len(rmse)))
    axes[1].set_xticklabels(joint_names, rotation=60, ha="right", fontsize=7)
    axes[1].set_ylabel("RMSE (cm)")
    if pred_phases is not None:
        ax = axes[2]
        n = len(pred_phases)
        tp = np.arange(n) / fps
        if true_phases is not None:
            ax.step(tp, _phase_codes(true_phases[:n]), where="post", lw=2, alpha=0.5, label="reference")
        ax.step(tp, _phase_codes(pred_phases), where="post", lw=1, label="recognised")
        ax.set_yticks(np.arange(len(PHASE_ORDER)))
        ax.set_yticklabels([p.value for p in PHASE_ORDER], fontsize=7)
        ax.set_xlabel("time (s)")
        ax.legend(loc="upper right")
    fig.tight_layout()
    _save(fig, path)


def plot_segmentation(contacts: np.ndarray, segments, path, fps: float = 30.0):
    """Contact/crossing flags with the detected phase intervals underneath."""
    fig, axes = plt.subplots(2, 1, figsize=(10, 5), sharex=True)
    T = len(contacts)
    t = np.arange(T) / fps
    for i, name in enumerate(CONTACT_LABELS):
        axes[0].fill_between(t, i, i + 0.8 * contacts[:, i], step="post", alpha=0.7)
    axes[0].set_yticks(np.arange(len(CONTACT_LABELS)) + 0.4)
    axes[0].set_yticklabels(CONTACT_LABELS)
    order = [p.value for p in PHASE_ORDER]
    for seg in segments:
        k = order.index(seg.phase.value)
        axes[1].broken_barh([(seg.start / fps, (seg.end - seg.start) / fps)], (k, 0.8))
    axes[1].set_yticks(np.arange(len(order)) + 0.4)
    axes[1].set_yticklabels(order, fontsize=7)
    axes[1].set_xlabel("time (s)")
    fig.tight_layout()
    _save(fig, path)


def plot_bench(reports, path):
    """Latency against database size for a ladder of models."""
    reports = sorted(reports, key=lambda r: r.database_frames)
    x = [r.database_frames for r in reports]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, [1e3 * r.latency for r in reports], "o-")
    ax.set_xlabel("training frames")
    ax.set_ylabel("latency per frame (ms)")
    ax2 = ax.twinx()
    ax2.plot(x, [r.fps for r in reports], "s--", color="tab:orange")
    ax2.set_ylabel("frames per second")
    fig.tight_layout()
    _save(fig, path)
