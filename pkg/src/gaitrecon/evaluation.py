"""Reconstruction error against ground truth and per-frame latency benchmarks."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .features import ImuStream
from .skeleton import MotionClip, clip_positions

WARMUP_FRAMES = 30


@dataclass(frozen=True)
class EvalReport:
    """Root-pinned position error in cm (MSE in cm^2) and optional phase accuracy."""

    frames: int
    joint_names: tuple
    joint_mse: np.ndarray
    mse: float
    phase_accuracy: Optional[float] = None

    @property
    def rmse(self) -> float:
        return float(np.sqrt(self.mse))

    @property
    def joint_rmse(self) -> np.ndarray:
        return np.sqrt(self.joint_mse)

    def to_json(self) -> dict:
        return {
            "frames": self.frames,
            "mse_cm2": self.mse,
            "rmse_cm": self.rmse,
            "phase_accuracy": self.phase_accuracy,
            "joints": {n: {"mse_cm2": float(m), "rmse_cm": float(np.sqrt(m))}
                       for n, m in zip(self.joint_names, self.joint_mse)},
        }


def _check_skeletons(a, b):
    if a.n_joints != b.n_joints or a.names != b.names or not np.allclose(a.offsets, b.offsets):
        raise DataError("predicted and reference clips use different skeletons")


def position_errors(pred: MotionClip, truth: MotionClip) -> np.ndarray:
    """(T, J) root-pinned joint distances in metres over the common frame range."""
    _check_skeletons(pred.skeleton, truth.skeleton)
    if not np.isclose(pred.fps, truth.fps):
        raise DataError(f"fps differ: {pred.fps} vs {truth.fps}")
    n = min(len(pred), len(truth))
    if n == 0:
        raise DataError("nothing to compare: empty clip")
    p = clip_positions(pred.slice(0, n), pin_root=True)
    g = clip_positions(truth.slice(0, n), pin_root=True)
    return np.linalg.norm(p - g, axis=-1)


def phase_accuracy(predicted: Sequence, truth: Sequence, grace: int = 1, skip: int = 0) -> float:
    """Fraction of frames whose predicted label matches the truth within +-grace frames."""
    n = min(len(predicted), len(truth))
    if n <= skip:
        raise DataError("no frames left after the warm-up skip")
    pred = [getattr(p, "value", p) for p in predicted[:n]]
    true = [getattr(t, "value", t) for t in truth[:n]]
    hits = 0
    for t in range(skip, n):
        window = true[max(t - grace, 0): t + grace + 1]
        hits += pred[t] in window
    return hits / (n - skip)


def mse_eval(pred: MotionClip, truth: MotionClip, skeleton=None, pred_phases: Optional[Sequence] = None,
             truth_phases: Optional[Sequence] = None, grace: int = 1, skip: int = 0) -> EvalReport:
    """MSE over all joints and frames after pinning both roots to the origin."""
    if skeleton is not None:
        _check_skeletons(skeleton, pred.skeleton)
    err = 100.0 * position_errors(pred, truth)
    sq = err ** 2
    acc = None
    if pred_phases is not None and truth_phases is not None:
        acc = phase_accuracy(pred_phases, truth_phases, grace, skip)
    return EvalReport(len(err), tuple(pred.skeleton.names), sq.mean(axis=0), float(sq.mean()), acc)


def interframe_jumps(clip: MotionClip, reference: Optional[MotionClip] = None) -> np.ndarray:
    """Largest root-pinned joint displacement between consecutive frames, (T-1,) metres.

    With a reference, the displacement is taken relative to the reference's own
    motion over the same frames, so only discontinuities count.
    """
    p = clip_positions(clip, pin_root=True)
    d = np.diff(p, axis=0)
    if reference is not None:
        _check_skeletons(clip.skeleton, reference.skeleton)
        n = min(len(clip), len(reference))
        d = d[: n - 1] - np.diff(clip_positions(reference.slice(0, n), pin_root=True), axis=0)
    return np.linalg.norm(d, axis=-1).max(axis=1)


@dataclass(frozen=True)
class BenchReport:
    database_frames: int
    segments: int
    states: int
    frames_timed: int
    latency: float
    fps: float

    def to_json(self) -> dict:
        return {"database_frames": self.database_frames, "segments": self.segments, "states": self.states,
                "frames_timed": self.frames_timed, "latency_s": self.latency, "fps": self.fps}


def bench(model, imu: ImuStream, warmup: int = WARMUP_FRAMES, repeats: int = 3) -> BenchReport:
    """Time the per-frame inference (filter, recognition, regression) after a warm-up.

    Pose assembly, blending and foot lock are left out of the timing. The reported
    latency is the smallest mean over ``repeats`` passes.
    """
    from .reconstruction import ReconstructionEngine

    if len(imu) <= warmup:
        raise DataError(f"benchmark needs more than {warmup} frames, got {len(imu)}")
    best = np.inf
    for _ in range(max(repeats, 1)):
        eng = ReconstructionEngine(model)
        for t in range(warmup):
            eng.infer(imu.data[t])
        t0 = time.perf_counter()
        for t in range(warmup, len(imu)):
            eng.infer(imu.data[t])
        best = min(best, (time.perf_counter() - t0) / (len(imu) - warmup))
    frames = int(model.config.get("train_frames", model.total_frames))
    return BenchReport(frames, model.n_segments, model.n_states, len(imu) - warmup, float(best), float(1.0 / best))
