"""Segment registration: root canonicalisation and dynamic time warping.

Every segment of a phase group is warped onto one reference segment; the same
warp is applied to the motion and sensor slices so their frames stay paired.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import quaternion as quat
from .errors import AlignmentError, DataError
from .segmentation import PhaseSegment
from .skeleton import MotionClip, clip_positions

log = logging.getLogger(__name__)

# traceback preference when predecessors tie: diagonal, then (0,1), then (1,0)
_STEPS = ((1, 1), (0, 1), (1, 0))


@dataclass(frozen=True)
class WarpMap:
    """Monotone (source frame, reference frame) pairs, shape (M, 2)."""

    pairs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=int)
        if p.ndim != 2 or p.shape[1] != 2 or len(p) == 0:
            raise DataError("warp must be a non-empty (M, 2) array")
        if tuple(p[0]) != (0, 0):
            raise DataError("warp must start at (0, 0)")
        steps = np.diff(p, axis=0)
        ok = np.all((steps >= 0) & (steps <= 1), axis=1) & (steps.sum(axis=1) > 0)
        if not np.all(ok):
            raise DataError("warp steps must be (1,0), (0,1) or (1,1)")
        p.flags.writeable = False
        object.__setattr__(self, "pairs", p)

    @property
    def source_len(self) -> int:
        return int(self.pairs[-1, 0]) + 1

    @property
    def reference_len(self) -> int:
        return int(self.pairs[-1, 1]) + 1

    def __len__(self):
        return len(self.pairs)

    def to_json(self):
        return self.pairs.tolist()

    @classmethod
    def identity(cls, n: int) -> "WarpMap":
        i = np.arange(n)
        return cls(np.stack([i, i], axis=1))


@dataclass(frozen=True)
class RegisteredSegment:
    segment: PhaseSegment
    warp: WarpMap
    yaw: float
    translation: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise AlignmentError("registered motion and IMU slices differ in length")

    def __len__(self):
        return len(self.x)


# -- root canonicalisation ------------------------------------------------------

def apply_root_transform(clip: MotionClip, yaw: float, translation) -> MotionClip:
    """Rotate the clip by ``yaw`` about +Y, then shift it by the ground ``translation`` (x, z)."""
    q = quat.from_yaw(yaw)
    tx, tz = np.asarray(translation, dtype=float)
    pos = quat.rotate(q, clip.root_positions) + np.array([tx, 0.0, tz])
    rots = np.array(clip.rotations)
    r = clip.skeleton.root
    rots[:, r] = quat.mul(q, rots[:, r])
    return MotionClip(clip.skeleton, clip.fps, pos, rots, dict(clip.meta))


def canonicalize_root(segment: MotionClip):
    """Move the first frame's root to the ground origin and its hip yaw to 0.

    Returns ``(canonical clip, yaw, translation)`` where
    ``apply_root_transform(canonical, yaw, translation)`` restores the input.
    """
    if len(segment) == 0:
        raise DataError("cannot canonicalise an empty segment")
    r = segment.skeleton.root
    yaw = float(quat.yaw(segment.rotations[0, r]))
    translation = segment.root_positions[0, [0, 2]].copy()
    q = quat.from_yaw(-yaw)
    pos = quat.rotate(q, segment.root_positions - np.array([translation[0], 0.0, translation[1]]))
    pos[:, 1] = segment.root_positions[:, 1]
    rots = np.array(segment.rotations)
    rots[:, r] = quat.mul(q, rots[:, r])
    return MotionClip(segment.skeleton, segment.fps, pos, rots, dict(segment.meta)), yaw, translation


# -- DTW ------------------------------------------------------------------------

def cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape[1] != b.shape[1]:
        raise DataError(f"feature dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
    return np.sqrt(np.maximum(d2, 0.0))


def dtw_accumulate(cost: np.ndarray) -> np.ndarray:
    n, m = cost.shape
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        row = cost[i - 1]
        prev = D[i - 1]
        cur = D[i]
        for j in range(1, m + 1):
            best = prev[j - 1]
            if cur[j - 1] < best:
                best = cur[j - 1]
            if prev[j] < best:
                best = prev[j]
            cur[j] = row[j - 1] + best
    return D


def dtw_path(cost: np.ndarray):
    """Optimal monotone path and its summed cost for a (source x reference) cost matrix."""
    cost = np.asarray(cost, dtype=float)
    D = dtw_accumulate(cost)
    i, j = cost.shape
    path = [(i - 1, j - 1)]
    while (i, j) != (1, 1):
        best = None
        for di, dj in _STEPS:
            v = D[i - di, j - dj]
            if best is None or v < best[0]:
                best = (v, di, dj)
        i -= best[1]
        j -= best[2]
        path.append((i - 1, j - 1))
    return WarpMap(np.array(path[::-1])), float(D[-1, -1])


def dtw_register(segment: np.ndarray, reference: np.ndarray) -> WarpMap:
    """Warp from ``segment`` frames to ``reference`` frames minimising summed Euclidean cost."""
    if len(segment) == 0 or len(reference) == 0:
        raise DataError("DTW needs non-empty sequences")
    return dtw_path(cost_matrix(segment, reference))[0]


def path_cost(cost: np.ndarray, warp: WarpMap) -> float:
    return float(np.sum(cost[warp.pairs[:, 0], warp.pairs[:, 1]]))


def apply_warp(data: np.ndarray, warp: WarpMap, target_len: int, quaternion: bool = False) -> np.ndarray:
    """Resample ``data`` (source frames first) onto the reference timeline.

    Each reference frame is the mean of the source frames mapped to it. With
    ``quaternion`` the trailing axis holds unit quaternions and they are
    averaged by hemisphere-aligned normalised linear blending.
    """
    data = np.asarray(data, dtype=float)
    if warp.source_len != len(data):
        raise AlignmentError(f"warp covers {warp.source_len} source frames, slice has {len(data)}")
    if warp.reference_len != target_len:
        raise AlignmentError(f"warp targets {warp.reference_len} frames, expected {target_len}")
    src, ref = warp.pairs[:, 0], warp.pairs[:, 1]
    counts = np.bincount(ref, minlength=target_len).astype(float)
    if quaternion:
        out = np.empty((target_len,) + data.shape[1:])
        for j in range(target_len):
            members = data[src[ref == j]]
            out[j] = quat.mean(members, axis=0) if len(members) > 1 else members[0]
        return out
    out = np.zeros((target_len,) + data.shape[1:])
    np.add.at(out, ref, data[src])
    return out / counts.reshape((-1,) + (1,) * (data.ndim - 1))


def reference_index(lengths: Sequence[int]) -> int:
    """Index of the median-length segment (lowest index among equals)."""
    lengths = np.asarray(lengths)
    order = np.argsort(lengths, kind="stable")
    return int(order[(len(lengths) - 1) // 2])


def zscore_group(seqs: Sequence[np.ndarray]):
    allf = np.concatenate(seqs, axis=0)
    mu = allf.mean(axis=0)
    sd = allf.std(axis=0)
    sd = np.where(sd > 1e-9, sd, 1.0)
    return [(s - mu) / sd for s in seqs]


def dtw_features(clip: MotionClip, y: np.ndarray) -> np.ndarray:
    """Per-frame DTW descriptor: sensor channels plus root-relative joint positions."""
    pos = clip_positions(clip, pin_root=True)
    return np.concatenate([np.asarray(y, dtype=float), pos.reshape(len(clip), -1)], axis=1)


def register_group(descriptors: Sequence[np.ndarray], payloads: Sequence[dict],
                   ref: Optional[int] = None):
    """Warp every member of a phase group onto its reference member.

    ``descriptors`` are per-segment (T_i, d) DTW features (z-scored here across
    the group); ``payloads`` are per-segment dicts of (T_i, ...) arrays that all
    receive the member's warp. Returns ``(ref index, warps, warped payloads)``.
    """
    if not descriptors:
        raise DataError("empty phase group")
    for d, p in zip(descriptors, payloads):
        for k, v in p.items():
            if len(v) != len(d):
                raise AlignmentError(f"payload {k!r} length {len(v)} != descriptor length {len(d)}")
    if ref is None:
        ref = reference_index([len(d) for d in descriptors])
    z = zscore_group(descriptors)
    L = len(z[ref])
    warps, out = [], []
    for i, zi in enumerate(z):
        w = WarpMap.identity(L) if i == ref else dtw_register(zi, z[ref])
        warps.append(w)
        out.append({k: apply_warp(v, w, L) for k, v in payloads[i].items()})
    return ref, warps, out
