"""Training pipeline: extract -> segment -> register -> EM -> hierarchy."""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import quaternion as quat
from .errors import AlignmentError, DataError, GaitReconError
from .features import ImuStream, motion_features
from .hmm.em import em_fit
from .hmm.hierarchy import SIGMA_FLOOR, HierarchicalModel, build_hierarchy
from .registration import apply_root_transform, canonicalize_root, dtw_features, register_group
from .segmentation import HEIGHT_EPS, VEL_EPS, GaitPhase, segment_clip
from .skeleton import MotionClip

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    fps: float = 30.0
    K: int = 5
    W: int = 3
    height_eps: float = HEIGHT_EPS
    vel_eps: float = VEL_EPS
    min_flight_speed: float = 0.3
    em_states: int = 8
    em_tol: float = 1e-6
    max_iter: int = 200
    reg_floor: float = 1e-6
    sigma_floor: float = SIGMA_FLOOR
    seed: int = 0

    def __post_init__(self):
        for name in ("fps", "K", "W", "height_eps", "vel_eps", "min_flight_speed", "em_states",
                     "em_tol", "max_iter", "reg_floor", "sigma_floor"):
            if not getattr(self, name) > 0:
                raise DataError(f"config {name} must be positive")


@dataclass
class TrainingItem:
    clip: MotionClip
    imu: ImuStream
    motion_type: str


def resample_linear(data: np.ndarray, n: int) -> np.ndarray:
    """Linearly resample (T, d) rows to n rows spanning the same interval."""
    data = np.asarray(data, dtype=float)
    T = len(data)
    if T == n:
        return data.copy()
    src = np.linspace(0.0, 1.0, T)
    dst = np.linspace(0.0, 1.0, n)
    return np.stack([np.interp(dst, src, data[:, j]) for j in range(data.shape[1])], axis=1)


def resample_imu(imu: ImuStream, n: int) -> ImuStream:
    return ImuStream(imu.fps, resample_linear(imu.data, n))


def canonical_slice(clip: MotionClip, start: int, end: int):
    """Frames [start-1, end) (or [0, end) at the clip start) expressed in the frame of ``start``."""
    _, yaw, tr = canonicalize_root(clip.slice(start, start + 1))
    lo = max(start - 1, 0)
    sub = clip.slice(lo, end)
    back = quat.rotate(quat.from_yaw(-yaw), np.array([tr[0], 0.0, tr[1]]))
    canon = apply_root_transform(sub, -yaw, -back[[0, 2]])
    return canon, start - lo


def segment_features(clip: MotionClip, y: np.ndarray, start: int, end: int):
    """Canonicalised X, the sensor Y and the DTW descriptor for one segment."""
    canon, skip = canonical_slice(clip, start, end)
    x = motion_features(canon)[skip:]
    seg_clip = canon.slice(skip, len(canon))
    ys = np.asarray(y[start:end], dtype=float)
    return x, ys, dtw_features(seg_clip, ys)


def collect_segments(items: Sequence[TrainingItem], config: TrainConfig):
    """Group canonical segment features by (family, phase)."""
    groups = OrderedDict()
    for ci, it in enumerate(items):
        if len(it.clip) != len(it.imu):
            raise AlignmentError(f"clip {ci}: motion has {len(it.clip)} frames but IMU has {len(it.imu)}")
        try:
            segs = segment_clip(it.clip, it.imu, it.motion_type, config.height_eps, config.vel_eps,
                                config.min_flight_speed)
        except GaitReconError as exc:
            raise type(exc)(f"segment stage, clip {ci}: {exc}") from exc
        gait = it.motion_type in ("walk", "run")
        for s in segs:
            if gait and s.phase is GaitPhase.IDLE:
                continue  # lead-in before the first detected contact event
            x, y, desc = segment_features(it.clip, it.imu.data, s.start, s.end)
            key = (it.motion_type, s.phase.value)
            groups.setdefault(key, []).append((f"{ci}:{s.start}-{s.end}", x, y, desc))
    return groups


def train(items: Sequence[TrainingItem], skeleton, config: Optional[TrainConfig] = None) -> HierarchicalModel:
    config = config or TrainConfig()
    if not items:
        raise DataError("no training clips")
    fps = {it.clip.fps for it in items} | {it.imu.fps for it in items}
    if len(fps) != 1:
        raise AlignmentError(f"training clips disagree on fps: {sorted(fps)}")
    groups = collect_segments(items, config)
    if not groups:
        raise DataError("segmentation produced no usable segments")

    registered = OrderedDict()
    for key, members in groups.items():
        descs = [m[3] for m in members]
        payloads = [{"x": m[1], "y": m[2]} for m in members]
        _, warps, warped = register_group(descs, payloads)
        registered[key] = [(m[0], np.concatenate([w["x"], w["y"]], axis=1), wm)
                           for m, w, wm in zip(members, warped, warps)]
        log.info("phase %s/%s: %d segments, %d frames", key[0], key[1], len(members), len(warped[0]["x"]))

    d_x = registered[next(iter(registered))][0][1].shape[1] - items[0].imu.data.shape[1]
    allz = np.concatenate([m[1] for group in registered.values() for m in group])
    mean = allz.mean(axis=0)
    std = allz.std(axis=0)
    std = np.where(std > 1e-8, std, 1.0)
    zgroups = OrderedDict((k, [(sid, (z - mean) / std, list(wm.pairs)) for sid, z, wm in v])
                          for k, v in registered.items())

    # global states are fitted on each clip's registered segments, back in time order
    per_clip = {}
    for group in zgroups.values():
        for sid, z, _ in group:
            ci, span = sid.split(":")
            per_clip.setdefault(int(ci), []).append((int(span.split("-")[0]), z))
    seqs = [np.concatenate([z for _, z in sorted(v, key=lambda e: e[0])]) for _, v in sorted(per_clip.items())]
    # a constant corpus (e.g. noise-free idle) supports only as many states as distinct frames
    n_states = min(config.em_states, len(np.unique(allz, axis=0)))
    try:
        params = em_fit(seqs, n_states, config.max_iter, config.em_tol, config.reg_floor, config.seed, d_x)
    except GaitReconError as exc:
        raise type(exc)(f"em stage: {exc}") from exc
    ll = params.log_likelihoods[-1] if params.log_likelihoods else float("nan")
    log.info("EM: %d states, %d iterations, final log-likelihood %.6f", n_states,
             len(params.log_likelihoods), ll)
    cfg = asdict(config)
    cfg["final_log_likelihood"] = ll
    cfg["train_frames"] = int(sum(len(it.clip) for it in items))
    model = build_hierarchy(zgroups, params.states, mean, std, skeleton, config.fps, d_x,
                            config.K, config.W, config.sigma_floor, cfg)
    return model


def segment_counts(model: HierarchicalModel) -> dict:
    return {f"{p.family}/{p.phase.value}": p.H for p in model.phases}
