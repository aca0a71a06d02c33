"""Gait phase segmentation from foot contacts and ankle crossing events.

Contacts: a heel (ankle joint) or toe is on the ground when it is below
``height_eps`` and moving slower than ``vel_eps``. Crossing events: RCE is
set while the right ankle is ahead of the left ankle along the hips' ground
facing direction, LCE symmetrically.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import quaternion as quat
from .errors import AlignmentError, SegmentationError
from .features import ImuStream, motion_features
from .skeleton import MotionClip, Skeleton, SkeletonPose, forward_kinematics, forward_kinematics_batch

log = logging.getLogger(__name__)

HEIGHT_EPS = 0.03
VEL_EPS = 0.15


class GaitPhase(str, enum.Enum):
    IC_LR = "IC_LR"
    LR_MST = "LR_MST"
    MST_TST = "MST_TST"
    TST_PSW = "TST_PSW"
    PSW_ISW = "PSW_ISW"
    ISW_MSW = "ISW_MSW"
    MSW_TSW = "MSW_TSW"
    TSW_IC = "TSW_IC"
    AIRBORNE_UP = "AIRBORNE_UP"
    AIRBORNE_DOWN = "AIRBORNE_DOWN"
    IDLE = "IDLE"

    def __str__(self):
        return self.value


GAIT_PHASES = list(GaitPhase)[:8]
PHASE_ORDER = list(GaitPhase)


def successor(phase: GaitPhase) -> Optional[GaitPhase]:
    """Cyclic gait successor; AIRBORNE_UP -> AIRBORNE_DOWN -> IDLE; IDLE has none."""
    if phase in GAIT_PHASES:
        return GAIT_PHASES[(GAIT_PHASES.index(phase) + 1) % 8]
    if phase is GaitPhase.AIRBORNE_UP:
        return GaitPhase.AIRBORNE_DOWN
    if phase is GaitPhase.AIRBORNE_DOWN:
        return GaitPhase.IDLE
    return None


@dataclass(frozen=True)
class ContactState:
    RH: bool
    RT: bool
    LH: bool
    LT: bool
    RCE: bool
    LCE: bool

    def as_tuple(self):
        return (self.RH, self.RT, self.LH, self.LT, self.RCE, self.LCE)

    @property
    def any_contact(self) -> bool:
        return self.RH or self.RT or self.LH or self.LT


# start / end conditions per phase, as predicates over a ContactState.
# MST_TST and MSW_TSW end (and TST_PSW / TSW_IC start) additionally require the
# stance heel to have lifted; otherwise they would hold on the phase's first frame.
_START = {
    GaitPhase.IC_LR: lambda c: c.RH and c.LT,
    GaitPhase.LR_MST: lambda c: c.RH and c.RT and not c.LT,
    GaitPhase.MST_TST: lambda c: c.RH and c.RT and c.LCE,
    GaitPhase.TST_PSW: lambda c: c.RT and not c.RH and not c.LH and not c.LT,
    GaitPhase.PSW_ISW: lambda c: c.RT and c.LH,
    GaitPhase.ISW_MSW: lambda c: not c.RT and c.LH and c.LT,
    GaitPhase.MSW_TSW: lambda c: c.RCE and c.LH and c.LT,
    GaitPhase.TSW_IC: lambda c: c.LT and not c.LH and not c.RH and not c.RT,
}
_END = {p: _START[successor(p)] for p in GAIT_PHASES}


def _side_indices(skeleton: Skeleton):
    return {
        "RH": skeleton.index("right_ankle"),
        "RT": skeleton.index("right_toe"),
        "LH": skeleton.index("left_ankle"),
        "LT": skeleton.index("left_toe"),
    }


def _facing(root_rot):
    f = quat.rotate(root_rot, quat.FORWARD)
    f = f * np.array([1.0, 0.0, 1.0])
    n = np.linalg.norm(f, axis=-1, keepdims=True)
    return f / np.maximum(n, 1e-12)


def _states_from_positions(pos, prev_pos, root_rot, idx, height_eps, vel_eps, fps):
    """Vectorised contact flags: pos/prev_pos (T, N, 3) -> (T, 6) booleans."""
    speed = np.linalg.norm(pos - prev_pos, axis=-1) * fps
    flags = {}
    for key, j in idx.items():
        flags[key] = (pos[:, j, 1] < height_eps) & (speed[:, j] < vel_eps)
    fwd = _facing(root_rot)
    ahead = np.sum((pos[:, idx["RH"]] - pos[:, idx["LH"]]) * fwd, axis=-1)
    flags["RCE"] = ahead > 0
    flags["LCE"] = ahead < 0
    return np.stack([flags[k] for k in ("RH", "RT", "LH", "LT", "RCE", "LCE")], axis=1)


def contact_state(skeleton: Skeleton, pose: SkeletonPose, height_eps: float = HEIGHT_EPS,
                  vel_eps: float = VEL_EPS, prev_pose: Optional[SkeletonPose] = None,
                  fps: float = 30.0) -> ContactState:
    """Contact flags for one pose. Without ``prev_pose`` the joints count as stationary."""
    pos = forward_kinematics(skeleton, pose)[None]
    prev = pos if prev_pose is None else forward_kinematics(skeleton, prev_pose)[None]
    row = _states_from_positions(pos, prev, pose.joint_rotations[skeleton.root][None],
                                 _side_indices(skeleton), height_eps, vel_eps, fps)[0]
    return ContactState(*(bool(v) for v in row))


def contact_states(clip: MotionClip, height_eps: float = HEIGHT_EPS, vel_eps: float = VEL_EPS) -> np.ndarray:
    """(T, 6) boolean array [RH, RT, LH, LT, RCE, LCE] for every frame of a clip.

    Speeds are backward differences; frame 0 uses the forward difference.
    """
    pos, _ = forward_kinematics_batch(clip.skeleton, clip.root_positions, clip.rotations)
    prev = np.concatenate([pos[:1] if len(pos) < 2 else 2 * pos[:1] - pos[1:2], pos[:-1]])
    return _states_from_positions(pos, prev, clip.rotations[:, clip.skeleton.root],
                                  _side_indices(clip.skeleton), height_eps, vel_eps, clip.fps)


@dataclass(frozen=True)
class PhaseSegment:
    """A labelled frame span [start, end) with its motion (X) and sensor (Y) feature slices."""

    phase: GaitPhase
    start: int
    end: int
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"empty segment [{self.start}, {self.end})")
        if self.x is not None and self.y is not None and len(self.x) != len(self.y):
            raise AlignmentError("segment motion and IMU slices differ in length")

    def __len__(self) -> int:
        return self.end - self.start

    def to_json(self) -> dict:
        return {"phase": self.phase.value, "start": int(self.start), "end": int(self.end)}


def _features(clip, imu):
    if imu is None:
        return None, None
    y = imu.data if isinstance(imu, ImuStream) else np.asarray(imu, dtype=float)
    if len(y) != len(clip):
        raise AlignmentError(f"motion has {len(clip)} frames but IMU has {len(y)}")
    return motion_features(clip), y


def _make_segments(spans, clip, imu):
    x, y = _features(clip, imu)
    out = []
    for phase, s, e in spans:
        out.append(PhaseSegment(phase, s, e,
                                None if x is None else x[s:e],
                                None if y is None else y[s:e]))
    return out


def scan_phases(states: np.ndarray) -> list:
    """Finite-state scan over per-frame contact flags -> [(phase, start, end)].

    Entry is the first frame where some start condition becomes true (it was
    false on the previous frame); earlier frames are IDLE. After entry each
    phase lasts until its end condition first holds, which starts the successor.
    """
    T = len(states)
    cs = [ContactState(*(bool(v) for v in row)) for row in states]
    start = None
    phase = None
    for t in range(1, T):
        for p in GAIT_PHASES:
            if _START[p](cs[t]) and not _START[p](cs[t - 1]):
                start, phase = t, p
                break
        if phase is not None:
            break
    if phase is None:
        return [(GaitPhase.IDLE, 0, T)]
    spans = []
    if start > 0:
        spans.append((GaitPhase.IDLE, 0, start))
    for t in range(start + 1, T):
        if _END[phase](cs[t]):
            spans.append((phase, start, t))
            phase, start = successor(phase), t
    spans.append((phase, start, T))
    return spans


def segment_gait(clip: MotionClip, imu_features=None, height_eps: float = HEIGHT_EPS,
                 vel_eps: float = VEL_EPS) -> list:
    """Split a walk/run clip into the eight contact-defined gait phases."""
    states = contact_states(clip, height_eps, vel_eps)
    spans = scan_phases(states)
    n_boundaries = sum(1 for p, _, _ in spans if p in GAIT_PHASES) - 1
    if n_boundaries < 1:
        raise SegmentationError("no gait phase boundary found", (0, len(clip)))
    return _make_segments(spans, clip, imu_features)


def segment_by_speed(clip: MotionClip, imu_features=None, min_flight_speed: float = 0.3,
                     height_eps: float = HEIGHT_EPS, vel_eps: float = VEL_EPS) -> list:
    """Jump/hop segmentation: contact frames are IDLE, each flight is split at its apex.

    The apex is the frame with the smallest |vertical root velocity| (central
    differences); flights whose peak vertical speed stays below
    ``min_flight_speed`` are treated as IDLE.
    """
    T = len(clip)
    states = contact_states(clip, height_eps, vel_eps)
    airborne = ~states[:, :4].any(axis=1)
    vy = np.gradient(clip.root_positions[:, 1]) * clip.fps if T > 1 else np.zeros(T)
    spans = []
    t = 0
    cur = 0
    while t < T:
        if not airborne[t]:
            t += 1
            continue
        e = t
        while e < T and airborne[e]:
            e += 1
        run = np.abs(vy[t:e])
        if e - t >= 2 and run.max() >= min_flight_speed:
            apex = t + int(np.argmin(run))
            apex = min(max(apex, t + 1), e - 1)
            if t > cur:
                spans.append((GaitPhase.IDLE, cur, t))
            spans.append((GaitPhase.AIRBORNE_UP, t, apex))
            spans.append((GaitPhase.AIRBORNE_DOWN, apex, e))
            cur = e
        t = e
    if cur < T:
        spans.append((GaitPhase.IDLE, cur, T))
    return _make_segments(spans, clip, imu_features)


def segment_clip(clip: MotionClip, imu_features=None, motion_type: Optional[str] = None,
                 height_eps: float = HEIGHT_EPS, vel_eps: float = VEL_EPS,
                 min_flight_speed: float = 0.3) -> list:
    """Dispatch on motion type: gait scan for walk/run, speed split for jump/hop, one IDLE span otherwise."""
    mt = motion_type or clip.meta.get("motion_type")
    if mt in ("jump", "hop"):
        return segment_by_speed(clip, imu_features, min_flight_speed, height_eps, vel_eps)
    if mt == "idle":
        return _make_segments([(GaitPhase.IDLE, 0, len(clip))], clip, imu_features)
    return segment_gait(clip, imu_features, height_eps, vel_eps)


def segment_labels(segments, n_frames: int) -> list:
    labels = [GaitPhase.IDLE] * n_frames
    for s in segments:
        labels[s.start:s.end] = [s.phase] * (s.end - s.start)
    return labels
