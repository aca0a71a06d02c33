"""Online reconstruction: sensor stream in, full-body poses out, one frame at a time."""

from __future__ import annotations

import collections
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import quaternion as quat
from .errors import DataError, TrackingLost
from .features import ImuStream, split_x
from .hmm.hierarchy import (HierarchicalModel, LogForwardLattice, forward_step, init_forward,
                            recognize_phase)
from .ik import solve_two_bone
from .segmentation import HEIGHT_EPS, VEL_EPS, GaitPhase
from .skeleton import MotionClip, Skeleton, SkeletonPose, forward_kinematics_batch

log = logging.getLogger(__name__)

BLEND_FRAMES = 8
GROUND_GAIN = 0.1


@dataclass(frozen=True)
class InterpWeights:
    """Chosen (flat state, weight) pairs; weights are non-negative and sum to 1."""

    states: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) == 0 or len(w) != len(self.states):
            raise DataError("interpolation needs at least one weighted candidate")
        if np.any(w < 0):
            raise DataError("interpolation weights must be non-negative")
        object.__setattr__(self, "weights", w / w.sum())


def interpolate_models(candidates: Sequence):
    """Weighted mean and covariance of conditional outputs: [((mean, cov), weight), ...]."""
    if not candidates:
        raise DataError("no candidates to interpolate")
    w = np.array([c[1] for c in candidates], dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise DataError("candidate weights must be non-negative with a positive sum")
    w = w / w.sum()
    mean = sum(wk * np.asarray(c[0][0], dtype=float) for wk, c in zip(w, candidates))
    covs = [c[0][1] for c in candidates]
    cov = None if any(c is None for c in covs) else sum(wk * np.asarray(c, dtype=float) for wk, c in zip(w, covs))
    if cov is not None:
        cov = 0.5 * (cov + cov.T)
    return mean, cov


def crossfade(prev_pose: SkeletonPose, new_pose: SkeletonPose, alpha: float) -> SkeletonPose:
    """Blend two poses: root position linearly, joints by hemisphere-aligned nlerp."""
    if prev_pose.joint_rotations.shape != new_pose.joint_rotations.shape:
        raise DataError("crossfade poses differ in joint count")
    a = float(np.clip(alpha, 0.0, 1.0))
    if a == 0.0:
        return prev_pose
    if a == 1.0:
        return new_pose
    root = (1 - a) * prev_pose.root_position + a * new_pose.root_position
    return SkeletonPose(root, quat.nlerp(prev_pose.joint_rotations, new_pose.joint_rotations, a))


def blend_length(speed: float, max_frames: int = BLEND_FRAMES, speed_scale: float = 1.0) -> int:
    """Faster root motion -> shorter blend, clamped to [2, max_frames]."""
    return int(np.clip(round(max_frames / (1.0 + max(speed, 0.0) / speed_scale)), 2, max(max_frames, 2)))


# -- foot lock ----------------------------------------------------------------------

_LEGS = {"right": ("right_hip", "right_knee", "right_ankle"), "left": ("left_hip", "left_knee", "left_ankle")}


def _leg_ids(skeleton):
    return {s: tuple(skeleton.index(n) for n in names) for s, names in _LEGS.items()}


def foot_lock(skeleton: Skeleton, pose: SkeletonPose, contacts: dict, anchors: dict) -> SkeletonPose:
    """Pin contacting ankles to their anchors and lift any ankle below the ground.

    ``contacts`` maps side ("left"/"right") to bool; ``anchors`` maps side to a
    world position or None. Anchors are not modified here. The foot keeps its
    world orientation; targets out of reach end at full extension.
    """
    rots = pose.joint_rotations.copy()
    pos, wrot = forward_kinematics_batch(skeleton, pose.root_position, rots)
    offsets = skeleton.offsets
    changed = False
    for side, (h, k, a) in _leg_ids(skeleton).items():
        cur = pos[a]
        target = cur.copy()
        if contacts.get(side) and anchors.get(side) is not None:
            target = np.asarray(anchors[side], dtype=float).copy()
        target[1] = max(target[1], 0.0)
        if np.allclose(target, cur, rtol=0.0, atol=1e-12):
            continue
        l1 = float(np.linalg.norm(offsets[k]))
        l2 = float(np.linalg.norm(offsets[a]))
        hip = pos[h]
        # keep the knee in its current bending plane
        pole = pos[k] - 0.5 * (hip + cur)
        if np.linalg.norm(pole) < 1e-9:
            pole = quat.rotate(wrot[skeleton.root], quat.FORWARD)
        _, thigh, shin, _ = solve_two_bone(hip, target, pole, l1, l2)
        parent = skeleton.joints[h].parent
        rots[h] = quat.mul(quat.conj(wrot[parent]), thigh)
        rots[k] = quat.mul(quat.conj(thigh), shin)
        rots[a] = quat.mul(quat.conj(shin), wrot[a])
        changed = True
    if not changed:
        return pose
    return SkeletonPose(pose.root_position, rots)


# -- engine -------------------------------------------------------------------------

@dataclass
class ReconstructionState:
    lattice: LogForwardLattice
    window: collections.deque
    active_key: Optional[tuple] = None
    active_phase: Optional[GaitPhase] = None
    posterior: float = 0.0
    last_pose: Optional[SkeletonPose] = None
    anchors: dict = field(default_factory=lambda: {"left": None, "right": None})
    counter: int = 0
    heading: float = 0.0
    root: np.ndarray = field(default_factory=lambda: np.zeros(3))
    blend_offset: Optional[np.ndarray] = None
    blend_left: int = 0
    blend_total: int = 0
    lost_events: int = 0


class ReconstructionEngine:
    """Step-wise reconstruction over a trained hierarchical model."""

    def __init__(self, model: HierarchicalModel, K: Optional[int] = None, W: Optional[int] = None,
                 use_foot_lock: bool = True, blend_frames: int = BLEND_FRAMES,
                 height_eps: float = HEIGHT_EPS, vel_eps: float = VEL_EPS):
        self.model = model
        self.K = int(model.K if K is None else K)
        self.W = int(model.W if W is None else W)
        if self.K < 1 or self.W < 1:
            raise DataError("K and W must be >= 1")
        self.use_foot_lock = use_foot_lock
        self.blend_frames = blend_frames
        self.height_eps = height_eps
        self.vel_eps = vel_eps
        self.skeleton = model.skeleton
        self.n = model.skeleton.n_joints
        self._legs = _leg_ids(self.skeleton)
        self._root_height = self._rest_height()
        self.reset()

    def _rest_height(self):
        pos, _ = forward_kinematics_batch(self.skeleton, np.zeros(3), np.tile(quat.IDENTITY, (self.n, 1)))
        return float(-min(pos[:, 1]))

    def reset(self):
        self.state = ReconstructionState(init_forward(self.model), collections.deque(maxlen=self.W))
        self.state.root = np.array([0.0, self._root_height, 0.0])

    # -- pieces of a step ----------------------------------------------------
    def _advance(self, y_z):
        st = self.state
        st.window.append(y_z)
        try:
            st.lattice = forward_step(self.model, st.lattice, y_z)
        except TrackingLost:
            st.lost_events += 1
            log.warning("tracking lost at frame %d; re-initialising from the window", st.counter)
            lat = init_forward(self.model)
            for w in st.window:
                lat = forward_step(self.model, lat, w)
            st.lattice = lat

    def select(self, phase: GaitPhase) -> InterpWeights:
        m = self.model
        la = self.state.lattice.log_alpha
        mask = np.array([p == phase for p in m.phase_names])[m.state_phase]
        idx = np.flatnonzero(mask & np.isfinite(la))
        if len(idx) == 0:
            idx = np.flatnonzero(np.isfinite(la))
        k = min(self.K, len(idx))
        top = idx[np.argsort(-la[idx], kind="stable")[:k]]
        w = np.exp(la[top] - la[top].max())
        return InterpWeights(tuple(int(s) for s in top), w)

    def regress(self, weights: InterpWeights, y_z) -> np.ndarray:
        """Interpolated X (de-z-scored) for the chosen states."""
        cands = [((self.model.conditional_mean(s, y_z), None), w) for s, w in zip(weights.states, weights.weights)]
        mean, _ = interpolate_models(cands)
        return self.model.unzscore(mean, "x")

    def _pose_from_x(self, x):
        st = self.state
        rot, vel, delta = split_x(x, self.n)
        q = quat.exp(rot)
        r = self.skeleton.root
        if st.last_pose is not None:
            # world hip yaw advances by the emitted hip yaw rate, whatever canonical frame x is in
            prev_world_yaw = quat.yaw(st.last_pose.joint_rotations[r])
            st.heading = float(prev_world_yaw + vel[r, 1] / self.model.fps - quat.yaw(q[r]))
        h = quat.from_yaw(st.heading)
        q[r] = quat.mul(h, q[r])
        step = -quat.rotate(h, delta)
        return SkeletonPose(st.root + step, q)

    def _ground(self, pose):
        """Leaky correction pulling the lowest foot point toward y = 0 (exact on the first frame)."""
        pos, _ = forward_kinematics_batch(self.skeleton, pose.root_position, pose.joint_rotations)
        feet = [self.skeleton.index(n) for n in ("left_ankle", "left_toe", "right_ankle", "right_toe")]
        low = float(np.min(pos[feet, 1]))
        root = pose.root_position.copy()
        root[1] -= (1.0 if self.state.last_pose is None else GROUND_GAIN) * low
        return SkeletonPose(root, pose.joint_rotations)

    def _blend(self, pose, x, switched, speed):
        """Velocity-based crossfade: on a switch, decay the offset between the new pose
        and the last emitted pose carried forward by the new output's own joint rates."""
        st = self.state
        if switched and st.last_pose is not None:
            rot, vel, _ = split_x(x, self.n)
            step = quat.mul(quat.conj(quat.exp(rot - vel / self.model.fps)), quat.exp(rot))
            expected = quat.mul(st.last_pose.joint_rotations, step)
            st.blend_offset = quat.mul(expected, quat.conj(pose.joint_rotations))
            st.blend_total = blend_length(speed, self.blend_frames)
            st.blend_left = st.blend_total
        if st.blend_left > 0 and st.blend_offset is not None:
            a = st.blend_left / (st.blend_total + 1.0)
            off = quat.nlerp(np.tile(quat.IDENTITY, (self.n, 1)), st.blend_offset, a)
            pose = SkeletonPose(pose.root_position, quat.mul(off, pose.joint_rotations))
            st.blend_left -= 1
        return pose

    def _lock(self, pose):
        st = self.state
        pos, _ = forward_kinematics_batch(self.skeleton, pose.root_position, pose.joint_rotations)
        prev = None
        if st.last_pose is not None:
            prev, _ = forward_kinematics_batch(self.skeleton, st.last_pose.root_position, st.last_pose.joint_rotations)
        contacts = {}
        for side, (_, _, a) in self._legs.items():
            speed = 0.0 if prev is None else float(np.linalg.norm(pos[a] - prev[a]) * self.model.fps)
            c = pos[a, 1] < self.height_eps and speed < self.vel_eps
            contacts[side] = c
            if c and st.anchors[side] is None:
                anchor = pos[a].copy()
                anchor[1] = max(anchor[1], 0.0)
                st.anchors[side] = anchor
            elif not c:
                st.anchors[side] = None
        return foot_lock(self.skeleton, pose, contacts, st.anchors)

    # -- public --------------------------------------------------------------
    def infer(self, y):
        """Model side of a step: filter, recognise, pick top-K, regress X. Returns (phase, posterior, weights, x)."""
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != self.model.d_y:
            raise DataError(f"sensor vector has {y.size} channels, model expects {self.model.d_y}")
        if not np.all(np.isfinite(y)):
            raise DataError("sensor vector contains non-finite values")
        y_z = self.model.zscore(y, "y")
        self._advance(y_z)
        phase, post = recognize_phase(self.model, self.state.lattice)
        weights = self.select(phase)
        return phase, post, weights, self.regress(weights, y_z)

    def step(self, y) -> SkeletonPose:
        st = self.state
        phase, post, weights, x = self.infer(y)
        lead = weights.states[int(np.argmax(weights.weights))]
        key = self.model.phases[self.model.state_phase[lead]].key
        switched = st.active_key is not None and key != st.active_key
        pose = self._pose_from_x(x)
        pose = self._ground(pose)
        _, _, delta = split_x(x, self.n)
        speed = float(np.linalg.norm(delta[[0, 2]]) * self.model.fps)
        pose = self._blend(pose, x, switched, speed)
        if self.use_foot_lock:
            pose = self._lock(pose)
        st.root = pose.root_position.copy()
        st.active_key = key
        st.active_phase = phase
        st.posterior = post
        st.last_pose = pose
        st.counter += 1
        return pose

    def run(self, imu: ImuStream):
        """Reconstruct a whole stream. Returns (MotionClip, [(phase, posterior)] per frame)."""
        if imu.data.shape[1] != self.model.d_y:
            raise DataError(f"IMU stream has {imu.data.shape[1]} channels, model expects {self.model.d_y}")
        poses, phases = [], []
        for t in range(len(imu)):
            poses.append(self.step(imu.data[t]))
            phases.append((self.state.active_phase, self.state.posterior))
        clip = MotionClip.from_poses(self.skeleton, self.model.fps, poses)
        return clip, phases


def reconstruct(model: HierarchicalModel, imu: ImuStream, **kwargs):
    return ReconstructionEngine(model, **kwargs).run(imu)
