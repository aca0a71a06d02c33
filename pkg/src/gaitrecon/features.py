"""Full-body (X) and sensor (Y) feature vectors.

Per frame, X = [joint exp-maps (3N), joint exp-map rates (3N), root delta (3)]
with root delta = previous root position minus current root position, and
Y = [accel (3), gyro (3)] per sensor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import quaternion as quat
from .errors import AlignmentError, DataError
from .skeleton import MotionClip, SkeletonPose


@dataclass(frozen=True)
class ImuSample:
    accel: np.ndarray
    gyro: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.accel, dtype=float).reshape(3)
        g = np.asarray(self.gyro, dtype=float).reshape(3)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(g))):
            raise DataError("IMU sample contains non-finite values")
        object.__setattr__(self, "accel", a)
        object.__setattr__(self, "gyro", g)


@dataclass(frozen=True)
class ImuStream:
    """IMU samples at ``fps``; ``data`` is (T, 6 * n_sensors), each block [ax ay az gx gy gz]."""

    fps: float
    data: np.ndarray

    def __post_init__(self):
        d = np.array(self.data, dtype=float)
        if d.ndim != 2 or d.shape[1] % 6 or d.shape[1] == 0:
            raise DataError(f"IMU data must be (T, 6k), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise DataError("IMU stream contains non-finite values")
        if not self.fps > 0:
            raise DataError("IMU fps must be positive")
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.data.shape[1] // 6

    def sample(self, t: int, sensor: int = 0) -> ImuSample:
        block = self.data[t, 6 * sensor: 6 * sensor + 6]
        return ImuSample(block[:3], block[3:])

    @classmethod
    def concatenate(cls, streams) -> "ImuStream":
        """Stack several sensors side by side (multi-sensor FeatureY)."""
        streams = list(streams)
        n = {len(s) for s in streams}
        if len(n) != 1:
            raise AlignmentError("sensor streams differ in length")
        return cls(streams[0].fps, np.concatenate([s.data for s in streams], axis=1))


def x_dim(n_joints: int) -> int:
    return 6 * n_joints + 3


@dataclass(frozen=True)
class JointObservation:
    x: np.ndarray
    y: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])


@dataclass(frozen=True)
class FeatureSequence:
    """Paired X (T, d_x) and Y (T, d_y) arrays."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.shape[0] != self.y.shape[0]:
            raise AlignmentError("X and Y feature sequences differ in length")

    def __len__(self) -> int:
        return self.x.shape[0]

    def __getitem__(self, t) -> JointObservation:
        return JointObservation(self.x[t], self.y[t])

    def __iter__(self) -> Iterator[JointObservation]:
        return (self[t] for t in range(len(self)))

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.y], axis=1)

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    @property
    def d_y(self) -> int:
        return self.y.shape[1]


def rotation_params(rotations: np.ndarray) -> np.ndarray:
    """(T, N, 4) quaternions -> (T, N, 3) continuity-unwrapped exp-maps."""
    return quat.unwrap_sequence(quat.log(rotations))


def motion_features(clip: MotionClip) -> np.ndarray:
    """X features (T, 6N + 3); frame 0 has zero velocity and zero root delta."""
    T = len(clip)
    n = clip.skeleton.n_joints
    r = rotation_params(clip.rotations)
    omega = np.zeros_like(r)
    omega[1:] = (r[1:] - r[:-1]) * clip.fps
    delta = np.zeros((T, 3))
    delta[1:] = clip.root_positions[:-1] - clip.root_positions[1:]
    x = np.concatenate([r.reshape(T, 3 * n), omega.reshape(T, 3 * n), delta], axis=1)
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite motion features")
    return x


def extract_features(clip: MotionClip, imu: ImuStream) -> FeatureSequence:
    if len(clip) != len(imu):
        raise AlignmentError(f"motion has {len(clip)} frames but IMU has {len(imu)}")
    if not np.isclose(clip.fps, imu.fps):
        raise AlignmentError(f"motion fps {clip.fps} != IMU fps {imu.fps}")
    return FeatureSequence(motion_features(clip), np.array(imu.data, dtype=float))


def split_x(x: np.ndarray, n_joints: int):
    """View an X vector (or (..., d_x) array) as (rotations, velocities, root delta)."""
    x = np.asarray(x, dtype=float)
    rot = x[..., : 3 * n_joints].reshape(x.shape[:-1] + (n_joints, 3))
    vel = x[..., 3 * n_joints: 6 * n_joints].reshape(x.shape[:-1] + (n_joints, 3))
    delta = x[..., 6 * n_joints: 6 * n_joints + 3]
    return rot, vel, delta


def pose_from_feature(x, prev_root) -> SkeletonPose:
    x = np.asarray(x, dtype=float)
    if (x.size - 3) % 6:
        raise DataError(f"feature length {x.size} is not 6N + 3")
    n = (x.size - 3) // 6
    rot, _, delta = split_x(x, n)
    prev_root = np.asarray(prev_root, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(prev_root))):
        raise DataError("non-finite feature")
    return SkeletonPose(prev_root - delta, quat.exp(rot))
