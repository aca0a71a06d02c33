"""Skeleton topology, poses, clips and forward kinematics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import quaternion as quat
from .errors import DataError, MissingInputError, ParseError


@dataclass(frozen=True)
class Joint:
    name: str
    parent: Optional[int]
    offset: tuple


@dataclass(frozen=True)
class Skeleton:
    joints: tuple
    root: int = 0

    def __post_init__(self):
        seen_root = False
        for i, j in enumerate(self.joints):
            if j.parent is None:
                if i != self.root or seen_root:
                    raise DataError(f"joint {j.name!r} has no parent but is not the root")
                seen_root = True
            elif not 0 <= j.parent < i:
                raise DataError(f"joint {j.name!r}: parent {j.parent} must precede it")
            if len(j.offset) != 3 or not np.all(np.isfinite(j.offset)):
                raise DataError(f"joint {j.name!r}: offset must be 3 finite numbers")
        if not seen_root:
            raise DataError("skeleton has no root")

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def names(self) -> list:
        return [j.name for j in self.joints]

    @property
    def parents(self) -> np.ndarray:
        return np.array([-1 if j.parent is None else j.parent for j in self.joints])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([j.offset for j in self.joints], dtype=float)

    def index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(f"no joint named {name!r}")

    def chain_to_root(self, idx: int) -> list:
        out = []
        while idx is not None and idx >= 0:
            out.append(idx)
            idx = self.joints[idx].parent
        return out

    def to_json(self) -> list:
        return [{"name": j.name, "parent": j.parent, "offset": list(j.offset)} for j in self.joints]

    @classmethod
    def from_json(cls, data) -> "Skeleton":
        try:
            joints = tuple(
                Joint(str(d["name"]), None if d["parent"] is None else int(d["parent"]),
                      tuple(float(v) for v in d["offset"]))
                for d in data
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad skeleton entry: {exc}") from exc
        roots = [i for i, j in enumerate(joints) if j.parent is None]
        return cls(joints, roots[0] if roots else 0)


def load_skeleton(path) -> Skeleton:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"skeleton file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc.msg), path, exc.lineno) from exc
    try:
        return Skeleton.from_json(data)
    except ParseError as exc:
        raise ParseError(str(exc), path) from exc


def save_skeleton(skeleton: Skeleton, path) -> None:
    Path(path).write_text(json.dumps(skeleton.to_json(), indent=1) + "\n")


def canonical_skeleton() -> Skeleton:
    """The 18-joint biped shipped with the package (``data/skeleton18.json``)."""
    text = resources.files("gaitrecon").joinpath("data/skeleton18.json").read_text()
    return Skeleton.from_json(json.loads(text))


@dataclass(frozen=True)
class SkeletonPose:
    root_position: np.ndarray
    joint_rotations: np.ndarray

    def __post_init__(self):
        rp = np.asarray(self.root_position, dtype=float).reshape(3)
        rots = quat.canonical(np.asarray(self.joint_rotations, dtype=float).reshape(-1, 4))
        if not (np.all(np.isfinite(rp)) and np.all(np.isfinite(rots))):
            raise DataError("pose contains non-finite values")
        object.__setattr__(self, "root_position", rp)
        object.__setattr__(self, "joint_rotations", rots)

    @classmethod
    def identity(cls, skeleton: Skeleton, root_position=(0.0, 0.0, 0.0)) -> "SkeletonPose":
        return cls(np.asarray(root_position, float), np.tile(quat.IDENTITY, (skeleton.n_joints, 1)))


@dataclass(frozen=True)
class MotionClip:
    """A sampled motion: ``root_positions`` (T, 3) and ``rotations`` (T, N, 4)."""

    skeleton: Skeleton
    fps: float
    root_positions: np.ndarray
    rotations: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.fps > 0:
            raise DataError(f"fps must be positive, got {self.fps}")
        rp = np.asarray(self.root_positions, dtype=float)
        rots = np.asarray(self.rotations, dtype=float)
        if rp.ndim != 2 or rp.shape[1] != 3 or rp.shape[0] == 0:
            raise DataError("root_positions must be a non-empty (T, 3) array")
        if rots.shape != (rp.shape[0], self.skeleton.n_joints, 4):
            raise DataError(
                f"rotations shape {rots.shape} does not match "
                f"({rp.shape[0]}, {self.skeleton.n_joints}, 4)"
            )
        if not (np.all(np.isfinite(rp)) and np.all(np.isfinite(rots))):
            raise DataError("motion clip contains non-finite values")
        rots = quat.canonical(rots)
        rp = rp.copy()
        rp.flags.writeable = False
        rots.flags.writeable = False
        object.__setattr__(self, "root_positions", rp)
        object.__setattr__(self, "rotations", rots)

    def __len__(self) -> int:
        return self.root_positions.shape[0]

    @property
    def n_frames(self) -> int:
        return len(self)

    def pose(self, t: int) -> SkeletonPose:
        return SkeletonPose(self.root_positions[t], self.rotations[t])

    @property
    def frames(self) -> list:
        return [self.pose(t) for t in range(len(self))]

    def slice(self, start: int, end: int) -> "MotionClip":
        return MotionClip(self.skeleton, self.fps, self.root_positions[start:end],
                          self.rotations[start:end], dict(self.meta))

    @classmethod
    def from_poses(cls, skeleton: Skeleton, fps: float, poses: Sequence[SkeletonPose]) -> "MotionClip":
        return cls(skeleton, fps, np.array([p.root_position for p in poses]),
                   np.array([p.joint_rotations for p in poses]))


def forward_kinematics_batch(skeleton: Skeleton, root_positions, rotations):
    """World joint positions and rotations for arrays of poses.

    ``root_positions`` (..., 3), ``rotations`` (..., N, 4) ->
    (positions (..., N, 3), world rotations (..., N, 4)).
    """
    root_positions = np.asarray(root_positions, dtype=float)
    rotations = np.asarray(rotations, dtype=float)
    n = skeleton.n_joints
    offsets = skeleton.offsets
    pos = np.empty(rotations.shape[:-1] + (3,))
    wrot = np.empty_like(rotations)
    for j, joint in enumerate(skeleton.joints):
        if joint.parent is None:
            wrot[..., j, :] = rotations[..., j, :]
            pos[..., j, :] = root_positions
        else:
            p = joint.parent
            wrot[..., j, :] = quat.mul(wrot[..., p, :], rotations[..., j, :])
            pos[..., j, :] = pos[..., p, :] + quat.rotate(wrot[..., p, :], offsets[j])
    assert pos.shape[-2] == n
    return pos, wrot


def forward_kinematics(skeleton: Skeleton, pose: SkeletonPose) -> np.ndarray:
    """World positions (N, 3) of every joint for one pose."""
    if pose.joint_rotations.shape[0] != skeleton.n_joints:
        raise DataError("pose is not sized to the skeleton")
    return forward_kinematics_batch(skeleton, pose.root_position, pose.joint_rotations)[0]


def clip_positions(clip: MotionClip, pin_root: bool = False) -> np.ndarray:
    """(T, N, 3) world joint positions; with ``pin_root`` the root sits at the origin."""
    root = np.zeros_like(clip.root_positions) if pin_root else clip.root_positions
    return forward_kinematics_batch(clip.skeleton, root, clip.rotations)[0]
