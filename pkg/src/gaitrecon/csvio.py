"""Motion / IMU CSV reading and writing.

Motion: ``frame, root_x, root_y, root_z, q0_w, q0_x, q0_y, q0_z, q1_w, ...``
IMU:    ``frame, ax, ay, az, gx, gy, gz`` (extra sensors append ``ax1, ..., gz1``).
The header row is mandatory. Floats are written with ``repr`` so files
round-trip exactly and never depend on locale.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import MissingInputError, ParseError
from .features import ImuStream
from .skeleton import MotionClip, Skeleton

IMU_CHANNELS = ["ax", "ay", "az", "gx", "gy", "gz"]


def motion_header(n_joints: int) -> list:
    cols = ["frame", "root_x", "root_y", "root_z"]
    for j in range(n_joints):
        cols += [f"q{j}_w", f"q{j}_x", f"q{j}_y", f"q{j}_z"]
    return cols


def imu_header(n_sensors: int) -> list:
    cols = ["frame"]
    for s in range(n_sensors):
        suffix = "" if s == 0 else str(s)
        cols += [c + suffix for c in IMU_CHANNELS]
    return cols


def _read_table(path, expected_header=None):
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"input file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file (header row required)", path, 1) from None
        if expected_header is not None and header != expected_header:
            raise ParseError(f"unexpected header {header[:6]}...", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"not a number: {exc}", path, lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError("non-finite value", path, lineno)
            rows.append(vals)
    if not rows:
        raise ParseError("no data rows", path, 2)
    return header, np.array(rows)


def read_motion_csv(path, skeleton: Skeleton, fps: float = 30.0) -> MotionClip:
    _, data = _read_table(path, motion_header(skeleton.n_joints))
    q = data[:, 4:].reshape(len(data), skeleton.n_joints, 4)
    norms = np.linalg.norm(q, axis=-1)
    bad = np.argwhere(norms < 1e-9)
    if bad.size:
        raise ParseError("zero-length quaternion", path, int(bad[0, 0]) + 2)
    return MotionClip(skeleton, fps, data[:, 1:4], q)


def read_imu_csv(path, fps: float = 30.0) -> ImuStream:
    header, data = _read_table(path)
    n = (len(header) - 1) // 6
    if len(header) != 1 + 6 * n or n == 0 or header != imu_header(n):
        raise ParseError(f"unexpected IMU header {header}", path, 1)
    return ImuStream(fps, data[:, 1:])


def _write(path, header, data):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row in enumerate(data):
            w.writerow([t] + [repr(float(v)) for v in row])


def write_motion_csv(path, clip: MotionClip) -> None:
    T = len(clip)
    data = np.concatenate([clip.root_positions, clip.rotations.reshape(T, -1)], axis=1)
    _write(path, motion_header(clip.skeleton.n_joints), data)


def write_imu_csv(path, imu: ImuStream) -> None:
    _write(path, imu_header(imu.n_sensors), imu.data)
