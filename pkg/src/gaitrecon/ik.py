"""Analytic two-bone (hip-knee-ankle) inverse kinematics.

Bones hang along local -Y in the rest pose and bend about local +X, so the
knee moves toward the pole direction.
"""

from __future__ import annotations

import numpy as np

from . import quaternion as quat

_EPS = 1e-9


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _frame_from_axes(bone_dir, pole):
    """World rotation whose local -Y is ``bone_dir`` and local +X is bone x pole."""
    y = -bone_dir
    x = _unit(np.cross(y, pole))
    z = np.cross(x, y)
    m = np.stack([x, y, z], axis=-1)
    return quat.from_matrix(m)


def _any_perpendicular(dhat):
    """Unit vector normal to ``dhat``: forward or up, whichever is less aligned with it."""
    fwd = np.broadcast_to(quat.FORWARD, dhat.shape)
    up = np.broadcast_to(np.array([0.0, 1.0, 0.0]), dhat.shape)
    use_up = np.abs(np.sum(dhat * fwd, axis=-1, keepdims=True)) > 0.9
    ref = np.where(use_up, up, fwd)
    v = ref - np.sum(ref * dhat, axis=-1, keepdims=True) * dhat
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def solve_two_bone(hip, target, pole, l1: float, l2: float):
    """Place the chain hip -> knee -> ankle so the ankle reaches ``target``.

    Targets beyond reach are clamped to full extension along the hip-target
    line (never past it). Returns ``(knee, thigh_rot, shin_rot, reached)``
    with world rotations of the thigh and shin bones.
    """
    hip = np.asarray(hip, dtype=float)
    target = np.asarray(target, dtype=float)
    pole = np.broadcast_to(np.asarray(pole, dtype=float), hip.shape)
    d_vec = target - hip
    d = np.linalg.norm(d_vec, axis=-1, keepdims=True)
    lo, hi = abs(l1 - l2) + 1e-9, l1 + l2 - 1e-9
    reached = ((d >= lo) & (d <= hi))[..., 0]
    dc = np.clip(d, lo, hi)
    dhat = d_vec / np.maximum(d, _EPS)
    # in-plane direction toward the pole, perpendicular to the hip-target line
    perp = pole - np.sum(pole * dhat, axis=-1, keepdims=True) * dhat
    perp_n = np.linalg.norm(perp, axis=-1, keepdims=True)
    perp = np.where(perp_n > 1e-9, perp / np.maximum(perp_n, _EPS), _any_perpendicular(dhat))
    cos_a = np.clip((l1**2 + dc**2 - l2**2) / (2.0 * l1 * dc), -1.0, 1.0)
    sin_a = np.sqrt(1.0 - cos_a**2)
    knee = hip + l1 * (cos_a * dhat + sin_a * perp)
    ankle = hip + dc * dhat
    thigh = _frame_from_axes(_unit(knee - hip), perp)
    shin = _frame_from_axes(_unit(ankle - knee), perp)
    return knee, thigh, shin, reached
