"""Deterministic synthetic locomotion and IMU simulation.

Walk and run cycles are built from planted-foot trajectories (heel strike,
foot flat, heel rise, toe off, swing) with the legs solved by analytic IK, so
foot contacts are exact and the eight-phase contact pattern is known in
closed form. Each cycle starts at right heel strike. Jump and hop cycles are
crouch / ballistic flight / landing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import quaternion as quat
from .errors import DataError
from .features import ImuStream
from .ik import solve_two_bone
from .skeleton import MotionClip, Skeleton, forward_kinematics_batch

log = logging.getLogger(__name__)

MOTION_TYPES = ("walk", "run", "jump", "hop", "idle")
GAIT_TYPES = ("walk", "run")
FLIGHT_TYPES = ("jump", "hop")

# contact timing, as fractions of a cycle measured from right heel strike
FOOT_FLAT = 0.06
OPPOSITE_TOE_OFF = 0.10
HEEL_OFF = 0.40
TOE_OFF = 0.60
# jump / hop timing
TAKEOFF = 0.3
LANDING = 0.7

LEAD_IN = 0.05  # walk/run clips start this fraction of a cycle before the first heel strike
FOOT_LENGTH = 0.15

_BASE = {
    "walk": dict(duration=1.1, stride=1.2, height=0.86, bob=0.02, clearance=0.07, arm=0.30,
                 elbow=0.30, lean=0.05, yaw_amp=0.08, roll=0.04, strike_pitch=0.30,
                 toeoff_pitch=0.60, crouch=0.0),
    "run": dict(duration=0.75, stride=1.5, height=0.80, bob=0.03, clearance=0.14, arm=0.55,
                elbow=1.20, lean=0.15, yaw_amp=0.12, roll=0.05, strike_pitch=0.25,
                toeoff_pitch=0.70, crouch=0.0),
    "jump": dict(duration=1.0, stride=0.3, height=0.90, bob=0.0, clearance=0.0, arm=0.9,
                 elbow=0.4, lean=0.1, yaw_amp=0.0, roll=0.0, strike_pitch=0.0,
                 toeoff_pitch=0.0, crouch=0.15),
    "hop": dict(duration=1.0, stride=0.2, height=0.90, bob=0.0, clearance=0.25, arm=0.5,
                elbow=0.5, lean=0.08, yaw_amp=0.0, roll=0.0, strike_pitch=0.0,
                toeoff_pitch=0.0, crouch=0.10),
    "idle": dict(duration=1.0, stride=0.0, height=0.90, bob=0.0, clearance=0.0, arm=0.0,
                 elbow=0.1, lean=0.0, yaw_amp=0.0, roll=0.0, strike_pitch=0.0,
                 toeoff_pitch=0.0, crouch=0.0),
}

# per-cycle jitter gains applied to a unit normal draw scaled by GaitSpec.variation
_JITTER = dict(duration=0.8, stride=1.0, arm=3.0, elbow=2.0, yaw_amp=2.0, clearance=2.0,
               roll=2.0, lean=1.0)


@dataclass(frozen=True)
class GaitSpec:
    """What to generate. ``None`` durations/strides take the motion type's default.

    ``noise_std`` is (accel m/s^2, gyro rad/s) for :func:`simulate_imu`;
    ``variation`` is the relative per-cycle style jitter (0 = identical cycles).
    """

    motion_type: str = "walk"
    cycle_duration: Optional[float] = None
    stride_length: Optional[float] = None
    turn_rate: float = 0.0
    cycles: int = 1
    noise_std: tuple = (0.0, 0.0)
    seed: int = 0
    variation: float = 0.0

    def __post_init__(self):
        if self.motion_type not in MOTION_TYPES:
            raise DataError(f"unsupported motion type {self.motion_type!r}")
        if self.cycle_duration is not None and not self.cycle_duration > 0:
            raise DataError("cycle_duration must be positive")
        if self.cycles < 1:
            raise DataError("cycles must be >= 1")
        if min(self.noise_std) < 0 or self.variation < 0:
            raise DataError("noise and variation must be non-negative")

    @property
    def duration(self) -> float:
        return self.cycle_duration if self.cycle_duration is not None else _BASE[self.motion_type]["duration"]

    @property
    def stride(self) -> float:
        return self.stride_length if self.stride_length is not None else _BASE[self.motion_type]["stride"]


@dataclass(frozen=True)
class SensorMount:
    joint: str
    offset: tuple = (0.0, 0.0, 0.0)
    orientation: tuple = (1.0, 0.0, 0.0, 0.0)


DEFAULT_MOUNTS = {
    "right_ankle": SensorMount("right_ankle", (0.0, 0.08, 0.03)),
    "left_ankle": SensorMount("left_ankle", (0.0, 0.08, 0.03)),
    "right_wrist": SensorMount("right_wrist", (0.0, -0.03, 0.02)),
    "left_wrist": SensorMount("left_wrist", (0.0, -0.03, 0.02)),
    "right_knee": SensorMount("right_knee", (0.0, -0.15, 0.05)),
    "right_elbow": SensorMount("right_elbow", (0.0, -0.12, 0.03)),
    "hips": SensorMount("hips", (0.0, 0.0, -0.1)),
}


def mount_for(name: str) -> SensorMount:
    return DEFAULT_MOUNTS.get(name, SensorMount(name))


def _smooth(v):
    v = np.clip(v, 0.0, 1.0)
    return v * v * (3.0 - 2.0 * v)


class _Plan:
    """Per-cycle parameters plus the continuous time/phase/path functions."""

    def __init__(self, specs: Sequence[GaitSpec]):
        kinds = {s.motion_type for s in specs}
        if len(kinds) > 1 and not kinds <= set(GAIT_TYPES):
            raise DataError(f"cannot mix motion types {sorted(kinds)} in one clip")
        self.kind = specs[0].motion_type
        self.category = "gait" if self.kind in GAIT_TYPES else self.kind
        cycles = []
        for spec in specs:
            rng = np.random.default_rng(spec.seed)
            for _ in range(spec.cycles):
                p = dict(_BASE[spec.motion_type])
                p["duration"] = spec.duration
                p["stride"] = spec.stride
                p["turn"] = spec.turn_rate
                jit = np.clip(rng.standard_normal(len(_JITTER)), -2.5, 2.5) * spec.variation
                for (k, g), e in zip(_JITTER.items(), jit):
                    if k == "lean":
                        p[k] += g * e
                    else:
                        p[k] *= 1.0 + g * e
                if self.category != "gait":
                    p["duration"] = spec.duration  # keep flight frame-aligned
                cycles.append(p)
        self.cycles = cycles
        C = len(cycles)
        self.n_cycles = C
        d = np.array([c["duration"] for c in cycles])
        s = np.array([c["stride"] for c in cycles])
        T = np.concatenate([[0.0], np.cumsum(d)])
        S = np.concatenate([[0.0], np.cumsum(s)])
        self.T = T
        self.S = S
        # extend knots two cycles each side so boundary slopes match the edge cycles
        Tk = np.concatenate([[T[0] - 2 * d[0], T[0] - d[0]], T, [T[-1] + d[-1], T[-1] + 2 * d[-1]]])
        Sk = np.concatenate([[S[0] - 2 * s[0], S[0] - s[0]], S, [S[-1] + s[-1], S[-1] + 2 * s[-1]]])
        ck = np.arange(-2, C + 3, dtype=float)
        self._phi = PchipInterpolator(Tk, ck, extrapolate=True)
        self._dist = PchipInterpolator(Tk, Sk, extrapolate=True)
        self._dist_rate = self._dist.derivative()
        mids = np.concatenate([[-1.5, -0.5], np.arange(C) + 0.5, [C + 0.5, C + 1.5]])
        self._params = {}
        for key in cycles[0]:
            vals = np.array([c[key] for c in cycles], dtype=float)
            vals = np.concatenate([[vals[0]] * 2, vals, [vals[-1]] * 2])
            self._params[key] = PchipInterpolator(mids, vals, extrapolate=True)
        self.rates = np.array([c["turn"] for c in cycles])
        self.H = np.concatenate([[0.0], np.cumsum(self.rates * d)])
        self.t_start = -LEAD_IN * d[0] if self.category == "gait" else 0.0
        self.t_end = T[-1] + self.t_start

    # -- scalar/vector functions of time ------------------------------------
    def phi(self, t):
        return self._phi(t)

    def t_of_phi(self, phi: float) -> float:
        lo, hi = self.T[0] - 2 * self.cycles[0]["duration"], self.T[-1] + 2 * self.cycles[-1]["duration"]
        return brentq(lambda t: float(self._phi(t)) - phi, lo, hi, xtol=1e-13)

    def param(self, key, phi):
        return self._params[key](phi)

    def heading(self, t):
        t = np.asarray(t, dtype=float)
        c = np.clip(np.searchsorted(self.T, t, side="right") - 1, 0, self.n_cycles - 1)
        return self.H[c] + self.rates[c] * (t - self.T[c])

    def distance(self, t):
        t = np.asarray(t, dtype=float)
        if self.category == "gait":
            return self._dist(t)
        if self.category == "idle":
            return np.zeros_like(t)
        phi = self.phi(t)
        c = np.floor(phi)
        u = phi - c
        prog = np.clip((u - TAKEOFF) / (LANDING - TAKEOFF), 0.0, 1.0)
        ci = np.clip(c.astype(int), 0, self.n_cycles - 1)
        base = np.where(c < 0, 0.0, np.where(c >= self.n_cycles, self.S[-1], self.S[ci]))
        stride = np.where((c < 0) | (c >= self.n_cycles), 0.0, np.array([cc["stride"] for cc in self.cycles])[ci])
        return base + stride * prog

    def ground(self, t):
        """Root ground-plane path (x, 0, z) at times ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if not np.any(self.rates):
            dist = self.distance(t)
            return np.stack([dist * 0.0, 0.0 * dist, dist], axis=-1)
        lo = min(t.min(), self.t_start) - 0.1
        hi = max(t.max(), self.t_end) + 0.1
        grid = np.linspace(lo, hi, int((hi - lo) * 2000) + 2)
        dist = self.distance(grid)
        psi = self.heading(grid)
        ddist = np.diff(dist)
        mid_psi = 0.5 * (psi[1:] + psi[:-1])
        dx = np.concatenate([[0.0], np.cumsum(ddist * np.sin(mid_psi))])
        dz = np.concatenate([[0.0], np.cumsum(ddist * np.cos(mid_psi))])
        g0 = np.interp(0.0, grid, dx), np.interp(0.0, grid, dz)
        x = np.interp(t, grid, dx) - g0[0]
        z = np.interp(t, grid, dz) - g0[1]
        return np.stack([x, np.zeros_like(x), z], axis=-1)


class _GaitBuilder:
    def __init__(self, plan: _Plan, skeleton: Skeleton):
        self.plan = plan
        self.sk = skeleton
        off = skeleton.offsets
        self.idx = {n: skeleton.index(n) for n in skeleton.names}
        self.hip_off = {s: off[self.idx[f"{s}_hip"]] for s in ("left", "right")}
        self.l1 = float(np.linalg.norm(off[self.idx["right_knee"]]))
        self.l2 = float(np.linalg.norm(off[self.idx["right_ankle"]]))
        self.toe_off = off[self.idx["right_toe"]]
        self._strikes = {}

    # -- root ------------------------------------------------------------------
    def root(self, t):
        p = self.plan
        phi = p.phi(t)
        psi = p.heading(t)
        g = p.ground(t)
        h = p.param("height", phi)
        if p.category == "gait":
            h = h - p.param("bob", phi) * np.cos(4 * np.pi * phi)
            sway = -0.015 * np.sin(2 * np.pi * phi)
            yaw_osc = p.param("yaw_amp", phi) * np.cos(2 * np.pi * phi)
            roll = p.param("roll", phi) * np.sin(2 * np.pi * phi)
        else:
            sway = np.zeros_like(phi)
            yaw_osc = np.zeros_like(phi)
            roll = np.zeros_like(phi)
            if p.category in FLIGHT_TYPES:
                h = h + self._vertical(t)
        lat = quat.rotate(quat.from_yaw(psi), np.stack([sway, 0 * sway, 0 * sway], axis=-1))
        pos = g + lat
        pos[..., 1] = h
        lean = p.param("lean", phi)
        rot = quat.mul(quat.from_yaw(psi + yaw_osc),
                       quat.mul(quat.from_axis_angle([1.0, 0, 0], lean),
                                quat.from_axis_angle([0, 0, 1.0], roll)))
        return pos, rot, yaw_osc

    def _vertical(self, t):
        """Root height offset for jump/hop cycles (Hermite crouch + ballistic flight)."""
        p = self.plan
        phi = p.phi(t)
        c = np.floor(phi)
        u = phi - c
        ci = np.clip(c.astype(int), 0, p.n_cycles - 1)
        d = np.array([cc["duration"] for cc in p.cycles])[ci]
        crouch = np.array([cc["crouch"] for cc in p.cycles])[ci]
        tf = (LANDING - TAKEOFF) * d
        g = 9.81
        v0 = 0.5 * g * tf
        out = np.zeros_like(u)
        valid = (c >= 0) & (c < p.n_cycles)

        def herm(s, y0, y1, m0, m1, span):
            s2, s3 = s * s, s * s * s
            return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * span * m0
                    + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * span * m1)

        half = TAKEOFF / 2 * d
        a = u < TAKEOFF / 2
        out = np.where(valid & a, herm(u / (TAKEOFF / 2), 0, -crouch, 0, 0, half), out)
        b = (u >= TAKEOFF / 2) & (u < TAKEOFF)
        out = np.where(valid & b, herm((u - TAKEOFF / 2) / (TAKEOFF / 2), -crouch, 0, 0, v0, half), out)
        f = (u >= TAKEOFF) & (u < LANDING)
        tau = (u - TAKEOFF) * d
        out = np.where(valid & f, v0 * tau - 0.5 * g * tau * tau, out)
        half2 = (1 - LANDING) / 2 * d
        l1 = (u >= LANDING) & (u < LANDING + (1 - LANDING) / 2)
        out = np.where(valid & l1, herm((u - LANDING) / ((1 - LANDING) / 2), 0, -crouch, -v0, 0, half2), out)
        l2 = u >= LANDING + (1 - LANDING) / 2
        out = np.where(valid & l2, herm((u - LANDING - (1 - LANDING) / 2) / ((1 - LANDING) / 2), -crouch, 0, 0, 0, half2), out)
        return out

    # -- feet ------------------------------------------------------------------
    def strike_time(self, k: int, side: str) -> float:
        key = (k, side)
        if key not in self._strikes:
            off = 0.0 if side == "right" else 0.5
            self._strikes[key] = self.plan.t_of_phi(k + off)
        return self._strikes[key]

    def placement(self, k: int, side: str):
        """Ankle position and yaw of footstep ``k`` for walk/run."""
        ts = self.strike_time(k, side)
        p = self.plan
        psi = float(p.heading(ts))
        phi = float(p.phi(ts))
        stride = float(p.param("stride", phi))
        lat = self.hip_off[side][0]
        g = p.ground(ts)[0]
        pos = g + quat.rotate(quat.from_yaw(psi), np.array([lat, 0.0, 0.25 * stride]))
        pos[1] = 0.0
        return pos, psi

    def _toe_vec(self, yaw, pitch):
        return quat.rotate(self._foot_rot(yaw, pitch), self.toe_off)

    @staticmethod
    def _foot_rot(yaw, pitch):
        return quat.mul(quat.from_yaw(yaw), quat.from_axis_angle([1.0, 0, 0], -np.asarray(pitch)))

    def foot_gait(self, t: float, side: str):
        """(ankle position, foot world rotation) for walk/run at scalar time t."""
        p = self.plan
        off = 0.0 if side == "right" else 0.5
        u = float(p.phi(t)) - off
        k = int(np.floor(u))
        f = u - k
        P, psi = self.placement(k, side)
        sp = float(p.param("strike_pitch", k + off))
        tp = float(p.param("toeoff_pitch", k + off))
        if f < FOOT_FLAT:
            pitch = sp * (1.0 - f / FOOT_FLAT)
            return P, self._foot_rot(psi, pitch)
        if f < HEEL_OFF:
            return P, self._foot_rot(psi, 0.0)
        toe = P + self._toe_vec(psi, 0.0)
        if f < TOE_OFF:
            pitch = -tp * (f - HEEL_OFF) / (TOE_OFF - HEEL_OFF)
            return toe - self._toe_vec(psi, pitch), self._foot_rot(psi, pitch)
        a0 = toe - self._toe_vec(psi, -tp)
        P1, psi1 = self.placement(k + 1, side)
        sp1 = float(p.param("strike_pitch", k + 1 + off))
        v = (f - TOE_OFF) / (1.0 - TOE_OFF)
        s = _smooth(v)
        clearance = float(p.param("clearance", k + off + 0.8))
        pos = a0 + (P1 - a0) * s
        pos[1] = a0[1] * (1.0 - s) + clearance * np.sin(np.pi * v)
        pitch = -tp + (sp1 + tp) * s
        yaw = psi + (psi1 - psi) * s
        return pos, self._foot_rot(yaw, pitch)

    def foot_flight(self, t: float, side: str, root_pos):
        """Foot target for jump/hop/idle at scalar time t."""
        p = self.plan
        phi = float(p.phi(t))
        c = int(np.floor(phi))
        u = phi - c
        lat = self.hip_off[side][0]
        if p.category == "hop" and side == "left":
            ref, yaw = self.foot_flight(t, "right", root_pos)
            lift = quat.rotate(quat.from_yaw(yaw), np.array([2 * lat, 0.0, -0.12]))
            return ref + lift + np.array([0.0, p.cycles[0]["clearance"], 0.0]), yaw

        def planted(cycle_idx):
            ts = self.plan.T[np.clip(cycle_idx, 0, p.n_cycles)] if cycle_idx >= 0 else 0.0
            ts = float(ts)
            g = p.ground(ts)[0]
            psi = float(p.heading(ts))
            pos = g + quat.rotate(quat.from_yaw(psi), np.array([lat, 0.0, 0.0]))
            pos[1] = 0.0
            return pos, psi

        if p.category == "idle" or c < 0:
            return planted(0)
        if c >= p.n_cycles:
            return planted(p.n_cycles)
        if u < TAKEOFF:
            return planted(c)
        if u >= LANDING:
            return planted(c + 1)
        t_to = self.plan.T[c] + TAKEOFF * p.cycles[c]["duration"]
        pos0, psi = planted(c)
        r_to, _, _ = self.root(np.array([t_to]))
        return pos0 + (root_pos - r_to[0]), psi

    # -- whole pose ----------------------------------------------------------
    def build(self, times: np.ndarray, fps: float) -> MotionClip:
        p = self.plan
        n = self.sk.n_joints
        T = len(times)
        root_pos, root_rot, yaw_osc = self.root(times)
        phi = p.phi(times)
        local = np.tile(quat.IDENTITY, (T, n, 1))
        local[:, self.idx["hips"]] = root_rot
        lean = p.param("lean", phi)
        counter = -0.5 * yaw_osc
        local[:, self.idx["spine"]] = quat.from_yaw(counter)
        local[:, self.idx["chest"]] = quat.mul(quat.from_yaw(counter),
                                                quat.from_axis_angle([1.0, 0, 0], 0.3 * lean))
        local[:, self.idx["head"]] = quat.from_axis_angle([1.0, 0, 0], -1.3 * lean)
        arm = p.param("arm", phi)
        elbow = p.param("elbow", phi)
        if p.category == "gait":
            swing = arm * np.cos(2 * np.pi * phi)
            flex = elbow * (1.0 + 0.25 * np.sin(2 * np.pi * phi))
            sides = {"right": swing, "left": -swing}
        elif p.category in FLIGHT_TYPES:
            u = phi - np.floor(phi)
            raise_ = -arm * np.sin(np.pi * np.clip((u - 0.1) / 0.8, 0, 1)) ** 2
            flex = elbow * np.ones_like(phi)
            sides = {"right": raise_, "left": raise_}
        else:
            flex = elbow * np.ones_like(phi)
            sides = {"right": 0 * phi, "left": 0 * phi}
        for side, sgn in (("right", -1.0), ("left", 1.0)):
            sh = quat.mul(quat.from_axis_angle([0, 0, 1.0], sgn * 0.08 * np.ones_like(phi)),
                          quat.from_axis_angle([1.0, 0, 0], sides[side]))
            local[:, self.idx[f"{side}_shoulder"]] = sh
            local[:, self.idx[f"{side}_elbow"]] = quat.from_axis_angle([1.0, 0, 0], -flex)

        # legs: targets -> IK -> local rotations
        pole = quat.rotate(quat.from_yaw(p.heading(times)), quat.FORWARD)
        unreached = 0
        for side in ("right", "left"):
            targets = np.empty((T, 3))
            foot_rot = np.empty((T, 4))
            for i, t in enumerate(times):
                if p.category == "gait":
                    pos, fr = self.foot_gait(float(t), side)
                else:
                    pos, yaw = self.foot_flight(float(t), side, root_pos[i])
                    fr = self._foot_rot(yaw, 0.0)
                targets[i] = pos
                foot_rot[i] = fr
            hip = root_pos + quat.rotate(root_rot, self.hip_off[side])
            _, thigh, shin, reached = solve_two_bone(hip, targets, pole, self.l1, self.l2)
            unreached += int(np.sum(~reached))
            local[:, self.idx[f"{side}_hip"]] = quat.mul(quat.conj(root_rot), thigh)
            local[:, self.idx[f"{side}_knee"]] = quat.mul(quat.conj(thigh), shin)
            local[:, self.idx[f"{side}_ankle"]] = quat.mul(quat.conj(shin), foot_rot)
        if unreached:
            log.warning("%d foot targets beyond leg reach were clamped", unreached)
        meta = {"motion_type": p.kind, "times": times, "heading": p.heading(times)}
        return MotionClip(self.sk, fps, root_pos, local, meta)


def _times(plan: _Plan, fps: float) -> np.ndarray:
    n = int(np.floor((plan.T[-1] - plan.T[0]) * fps + 1e-9)) + 1
    return plan.t_start + np.arange(n) / fps


def _check_skeleton(skeleton: Skeleton):
    needed = {"hips", "spine", "chest", "head"} | {
        f"{s}_{j}" for s in ("left", "right") for j in ("shoulder", "elbow", "wrist", "hip", "knee", "ankle", "toe")
    }
    missing = needed - set(skeleton.names)
    if missing:
        raise DataError(f"generator needs the canonical biped; missing joints {sorted(missing)}")


def generate_sequence(specs: Sequence[GaitSpec], skeleton: Skeleton, fps: float = 30.0) -> MotionClip:
    """Concatenate several specs into one continuous clip (e.g. walk -> run -> walk)."""
    _check_skeleton(skeleton)
    specs = list(specs)
    plan = _Plan(specs)
    builder = _GaitBuilder(plan, skeleton)
    times = _times(plan, fps)
    clip = builder.build(times, fps)
    clip.meta["schedule"] = phase_schedule(plan, builder, fps)
    clip.meta["cycle_starts"] = plan.T.copy()
    return clip


def generate_gait(spec: GaitSpec, skeleton: Skeleton, fps: float = 30.0) -> MotionClip:
    return generate_sequence([spec], skeleton, fps)


# -- ground-truth phase schedule ------------------------------------------------

def _crossing_time(builder: _GaitBuilder, lo: float, hi: float, mover: str) -> float:
    other = "left" if mover == "right" else "right"

    def f(t):
        a, _ = builder.foot_gait(t, mover)
        b, _ = builder.foot_gait(t, other)
        _, rot, _ = builder.root(np.array([t]))
        facing = quat.rotate(rot[0], quat.FORWARD)
        facing[1] = 0.0
        return float(np.dot(a - b, facing))

    return brentq(f, lo, hi, xtol=1e-12)


def phase_schedule(plan: _Plan, builder: _GaitBuilder, fps: float) -> list:
    """[(phase name, first frame)] from the analytic event times.

    The frame for an event at time t is the first frame sampled at or after t.
    """
    t0 = plan.t_start

    def frame(t):
        return int(np.ceil((t - t0) * fps - 1e-9))

    events = []
    if plan.category == "gait":
        for c in range(plan.n_cycles):
            tp = plan.t_of_phi
            ev = [
                ("IC_LR", tp(c)),
                ("LR_MST", tp(c + max(FOOT_FLAT, OPPOSITE_TOE_OFF))),
                ("MST_TST", _crossing_time(builder, tp(c + OPPOSITE_TOE_OFF + 0.01), tp(c + 0.5 - 0.01), "left")),
                ("TST_PSW", tp(c + HEEL_OFF)),
                ("PSW_ISW", tp(c + 0.5)),
                ("ISW_MSW", tp(c + TOE_OFF)),
                ("MSW_TSW", _crossing_time(builder, tp(c + TOE_OFF + 0.01), tp(c + 1.0 - 0.01), "right")),
                ("TSW_IC", tp(c + 0.5 + HEEL_OFF)),
            ]
            events += ev
        out = [("IDLE", 0)] + [(name, frame(t)) for name, t in events]
    elif plan.category in FLIGHT_TYPES:
        out = [("IDLE", 0)]
        for c in range(plan.n_cycles):
            d = plan.cycles[c]["duration"]
            T = plan.T[c]
            # the feet are still planted on the takeoff frame itself
            out += [("AIRBORNE_UP", int(np.floor((T + TAKEOFF * d - t0) * fps + 1e-9)) + 1),
                    ("AIRBORNE_DOWN", frame(T + 0.5 * (TAKEOFF + LANDING) * d)),
                    ("IDLE", frame(T + LANDING * d))]
    else:
        out = [("IDLE", 0)]
    n = len(_times(plan, fps))
    return [(name, f) for name, f in out if f < n]


def schedule_labels(clip: MotionClip) -> list:
    """Per-frame ground-truth phase names from ``clip.meta['schedule']``."""
    sched = clip.meta["schedule"]
    labels = []
    for i, (name, start) in enumerate(sched):
        end = sched[i + 1][1] if i + 1 < len(sched) else len(clip)
        labels += [name] * (end - start)
    return labels


# -- IMU simulation --------------------------------------------------------------

def _body_rates(q: np.ndarray, fps: float) -> np.ndarray:
    # backward difference (what a sampling gyro reports over the last interval);
    # frame 0 takes the forward difference
    w = np.empty((len(q), 3))
    w[1:] = quat.log(quat.mul(quat.conj(q[:-1]), q[1:])) * fps
    w[0] = w[1]
    return w


def simulate_imu(clip: MotionClip, mount: SensorMount, gravity=(0.0, -9.81, 0.0),
                 noise_std=(0.0, 0.0), seed: int = 0) -> ImuStream:
    """Accelerometer (m/s^2, gravity added, sensor frame) and gyro (rad/s, sensor frame)."""
    if clip.fps < 10:
        raise DataError("IMU simulation needs fps >= 10")
    if len(clip) < 3:
        raise DataError("IMU simulation needs at least 3 frames")
    j = clip.skeleton.index(mount.joint)
    pos, wrot = forward_kinematics_batch(clip.skeleton, clip.root_positions, clip.rotations)
    qs = quat.mul(wrot[:, j], np.asarray(mount.orientation, dtype=float))
    p = pos[:, j] + quat.rotate(wrot[:, j], np.asarray(mount.offset, dtype=float))
    fps2 = clip.fps**2
    acc = np.empty_like(p)
    acc[1:-1] = (p[2:] - 2 * p[1:-1] + p[:-2]) * fps2
    acc[0] = (p[2] - 2 * p[1] + p[0]) * fps2
    acc[-1] = (p[-1] - 2 * p[-2] + p[-3]) * fps2
    acc_s = quat.rotate(quat.conj(qs), acc + np.asarray(gravity, dtype=float))
    gyro = _body_rates(qs, clip.fps)
    if np.isscalar(noise_std):
        noise_std = (noise_std, noise_std)
    sa, sg = noise_std
    if sa > 0 or sg > 0:
        rng = np.random.default_rng(seed)
        acc_s = acc_s + rng.normal(0.0, 1.0, acc_s.shape) * sa
        gyro = gyro + rng.normal(0.0, 1.0, gyro.shape) * sg
    return ImuStream(clip.fps, np.concatenate([acc_s, gyro], axis=1))


def mount_orientation(clip: MotionClip, mount: SensorMount) -> np.ndarray:
    """World orientation of the sensor per frame (T, 4)."""
    j = clip.skeleton.index(mount.joint)
    _, wrot = forward_kinematics_batch(clip.skeleton, clip.root_positions, clip.rotations)
    return quat.mul(wrot[:, j], np.asarray(mount.orientation, dtype=float))


def simulate_sensors(clip: MotionClip, mounts: Sequence[SensorMount], noise_std=(0.0, 0.0),
                     seed: int = 0) -> ImuStream:
    """Several sensors concatenated side by side; each gets an independent noise stream."""
    streams = [simulate_imu(clip, m, noise_std=noise_std, seed=seed * 1000 + i)
               for i, m in enumerate(mounts)]
    return ImuStream.concatenate(streams)
