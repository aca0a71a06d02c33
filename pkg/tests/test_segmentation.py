import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaitrecon import quaternion as quat
from gaitrecon.errors import AlignmentError, SegmentationError
from gaitrecon.features import ImuStream
from gaitrecon.segmentation import (GAIT_PHASES, GaitPhase, contact_state, contact_states, segment_by_speed,
                                    segment_clip, segment_gait, segment_labels, successor)
from gaitrecon.skeleton import MotionClip, SkeletonPose, forward_kinematics
from gaitrecon.synth import GaitSpec, generate_gait, mount_for, simulate_imu

from conftest import homogeneous_fk


def _planted_pose(skeleton):
    pose = SkeletonPose.identity(skeleton)
    pos = forward_kinematics(skeleton, pose)
    feet = [skeleton.index(n) for n in ("right_ankle", "right_toe", "left_ankle", "left_toe")]
    return SkeletonPose(np.array([0.0, -pos[feet, 1].max(), 0.0]), pose.joint_rotations)


def test_planted_feet_all_in_contact(skeleton):
    c = contact_state(skeleton, _planted_pose(skeleton))
    assert (c.RH, c.RT, c.LH, c.LT) == (True, True, True, True)


def test_crossing_events_follow_which_ankle_leads(skeleton):
    base = _planted_pose(skeleton)
    hip = skeleton.index("right_hip")
    ra, la = skeleton.index("right_ankle"), skeleton.index("left_ankle")
    for angle in (-0.4, 0.4):
        rots = base.joint_rotations.copy()
        rots[hip] = quat.from_axis_angle(np.array([1.0, 0.0, 0.0]), angle)
        pose = SkeletonPose(base.root_position, rots)
        pos = forward_kinematics(skeleton, pose)
        ahead = pos[ra, 2] - pos[la, 2]
        assert abs(ahead) > 0.2
        c = contact_state(skeleton, pose)
        assert c.RCE == (ahead > 0) and c.LCE == (ahead < 0)
    # a quarter turn of the hips turns "ahead" with them
    rots = base.joint_rotations.copy()
    rots[hip] = quat.from_axis_angle(np.array([1.0, 0.0, 0.0]), -0.4)
    rots[skeleton.root] = quat.from_yaw(np.pi / 2)
    c = contact_state(skeleton, SkeletonPose(base.root_position, rots))
    assert c.RCE and not c.LCE


def _threshold_script(clip, height=0.03, speed=0.15):
    """Independent flags from matrix FK: height and finite-difference speed gates."""
    pos = np.array([homogeneous_fk(clip.skeleton, r, q) for r, q in zip(clip.root_positions, clip.rotations)])
    vel = np.zeros(pos.shape[:2])
    vel[1:] = np.linalg.norm(pos[1:] - pos[:-1], axis=-1) * clip.fps
    vel[0] = np.linalg.norm(pos[1] - pos[0], axis=-1) * clip.fps
    names = ("right_ankle", "right_toe", "left_ankle", "left_toe")
    cols = [(pos[:, clip.skeleton.index(n), 1] < height) & (vel[:, clip.skeleton.index(n)] < speed) for n in names]
    return np.stack(cols, axis=1)


@pytest.mark.parametrize("kind", ["walk", "run"])
def test_contacts_agree_with_threshold_script(skeleton, kind):
    clip = generate_gait(GaitSpec(kind, cycles=2, turn_rate=0.2), skeleton)
    assert np.array_equal(contact_states(clip)[:, :4], _threshold_script(clip))


def test_successor_chain():
    assert [successor(p) for p in GAIT_PHASES] == GAIT_PHASES[1:] + GAIT_PHASES[:1]
    assert successor(GaitPhase.AIRBORNE_UP) is GaitPhase.AIRBORNE_DOWN
    assert successor(GaitPhase.IDLE) is None


def _gait_spans(segments):
    return [s for s in segments if s.phase in GAIT_PHASES]


@pytest.mark.parametrize("kind", ["walk", "run"])
def test_two_cycle_gait_gives_sixteen_phases_on_schedule(skeleton, kind):
    clip = generate_gait(GaitSpec(kind, cycles=2), skeleton)
    gait = _gait_spans(segment_gait(clip))
    assert len(gait) == 16
    first = GAIT_PHASES.index(gait[0].phase)
    assert [s.phase for s in gait] == [GAIT_PHASES[(first + i) % 8] for i in range(16)]
    truth = [(GaitPhase(n), f) for n, f in clip.meta["schedule"] if n != "IDLE"]
    for seg, (name, frame) in zip(gait, truth):
        assert seg.phase is name and abs(seg.start - frame) <= 1


def test_idle_clip_is_one_idle_segment(skeleton):
    clip = generate_gait(GaitSpec("idle", cycles=2), skeleton)
    for segs in (segment_clip(clip), segment_by_speed(clip)):
        assert [(s.phase, s.start, s.end) for s in segs] == [(GaitPhase.IDLE, 0, len(clip))]


def test_gait_without_boundary_fails_with_range(skeleton):
    clip = generate_gait(GaitSpec("idle", cycles=2), skeleton)
    with pytest.raises(SegmentationError) as exc:
        segment_gait(clip)
    assert exc.value.frame_range == (0, len(clip))
    assert f"frames 0..{len(clip)}" in str(exc.value)


def test_truncated_clip_keeps_last_segment(skeleton):
    full = generate_gait(GaitSpec("walk", cycles=2), skeleton)
    mid = segment_gait(full)[5]
    cut = (mid.start + mid.end) // 2
    clip = MotionClip(skeleton, full.fps, full.root_positions[:cut], full.rotations[:cut])
    segs = segment_gait(clip)
    assert segs[-1].end == cut and segs[-1].phase is mid.phase


@pytest.mark.parametrize("kind", ["hop", "jump"])
def test_flights_split_at_apex(skeleton, kind):
    clip = generate_gait(GaitSpec(kind, cycles=3), skeleton)
    segs = segment_clip(clip)
    phases = [s.phase for s in segs]
    assert phases.count(GaitPhase.AIRBORNE_UP) == 3 and phases.count(GaitPhase.AIRBORNE_DOWN) == 3
    vy = np.gradient(clip.root_positions[:, 1]) * clip.fps
    for s in segs:
        if s.phase is GaitPhase.AIRBORNE_DOWN:
            assert abs(vy[s.start]) <= 0.15


def test_segments_carry_aligned_features(skeleton):
    clip = generate_gait(GaitSpec("walk", cycles=1), skeleton)
    imu = simulate_imu(clip, mount_for("right_ankle"))
    for s in segment_gait(clip, imu):
        assert s.x.shape == (s.end - s.start, 111) and s.y.shape == (s.end - s.start, 6)


@given(st.sampled_from(["walk", "run", "hop", "jump", "idle"]), st.integers(1, 3), st.integers(0, 50),
       st.floats(0.0, 0.08))
def test_segments_tile_the_clip(kind, cycles, seed, variation):
    from gaitrecon.skeleton import canonical_skeleton
    clip = generate_gait(GaitSpec(kind, cycles=cycles, seed=seed, variation=variation), canonical_skeleton())
    segs = segment_clip(clip)
    assert segs[0].start == 0 and segs[-1].end == len(clip)
    assert all(a.end == b.start for a, b in zip(segs, segs[1:]))
    assert all(s.end > s.start for s in segs)
    assert len(segment_labels(segs, len(clip))) == len(clip)


def test_imu_stream_length_mismatch_rejected(skeleton):
    clip = generate_gait(GaitSpec("walk", cycles=1), skeleton)
    with pytest.raises(AlignmentError):
        segment_gait(clip, ImuStream(clip.fps, np.zeros((len(clip) - 1, 6))))
