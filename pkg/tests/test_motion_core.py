import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from gaitrecon import quaternion as quat
from gaitrecon.csvio import read_imu_csv, read_motion_csv, write_imu_csv, write_motion_csv
from gaitrecon.errors import AlignmentError, DataError, MissingInputError, ParseError
from gaitrecon.features import ImuStream, extract_features, motion_features, pose_from_feature, split_x, x_dim
from gaitrecon.skeleton import (Joint, MotionClip, Skeleton, SkeletonPose, forward_kinematics, load_skeleton,
                                save_skeleton)
from gaitrecon.synth import GaitSpec, generate_gait

from conftest import homogeneous_fk, random_quats

seeds = st.integers(0, 2**32 - 1)


def _random_clip(skeleton, rng, T=12, fps=30.0):
    rots = random_quats(rng, (T, skeleton.n_joints))
    return MotionClip(skeleton, fps, rng.standard_normal((T, 3)), rots)


# -- skeleton / forward kinematics -----------------------------------------------

def test_skeleton_must_be_topological():
    with pytest.raises(DataError):
        Skeleton((Joint("a", 1, (0, 0, 0)), Joint("b", None, (0, 0, 0))))


def test_fk_identity_gives_cumulative_offsets(skeleton):
    pos = forward_kinematics(skeleton, SkeletonPose.identity(skeleton, (1.0, 2.0, 3.0)))
    for j, joint in enumerate(skeleton.joints):
        expected = np.array([1.0, 2.0, 3.0])
        for k in skeleton.chain_to_root(j):
            expected = expected + np.asarray(skeleton.joints[k].offset)
        np.testing.assert_allclose(pos[j], expected, atol=1e-12)


def test_fk_root_yaw_quarter_turn(chain2):
    pose = SkeletonPose(np.zeros(3), np.array([quat.from_yaw(np.pi / 2), quat.IDENTITY]))
    # +90 degrees about +y takes +x to -z
    np.testing.assert_allclose(forward_kinematics(chain2, pose)[1], [0.0, 0.0, -1.0], atol=1e-12)


@given(seeds)
def test_fk_matches_homogeneous_matrix_oracle(seed):
    from gaitrecon.skeleton import canonical_skeleton
    sk = canonical_skeleton()
    rng = np.random.default_rng(seed)
    root = rng.standard_normal(3)
    rots = random_quats(rng, (sk.n_joints,))
    got = forward_kinematics(sk, SkeletonPose(root, rots))
    assert np.max(np.abs(got - homogeneous_fk(sk, root, rots))) < 1e-10


def test_skeleton_json_round_trip(skeleton, tmp_path):
    save_skeleton(skeleton, tmp_path / "sk.json")
    assert load_skeleton(tmp_path / "sk.json") == skeleton


# -- features ------------------------------------------------------------------------

def test_dimensions(skeleton):
    assert x_dim(skeleton.n_joints) == 6 * 18 + 3 == 111
    clip = generate_gait(GaitSpec("walk"), skeleton)
    assert motion_features(clip).shape == (len(clip), 111)
    imu = ImuStream(clip.fps, np.zeros((len(clip), 6)))
    seq = extract_features(clip, imu)
    assert seq.d_x == 111 and seq.d_y == 6


def test_constant_pose_has_zero_rates_and_delta(skeleton):
    rng = np.random.default_rng(0)
    q = random_quats(rng, (skeleton.n_joints,))
    clip = MotionClip(skeleton, 30.0, np.tile([0.0, 1.0, 0.0], (10, 1)), np.tile(q, (10, 1, 1)))
    _, vel, delta = split_x(motion_features(clip), skeleton.n_joints)
    assert np.all(vel == 0) and np.all(delta == 0)


def test_root_delta_sign(skeleton):
    T = 6
    root = np.stack([0.02 * np.arange(T), np.ones(T), np.zeros(T)], axis=1)
    clip = MotionClip(skeleton, 30.0, root, np.tile(quat.IDENTITY, (T, skeleton.n_joints, 1)))
    _, _, delta = split_x(motion_features(clip), skeleton.n_joints)
    np.testing.assert_allclose(delta[0], 0.0)
    np.testing.assert_allclose(delta[1:], np.tile([-0.02, 0.0, 0.0], (T - 1, 1)), atol=1e-15)


def test_extract_rejects_misaligned(skeleton):
    clip = generate_gait(GaitSpec("idle"), skeleton)
    with pytest.raises(AlignmentError):
        extract_features(clip, ImuStream(clip.fps, np.zeros((len(clip) + 1, 6))))


def _independent_features(path, n_joints, fps):
    """Standalone finite differences straight from the CSV text."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in r] for r in list(csv.reader(fh))[1:]]
    data = np.array(rows)
    root = data[:, 1:4]
    q = data[:, 4:].reshape(len(data), n_joints, 4)
    rv = Rotation.from_quat(np.concatenate([q[..., 1:], q[..., :1]], axis=-1).reshape(-1, 4)).as_rotvec()
    rv = rv.reshape(len(data), n_joints, 3)
    for t in range(1, len(rv)):
        for j in range(n_joints):
            r = rv[t, j]
            n = np.linalg.norm(r)
            if n < 1e-12:
                continue
            cands = [r * (1 + 2 * np.pi * k / n) for k in (-2, -1, 0, 1, 2)]
            rv[t, j] = min(cands, key=lambda c: np.linalg.norm(c - rv[t - 1, j]))
    omega = np.zeros_like(rv)
    omega[1:] = (rv[1:] - rv[:-1]) * fps
    delta = np.zeros_like(root)
    delta[1:] = root[:-1] - root[1:]
    return rv, omega, delta


def test_features_match_independent_script(skeleton, tmp_path):
    clip = generate_gait(GaitSpec("walk", cycles=1, turn_rate=0.4), skeleton)
    write_motion_csv(tmp_path / "m.csv", clip)
    rv, omega, delta = _independent_features(tmp_path / "m.csv", skeleton.n_joints, clip.fps)
    rot, vel, d = split_x(motion_features(read_motion_csv(tmp_path / "m.csv", skeleton)), skeleton.n_joints)
    np.testing.assert_allclose(rot, rv, atol=1e-9)
    np.testing.assert_allclose(vel, omega, atol=1e-7)
    np.testing.assert_allclose(d, delta, atol=1e-12)


@given(seeds)
def test_feature_pose_round_trip(seed):
    from gaitrecon.skeleton import canonical_skeleton
    sk = canonical_skeleton()
    rng = np.random.default_rng(seed)
    clip = _random_clip(sk, rng)
    x = motion_features(clip)
    root = clip.root_positions[0]
    for t in range(len(clip)):
        pose = pose_from_feature(x[t], root)
        assert quat.geodesic(pose.joint_rotations, clip.rotations[t]).max() < 1e-8
        if t > 0:
            assert np.max(np.abs(pose.root_position - clip.root_positions[t])) < 1e-12
        root = pose.root_position


def test_zero_feature_gives_identity_pose():
    pose = pose_from_feature(np.zeros(6 * 2 + 3), np.zeros(3))
    np.testing.assert_allclose(pose.joint_rotations, np.tile(quat.IDENTITY, (2, 1)))


@given(seeds, st.tuples(*[st.floats(-50, 50)] * 3))
def test_delta_is_translation_invariant(seed, shift):
    from gaitrecon.skeleton import canonical_skeleton
    sk = canonical_skeleton()
    clip = _random_clip(sk, np.random.default_rng(seed))
    moved = MotionClip(sk, clip.fps, clip.root_positions + np.array(shift), clip.rotations)
    d0 = split_x(motion_features(clip), sk.n_joints)[2]
    d1 = split_x(motion_features(moved), sk.n_joints)[2]
    np.testing.assert_allclose(d0, d1, atol=1e-9)


# -- CSV ---------------------------------------------------------------------------------

def test_motion_and_imu_csv_round_trip_exactly(skeleton, tmp_path):
    rng = np.random.default_rng(1)
    clip = _random_clip(skeleton, rng)
    write_motion_csv(tmp_path / "m.csv", clip)
    back = read_motion_csv(tmp_path / "m.csv", skeleton)
    assert np.array_equal(back.root_positions, clip.root_positions)
    assert np.array_equal(back.rotations, clip.rotations)
    imu = ImuStream(30.0, rng.standard_normal((7, 12)))
    write_imu_csv(tmp_path / "s.csv", imu)
    assert np.array_equal(read_imu_csv(tmp_path / "s.csv").data, imu.data)


def test_csv_errors_carry_path_and_line(skeleton, tmp_path):
    with pytest.raises(MissingInputError, match="nope.csv"):
        read_imu_csv(tmp_path / "nope.csv")
    p = tmp_path / "bad.csv"
    p.write_text("frame,ax,ay,az,gx,gy,gz\n0,1,2,3,4,5,6\n1,1,2,x,4,5,6\n")
    with pytest.raises(ParseError, match=r"bad.csv:3") as exc:
        read_imu_csv(p)
    assert exc.value.line == 3
    p.write_text("frame,ax,ay,az,gx,gy,gz\n0,1,2,3,4,5\n")
    with pytest.raises(ParseError, match=r":2"):
        read_imu_csv(p)
