import numpy as np
import pytest

from gaitrecon import quaternion as quat
from gaitrecon.errors import DataError
from gaitrecon.evaluation import bench, interframe_jumps, mse_eval, phase_accuracy, position_errors
from gaitrecon.features import ImuStream
from gaitrecon.hmm.hierarchy import FrameChain, HierarchicalModel, PhaseModel
from gaitrecon.segmentation import GaitPhase
from gaitrecon.skeleton import Joint, MotionClip, Skeleton
from gaitrecon.synth import GaitSpec, generate_gait

from conftest import random_quats


def _walk(skeleton, seed=0):
    return generate_gait(GaitSpec("walk", cycles=1, seed=seed, variation=0.05), skeleton)


def test_identical_clips_score_zero(skeleton):
    clip = _walk(skeleton)
    r = mse_eval(clip, clip)
    assert r.mse == 0.0 and r.frames == len(clip) and np.all(r.joint_mse == 0)


def test_root_translation_is_excluded(skeleton):
    clip = _walk(skeleton)
    moved = MotionClip(skeleton, clip.fps, clip.root_positions + np.array([0.01, 0.0, 0.0]), clip.rotations)
    assert mse_eval(moved, clip).mse == 0.0


def test_two_joint_hand_computation(chain2):
    T = 10
    rots = np.tile(quat.IDENTITY, (T, 2, 1))
    truth = MotionClip(chain2, 30.0, np.zeros((T, 3)), rots)
    # rotating the root swings the 1 m child bone through a 2 cm chord
    bent = rots.copy()
    bent[: T // 2, 0] = quat.from_yaw(2 * np.arcsin(0.01))
    pred = MotionClip(chain2, 30.0, np.zeros((T, 3)), bent)
    r = mse_eval(pred, truth)
    assert abs(r.mse - 2.0**2 / (2 * 2)) < 1e-10
    np.testing.assert_allclose(r.joint_mse, [0.0, 2.0], atol=1e-10)


def test_symmetric_and_zero_only_when_points_coincide(skeleton):
    a, b = _walk(skeleton, 1), _walk(skeleton, 2)
    assert mse_eval(a, b).mse == mse_eval(b, a).mse > 0
    rng = np.random.default_rng(0)
    rots = a.rotations.copy()
    rots[:, skeleton.index("right_elbow")] = random_quats(rng, (len(a),))
    assert mse_eval(MotionClip(skeleton, a.fps, a.root_positions, rots), a).mse > 0


def test_common_frame_range_and_checks(skeleton, chain2):
    clip = _walk(skeleton)
    short = clip.slice(0, 10)
    assert mse_eval(short, clip).frames == 10
    assert position_errors(clip, short).shape == (10, skeleton.n_joints)
    other = MotionClip(chain2, clip.fps, np.zeros((3, 3)), np.tile(quat.IDENTITY, (3, 2, 1)))
    with pytest.raises(DataError):
        mse_eval(other, clip)
    with pytest.raises(DataError):
        mse_eval(MotionClip(skeleton, 60.0, clip.root_positions, clip.rotations), clip)
    renamed = Skeleton(tuple(Joint(j.name + "_x", j.parent, j.offset) for j in skeleton.joints))
    with pytest.raises(DataError):
        mse_eval(clip, clip, skeleton=renamed)


def test_report_json_units(skeleton):
    clip = _walk(skeleton)
    out = mse_eval(clip, clip, pred_phases=["IDLE"] * len(clip), truth_phases=["IDLE"] * len(clip)).to_json()
    assert out["rmse_cm"] == 0.0 and out["phase_accuracy"] == 1.0
    assert set(out["joints"]) == set(skeleton.names)


def test_phase_accuracy_grace():
    truth = ["A"] * 5 + ["B"] * 5
    late = ["A"] * 6 + ["B"] * 4
    assert phase_accuracy(late, truth, grace=1) == 1.0
    assert phase_accuracy(late, truth, grace=0) == 0.9
    assert phase_accuracy([GaitPhase.IDLE] * 4, ["IDLE"] * 4) == 1.0
    assert phase_accuracy(["B"] * 10, truth, grace=0, skip=5) == 1.0
    with pytest.raises(DataError):
        phase_accuracy(["A"], ["A"], skip=1)


def test_interframe_jumps(skeleton):
    clip = _walk(skeleton)
    still = MotionClip(skeleton, clip.fps, clip.root_positions, np.tile(clip.rotations[:1], (len(clip), 1, 1)))
    assert np.all(interframe_jumps(still) == 0)
    assert interframe_jumps(clip).max() > 0
    assert np.all(interframe_jumps(clip, clip) == 0)
    assert len(interframe_jumps(clip)) == len(clip) - 1


def _toy(skeleton):
    rng = np.random.default_rng(0)
    chain = FrameChain(rng.standard_normal((5, 9)), np.ones((5, 6)))
    return HierarchicalModel(skeleton, 30.0, [PhaseModel(GaitPhase.IDLE, "idle", [chain])], [],
                             np.zeros(9), np.ones(9), 3)


def test_toy_model_latency_under_a_millisecond(skeleton):
    imu = ImuStream(30.0, np.random.default_rng(1).standard_normal((130, 6)))
    r = bench(_toy(skeleton), imu)
    assert r.frames_timed == 100
    assert 0 < r.latency < 1e-3
    assert abs(r.fps * r.latency - 1.0) < 1e-12
    assert r.states == 5 and r.segments == 1
    with pytest.raises(DataError):
        bench(_toy(skeleton), ImuStream(30.0, np.zeros((30, 6))))


def test_repeated_benchmarks_are_stable(walk_model):
    model, test = walk_model
    imu = ImuStream(test.imu.fps, test.imu.data[:150])
    a, b = bench(model, imu), bench(model, imu)
    assert abs(a.fps - b.fps) / max(a.fps, b.fps) < 0.2
