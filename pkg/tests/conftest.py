import sys

import numpy as np
import pytest
from hypothesis import settings
from scipy.spatial.transform import Rotation

from gaitrecon.skeleton import Joint, Skeleton, canonical_skeleton

settings.register_profile("repo", deadline=None, max_examples=60)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def skeleton():
    return canonical_skeleton()


@pytest.fixture
def chain2():
    """Root plus one child 1 m along +x."""
    return Skeleton((Joint("a", None, (0.0, 0.0, 0.0)), Joint("b", 0, (1.0, 0.0, 0.0))))


def random_quats(rng, shape):
    q = rng.standard_normal(tuple(shape) + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return q * np.where(q[..., :1] < 0, -1.0, 1.0)


def homogeneous_fk(skeleton, root, rots):
    """Joint world positions by chaining 4x4 transforms built from scipy rotations."""
    mats = Rotation.from_quat(np.concatenate([rots[..., 1:], rots[..., :1]], axis=-1)).as_matrix()
    world = []
    for j, joint in enumerate(skeleton.joints):
        local = np.eye(4)
        local[:3, :3] = mats[j]
        local[:3, 3] = root if joint.parent is None else joint.offset
        world.append(local if joint.parent is None else world[joint.parent] @ local)
    return np.array([m[:3, 3] for m in world])


@pytest.fixture(scope="session")
def walk_model(skeleton):
    """A single-ankle walk model trained on three synthetic clips, plus a held-out clip."""
    from gaitrecon.synth import GaitSpec, generate_gait, mount_for, simulate_sensors
    from gaitrecon.training import TrainingItem, train

    def item(seed):
        clip = generate_gait(GaitSpec("walk", cycles=8, seed=seed, variation=0.05), skeleton)
        imu = simulate_sensors(clip, [mount_for("right_ankle")], noise_std=(0.05, 0.01), seed=seed)
        return TrainingItem(clip, imu, "walk")

    model = train([item(s) for s in (1, 2, 3)], skeleton)
    return model, item(7)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
