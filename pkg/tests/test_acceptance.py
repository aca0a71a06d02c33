"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaitrecon.cli import main as cli_main  # noqa: E402
from gaitrecon.evaluation import bench, interframe_jumps, mse_eval  # noqa: E402
from gaitrecon.features import ImuStream  # noqa: E402
from gaitrecon.hmm.em import HmmParams, _log, em_fit, forward_posteriors  # noqa: E402
from gaitrecon.hmm.gaussian import GaussianState, condition_on_sensor  # noqa: E402
from gaitrecon.reconstruction import ReconstructionEngine  # noqa: E402
from gaitrecon.registration import cost_matrix, dtw_path  # noqa: E402
from gaitrecon.segmentation import GAIT_PHASES, GaitPhase, segment_gait  # noqa: E402
from gaitrecon.skeleton import canonical_skeleton  # noqa: E402
from gaitrecon.synth import (GaitSpec, generate_gait, generate_sequence, mount_for, schedule_labels,  # noqa: E402
                             simulate_sensors)
from gaitrecon.training import TrainingItem, train  # noqa: E402

from oracles import brute_force_dtw, brute_force_final_state, precision_conditioning  # noqa: E402

RESULTS = []
NOISE = (0.05, 0.01)
WARMUP = 30


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def _spd(rng, d, floor):
    a = rng.standard_normal((d, d))
    return a @ a.T + floor * np.eye(d)


# -- 1. forward algorithm vs path enumeration ---------------------------------------

def test_criterion_1_forward_matches_enumeration():
    rng = np.random.default_rng(101)
    models = []
    for _ in range(200):
        S, T = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        A = rng.dirichlet(np.ones(S), size=S)
        pi = rng.dirichlet(np.ones(S))
        states = tuple(GaussianState(rng.standard_normal(2) * 2, _spd(rng, 2, 0.3), 0) for _ in range(S))
        models.append((HmmParams(A, pi, states), rng.standard_normal((T, 2))))
    brute_force_final_state(np.zeros(1), np.ones((1, 1)), np.zeros((1, 1)))  # compile outside the clock
    worst, t0 = 0.0, time.perf_counter()
    for hmm, z in models:
        post = forward_posteriors(hmm, z)
        log_b = hmm.log_emissions(z)
        for t in range(len(z)):
            joint = brute_force_final_state(_log(hmm.pi), hmm.A, log_b[: t + 1])
            ref = np.exp(joint - np.logaddexp.reduce(joint))
            nz = ref > 0
            worst = max(worst, float(np.max(np.abs(post[t][nz] - ref[nz]) / ref[nz])))
            assert np.all(post[t][~nz] == 0)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10.0
    assert report(1, ok, f"200 models, max relative posterior error {worst:.2e} (<= 1e-10), {elapsed:.2f} s (< 10 s)")


# -- 2. Gaussian conditioning vs precision-matrix route -----------------------------

def test_criterion_2_conditioning_matches_block_oracle():
    rng = np.random.default_rng(202)
    cases = []
    for _ in range(500):
        dx, dy = int(rng.integers(1, 9)), int(rng.integers(1, 5))
        d = dx + dy
        cases.append((rng.standard_normal(d), _spd(rng, d, 1e-2), dx, rng.standard_normal(dy)))
    worst, min_eig, t0 = 0.0, np.inf, time.perf_counter()
    for mu, U, dx, y in cases:
        mean, cov = condition_on_sensor(GaussianState(mu, U, dx), y)
        m_ref, c_ref = precision_conditioning(mu, U, dx, y)
        worst = max(worst, float(np.max(np.abs(mean - m_ref)) / max(1.0, np.abs(m_ref).max())),
                    float(np.max(np.abs(cov - c_ref)) / max(1.0, np.abs(c_ref).max())))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(cov).min()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and min_eig >= -1e-10 and elapsed < 5.0
    assert report(2, ok, f"500 cases, max relative error {worst:.2e} (<= 1e-10), "
                         f"min eigenvalue {min_eig:.2e} (>= -1e-10), {elapsed:.2f} s (< 5 s)")


# -- 3. EM monotonicity ---------------------------------------------------------------

def test_criterion_3_em_never_decreases():
    rng = np.random.default_rng(303)
    worst = np.inf
    for _ in range(50):
        d = int(rng.integers(1, 4))
        seqs = [rng.standard_normal((int(rng.integers(8, 40)), d)) * rng.uniform(0.5, 2) + rng.standard_normal(d)
                for _ in range(int(rng.integers(1, 4)))]
        hmm = em_fit(seqs, int(rng.integers(2, 5)), max_iter=40, tol=0.0, seed=int(rng.integers(1000)))
        worst = min(worst, float(np.min(np.diff(hmm.log_likelihoods))))
    assert report(3, worst >= -1e-9, f"50 datasets, smallest per-iteration gain {worst:.2e} nats (>= -1e-9)")


# -- 4. segmentation fidelity ---------------------------------------------------------

def test_criterion_4_eight_cycle_walk_segments_on_schedule():
    sk = canonical_skeleton()
    clip = generate_gait(GaitSpec("walk", cycles=8), sk)
    gait = [s for s in segment_gait(clip) if s.phase is not GaitPhase.IDLE]
    truth = [(GaitPhase(n), f) for n, f in clip.meta["schedule"] if n != "IDLE"]
    first = GAIT_PHASES.index(gait[0].phase) if gait else 0
    cyclic = [s.phase for s in gait] == [GAIT_PHASES[(first + i) % 8] for i in range(len(gait))]
    off = max((abs(s.start - f) for s, (_, f) in zip(gait, truth)), default=np.inf)
    named = all(s.phase is n for s, (n, _) in zip(gait, truth))
    ok = len(gait) == 64 and cyclic and named and off <= 1
    assert report(4, ok, f"{len(gait)} gait phases (== 64), cyclic order {cyclic}, "
                         f"max boundary offset {off} frames (<= 1)")


# -- 5. DTW optimality ----------------------------------------------------------------

def test_criterion_5_dtw_matches_brute_force():
    rng = np.random.default_rng(505)
    brute_force_dtw(np.zeros((1, 1)))
    mismatches = 0
    for _ in range(100):
        a = rng.standard_normal((int(rng.integers(1, 13)), 3))
        b = rng.standard_normal((int(rng.integers(1, 13)), 3))
        cost = cost_matrix(a, b)
        _, c = dtw_path(cost)
        best, _ = brute_force_dtw(cost)
        mismatches += c != best
    assert report(5, mismatches == 0, f"100 pairs, {mismatches} cost mismatches against exhaustive search (== 0)")


# -- 6 and 7. end-to-end reconstruction ------------------------------------------------

def _walk_item(sk, seed, mounts):
    clip = generate_gait(GaitSpec("walk", cycles=8, seed=seed, variation=0.05), sk)
    return TrainingItem(clip, simulate_sensors(clip, [mount_for(m) for m in mounts], NOISE, seed), "walk")


def _end_to_end(mounts):
    sk = canonical_skeleton()
    model = train([_walk_item(sk, s, mounts) for s in range(1, 7)], sk)
    test = _walk_item(sk, 7, mounts)
    pred, phases = ReconstructionEngine(model).run(test.imu)
    r = mse_eval(pred, test.clip, pred_phases=[p for p, _ in phases], truth_phases=schedule_labels(test.clip),
                 grace=1, skip=WARMUP)
    return r


@pytest.fixture(scope="module")
def one_sensor():
    return _end_to_end(["right_ankle"])


def test_criterion_6_one_sensor_self_reconstruction(one_sensor):
    r = one_sensor
    ok = r.rmse < 5.0 and r.phase_accuracy >= 0.85
    assert report(6, ok, f"joint RMSE {r.rmse:.2f} cm (< 5), phase accuracy {r.phase_accuracy:.3f} (>= 0.85)")


def test_criterion_7_two_sensors_beat_one(one_sensor):
    two = _end_to_end(["right_ankle", "right_wrist"])
    ok = two.rmse < one_sensor.rmse
    assert report(7, ok, f"two-sensor RMSE {two.rmse:.2f} cm (< one-sensor {one_sensor.rmse:.2f} cm)")


# -- 8. continuity through behaviour changes --------------------------------------------

def test_criterion_8_mixed_stream_has_no_jumps():
    sk = canonical_skeleton()
    mounts = [mount_for("right_ankle")]
    items = []
    for seed in range(1, 5):
        for kind in ("walk", "run"):
            clip = generate_gait(GaitSpec(kind, cycles=8, seed=seed, variation=0.05), sk)
            items.append(TrainingItem(clip, simulate_sensors(clip, mounts, NOISE, seed), kind))
    model = train(items, sk)
    specs = [GaitSpec(k, cycles=4, seed=7 + i, variation=0.05) for i, k in enumerate(("walk", "run", "walk"))]
    clip = generate_sequence(specs, sk)
    pred, _ = ReconstructionEngine(model).run(simulate_sensors(clip, mounts, NOISE, 7))
    excess = float(100 * interframe_jumps(pred, clip).max())
    raw = float(100 * interframe_jumps(pred).max())
    truth = float(100 * interframe_jumps(clip).max())
    ok = excess <= 10.0
    assert report(8, ok, f"max inter-frame jump beyond the reference motion {excess:.2f} cm (<= 10); "
                         f"raw emitted jump {raw:.2f} cm, reference's own {truth:.2f} cm")


# -- 9. benchmark ladder --------------------------------------------------------------

def test_criterion_9_latency_grows_with_database():
    sk = canonical_skeleton()
    mounts = [mount_for("right_ankle")]
    clips = []
    for seed in range(1, 9):
        clip = generate_gait(GaitSpec("walk", cycles=15, seed=seed, variation=0.05), sk)
        clips.append(TrainingItem(clip, simulate_sensors(clip, mounts, NOISE, seed), "walk"))
    per = len(clips[0].clip)
    test = _walk_item(sk, 9, ["right_ankle"]).imu
    imu = ImuStream(test.fps, test.data[:WARMUP + 200])
    rows = []
    for target in (500, 1000, 2000, 4000):
        n = max(1, int(round(target / per)))
        model = train(clips[:n], sk)
        r = bench(model, imu, WARMUP, repeats=5)
        rows.append((r.database_frames, r.states, r.latency, r.fps))
    lat = [r[2] for r in rows]
    monotone = all(a <= b for a, b in zip(lat, lat[1:]))
    ok = monotone and rows[-1][3] >= 30.0
    ladder = ", ".join(f"{f} frames/{s} states {1e3 * l:.2f} ms" for f, s, l, _ in rows)
    assert report(9, ok, f"{ladder}; monotone {monotone}, {rows[-1][3]:.0f} fps at the top tier (>= 30)")


# -- 10. CLI determinism --------------------------------------------------------------

def _cli_pipeline(d: Path):
    p = {k: str(d / k) for k in ("motion.csv", "imu.csv", "labels.csv", "test_motion.csv", "test_imu.csv",
                                 "test_labels.csv", "segments.json", "segments.csv", "model.json", "recon.csv",
                                 "phases.csv", "report.json")}
    noise = ["--noise-accel", "0.05", "--noise-gyro", "0.01", "--variation", "0.05"]
    return [
        cli_main(["synth", "--cycles", "4", "--seed", "1", *noise, "--out-motion", p["motion.csv"],
                  "--out-imu", p["imu.csv"], "--out-labels", p["labels.csv"]]),
        cli_main(["synth", "--cycles", "2", "--seed", "7", *noise, "--out-motion", p["test_motion.csv"],
                  "--out-imu", p["test_imu.csv"], "--out-labels", p["test_labels.csv"]]),
        cli_main(["segment", "--motion", p["motion.csv"], "--json", p["segments.json"],
                  "--labels", p["segments.csv"], "--plot", str(d / "segments.png")]),
        cli_main(["train", "--motion", p["motion.csv"], "--imu", p["imu.csv"], "--out", p["model.json"]]),
        cli_main(["reconstruct", "--model", p["model.json"], "--imu", p["test_imu.csv"], "--out", p["recon.csv"],
                  "--phases", p["phases.csv"]]),
        cli_main(["eval", "--pred", p["recon.csv"], "--truth", p["test_motion.csv"], "--pred-phases",
                  p["phases.csv"], "--truth-phases", p["test_labels.csv"], "--json", p["report.json"]]),
    ]


def test_criterion_10_cli_reruns_are_byte_identical():
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        da, db = Path(a), Path(b)
        codes = _cli_pipeline(da) + _cli_pipeline(db)
        names = sorted(f.name for f in da.iterdir())
        same = names == sorted(f.name for f in db.iterdir())
        differing = [n for n in names if not same or (da / n).read_bytes() != (db / n).read_bytes()]
    ok = all(c == 0 for c in codes) and same and not differing
    assert report(10, ok, f"{len(names)} pipeline outputs, {len(differing)} differ between reruns (== 0), "
                          f"exit codes {sorted(set(codes))}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
