"""Command line front end: synth, segment, train, reconstruct, eval, bench."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import DataError, GaitReconError, MissingInputError, ParseError

log = logging.getLogger("gaitrecon")

EXIT_OK = 0  # failures exit with the error class's code: 2 missing, 3 parse/data, 4 numerical, 5 segmentation
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _skeleton(path):
    from .skeleton import canonical_skeleton, load_skeleton
    return load_skeleton(path) if path else canonical_skeleton()


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_labels(path):
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["frame", "phase"]:
        raise ParseError("expected a 'frame,phase' header", path, 1)
    return [r[1] for r in rows[1:] if r]


def _sibling(path, suffix):
    p = Path(path)
    return p.with_name(p.stem + suffix)


# -- subcommands ----------------------------------------------------------------

def cmd_synth(args):
    from .csvio import write_imu_csv, write_motion_csv
    from .skeleton import save_skeleton
    from .synth import GaitSpec, generate_sequence, mount_for, schedule_labels, simulate_sensors

    sk = _skeleton(args.skeleton)
    specs = []
    for i, item in enumerate(args.type):
        kind, _, cycles = item.partition(":")
        specs.append(GaitSpec(kind, cycle_duration=args.cycle_duration, stride_length=args.stride,
                              turn_rate=args.turn_rate, cycles=int(cycles) if cycles else args.cycles,
                              seed=args.seed + i, variation=args.variation))
    clip = generate_sequence(specs, sk, args.fps)
    imu_seed = args.seed if args.imu_seed is None else args.imu_seed
    imu = simulate_sensors(clip, [mount_for(s) for s in args.mount], (args.noise_accel, args.noise_gyro), imu_seed)
    write_motion_csv(args.out_motion, clip)
    write_imu_csv(args.out_imu, imu)
    if args.out_labels:
        _write_rows(args.out_labels, ["frame", "phase"], enumerate(schedule_labels(clip)))
    if args.out_skeleton:
        save_skeleton(sk, args.out_skeleton)
    print(f"wrote {len(clip)} frames ({len(imu.data[0]) // 6} sensor(s)) to {args.out_motion}, {args.out_imu}")
    return EXIT_OK


def cmd_segment(args):
    from .csvio import read_imu_csv, read_motion_csv
    from .segmentation import contact_states, segment_clip, segment_labels

    sk = _skeleton(args.skeleton)
    clip = read_motion_csv(args.motion, sk, args.fps)
    imu = read_imu_csv(args.imu, args.fps) if args.imu else None
    segs = segment_clip(clip, imu, args.type, args.height_eps, args.vel_eps, args.min_flight_speed)
    out = [{"phase": s.phase.value, "start": s.start, "end": s.end} for s in segs]
    if args.json:
        _write_json(args.json, {"frames": len(clip), "segments": out})
    if args.labels:
        _write_rows(args.labels, ["frame", "phase"], enumerate(segment_labels(segs, len(clip))))
    if args.plot:
        from .plotting import plot_segmentation
        plot_segmentation(contact_states(clip, args.height_eps, args.vel_eps), segs, args.plot, clip.fps)
    counts = {}
    for s in segs:
        counts[s.phase.value] = counts.get(s.phase.value, 0) + 1
    print(f"{len(segs)} segments: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_train(args):
    from .csvio import read_imu_csv, read_motion_csv
    from .hmm import save_model
    from .training import TrainConfig, TrainingItem, resample_imu, segment_counts, train

    if len(args.motion) != len(args.imu):
        raise DataError(f"{len(args.motion)} motion files but {len(args.imu)} IMU files")
    types = args.type if len(args.type) == len(args.motion) else args.type * len(args.motion)
    if len(args.type) not in (1, len(args.motion)):
        raise DataError("give one --type for all clips or one per clip")
    sk = _skeleton(args.skeleton)
    config = TrainConfig(fps=args.fps, K=args.K, W=args.W, height_eps=args.height_eps, vel_eps=args.vel_eps,
                         min_flight_speed=args.min_flight_speed, em_states=args.em_states, em_tol=args.em_tol,
                         max_iter=args.max_iter, reg_floor=args.reg_floor, sigma_floor=args.sigma_floor,
                         seed=args.seed)
    items = []
    for m, s, kind in zip(args.motion, args.imu, types):
        clip = read_motion_csv(m, sk, args.fps)
        imu = read_imu_csv(s, args.fps)
        if len(imu) != len(clip) and args.resample:
            log.info("resampling %s from %d to %d frames", s, len(imu), len(clip))
            imu = resample_imu(imu, len(clip))
        items.append(TrainingItem(clip, imu, kind))
    model = train(items, sk, config)
    save_model(model, args.out)
    for key, h in segment_counts(model).items():
        print(f"{key}: {h} segments")
    print(f"final log-likelihood: {model.config['final_log_likelihood']!r}")
    return EXIT_OK


def cmd_reconstruct(args):
    from .csvio import read_imu_csv, write_motion_csv
    from .hmm import load_model
    from .reconstruction import ReconstructionEngine

    model = load_model(args.model)
    imu = read_imu_csv(args.imu, model.fps)
    engine = ReconstructionEngine(model, K=args.K, W=args.W, use_foot_lock=not args.no_foot_lock)
    clip, phases = engine.run(imu)
    write_motion_csv(args.out, clip)
    if args.phases:
        _write_rows(args.phases, ["frame", "phase", "posterior"],
                    [(t, p.value, repr(float(post))) for t, (p, post) in enumerate(phases)])
    if engine.state.lost_events:
        log.warning("tracking was re-initialised %d time(s)", engine.state.lost_events)
    print(f"reconstructed {len(clip)} frames to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    from .csvio import read_motion_csv
    from .evaluation import interframe_jumps, mse_eval, position_errors

    sk = _skeleton(args.skeleton)
    pred = read_motion_csv(args.pred, sk, args.fps)
    truth = read_motion_csv(args.truth, sk, args.fps)
    pp = _read_labels(args.pred_phases) if args.pred_phases else None
    tp = _read_labels(args.truth_phases) if args.truth_phases else None
    report = mse_eval(pred, truth, sk, pp, tp, args.grace, args.skip)
    data = report.to_json()
    if min(len(pred), len(truth)) > 1:
        data["max_interframe_jump_cm"] = float(100 * interframe_jumps(pred).max())
        data["max_interframe_excess_cm"] = float(100 * interframe_jumps(pred, truth).max())
    if args.json:
        _write_json(args.json, data)
    csv_path = args.csv or (_sibling(args.json, "_joints.csv") if args.json else None)
    if csv_path:
        _write_rows(csv_path, ["joint", "mse_cm2", "rmse_cm"],
                    [(n, repr(float(m)), repr(float(np.sqrt(m)))) for n, m in zip(report.joint_names, report.joint_mse)])
    plot_path = args.plot or (_sibling(args.json, ".png") if args.json and not args.no_plot else None)
    if plot_path:
        from .plotting import plot_errors
        err = 100 * position_errors(pred, truth)
        plot_errors(err, report.joint_names, plot_path, pp, tp, pred.fps)
    acc = "" if report.phase_accuracy is None else f", phase accuracy {report.phase_accuracy:.3f}"
    print(f"{report.frames} frames: MSE {report.mse:.3f} cm^2, RMSE {report.rmse:.3f} cm{acc}")
    return EXIT_OK


def cmd_bench(args):
    from .csvio import read_imu_csv
    from .evaluation import bench
    from .hmm import load_model

    reports = []
    for path in args.model:
        model = load_model(path)
        imu = read_imu_csv(args.imu, model.fps)
        r = bench(model, imu, args.warmup, args.repeats)
        reports.append(r)
        print(f"{path}: {r.database_frames} frames, {r.segments} segments, "
              f"{1e3 * r.latency:.3f} ms/frame ({r.fps:.1f} fps)")
    if args.json:
        _write_json(args.json, {"runs": [dict(model=str(p), **r.to_json()) for p, r in zip(args.model, reports)]})
    if args.plot:
        from .plotting import plot_bench
        plot_bench(reports, args.plot)
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def _contact_flags(p):
    from .segmentation import HEIGHT_EPS, VEL_EPS
    p.add_argument("--height-eps", type=float, default=HEIGHT_EPS,
                   help="foot contact height threshold, metres (default %(default)s)")
    p.add_argument("--vel-eps", type=float, default=VEL_EPS,
                   help="foot contact speed threshold, m/s (default %(default)s)")
    p.add_argument("--min-flight-speed", type=float, default=0.3,
                   help="root vertical speed marking a jump/hop flight, m/s (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gaitrecon", description="Full-body locomotion from body-worn IMU streams.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic motion clip and its IMU stream")
    p.add_argument("--type", nargs="+", default=["walk"],
                   help="motion type(s) walk/run/jump/hop/idle, each optionally 'type:cycles'; several are chained")
    p.add_argument("--cycles", type=int, default=8, help="cycles per motion type, count (default %(default)s)")
    p.add_argument("--cycle-duration", type=float, default=None, help="cycle duration, seconds (default per type)")
    p.add_argument("--stride", type=float, default=None, help="stride length, metres (default per type)")
    p.add_argument("--turn-rate", type=float, default=0.0, help="heading change, rad/s (default %(default)s)")
    p.add_argument("--variation", type=float, default=0.0,
                   help="relative per-cycle style jitter, unitless (default %(default)s)")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate, frames/s (default %(default)s)")
    p.add_argument("--mount", nargs="+", default=["right_ankle"],
                   help="joint(s) carrying a sensor; several give a concatenated stream (default right_ankle)")
    p.add_argument("--noise-accel", type=float, default=0.0, help="accelerometer noise std, m/s^2 (default 0)")
    p.add_argument("--noise-gyro", type=float, default=0.0, help="gyro noise std, rad/s (default 0)")
    p.add_argument("--seed", type=int, default=0, help="generator seed, integer (default %(default)s)")
    p.add_argument("--imu-seed", type=int, default=None, help="sensor noise seed, integer (default: --seed)")
    p.add_argument("--skeleton", help="skeleton JSON path (default: built-in 18-joint skeleton)")
    p.add_argument("--out-motion", required=True, help="output motion CSV path")
    p.add_argument("--out-imu", required=True, help="output IMU CSV path")
    p.add_argument("--out-labels", help="output per-frame reference phase CSV path")
    p.add_argument("--out-skeleton", help="output skeleton JSON path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="split a motion clip into gait/flight phases")
    p.add_argument("--motion", required=True, help="motion CSV path")
    p.add_argument("--imu", help="IMU CSV path (optional, attached to segments)")
    p.add_argument("--skeleton", help="skeleton JSON path (default: built-in)")
    p.add_argument("--type", default=None, help="motion type walk/run/jump/hop/idle (default: walk rules)")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate, frames/s (default %(default)s)")
    _contact_flags(p)
    p.add_argument("--json", help="output segment list JSON path")
    p.add_argument("--labels", help="output per-frame phase CSV path")
    p.add_argument("--plot", help="output contact/phase figure PNG path")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train", help="fit a hierarchical model from motion + IMU clips")
    p.add_argument("--motion", nargs="+", required=True, help="motion CSV path(s)")
    p.add_argument("--imu", nargs="+", required=True, help="IMU CSV path(s), one per motion file")
    p.add_argument("--type", nargs="+", default=["walk"], help="motion type, one for all or one per clip")
    p.add_argument("--skeleton", help="skeleton JSON path (default: built-in)")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--resample", action="store_true",
                   help="linearly resample IMU streams to the motion frame count when they differ")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate, frames/s (default %(default)s)")
    p.add_argument("--K", type=int, default=5, help="states blended per frame, count (default %(default)s)")
    p.add_argument("--W", type=int, default=3, help="re-initialisation window, frames (default %(default)s)")
    _contact_flags(p)
    p.add_argument("--em-states", type=int, default=8, help="global EM states, count (default %(default)s)")
    p.add_argument("--em-tol", type=float, default=1e-6,
                   help="EM stop threshold on log-likelihood gain, nats (default %(default)s)")
    p.add_argument("--max-iter", type=int, default=200, help="EM iteration cap, count (default %(default)s)")
    p.add_argument("--reg-floor", type=float, default=1e-6,
                   help="covariance diagonal floor, z-score units^2 (default %(default)s)")
    p.add_argument("--sigma-floor", type=float, default=0.1,
                   help="emission std floor, z-score units (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="EM tie-break seed, integer (default %(default)s)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="reconstruct full-body motion from an IMU stream")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--imu", required=True, help="IMU CSV path")
    p.add_argument("--out", required=True, help="output motion CSV path")
    p.add_argument("--phases", help="output per-frame phase/posterior CSV path")
    p.add_argument("--K", type=int, default=None, help="states blended per frame, count (default: model's)")
    p.add_argument("--W", type=int, default=None, help="re-initialisation window, frames (default: model's)")
    p.add_argument("--no-foot-lock", action="store_true", help="disable foot locking")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="root-pinned position error of a reconstruction")
    p.add_argument("--pred", required=True, help="reconstructed motion CSV path")
    p.add_argument("--truth", required=True, help="reference motion CSV path")
    p.add_argument("--skeleton", help="skeleton JSON path (default: built-in)")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate, frames/s (default %(default)s)")
    p.add_argument("--pred-phases", help="recognised phase CSV (from reconstruct --phases)")
    p.add_argument("--truth-phases", help="reference phase CSV (from synth --out-labels)")
    p.add_argument("--grace", type=int, default=1, help="phase boundary tolerance, frames (default %(default)s)")
    p.add_argument("--skip", type=int, default=0, help="warm-up excluded from phase accuracy, frames (default 0)")
    p.add_argument("--json", help="output report JSON path (per-joint CSV and PNG figure are written beside it)")
    p.add_argument("--csv", help="output per-joint error CSV path (default: <json>_joints.csv)")
    p.add_argument("--plot", help="output figure PNG path (default: <json>.png)")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-frame inference latency of one or more models")
    p.add_argument("--model", nargs="+", required=True, help="model JSON path(s)")
    p.add_argument("--imu", required=True, help="IMU CSV path replayed through each model")
    p.add_argument("--warmup", type=int, default=30, help="untimed leading frames, frames (default %(default)s)")
    p.add_argument("--repeats", type=int, default=3, help="timed passes, best kept, count (default %(default)s)")
    p.add_argument("--json", help="output benchmark JSON path")
    p.add_argument("--plot", help="output latency figure PNG path")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    level = LOG_LEVELS.get(os.environ.get("GAITRECON_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GaitReconError as exc:
        print(f"gaitrecon {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
