"""Versioned JSON model files.

Floats go through ``json`` (shortest repr that round-trips), so a saved and
re-loaded model is bit-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import MissingInputError, ParseError
from ..segmentation import GaitPhase
from ..skeleton import Skeleton
from .gaussian import GaussianState
from .hierarchy import FrameChain, HierarchicalModel, PhaseModel

MODEL_VERSION = 1


def _chain_json(c: FrameChain) -> dict:
    out = {"means": c.means.tolist(), "sigmas": c.sigmas.tolist(), "src_segment_id": c.src_segment_id}
    if c.warp is not None:
        out["warp"] = [[int(i), int(j)] for i, j in c.warp]
    return out


def model_to_json(model: HierarchicalModel) -> dict:
    phases = []
    for p in model.phases:
        phases.append({
            "phase": p.phase.value,
            "family": p.family,
            "successor": list(p.successor) if p.successor else None,
            "chains": [_chain_json(c) for c in p.chains],
            "profile": {"mean": np.asarray(p.profile_mean).tolist(),
                        "sigma": np.asarray(p.profile_sigma).tolist()},
        })
    return {
        "version": MODEL_VERSION,
        "skeleton": model.skeleton.to_json(),
        "fps": model.fps,
        "K": model.K,
        "W": model.W,
        "d_x": model.d_x,
        "reg_floor": model.reg_floor,
        "zscore": {"mean": model.zscore_mean.tolist(), "std": model.zscore_std.tolist()},
        "phases": phases,
        "global_states": [g.to_json() for g in model.global_states],
        "config": model.config,
    }


def model_from_json(data: dict, path=None) -> HierarchicalModel:
    try:
        if data.get("version") != MODEL_VERSION:
            raise ParseError(f"unsupported model version {data.get('version')!r}", path)
        skeleton = Skeleton.from_json(data["skeleton"])
        d_x = int(data["d_x"])
        phases = []
        for p in data["phases"]:
            chains = [FrameChain(np.array(c["means"], dtype=float), np.array(c["sigmas"], dtype=float),
                                 c.get("src_segment_id", ""),
                                 [tuple(pair) for pair in c["warp"]] if "warp" in c else None)
                      for c in p["chains"]]
            succ = tuple(p["successor"]) if p.get("successor") else None
            prof = p.get("profile") or {}
            phases.append(PhaseModel(GaitPhase(p["phase"]), p["family"], chains,
                                     np.array(prof["mean"]) if "mean" in prof else None,
                                     np.array(prof["sigma"]) if "sigma" in prof else None, succ))
        globals_ = [GaussianState(np.array(g["mu"]), np.array(g["U"]), d_x) for g in data["global_states"]]
        return HierarchicalModel(skeleton, float(data["fps"]), phases, globals_,
                                 data["zscore"]["mean"], data["zscore"]["std"], d_x,
                                 int(data["K"]), int(data["W"]), data.get("config", {}),
                                 float(data.get("reg_floor", 1e-6)))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc!r}", path) from exc


def save_model(model: HierarchicalModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_json(model), separators=(",", ":")) + "\n")


def load_model(path) -> HierarchicalModel:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"model file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from exc
    return model_from_json(data, path)
