"""Gaussian states, flat HMM training and the two-level phase/frame model."""

from .em import HmmParams, em_fit, forward_posteriors, log_backward, log_forward
from .gaussian import GaussianState, condition_on_sensor, mvn_logpdf
from .hierarchy import (FrameChain, HierarchicalModel, LogForwardLattice, PhaseModel, build_hierarchy,
                        forward_step, init_forward, phase_posteriors, recognize_phase)
from .io import load_model, save_model

__all__ = [
    "GaussianState", "condition_on_sensor", "mvn_logpdf",
    "HmmParams", "em_fit", "log_forward", "log_backward", "forward_posteriors",
    "FrameChain", "PhaseModel", "HierarchicalModel", "LogForwardLattice", "build_hierarchy",
    "init_forward", "forward_step", "recognize_phase", "phase_posteriors",
    "save_model", "load_model",
]
