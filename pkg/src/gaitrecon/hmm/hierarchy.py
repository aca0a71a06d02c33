"""Two-level HMM: phases on top, one left-to-right frame chain per training segment below.

Inside a chain each frame state moves to itself, the next frame or the frame
after that with probability 1/3 each. Mass that runs off the end of a chain
is split evenly between the successor phase (next) and a uniform restart over
all phases (exit); within a phase it is spread uniformly over the member
chains' first frames. Emissions use only the sensor part of the state: an
axis-aligned Gaussian with the chain's frame mean and the phase's per-frame
spread.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import DataError, TrackingLost
from ..segmentation import GaitPhase, PHASE_ORDER, successor
from ..skeleton import Skeleton
from .gaussian import LOG_2PI, REG_FLOOR, GaussianState, regression_matrix

log = logging.getLogger(__name__)

A_SELF = A_NEXT = A_SKIP = 1.0 / 3.0
EXIT_SHARE = 0.5
SIGMA_FLOOR = 0.1
_LOG3 = np.log(3.0)


@dataclass
class FrameChain:
    """Per-frame z-scored means (L, d) of one registered segment and emission sigmas (L, d_y).

    ``warp`` keeps the (source frame, reference frame) pairs that aligned the
    segment to its phase reference, for provenance only.
    """

    means: np.ndarray
    sigmas: np.ndarray
    src_segment_id: str = ""
    warp: Optional[list] = None

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if self.means.ndim != 2 or len(self.means) == 0:
            raise DataError("chain means must be a non-empty (L, d) array")
        if self.sigmas.shape[0] != len(self.means):
            raise DataError("chain sigmas must have one row per frame")
        if np.any(self.sigmas <= 0):
            raise DataError("chain sigmas must be positive")

    def __len__(self):
        return len(self.means)

    def transition_matrix(self) -> np.ndarray:
        """(L, L + 1) left-to-right matrix; the last column collects mass leaving the chain."""
        L = len(self)
        A = np.zeros((L, L + 1))
        for k in range(L):
            for step in (0, 1, 2):
                A[k, min(k + step, L)] += 1.0 / 3.0
        return A


@dataclass
class PhaseModel:
    phase: GaitPhase
    family: str
    chains: list
    profile_mean: Optional[np.ndarray] = None
    profile_sigma: Optional[np.ndarray] = None
    successor: Optional[tuple] = None

    def __post_init__(self):
        self.phase = GaitPhase(self.phase)
        if not self.chains:
            raise DataError(f"phase {self.phase} needs at least one chain")
        lengths = {len(c) for c in self.chains}
        if len(lengths) != 1:
            raise DataError(f"phase {self.phase}: member chains differ in length {sorted(lengths)}")
        if self.profile_mean is None:
            self.profile_mean = np.mean([c.means for c in self.chains], axis=0)
        if self.profile_sigma is None:
            self.profile_sigma = self.chains[0].sigmas.copy()

    @property
    def key(self) -> tuple:
        return (self.family, self.phase.value)

    @property
    def H(self) -> int:
        return len(self.chains)

    @property
    def length(self) -> int:
        return len(self.chains[0])

    def profile_log_likelihood(self, y: np.ndarray, d_x: int) -> np.ndarray:
        """Mixture likelihood over the H members, per frame: log (1/H) sum_h N(y; mu_kh, sigma_kh)."""
        y = np.asarray(y, dtype=float)
        mus = np.stack([c.means[:, d_x:] for c in self.chains])  # (H, L, d_y)
        sig = np.stack([c.sigmas for c in self.chains])
        ll = -0.5 * np.sum(((y - mus) / sig) ** 2 + 2 * np.log(sig) + LOG_2PI, axis=-1)
        m = ll.max(axis=0)
        return m + np.log(np.mean(np.exp(ll - m), axis=0))


def default_successor(family: str, phase: GaitPhase) -> tuple:
    if phase is GaitPhase.IDLE:
        return (family, GaitPhase.AIRBORNE_UP.value) if family in ("jump", "hop") else (family, "IDLE")
    return (family, successor(phase).value)


class HierarchicalModel:
    """Immutable trained model plus flat index arrays for the runtime lattice."""

    def __init__(self, skeleton: Skeleton, fps: float, phases: Sequence[PhaseModel],
                 global_states: Sequence[GaussianState], zscore_mean, zscore_std, d_x: int,
                 K: int = 5, W: int = 3, config: Optional[dict] = None, reg_floor: float = REG_FLOOR):
        if K < 1 or W < 1:
            raise DataError("K and W must be >= 1")
        if not phases:
            raise DataError("model has no phases")
        keys = [p.key for p in phases]
        if len(set(keys)) != len(keys):
            raise DataError("a phase appears twice within one motion family")
        self.skeleton = skeleton
        self.fps = float(fps)
        self.phases = list(phases)
        self.global_states = list(global_states)
        self.zscore_mean = np.asarray(zscore_mean, dtype=float)
        self.zscore_std = np.asarray(zscore_std, dtype=float)
        self.d_x = int(d_x)
        self.K = int(K)
        self.W = int(W)
        self.config = dict(config or {})
        self.reg_floor = reg_floor
        self.d = self.phases[0].chains[0].means.shape[1]
        self.d_y = self.d - self.d_x
        self._index()
        self._cond = {}

    # -- flat layout ---------------------------------------------------------
    def _index(self):
        key_to_p = {p.key: i for i, p in enumerate(self.phases)}
        state_phase, state_chain, state_frame = [], [], []
        means, sig = [], []
        chain_start, chain_phase = [], []
        for pi, p in enumerate(self.phases):
            for c in p.chains:
                chain_start.append(len(state_phase))
                chain_phase.append(pi)
                L = len(c)
                state_phase += [pi] * L
                state_chain += [len(chain_start) - 1] * L
                state_frame += list(range(L))
                means.append(c.means)
                sig.append(c.sigmas)
        self.n_states = len(state_phase)
        self.state_phase = np.array(state_phase)
        self.state_chain = np.array(state_chain)
        self.state_frame = np.array(state_frame)
        self.chain_start = np.array(chain_start)
        self.chain_phase = np.array(chain_phase)
        self.chain_len = np.array([len(self.phases[p].chains[0]) for p in chain_phase])
        self.means = np.concatenate(means)
        self.mu_y = self.means[:, self.d_x:]
        sig = np.concatenate(sig)
        self.inv_sigma = 1.0 / sig
        self.log_norm = -np.sum(np.log(sig), axis=1) - 0.5 * self.d_y * LOG_2PI
        self.prev1 = np.flatnonzero(self.state_frame >= 1)
        self.prev2 = np.flatnonzero(self.state_frame >= 2)
        self.chain_last = self.chain_start + self.chain_len - 1
        multi = self.chain_len >= 2
        self.chain_second_last = np.where(multi, self.chain_last - 1, -1)
        self.succ = np.array([key_to_p.get(p.successor if p.successor else default_successor(p.family, p.phase), -1)
                              for p in self.phases])
        self.phase_H = np.array([p.H for p in self.phases])
        self.phase_names = [p.phase for p in self.phases]
        self.phase_order = [ph for ph in PHASE_ORDER if ph in set(self.phase_names)]
        self.name_index = np.array([self.phase_order.index(p.phase) for p in self.phases])

    # -- emissions and conditioning ------------------------------------------
    def zscore(self, v, part: str = "z"):
        sl = {"z": slice(None), "x": slice(0, self.d_x), "y": slice(self.d_x, None)}[part]
        return (np.asarray(v, dtype=float) - self.zscore_mean[sl]) / self.zscore_std[sl]

    def unzscore(self, v, part: str = "x"):
        sl = {"z": slice(None), "x": slice(0, self.d_x), "y": slice(self.d_x, None)}[part]
        return np.asarray(v, dtype=float) * self.zscore_std[sl] + self.zscore_mean[sl]

    def log_emission(self, y_z: np.ndarray) -> np.ndarray:
        """(S,) log b_i(y) for a z-scored sensor vector."""
        r = (y_z - self.mu_y) * self.inv_sigma
        return self.log_norm - 0.5 * np.einsum("ij,ij->i", r, r)

    def _nearest_global(self, z_mean):
        if not self.global_states:
            return None
        lls = [g.log_pdf(z_mean) for g in self.global_states]
        return self.global_states[int(np.argmax(lls))]

    def conditioning(self, phase_idx: int, frame: int):
        """(B, conditional covariance) for a phase frame, cached.

        The joint covariance is the members' scatter at that aligned frame,
        shrunk towards the closest global EM state's covariance.
        """
        key = (phase_idx, frame)
        hit = self._cond.get(key)
        if hit is not None:
            return hit
        p = self.phases[phase_idx]
        Z = np.stack([c.means[frame] for c in p.chains])
        mean = Z.mean(axis=0)
        g = self._nearest_global(mean)
        nu = float(self.d_y + 2)
        H = len(Z)
        scatter = (Z - mean).T @ (Z - mean)
        if g is None:
            U = scatter / max(H - 1, 1)
        else:
            U = (scatter + nu * g.U) / (H - 1 + nu)
        U = U + np.eye(self.d) * self.reg_floor
        st = GaussianState(mean, U, self.d_x)
        B = regression_matrix(st)
        cov = st.Uxx - B @ st.Uyx
        out = (B, 0.5 * (cov + cov.T))
        self._cond[key] = out
        return out

    def conditional_mean(self, state: int, y_z: np.ndarray) -> np.ndarray:
        """Regressed z-scored X for one flat state given a z-scored sensor vector."""
        p, k = self.state_phase[state], self.state_frame[state]
        B, _ = self.conditioning(int(p), int(k))
        m = self.means[state]
        return m[: self.d_x] + B @ (y_z - m[self.d_x:])

    def state_label(self, state: int):
        p = int(self.state_phase[state])
        c = int(self.state_chain[state])
        return self.phases[p].key, c, int(self.state_frame[state])

    @property
    def total_frames(self) -> int:
        return int(self.n_states)

    @property
    def n_segments(self) -> int:
        return int(len(self.chain_start))


# -- lattice ----------------------------------------------------------------------

@dataclass
class LogForwardLattice:
    """Normalised log forward values over all (phase, chain, frame) states."""

    log_alpha: np.ndarray
    steps: int = 0
    log_likelihood: float = 0.0
    last_log_norm: float = 0.0

    def posterior(self) -> np.ndarray:
        return np.exp(self.log_alpha)

    def copy(self):
        return LogForwardLattice(self.log_alpha.copy(), self.steps, self.log_likelihood, self.last_log_norm)


def _lse(x):
    m = np.max(x)
    if not np.isfinite(m):
        return m
    return m + np.log(np.sum(np.exp(x - m)))


def init_forward(model: HierarchicalModel) -> LogForwardLattice:
    """Prior mass uniform over phases, then uniform over each phase's member chains."""
    a = np.full(model.n_states, -np.inf)
    P = len(model.phases)
    a[model.chain_start] = -np.log(P) - np.log(model.phase_H[model.chain_phase])
    return LogForwardLattice(a)


def predict(model: HierarchicalModel, log_alpha: np.ndarray) -> np.ndarray:
    """One transition step in log space (no emission)."""
    t = log_alpha - _LOG3
    pred = t.copy()
    pred[model.prev1] = np.logaddexp(pred[model.prev1], t[model.prev1 - 1])
    pred[model.prev2] = np.logaddexp(pred[model.prev2], t[model.prev2 - 2])
    # mass leaving each chain: next + skip from the last frame, skip from the one before
    leave = np.logaddexp(log_alpha[model.chain_last] + np.log(2.0 / 3.0),
                         np.where(model.chain_second_last >= 0,
                                  log_alpha[model.chain_second_last] - _LOG3, -np.inf))
    P = len(model.phases)
    leave_phase = np.full(P, -np.inf)
    np.logaddexp.at(leave_phase, model.chain_phase, leave)
    total = _lse(leave_phase)
    entry = np.full(P, total + np.log(EXIT_SHARE) - np.log(P))
    has_succ = model.succ >= 0
    nxt = np.full(P, -np.inf)
    np.logaddexp.at(nxt, model.succ[has_succ], leave_phase[has_succ] + np.log(1.0 - EXIT_SHARE))
    # phases without a successor in the model send their "next" share to the restart
    orphan = _lse(leave_phase[~has_succ]) if np.any(~has_succ) else -np.inf
    if np.isfinite(orphan):
        entry = np.logaddexp(entry, orphan + np.log(1.0 - EXIT_SHARE) - np.log(P))
    entry = np.logaddexp(entry, nxt)
    starts = model.chain_start
    pred[starts] = np.logaddexp(pred[starts], entry[model.chain_phase] - np.log(model.phase_H[model.chain_phase]))
    return pred


def forward_step(model: HierarchicalModel, lattice: LogForwardLattice, y_z: np.ndarray) -> LogForwardLattice:
    """Consume one z-scored sensor vector; returns a new normalised lattice."""
    log_b = model.log_emission(np.asarray(y_z, dtype=float))
    prior = lattice.log_alpha if lattice.steps == 0 else predict(model, lattice.log_alpha)
    a = prior + log_b
    c = _lse(a)
    if not np.isfinite(c):
        raise TrackingLost(f"forward lattice underflowed at step {lattice.steps}")
    return LogForwardLattice(a - c, lattice.steps + 1, lattice.log_likelihood + c, c)


def phase_posteriors(model: HierarchicalModel, lattice: LogForwardLattice) -> np.ndarray:
    """Posterior per phase name, ordered as ``model.phase_order``."""
    post = np.zeros(len(model.phase_order))
    np.add.at(post, model.name_index[model.state_phase], np.exp(lattice.log_alpha))
    s = post.sum()
    return post / s if s > 0 else post


def recognize_phase(model: HierarchicalModel, lattice: LogForwardLattice):
    """(phase, posterior) of the most probable phase; ties resolve to the phase listed first in the gait cycle order."""
    post = phase_posteriors(model, lattice)
    i = int(np.argmax(post))  # argmax returns the first maximum
    return model.phase_order[i], float(post[i])


# -- construction -----------------------------------------------------------------

def build_hierarchy(groups: dict, global_states, zscore_mean, zscore_std, skeleton: Skeleton,
                    fps: float, d_x: int, K: int = 5, W: int = 3, sigma_floor: float = SIGMA_FLOOR,
                    config: Optional[dict] = None) -> HierarchicalModel:
    """Assemble the hierarchy from registered phase groups.

    ``groups`` maps (family, phase name) to a list of (segment id, z-scored
    (L, d) array[, warp pairs]); all members of a group share L. The emission sigma of a
    phase frame is the per-channel standard deviation of the members' sensor
    features at that frame, floored at ``sigma_floor``.
    """
    phases = []
    for (family, name), members in groups.items():
        if not members:
            raise DataError(f"phase group {family}/{name} is empty")
        Z = np.stack([np.asarray(m[1], dtype=float) for m in members])  # (H, L, d)
        sig = Z[:, :, d_x:].std(axis=0) if len(members) > 1 else np.zeros(Z.shape[1:2] + (Z.shape[2] - d_x,))
        sig = np.maximum(sig, sigma_floor)
        chains = [FrameChain(m[1], sig.copy(), m[0], m[2] if len(m) > 2 else None) for m in members]
        ph = GaitPhase(name)
        phases.append(PhaseModel(ph, family, chains, Z.mean(axis=0)[:, d_x:], sig,
                                 default_successor(family, ph)))
    family_order = {f: i for i, f in enumerate(("walk", "run", "jump", "hop", "idle"))}
    phases.sort(key=lambda p: (family_order.get(p.family, 99), p.family, PHASE_ORDER.index(p.phase)))
    return HierarchicalModel(skeleton, fps, phases, global_states, zscore_mean, zscore_std, d_x,
                             K, W, config)
