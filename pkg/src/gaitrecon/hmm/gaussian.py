"""Joint Gaussian states over z = [x, y] and conditioning of x on y."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from ..errors import ConditioningError, DataError

LOG_2PI = np.log(2.0 * np.pi)
REG_FLOOR = 1e-6


@dataclass(frozen=True)
class GaussianState:
    """Mean ``mu`` (d_x + d_y) and covariance ``U``; the first ``d_x`` entries are X."""

    mu: np.ndarray
    U: np.ndarray
    d_x: int

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        U = np.asarray(self.U, dtype=float)
        d = mu.size
        if U.shape != (d, d):
            raise DataError(f"covariance shape {U.shape} does not match mean length {d}")
        if not 0 <= self.d_x <= d:
            raise DataError("d_x out of range")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(U))):
            raise DataError("Gaussian state has non-finite parameters")
        U = 0.5 * (U + U.T)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "U", U)

    @property
    def d_y(self) -> int:
        return self.mu.size - self.d_x

    @property
    def mu_x(self):
        return self.mu[: self.d_x]

    @property
    def mu_y(self):
        return self.mu[self.d_x:]

    @property
    def Uxx(self):
        return self.U[: self.d_x, : self.d_x]

    @property
    def Uxy(self):
        return self.U[: self.d_x, self.d_x:]

    @property
    def Uyx(self):
        return self.U[self.d_x:, : self.d_x]

    @property
    def Uyy(self):
        return self.U[self.d_x:, self.d_x:]

    def log_pdf(self, z) -> np.ndarray:
        """log N(z; mu, U) for z of shape (..., d)."""
        return mvn_logpdf(z, self.mu, self.U)

    def to_json(self):
        return {"mu": self.mu.tolist(), "U": self.U.tolist()}


def mvn_logpdf(z, mu, U) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    try:
        c, low = cho_factor(U, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise ConditioningError("covariance is not positive definite") from exc
    diff = (z - mu).reshape(-1, mu.size)
    sol = cho_solve((c, low), diff.T, check_finite=False)
    maha = np.sum(diff.T * sol, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    out = -0.5 * (maha + logdet + mu.size * LOG_2PI)
    return out.reshape(z.shape[:-1])


def regression_matrix(state: GaussianState, floor: float = 0.0) -> np.ndarray:
    """B = U^XY (U^YY)^-1, (d_x, d_y), from a Cholesky solve of U^YY."""
    Uyy = state.Uyy
    if floor > 0 and np.min(np.linalg.eigvalsh(Uyy)) < floor:
        raise ConditioningError("U^YY is below the regularisation floor")
    try:
        c = cho_factor(Uyy, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise ConditioningError("U^YY is not positive definite") from exc
    # B^T = U^YY^-1 U^YX
    return cho_solve(c, state.Uyx, check_finite=False).T


def condition_on_sensor(state: GaussianState, y, floor: float = 0.0):
    """Conditional mean and covariance of x given y under the joint Gaussian ``state``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != state.d_y:
        raise DataError(f"y has {y.size} channels, state expects {state.d_y}")
    B = regression_matrix(state, floor)
    mean = state.mu_x + B @ (y - state.mu_y)
    cov = state.Uxx - B @ state.Uyx
    cov = 0.5 * (cov + cov.T)
    return mean, cov
