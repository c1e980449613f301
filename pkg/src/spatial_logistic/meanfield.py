"""Space-homogeneous mean-field density and its closed-form integrals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .kernels import ModelParams


@dataclass(frozen=True)
class MeanFieldTrajectory:
    """Logistic solution ``q_t`` started from ``q0`` in ``(0, q*)``."""

    params: ModelParams
    q0: float | None = None

    def __post_init__(self):
        qs = self.params.q_star
        if not qs > 0:
            raise InvalidParameterError("q* must be positive (requires kappa+ > m)")
        if self.q0 is None:
            object.__setattr__(self, "q0", 0.5 * qs)
        if not (0 < self.q0 < qs):
            raise InvalidParameterError(f"q0 must lie in (0, q*={qs!r})")

    @property
    def q_star(self) -> float:
        return self.params.q_star

    @property
    def rate(self) -> float:
        """Relaxation rate ``kappa+ - m``."""
        return self.params.kappa_plus - self.params.mortality


def q_at(traj: MeanFieldTrajectory, t):
    """``q_t = q* q0 / (q0 + (q* - q0) exp(-(kappa+ - m) t))``."""
    t = np.asarray(t, dtype=float)
    qs, q0 = traj.q_star, traj.q0
    return qs * q0 / (q0 + (qs - q0) * np.exp(-traj.rate * t))


def log_q_ratio(traj: MeanFieldTrajectory, s, t):
    """``log(q_t / q_s)`` without forming the ratio."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    qs, q0 = traj.q_star, traj.q0
    c = (qs - q0) / q0
    r = traj.rate
    # log q_t - log q_s = log(1 + c e^{-r s}) - log(1 + c e^{-r t})
    return np.log1p(c * np.exp(-r * s)) - np.log1p(c * np.exp(-r * t))


def integral_q(traj: MeanFieldTrajectory, s, t):
    """``int_s^t q = q* (t - s) - log(q_t / q_s) / kappa-``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return traj.q_star * (t - s) - log_q_ratio(traj, s, t) / traj.params.kappa_minus


def j_hat(traj: MeanFieldTrajectory, t, xi):
    """``j(xi, t) = a+^(xi) - q_t a-^(xi) - kappa- q_t - m``."""
    p = traj.params
    q = q_at(traj, t)
    return p.a_plus.fourier(xi) - q * p.a_minus.fourier(xi) - p.kappa_minus * q - p.mortality


def exponent(traj: MeanFieldTrajectory, s, t, xi):
    """``int_s^t j(xi, tau) dtau`` in closed form."""
    p = traj.params
    km = p.kappa_minus
    am = p.a_minus.fourier(xi)
    gap = p.gap(xi, traj.q_star)
    return exponent_from_spectra(traj, s, t, gap, am)


def exponent_from_spectra(traj: MeanFieldTrajectory, s, t, gap_star, a_minus_hat):
    """Exponent given ``kappa+ - J*^(xi)`` and ``a-^(xi)`` already sampled."""
    km = traj.params.kappa_minus
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return -gap_star * (t - s) + (a_minus_hat + km) / km * log_q_ratio(traj, s, t)
