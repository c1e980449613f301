"""First-order correction ``(g_hat_t, p_t)`` on a frequency grid.

With ``J_t = a+ - q_t a-`` and ``j(xi, t) = J_t^(xi) - kappa- q_t - m`` the pair solves

    d/dt g_hat = 2 j g_hat + 2 q_t J_t^
    d/dt p     = (kappa+ - m - 2 kappa- q_t) p - int g_hat a-^ dxi

Two backends integrate it: ``duhamel`` (variation of constants with the
closed-form exponent and Gauss-Legendre collocation in time) and ``rk4``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import special_math as sm
from .errors import (
    AssumptionViolationError,
    IntegrationError,
    InvalidParameterError,
    ResolutionError,
)
from .kernels import ModelParams, as_points
from .meanfield import MeanFieldTrajectory, exponent_from_spectra, log_q_ratio, q_at

BACKENDS = ("duhamel", "rk4")
STATIONARY_RESIDUAL = 1e-8


# --------------------------------------------------------------------- grid


@dataclass(frozen=True)
class SpectralGrid:
    """Frequency nodes with positive weights for ``int_{R^d} f(xi) dxi``.

    For radial grids ``points`` lie on the first axis and ``weights``
    include the sphere-area factor ``|S^{d-1}| r^{d-1}``.
    """

    dim: int
    points: np.ndarray
    radii: np.ndarray
    weights: np.ndarray
    radial: bool
    order: int
    max_panel_width: float

    @property
    def size(self) -> int:
        return self.weights.size

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def manifest(self) -> dict:
        """JSON-ready description of the grid."""
        out = {"dim": self.dim, "radial": self.radial, "weights": self.weights.tolist()}
        if self.radial:
            out["radii"] = self.radii.tolist()
        else:
            out["points"] = self.points.tolist()
        return out

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), sort_keys=True)


def make_grid(
    params: ModelParams,
    r_max: float | None = None,
    r_min: float = 1e-6,
    order: int = 16,
    level: int = 2,
    max_panel_width: float | None = None,
) -> SpectralGrid:
    """Grid refined geometrically toward ``xi = 0`` and truncated where the kernel tails vanish."""
    if r_max is None:
        r_max = params.spectral_cutoff()
        if not math.isfinite(r_max):
            raise AssumptionViolationError("kernel transforms are not integrable (A1)")
    if max_panel_width is None:
        max_panel_width = r_max / 8
    d = params.dim
    if params.radial:
        quad = sm.radial_quadrature(d, r_max, r_min=r_min, order=order, max_panel_width=max_panel_width)
        radii = np.asarray(quad.nodes)
        pts = np.zeros((radii.size, d))
        pts[:, 0] = radii
        return SpectralGrid(d, pts, radii, np.asarray(quad.weights), True, order, max_panel_width)
    pts, w = sm.spherical_product_rule(d, r_max, level=level, r_min=r_min, max_panel_width=max_panel_width)
    radii = np.linalg.norm(pts, axis=1)
    return SpectralGrid(d, pts, radii, w, False, 8 * level, max_panel_width)


@dataclass(frozen=True)
class GridSpectra:
    """Kernel transforms sampled on a grid."""

    a_plus: np.ndarray
    a_minus: np.ndarray
    deficit_plus: np.ndarray

    @classmethod
    def sample(cls, params: ModelParams, grid: SpectralGrid) -> "GridSpectra":
        pts = grid.points if grid.dim > 1 else grid.points[:, 0]
        return cls(
            np.asarray(params.a_plus.fourier(pts), dtype=float),
            np.asarray(params.a_minus.fourier(pts), dtype=float),
            np.asarray(params.a_plus.deficit(pts), dtype=float),
        )

    def gap(self, q: float):
        """``kappa+ - J_q^`` on the grid."""
        return self.deficit_plus + q * self.a_minus

    def j_hat_q(self, q):
        return self.a_plus - q * self.a_minus


# ------------------------------------------------------------------- states


@dataclass(frozen=True)
class SpectralState:
    t: float
    g_hat: np.ndarray
    p: float


@dataclass(frozen=True)
class StationaryPair:
    g_hat_star: np.ndarray
    p_star: float
    grid: SpectralGrid | None = None
    g_star: np.ndarray | None = None


def initial_state(grid: SpectralGrid, t0: float = 0.0) -> SpectralState:
    """Poisson start: ``g_hat_0 = 0``, ``p_0 = 0``."""
    return SpectralState(float(t0), np.zeros(grid.size), 0.0)


# --------------------------------------------------------------- stationary


def stationary_g_hat(params: ModelParams, xi):
    """``g_hat*(xi) = q* J*^(xi) / (kappa+ - J*^(xi))``."""
    q = params.q_star
    gap = np.asarray(params.gap(xi, q), dtype=float)
    if np.any(gap <= 0):
        raise AssumptionViolationError("kappa+ - J*^(xi) <= 0: spectral gap condition fails")
    jhat = params.kappa_plus - gap
    return q * jhat / gap


def p_star_integrand_radial(params: ModelParams, q: float):
    """Radial integrand ``-(1/kappa-) J_q^/(kappa+ - J_q^) a-^`` as a function of ``|xi|``."""
    ap, am = params.a_plus, params.a_minus
    km = params.kappa_minus
    dp = ap.deficit_profile
    amf = am.fourier_profile

    def f(r):
        a_m = amf(r)
        gap = dp(r) + q * a_m
        return -(params.kappa_plus - gap) / gap * a_m / km

    return f


def p_star_integrand(params: ModelParams, q: float):
    """Same integrand as a function of ``xi`` with trailing axis ``dim``."""
    km = params.kappa_minus

    def f(xi):
        a_m = params.a_minus.fourier(xi)
        gap = params.a_plus.deficit(xi) + q * a_m
        return -(params.kappa_plus - gap) / gap * a_m / km

    return f


def stationary_p(
    params: ModelParams,
    r_max: float | None = None,
    r_min: float = 1e-9,
    order: int = 16,
    level: int = 3,
) -> float:
    """``p* = -(1/kappa-) int J*^/(kappa+ - J*^) a-^ dxi``."""
    if r_max is None:
        r_max = params.spectral_cutoff()
    q = params.q_star
    if params.radial:
        quad = sm.radial_quadrature(params.dim, r_max, r_min=r_min, order=order, max_panel_width=r_max / 8)
        return float(sm.integrate_radial(p_star_integrand_radial(params, q), quad))
    return float(
        sm.integrate_nonradial(p_star_integrand(params, q), params.dim, r_max, level=level, r_min=r_min)
    )


def stationary_pair(params: ModelParams, grid: SpectralGrid, x_points=None) -> StationaryPair:
    pts = grid.points if grid.dim > 1 else grid.points[:, 0]
    g = stationary_g_hat(params, pts)
    pair = StationaryPair(g, stationary_p(params), grid)
    if x_points is not None:
        pair = StationaryPair(g, pair.p_star, grid, inverse_transform_g(pair, x_points))
    return pair


def resolution_limit(grid: SpectralGrid) -> float:
    """Largest ``|x|`` whose oscillation ``cos(2 pi x.xi)`` the grid panels still resolve."""
    return grid.order / (2 * math.pi * grid.max_panel_width)


def inverse_transform_g(pair: StationaryPair, x_points, grid: SpectralGrid | None = None):
    """``g(x) = int g_hat(xi) cos(2 pi x.xi) dxi`` on the pair's grid."""
    grid = grid or pair.grid
    if grid is None:
        raise InvalidParameterError("a grid is required for the inverse transform")
    x = as_points(x_points, grid.dim)
    flat = x.reshape(-1, grid.dim)
    norms = np.linalg.norm(flat, axis=1)
    limit = resolution_limit(grid)
    if np.any(norms > limit):
        raise ResolutionError(f"|x| = {norms.max():.6g} exceeds the grid resolution bound {limit:.6g}")
    wg = grid.weights * np.asarray(pair.g_hat_star)
    if grid.radial:
        z = 2 * math.pi * np.outer(norms, grid.radii)
        out = sm.radial_fourier_factor(grid.dim, z) @ wg
    else:
        out = np.cos(2 * math.pi * flat @ grid.points.T) @ wg
    return out.reshape(x.shape[:-1])


# ------------------------------------------------------------------- rhs


def rhs(state_g, state_p, t, traj: MeanFieldTrajectory, spectra: GridSpectra, grid: SpectralGrid):
    """Right-hand side of the ``(g_hat, p)`` system at time ``t``."""
    p = traj.params
    q = float(q_at(traj, t))
    jt = spectra.j_hat_q(q)
    j = jt - p.kappa_minus * q - p.mortality
    dg = 2 * j * state_g + 2 * q * jt
    dp = (p.kappa_plus - p.mortality - 2 * p.kappa_minus * q) * state_p - grid.integrate(state_g * spectra.a_minus)
    return dg, dp


def stationarity_residual(state: SpectralState, traj, spectra, grid) -> float:
    dg, dp = rhs(state.g_hat, state.p, state.t, traj, spectra, grid)
    return max(float(np.max(np.abs(dg))), abs(dp))


def _check(state: SpectralState) -> SpectralState:
    if not (np.all(np.isfinite(state.g_hat)) and math.isfinite(state.p)):
        raise IntegrationError(f"non-finite state at t = {state.t:.6g}", time=state.t)
    return state


# ----------------------------------------------------------------- duhamel


class _DuhamelStepper:
    """Exact propagator plus Gauss-Legendre collocation for the forcing integrals."""

    def __init__(self, traj, spectra, grid, order=16, tol=1e-13, max_step=1.0):
        self.traj = traj
        self.sp = spectra
        self.grid = grid
        self.order = order
        self.tol = tol
        self.max_step = max_step
        p = traj.params
        self.gap_star = spectra.gap(traj.q_star)
        self.km = p.kappa_minus
        self.rate = p.kappa_plus - p.mortality

    def _two_e(self, s, t):
        """``2 * int_s^t j`` on the grid (``s``, ``t`` scalars)."""
        return 2 * exponent_from_spectra(self.traj, s, t, self.gap_star, self.sp.a_minus)

    def _c_int(self, s, t):
        """``int_s^t (kappa+ - m - 2 kappa- q)``."""
        return -self.rate * (t - s) + 2 * log_q_ratio(self.traj, s, t)

    def _forcing(self, tau):
        q = float(q_at(self.traj, tau))
        return 2 * q * self.sp.j_hat_q(q)

    def _attempt(self, s, g, p, h, order):
        x, w = sm.gauss_legendre(order)
        nodes = s + 0.5 * h * (x + 1)
        weights = 0.5 * h * w
        t = s + h
        # g at the collocation nodes: e^{2E(s,tau_j)} (g_s + int_s^{tau_j} e^{-2E(s,tau)} F(tau) dtau)
        decay = np.stack([self._two_e(s, tau) for tau in nodes])  # (order, n)
        forcing = np.stack([self._forcing(tau) for tau in nodes])
        integrand = np.exp(-decay) * forcing
        smat = sm.collocation_integration_matrix(nodes, s)
        g_nodes = np.exp(decay) * (g[None, :] + smat @ integrand)
        # end values use the Gauss weights directly
        two_e_end = self._two_e(s, t)
        g_end = np.exp(two_e_end) * (g + weights @ integrand)
        coupling = g_nodes @ (self.grid.weights * self.sp.a_minus)
        c_end = self._c_int(s, t)
        c_nodes = np.array([self._c_int(s, tau) for tau in nodes])
        p_end = math.exp(c_end) * (p - float(np.dot(weights, np.exp(-c_nodes) * coupling)))
        return g_end, p_end

    def step(self, s, g, p, t_end):
        """Advance from ``s`` to ``t_end``, halving subintervals while the order check fails."""
        while s < t_end:
            h = min(self.max_step, t_end - s)
            while True:
                g_hi, p_hi = self._attempt(s, g, p, h, self.order)
                g_lo, p_lo = self._attempt(s, g, p, h, self.order // 2)
                scale = max(1.0, float(np.max(np.abs(g_hi))), abs(p_hi))
                err = max(float(np.max(np.abs(g_hi - g_lo))), abs(p_hi - p_lo))
                if err <= self.tol * scale:
                    break
                h *= 0.5
                if h < 1e-12 * max(1.0, abs(s)):
                    raise IntegrationError(f"step size underflow at t = {s:.6g}", time=s)
            s = s + h if t_end - (s + h) > 1e-14 * max(1.0, t_end) else t_end
            g, p = g_hi, p_hi
            _check(SpectralState(s, g, p))
        return g, p


# -------------------------------------------------------------------- rk4


def _rk4_path(state, traj, spectra, grid, times, h):
    out = []
    t, g, p = state.t, state.g_hat.copy(), state.p
    for target in times:
        n = int(math.ceil((target - t) / h - 1e-9))
        if n > 0:
            hh = (target - t) / n
            for _ in range(n):
                k1g, k1p = rhs(g, p, t, traj, spectra, grid)
                k2g, k2p = rhs(g + 0.5 * hh * k1g, p + 0.5 * hh * k1p, t + 0.5 * hh, traj, spectra, grid)
                k3g, k3p = rhs(g + 0.5 * hh * k2g, p + 0.5 * hh * k2p, t + 0.5 * hh, traj, spectra, grid)
                k4g, k4p = rhs(g + hh * k3g, p + hh * k3p, t + hh, traj, spectra, grid)
                g = g + hh / 6 * (k1g + 2 * k2g + 2 * k3g + k4g)
                p = p + hh / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
                t += hh
            if not (np.all(np.isfinite(g)) and math.isfinite(p)):
                raise IntegrationError(f"non-finite state at t = {t:.6g}", time=t)
        t = float(target)
        out.append(SpectralState(t, g.copy(), float(p)))
    return out


def _path_distance(a, b):
    return max(
        max(float(np.max(np.abs(x.g_hat - y.g_hat))), abs(x.p - y.p)) for x, y in zip(a, b)
    )


# ------------------------------------------------------------------ evolve


def evolve_path(
    state: SpectralState,
    traj: MeanFieldTrajectory,
    times: Sequence[float],
    grid: SpectralGrid,
    backend: str = "duhamel",
    spectra: GridSpectra | None = None,
    h: float | None = None,
    refine_tol: float = 1e-8,
) -> list[SpectralState]:
    """States at each of the nondecreasing ``times`` (all ``>= state.t``).

    ``rk4`` starts from ``h = 1e-2 / kappa+`` (unless ``h`` is given) and
    halves it until two successive paths differ by less than ``refine_tol``.
    """
    if backend not in BACKENDS:
        raise InvalidParameterError(f"backend must be one of {BACKENDS}")
    times = [float(t) for t in times]
    if any(t < state.t for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise InvalidParameterError("output times must be nondecreasing and >= state.t")
    spectra = spectra or GridSpectra.sample(traj.params, grid)
    if backend == "duhamel":
        stepper = _DuhamelStepper(traj, spectra, grid)
        out = []
        t, g, p = state.t, np.asarray(state.g_hat, dtype=float), float(state.p)
        for target in times:
            if target > t:
                g, p = stepper.step(t, g, p, target)
                t = target
            out.append(_check(SpectralState(t, np.array(g), float(p))))
        return out
    if h is not None:
        return _rk4_path(state, traj, spectra, grid, times, h)
    h = 1e-2 / traj.params.kappa_plus
    path = _rk4_path(state, traj, spectra, grid, times, h)
    for _ in range(8):
        h *= 0.5
        finer = _rk4_path(state, traj, spectra, grid, times, h)
        done = _path_distance(path, finer) < refine_tol
        path = finer
        if done:
            break
    return path


def evolve(state, traj, t_end, grid, backend="duhamel", spectra=None, h=None) -> SpectralState:
    """Advance ``state`` to ``t_end``."""
    if t_end < state.t:
        raise InvalidParameterError("t_end must be >= state.t")
    if t_end == state.t:
        return state
    return evolve_path(state, traj, [t_end], grid, backend, spectra, h)[-1]


def evolve_to_stationary(
    traj: MeanFieldTrajectory,
    grid: SpectralGrid,
    backend: str = "duhamel",
    state: SpectralState | None = None,
    residual_tol: float = STATIONARY_RESIDUAL,
    chunk: float = 1.0,
) -> SpectralState:
    """Integrate until the sup-norm residual drops below ``residual_tol`` or ``t = 200/(kappa+ - m)``."""
    spectra = GridSpectra.sample(traj.params, grid)
    state = state or initial_state(grid)
    t_max = 200.0 / traj.rate
    while state.t < t_max:
        if stationarity_residual(state, traj, spectra, grid) < residual_tol:
            break
        state = evolve(state, traj, min(state.t + chunk, t_max), grid, backend, spectra)
    return state


def write_trajectory_csv(path, states: Sequence[SpectralState], indices: Sequence[int]) -> None:
    """CSV with columns ``t, p_t, g_hat_<i>``; floats use 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["t", "p_t"] + [f"g_hat_{i}" for i in indices]) + "\n")
        for s in states:
            vals = [s.t, s.p] + [s.g_hat[i] for i in indices]
            fh.write(",".join(format(float(v), ".17g") for v in vals) + "\n")
