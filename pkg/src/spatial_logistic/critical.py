"""Critical mortality ``m_cr(eps)`` and its small-``eps`` asymptotics.

The extinction equation ``q + eps^d p*(q) = 0`` is solved with
``p*(q) = -(1/kappa-) int J_q^/(kappa+ - J_q^) a-^ dxi`` and ``J_q = a+ - q a-``.
Then ``m_cr = kappa+ - kappa- q``.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import special_math as sm
from .covariance import p_star_integrand, p_star_integrand_radial
from .errors import (
    BracketError,
    InvalidKernelError,
    InvalidParameterError,
    NoRootError,
    SpatialLogisticError,
)
from .kernels import ModelParams, competition_ceiling

Q_LO = 1e-14
OUT_OF_RANGE_EPS = 0.5


@dataclass(frozen=True)
class CriticalPoint:
    eps: float
    q_star_eps: float
    m_cr: float
    p_star_eps: float
    residual: float


@dataclass(frozen=True)
class AsymptoticConstants:
    dim: int
    I: float | None = None
    lambda3: float | None = None
    lambda2: float | None = None
    lambda1: float | None = None


def _r_min(params: ModelParams, q: float) -> float:
    """Refinement floor well inside the Lorentzian core ``|xi|^2 ~ kappa- q``."""
    return min(1e-9, 1e-2 * math.sqrt(params.kappa_minus * q)) if q > 0 else 1e-9


def p_star_of_q(
    params: ModelParams,
    q: float,
    r_max: float | None = None,
    order: int = 16,
    ceiling: float | None = None,
) -> float:
    """``p*(q)``; ``-inf`` at ``q = 0`` when ``d <= 2``.

    Raises
    ------
    BracketError
        ``a+ - q a-`` dips below ``-tol_A3`` on the validation sample.
    """
    if q < 0:
        raise InvalidParameterError("q must be nonnegative")
    if ceiling is None:
        ceiling = competition_ceiling(params)
    if q > ceiling:
        raise BracketError(f"a+ - q a- < 0 somewhere for q = {q:.6g} (ceiling {ceiling:.6g})")
    if q == 0 and params.dim <= 2:
        return -math.inf
    if r_max is None:
        r_max = params.spectral_cutoff()
    r_min = _r_min(params, q)
    if params.radial:
        quad = sm.radial_quadrature(params.dim, r_max, r_min=r_min, order=order, max_panel_width=r_max / 8)
        return float(sm.integrate_radial(p_star_integrand_radial(params, q), quad))
    return float(sm.integrate_nonradial(p_star_integrand(params, q), params.dim, r_max, level=3, r_min=r_min))


def solve_critical(params: ModelParams, eps: float, xtol_rel: float = 1e-14) -> CriticalPoint:
    """Root of ``h(q) = q + eps^d p*(q)`` on ``(Q_LO, q_ub)``.

    ``q_ub`` is the smaller of ``(kappa+ - m)/kappa-`` and the competition
    ceiling. Brent's method runs in ``log q`` because roots span many decades.
    """
    if not (eps > 0 and math.isfinite(eps)):
        raise InvalidParameterError("eps must be positive")
    if not params.q_star > 0:
        raise InvalidParameterError("requires kappa+ > m")
    d = params.dim
    ceiling = competition_ceiling(params)
    q_ub = min(params.q_star, ceiling) * (1 - 1e-12)
    r_max = params.spectral_cutoff()
    scale = eps**d

    def h(q):
        return q + scale * p_star_of_q(params, q, r_max=r_max, ceiling=ceiling)

    h_lo, h_hi = h(Q_LO), h(q_ub)
    if not (h_lo < 0 < h_hi):
        raise NoRootError(
            f"h(q) has no sign change on [{Q_LO:g}, {q_ub:.6g}]: h_lo={h_lo:.6g}, h_hi={h_hi:.6g}",
            h_lo=h_lo,
            h_hi=h_hi,
        )
    u = brentq(lambda v: h(math.exp(v)), math.log(Q_LO), math.log(q_ub), xtol=xtol_rel, rtol=4 * np.finfo(float).eps, maxiter=500)
    q = math.exp(u)
    p_star = p_star_of_q(params, q, r_max=r_max, ceiling=ceiling)
    return CriticalPoint(
        eps=float(eps),
        q_star_eps=q,
        m_cr=params.kappa_plus - params.kappa_minus * q,
        p_star_eps=p_star,
        residual=q + scale * p_star,
    )


def _moment_matrix(params: ModelParams) -> np.ndarray:
    a = np.asarray(params.a_plus.second_moment_matrix, dtype=float)
    if not np.all(np.isfinite(a)) or np.min(np.linalg.eigvalsh(a)) <= 0:
        raise InvalidKernelError("second-moment matrix of a+ is not positive definite")
    return a


def constant_I(params: ModelParams, r_max: float | None = None, order: int = 16) -> float:
    """``I = int a+^ a-^ / (kappa+ - a+^) dxi`` (finite for ``d >= 3``)."""
    if params.dim < 3:
        raise InvalidParameterError("I is finite only for d >= 3")
    if r_max is None:
        r_max = params.spectral_cutoff()
    ap, am = params.a_plus, params.a_minus
    if params.radial:

        def f(r):
            return ap.fourier_profile(r) * am.fourier_profile(r) / ap.deficit_profile(r)

        quad = sm.radial_quadrature(params.dim, r_max, order=order, max_panel_width=r_max / 8)
        return float(sm.integrate_radial(f, quad))

    def g(xi):
        return ap.fourier(xi) * am.fourier(xi) / ap.deficit(xi)

    return float(sm.integrate_nonradial(g, params.dim, r_max, level=3))


def asymptotic_constants(params: ModelParams) -> AsymptoticConstants:
    """Dimension-appropriate leading-order constants."""
    d = params.dim
    a = _moment_matrix(params)
    kp, km = params.kappa_plus, params.kappa_minus
    if d >= 3:
        i_val = constant_I(params)
        return AsymptoticConstants(d, I=i_val, lambda3=i_val / km)
    if d == 2:
        if params.a_plus.is_radial:
            lam2 = kp / (math.pi * float(np.trace(a)))
        else:
            lam2 = kp / (2 * math.pi * math.sqrt(float(np.linalg.det(a))))
        return AsymptoticConstants(d, lambda2=lam2)
    return AsymptoticConstants(d, lambda1=(kp**2 / (2 * km * float(a[0, 0]))) ** (1 / 3))


def predicted_q(consts: AsymptoticConstants, eps: float) -> float:
    """Leading term of ``q*(eps)``."""
    if consts.dim >= 3:
        return consts.lambda3 * eps**consts.dim
    if consts.dim == 2:
        return consts.lambda2 * eps**2 * float(sm.lambert_w(eps**-2))
    return consts.lambda1 * eps ** (2 / 3)


def eps_sweep(eps0: float, n: int) -> list[float]:
    """Geometric sweep ``eps0 * 2^-k``, ``k = 0..n-1``."""
    return [eps0 * 2.0**-k for k in range(n)]


@dataclass
class TableRow:
    eps: float
    q_star: float = math.nan
    m_cr: float = math.nan
    p_star: float = math.nan
    predicted: float = math.nan
    ratio: float = math.nan
    residual: float = math.nan
    lambert_w: float | None = None
    out_of_range: bool = False
    error: str = ""


def _row(params, consts, eps):
    row = TableRow(eps=float(eps), out_of_range=eps >= OUT_OF_RANGE_EPS)
    if params.dim == 2:
        row.lambert_w = float(sm.lambert_w(eps**-2))
    row.predicted = predicted_q(consts, eps)
    try:
        cp = solve_critical(params, eps)
    except SpatialLogisticError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    row.q_star, row.m_cr, row.p_star, row.residual = cp.q_star_eps, cp.m_cr, cp.p_star_eps, cp.residual
    row.ratio = cp.q_star_eps / row.predicted
    return row


def asymptotics_table(params: ModelParams, eps_list: Sequence[float], workers: int = 1) -> list[TableRow]:
    """One row per ``eps``; solver failures flag the row instead of aborting."""
    consts = asymptotic_constants(params)
    eps_list = [float(e) for e in eps_list]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda e: _row(params, consts, e), eps_list))
    return [_row(params, consts, e) for e in eps_list]


def ratio_verdict(rows: Sequence[TableRow]) -> dict:
    """Whether ``|ratio - 1|`` strictly shrinks along the rows, and the final ratio."""
    ratios = [r.ratio for r in rows if not r.error]
    dist = [abs(r - 1) for r in ratios]
    return {
        "monotone_toward_one": all(b < a for a, b in zip(dist, dist[1:])),
        "final_ratio": ratios[-1] if ratios else math.nan,
    }


TABLE_COLUMNS = ["eps", "q_star", "m_cr", "p_star", "predicted", "ratio", "residual"]


def write_table_csv(path, rows: Sequence[TableRow], dim: int) -> None:
    cols = TABLE_COLUMNS + (["lambert_w"] if dim == 2 else []) + ["out_of_range", "error"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            rec = asdict(r)
            w.writerow(
                [format(rec[c], ".17g") if isinstance(rec[c], float) else str(rec[c]).lower() if isinstance(rec[c], bool) else rec[c] for c in cols]
            )
