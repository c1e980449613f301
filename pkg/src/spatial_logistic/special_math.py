"""Special functions and quadrature rules.

Lambert W on the principal branch, radial and spherical-product quadrature
rules that refine geometrically towards the origin, a 1-D adaptive Simpson
rule, and the radial Fourier factor used by Hankel-type transforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import IntegrandError, InvalidParameterError

_LAMBERT_TOL = 1e-13
_LAMBERT_MAXITER = 64


def lambert_w(x):
    """Principal branch of the Lambert W function for ``x >= 0``.

    Solves ``w * exp(w) = x`` by Halley iteration, starting from
    ``log(1 + x)`` below ``e`` and from ``log(x) - log(log(x))`` above it.

    Parameters
    ----------
    x : float or array_like
        Nonnegative argument(s).

    Returns
    -------
    float or ndarray
        ``W(x)``, same shape as ``x``.

    Raises
    ------
    InvalidParameterError
        If any ``x`` is negative or NaN.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise InvalidParameterError("lambert_w is defined here only for x >= 0")
    scalar = arr.ndim == 0
    z = np.atleast_1d(arr).astype(float)
    w = np.empty_like(z)
    small = z < math.e
    w[small] = np.log1p(z[small])
    big = ~small
    lz = np.log(z[big])
    w[big] = lz - np.log(lz)

    scale = np.maximum(1.0, z)
    active = z > 0
    w[~active] = 0.0
    for _ in range(_LAMBERT_MAXITER):
        if not np.any(active):
            break
        wa = w[active]
        ew = np.exp(wa)
        f = wa * ew - z[active]
        wp1 = wa + 1.0
        step = f / (ew * wp1 - (wa + 2.0) * f / (2.0 * wp1))
        w[active] = wa - step
        resid = np.abs(w[active] * np.exp(w[active]) - z[active])
        done = (resid <= _LAMBERT_TOL * scale[active]) | (
            np.abs(step) <= 4 * np.finfo(float).eps * np.abs(w[active])
        )
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    if scalar:
        return float(w[0])
    return w.reshape(arr.shape)


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    """Gauss-Legendre nodes and weights on [-1, 1] (cached, read-only)."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^{dim-1} (2 for dim=1)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def ball_volume(dim: int, radius: float = 1.0) -> float:
    return sphere_area(dim) * radius**dim / dim


def panel_rule(edges, order: int):
    """Composite Gauss-Legendre rule over consecutive panels given by ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (half * x + 0.5 * (hi + lo)).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def _radial_edges(r_max, r_min, ratio, max_panel_width):
    edges = [r_max]
    r = r_max
    while r * ratio > r_min:
        r *= ratio
        edges.append(r)
    edges.append(r_min)
    edges.append(0.0)
    edges = np.array(edges[::-1])
    if max_panel_width is None:
        return edges
    out = [edges[0]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((hi - lo) / max_panel_width - 1e-12)))
        out.extend(np.linspace(lo, hi, n + 1)[1:])
    return np.array(out)


@dataclass(frozen=True)
class RadialQuadrature:
    """Quadrature rule for radial integrands over the ball of radius ``r_max``.

    ``sum(weights * f(nodes))`` approximates ``int_{|xi| <= r_max} f(|xi|) dxi``;
    the weights already contain the factor ``|S^{d-1}| r^{d-1}``.
    ``coarse_nodes``/``coarse_weights`` are a half-order rule on the same
    panels, used for error estimates.
    """

    nodes: np.ndarray
    weights: np.ndarray
    r_min: float
    r_max: float
    dim: int
    edges: np.ndarray
    order: int
    coarse_nodes: np.ndarray
    coarse_weights: np.ndarray

    @property
    def max_panel_width(self) -> float:
        return float(np.max(np.diff(self.edges)))


def radial_quadrature(
    dim: int,
    r_max: float,
    r_min: float = 1e-9,
    ratio: float = 0.5,
    order: int = 16,
    max_panel_width: float | None = None,
) -> RadialQuadrature:
    """Build a radial rule with geometric panels ``r_max * ratio**j`` down to ``r_min``.

    The innermost panel ``[0, r_min]`` is a single Gauss-Legendre panel;
    panels wider than ``max_panel_width`` are split uniformly, which keeps
    oscillatory integrands resolved at large radii.
    """
    if dim < 1:
        raise InvalidParameterError("dim must be >= 1")
    if not (r_max > 0 and 0 < r_min < r_max):
        raise InvalidParameterError("need 0 < r_min < r_max")
    if not 0 < ratio < 1:
        raise InvalidParameterError("ratio must lie in (0, 1)")
    edges = _radial_edges(float(r_max), float(r_min), ratio, max_panel_width)
    area = sphere_area(dim)

    def build(n):
        r, w = panel_rule(edges, n)
        return r, w * area * r ** (dim - 1)

    nodes, weights = build(order)
    cnodes, cweights = build(max(2, order // 2))
    for arr in (nodes, weights, cnodes, cweights, edges):
        arr.setflags(write=False)
    return RadialQuadrature(
        nodes=nodes,
        weights=weights,
        r_min=float(r_min),
        r_max=float(r_max),
        dim=dim,
        edges=edges,
        order=order,
        coarse_nodes=cnodes,
        coarse_weights=cweights,
    )


def _checked(values, where):
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        r = float(np.asarray(where)[np.flatnonzero(bad)[0]])
        raise IntegrandError(f"integrand is not finite at radius {r:.6g}", radius=r)
    return values


def integrate_radial(f, quad: RadialQuadrature, return_error: bool = False):
    """Integrate a radial function ``f(r)`` over the ball of ``quad``.

    Returns the value, or ``(value, error_estimate)`` if ``return_error``.
    The error estimate compares against the half-order rule on the same panels.
    """
    fine = _checked(f(quad.nodes), quad.nodes)
    value = float(np.dot(quad.weights, fine))
    if not return_error:
        return value
    coarse = _checked(f(quad.coarse_nodes), quad.coarse_nodes)
    err = abs(value - float(np.dot(quad.coarse_weights, coarse)))
    return value, max(err, 1e-14 * abs(value))


def sphere_rule(dim: int, level: int):
    """Directions and weights on the unit sphere S^{dim-1}.

    Weights sum to the sphere area. Trapezoid in the azimuth (exact for
    trigonometric polynomials) and Gauss-Legendre in ``cos(theta)`` for d=3.
    """
    level = max(1, int(level))
    if dim == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        n = 8 * level
        th = (np.arange(n) + 0.5) * (2 * math.pi / n)
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(n, 2 * math.pi / n)
    if dim == 3:
        nphi = 8 * level
        mu, wmu = gauss_legendre(4 * level)
        phi = (np.arange(nphi) + 0.5) * (2 * math.pi / nphi)
        s = np.sqrt(1.0 - mu**2)
        dirs = np.stack(
            [
                np.outer(s, np.cos(phi)),
                np.outer(s, np.sin(phi)),
                np.outer(mu, np.ones(nphi)),
            ],
            axis=-1,
        ).reshape(-1, 3)
        wts = np.outer(wmu, np.full(nphi, 2 * math.pi / nphi)).ravel()
        return dirs, wts
    raise InvalidParameterError("non-radial quadrature supports dim <= 3 only")


def spherical_product_rule(
    dim: int, r_max: float, level: int = 2, r_min: float = 1e-9, max_panel_width=None
):
    """Points ``(n, dim)`` and weights of a radial x angular product rule on the ball."""
    level = max(1, int(level))
    quad = radial_quadrature(
        dim, r_max, r_min=r_min, order=8 * level, max_panel_width=max_panel_width
    )
    radial_w = quad.weights / sphere_area(dim)
    dirs, dw = sphere_rule(dim, level)
    points = (quad.nodes[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
    weights = np.outer(radial_w, dw).ravel()
    return points, weights


def integrate_nonradial(
    f,
    dim: int,
    r_max: float,
    level: int = 2,
    r_min: float = 1e-9,
    return_error: bool = False,
):
    """Integrate ``f`` (taking points of shape ``(n, dim)``) over the ball of radius ``r_max``.

    The radial factor uses the same geometric refinement as ``radial_quadrature``
    with order ``8 * level``; ``level`` also sets the angular resolution.
    """

    def run(lv):
        pts, wts = spherical_product_rule(dim, r_max, lv, r_min)
        vals = np.asarray(f(pts), dtype=float)
        bad = ~np.isfinite(vals)
        if np.any(bad):
            r = float(np.linalg.norm(pts[np.flatnonzero(bad)[0]]))
            raise IntegrandError(f"integrand is not finite at radius {r:.6g}", radius=r)
        return float(np.dot(wts, vals))

    value = run(level)
    if not return_error:
        return value
    coarse = run(max(1, level // 2)) if level > 1 else value
    err = abs(value - coarse) if level > 1 else abs(value) * 1e-8
    return value, max(err, 1e-14 * abs(value))


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-12, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15 * tol:
            return left + right + delta / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth - 1
        )

    if a == b:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def radial_fourier_factor(dim: int, z):
    """``Gamma(nu+1) (2/z)^nu J_nu(z)`` with ``nu = dim/2 - 1``; equals 1 at z=0.

    The Fourier transform of a radial function ``b(|x|)`` in R^dim is
    ``|S^{dim-1}| int b(r) r^{dim-1} Lambda(2 pi rho r) dr``.
    """
    z = np.asarray(z, dtype=float)
    if dim == 1:
        return np.cos(z)
    if dim == 3:
        return np.sinc(z / math.pi)
    nu = dim / 2.0 - 1.0
    out = np.ones_like(z)
    nz = z > 1e-8
    zz = z[nz]
    out[nz] = special.gamma(nu + 1) * (2.0 / zz) ** nu * special.jv(nu, zz)
    return out


def one_minus_radial_factor(dim: int, z):
    """``1 - radial_fourier_factor(dim, z)`` without cancellation near z=0."""
    z = np.asarray(z, dtype=float)
    if dim == 1:
        return 2.0 * np.sin(0.5 * z) ** 2
    nu = dim / 2.0 - 1.0
    out = np.empty_like(z)
    small = z < 1.0
    zs = z[small]
    term = np.ones_like(zs)
    acc = np.zeros_like(zs)
    q = -0.25 * zs**2
    for k in range(1, 16):
        term = term * q / (k * (nu + k))
        acc += term
    out[small] = -acc
    out[~small] = 1.0 - radial_fourier_factor(dim, z[~small])
    return out


def collocation_integration_matrix(nodes, a: float):
    """Matrix ``S`` with ``(S @ f(nodes))[j] ~= int_a^{nodes[j]} f``.

    Integrates the Lagrange interpolant of ``f`` through ``nodes`` exactly.
    """
    nodes = np.asarray(nodes, dtype=float)
    m = nodes.size
    center = 0.5 * (nodes[0] + nodes[-1]) if m > 1 else nodes[0]
    scale = 0.5 * (nodes[-1] - nodes[0]) if m > 1 else 1.0
    t = (nodes - center) / scale
    ta = (a - center) / scale
    leg = np.polynomial.legendre
    vander = leg.legvander(t, m - 1)
    anti = np.empty((m, m))
    for k in range(m):
        coef = leg.legint(np.eye(m)[k])
        anti[:, k] = leg.legval(t, coef) - leg.legval(ta, coef)
    return scale * np.linalg.solve(vander.T, anti.T).T
