"""Dispersal and competition kernels.

A :class:`Kernel` bundles a nonnegative even function on R^d with its
Fourier transform under the convention ``fhat(xi) = int f(x) exp(-2 pi i x.xi) dx``,
its total mass and its second-moment matrix. Radial kernels additionally
carry 1-D profiles so that spectral integrals can use radial quadrature.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import special
from scipy.stats import qmc

from . import special_math as sm
from .errors import (
    AssumptionViolationError,
    InvalidKernelError,
    InvalidParameterError,
)

TOL_A3 = 1e-12
A3_SAMPLE_SIZE = 4096
TRUNCATION_MASS = 1e-8  # relative tail mass at the effective radius
SPECTRAL_TAIL_RTOL = 1e-10


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to an array whose last axis has length ``dim``.

    For ``dim == 1`` a bare array of scalars is accepted.
    """
    arr = np.asarray(x, dtype=float)
    if dim == 1:
        if arr.ndim >= 2 and arr.shape[-1] == 1:
            return arr
        return arr[..., None]
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise InvalidParameterError(f"expected points with trailing axis {dim}, got {arr.shape}")
    return arr


def _norm(x, dim):
    return np.sqrt(np.sum(as_points(x, dim) ** 2, axis=-1))


@dataclass(frozen=True)
class Kernel:
    """An even, nonnegative, integrable kernel on R^d.

    ``evaluate``, ``fourier`` and ``deficit`` take points with trailing axis
    ``dim`` (bare scalars for ``dim == 1``). ``deficit(xi)`` is
    ``mass - fourier(xi)`` computed without cancellation near the origin.
    For radial kernels ``profile``, ``fourier_profile`` and
    ``deficit_profile`` are the same maps as functions of the radius.
    """

    dim: int
    evaluate: Callable
    fourier: Callable
    deficit: Callable
    mass: float
    second_moment_matrix: np.ndarray
    is_radial: bool
    fourier_kind: str
    tail_bound: Callable[[float], float]
    effective_radius: float
    sampler: Callable | None = None
    profile: Callable | None = None
    fourier_profile: Callable | None = None
    deficit_profile: Callable | None = None
    label: str = "kernel"
    recipe: tuple = field(default=(), compare=False)
    max_frequency: float = math.inf

    def spectral_cutoff(self, rtol: float = SPECTRAL_TAIL_RTOL) -> float:
        """Smallest doubling-then-bisected radius R with tail_bound(R) < rtol * mass.

        Capped at ``max_frequency``, the resolution limit of quadrature-based transforms.
        """
        target = rtol * self.mass
        r = 0.25 / self.effective_radius
        for _ in range(80):
            if self.tail_bound(r) < target:
                break
            if r >= self.max_frequency:
                return self.max_frequency
            r *= 2.0
        else:
            return math.inf
        lo = r / 2.0
        for _ in range(20):
            mid = 0.5 * (lo + r)
            if self.tail_bound(mid) < target:
                r = mid
            else:
                lo = mid
        return min(r, self.max_frequency)

    def second_moment_trace(self) -> float:
        """``int |x|^2 a(x) dx``."""
        return float(np.trace(self.second_moment_matrix))


# ----------------------------------------------------------------- Gaussian


def make_gaussian_kernel(dim: int, sigma: float, mass: float = 1.0) -> Kernel:
    """Isotropic Gaussian kernel ``mass * N(0, sigma^2 I)`` in R^dim."""
    if int(dim) != dim or dim < 1:
        raise InvalidParameterError("dim must be a positive integer")
    if not (sigma > 0 and np.isfinite(sigma)):
        raise InvalidParameterError("sigma must be positive")
    if not (mass > 0 and np.isfinite(mass)):
        raise InvalidParameterError("mass must be positive")
    dim, sigma, mass = int(dim), float(sigma), float(mass)
    norm = mass * (2 * math.pi * sigma**2) ** (-dim / 2)
    alpha = 2 * math.pi**2 * sigma**2

    def profile(r):
        r = np.asarray(r, dtype=float)
        return norm * np.exp(-(r**2) / (2 * sigma**2))

    def fourier_profile(rho):
        rho = np.asarray(rho, dtype=float)
        return mass * np.exp(-alpha * rho**2)

    def deficit_profile(rho):
        rho = np.asarray(rho, dtype=float)
        return -mass * np.expm1(-alpha * rho**2)

    def tail_bound(radius):
        if radius <= 0:
            return mass
        return float(
            mass * (2 * math.pi * sigma**2) ** (-dim / 2) * special.gammaincc(dim / 2, alpha * radius**2)
        )

    def sampler(rng, n):
        return sigma * rng.standard_normal((n, dim))

    eff = sigma * math.sqrt(2 * special.gammainccinv(dim / 2, TRUNCATION_MASS))
    return Kernel(
        dim=dim,
        evaluate=lambda x: profile(_norm(x, dim)),
        fourier=lambda xi: fourier_profile(_norm(xi, dim)),
        deficit=lambda xi: deficit_profile(_norm(xi, dim)),
        mass=mass,
        second_moment_matrix=mass * sigma**2 * np.eye(dim),
        is_radial=True,
        fourier_kind="analytic",
        tail_bound=tail_bound,
        effective_radius=eff,
        sampler=sampler,
        profile=profile,
        fourier_profile=fourier_profile,
        deficit_profile=deficit_profile,
        label=f"gaussian(sigma={sigma:g}, mass={mass:g})",
        recipe=("gaussian", dim, sigma, mass),
    )


# ------------------------------------------------------------------ numeric


def _probe_points(dim, radius, n=256):
    u = qmc.Sobol(dim, scramble=False).random(n)
    pts = (2 * u - 1) * radius
    pts[0] = 0.0
    return pts


def _chunked_sum(freqs, nodes, weights_times_values, fn, max_entries=4_000_000):
    """``out[k] = sum_j wv[j] * fn(freqs[k] . nodes[j])`` in memory-bounded chunks."""
    out = np.empty(freqs.shape[0])
    step = max(1, max_entries // max(1, nodes.shape[0]))
    for start in range(0, freqs.shape[0], step):
        block = freqs[start : start + step]
        phase = block @ nodes.T
        out[start : start + step] = fn(phase) @ weights_times_values
    return out


class _NumericTail:
    """Estimate of ``int_{|xi|>R} |ahat(xi)| dxi`` for quadrature-based kernels.

    |ahat| is sampled (spherically averaged) on a radial grid up to
    ``rho_far``; beyond it the decay of the last dyadic shells is extrapolated
    geometrically. Shells that fail to shrink give an infinite bound.
    """

    def __init__(self, abs_fourier_avg, dim, support, mass, rho_far_factor=256.0, order=8, resolved=math.inf):
        self._f = abs_fourier_avg
        self.dim = dim
        self.mass = mass
        self.rho_far = min(rho_far_factor / support, resolved)
        self.width = 0.25 / support
        self.order = order
        self._table = None

    def _build(self):
        n_panels = int(math.ceil(self.rho_far / self.width))
        edges = np.linspace(0.0, self.rho_far, n_panels + 1)
        rho, w = sm.panel_rule(edges, self.order)
        vals = self._f(rho) * sm.sphere_area(self.dim) * rho ** (self.dim - 1) * w
        per_panel = vals.reshape(n_panels, self.order).sum(axis=1)
        # cumulative integral from each edge to rho_far
        tail = np.concatenate([np.cumsum(per_panel[::-1])[::-1], [0.0]])

        def shell(a, b):
            ia, ib = np.searchsorted(edges, [a, b])
            return float(per_panel[ia:ib].sum())

        s1 = shell(self.rho_far / 4, self.rho_far / 2)
        s2 = shell(self.rho_far / 2, self.rho_far)
        r = 1.0
        if s2 <= 1e-12 * self.mass:
            extra = s2
        elif s1 > 0 and s2 / s1 < 0.9:
            r = s2 / s1
            extra = s2 * r / (1 - r)
        else:
            extra = math.inf
        self._table = (edges, tail, extra, r)

    def __call__(self, radius):
        if self._table is None:
            self._build()
        edges, tail, extra, r = self._table
        if radius >= self.rho_far:
            # each further doubling shrinks the tail by the last shell ratio
            return extra * r ** math.log2(radius / self.rho_far)
        return float(np.interp(radius, edges, tail) + extra)


def make_numeric_kernel(
    dim: int,
    evaluate: Callable,
    support_radius: float,
    is_radial: bool = False,
    order: int = 16,
    panels: int | None = None,
    label: str = "numeric",
    recipe: tuple = (),
) -> Kernel:
    """Kernel whose transform, mass and moments come from Gauss-Legendre quadrature.

    ``evaluate`` receives points of shape ``(n, dim)`` and must vanish
    outside ``|x| <= support_radius``. Radial kernels (declared, not detected)
    use a 1-D Hankel-type quadrature; otherwise a tensor-product rule over
    ``[-R, R]^dim`` is used.

    Raises
    ------
    InvalidKernelError
        Negative or non-finite values on the probe set.
    AssumptionViolationError
        ``a(x) != a(-x)`` on the probe set.
    """
    if int(dim) != dim or dim < 1:
        raise InvalidParameterError("dim must be a positive integer")
    if not support_radius > 0:
        raise InvalidParameterError("support_radius must be positive")
    dim = int(dim)
    R = float(support_radius)

    def ev(points):
        return np.asarray(evaluate(np.asarray(points, dtype=float)), dtype=float)

    probe = _probe_points(dim, R)
    vp = ev(probe)
    vm = ev(-probe)
    if not (np.all(np.isfinite(vp)) and np.all(np.isfinite(vm))):
        raise InvalidKernelError("kernel is not finite on the probe set")
    if np.any(vp < 0) or np.any(vm < 0):
        raise InvalidKernelError("kernel takes negative values")
    scale = max(1.0, float(np.max(vp)))
    if np.max(np.abs(vp - vm)) > 1e-12 * scale:
        raise AssumptionViolationError("kernel is not even: a(x) != a(-x) on the probe set")

    if is_radial:
        n_panels = panels or 64
        r, w = sm.panel_rule(np.linspace(0.0, R, n_panels + 1), order)
        e1 = np.zeros((r.size, dim))
        e1[:, 0] = r
        b = ev(e1)
        area = sm.sphere_area(dim)
        radial_w = area * w * r ** (dim - 1) * b
        mass = float(radial_w.sum())
        m2 = float(np.dot(radial_w, r**2)) / dim
        second = m2 * np.eye(dim)

        def profile(rr):
            rr = np.asarray(rr, dtype=float)
            pts = np.zeros(rr.shape + (dim,))
            pts[..., 0] = rr
            flat = ev(pts.reshape(-1, dim))
            return flat.reshape(rr.shape)

        def _radial_transform(rho, fn):
            rho = np.asarray(rho, dtype=float)
            flat = rho.reshape(-1, 1)
            out = _chunked_sum(flat, r[:, None], radial_w, lambda ph: fn(dim, 2 * math.pi * ph))
            return out.reshape(rho.shape)

        def fourier_profile(rho):
            return _radial_transform(rho, sm.radial_fourier_factor)

        def deficit_profile(rho):
            return _radial_transform(rho, sm.one_minus_radial_factor)

        fourier = lambda xi: fourier_profile(_norm(xi, dim))  # noqa: E731
        deficit = lambda xi: deficit_profile(_norm(xi, dim))  # noqa: E731
        evaluate_k = lambda x: profile(_norm(x, dim))  # noqa: E731
        resolved = order * n_panels / (2 * math.pi * R)
        tail = _NumericTail(lambda rho: np.abs(fourier_profile(rho)), dim, R, mass, resolved=resolved)

        # inverse-CDF radius table for birth displacements
        grid = np.linspace(0.0, R, 4097)
        dens = profile(grid) * grid ** (dim - 1)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        cdf /= cdf[-1]

        def sampler(rng, n):
            radii = np.interp(rng.random(n), cdf, grid)
            if dim == 1:
                return (radii * np.where(rng.random(n) < 0.5, -1.0, 1.0))[:, None]
            v = rng.standard_normal((n, dim))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            return radii[:, None] * v

        extra = dict(profile=profile, fourier_profile=fourier_profile, deficit_profile=deficit_profile)
    else:
        n_panels = panels or {1: 64, 2: 16, 3: 6}.get(dim, 4)
        o = order if dim == 1 else min(order, {2: 12, 3: 8}.get(dim, 6))
        x1, w1 = sm.panel_rule(np.linspace(-R, R, n_panels + 1), o)
        mesh = np.meshgrid(*([x1] * dim), indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        wmesh = np.meshgrid(*([w1] * dim), indexing="ij")
        weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
        vals = ev(nodes)
        wv = weights * vals
        mass = float(wv.sum())
        second = np.einsum("n,ni,nj->ij", wv, nodes, nodes)
        second = 0.5 * (second + second.T)

        def fourier(xi):
            pts = as_points(xi, dim)
            flat = pts.reshape(-1, dim)
            out = _chunked_sum(flat, nodes, wv, lambda ph: np.cos(2 * math.pi * ph))
            return out.reshape(pts.shape[:-1])

        def deficit(xi):
            pts = as_points(xi, dim)
            flat = pts.reshape(-1, dim)
            out = _chunked_sum(flat, nodes, wv, lambda ph: 2 * np.sin(math.pi * ph) ** 2)
            return out.reshape(pts.shape[:-1])

        def evaluate_k(x):
            pts = as_points(x, dim)
            return ev(pts.reshape(-1, dim)).reshape(pts.shape[:-1])

        dirs, dw = sm.sphere_rule(dim, 1)
        dw = dw / dw.sum()

        def abs_avg(rho):
            pts = (np.asarray(rho)[:, None, None] * dirs[None]).reshape(-1, dim)
            return (np.abs(fourier(pts)).reshape(len(rho), -1) * dw).sum(axis=1)

        far = 256.0 if dim == 1 else 32.0
        resolved = o * n_panels / (4 * math.pi * R)
        tail = _NumericTail(abs_avg, dim, R, mass, rho_far_factor=far, resolved=resolved)
        bound = 1.05 * float(np.max(vals))

        def sampler(rng, n):
            out = np.empty((0, dim))
            while out.shape[0] < n:
                cand = (2 * rng.random((2 * n, dim)) - 1) * R
                keep = rng.random(2 * n) * bound < ev(cand)
                out = np.vstack([out, cand[keep]])
            return out[:n]

        extra = {}

    if not mass > 0:
        raise InvalidKernelError("kernel has zero mass")
    return Kernel(
        dim=dim,
        evaluate=evaluate_k,
        fourier=fourier,
        deficit=deficit,
        mass=mass,
        second_moment_matrix=second,
        is_radial=bool(is_radial),
        fourier_kind="numeric",
        tail_bound=tail,
        effective_radius=R,
        sampler=sampler,
        label=label,
        recipe=recipe,
        max_frequency=resolved,
        **extra,
    )


def make_bump_kernel(dim: int, radius: float = 1.0, mass: float = 1.0) -> Kernel:
    """Smooth compactly supported bump ``c * exp(-1 / (1 - |x/radius|^2))``."""
    if not (radius > 0 and mass > 0):
        raise InvalidParameterError("radius and mass must be positive")

    def shape(points):
        s = np.sum(np.asarray(points) ** 2, axis=-1) / radius**2
        out = np.zeros_like(s)
        inside = s < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - s[inside]))
        return out

    raw = make_numeric_kernel(dim, shape, radius, is_radial=True)
    c = mass / raw.mass
    return make_numeric_kernel(
        dim,
        lambda p: c * shape(p),
        radius,
        is_radial=True,
        label=f"bump(radius={radius:g}, mass={mass:g})",
        recipe=("bump", dim, float(radius), float(mass)),
    )


def read_kernel_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column CSV ``x, a(x)`` (header optional)."""
    xs, ys = [], []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except ValueError:
                if xs:
                    raise InvalidKernelError(f"malformed row in kernel table: {row}")
    if len(xs) < 2:
        raise InvalidKernelError("kernel table needs at least two rows")
    order = np.argsort(xs)
    return np.asarray(xs)[order], np.asarray(ys)[order]


def make_table_kernel(x, values, mass: float | None = None) -> Kernel:
    """1-D kernel from samples, linearly interpolated and symmetrised."""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise InvalidKernelError("kernel table has negative values")
    support = float(np.max(np.abs(x)))

    def sym(points):
        p = np.asarray(points)[..., 0]
        left = np.interp(p, x, values, left=0.0, right=0.0)
        right = np.interp(-p, x, values, left=0.0, right=0.0)
        return 0.5 * (left + right)

    k = make_numeric_kernel(1, sym, support, is_radial=True, label="custom-table")
    if mass is None:
        return replace(k, recipe=("custom-table", tuple(x), tuple(values), None))
    c = mass / k.mass
    return make_numeric_kernel(
        1,
        lambda p: c * sym(p),
        support,
        is_radial=True,
        label="custom-table",
        recipe=("custom-table", tuple(x), tuple(values), float(mass)),
    )


# ------------------------------------------------------------------ scaling


def scale_kernel(k: Kernel, eps: float) -> Kernel:
    """The kernel ``a_eps(x) = eps^d a(eps x)``; mass is preserved."""
    if not (eps > 0 and np.isfinite(eps)):
        raise InvalidParameterError("eps must be positive")
    if eps == 1.0:
        return k
    d = k.dim
    f = eps**d

    def scaled(fn):
        return lambda x: f * fn(np.asarray(x, dtype=float) * eps)

    def stretched(fn):
        return lambda xi: fn(np.asarray(xi, dtype=float) / eps)

    def tail(radius):
        return f * k.tail_bound(radius / eps)

    sampler = None
    if k.sampler is not None:
        base = k.sampler
        sampler = lambda rng, n: base(rng, n) / eps  # noqa: E731

    return replace(
        k,
        evaluate=scaled(k.evaluate),
        fourier=stretched(k.fourier),
        deficit=stretched(k.deficit),
        second_moment_matrix=k.second_moment_matrix / eps**2,
        tail_bound=tail,
        effective_radius=k.effective_radius / eps,
        sampler=sampler,
        profile=scaled(k.profile) if k.profile is not None else None,
        fourier_profile=stretched(k.fourier_profile) if k.fourier_profile is not None else None,
        deficit_profile=stretched(k.deficit_profile) if k.deficit_profile is not None else None,
        label=f"{k.label} scaled by eps={eps:g}",
        recipe=("scaled", k.recipe, float(eps)) if k.recipe else (),
        max_frequency=k.max_frequency / eps,
    )


def kernel_from_recipe(recipe: tuple) -> Kernel:
    """Rebuild a kernel from its ``recipe`` (used to ship kernels to worker processes)."""
    kind = recipe[0]
    if kind == "gaussian":
        return make_gaussian_kernel(*recipe[1:])
    if kind == "bump":
        return make_bump_kernel(*recipe[1:])
    if kind == "custom-table":
        return make_table_kernel(np.array(recipe[1]), np.array(recipe[2]), recipe[3])
    if kind == "scaled":
        return scale_kernel(kernel_from_recipe(recipe[1]), recipe[2])
    raise InvalidParameterError(f"unknown kernel recipe {kind!r}")


# ------------------------------------------------------------ model params


@dataclass(frozen=True)
class ModelParams:
    """Dispersal kernel ``a_plus``, competition kernel ``a_minus`` and mortality ``m``."""

    a_plus: Kernel
    a_minus: Kernel
    mortality: float

    def __post_init__(self):
        if self.a_plus.dim != self.a_minus.dim:
            raise InvalidParameterError("kernels must live in the same dimension")
        if not (self.mortality > 0 and np.isfinite(self.mortality)):
            raise InvalidParameterError("mortality must be positive")

    @property
    def dim(self) -> int:
        return self.a_plus.dim

    @property
    def kappa_plus(self) -> float:
        return self.a_plus.mass

    @property
    def kappa_minus(self) -> float:
        return self.a_minus.mass

    @property
    def q_star(self) -> float:
        """Positive mean-field equilibrium ``(kappa+ - m) / kappa-`` (may be <= 0 if A2 fails)."""
        return (self.kappa_plus - self.mortality) / self.kappa_minus

    @property
    def radial(self) -> bool:
        return self.a_plus.is_radial and self.a_minus.is_radial

    def with_mortality(self, m: float) -> "ModelParams":
        return replace(self, mortality=m)

    def j_star(self, x):
        return self.a_plus.evaluate(x) - self.q_star * self.a_minus.evaluate(x)

    def j_hat(self, xi, q: float):
        """Fourier transform of ``a+ - q a-``."""
        return self.a_plus.fourier(xi) - q * self.a_minus.fourier(xi)

    def j_star_hat(self, xi):
        return self.j_hat(xi, self.q_star)

    def gap(self, xi, q: float):
        """``kappa+ - (a+ - q a-)^(xi)``, evaluated without cancellation."""
        return self.a_plus.deficit(xi) + q * self.a_minus.fourier(xi)

    def spectral_cutoff(self, rtol: float = SPECTRAL_TAIL_RTOL) -> float:
        return max(self.a_plus.spectral_cutoff(rtol), self.a_minus.spectral_cutoff(rtol))

    @property
    def recipe(self):
        if not (self.a_plus.recipe and self.a_minus.recipe):
            return None
        return (self.a_plus.recipe, self.a_minus.recipe, float(self.mortality))

    @classmethod
    def from_recipe(cls, recipe) -> "ModelParams":
        return cls(kernel_from_recipe(recipe[0]), kernel_from_recipe(recipe[1]), recipe[2])


def validation_sample(params: ModelParams, n: int = A3_SAMPLE_SIZE) -> np.ndarray:
    """Deterministic Sobol sample of the joint effective support, origin included."""
    d = params.dim
    radius = max(params.a_plus.effective_radius, params.a_minus.effective_radius)
    u = qmc.Sobol(d, scramble=False).random(n)
    pts = (2 * u - 1) * radius
    pts[0] = 0.0
    return pts


def competition_ceiling(params: ModelParams, tol: float = TOL_A3, sample=None) -> float:
    """Largest ``q`` with ``a+(x) - q a-(x) >= -tol`` on the validation sample."""
    pts = validation_sample(params) if sample is None else sample
    ap = params.a_plus.evaluate(pts)
    am = params.a_minus.evaluate(pts)
    pos = am > 0
    if not np.any(pos):
        return math.inf
    return float(np.min((ap[pos] + tol) / am[pos]))


@dataclass
class AssumptionCheck:
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ValidationReport:
    """Pass/fail and worst-case margin for each kernel assumption."""

    checks: dict[str, AssumptionCheck]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {
            name: {"passed": c.passed, "margin": c.margin, "detail": c.detail}
            for name, c in self.checks.items()
        }


def _evenness_gap(k: Kernel) -> float:
    pts = _probe_points(k.dim, k.effective_radius)
    vp = k.evaluate(pts)
    vm = k.evaluate(-pts)
    return float(np.max(np.abs(vp - vm)))


def validate_assumptions(params: ModelParams, tol_a3: float = TOL_A3) -> ValidationReport:
    """Check (A1)-(A4) and the spectral gap; failures are reported, never raised."""
    checks: dict[str, AssumptionCheck] = {}
    kp, km, m = params.kappa_plus, params.kappa_minus, params.mortality

    # A1: even, bounded, integrable transform
    gaps, tails, maxes = [], [], []
    for k in (params.a_plus, params.a_minus):
        gaps.append(_evenness_gap(k))
        maxes.append(float(np.max(k.evaluate(_probe_points(k.dim, k.effective_radius)))))
        cut = k.spectral_cutoff(1e-6)
        tails.append(k.tail_bound(cut) / k.mass if np.isfinite(cut) else math.inf)
    even = max(gaps) <= 1e-12 * max(1.0, max(maxes))
    bounded = all(np.isfinite(maxes))
    integrable = all(np.isfinite(t) for t in tails)
    checks["A1"] = AssumptionCheck(
        even and bounded and integrable,
        0.0 - max(gaps) + 0.0,
        f"evenness gap {max(gaps):.3g}, sup {max(maxes):.6g}, "
        f"relative spectral tail {max(tails):.3g}",
    )

    # A2
    checks["A2"] = AssumptionCheck(kp > m, kp - m, f"kappa+ - m = {kp - m:.6g}")

    # A3
    pts = validation_sample(params)
    q = params.q_star
    jvals = params.a_plus.evaluate(pts) - q * params.a_minus.evaluate(pts)
    worst = int(np.argmin(jvals))
    margin = float(jvals[worst])
    checks["A3"] = AssumptionCheck(
        margin >= -tol_a3,
        margin,
        f"min J* = {margin:.6g} at x = {np.array2string(pts[worst], precision=4)}",
    )

    # A4: finite, positive-definite second moments
    eig = min(
        float(np.min(np.linalg.eigvalsh(k.second_moment_matrix))) for k in (params.a_plus, params.a_minus)
    )
    finite = all(np.all(np.isfinite(k.second_moment_matrix)) for k in (params.a_plus, params.a_minus))
    checks["A4"] = AssumptionCheck(finite and eig > 0, eig, f"min eigenvalue {eig:.6g}")

    # spectral gap kappa+ - J*^(xi) >= kappa+ - m
    cut = params.spectral_cutoff(1e-8)
    if not np.isfinite(cut):
        cut = 64.0 / min(params.a_plus.effective_radius, params.a_minus.effective_radius)
    if params.radial:
        quad = sm.radial_quadrature(params.dim, cut, r_min=1e-6, order=8, max_panel_width=cut / 64)
        rho = np.concatenate([[0.0], quad.nodes])
        if params.dim == 1:
            xi = rho
        else:
            xi = np.zeros((rho.size, params.dim))
            xi[:, 0] = rho
    else:
        xi, _ = sm.spherical_product_rule(params.dim, cut, level=1, r_min=1e-6, max_panel_width=cut / 32)
        xi = np.vstack([np.zeros((1, params.dim)), xi])
    gapvals = params.gap(xi, q)
    gmin = float(np.min(gapvals))
    checks["posFT"] = AssumptionCheck(
        kp - m > 0 and gmin >= (kp - m) - 1e-12 * kp,
        gmin,
        f"min kappa+ - J*^ = {gmin:.6g} vs kappa+ - m = {kp - m:.6g}",
    )
    return ValidationReport(checks)
