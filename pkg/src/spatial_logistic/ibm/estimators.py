"""Moment estimators across independent replicates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import special_math as sm
from ..kernels import ModelParams
from .simulator import ReplicateResult, check_inputs, run_many


def mean_and_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()) if v.size else math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def shell_volumes(dim: int, edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    return sm.ball_volume(dim, 1.0) * (edges[1:] ** dim - edges[:-1] ** dim)


@dataclass
class MomentEstimate:
    """Density and binned pair correlation with replicate standard errors."""

    t: float
    eps: float
    side: float
    replicates: int
    density: float
    density_se: float
    bin_edges: np.ndarray
    pair_correlation: np.ndarray
    pair_correlation_se: np.ndarray
    extinct: int
    surviving_density: float = math.nan
    surviving_density_se: float = math.nan
    per_replicate_density: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def extinction_dominated(self) -> bool:
        return self.extinct == self.replicates

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "eps": self.eps,
            "side": self.side,
            "replicates": self.replicates,
            "density": self.density,
            "density_se": self.density_se,
            "extinct_replicates": self.extinct,
            "extinction_dominated": self.extinction_dominated,
            "surviving_density": self.surviving_density,
            "surviving_density_se": self.surviving_density_se,
            "bin_edges": self.bin_edges.tolist(),
            "pair_correlation": self.pair_correlation.tolist(),
            "pair_correlation_se": self.pair_correlation_se.tolist(),
        }


def summarize(results: list[ReplicateResult], dim: int, side: float, eps: float, edges) -> MomentEstimate:
    vol = side**dim
    dens = np.array([r.count / vol for r in results])
    k2 = np.array([r.pair_counts / (vol * shell_volumes(dim, edges)) for r in results])
    mean, se = mean_and_se(dens)
    alive = dens[[not r.extinct for r in results]]
    s_mean, s_se = mean_and_se(alive) if alive.size else (math.nan, math.nan)
    k2_mean = k2.mean(axis=0)
    k2_se = k2.std(axis=0, ddof=1) / math.sqrt(len(results)) if len(results) > 1 else np.full_like(k2_mean, math.nan)
    return MomentEstimate(
        t=results[0].t,
        eps=eps,
        side=side,
        replicates=len(results),
        density=mean,
        density_se=se,
        bin_edges=np.asarray(edges, dtype=float),
        pair_correlation=k2_mean,
        pair_correlation_se=k2_se,
        extinct=sum(r.extinct for r in results),
        surviving_density=s_mean,
        surviving_density_se=s_se,
        per_replicate_density=dens,
    )


def default_edges(params: ModelParams, eps: float, side: float, n_bins: int = 20) -> np.ndarray:
    reach = 3 * max(
        math.sqrt(float(np.trace(k.second_moment_matrix)) / (k.dim * k.mass)) for k in (params.a_plus, params.a_minus)
    ) / eps
    return np.linspace(0.0, min(0.5 * side, reach), n_bins + 1)


def run_replicates(
    params: ModelParams,
    eps: float,
    side: float,
    t_end: float,
    n_replicates: int,
    seed: int,
    q0: float | None = None,
    edges=None,
    workers: int = 1,
    return_results: bool = False,
    record_every: float | None = None,
    keep_positions: bool = False,
):
    """Simulate ``n_replicates`` independent Poisson(q0) starts to ``t_end`` and estimate moments.

    ``q0`` defaults to ``q*/2``.
    """
    check_inputs(params, eps, side, t_end, n_replicates)
    if q0 is None:
        q0 = 0.5 * params.q_star if params.q_star > 0 else 0.5
    if edges is None:
        edges = default_edges(params, eps, side)
    edges = np.asarray(edges, dtype=float)
    results = run_many(params, eps, side, t_end, q0, seed, n_replicates, edges, record_every, keep_positions, workers)
    est = summarize(results, params.dim, side, eps, edges)
    return (est, results) if return_results else est


def interval_overlap(u, box1, box2) -> np.ndarray:
    """``|box1 ∩ (box2 - u)|`` for 1-D intervals ``(a, b)``."""
    u = np.asarray(u, dtype=float)
    lo = np.maximum(box1[0], box2[0] - u)
    hi = np.minimum(box1[1], box2[1] - u)
    return np.clip(hi - lo, 0.0, None)


def box_pair_statistics(positions, side: float, box1, box2):
    """Counts product ``N1 N2`` and its translation-averaged estimate for two 1-D boxes.

    The second statistic is ``(1/L) sum_{x != y} |box1 ∩ (box2 - (y - x))|`` over
    minimum-image pair displacements; both estimate ``int_{B1} int_{B2} k2``.
    """
    x = np.asarray(positions, dtype=float).reshape(-1)
    n1 = np.count_nonzero((x >= box1[0]) & (x < box1[1]))
    n2 = np.count_nonzero((x >= box2[0]) & (x < box2[1]))
    d = x[None, :] - x[:, None]
    d = d - side * np.round(d / side)
    np.fill_diagonal(d, np.inf)
    averaged = float(np.sum(interval_overlap(d[np.isfinite(d)], box1, box2))) / side
    return float(n1 * n2), averaged, float(n1), float(n2)
