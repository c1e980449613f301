"""Exact (Gillespie) simulation of the spatial birth-death dynamics on a torus."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..errors import InvalidParameterError
from ..kernels import ModelParams, scale_kernel
from .configuration import PointConfiguration

MASK64 = (1 << 64) - 1


class Event(NamedTuple):
    t: float
    kind: str  # "birth" or "death"
    index: int
    position: tuple


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, replicate)``."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & MASK64, int(replicate) & MASK64]))


def scaled_params(params: ModelParams, eps: float) -> ModelParams:
    return ModelParams(scale_kernel(params.a_plus, eps), scale_kernel(params.a_minus, eps), params.mortality)


def step_gillespie(
    cfg: PointConfiguration,
    params_eps: ModelParams,
    rng: np.random.Generator,
    t: float,
    t_stop: float = math.inf,
):
    """Apply one birth or death; returns ``(t_new, event)``.

    The total rate is ``n kappa+ + sum_x (m + sum_y a-(x - y))``; births
    pick a uniform parent and a displacement drawn from ``a+ / kappa+``.
    Returns ``(t, None)`` for an empty configuration and ``(t_stop, None)``
    when the next event would fall after ``t_stop`` (no change is applied).
    """
    n = cfg.n
    if n == 0:
        return t, None
    kp = params_eps.kappa_plus
    births = kp * n
    cum = np.cumsum(cfg.death_rates)
    total = births + cum[-1]
    t_new = t + rng.exponential(1.0 / total)
    if t_new > t_stop:
        return t_stop, None
    u = rng.random() * total
    if u < births:
        parent = min(int(u / kp), n - 1)
        x = cfg.positions[parent] + params_eps.a_plus.sampler(rng, 1)[0]
        i = cfg.add(x)
        return t_new, Event(t_new, "birth", i, tuple(cfg.positions[i]))
    i = min(int(np.searchsorted(cum, u - births, side="right")), n - 1)
    x = cfg.remove(i)
    return t_new, Event(t_new, "death", i, tuple(x))


@dataclass
class ReplicateResult:
    replicate: int
    t: float
    count: int
    extinct: bool
    events: int
    pair_counts: np.ndarray
    trajectory: list = field(default_factory=list)
    positions: np.ndarray | None = None


class Simulator:
    """One replicate: configuration, scaled kernels, clock and RNG."""

    def __init__(self, params: ModelParams, eps: float, side: float, rng: np.random.Generator, cutoff=None):
        self.params_eps = scaled_params(params, eps)
        self.cfg = PointConfiguration(
            params.dim, side, self.params_eps.a_minus, params.mortality, cutoff=cutoff
        )
        self.rng = rng
        self.t = 0.0
        self.events = 0

    def seed_poisson(self, intensity: float) -> None:
        """Poisson(intensity) initial state, uniform on the torus."""
        d, L = self.cfg.dim, self.cfg.side
        n = self.rng.poisson(intensity * L**d)
        self.cfg.add_many(self.rng.random((n, d)) * L)

    def step(self):
        self.t, ev = step_gillespie(self.cfg, self.params_eps, self.rng, self.t)
        if ev is not None:
            self.events += 1
        return ev

    def run_until(self, t_end: float, record_every: float | None = None, resync_every: int = 100_000):
        """Advance the clock to ``t_end``; returns ``[(t, population)]`` every ``record_every``.

        The event that would cross ``t_end`` is discarded, which is exact by memorylessness.
        """
        traj = []
        next_rec = self.t if record_every else math.inf
        while True:
            n_before = self.cfg.n
            t_next, ev = step_gillespie(self.cfg, self.params_eps, self.rng, self.t, t_stop=t_end)
            if ev is None:
                t_next = t_end
            while next_rec < t_next or (ev is None and next_rec <= t_end):
                traj.append((next_rec, n_before))
                next_rec += record_every
            self.t = t_next
            if ev is None:
                return traj
            self.events += 1
            if self.events % resync_every == 0:
                self.cfg.resync()


def pair_distance_counts(cfg: PointConfiguration, edges: np.ndarray) -> np.ndarray:
    """Ordered-pair counts by minimum-image distance, binned by ``edges``."""
    pos = cfg.positions
    counts = np.zeros(edges.size - 1)
    r_max = edges[-1]
    for i in range(cfg.n):
        disp = cfg.displacement(pos[i], pos[i + 1 :])
        r = np.sqrt(np.einsum("ij,ij->i", disp, disp))
        counts += np.histogram(r[r < r_max], bins=edges)[0]
    return 2 * counts


def run_single(
    params: ModelParams,
    eps: float,
    side: float,
    t_end: float,
    q0: float,
    seed: int,
    replicate: int,
    edges: np.ndarray,
    record_every: float | None = None,
    keep_positions: bool = False,
) -> ReplicateResult:
    rng = replicate_rng(seed, replicate)
    sim = Simulator(params, eps, side, rng)
    sim.seed_poisson(q0)
    traj = sim.run_until(t_end, record_every=record_every)
    return ReplicateResult(
        replicate=replicate,
        t=float(t_end),
        count=sim.cfg.n,
        extinct=sim.cfg.n == 0,
        events=sim.events,
        pair_counts=pair_distance_counts(sim.cfg, edges),
        trajectory=traj,
        positions=sim.cfg.positions.copy() if keep_positions else None,
    )


def _run_from_recipe(recipe, *args):
    return run_single(ModelParams.from_recipe(recipe), *args)


def run_many(params, eps, side, t_end, q0, seed, n_replicates, edges, record_every=None, keep_positions=False, workers=1):
    """Replicates ``0..n-1`` in order; processes are used when the kernels can be rebuilt from recipes."""
    args = [(eps, side, t_end, q0, seed, k, edges, record_every, keep_positions) for k in range(n_replicates)]
    recipe = params.recipe
    if workers > 1 and recipe is not None and n_replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_from_recipe, recipe, *a) for a in args]
            return [f.result() for f in futures]
    return [run_single(params, *a) for a in args]


def finite_size_ok(params: ModelParams, eps: float, side: float) -> bool:
    """``L eps >= 10`` kernel ranges (rms displacement per axis of the unscaled kernels)."""
    rng_ = max(
        math.sqrt(float(np.trace(k.second_moment_matrix)) / (k.dim * k.mass)) for k in (params.a_plus, params.a_minus)
    )
    return side * eps >= 10 * rng_


def check_inputs(params, eps, side, t_end, n_replicates):
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    if t_end < 0 or n_replicates < 1:
        raise InvalidParameterError("need t_end >= 0 and at least one replicate")
    if not finite_size_ok(params, eps, side):
        raise InvalidParameterError("torus too small: need L * eps >= 10 kernel ranges")
