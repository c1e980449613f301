"""Point configurations on a torus with cached per-point death rates."""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..errors import InvalidParameterError
from ..kernels import Kernel


def competition_function(kernel: Kernel):
    """Map displacements ``(n, d)`` to kernel values, using the radial profile when available."""
    if kernel.profile is not None:
        prof = kernel.profile
        return lambda disp: prof(np.sqrt(np.einsum("ij,ij->i", disp, disp)))
    if kernel.dim == 1:
        ev = kernel.evaluate
        return lambda disp: ev(disp[:, 0])
    return kernel.evaluate


class PointConfiguration:
    """Points in ``[0, L)^d`` with rates ``m + sum_y a-(x - y)`` kept in sync under insert/delete.

    Competition is truncated at ``cutoff``; neighbours are found through a
    cell list with cells of side at least ``cutoff``.
    """

    def __init__(self, dim: int, side: float, competition: Kernel, mortality: float, cutoff: float | None = None):
        if side <= 0:
            raise InvalidParameterError("torus side must be positive")
        self.dim = int(dim)
        self.side = float(side)
        self.mortality = float(mortality)
        self.cutoff = float(cutoff if cutoff is not None else competition.effective_radius)
        if not 2 * self.cutoff < self.side:
            raise InvalidParameterError("torus side must exceed twice the competition cutoff")
        self._comp = competition_function(competition)
        self.n = 0
        self._pos = np.empty((64, self.dim))
        self._rate = np.empty(64)
        self._cell_of = np.empty(64, dtype=np.int64)
        n_cells = int(self.side // self.cutoff)
        self.brute_force = n_cells < 3
        self.n_cells = 1 if self.brute_force else n_cells
        self.cell_side = self.side / self.n_cells
        self._cells: list[list[int]] = [[] for _ in range(self.n_cells**self.dim)]
        offsets = list(itertools.product((-1, 0, 1), repeat=self.dim))
        self._offsets = np.array(offsets, dtype=np.int64)
        self._strides = self.n_cells ** np.arange(self.dim - 1, -1, -1)

    # -------------------------------------------------------------- access
    @property
    def positions(self) -> np.ndarray:
        return self._pos[: self.n]

    @property
    def death_rates(self) -> np.ndarray:
        return self._rate[: self.n]

    def total_death_rate(self) -> float:
        return float(np.sum(self._rate[: self.n]))

    # ------------------------------------------------------------- geometry
    def wrap(self, x):
        return np.mod(x, self.side)

    def displacement(self, x, ys):
        """Minimum-image displacement ``ys - x``."""
        d = ys - x
        return d - self.side * np.round(d / self.side)

    def _cell_coords(self, x):
        return np.minimum((x // self.cell_side).astype(np.int64), self.n_cells - 1)

    def _cell_index(self, coords):
        return int(np.dot(np.mod(coords, self.n_cells), self._strides))

    def candidates(self, x) -> np.ndarray:
        """Indices of points in the cells around ``x``."""
        if self.brute_force:
            return np.arange(self.n)
        c = self._cell_coords(x)
        idx = {self._cell_index(c + off) for off in self._offsets}
        out: list[int] = []
        for k in idx:
            out.extend(self._cells[k])
        return np.fromiter(out, dtype=np.int64, count=len(out))

    def neighbours(self, x, exclude: int = -1):
        """Indices and competition weights of points within ``cutoff`` of ``x``."""
        idx = self.candidates(x)
        if exclude >= 0:
            idx = idx[idx != exclude]
        if idx.size == 0:
            return idx, np.empty(0)
        disp = self.displacement(x, self._pos[idx])
        r2 = np.einsum("ij,ij->i", disp, disp)
        keep = r2 < self.cutoff**2
        idx, disp = idx[keep], disp[keep]
        return idx, self._comp(disp)

    # ------------------------------------------------------------- updates
    def _grow(self):
        cap = 2 * self._pos.shape[0]
        for name in ("_pos", "_rate", "_cell_of"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self.n] = old[: self.n]
            setattr(self, name, new)

    def add(self, x) -> int:
        """Insert a point (wrapped onto the torus) and return its index."""
        x = self.wrap(np.asarray(x, dtype=float).reshape(self.dim))
        idx, w = self.neighbours(x)
        if self.n == self._pos.shape[0]:
            self._grow()
        i = self.n
        self._rate[idx] += w
        self._pos[i] = x
        self._rate[i] = self.mortality + float(np.sum(w))
        cell = 0 if self.brute_force else self._cell_index(self._cell_coords(x))
        self._cell_of[i] = cell
        self._cells[cell].append(i)
        self.n += 1
        return i

    def remove(self, i: int) -> np.ndarray:
        """Delete point ``i``; the last point takes its index. Returns the removed position."""
        if not 0 <= i < self.n:
            raise IndexError(i)
        x = self._pos[i].copy()
        idx, w = self.neighbours(x, exclude=i)
        self._rate[idx] -= w
        self._cells[self._cell_of[i]].remove(i)
        last = self.n - 1
        if i != last:
            cell = self._cell_of[last]
            members = self._cells[cell]
            members[members.index(last)] = i
            self._pos[i] = self._pos[last]
            self._rate[i] = self._rate[last]
            self._cell_of[i] = cell
        self.n -= 1
        return x

    def add_many(self, xs):
        for x in np.asarray(xs, dtype=float).reshape(-1, self.dim):
            self.add(x)

    # ---------------------------------------------------------- consistency
    def recompute_death_rates(self) -> np.ndarray:
        """Brute-force ``m + sum_{y != x, |x-y| < cutoff} a-(x - y)`` for every point."""
        pos = self.positions
        out = np.full(self.n, self.mortality)
        for i in range(self.n):
            disp = self.displacement(pos[i], np.delete(pos, i, axis=0))
            r2 = np.einsum("ij,ij->i", disp, disp)
            keep = r2 < self.cutoff**2
            if np.any(keep):
                out[i] += float(np.sum(self._comp(disp[keep])))
        return out

    def cache_error(self) -> float:
        """Relative error of the cached total death rate against a full recompute."""
        exact = float(np.sum(self.recompute_death_rates()))
        if exact == 0:
            return 0.0
        return abs(self.total_death_rate() - exact) / exact

    def resync(self) -> None:
        self._rate[: self.n] = self.recompute_death_rates()

    def has_duplicates(self) -> bool:
        return np.unique(self.positions, axis=0).shape[0] != self.n
