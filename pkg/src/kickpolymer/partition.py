"""Partition functions of the directed polymer on a grid.

``Z^{m,n}(x, y)`` is the weight of paths from ``(m, x)`` to ``(n, y)``: a
product of heat-kernel steps ``g_{2 kappa}`` and kick weights
``exp(-F_k / 2 kappa)`` for ``m <= k < n``.  The potential at the final time
``n`` is never included.  Point endpoints are grid atoms, so a slice is a
density in the free endpoint with no extra ``dx`` factor at the anchor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .lattice import Grid, LogDensity, get_kernel, logsumexp_dx


def _check_range(env, m: int, n: int) -> None:
    if not n > m:
        raise ValueError(f"need m < n, got m={m}, n={n}")
    # the chain uses F_m..F_{n-1}
    if not env.covers(m, n):
        raise ValueError(f"horizon [{m}, {n}) outside environment range {env.time_range}")


def _atom_array(grid: Grid, x: float, snap: bool = False) -> np.ndarray:
    return LogDensity.atom(grid, x, snap=snap).log_values


@dataclass(frozen=True)
class Corridor:
    """Interval constraints ``a_k <= gamma_k <= b_k`` at interior times.

    Times not listed are unconstrained.  An interval with ``a > b`` is not
    allowed; use :meth:`empty_at` to express an empty constraint.
    """

    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, (a, b) in self.bounds.items():
            if a > b:
                raise ValueError(f"corridor interval at time {k} has a > b")

    def mask(self, k: int, grid: Grid) -> np.ndarray | None:
        if k not in self.bounds:
            return None
        a, b = self.bounds[k]
        tol = 1e-9 * grid.dx
        x = grid.nodes
        return (x >= a - tol) & (x <= b + tol)

    def widened(self, delta: float) -> "Corridor":
        return Corridor({k: (a - delta, b + delta) for k, (a, b) in self.bounds.items()})


def gamma_corridor(m: int, n: int, R: float) -> Corridor:
    """Paths with ``|gamma_k| <= R (n - m)`` at every interior time."""
    h = R * (n - m)
    return Corridor({k: (-h, h) for k in range(m + 1, n)})


def iter_forward(env, m: int, n: int, a: np.ndarray, band: float | None = None,
                 corridor: Corridor | None = None) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(k, f_k)`` for ``k = m..n`` with ``f_{k+1} = log K[exp(f_k - F_k/2kappa)]``.

    ``a`` is the log start density at time ``m``; it may carry batch rows.
    """
    _check_range(env, m, n)
    kern = get_kernel(env.grid, env.kappa, band)
    f = np.asarray(a, dtype=float)
    yield m, f
    for k in range(m, n):
        f = kern.log_convolve(f + env.log_weight(k))
        if corridor is not None and k + 1 < n:
            mk = corridor.mask(k + 1, env.grid)
            if mk is not None:
                f = np.where(mk, f, -np.inf)
        yield k + 1, f


def iter_backward(env, m: int, n: int, b: np.ndarray, band: float | None = None,
                  corridor: Corridor | None = None) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(k, h_k)`` for ``k = n..m`` with ``h_k = log[exp(-F_k/2kappa) K exp(h_{k+1})]``.

    ``b`` is the log terminal density at time ``n``.  ``h_k(x)`` is the log
    partition function from ``(k, x)`` against that terminal density.
    """
    _check_range(env, m, n)
    kern = get_kernel(env.grid, env.kappa, band)
    h = np.asarray(b, dtype=float)
    yield n, h
    for k in range(n - 1, m - 1, -1):
        h = kern.log_convolve(h) + env.log_weight(k)
        if corridor is not None and k > m:
            mk = corridor.mask(k, env.grid)
            if mk is not None:
                h = np.where(mk, h, -np.inf)
        yield k, h


def _last(it):
    for _, f in it:
        pass
    return f


@dataclass(frozen=True, eq=False)
class PartitionSlice:
    """``log Z`` with one endpoint fixed and the other free over the grid.

    ``free_end == "right"``: ``log Z^{m,n}(anchor, y)`` as a function of ``y``.
    ``free_end == "left"``: ``log Z^{m,n}(x, anchor)`` as a function of ``x``.
    """

    env: object
    m: int
    n: int
    anchor: float
    log_values: LogDensity
    free_end: str = "right"

    def at(self, z: float) -> float:
        return self.log_values.at(z)

    def rows(self):
        for y, v in zip(self.log_values.grid.nodes, self.log_values.log_values):
            if self.free_end == "right":
                yield self.m, self.n, self.anchor, float(y), float(v)
            else:
                yield self.m, self.n, float(y), self.anchor, float(v)


def log_partition_slice(env, m: int, n: int, x: float, band: float | None = None,
                        snap: bool = False) -> PartitionSlice:
    """``log Z^{m,n}(x, y)`` for every grid node ``y``."""
    if snap:
        x = env.grid.coordinate(env.grid.index_of(x, snap=True))
    f = _last(iter_forward(env, m, n, _atom_array(env.grid, x), band))
    return PartitionSlice(env, m, n, float(x), LogDensity(env.grid, f), "right")


def log_partition_backward_slice(env, m: int, n: int, y: float, band: float | None = None) -> PartitionSlice:
    """``log Z^{m,n}(x, y)`` for every grid node ``x``."""
    h = _last(iter_backward(env, m, n, _atom_array(env.grid, y), band))
    return PartitionSlice(env, m, n, float(y), LogDensity(env.grid, h), "left")


def log_partition_p2p(env, m: int, n: int, x: float, y: float, band: float | None = None) -> float:
    """``log Z^{m,n}(x, y)``, read out of the forward slice."""
    return log_partition_slice(env, m, n, x, band).at(y)


def log_partition_restricted(env, m: int, n: int, x: float, y: float, corridor: Corridor,
                             band: float | None = None) -> float:
    """``log Z`` over paths confined to ``corridor`` at interior times; may be ``-inf``."""
    f = _last(iter_forward(env, m, n, _atom_array(env.grid, x), band, corridor))
    return float(f[env.grid.index_of(y)])


def _window_indices(grid: Grid, c: float, half: float) -> np.ndarray:
    i = grid.index_of(c)
    w = int(math.floor(half / grid.dx + 1e-9))
    if i - w < 0 or i + w >= grid.count:
        raise ValueError(f"window of half-width {half} around {c} is clipped by the grid")
    return np.arange(i - w, i + w + 1)


def log_partition_star(env, m: int, n: int, x: float, y: float, band: float | None = None,
                       half_width: float = 0.5) -> float:
    """``min log Z^{m,n}(x', y')`` over nodes with ``|x'-x|, |y'-y| <= half_width``."""
    if half_width < 2 * env.grid.dx:
        raise ValueError("Z_* window must span at least two grid steps on each side")
    ix = _window_indices(env.grid, x, half_width)
    iy = _window_indices(env.grid, y, half_width)
    start = np.full((len(ix), env.grid.count), -np.inf)
    start[np.arange(len(ix)), ix] = -math.log(env.grid.dx)
    f = _last(iter_forward(env, m, n, start, band))
    return float(f[:, iy].min())


def log_partition_star_table(env, m: int, n: int, xs, ys, band: float | None = None,
                             half_width: float = 0.5) -> np.ndarray:
    """``log Z_*^{m,n}(x, y)`` for all pairs in ``xs`` x ``ys`` from one batched chain."""
    if half_width < 2 * env.grid.dx:
        raise ValueError("Z_* window must span at least two grid steps on each side")
    wins_x = [_window_indices(env.grid, x, half_width) for x in xs]
    wins_y = [_window_indices(env.grid, y, half_width) for y in ys]
    allx = np.unique(np.concatenate(wins_x))
    start = np.full((len(allx), env.grid.count), -np.inf)
    start[np.arange(len(allx)), allx] = -math.log(env.grid.dx)
    f = _last(iter_forward(env, m, n, start, band))
    row = {j: r for r, j in enumerate(allx)}
    out = np.empty((len(xs), len(ys)))
    for a, wx in enumerate(wins_x):
        sub = f[[row[j] for j in wx]]
        for b, wy in enumerate(wins_y):
            out[a, b] = sub[:, wy].min()
    return out


def chapman_kolmogorov_residual(env, n1: int, n2: int, n3: int, x: float, z: float,
                                band: float | None = None) -> float:
    """``|log Z^{n1,n3}(x,z) - log int Z^{n1,n2}(x,y) Z^{n2,n3}(y,z) dy|``."""
    if not n1 < n2 < n3:
        raise ValueError("need n1 < n2 < n3")
    whole = log_partition_p2p(env, n1, n3, x, z, band)
    left = log_partition_slice(env, n1, n2, x, band).log_values.log_values
    right = log_partition_backward_slice(env, n2, n3, z, band).log_values.log_values
    split = float(logsumexp_dx(left + right, env.grid.dx))
    if whole == -np.inf and split == -np.inf:
        return 0.0
    return abs(whole - split)


def write_partition_csv(path, slices) -> None:
    """CSV with header ``m,n,x,y,logZ``; one row per slice node."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "n", "x", "y", "logZ"])
        for s in slices:
            for row in s.rows():
                w.writerow([row[0], row[1], repr(row[2]), repr(row[3]), repr(row[4])])
