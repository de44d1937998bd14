"""Finite-volume polymer measures: marginals, path sampling and dominance.

A :class:`PolymerMeasure` on paths ``gamma_m..gamma_n`` has weight

    start(gamma_m) * prod_{k=m}^{n-1} g_{2kappa}(gamma_{k+1}-gamma_k) exp(-F_k(gamma_k)/2kappa) * terminal(gamma_n)

where ``start`` and ``terminal`` are log-densities on the grid (atoms for
fixed endpoints).  It stores the forward chain ``fwd[k]`` (weight of
``[m, k)`` ending at ``y``, potential at ``k`` excluded) and the backward
chain ``bwd[k]`` (weight of ``[k, n]`` starting at ``y``, potential at ``k``
included), so every marginal is ``fwd[k] + bwd[k] - logZ``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Grid, LogDensity, log_gaussian, logsumexp_dx
from .partition import iter_backward, iter_forward


@dataclass(frozen=True, eq=False)
class TerminalMeasure:
    """Law of a free path endpoint: ``atom``, ``density`` or ``uniform``."""

    kind: str
    y: float | None = None
    density: LogDensity | None = None
    interval: tuple[float, float] | None = None

    @classmethod
    def atom(cls, y: float) -> "TerminalMeasure":
        return cls("atom", y=float(y))

    @classmethod
    def from_density(cls, d: LogDensity, normalize: bool = True) -> "TerminalMeasure":
        d = d.normalized() if normalize else d
        return cls("density", density=d)

    @classmethod
    def uniform(cls, a: float, b: float) -> "TerminalMeasure":
        if not a < b:
            raise ValueError("uniform terminal needs a < b")
        return cls("uniform", interval=(float(a), float(b)))

    def log_density(self, grid: Grid) -> np.ndarray:
        if self.kind == "atom":
            return LogDensity.atom(grid, self.y).log_values
        if self.kind == "density":
            if self.density.grid != grid:
                raise ValueError("terminal density lives on a different grid")
            return self.density.log_values
        if self.kind == "uniform":
            a, b = self.interval
            x = grid.nodes
            inside = (x >= a - 1e-9 * grid.dx) & (x <= b + 1e-9 * grid.dx)
            if not inside.any():
                raise ValueError("uniform terminal interval contains no grid node")
            return np.where(inside, -math.log(inside.sum() * grid.dx), -np.inf)
        raise ValueError(f"unknown terminal kind {self.kind!r}")


class PolymerMeasure:
    """Gibbs measure on grid paths from time ``m`` to ``n``.

    ``start`` is a coordinate (fixed start point) or a :class:`LogDensity`
    giving an unnormalized weight on ``gamma_m``.  ``terminal`` is a
    :class:`TerminalMeasure` or an unnormalized :class:`LogDensity` weight
    on ``gamma_n``.
    """

    def __init__(self, env, m: int, n: int, start, terminal, band: float | None = None):
        if not n > m:
            raise ValueError("need m < n")
        self.env, self.m, self.n, self.band = env, m, n, band
        grid = env.grid
        if isinstance(start, LogDensity):
            if start.grid != grid:
                raise ValueError("start weight lives on a different grid")
            self.x = None
            a = start.log_values
        else:
            self.x = float(start)
            a = LogDensity.atom(grid, self.x).log_values
        if isinstance(terminal, LogDensity):
            if terminal.grid != grid:
                raise ValueError("terminal weight lives on a different grid")
            b = terminal.log_values
        else:
            b = terminal.log_density(grid)
        self.terminal = terminal
        self.fwd = [f for _, f in iter_forward(env, m, n, a, band)]
        self.bwd = [h for _, h in iter_backward(env, m, n, b, band)][::-1]
        self.log_z = float(logsumexp_dx(self.fwd[-1] + self.bwd[-1], grid.dx))
        if not math.isfinite(self.log_z):
            raise ValueError("polymer measure has zero or infinite total mass")

    @property
    def grid(self) -> Grid:
        return self.env.grid

    def _i(self, k: int) -> int:
        if not self.m <= k <= self.n:
            raise ValueError(f"time {k} outside [{self.m}, {self.n}]")
        return k - self.m

    def log_z_at(self, k: int) -> float:
        """Total mass computed by splitting at time ``k``; independent of ``k`` up to round-off."""
        i = self._i(k)
        return float(logsumexp_dx(self.fwd[i] + self.bwd[i], self.grid.dx))

    def marginal(self, k: int) -> LogDensity:
        i = self._i(k)
        return LogDensity(self.grid, self.fwd[i] + self.bwd[i] - self.log_z)

    def terminal_marginal(self) -> LogDensity:
        return self.marginal(self.n)


def marginal_density(pm: PolymerMeasure, k: int) -> LogDensity:
    """Time-``k`` marginal log-density; at ``k = m`` or ``k = n`` a fixed endpoint shows up as a grid atom."""
    return pm.marginal(k)


@dataclass(frozen=True, eq=False)
class PathSet:
    """Sampled paths; ``paths[s, j]`` is ``gamma_{m+j}`` of sample ``s``."""

    m: int
    n: int
    paths: np.ndarray
    seed: int
    index: np.ndarray = field(repr=False, default=None)

    @property
    def count(self) -> int:
        return self.paths.shape[0]

    def at(self, k: int) -> np.ndarray:
        return self.paths[:, k - self.m]


def sample_paths(pm: PolymerMeasure, count: int, seed: int, width: float = 16.0) -> PathSet:
    """Draw ``count`` independent paths by backward sequential sampling.

    ``gamma_n`` is drawn from the terminal marginal, then for ``k = n-1..m``
    ``gamma_k | gamma_{k+1}`` has log-density ``fwd[k] - F_k/2kappa +
    log g(gamma_{k+1} - y)``.  Each draw is inverse-CDF on grid nodes with
    ties resolved to the lower index; candidate nodes are restricted to
    ``width`` kernel standard deviations around ``gamma_{k+1}``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    grid = pm.grid
    steps = pm.n - pm.m
    rng = np.random.default_rng(seed)
    u = rng.random((steps + 1, count))
    idx = np.empty((count, steps + 1), dtype=np.int64)

    def draw(logp, uu):
        m = logp.max(axis=-1, keepdims=True)
        c = np.cumsum(np.exp(logp - m), axis=-1)
        return np.minimum((c < uu[:, None] * c[:, -1:]).sum(axis=-1), logp.shape[-1] - 1)

    lt = pm.marginal(pm.n).log_values
    ct = np.cumsum(np.exp(lt - lt.max()))
    idx[:, steps] = np.minimum(np.searchsorted(ct, u[steps] * ct[-1], side="left"), grid.count - 1)
    sd = math.sqrt(2.0 * pm.env.kappa)
    h = min(grid.count - 1, int(math.ceil(width * sd / grid.dx)))
    offs = np.arange(-h, h + 1)
    logk = log_gaussian(offs * grid.dx, 2.0 * pm.env.kappa)
    for j in range(steps - 1, -1, -1):
        k = pm.m + j
        w = pm.fwd[j] + pm.env.log_weight(k)
        nb = idx[:, j + 1][:, None] + offs[None, :]
        valid = (nb >= 0) & (nb < grid.count)
        logp = np.where(valid, w[np.clip(nb, 0, grid.count - 1)] + logk[None, :], -np.inf)
        idx[:, j] = np.clip(idx[:, j + 1] + offs[draw(logp, u[j])], 0, grid.count - 1)
    return PathSet(pm.m, pm.n, grid.nodes[idx], seed, idx)


def path_action(env, path, m: int, n: int) -> float:
    """``sum_{k=m}^{n-1} F_k(gamma_k) + (1/2) sum (gamma_{k+1}-gamma_k)^2``.

    The path weight is ``exp(-action / 2kappa)`` times the Gaussian
    normalizations ``(4 pi kappa)^{-(n-m)/2}`` for every ``kappa``.
    Coordinates must be grid nodes.
    """
    path = np.asarray(path, dtype=float)
    if path.shape != (n - m + 1,):
        raise ValueError(f"path must have {n - m + 1} points")
    idx = [env.grid.index_of(x) for x in path]
    pot = sum(float(env.F(k)[idx[k - m]]) for k in range(m, n))
    kin = 0.5 * float(np.sum(np.diff(path) ** 2))
    return pot + kin


def _cdf(d: LogDensity) -> np.ndarray:
    m = d.log_values.max()
    p = np.exp(d.log_values - m)
    return np.cumsum(p) / p.sum()


def dominance_residual(lower: PolymerMeasure, upper: PolymerMeasure, k: int) -> float:
    """``max(0, max_r CDF_upper(r) - CDF_lower(r))`` of the time-``k`` marginals.

    Zero (up to round-off) when ``upper`` stochastically dominates ``lower``.
    """
    if lower.grid != upper.grid:
        raise ValueError("measures live on different grids")
    return max(0.0, float(np.max(_cdf(upper.marginal(k)) - _cdf(lower.marginal(k)))))


def density_dominance_residual(lower: LogDensity, upper: LogDensity) -> float:
    """Same as :func:`dominance_residual` for two densities on one grid."""
    if lower.grid != upper.grid:
        raise ValueError("densities live on different grids")
    return max(0.0, float(np.max(_cdf(upper) - _cdf(lower))))


def kernel_cdf(log_nu: LogDensity, xs, kappa: float = 0.5) -> np.ndarray:
    """``G(x, y) = int_{z<=y} g(z-x) nu(dz) / int g(z-x) nu(dz)`` for ``x`` in ``xs`` and grid ``y``.

    ``g`` is the step kernel ``g_{2 kappa}``; rows are indexed by ``xs``.
    """
    z = log_nu.grid.nodes
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    lw = log_gaussian(z[None, :] - xs[:, None], 2.0 * kappa) + log_nu.log_values[None, :]
    m = lw.max(axis=1, keepdims=True)
    c = np.cumsum(np.exp(lw - m), axis=1)
    return c / c[:, -1:]


def abstract_monotonicity_residual(log_nu: LogDensity, xs, kappa: float = 0.5) -> tuple[float, float]:
    """Largest violations of ``G`` nondecreasing in ``y`` and decreasing in ``x``.

    ``xs`` must be increasing.  Both numbers are ``<= 0`` (up to round-off)
    when the kernel monotonicity holds.
    """
    xs = np.sort(np.atleast_1d(np.asarray(xs, dtype=float)))
    G = kernel_cdf(log_nu, xs, kappa)
    in_y = float(np.max(G[:, :-1] - G[:, 1:])) if G.shape[1] > 1 else 0.0
    in_x = float(np.max(G[1:, :-1] - G[:-1, :-1])) if G.shape[0] > 1 else -np.inf
    return in_y, in_x


def point_to_line_measure(env, V: LogDensity, N: int, n: int, x: float, band: float | None = None) -> PolymerMeasure:
    """Backward measure on paths ``gamma_N..gamma_n`` with ``gamma_n = x``, free end at ``N`` tilted by ``V``.

    ``V`` is the log of an unnormalized positive profile at time ``N`` (for
    instance a Hopf-Cole state).
    """
    if not N < n:
        raise ValueError("need N < n")
    if V.integrate() == -np.inf:
        raise ValueError("tilt profile has zero total mass")
    return PolymerMeasure(env, N, n, V, TerminalMeasure.atom(x), band)


def tv_distance(a: LogDensity, b: LogDensity) -> float:
    """``(1/2) sum |e^a - e^b| dx``, clipped to ``[0, 1]``."""
    if a.grid != b.grid:
        raise ValueError("densities live on different grids")
    d = 0.5 * float(np.sum(np.abs(a.values - b.values))) * a.grid.dx
    return min(max(d, 0.0), 1.0)


def cone_exit_fraction(paths: PathSet, n: int, v: float, delta: float, Q: float) -> float:
    """Fraction of paths that, at some ``k`` in ``[n, N/2]`` with ``|gamma_k| <= k v``,
    later leave the cone ``|gamma_j / j - gamma_k / k| <= Q k^{-delta}`` (``j > k``).

    Paths must start at time 0.
    """
    if paths.m != 0:
        raise ValueError("cone diagnostics assume paths starting at time 0")
    N = paths.n
    kmax = N // 2
    if kmax < n:
        return 0.0
    j = np.arange(1, N + 1)
    s = paths.paths[:, 1:] / j[None, :]
    # suffix extrema of slopes over j > k
    smax = np.maximum.accumulate(s[:, ::-1], axis=1)[:, ::-1]
    smin = np.minimum.accumulate(s[:, ::-1], axis=1)[:, ::-1]
    exited = np.zeros(paths.count, dtype=bool)
    for k in range(max(n, 1), kmax + 1):
        sk = s[:, k - 1]
        inside = np.abs(paths.paths[:, k]) <= k * v
        dev = np.maximum(smax[:, k] - sk, sk - smin[:, k])
        exited |= inside & (dev > Q * k ** (-delta))
    return float(exited.mean())


def straightness_diagnostic(env, n: int, N: int, v: float, delta: float, Q: float,
                            count: int = 2000, seed: int = 0, terminal: TerminalMeasure | None = None,
                            band: float | None = None) -> float:
    """Sampled polymer mass of paths leaving a shrinking cone after entering ``|x| <= k v``.

    The measure is the point-to-measure polymer from ``(0, 0)`` to time ``N``
    (terminal atom at 0 unless ``terminal`` is given).
    """
    if not N / 2 > n:
        raise ValueError("need N/2 > n")
    if not 0 < delta < 0.25:
        raise ValueError("delta must lie in (0, 1/4)")
    pm = PolymerMeasure(env, 0, N, 0.0, terminal or TerminalMeasure.atom(0.0), band)
    return cone_exit_fraction(sample_paths(pm, count, seed), n, v, delta, Q)


def write_paths_csv(path, ps: PathSet) -> None:
    """CSV with header ``sample_id,k,gamma``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "k", "gamma"])
        for s in range(ps.count):
            for j in range(ps.n - ps.m + 1):
                w.writerow([s, ps.m + j, repr(float(ps.paths[s, j]))])


def write_marginals_csv(path, pm: PolymerMeasure, times) -> None:
    """CSV with header ``k,y,density``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "y", "density"])
        for k in times:
            d = pm.marginal(k)
            for y, p in zip(d.grid.nodes, d.values):
                w.writerow([k, repr(float(y)), repr(float(p))])
