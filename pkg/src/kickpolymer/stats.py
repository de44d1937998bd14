"""Estimators for free-energy shape, fluctuation and wandering exponents,
partition-function ratios and overlap curves.

Replicate ``i`` of a campaign always uses environment realization ``i`` of
the given spec, so every table row can be regenerated from
``(spec, realization_index, time range, grid)``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .env import EnvironmentSpec, offset_environment, sample_environment
from .lattice import Grid, LogDensity, auto_grid, diffusive_margin, hull_grid, log_gaussian
from .partition import iter_backward, iter_forward
from .polymer import PolymerMeasure, TerminalMeasure, sample_paths, tv_distance

BOOTSTRAP_RESAMPLES = 1000


class DegenerateFit(ValueError):
    """Raised when a statistic is identically zero and no exponent exists."""


def parallel_map(fn, items, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order is preserved."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _snap(grid: Grid, y: float) -> int:
    return grid.index_of(y, snap=True)


# ---------------------------------------------------------------- shape

@dataclass(frozen=True)
class ShapeRow:
    v: float
    n: int
    mean: float
    stderr: float
    replicates: int


@dataclass
class ShapeTable:
    rows: list
    samples: dict = field(default_factory=dict)
    keys: list = field(default_factory=list)

    def means(self) -> np.ndarray:
        return np.array([r.mean for r in self.rows])

    def write_csv(self, path) -> None:
        """CSV with header ``v,n,mean,stderr,replicates``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["v", "n", "mean", "stderr", "replicates"])
            for r in self.rows:
                w.writerow([repr(r.v), r.n, repr(r.mean), repr(r.stderr), r.replicates])


def _free_energy_replicate(spec, n, vs, grid, index, band, offset):
    env = sample_environment(spec, (0, n), grid, index)
    if offset:
        env = offset_environment(env, offset)
    f = None
    for _, f in iter_forward(env, 0, n, LogDensity.atom(grid, 0.0).log_values, band):
        pass
    return np.array([f[grid.index_of(v * n)] for v in vs]), env.key()


def shape_estimate(spec: EnvironmentSpec, n: int, v_list, replicates: int, dx: float = 0.05,
                   band: float | None = 8.0, threads: int = 1, offset: float = 0.0,
                   grid: Grid | None = None, first_realization: int = 0) -> ShapeTable:
    """Monte Carlo mean of ``(1/n) log Z^{0,n}(0, v n)`` for each ``v``.

    One forward chain per replicate serves every ``v``.  ``v n`` must be a
    grid node.  ``offset`` adds a constant to the potential.
    """
    if replicates < 8:
        raise ValueError("shape_estimate needs at least 8 replicates")
    vs = [float(v) for v in v_list]
    grid = grid or auto_grid(n, max(abs(v) for v in vs), dx)
    for v in vs:
        if not grid.is_node(v * n):
            raise ValueError(f"v n = {v * n} is not a grid node of {grid}")
    res = parallel_map(lambda i: _free_energy_replicate(spec, n, vs, grid, first_realization + i, band, offset),
                       range(replicates), threads)
    data = np.array([r[0] for r in res]) / n
    rows = []
    for j, v in enumerate(vs):
        col = data[:, j]
        rows.append(ShapeRow(v, n, float(col.mean()), float(col.std(ddof=1) / math.sqrt(replicates)), replicates))
    return ShapeTable(rows, {"per_replicate": data}, [r[1] for r in res])


@dataclass(frozen=True)
class ShapeFit:
    alpha0: float
    curvature: float
    rms: float
    scale: float


def quadratic_shape_fit(table: ShapeTable, kappa: float = 0.5) -> ShapeFit:
    """Weighted least squares of ``mean = alpha0 + curvature * v^2``.

    ``scale = -4 kappa * curvature`` is 1 for the expected ``-v^2/(4 kappa)`` law.
    """
    v = np.array([r.v for r in table.rows])
    y = table.means()
    if len(np.unique(v)) < 3:
        raise ValueError("quadratic shape fit needs at least 3 distinct v")
    se = np.array([r.stderr for r in table.rows])
    w = 1.0 / se if (se > 0).all() else np.ones_like(y)
    X = np.column_stack([np.ones_like(v), v * v])
    if np.linalg.matrix_rank(X) < 2:
        raise ValueError("rank-deficient shape fit")
    coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
    resid = y - X @ coef
    return ShapeFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid ** 2))), float(-4 * kappa * coef[1]))


# ---------------------------------------------------------------- exponents

@dataclass
class ExponentFit:
    exponent: float
    ci: tuple[float, float]
    table: list
    diagnostics: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        """CSV with header ``n,statistic``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "statistic"])
            for n, s in self.table:
                w.writerow([n, repr(float(s))])


def loglog_slope(ns, values) -> float:
    """Least-squares slope of ``log values`` against ``log ns``."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _bootstrap_slope(ns, matrix, column_stat, seed):
    """Percentile CI of the log-log slope, resampling replicate rows."""
    idx = np.arange(matrix.shape[0])

    def stat(sample):
        rows = matrix[np.asarray(sample, dtype=int)]
        vals = column_stat(rows)
        if np.any(vals <= 0):
            return np.nan
        return loglog_slope(ns, vals)

    res = sps.bootstrap((idx,), stat, n_resamples=BOOTSTRAP_RESAMPLES, method="percentile",
                        vectorized=False, random_state=np.random.default_rng(seed))
    lo, hi = res.confidence_interval
    return float(lo), float(hi)


def _fit(ns, matrix, column_stat, seed, name):
    vals = column_stat(matrix)
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise DegenerateFit(f"{name} vanishes at n = {[n for n, s in zip(ns, vals) if not s > 0]}; no exponent")
    slope = loglog_slope(ns, vals)
    lo, hi = _bootstrap_slope(ns, matrix, column_stat, seed)
    lo, hi = min(lo, slope), max(hi, slope)
    return slope, (lo, hi), list(zip([int(n) for n in ns], vals.tolist()))


def _std_cols(rows):
    return rows.std(axis=0, ddof=1)


def _mean_cols(rows):
    return rows.mean(axis=0)


def _check_n_list(n_list):
    ns = sorted(int(n) for n in n_list)
    if len(ns) < 2 or len(set(ns)) != len(ns) or ns[0] < 1:
        raise ValueError("n_list needs at least two distinct positive horizons")
    return ns


def free_energy_samples(spec: EnvironmentSpec, n_list, replicates: int, dx: float = 0.05,
                        band: float | None = 8.0, threads: int = 1, grid: Grid | None = None) -> np.ndarray:
    """``log Z^{0,n}(0, 0)`` for each replicate (rows) and horizon (columns), one chain per replicate."""
    ns = _check_n_list(n_list)
    grid = grid or auto_grid(ns[-1], 0.0, dx)
    i0 = grid.index_of(0.0)

    def one(i):
        env = sample_environment(spec, (0, ns[-1]), grid, i)
        out = []
        for k, f in iter_forward(env, 0, ns[-1], LogDensity.atom(grid, 0.0).log_values, band):
            if k in ns:
                out.append(f[i0])
        return out

    return np.array(parallel_map(one, range(replicates), threads))


def fluctuation_exponent(spec: EnvironmentSpec, n_list, replicates: int, dx: float = 0.05,
                         band: float | None = 8.0, threads: int = 1, seed: int = 0,
                         samples: np.ndarray | None = None) -> ExponentFit:
    """Slope of ``log std(log Z^{0,n}(0,0))`` against ``log n`` with a bootstrap CI.

    Diagnostics include the doubling gaps ``|mean log Z^{2n} - 2 mean log Z^n|``.
    """
    ns = _check_n_list(n_list)
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    data = samples if samples is not None else free_energy_samples(spec, ns, replicates, dx, band, threads)
    slope, ci, table = _fit(ns, data, _std_cols, seed, "free-energy standard deviation")
    means = data.mean(axis=0)
    doubling = {n: float(abs(means[ns.index(2 * n)] - 2 * means[j])) for j, n in enumerate(ns) if 2 * n in ns}
    return ExponentFit(slope, ci, table, {"means": dict(zip(ns, means.tolist())), "doubling_gap": doubling})


def path_wander_statistic(pm: PolymerMeasure, v: float, count: int, seed: int, q: float = 0.9) -> float:
    """``q``-quantile over sampled paths of ``max_k |gamma_k - gamma_m - (k - m) v|``."""
    ps = sample_paths(pm, count, seed)
    k = np.arange(pm.m, pm.n + 1) - pm.m
    dev = np.abs(ps.paths - ps.paths[:, :1] - v * k[None, :]).max(axis=1)
    return float(np.quantile(dev, q))


def transversal_samples(spec: EnvironmentSpec, n_list, replicates: int, v: float = 0.0, dx: float = 0.05,
                        band: float | None = 8.0, threads: int = 1, paths: int = 256, seed: int = 0) -> np.ndarray:
    """Per replicate and horizon, the 0.9-quantile path deviation under ``mu^{0,n}_{0,vn}``."""
    ns = _check_n_list(n_list)

    def one(i):
        out = []
        for n in ns:
            grid = Grid.covering(min(0.0, v * n) - diffusive_margin(n) - 2 * n ** 0.75,
                                 max(0.0, v * n) + diffusive_margin(n) + 2 * n ** 0.75, dx)
            env = sample_environment(spec, (0, n), grid, i)
            pm = PolymerMeasure(env, 0, n, 0.0, TerminalMeasure.atom(v * n), band)
            out.append(path_wander_statistic(pm, v, paths, seed * 1_000_003 + i))
        return out

    return np.array(parallel_map(one, range(replicates), threads))


def transversal_exponent(spec: EnvironmentSpec, n_list, replicates: int, v: float = 0.0, dx: float = 0.05,
                         band: float | None = 8.0, threads: int = 1, paths: int = 256, seed: int = 0,
                         samples: np.ndarray | None = None) -> ExponentFit:
    """Slope of ``log mean(path deviation quantile)`` against ``log n`` with a bootstrap CI."""
    ns = _check_n_list(n_list)
    data = samples if samples is not None else transversal_samples(spec, ns, replicates, v, dx, band, threads, paths, seed)
    slope, ci, table = _fit(ns, data, _mean_cols, seed, "path deviation")
    return ExponentFit(slope, ci, table)


# ---------------------------------------------------------------- ratios and overlap

@dataclass
class BusemannCurve:
    depths: list
    values: np.ndarray
    perturbed: np.ndarray

    def deltas(self) -> np.ndarray:
        """``|value(N_j) - value(N_{j+1})|`` along the depth schedule."""
        return np.abs(np.diff(self.values))


def _backward_reads(env, n, x, depths, points, band):
    """``log Z^{N,n}(y_N, x)`` for each ``N`` in ``depths`` and row of ``points``."""
    grid = env.grid
    want = {N: j for j, N in enumerate(depths)}
    out = np.empty((len(points), len(depths)))
    for k, h in iter_backward(env, min(depths), n, LogDensity.atom(grid, x).log_values, band):
        if k in want:
            j = want[k]
            for r, pts in enumerate(points):
                out[r, j] = h[_snap(grid, pts[j])]
    return out


def busemann_estimate(env, a: tuple[int, float], b: tuple[int, float], v: float, N_list,
                      offset: float = 1.0, band: float | None = None) -> BusemannCurve:
    """``log Z^{N,n1}(y_N, x1) - log Z^{N,n2}(y_N, x2)`` along ``y_N = vN`` (snapped) and ``vN + offset``."""
    depths = [int(N) for N in N_list]
    (n1, x1), (n2, x2) = a, b
    if max(depths) >= min(n1, n2):
        raise ValueError("every N must lie below both anchor times")
    for N in depths:
        for y in (v * N, v * N + offset):
            if not env.grid.contains(y):
                raise ValueError(f"window does not cover y_N = {y}")
    pts = [[v * N for N in depths], [v * N + offset for N in depths]]
    ra = _backward_reads(env, n1, x1, depths, pts, band)
    rb = ra if (n1, x1) == (n2, x2) else _backward_reads(env, n2, x2, depths, pts, band)
    d = ra - rb
    return BusemannCurve(depths, d[0], d[1])


def busemann_pair_deltas(env, xs, v: float, N_list, n: int = 0, gap: float = 1.0,
                         band: float | None = None) -> np.ndarray:
    """Successive-depth changes of the ratios for the anchor pairs ``(n, x)``, ``(n, x + gap)``.

    One batched backward chain serves every anchor.  Row ``p`` holds
    ``|B_p(N_j) - B_p(N_{j+1})|`` along ``N_list`` sorted from shallow to deep,
    with ``B_p(N) = log Z^{N,n}(y_N, x_p) - log Z^{N,n}(y_N, x_p + gap)`` and
    ``y_N = vN`` snapped to the grid.
    """
    grid = env.grid
    depths = sorted((int(N) for N in N_list), reverse=True)
    if len(depths) < 2 or depths[0] >= n:
        raise ValueError("need two or more depths below the anchor time")
    xs = np.asarray(xs, dtype=float)
    start = np.stack([LogDensity.atom(grid, x).log_values for x in np.concatenate([xs, xs + gap])])
    want = {N: j for j, N in enumerate(depths)}
    reads = np.empty((len(start), len(depths)))
    for k, h in iter_backward(env, depths[-1], n, start, band):
        if k in want:
            reads[:, want[k]] = h[:, _snap(grid, v * k)]
    B = reads[:len(xs)] - reads[len(xs):]
    return np.abs(np.diff(B, axis=1))


def overlap_curve(env, a: tuple[int, float], b: tuple[int, float], v: float, N_list,
                  horizon: int | None = None, band: float | None = None) -> np.ndarray:
    """TV distance between the time-``N`` marginals of the polymers from ``(M, vM)`` to each anchor.

    ``M = horizon`` (default ``2 min(N_list)``) stands in for the infinite past.
    """
    depths = [int(N) for N in N_list]
    M = horizon if horizon is not None else 2 * min(depths)
    if M >= min(depths):
        raise ValueError("horizon must lie below every N")
    y0 = env.grid.coordinate(_snap(env.grid, v * M))
    pa = PolymerMeasure(env, M, a[0], y0, TerminalMeasure.atom(a[1]), band)
    pb = pa if tuple(a) == tuple(b) else PolymerMeasure(env, M, b[0], y0, TerminalMeasure.atom(b[1]), band)
    return np.array([tv_distance(pa.marginal(N), pb.marginal(N)) for N in depths])


def thermodynamic_tv_curve(env, m: int, x: float, v: float, k: int, n_list, band: float | None = None) -> np.ndarray:
    """TV between time-``k`` marginals of ``mu^{m,n}_{x, vn}`` and ``mu^{m,2n}_{x, 2vn}`` for each ``n``."""
    out = []
    for n in n_list:
        p1 = PolymerMeasure(env, m, n, x, TerminalMeasure.atom(env.grid.coordinate(_snap(env.grid, x + v * (n - m)))), band)
        p2 = PolymerMeasure(env, m, m + 2 * (n - m), x,
                            TerminalMeasure.atom(env.grid.coordinate(_snap(env.grid, x + 2 * v * (n - m)))), band)
        out.append(tv_distance(p1.marginal(k), p2.marginal(k)))
    return np.array(out)


def gaussian_tv(mu1: float, mu2: float, sigma: float) -> float:
    """TV distance between two Gaussians with equal standard deviation ``sigma``."""
    return float(2.0 * sps.norm.cdf(abs(mu1 - mu2) / (2.0 * sigma)) - 1.0)


def bridge_log_ratio(a, b, v, N, kappa=0.5) -> float:
    """Closed form ``log g(x1 - vN) - log g(x2 - vN)`` with variances ``2 kappa (n_i - N)``."""
    (n1, x1), (n2, x2) = a, b
    y = v * N
    return float(log_gaussian(x1 - y, 2 * kappa * (n1 - N)) - log_gaussian(x2 - y, 2 * kappa * (n2 - N)))


# ---------------------------------------------------------------- tests of trend

def sign_test(successes: int, trials: int, alpha: float = 0.05) -> tuple[bool, float]:
    """One-sided binomial sign test against ``p = 1/2``; returns ``(passed, p_value)``."""
    p = float(sps.binomtest(int(successes), int(trials), 0.5, alternative="greater").pvalue)
    return p < alpha, p


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(sps.ks_2samp(np.asarray(a), np.asarray(b)).statistic)


def deep_grid(points, depth: int, dx: float = 0.05, kappa: float = 0.5) -> Grid:
    """Window covering ``points`` padded for diffusion over ``depth`` steps."""
    return hull_grid(points, diffusive_margin(depth, kappa), dx)
