"""Kick-forced viscous Burgers dynamics through the Hopf-Cole transform.

Velocity ``u``, potential ``W`` (``u = W'``) and the heat-equation state
``phi = exp(-W / 2kappa)`` describe the same profile.  One kick step maps
``log phi`` to ``log K[exp(log phi - F_k/2kappa)]`` and renormalizes so that
``log phi(0) = 0``; the removed constants accumulate in ``log_c``.

The canonical velocity at time ``n`` is ``u(n, x) = x - E[gamma_{n-1}]``,
the mean backward step of the polymer ending at ``(n, x)``; it equals
``-2kappa d/dx log phi(n, x)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import Grid, LogDensity, get_kernel
from .partition import iter_forward


@dataclass(frozen=True, eq=False)
class VelocityProfile:
    """Velocity ``u(x_i)`` on a grid; ``edge`` flags nodes using one-sided differences."""

    grid: Grid
    values: np.ndarray
    slope: float | None = None
    edge: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.count,):
            raise ValueError("velocity array does not match the grid")
        object.__setattr__(self, "values", v)

    def window(self, lo: float, hi: float) -> np.ndarray:
        x = self.grid.nodes
        return (x >= lo - 1e-9) & (x <= hi + 1e-9)


@dataclass(frozen=True, eq=False)
class PotentialProfile:
    """Potential ``W(x_i)`` normalized to ``W(0) = 0``; ``0`` must be a grid node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.count,):
            raise ValueError("potential array does not match the grid")
        if not np.isfinite(v).all():
            raise ValueError("potential must be finite")
        object.__setattr__(self, "values", v - v[self.grid.index_of(0.0)])

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "PotentialProfile":
        return cls(grid, fn(grid.nodes))

    def lipschitz(self) -> float:
        return float(np.max(np.abs(np.diff(self.values)))) / self.grid.dx


@dataclass(frozen=True, eq=False)
class HopfColeState:
    """``log phi`` at integer time ``time`` plus the running ``log C``."""

    grid: Grid
    log_phi: np.ndarray
    time: int = 0
    log_c: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.log_phi, dtype=float)
        if v.shape != (self.grid.count,) or np.isnan(v).any() or np.isposinf(v).any():
            raise ValueError("invalid log phi array")
        object.__setattr__(self, "log_phi", v)

    @property
    def density(self) -> LogDensity:
        return LogDensity(self.grid, self.log_phi)


def hopf_cole(W: PotentialProfile, kappa: float = 0.5, time: int = 0) -> HopfColeState:
    """``log phi = -W / 2kappa``."""
    return HopfColeState(W.grid, -W.values / (2.0 * kappa), time)


def inverse_hopf_cole(state: HopfColeState, kappa: float = 0.5) -> PotentialProfile:
    """``W = -2kappa log phi`` renormalized to ``W(0) = 0``."""
    return PotentialProfile(state.grid, -2.0 * kappa * state.log_phi)


def kick_step(env, state: HopfColeState, band: float | None = None) -> HopfColeState:
    """Kick at ``state.time`` followed by one heat step; renormalized at ``x = 0``."""
    if state.grid != env.grid:
        raise ValueError("state is not on the environment grid")
    k = state.time
    kern = get_kernel(env.grid, env.kappa, band)
    out = kern.log_convolve(state.log_phi + env.log_weight(k))
    c = out[env.grid.index_of(0.0)]
    if not np.isfinite(c):
        raise ValueError(f"mass collapse at time {k + 1}: phi(0) vanished")
    return HopfColeState(env.grid, out - c, k + 1, state.log_c - float(c))


def kick_evolve(env, state: HopfColeState, n: int, band: float | None = None) -> HopfColeState:
    """Evolve from ``state.time`` to ``n``, accumulating ``log C`` with ``V(n, 0) = 1``."""
    if n < state.time:
        raise ValueError("target time precedes the state")
    if n > state.time and not env.covers(state.time, n):
        raise ValueError(f"times [{state.time}, {n}) outside environment range {env.time_range}")
    for _ in range(n - state.time):
        state = kick_step(env, state, band)
    return state


def velocity_from_state(state: HopfColeState, kappa: float = 0.5) -> VelocityProfile:
    """``u = -2kappa d/dx log phi`` by centered differences (one-sided at the two edge nodes)."""
    d = np.gradient(state.log_phi, state.grid.dx, edge_order=1)
    edge = np.zeros(state.grid.count, dtype=bool)
    edge[[0, -1]] = True
    return VelocityProfile(state.grid, -2.0 * kappa * d, edge=edge, meta={"time": state.time})


def velocity_after_kick(env, state: HopfColeState, band: float | None = None) -> VelocityProfile:
    """Exact grid velocity at ``state.time + 1``: ``x - E[y | x]`` for one kick step.

    The conditional law of the previous position ``y`` given the current
    ``x`` has weight ``phi(y) exp(-F(y)/2kappa) g_{2kappa}(x - y)``.
    """
    kern = get_kernel(env.grid, env.kappa, band)
    mean = kern.conditional_mean(state.log_phi + env.log_weight(state.time))
    return VelocityProfile(env.grid, env.grid.nodes - mean, meta={"time": state.time + 1})


def _start_node(grid: Grid, y: float) -> float:
    return grid.coordinate(grid.index_of(y, snap=True))


def global_solution_approx(env, v: float, n: int, N: int, band: float | None = None) -> VelocityProfile:
    """``u^N_v(n, x) = x - E[gamma_{n-1}]`` under the polymer from ``(N, vN)`` to ``(n, x)``.

    ``vN`` is snapped to the nearest node; the snapped point is recorded in
    ``meta``.
    """
    if not N < n - 2:
        raise ValueError("need N < n - 2")
    grid = env.grid
    y0 = v * N
    if not grid.contains(y0):
        raise ValueError(f"start point vN = {y0} lies outside the window")
    y0 = _start_node(grid, y0)
    f = None
    for _, f in iter_forward(env, N, n - 1, LogDensity.atom(grid, y0).log_values, band):
        pass
    kern = get_kernel(grid, env.kappa, band)
    mean = kern.conditional_mean(f + env.log_weight(n - 1))
    return VelocityProfile(grid, grid.nodes - mean, slope=v, meta={"depth": N, "time": n, "start": y0})


def global_state_approx(env, v: float, n: int, N: int, band: float | None = None) -> HopfColeState:
    """``log V^N_v(n, .)``: the forward slice from ``(N, vN)`` normalized at ``x = 0``."""
    grid = env.grid
    y0 = _start_node(grid, v * N)
    f = None
    for _, f in iter_forward(env, N, n, LogDensity.atom(grid, y0).log_values, band):
        pass
    c = f[grid.index_of(0.0)]
    return HopfColeState(grid, f - c, n, -float(c))


def monotonicity_residual(u: VelocityProfile) -> float:
    """``max_i (x_i - u_i) - (x_{i+1} - u_{i+1})``; nonpositive when ``x - u`` is nondecreasing."""
    d = u.grid.nodes - u.values
    return float(np.max(d[:-1] - d[1:]))


def secant_slopes(W: PotentialProfile, lo: float, hi: float) -> tuple[float, float]:
    """Secant slopes ``W(lo)/lo`` and ``W(hi)/hi`` (``W(0) = 0``), a proxy for the asymptotic slopes."""
    if not lo < 0 < hi:
        raise ValueError("need lo < 0 < hi")
    g = W.grid
    wl = W.values[g.index_of(lo, snap=True)]
    wh = W.values[g.index_of(hi, snap=True)]
    return float(wl / lo), float(wh / hi)


def edge_slopes(u: VelocityProfile, width: float, inset: float = 0.0) -> tuple[float, float]:
    """Mean of ``u`` over ``width``-wide strips at the left and right ends, ``inset`` away from the edges."""
    g = u.grid
    lo = g.x_min + inset
    hi = g.x_max - inset
    left = u.window(lo, lo + width)
    right = u.window(hi - width, hi)
    return float(u.values[left].mean()), float(u.values[right].mean())


class BasinError(ValueError):
    """Initial condition outside the checked basin of attraction."""


def check_basin(W: PotentialProfile, v: float, lo: float, hi: float, margin: float = 0.1) -> str:
    """Name the basin condition ``W`` satisfies for slope ``v``, or raise :class:`BasinError`.

    Slopes are secants from 0 to ``lo`` and ``hi``.  Limits required to equal
    ``v`` may deviate by ``margin``; one-sided bounds are relaxed by
    ``margin``; strict bounds are kept strict.
    """
    s_minus, s_plus = secant_slopes(W, lo, hi)
    if v == 0:
        if s_plus >= -margin and s_minus <= margin:
            return "no-flux-from-infinity"
        raise BasinError(f"no-flux-from-infinity violated: slopes ({s_minus:.3f}, {s_plus:.3f})")
    if v > 0:
        if abs(s_minus - v) <= margin and s_plus > -v:
            return "flux-from-left-wins"
        raise BasinError(f"flux-from-left-wins violated for v={v}: slopes ({s_minus:.3f}, {s_plus:.3f})")
    if abs(s_plus - v) <= margin and s_minus < -v:
        return "flux-from-right-wins"
    raise BasinError(f"flux-from-right-wins violated for v={v}: slopes ({s_minus:.3f}, {s_plus:.3f})")


@dataclass(frozen=True)
class PullbackRow:
    initial_id: str
    depth: int
    sup_diff: float


def pullback_experiment(env, initials: dict, v: float, depths, n: int, eval_window: tuple[float, float],
                        reference: VelocityProfile | None = None, reference_depth: int | None = None,
                        band: float | None = None, basin_window: tuple[float, float] | None = None,
                        margin: float = 0.1) -> list[PullbackRow]:
    """Distance of ``Psi^{m,n} w`` from a deep approximant of the global solution.

    ``initials`` maps ids to :class:`PotentialProfile` on the environment
    grid.  For every start time ``m`` in ``depths`` the initial profile is
    evolved from ``m`` to ``n`` and compared on ``eval_window`` with
    ``reference`` (default: the velocity of ``log V^N_v(n, .)`` at the
    deepest time ``N = reference_depth``, differentiated the same way).
    """
    grid = env.grid
    depths = sorted(depths, reverse=True)
    bw = basin_window or (grid.x_min + 0.25 * (grid.x_max - grid.x_min), grid.x_max - 0.25 * (grid.x_max - grid.x_min))
    for key, W in initials.items():
        try:
            check_basin(W, v, bw[0], bw[1], margin)
        except BasinError as e:
            raise BasinError(f"initial condition {key!r}: {e}") from None
    if reference is None:
        N = reference_depth if reference_depth is not None else min(depths)
        reference = velocity_from_state(global_state_approx(env, v, n, N, band), env.kappa)
    mask = reference.window(*eval_window)
    rows = []
    for key, W in initials.items():
        for m in depths:
            st = kick_evolve(env, hopf_cole(W, env.kappa, m), n, band)
            u = velocity_from_state(st, env.kappa)
            rows.append(PullbackRow(str(key), m, float(np.max(np.abs(u.values[mask] - reference.values[mask])))))
    return rows


def bump_solution(x, t: float, v: float, beta: float, s: float, kappa: float = 0.5):
    """Unforced solution started from ``phi_0 = exp(-v x / 2kappa) (1 + beta g_{2kappa s}(x))``.

    After time ``t``: ``u = v - 2kappa d/dx log(1 + beta g_{2kappa(t+s)}(x - v t))``.
    """
    x = np.asarray(x, dtype=float)
    var = 2.0 * kappa * (t + s)
    z = x - v * t
    g = np.exp(-z * z / (2 * var)) / math.sqrt(2 * math.pi * var)
    return v + 2.0 * kappa * beta * g * z / var / (1.0 + beta * g)


def bump_potential(grid: Grid, v: float, beta: float, s: float, kappa: float = 0.5) -> PotentialProfile:
    """``W`` with ``exp(-W/2kappa) = exp(-v x/2kappa) (1 + beta g_{2kappa s}(x))``."""
    x = grid.nodes
    var = 2.0 * kappa * s
    g = np.exp(-x * x / (2 * var)) / math.sqrt(2 * math.pi * var)
    return PotentialProfile(grid, v * x - 2.0 * kappa * np.log1p(beta * g))


def write_profile_csv(path, u: VelocityProfile, W: PotentialProfile | None = None,
                      state: HopfColeState | None = None) -> None:
    """CSV with header ``x,u,W,log_phi``; missing columns are left empty."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u", "W", "log_phi"])
        for i, x in enumerate(u.grid.nodes):
            w.writerow([repr(float(x)), repr(float(u.values[i])),
                        "" if W is None else repr(float(W.values[i])),
                        "" if state is None else repr(float(state.log_phi[i]))])


def write_pullback_csv(path, rows) -> None:
    """CSV with header ``initial_id,depth,sup_diff``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["initial_id", "depth", "sup_diff"])
        for r in rows:
            w.writerow([r.initial_id, r.depth, repr(r.sup_diff)])
