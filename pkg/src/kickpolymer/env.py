"""Random kick potentials ``F_k(x)`` on a space-time grid.

Fields are generated on the global lattice ``dx * Z`` from counter-keyed
substreams: the noise behind a block of lattice sites at time ``k`` depends
only on ``(master_seed, realization_index, k, block)``.  Two windows that
overlap therefore carry identical values on the overlap, and generation order
(or thread count) never changes a single bit.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .lattice import Grid, LogDensity

GENERATORS = ("ma-gaussian", "shot-noise", "iid-cell", "constant")

# substream tags, one per random ingredient
_TAG_NORMAL, _TAG_SHOT, _TAG_CELL, _TAG_PHASE = 1, 2, 3, 4
_CHUNK = 1024

SNAPSHOT_MAGIC = b"KPOLYENV"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class EnvironmentSpec:
    """Law of the potential.

    generator_kind
        ``ma-gaussian``: moving average of lattice white noise with a
        ``cos^2`` kernel of half-width ``correlation_range``; centered
        Gaussian marginal with standard deviation ``amplitude``.
        ``shot-noise``: Poisson points (``intensity`` per unit length) with
        uniform marks in ``[-1, 1]`` smoothed by a ``cos^2`` bump of radius
        ``correlation_range``.
        ``iid-cell``: cells of width ``correlation_range`` with a randomly
        phased cell lattice, each carrying an independent uniform amplitude
        in ``[-1, 1]`` times a ``cos^2`` bump.
        ``constant``: ``F == amplitude`` (degenerate, used as an oracle).
    """

    generator_kind: str = "ma-gaussian"
    amplitude: float = 1.0
    correlation_range: float = 1.0
    kappa: float = 0.5
    master_seed: int = 0
    intensity: float = 1.0

    def __post_init__(self):
        if self.generator_kind not in GENERATORS:
            raise ValueError(f"unknown generator_kind {self.generator_kind!r}; choose from {GENERATORS}")
        if not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if not (self.correlation_range >= 0 and math.isfinite(self.correlation_range)):
            raise ValueError("correlation_range must be >= 0")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValueError("kappa must be positive")
        if not (0 <= int(self.master_seed) < 2**64) or int(self.master_seed) != self.master_seed:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")

    @property
    def eta(self) -> float:
        """Exponential-moment parameter of ``sup |F|`` over unit cells.

        Every shipped generator has all exponential moments, so this is
        ``inf``; it is documentation only and never used as a tunable.
        """
        return math.inf

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentSpec":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Environment:
    """A realization ``F_k(x_i)`` for integer times ``t0 <= k < t1``."""

    spec: EnvironmentSpec
    t0: int
    grid: Grid
    values: np.ndarray
    realization_index: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.grid.count or v.shape[0] < 1:
            raise ValueError(f"values must have shape (T, {self.grid.count})")
        if not np.isfinite(v).all():
            raise ValueError("environment values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def time_range(self) -> tuple[int, int]:
        return (self.t0, self.t0 + self.values.shape[0])

    @property
    def kappa(self) -> float:
        return self.spec.kappa

    def covers(self, m: int, n: int) -> bool:
        """True if slices for all times ``m <= k < n`` are present."""
        return self.t0 <= m and n <= self.t0 + self.values.shape[0]

    def F(self, k: int) -> np.ndarray:
        i = k - self.t0
        if not 0 <= i < self.values.shape[0]:
            raise IndexError(f"time {k} outside environment range {self.time_range}")
        return self.values[i]

    def log_weight(self, k: int) -> np.ndarray:
        """``-F_k / (2 kappa)``, the log of the kick factor."""
        return -self.F(k) / (2.0 * self.kappa)

    def key(self) -> dict:
        """Everything needed to regenerate this realization bit-for-bit."""
        return {
            "spec": self.spec.to_dict(),
            "realization_index": self.realization_index,
            "time_range": list(self.time_range),
            "grid": self.grid.to_dict(),
            **self.meta,
        }


def _zz(i: int) -> int:
    """Zigzag map Z -> N so negative times and cells can key a SeedSequence."""
    return 2 * i if i >= 0 else -2 * i - 1


def _rng(spec: EnvironmentSpec, tag: int, realization: int, t: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(spec.master_seed), spawn_key=(tag, _zz(realization), _zz(t), _zz(block)))
    return np.random.Generator(np.random.PCG64(ss))


def _bump(s):
    """C^1 bump ``cos^2(pi s / 2)`` on ``|s| < 1``."""
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, np.cos(0.5 * math.pi * s) ** 2, 0.0)


def _lattice_normals(spec, realization, t, j_lo, j_hi):
    """Standard normals attached to lattice sites ``j_lo..j_hi``."""
    c_lo, c_hi = j_lo // _CHUNK, j_hi // _CHUNK
    parts = [_rng(spec, _TAG_NORMAL, realization, t, c).standard_normal(_CHUNK) for c in range(c_lo, c_hi + 1)]
    z = np.concatenate(parts)
    off = j_lo - c_lo * _CHUNK
    return z[off:off + (j_hi - j_lo + 1)]


def _ma_weights(spec: EnvironmentSpec, dx: float) -> np.ndarray:
    r = int(math.ceil(spec.correlation_range / dx - 1e-9))
    if r == 0:
        return np.ones(1)
    w = _bump(np.arange(-r, r + 1) * dx / spec.correlation_range)
    return w / math.sqrt(np.sum(w * w))


def _slice_ma(spec, grid, realization, t):
    w = _ma_weights(spec, grid.dx)
    r = (len(w) - 1) // 2
    j0 = grid.origin_index
    z = _lattice_normals(spec, realization, t, j0 - r, j0 + grid.count - 1 + r)
    return spec.amplitude * np.convolve(z, w, mode="valid")


def _slice_shot(spec, grid, realization, t):
    r = max(spec.correlation_range, grid.dx)
    lo, hi = grid.x_min - r, grid.x_max + r
    c_lo, c_hi = math.floor(lo), math.floor(hi)
    pts, marks = [], []
    for chunk in range(c_lo // _CHUNK, c_hi // _CHUNK + 1):
        rng = _rng(spec, _TAG_SHOT, realization, t, chunk)
        counts = rng.poisson(spec.intensity, _CHUNK)
        tot = int(counts.sum())
        u = rng.random(tot)
        mk = rng.uniform(-1.0, 1.0, tot)
        cells = np.repeat(chunk * _CHUNK + np.arange(_CHUNK), counts)
        p = cells + u
        keep = (p > lo) & (p < hi)
        pts.append(p[keep])
        marks.append(mk[keep])
    p = np.concatenate(pts)
    mk = np.concatenate(marks)
    out = np.zeros(grid.count)
    if p.size:
        width = int(math.ceil(r / grid.dx)) + 1
        first = np.floor((p - r - grid.x_min) / grid.dx).astype(np.int64)
        idx = first[:, None] + np.arange(2 * width + 2)[None, :]
        valid = (idx >= 0) & (idx < grid.count)
        xs = (grid.origin_index + idx) * grid.dx
        contrib = mk[:, None] * _bump((xs - p[:, None]) / r)
        np.add.at(out, idx[valid], contrib[valid])
    return spec.amplitude * out


def _slice_cell(spec, grid, realization, t):
    ell = max(spec.correlation_range, grid.dx)
    phase = _rng(spec, _TAG_PHASE, realization, t, 0).random() * ell
    x = grid.nodes
    cell = np.floor((x - phase) / ell).astype(np.int64)
    c_lo, c_hi = int(cell.min()), int(cell.max())
    amps = np.concatenate([
        _rng(spec, _TAG_CELL, realization, t, ch).uniform(-1.0, 1.0, _CHUNK)
        for ch in range(c_lo // _CHUNK, c_hi // _CHUNK + 1)
    ])
    a = amps[cell - (c_lo // _CHUNK) * _CHUNK]
    center = phase + (cell + 0.5) * ell
    return spec.amplitude * a * _bump(2.0 * (x - center) / ell)


_SLICERS = {"ma-gaussian": _slice_ma, "shot-noise": _slice_shot, "iid-cell": _slice_cell}


def sample_slice(spec: EnvironmentSpec, grid: Grid, t: int, realization_index: int = 0) -> np.ndarray:
    """The potential ``F_t`` on ``grid`` for one realization."""
    if spec.generator_kind == "constant":
        return np.full(grid.count, float(spec.amplitude))
    if spec.amplitude == 0:
        return np.zeros(grid.count)
    return _SLICERS[spec.generator_kind](spec, grid, realization_index, t)


def sample_environment(spec: EnvironmentSpec, time_range: tuple[int, int], grid: Grid,
                       realization_index: int = 0) -> Environment:
    """Sample slices ``F_k`` for ``time_range[0] <= k < time_range[1]``."""
    m, n = int(time_range[0]), int(time_range[1])
    if n <= m:
        raise ValueError(f"empty time range {time_range}")
    if not grid.aligned:
        raise ValueError("grid must be aligned to the dx lattice (use Grid.covering)")
    if spec.correlation_range > 0.5 * (grid.x_max - grid.x_min):
        raise ValueError("correlation_range exceeds half the grid extent")
    values = np.empty((n - m, grid.count))
    for k in range(m, n):
        values[k - m] = sample_slice(spec, grid, k, realization_index)
    return Environment(spec, m, grid, values, realization_index)


def constant_environment(value: float, time_range: tuple[int, int], grid: Grid, kappa: float = 0.5) -> Environment:
    """Deterministic ``F == value`` environment."""
    spec = EnvironmentSpec("constant", amplitude=value, correlation_range=0.0, kappa=kappa)
    return sample_environment(spec, time_range, grid)


def offset_environment(env: Environment, c: float) -> Environment:
    """The same realization with ``F + c`` (a constant tilt of every partition function)."""
    meta = {**env.meta, "offset": env.meta.get("offset", 0.0) + c}
    return Environment(env.spec, env.t0, env.grid, env.values + c, env.realization_index, meta)


def estimate_lambda(spec: EnvironmentSpec, sample_count: int, dx: float = 0.05) -> tuple[float, float]:
    """Monte Carlo estimate of ``E exp(-F_0(0) / 2 kappa)`` and its standard error.

    Sample ``i`` is the value at the origin of realization ``i``.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be >= 2")
    grid = Grid(0.0, dx, 2) if spec.correlation_range <= dx else Grid.covering(-spec.correlation_range, spec.correlation_range, dx)
    i0 = grid.index_of(0.0)
    f = np.array([sample_slice(spec, grid, 0, r)[i0] for r in range(sample_count)])
    w = np.exp(-f / (2.0 * spec.kappa))
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(sample_count))


def analytic_lambda(spec: EnvironmentSpec) -> float:
    """Exact ``E exp(-F/2kappa)`` for each shipped generator."""
    c = spec.amplitude / (2.0 * spec.kappa)
    kind = spec.generator_kind
    if kind == "constant":
        return math.exp(-c)
    if c == 0:
        return 1.0
    if kind == "ma-gaussian":
        return math.exp(0.5 * c * c)

    def sinhc(y):
        return 1.0 if y == 0 else math.sinh(y) / y

    if kind == "iid-cell":
        val, _ = integrate.quad(lambda s: 0.5 * sinhc(c * math.cos(0.5 * math.pi * s) ** 2), -1.0, 1.0)
        return val
    # shot noise, Campbell's formula with symmetric uniform marks
    r = spec.correlation_range
    val, _ = integrate.quad(lambda s: sinhc(c * math.cos(0.5 * math.pi * s) ** 2) - 1.0, -1.0, 1.0)
    return math.exp(spec.intensity * r * val)


@dataclass(frozen=True)
class Shift:
    """Space-time shift ``(theta^{n,x} F)_m(y) = F_{n+m}(x+y)``."""

    n: int = 0
    x: float = 0.0


@dataclass(frozen=True)
class Shear:
    """Galilean shear ``(L^v F)_k(y) = F_k(y + v k)``.

    With ``strict=True`` every offset ``v k`` must be a multiple of ``dx``;
    otherwise values are linearly interpolated between nodes.
    """

    v: float = 0.0
    strict: bool = True


def transform_environment(env: Environment, kind: Shift | Shear, max_loss: float = 0.5) -> Environment:
    """Apply a shift or shear; the result lives on the overlap window.

    Nodes whose source point falls outside the original grid are cropped.
    Losing more than ``max_loss`` of the nodes is an error.
    """
    g = env.grid
    m, n = env.time_range
    if isinstance(kind, Shift):
        times = list(range(m, n))
        offsets = [kind.x] * len(times)
        new_t0 = m - kind.n
        strict = True
    elif isinstance(kind, Shear):
        times = list(range(m, n))
        offsets = [kind.v * k for k in times]
        new_t0 = m
        strict = kind.strict
    else:
        raise TypeError(f"unsupported transform {kind!r}")
    lo = g.x_min - min(offsets)
    hi = g.x_max - max(offsets)
    i0 = int(math.ceil((lo - g.x_min) / g.dx - 1e-9))
    i1 = int(math.floor((hi - g.x_min) / g.dx + 1e-9)) + 1
    i0, i1 = max(i0, 0), min(i1, g.count)
    if i1 - i0 < 2 or (g.count - (i1 - i0)) > max_loss * g.count:
        raise ValueError(f"transform {kind!r} loses too much of the window")
    new_grid = g.subgrid(i0, i1)
    vals = np.empty((len(times), new_grid.count))
    for r, (k, off) in enumerate(zip(times, offsets)):
        src = env.F(k)
        pos = (new_grid.x_min + off - g.x_min) / g.dx
        p0 = int(round(pos))
        if abs(pos - p0) < 1e-9:
            vals[r] = src[p0:p0 + new_grid.count]
        elif strict:
            raise ValueError(f"offset {off} is not a multiple of dx={g.dx} (strict mode)")
        else:
            idx = pos + np.arange(new_grid.count)
            vals[r] = np.interp(idx, np.arange(g.count), src)
    meta = dict(env.meta)
    meta.setdefault("transforms", [])
    meta = {**meta, "transforms": meta["transforms"] + [repr(kind)]}
    return Environment(env.spec, new_t0, new_grid, vals, env.realization_index, meta)


def save_snapshot(path, env: Environment, extras: dict[str, LogDensity] | None = None) -> None:
    """Write an environment (plus optional named log-densities) to ``path``.

    Layout, all integers little-endian::

        0   8 bytes  magic b"KPOLYENV"
        8   u32      format version (1)
        12  u64      header length H
        20  H bytes  UTF-8 JSON header
        ..  float64  arrays in the order of header["arrays"], C order

    The header holds the environment key (spec, seeds, grid, time range) and
    ``arrays``: a list of ``{"name", "shape", "grid"}`` records.  The first
    array is ``values`` with shape ``(T, count)``; extras are stored as
    ``logdensity/<name>`` with ``-inf`` preserved.
    """
    extras = extras or {}
    arrays = [("values", env.values, env.grid)]
    arrays += [(f"logdensity/{k}", d.log_values, d.grid) for k, d in extras.items()]
    header = {
        "format": "kickpolymer-env-snapshot",
        "version": SNAPSHOT_VERSION,
        "environment": env.key(),
        "t0": env.t0,
        "arrays": [{"name": nm, "shape": list(a.shape), "grid": gr.to_dict()} for nm, a, gr in arrays],
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<IQ", SNAPSHOT_VERSION, len(hb)))
        fh.write(hb)
        for _, a, _ in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_snapshot(path) -> tuple[Environment, dict[str, LogDensity]]:
    data = Path(path).read_bytes()
    if data[:8] != SNAPSHOT_MAGIC:
        raise ValueError("not an environment snapshot")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    header = json.loads(data[20:20 + hlen].decode("utf-8"))
    pos = 20 + hlen
    arrays = {}
    for rec in header["arrays"]:
        size = int(np.prod(rec["shape"]))
        a = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(rec["shape"]).astype(float)
        pos += 8 * size
        arrays[rec["name"]] = (a, Grid(**rec["grid"]))
    key = header["environment"]
    spec = EnvironmentSpec.from_dict(key["spec"])
    values, grid = arrays.pop("values")
    meta = {k: v for k, v in key.items() if k not in ("spec", "realization_index", "time_range", "grid")}
    env = Environment(spec, header["t0"], grid, values, key["realization_index"], meta)
    extras = {nm.split("/", 1)[1]: LogDensity(gr, a) for nm, (a, gr) in arrays.items()}
    return env, extras
