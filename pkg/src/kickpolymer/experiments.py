"""Experiment configuration, campaigns and reproducible reports.

A configuration is a flat text file of ``key = <json value>`` lines (``#``
starts a comment).  Every campaign writes CSV tables, ``ledger.txt``,
``report.json`` and a ``manifest.json`` holding the SHA-256 of every other
output.  Execution settings (``out``, ``threads``) are excluded from the
configuration hash and from every artifact, so reports are byte-identical
across thread counts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import burgers as bg
from .env import GENERATORS, EnvironmentSpec, load_snapshot, sample_environment, save_snapshot
from .lattice import Grid, auto_grid
from .polymer import PolymerMeasure, TerminalMeasure, sample_paths, write_marginals_csv, write_paths_csv
from .stats import (DegenerateFit, busemann_estimate, busemann_pair_deltas, deep_grid, fluctuation_exponent, free_energy_samples,
                    overlap_curve, parallel_map, quadratic_shape_fit, shape_estimate, sign_test,
                    thermodynamic_tv_curve, transversal_exponent)
from .validation import SCALES, Ledger, validate

KINDS = ("validate", "gen-env", "shape", "exponents", "busemann", "overlap", "burgers", "pullback", "sample-paths")
MANIFEST_SCHEMA = 1
EXECUTION_KEYS = ("out", "threads")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every offending key."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{k}: {msg}" for k, msg in problems))


@dataclass
class ExperimentConfig:
    kind: str = "validate"
    seed: int = 0
    generator: str = "ma-gaussian"
    amplitude: float | None = None
    correlation_range: float = 1.0
    kappa: float = 0.5
    intensity: float = 1.0
    dx: float = 0.05
    window: float | None = None
    band: float | None = 8.0
    n: int = 32
    n_list: list = field(default_factory=lambda: [16, 32, 64])
    N_list: list = field(default_factory=lambda: [-4, -8, -16, -32, -64, -128])
    v: float = 0.25
    v_list: list = field(default_factory=lambda: [0.0, 0.25, -0.25, 0.5, -0.5])
    replicates: int = 16
    environments: int = 10
    paths: int = 256
    scale: str = "full"
    curvature_tol: float = 0.05
    chi_max: float = 0.6
    xi_max: float = 0.8
    out: str = "out"
    threads: int = 1

    # --- serialization

    def to_text(self) -> str:
        lines = [f"{f.name} = {json.dumps(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_mapping(parse_config_text(text))

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        bad = [(k, "unknown key") for k in values if k not in known]
        if bad:
            raise ConfigError(bad)
        cfg = replace(cls(), **values)
        cfg.check()
        return cfg

    def canonical(self) -> str:
        """Serialized configuration without execution settings."""
        return "".join(line + "\n" for line in self.to_text().splitlines()
                       if line.split(" = ", 1)[0] not in EXECUTION_KEYS)

    def content_hash(self) -> str:
        """Git blob hash of :meth:`canonical`."""
        body = self.canonical().encode("utf-8")
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()

    def spec(self) -> EnvironmentSpec:
        return EnvironmentSpec(self.generator, 1.0 if self.amplitude is None else self.amplitude,
                               self.correlation_range, self.kappa, self.seed, self.intensity)

    # --- validation

    def check(self) -> None:
        """Raise :class:`ConfigError` listing every problem at once."""
        p: list[tuple[str, str]] = []

        def need(ok, key, msg):
            if not ok:
                p.append((key, msg))

        def num(x):
            return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)

        def integer(x):
            return isinstance(x, int) and not isinstance(x, bool)

        need(self.kind in KINDS, "kind", f"must be one of {KINDS}")
        need(integer(self.seed) and self.seed >= 0, "seed", "must be a nonnegative integer")
        need(self.generator in GENERATORS, "generator", f"must be one of {GENERATORS}")
        need(self.amplitude is None or (num(self.amplitude) and self.amplitude >= 0), "amplitude",
             "must be null or a nonnegative number")
        need(num(self.correlation_range) and self.correlation_range > 0, "correlation_range", "must be positive")
        need(num(self.kappa) and self.kappa > 0, "kappa", "must be positive")
        need(num(self.intensity) and self.intensity > 0, "intensity", "must be positive")
        need(num(self.dx) and self.dx > 0, "dx", "must be positive")
        need(self.window is None or (num(self.window) and self.window > 0), "window", "must be null or positive")
        need(self.band is None or (num(self.band) and self.band > 0), "band", "must be null or positive")
        need(integer(self.n) and self.n >= 1, "n", "must be a positive integer")
        need(isinstance(self.n_list, list) and len(self.n_list) >= 2 and all(integer(k) and k >= 1 for k in self.n_list)
             and len(set(self.n_list)) == len(self.n_list), "n_list", "needs two or more distinct positive integers")
        need(isinstance(self.N_list, list) and len(self.N_list) >= 2 and all(integer(k) and k < 0 for k in self.N_list)
             and len(set(self.N_list)) == len(self.N_list), "N_list", "needs two or more distinct negative integers")
        need(num(self.v), "v", "must be a number")
        need(isinstance(self.v_list, list) and len(self.v_list) >= 1 and all(num(x) for x in self.v_list),
             "v_list", "must be a nonempty list of numbers")
        need(integer(self.replicates) and self.replicates >= 2, "replicates", "must be an integer >= 2")
        need(integer(self.environments) and self.environments >= 1, "environments", "must be a positive integer")
        need(integer(self.paths) and self.paths >= 1, "paths", "must be a positive integer")
        need(self.scale in SCALES, "scale", f"must be one of {tuple(SCALES)}")
        for key in ("curvature_tol", "chi_max", "xi_max"):
            need(num(getattr(self, key)) and getattr(self, key) > 0, key, "must be positive")
        need(isinstance(self.out, str) and self.out != "", "out", "must be a nonempty path")
        need(integer(self.threads) and self.threads >= 1, "threads", "must be a positive integer")
        if p:
            raise ConfigError(p)


def parse_config_text(text: str) -> dict:
    out, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            problems.append((f"line {lineno}", "expected 'key = value'"))
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            problems.append((key, f"value {val!r} is not valid JSON"))
    if problems:
        raise ConfigError(problems)
    return out


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    ledger: Ledger
    manifest: dict
    files: dict

    @property
    def passed(self) -> bool:
        return self.ledger.all_passed

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


# ------------------------------------------------------------ campaigns

def _grid(cfg: ExperimentConfig, default: Grid) -> Grid:
    return Grid.symmetric(cfg.window, cfg.dx) if cfg.window is not None else default


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _env_key(spec, time_range, grid, i):
    return {"spec": spec.to_dict(), "time_range": list(time_range), "grid": grid.to_dict(), "realization_index": i}


def _gen_env(cfg, led, out, envs):
    spec = cfg.spec()
    grid = _grid(cfg, auto_grid(cfg.n, 0.0, cfg.dx))
    env = sample_environment(spec, (0, cfg.n), grid, 0)
    envs.append(env.key())
    save_snapshot(out / "environment.kpe", env)
    back, _ = load_snapshot(out / "environment.kpe")
    led.add(None, "snapshot round trip", float(np.max(np.abs(back.values - env.values))), 0.0,
            np.array_equal(back.values, env.values))


def _shape(cfg, led, out, envs):
    spec = cfg.spec()
    grid = _grid(cfg, auto_grid(cfg.n, max(abs(v) for v in cfg.v_list), cfg.dx))
    tab = shape_estimate(spec, cfg.n, cfg.v_list, max(cfg.replicates, 8), cfg.dx, cfg.band, cfg.threads, grid=grid)
    envs.extend(tab.keys)
    tab.write_csv(out / "shape.csv")
    try:
        fit = quadratic_shape_fit(tab, spec.kappa)
    except ValueError as e:
        led.add(None, "quadratic shape fit", math.nan, cfg.curvature_tol, False, str(e))
        return
    _write_rows(out / "shape_fit.csv", ["alpha0", "curvature", "rms"], [[fit.alpha0, fit.curvature, fit.rms]])
    err = abs(fit.curvature + 0.5)
    led.add(None, "shape curvature |c + 1/2|", err, cfg.curvature_tol, err <= cfg.curvature_tol,
            f"alpha0={fit.alpha0:.6f} curvature={fit.curvature:.6f}")


def _exponents(cfg, led, out, envs):
    spec = cfg.spec()
    grid = _grid(cfg, auto_grid(max(cfg.n_list), 0.0, cfg.dx))
    envs.extend(_env_key(spec, (0, max(cfg.n_list)), grid, i) for i in range(cfg.replicates))
    data = free_energy_samples(spec, cfg.n_list, cfg.replicates, cfg.dx, cfg.band, cfg.threads, grid=grid)
    rows = []
    try:
        chi = fluctuation_exponent(spec, cfg.n_list, cfg.replicates, seed=cfg.seed, samples=data)
        rows.append(["chi", chi.exponent, chi.ci[0], chi.ci[1]])
        led.add(None, "fluctuation exponent CI upper bound", chi.ci[1], cfg.chi_max, chi.ci[1] < cfg.chi_max,
                f"chi={chi.exponent:.4f}")
    except DegenerateFit as e:
        led.add(None, "fluctuation exponent CI upper bound", 0.0, cfg.chi_max, True, f"degenerate: {e}")
    xi = transversal_exponent(spec, cfg.n_list, cfg.replicates, band=cfg.band, threads=cfg.threads,
                              paths=cfg.paths, seed=cfg.seed, dx=cfg.dx)
    rows.append(["xi", xi.exponent, xi.ci[0], xi.ci[1]])
    led.add(None, "transversal exponent CI upper bound", xi.ci[1], cfg.xi_max, xi.ci[1] < cfg.xi_max,
            f"xi={xi.exponent:.4f}")
    _write_rows(out / "exponents.csv", ["exponent", "estimate", "ci_low", "ci_high"], rows)
    _write_rows(out / "free_energy.csv", ["replicate"] + [f"n={n}" for n in sorted(cfg.n_list)],
                [[i] + list(r) for i, r in enumerate(data)])


def _deep_env(cfg, points, depth, i, time_range):
    grid = _grid(cfg, deep_grid(points, depth, cfg.dx, cfg.kappa))
    return sample_environment(cfg.spec(), time_range, grid, i)


def _busemann(cfg, led, out, envs):
    Ns = sorted(cfg.N_list, reverse=True)
    a, b = (0, 0.0), (0, 1.0)
    xs = np.arange(-6.0, 7.0, 2.0)
    D = min(Ns)

    def one(i):
        env = _deep_env(cfg, [xs[0], xs[-1] + 1.0, cfg.v * D, cfg.v * D + 1.0], abs(D), i, (D, 1))
        curve = busemann_estimate(env, a, b, cfg.v, Ns, band=cfg.band)
        med = np.median(busemann_pair_deltas(env, xs, cfg.v, Ns, band=cfg.band), axis=0)
        return env.key(), curve, med

    res = parallel_map(one, range(cfg.environments), cfg.threads)
    envs.extend(r[0] for r in res)
    _write_rows(out / "busemann.csv", ["environment", "N", "value", "perturbed"],
                [[i, N, c.values[j], c.perturbed[j]] for i, (_, c, _) in enumerate(res) for j, N in enumerate(Ns)])
    _write_rows(out / "busemann_deltas.csv", ["environment", "N_shallow", "N_deep", "median_delta"],
                [[i, Ns[j], Ns[j + 1], med[j]] for i, (_, _, med) in enumerate(res) for j in range(len(med))])
    gap = max(abs(c.perturbed[-1] - c.values[-1]) for _, c, _ in res)
    led.add(None, "two y-sequences agree at the deepest N", gap, 1e-2, gap < 1e-2)
    k = sum(int(med[-1] < med[0]) for _, _, med in res)
    ok, p = sign_test(k, len(res))
    led.add(None, "successive-depth deltas shrink (median over 7 anchor pairs): sign-test p-value", p, 0.05, ok,
            f"{k}/{len(res)} environments")


def _overlap(cfg, led, out, envs):
    Ns = sorted(cfg.N_list, reverse=True)
    ns = sorted(cfg.n_list)
    horizon = 2 * min(Ns)

    def one(i):
        pts = [0.0, 1.0, cfg.v * horizon, 2 * cfg.v * ns[-1]]
        env = _deep_env(cfg, pts, max(2 * ns[-1], -horizon), i, (horizon, 2 * ns[-1]))
        ov = overlap_curve(env, (0, 0.0), (0, 1.0), cfg.v, Ns, horizon=horizon, band=cfg.band)
        th = thermodynamic_tv_curve(env, 0, 0.0, cfg.v, max(1, ns[0] // 2), ns, cfg.band)
        return env.key(), ov, th

    res = parallel_map(one, range(cfg.environments), cfg.threads)
    envs.extend(r[0] for r in res)
    _write_rows(out / "overlap.csv", ["environment", "N", "tv"],
                [[i, N, ov[j]] for i, (_, ov, _) in enumerate(res) for j, N in enumerate(Ns)])
    _write_rows(out / "thermodynamic.csv", ["environment", "n", "tv"],
                [[i, n, th[j]] for i, (_, _, th) in enumerate(res) for j, n in enumerate(ns)])
    k1 = sum(int(th[-1] < th[0]) for _, _, th in res)
    ok1, p1 = sign_test(k1, len(res))
    led.add(None, "TV(n, 2n) decreases in n: sign-test p-value", p1, 0.05, ok1, f"{k1}/{len(res)} environments")
    k2 = sum(int(ov[-1] < 0.5 * ov[0]) for _, ov, _ in res)
    ok2, p2 = sign_test(k2, len(res))
    led.add(None, "overlap deepest < half of shallowest: sign-test p-value", p2, 0.05, ok2,
            f"{k2}/{len(res)} environments")


def _burgers(cfg, led, out, envs):
    spec = cfg.spec()
    grid = _grid(cfg, auto_grid(cfg.n, cfg.v, cfg.dx))
    env = sample_environment(spec, (0, cfg.n), grid, 0)
    envs.append(env.key())
    W = bg.PotentialProfile(grid, cfg.v * grid.nodes)
    st = bg.kick_evolve(env, bg.hopf_cole(W, spec.kappa, 0), cfg.n, cfg.band)
    u = bg.velocity_from_state(st, spec.kappa)
    bg.write_profile_csv(out / "profile.csv", u, bg.inverse_hopf_cole(st, spec.kappa), st)
    r = bg.monotonicity_residual(u)
    led.add(None, "x - u monotonicity residual", max(r, 0.0), 1e-8, r < 1e-8)


def _pullback(cfg, led, out, envs):
    depths = sorted(cfg.N_list, reverse=True)
    D = -min(depths)
    v = cfg.v

    def one(i):
        env = _deep_env(cfg, [-5.0, 5.0, -2 * D * v], 2 * D, i, (-2 * D, 1))
        g = env.grid
        inits = {"linear": bg.PotentialProfile(g, v * g.nodes), "bump": bg.bump_potential(g, v, 2.0, 1.0, cfg.kappa)}
        rows = bg.pullback_experiment(env, inits, v, depths, 0, (-5.0, 5.0), reference_depth=-2 * D,
                                      band=cfg.band, basin_window=(-30.0, 30.0))
        return env.key(), rows

    res = parallel_map(one, range(cfg.environments), cfg.threads)
    envs.extend(r[0] for r in res)
    _write_rows(out / "pullback.csv", ["environment", "initial_id", "depth", "sup_diff"],
                [[i, r.initial_id, r.depth, r.sup_diff] for i, (_, rows) in enumerate(res) for r in rows])
    k, pair = 0, 0.0
    for _, rows in res:
        by = {}
        for r in rows:
            by.setdefault(r.initial_id, []).append(r.sup_diff)
        k += int(all(c[-1] < c[0] for c in by.values()))
        pair = max(pair, abs(by["linear"][-1] - by["bump"][-1]))
    ok, p = sign_test(k, len(res))
    led.add(None, "sup-differences decrease in depth: sign-test p-value", p, 0.05, ok, f"{k}/{len(res)} environments")
    led.add(None, "deepest entries agree pairwise", pair, 0.02, pair < 0.02)


def _sample_paths(cfg, led, out, envs):
    spec = cfg.spec()
    grid = _grid(cfg, auto_grid(cfg.n, cfg.v, cfg.dx))
    env = sample_environment(spec, (0, cfg.n), grid, 0)
    envs.append(env.key())
    y = grid.coordinate(grid.index_of(cfg.v * cfg.n, snap=True))
    pm = PolymerMeasure(env, 0, cfg.n, 0.0, TerminalMeasure.atom(y), cfg.band)
    ps = sample_paths(pm, cfg.paths, cfg.seed)
    write_paths_csv(out / "paths.csv", ps)
    times = list(range(cfg.n + 1))
    write_marginals_csv(out / "marginals.csv", pm, times)
    k = cfg.n // 2
    d = pm.marginal(k)
    mean = float(np.sum(d.grid.nodes * d.values) * d.grid.dx)
    sd = math.sqrt(max(float(np.sum((d.grid.nodes - mean) ** 2 * d.values) * d.grid.dx), 0.0))
    z = abs(float(ps.at(k).mean()) - mean) / (sd / math.sqrt(ps.count)) if sd > 0 else 0.0
    led.add(None, f"sampled mean at k={k} vs exact marginal mean (|z|)", z, 4.0, z < 4.0)


def _validate(cfg, led, out, envs):
    full = validate(cfg.seed, cfg.threads, cfg.scale, cfg.amplitude)
    led.checks.extend(full.checks)
    led.tables.update(full.tables)


CAMPAIGNS = {"gen-env": _gen_env, "shape": _shape, "exponents": _exponents, "busemann": _busemann,
             "overlap": _overlap, "burgers": _burgers, "pullback": _pullback, "sample-paths": _sample_paths,
             "validate": _validate}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"kickpolymer": own, "numpy": np.__version__, "scipy": scipy.__version__}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the campaign named by ``cfg.kind`` and write its artifacts to ``cfg.out``.

    A campaign that raises still records its completed tables and a FAIL
    entry naming the error.
    """
    cfg.check()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    led = Ledger(cfg.seed, cfg.scale if cfg.kind == "validate" else cfg.kind)
    envs: list = []
    try:
        CAMPAIGNS[cfg.kind](cfg, led, out, envs)
    except Exception as e:  # recorded as a ledger failure, never swallowed silently
        led.add(None, "campaign completed", 0.0, 0.0, False, f"{type(e).__name__}: {e}")
    (out / "config.txt").write_text(cfg.canonical())
    (out / "ledger.txt").write_text(led.text())
    report = {"kind": cfg.kind, "seed": cfg.seed, "config_hash": cfg.content_hash(), "all_passed": led.all_passed,
              "checks": [asdict(c) for c in led.checks], "tables": led.tables, "environments": envs}
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=1, default=_jsonable) + "\n")
    files = {p.name: _sha256(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json"}
    manifest = {"schema_version": MANIFEST_SCHEMA, "kind": cfg.kind, "config_hash": cfg.content_hash(),
                "seeds": {"master_seed": cfg.seed}, "spec": cfg.spec().to_dict(), "versions": _versions(),
                "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return ExperimentReport(cfg, led, manifest, files)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")
