import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kickpolymer.env import Environment, EnvironmentSpec, constant_environment
from kickpolymer.lattice import Grid, LogDensity, log_gaussian
from kickpolymer.partition import log_partition_p2p
from kickpolymer.polymer import (PolymerMeasure, TerminalMeasure, abstract_monotonicity_residual, cone_exit_fraction,
                                 density_dominance_residual, dominance_residual, kernel_cdf, path_action,
                                 point_to_line_measure, sample_paths, straightness_diagnostic, tv_distance,
                                 write_marginals_csv, write_paths_csv)
from kickpolymer.stats import gaussian_tv


def bridge(grid, x, y, k, n, kappa=0.5):
    mu = x + (y - x) * k / n
    return np.exp(log_gaussian(grid.nodes - mu, 2 * kappa * k * (n - k) / n))


def test_bridge_marginals(zero_env):
    pm = PolymerMeasure(zero_env, 0, 6, -1.0, TerminalMeasure.atom(2.0))
    for k in range(1, 6):
        assert np.max(np.abs(pm.marginal(k).values - bridge(zero_env.grid, -1.0, 2.0, k, 6))) < 1e-6


def test_marginals_normalized_and_logz_consistent(env):
    pm = PolymerMeasure(env, -3, 5, 0.0, TerminalMeasure.uniform(-1.0, 1.0), band=8.0)
    for k in range(-3, 6):
        assert abs(pm.marginal(k).integrate()) < 1e-12
        assert abs(pm.log_z_at(k) - pm.log_z) < 1e-12


def test_point_terminal_matches_partition(env):
    pm = PolymerMeasure(env, 0, 5, 0.0, TerminalMeasure.atom(1.0))
    assert abs(pm.log_z - log_partition_p2p(env, 0, 5, 0.0, 1.0)) < 1e-12


def test_dlr_consistency(env):
    """Projecting an (m,n) polymer to (m,k) gives the (m,k) polymer tilted by the backward partition function.

    Its terminal marginal is then the time-k marginal of the full measure.
    """
    full = PolymerMeasure(env, 0, 6, 0.0, TerminalMeasure.from_density(
        LogDensity(env.grid, log_gaussian(env.grid.nodes - 1.0, 1.0))))
    k = 3
    sub = PolymerMeasure(env, 0, k, 0.0, LogDensity(env.grid, full.bwd[k]))
    for j in range(0, k + 1):
        assert np.max(np.abs(sub.marginal(j).values - full.marginal(j).values)) < 1e-10


def test_sampling_matches_bridge_moments(zero_env):
    pm = PolymerMeasure(zero_env, 0, 8, 0.0, TerminalMeasure.atom(4.0))
    ps = sample_paths(pm, 4000, 7)
    assert np.all(ps.at(0) == 0.0) and np.all(ps.at(8) == 4.0)
    for k in (2, 4, 6):
        mu, var = 4.0 * k / 8, k * (8 - k) / 8
        assert abs(ps.at(k).mean() - mu) < 4 * math.sqrt(var / 4000)
        assert abs(ps.at(k).var() - var) < 0.1 * var


def test_sampling_is_seed_deterministic(env):
    pm = PolymerMeasure(env, 0, 5, 0.0, TerminalMeasure.atom(0.0), band=8.0)
    a, b = sample_paths(pm, 50, 3), sample_paths(pm, 50, 3)
    assert np.array_equal(a.paths, b.paths)
    assert not np.array_equal(a.paths, sample_paths(pm, 50, 4).paths)


def test_path_action_weight():
    g = Grid(-0.5, 0.5, 3)
    vals = np.random.default_rng(0).normal(size=(3, 3))
    for kappa in (0.3, 1.7):
        e = Environment(EnvironmentSpec(kappa=kappa), 0, g, vals)
        path = [0.0, 0.5, -0.5, 0.0]
        w = math.exp(-path_action(e, path, 0, 3) / (2 * kappa)) * (4 * math.pi * kappa) ** -1.5
        direct = 1.0
        for k in range(3):
            direct *= math.exp(float(log_gaussian(path[k + 1] - path[k], 2 * kappa))) * math.exp(-e.F(k)[g.index_of(path[k])] / (2 * kappa))
        assert abs(w - direct) < 1e-14 * direct


def test_dominance(env):
    lo = PolymerMeasure(env, 0, 6, -1.0, TerminalMeasure.atom(0.0))
    hi = PolymerMeasure(env, 0, 6, 1.0, TerminalMeasure.atom(2.0))
    assert max(dominance_residual(lo, hi, k) for k in range(7)) < 1e-10
    # reversed roles must violate
    assert max(dominance_residual(hi, lo, k) for k in range(1, 6)) > 0.1


def test_density_dominance(grid):
    a = LogDensity(grid, log_gaussian(grid.nodes, 1.0))
    b = LogDensity(grid, log_gaussian(grid.nodes - 0.5, 1.0))
    assert density_dominance_residual(a, b) < 1e-14
    assert density_dominance_residual(b, a) > 0.1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.floats(-3, 3), min_size=2, max_size=6, unique=True))
def test_abstract_monotonicity(seed, xs):
    g = Grid.symmetric(6.0, 0.1)
    nu = LogDensity(g, np.random.default_rng(seed).normal(size=g.count) * 2)
    ry, rx = abstract_monotonicity_residual(nu, xs)
    assert ry <= 1e-12 and rx <= 1e-12


def test_kernel_cdf_rows():
    g = Grid.symmetric(6.0, 0.1)
    G = kernel_cdf(LogDensity(g, np.zeros(g.count)), [0.0, 1.0])
    assert G.shape == (2, g.count) and np.allclose(G[:, -1], 1.0)


def test_tv_gaussian_oracle():
    g = Grid.symmetric(12.0, 0.01)
    a = LogDensity(g, log_gaussian(g.nodes, 1.0))
    b = LogDensity(g, log_gaussian(g.nodes - 1.0, 1.0))
    assert abs(tv_distance(a, b) - gaussian_tv(0.0, 1.0, 1.0)) < 1e-4
    assert abs(gaussian_tv(0.0, 1.0, 1.0) - 0.38292492254802624) < 1e-12


def test_point_to_line_measure(env):
    V = LogDensity(env.grid, -0.1 * env.grid.nodes ** 2)
    pm = point_to_line_measure(env, V, -4, 2, 0.5, band=8.0)
    assert pm.marginal(2).at(0.5) == pytest.approx(-math.log(env.grid.dx))
    with pytest.raises(ValueError):
        point_to_line_measure(env, LogDensity(env.grid, np.full(env.grid.count, -np.inf)), -4, 2, 0.5)


def test_cone_exit(zero_env):
    g = Grid.symmetric(40.0, 0.05)
    z = constant_environment(0.0, (0, 40), g)
    pm = PolymerMeasure(z, 0, 40, 0.0, TerminalMeasure.atom(0.0))
    ps = sample_paths(pm, 300, 1)
    fr = [cone_exit_fraction(ps, 4, 1.0, 0.1, q) for q in (0.05, 0.2, 1.0, 5.0)]
    assert all(0.0 <= f <= 1.0 for f in fr)
    assert all(a >= b for a, b in zip(fr, fr[1:]))
    assert fr[-1] == 0.0
    with pytest.raises(ValueError):
        straightness_diagnostic(z, 30, 40, 1.0, 0.1, 1.0)


def test_csv_writers(tmp_path, zero_env):
    pm = PolymerMeasure(zero_env, 0, 3, 0.0, TerminalMeasure.atom(0.0))
    write_paths_csv(tmp_path / "p.csv", sample_paths(pm, 2, 0))
    write_marginals_csv(tmp_path / "m.csv", pm, [1])
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "sample_id,k,gamma"
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "k,y,density"
