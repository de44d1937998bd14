import itertools
import math

import numpy as np
import pytest

from kickpolymer.env import Environment, EnvironmentSpec, Shear, Shift, constant_environment, offset_environment, sample_environment, transform_environment
from kickpolymer.lattice import Grid, log_gaussian
from kickpolymer.partition import (Corridor, chapman_kolmogorov_residual, gamma_corridor, log_partition_backward_slice,
                                   log_partition_p2p, log_partition_restricted, log_partition_slice,
                                   log_partition_star, log_partition_star_table, write_partition_csv)


def tiny_env(seed=0, T=4):
    g = Grid(-1.0, 0.5, 5)
    vals = np.random.default_rng(seed).normal(size=(T, g.count))
    return Environment(EnvironmentSpec(kappa=0.7), 0, g, vals)


def brute_force(env, m, n, x, y):
    g, kap = env.grid, env.kappa
    xs = g.nodes
    total = 0.0
    for inner in itertools.product(range(g.count), repeat=n - m - 1):
        path = [g.index_of(x)] + list(inner) + [g.index_of(y)]
        w = 1.0
        for j, k in enumerate(range(m, n)):
            w *= math.exp(float(log_gaussian(xs[path[j + 1]] - xs[path[j]], 2 * kap)))
            w *= math.exp(-env.F(k)[path[j]] / (2 * kap))
        total += w * g.dx ** (n - m - 1)
    return math.log(total)


@pytest.mark.parametrize("m,n,x,y", [(0, 1, 0.0, 0.5), (0, 3, -1.0, 1.0), (1, 4, 0.5, -0.5), (0, 4, 0.0, 0.0)])
def test_matches_brute_force_enumeration(m, n, x, y):
    env = tiny_env()
    assert abs(log_partition_p2p(env, m, n, x, y) - brute_force(env, m, n, x, y)) < 1e-12


def test_backward_slice_agrees_with_forward(env):
    fw = log_partition_slice(env, 0, 5, 0.5).at(-1.0)
    bw = log_partition_backward_slice(env, 0, 5, -1.0).at(0.5)
    assert abs(fw - bw) < 1e-11


def test_chapman_kolmogorov(env):
    rng = np.random.default_rng(1)
    for _ in range(10):
        n1 = int(rng.integers(-10, 0))
        n3 = n1 + int(rng.integers(2, 8))
        n2 = int(rng.integers(n1 + 1, n3))
        assert chapman_kolmogorov_residual(env, n1, n2, n3, 0.5, -1.0, band=8.0) < 1e-10
    with pytest.raises(ValueError):
        chapman_kolmogorov_residual(env, 0, 0, 2, 0.0, 0.0)


def test_zero_potential_gaussian(zero_env):
    for h in (1, 3, 7):
        got = log_partition_p2p(zero_env, 0, h, 0.0, 1.5)
        assert abs(got - float(log_gaussian(1.5, 2 * 0.5 * h))) < 1e-8


def test_constant_offset_scales_exactly(env):
    base = log_partition_p2p(env, 0, 6, 0.0, 1.0)
    shifted = log_partition_p2p(offset_environment(env, 0.75), 0, 6, 0.0, 1.0)
    assert abs(shifted - (base - 6 * 0.75 / (2 * env.kappa))) < 1e-10


def test_shift_invariance(spec):
    g = Grid.symmetric(12.0, 0.05)
    e = sample_environment(spec, (0, 10), g, 0)
    s = transform_environment(e, Shift(3, 1.0))
    assert abs(log_partition_p2p(s, 0, 4, 0.0, 0.5) - log_partition_p2p(e, 3, 7, 1.0, 1.5)) < 1e-10


def test_shear_identity(spec):
    g = Grid.covering(-30.0, 34.0, 0.05)
    e = sample_environment(spec, (0, 8), g, 2)
    v, n = 0.5, 8
    a = log_partition_p2p(transform_environment(e, Shear(v)), 0, n, 0.0, 0.0)
    b = log_partition_p2p(e, 0, n, 0.0, v * n) + v * v * n / (4 * e.kappa)
    assert abs(a - b) < 1e-10


def test_corridor_restriction(env):
    full = log_partition_p2p(env, 0, 5, 0.0, 0.0)
    assert abs(log_partition_restricted(env, 0, 5, 0.0, 0.0, gamma_corridor(0, 5, 100.0)) - full) < 1e-12
    narrow = log_partition_restricted(env, 0, 5, 0.0, 0.0, gamma_corridor(0, 5, 0.2))
    assert narrow < full
    wider = log_partition_restricted(env, 0, 5, 0.0, 0.0, gamma_corridor(0, 5, 0.2).widened(0.5))
    assert narrow <= wider <= full
    with pytest.raises(ValueError):
        Corridor({1: (1.0, 0.0)})
    disjoint = Corridor({2: (5.0, 6.0), 3: (-6.0, -5.0)})
    assert log_partition_restricted(env, 0, 5, 0.0, 0.0, disjoint) < full


def test_star_is_window_minimum(env):
    star = log_partition_star(env, 0, 4, 0.0, 1.0, half_width=0.1)
    vals = [log_partition_p2p(env, 0, 4, x, y) for x in (-0.1, -0.05, 0.0, 0.05, 0.1) for y in (0.9, 0.95, 1.0, 1.05, 1.1)]
    assert abs(star - min(vals)) < 1e-12
    tab = log_partition_star_table(env, 0, 4, [0.0, 2.0], [1.0], half_width=0.1)
    assert abs(tab[0, 0] - star) < 1e-12
    with pytest.raises(ValueError):
        log_partition_star(env, 0, 4, 0.0, 1.0, half_width=0.05)
    with pytest.raises(ValueError):
        log_partition_star(env, 0, 4, 11.9, 0.0)


def test_star_super_multiplicative(env):
    lhs = log_partition_star(env, 0, 6, 0.0, 0.0)
    rhs = log_partition_star(env, 0, 3, 0.0, 0.0) + log_partition_star(env, 3, 6, 0.0, 0.0)
    # the middle window holds 21 nodes, so its mass is at least 1.05 times the product of minima
    assert lhs >= rhs + math.log(1.0)


def test_range_errors(env):
    with pytest.raises(ValueError):
        log_partition_p2p(env, 3, 3, 0.0, 0.0)
    with pytest.raises(ValueError):
        log_partition_p2p(env, 5, 12, 0.0, 0.0)


def test_csv_header(tmp_path, env):
    p = tmp_path / "z.csv"
    write_partition_csv(p, [log_partition_slice(env, 0, 2, 0.0)])
    lines = p.read_text().splitlines()
    assert lines[0] == "m,n,x,y,logZ" and len(lines) == env.grid.count + 1
