import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kickpolymer.lattice import (Grid, LogDensity, TransferKernel, apply_transfer, auto_grid, edge_mass,
                                 heat_kernel_logrow, log_gaussian, log_integrate, logsumexp_dx)


def test_grid_alignment_and_nodes():
    g = Grid.covering(-1.02, 0.98, 0.05)
    assert g.aligned and g.x_min <= -1.02 and g.x_max >= 0.98
    assert g.is_node(0.0) and not g.is_node(0.025)
    h = Grid.covering(-0.5, 0.5, 0.05)
    i = h.offset_in(g)
    assert np.array_equal(g.nodes[i:i + h.count], h.nodes)


def test_grid_errors():
    g = Grid.symmetric(1.0, 0.1)
    with pytest.raises(ValueError):
        g.index_of(0.05)
    with pytest.raises(ValueError):
        g.index_of(5.0, snap=True)
    with pytest.raises(ValueError):
        Grid(0.0, -0.1, 10)


def test_atom_integrates_to_one():
    g = Grid.symmetric(2.0, 0.05)
    assert abs(LogDensity.atom(g, 0.3).integrate()) < 1e-14


def test_log_density_rejects_nan():
    g = Grid.symmetric(1.0, 0.5)
    with pytest.raises(ValueError):
        LogDensity(g, np.array([0.0, np.nan, 0.0, 0.0, 0.0]))


def test_convolution_matches_closed_form_gaussian():
    g = Grid.symmetric(15.0, 0.05)
    k = TransferKernel(g, 0.5)
    # Gaussian of variance 1 convolved with g_1 gives variance 2
    out = k.log_convolve(log_gaussian(g.nodes - 0.5, 1.0))
    m = np.abs(g.nodes) < 6
    assert np.max(np.abs(out[m] - log_gaussian(g.nodes[m] - 0.5, 2.0))) < 1e-10


def test_banded_equals_dense():
    g = Grid.symmetric(8.0, 0.05)
    a = np.random.default_rng(0).normal(size=(3, g.count))
    assert np.max(np.abs(TransferKernel(g, 0.5, 8.0).log_convolve(a) - TransferKernel(g, 0.5).log_convolve(a))) < 1e-12


def test_convolution_handles_huge_dynamic_range():
    g = Grid.symmetric(5.0, 0.05)
    a = np.where(g.nodes < 0, -2000.0, 800.0)
    a[::7] = -np.inf
    out = TransferKernel(g, 0.5).log_convolve(a)
    assert np.all(np.isfinite(out))
    i = g.index_of(3.0)
    assert abs(out[i] - (800.0 + math.log(np.sum(np.exp(log_gaussian(g.nodes[i] - g.nodes, 1.0)) * g.dx * (a > 0))))) < 1e-9


def test_conditional_mean_of_atom():
    g = Grid.symmetric(4.0, 0.05)
    mean = TransferKernel(g, 0.5).conditional_mean(LogDensity.atom(g, 1.0).log_values)
    assert np.max(np.abs(mean - 1.0)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(-30, 30), st.integers(0, 2**31))
def test_logsumexp_shift(c, seed):
    g = Grid.symmetric(3.0, 0.1)
    f = LogDensity(g, np.random.default_rng(seed).normal(size=g.count))
    assert abs(log_integrate(f.shifted(c)) - c - log_integrate(f)) < 1e-13


def test_logsumexp_all_neg_inf():
    assert logsumexp_dx(np.full(4, -np.inf), 0.1) == -np.inf


def test_heat_kernel_row_and_edge_mass():
    g = Grid.symmetric(10.0, 0.05)
    row = heat_kernel_logrow(g, 0.0, 1.0)
    assert abs(row.integrate()) < 1e-10
    assert edge_mass(row, 1.0) < 1e-15
    assert edge_mass(heat_kernel_logrow(g, 9.5, 1.0), 1.0) > 0.3


def test_apply_transfer_conventions(env):
    f = LogDensity.atom(env.grid, 0.0)
    left = apply_transfer(env, 0, f, "forward", "include-left")
    right = apply_transfer(env, 0, f, "forward", "include-right")
    i = env.grid.index_of(0.0)
    raw = apply_transfer(env, 0, f.shifted(0.0), "forward", "include-right").log_values - env.log_weight(1)
    assert abs(left.log_values[i] - (raw[i] + env.log_weight(0)[i])) < 1e-12
    assert abs(right.log_values[i] - (raw[i] + env.log_weight(1)[i])) < 1e-12
    with pytest.raises(ValueError):
        apply_transfer(env, 0, f, "sideways")


def test_auto_grid():
    g = auto_grid(4, 0.5)
    assert g.x_max >= 6.5 * 4 + 10 - 1e-9
