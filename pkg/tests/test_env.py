import math

import numpy as np
import pytest

from kickpolymer.env import (EnvironmentSpec, Shear, Shift, analytic_lambda, constant_environment,
                             estimate_lambda, load_snapshot, offset_environment, sample_environment,
                             sample_slice, save_snapshot, transform_environment)
from kickpolymer.lattice import Grid, LogDensity

KINDS = ["ma-gaussian", "shot-noise", "iid-cell"]


@pytest.mark.parametrize("kind", KINDS)
def test_window_independence(kind):
    spec = EnvironmentSpec(kind, 1.0, 0.7, 0.5, 5)
    a = Grid.covering(-60.0, 10.0, 0.05)
    b = Grid.covering(-3.0, 80.0, 0.05)
    ea = sample_slice(spec, a, 4, 2)
    eb = sample_slice(spec, b, 4, 2)
    i = Grid.covering(-3.0, 10.0, 0.05)
    assert np.array_equal(ea[i.offset_in(a):i.offset_in(a) + i.count], eb[i.offset_in(b):i.offset_in(b) + i.count])


@pytest.mark.parametrize("kind", KINDS)
def test_distinct_times_and_realizations(kind):
    spec = EnvironmentSpec(kind, 1.0, 1.0, 0.5, 5)
    g = Grid.symmetric(10.0, 0.05)
    assert not np.array_equal(sample_slice(spec, g, 0, 0), sample_slice(spec, g, 1, 0))
    assert not np.array_equal(sample_slice(spec, g, 0, 0), sample_slice(spec, g, 0, 1))


def test_ma_gaussian_marginal_variance():
    spec = EnvironmentSpec("ma-gaussian", 2.0, 1.0, 0.5, 1)
    g = Grid.symmetric(500.0, 0.05)
    vals = np.concatenate([sample_slice(spec, g, t, 0)[::40] for t in range(40)])
    assert abs(vals.std() - 2.0) < 0.1
    assert abs(vals.mean()) < 0.1


def test_ma_gaussian_correlation_vanishes_beyond_range():
    spec = EnvironmentSpec("ma-gaussian", 1.0, 0.5, 0.5, 2)
    g = Grid.symmetric(1000.0, 0.05)
    f = sample_slice(spec, g, 0, 0)
    lag = int(1.01 / 0.05)  # support of the covariance is twice the range
    assert abs(np.corrcoef(f[:-lag], f[lag:])[0, 1]) < 0.03
    assert np.corrcoef(f[:-2], f[2:])[0, 1] > 0.9


@pytest.mark.parametrize("kind,amp", [("ma-gaussian", 1.0), ("iid-cell", 1.0), ("shot-noise", 0.7), ("constant", 0.3)])
def test_lambda_estimate_matches_analytic(kind, amp):
    spec = EnvironmentSpec(kind, amp, 1.0, 0.5, 9)
    mean, se = estimate_lambda(spec, 4000)
    lam = analytic_lambda(spec)
    assert abs(mean - lam) < max(4 * se, 1e-12)


def test_constant_and_offset(grid):
    e = constant_environment(0.25, (0, 3), grid)
    assert np.all(e.F(2) == 0.25)
    o = offset_environment(e, 1.0)
    assert np.all(o.F(0) == 1.25) and o.meta["offset"] == 1.0


def test_spec_validation():
    with pytest.raises(ValueError):
        EnvironmentSpec("fractal")
    with pytest.raises(ValueError):
        EnvironmentSpec(amplitude=math.inf)
    with pytest.raises(ValueError):
        EnvironmentSpec(kappa=0.0)
    s = EnvironmentSpec("shot-noise", 0.5, 2.0, 0.25, 3, 1.5)
    assert EnvironmentSpec.from_dict(s.to_dict()) == s
    assert s.eta == math.inf


def test_range_outside_environment(env):
    with pytest.raises(IndexError):
        env.F(10)
    assert env.covers(-10, 10) and not env.covers(-11, 0)


def test_sample_environment_rejects_unaligned():
    with pytest.raises(ValueError):
        sample_environment(EnvironmentSpec(), (0, 2), Grid(0.01, 0.05, 100))


def test_shift_transform(spec):
    g = Grid.symmetric(10.0, 0.05)
    e = sample_environment(spec, (0, 6), g, 0)
    s = transform_environment(e, Shift(2, 1.0))
    assert s.time_range == (-2, 4)
    i = s.grid.index_of(0.0)
    assert s.F(0)[i] == e.F(2)[e.grid.index_of(1.0)]


def test_shear_transform_values(spec):
    g = Grid.symmetric(10.0, 0.05)
    e = sample_environment(spec, (0, 4), g, 0)
    s = transform_environment(e, Shear(0.5))
    i = s.grid.index_of(0.0)
    assert s.F(3)[i] == e.F(3)[e.grid.index_of(1.5)]
    with pytest.raises(ValueError):
        transform_environment(e, Shear(0.013))
    assert transform_environment(e, Shear(0.013, strict=False)).values.shape[0] == 4


def test_snapshot_round_trip(tmp_path, env):
    extra = LogDensity.atom(env.grid, 0.0)
    p = tmp_path / "e.kpe"
    save_snapshot(p, env, {"start": extra})
    back, extras = load_snapshot(p)
    assert np.array_equal(back.values, env.values)
    assert back.key() == env.key()
    assert np.array_equal(extras["start"].log_values, extra.log_values)
    save_snapshot(tmp_path / "f.kpe", back, extras)
    assert (tmp_path / "f.kpe").read_bytes() == p.read_bytes()


def test_snapshot_bad_magic(tmp_path):
    p = tmp_path / "x"
    p.write_bytes(b"NOTANENV" + bytes(20))
    with pytest.raises(ValueError):
        load_snapshot(p)
