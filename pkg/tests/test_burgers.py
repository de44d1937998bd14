import numpy as np
import pytest

from kickpolymer import burgers as bg
from kickpolymer.env import constant_environment, sample_environment
from kickpolymer.lattice import Grid


@pytest.fixture(scope="module")
def wide():
    return Grid.symmetric(20.0, 0.05)


def test_hopf_cole_round_trip(wide):
    W = bg.PotentialProfile(wide, np.sin(wide.nodes) + 0.3 * wide.nodes)
    back = bg.inverse_hopf_cole(bg.hopf_cole(W, 0.5), 0.5)
    assert np.max(np.abs(back.values - W.values)) < 1e-14
    assert W.values[wide.index_of(0.0)] == 0.0


def test_kick_step_linear_velocity(wide):
    z = constant_environment(0.0, (0, 1), wide)
    st = bg.kick_evolve(z, bg.hopf_cole(bg.PotentialProfile(wide, wide.nodes ** 2 / 2)), 1)
    for u in (bg.velocity_from_state(st), bg.velocity_after_kick(z, bg.hopf_cole(bg.PotentialProfile(wide, wide.nodes ** 2 / 2)))):
        m = u.window(-5, 5)
        assert np.max(np.abs(u.values[m] - wide.nodes[m] / 2)) < 1e-6


def test_exact_and_difference_velocities_agree(spec, wide):
    env = sample_environment(spec, (0, 3), wide, 0)
    st0 = bg.hopf_cole(bg.PotentialProfile(wide, 0.2 * wide.nodes + np.cos(wide.nodes)), spec.kappa)
    exact = bg.velocity_after_kick(env, st0)
    fd = bg.velocity_from_state(bg.kick_step(env, st0), spec.kappa)
    m = fd.window(-10, 10)
    assert np.max(np.abs(exact.values[m] - fd.values[m])) < 5e-3


def test_difference_velocity_second_order(spec):
    # halving dx on the same field should cut the difference error by about 4
    errs = []
    for dx in (0.1, 0.05):
        g = Grid.symmetric(20.0, dx)
        z = constant_environment(0.0, (0, 1), g)
        st = bg.kick_step(z, bg.hopf_cole(bg.PotentialProfile(g, np.sin(g.nodes))))
        ex = bg.velocity_after_kick(z, bg.hopf_cole(bg.PotentialProfile(g, np.sin(g.nodes))))
        fd = bg.velocity_from_state(st)
        m = fd.window(-5, 5)
        errs.append(np.max(np.abs(fd.values[m] - ex.values[m])))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_cocycle_and_log_c(spec, wide):
    env = sample_environment(spec, (0, 6), wide, 1)
    s0 = bg.hopf_cole(bg.PotentialProfile(wide, 0.1 * wide.nodes), spec.kappa)
    direct = bg.kick_evolve(env, s0, 6)
    split = bg.kick_evolve(env, bg.kick_evolve(env, s0, 2), 6)
    assert np.max(np.abs(direct.log_phi - split.log_phi)) < 1e-10
    assert abs(direct.log_c - split.log_c) < 1e-10
    assert direct.log_phi[wide.index_of(0.0)] == 0.0


def test_x_minus_u_nondecreasing(spec, wide):
    rng = np.random.default_rng(0)
    env = sample_environment(spec, (0, 4), wide, 2)
    W = bg.PotentialProfile(wide, np.cumsum(rng.normal(size=wide.count)) * 0.5)
    st = bg.kick_evolve(env, bg.hopf_cole(W, spec.kappa), 4)
    assert bg.monotonicity_residual(bg.velocity_from_state(st, spec.kappa)) < 1e-8
    assert bg.monotonicity_residual(bg.VelocityProfile(wide, 2 * wide.nodes)) > 0


def test_global_solution_approximants(spec):
    g = Grid.covering(-40.0, 15.0, 0.05)
    env = sample_environment(spec, (-40, 1), g, 0)
    u_exact = bg.global_solution_approx(env, 0.5, 0, -32, band=8.0)
    u_fd = bg.velocity_from_state(bg.global_state_approx(env, 0.5, 0, -32, band=8.0), spec.kappa)
    m = u_fd.window(-5, 5)
    assert np.max(np.abs(u_exact.values[m] - u_fd.values[m])) < 5e-3
    with pytest.raises(ValueError):
        bg.global_solution_approx(env, 0.5, 0, -2)


def test_global_solution_zero_potential_constant_slope():
    g = Grid.covering(-40.0, 15.0, 0.05)
    z = constant_environment(0.0, (-32, 1), g)
    u = bg.global_solution_approx(z, 0.5, 0, -32)
    m = u.window(-5, 5)
    # from a point source at (N, vN) the velocity is (x - vN)/(n - N) with n - N = 32
    assert np.max(np.abs(u.values[m] - (g.nodes[m] + 16.0) / 32.0)) < 1e-8


def test_bump_analytic_pullback():
    v, beta, s = 0.3, 1.0, 1.0
    g = Grid.covering(-5 - v * 64 - 60, 5 + 60, 0.05)
    z = constant_environment(0.0, (-64, 1), g)
    ref = bg.VelocityProfile(g, np.full(g.count, v))
    rows = bg.pullback_experiment(z, {"b": bg.bump_potential(g, v, beta, s)}, v, [-8, -16, -32, -64], 0, (-5, 5),
                                  reference=ref)
    xs = g.nodes[ref.window(-5, 5)]
    for r in rows:
        exact = np.max(np.abs(bg.bump_solution(xs, -r.depth, v, beta, s) - v))
        assert abs(r.sup_diff / exact - 1) < 1e-2


def test_basin_conditions(wide):
    assert bg.check_basin(bg.PotentialProfile(wide, 0.5 * wide.nodes), 0.5, -10, 10) == "flux-from-left-wins"
    assert bg.check_basin(bg.PotentialProfile(wide, -0.5 * wide.nodes), -0.5, -10, 10) == "flux-from-right-wins"
    assert bg.check_basin(bg.PotentialProfile(wide, np.abs(wide.nodes)), 0.0, -10, 10) == "no-flux-from-infinity"
    with pytest.raises(bg.BasinError):
        bg.check_basin(bg.PotentialProfile(wide, -np.abs(wide.nodes)), 0.0, -10, 10)
    with pytest.raises(bg.BasinError):
        bg.check_basin(bg.PotentialProfile(wide, 0.5 * wide.nodes), 1.0, -10, 10)


def test_pullback_rejects_bad_initial(spec):
    g = Grid.symmetric(30.0, 0.05)
    env = sample_environment(spec, (-8, 1), g, 0)
    with pytest.raises(bg.BasinError):
        bg.pullback_experiment(env, {"bad": bg.PotentialProfile(g, -g.nodes)}, 0.5, [-4, -8], 0, (-2, 2))


def test_mass_collapse_raises(wide):
    z = constant_environment(0.0, (0, 1), wide)
    st = bg.HopfColeState(wide, np.full(wide.count, -np.inf))
    with pytest.raises(ValueError):
        bg.kick_step(z, st)


def test_profile_csv(tmp_path, wide):
    W = bg.PotentialProfile(wide, wide.nodes)
    st = bg.hopf_cole(W)
    bg.write_profile_csv(tmp_path / "u.csv", bg.velocity_from_state(st), W, st)
    assert (tmp_path / "u.csv").read_text().splitlines()[0] == "x,u,W,log_phi"
