import numpy as np
import pytest

from conftest import baseline, disease_free
from vaxctl.adjoint import control_gradient
from vaxctl.control import ControlSchedule
from vaxctl.errors import InvalidParameterError
from vaxctl.fbsm import SolveSettings, objective, relative_l1_change, solve, summarize
from vaxctl.integrate import TimeGrid, Trajectory, integrate_backward, integrate_forward


def flat_trajectory(T, dt, infectious=0.0):
    g = TimeGrid.uniform(T, dt)
    x = np.zeros((g.n_nodes, 16))
    x[:, 0] = 1000.0
    x[:, 5] = infectious / 2
    x[:, 13] = infectious / 2
    return Trajectory(g, x, np.zeros((g.n_nodes, 2)))


class TestObjective:
    def test_zero(self):
        traj = flat_trajectory(10, 0.1)
        assert objective(traj, np.zeros((traj.grid.n_nodes, 2)), 1e11, 1e11) == 0.0

    def test_constant_infectious(self):
        traj = flat_trajectory(37, 0.1, infectious=250.0)
        assert objective(traj, np.zeros((traj.grid.n_nodes, 2)), 1e11, 1e11) == pytest.approx(250.0 * 37, rel=1e-13)

    def test_quadratic_term(self):
        traj = flat_trajectory(10, 0.1)
        u = ControlSchedule.constant(traj.grid, 0.1, 0.0)
        assert objective(traj, u, 2.0, 5.0) == pytest.approx(0.1, rel=1e-12)


class TestSummarize:
    def test_disease_free(self):
        traj = baseline(disease_free(horizon=30))
        m = summarize(traj)
        assert m.over65.new_infections == 0.0
        assert m.protected_pct_total == 0.0
        assert m.doses_total == 0.0
        assert m.over65.infections == pytest.approx(100_000)

    def test_case1_baseline(self, case1_baseline):
        m = summarize(case1_baseline)
        assert m.over65.infections_pct == pytest.approx(80.0, abs=2.0)
        assert m.under65.infections_pct == pytest.approx(79.0, abs=2.0)

    def test_case2_baseline(self, case2_baseline):
        m = summarize(case2_baseline)
        assert m.over65.infections_pct == pytest.approx(99.995, abs=0.5)
        assert m.under65.infections_pct == pytest.approx(99.993, abs=0.5)

    def test_flat_dict_keys(self, case1_baseline):
        d = summarize(case1_baseline).as_dict()
        for key in ("infections_pct_over65", "protected_pct_under65", "doses_total", "peak_day_total"):
            assert key in d

    def test_accounts_for_everyone(self, case1_baseline):
        m = summarize(case1_baseline)
        x = case1_baseline.states[-1]
        for g, off in ((m.over65, 0), (m.under65, 8)):
            # ever infected = E + I + R at the horizon once vaccination is off
            assert g.infections == pytest.approx(x[off + 4] + x[off + 5] + x[off + 6], rel=1e-9)


class TestSettings:
    @pytest.mark.parametrize("kw", [{"delta": 0}, {"max_iters": 0}, {"damping": 0}, {"damping": 1.5},
                                    {"u_init": -0.1}, {"max_iters": 2.5}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameterError):
            SolveSettings(**kw)


def test_relative_l1_change():
    assert relative_l1_change(np.array([1.0, 3.0]), np.array([1.0, 2.0])) == pytest.approx(1 / 3)


def test_disease_free_optimum_is_zero():
    sol = solve(disease_free(horizon=50))
    assert sol.converged
    assert np.all(sol.controls.values == 0.0)
    assert sol.objective == 0.0


def small_scenario(case1, W=1e6):
    return case1.with_overrides(horizon=60, dt=0.1, W_O=W, W_Y=W)


def test_converged_run_below_delta(case1):
    sol = solve(small_scenario(case1), SolveSettings(delta=1e-6))
    assert sol.converged
    assert sol.final_error < 1e-6
    assert sol.errors[-1] == sol.final_error


def test_fixed_point(case1):
    # one more sweep from the converged controls reproduces them
    scen = small_scenario(case1)
    sol = solve(scen, SolveSettings(delta=1e-10, damping=0.5))
    from vaxctl.control import update_control

    again = update_control(sol.trajectory, scen.W_O, scen.W_Y, scen.bounds)
    np.testing.assert_allclose(again.values, sol.controls.values, atol=1e-8)


def test_solution_improves_objective(case1):
    scen = small_scenario(case1)
    sol = solve(scen, SolveSettings(delta=1e-8))
    j0 = objective(baseline(scen), np.zeros((scen.grid.n_nodes, 2)), scen.W_O, scen.W_Y)
    assert sol.objective < j0
    for bump in (0.8, 1.2):
        other = ControlSchedule(scen.grid, np.clip(sol.controls.values * bump, 0, 0.3))
        traj = integrate_forward(scen.initial_state, other, scen.params, scen.grid)
        assert objective(traj, other, scen.W_O, scen.W_Y) >= sol.objective


def test_gradient_matches_directional_derivative(case1):
    scen = small_scenario(case1)
    rng = np.random.default_rng(11)
    u = rng.uniform(0.01, 0.05, (scen.grid.n_nodes, 2))
    d = rng.normal(size=u.shape)

    def J(v):
        traj = integrate_forward(scen.initial_state, v, scen.params, scen.grid)
        return objective(traj, v, scen.W_O, scen.W_Y)

    eps = 1e-6
    fd = (J(u + eps * d) - J(u - eps * d)) / (2 * eps)
    traj = integrate_backward(integrate_forward(scen.initial_state, u, scen.params, scen.grid), p=scen.params)
    gx = np.array([control_gradient(traj.states[k], traj.adjoints[k], u[k, 0], u[k, 1], scen.W_O, scen.W_Y)
                   for k in range(scen.grid.n_nodes)])
    adj = np.trapezoid((gx * d).sum(axis=1), scen.grid.times)
    assert adj == pytest.approx(fd, rel=1e-3)


def test_sweep_limit_flags_not_converged(case1, caplog):
    sol = solve(small_scenario(case1), SolveSettings(max_iters=1, delta=1e-12))
    assert not sol.converged
    assert sol.iterations == 1
    assert "no convergence" in caplog.text


def test_deterministic(case1):
    scen = small_scenario(case1)
    a = solve(scen)
    b = solve(scen)
    np.testing.assert_array_equal(a.controls.values, b.controls.values)
    np.testing.assert_array_equal(a.trajectory.states, b.trajectory.states)
    assert a.objective == b.objective


def test_optimized_doses_nonzero(case1_solution):
    m = summarize(case1_solution.trajectory)
    assert m.doses_total > 0
    assert np.all(case1_solution.controls.values >= 0)
    assert np.all(case1_solution.controls.values <= 0.3)
