import numpy as np
import pytest

from gravlearn.datagen import figure_eight_spec, figure_eight_state
from gravlearn.dynamics import BodySpec, gravitational_rhs, total_energy
from gravlearn.errors import NonFiniteState, StepSizeUnderflow
from gravlearn.integrators import (
    TimeGrid,
    Trajectory,
    integrate_adaptive,
    integrate_fixed,
    rk4_step,
)

GRAV = figure_eight_spec()


def grav_rhs(state, t):
    return gravitational_rhs(state, GRAV)


def circular_two_body():
    """Equal unit masses, separation 1, G=1: period is pi * sqrt(2)."""
    spec = BodySpec(masses=np.ones(2), spatial_dim=3)
    v = np.sqrt(0.5)
    state = np.array(
        [0.5, 0.0, 0.0, 0.0, v, 0.0, -0.5, 0.0, 0.0, 0.0, -v, 0.0]
    )
    period = np.pi * np.sqrt(2.0)
    return spec, state, period


class TestTimeGrid:
    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError):
            TimeGrid(np.array([0.0, 1.0, 1.0]))

    def test_uniform_detection(self):
        assert TimeGrid.uniform(0.0, 7.0, 70).is_uniform
        assert not TimeGrid(np.array([0.0, 0.1, 0.3])).is_uniform

    def test_trajectory_shape_check(self):
        grid = TimeGrid.uniform(0.0, 1.0, 3)
        with pytest.raises(ValueError):
            Trajectory(grid, np.zeros((2, 4)))
        with pytest.raises(ValueError):
            Trajectory(grid, np.full((3, 4), np.nan))


class TestRK4Step:
    def test_zero_rhs_keeps_state(self):
        state = np.array([1.0, -2.0, 3.0])
        out = rk4_step(lambda s, t: np.zeros_like(s), state, 0.0, 0.1)
        np.testing.assert_array_equal(out, state)

    def test_exponential_decay(self):
        out = rk4_step(lambda s, t: -s, np.array([1.0]), 0.0, 0.1)
        assert out[0] == pytest.approx(np.exp(-0.1), abs=1e-7)

    def test_constant_rhs_exact(self):
        out = rk4_step(lambda s, t: np.ones_like(s), np.array([0.0]), 0.0, 0.5)
        assert out[0] == pytest.approx(0.5, abs=0.0)

    def test_nonfinite_stage_raises(self):
        def bad(s, t):
            return np.array([np.nan])

        with pytest.raises(NonFiniteState):
            rk4_step(bad, np.array([1.0]), 0.0, 0.1)

    def test_observed_convergence_order(self):
        # global error at t=1 for dh/dt = -h; halving dt must shrink the
        # error by a factor of about 2^4
        errors = []
        for dt in (0.1, 0.05, 0.025):
            n = round(1.0 / dt)
            state = np.array([1.0])
            for i in range(n):
                state = rk4_step(lambda s, t: -s, state, i * dt, dt)
            errors.append(abs(state[0] - np.exp(-1.0)))
        for e_coarse, e_fine in zip(errors, errors[1:]):
            assert 14.0 <= e_coarse / e_fine <= 18.0


class TestIntegrateFixed:
    def test_single_point_grid(self):
        grid = TimeGrid(np.array([0.0]))
        state0 = np.arange(4.0)
        traj = integrate_fixed(lambda s, t: -s, state0, grid)
        assert len(traj) == 1
        np.testing.assert_array_equal(traj.states[0], state0)

    def test_zero_rhs_copies(self):
        grid = TimeGrid.uniform(0.0, 7.0, 70)
        state0 = np.array([1.0, 2.0])
        traj = integrate_fixed(lambda s, t: np.zeros_like(s), state0, grid)
        assert len(traj) == 70
        assert np.all(traj.states == state0)

    def test_two_body_period_return(self):
        spec, state0, period = circular_two_body()
        grid = TimeGrid.uniform(0.0, period, 45)
        traj = integrate_fixed(
            lambda s, t: gravitational_rhs(s, spec), state0, grid, substeps=4
        )
        np.testing.assert_allclose(traj.states[-1], state0, atol=1e-4)

    def test_interval_index_on_failure(self):
        def explode(s, t):
            return s * 1e4

        grid = TimeGrid.uniform(0.0, 10.0, 11)
        with pytest.raises(NonFiniteState) as err:
            integrate_fixed(explode, np.array([1.0]), grid)
        assert err.value.interval is not None


class TestIntegrateAdaptive:
    def test_zero_rhs_exact_copies(self):
        save = TimeGrid.uniform(0.0, 1.0, 5)
        state0 = np.array([3.0, -1.0])
        traj = integrate_adaptive(
            lambda s, t: np.zeros_like(s), state0, (0.0, 1.0), save_at=save
        )
        assert np.all(traj.states == state0)

    def test_harmonic_oscillator(self):
        def rhs(s, t):
            return np.array([s[1], -s[0]])

        save = TimeGrid(np.array([0.0, 2 * np.pi]))
        traj = integrate_adaptive(
            rhs, np.array([1.0, 0.0]), (0.0, 2 * np.pi), rtol=1e-9, atol=1e-9,
            save_at=save,
        )
        np.testing.assert_allclose(traj.states[-1], [1.0, 0.0], atol=1e-7)

    def test_two_body_energy_drift(self):
        spec, state0, period = circular_two_body()
        save = TimeGrid(np.array([0.0, period]))
        traj = integrate_adaptive(
            lambda s, t: gravitational_rhs(s, spec),
            state0,
            (0.0, period),
            rtol=1e-9,
            atol=1e-9,
            save_at=save,
        )
        e0 = total_energy(state0, spec)
        e1 = total_energy(traj.states[-1], spec)
        assert abs(e1 - e0) / abs(e0) < 1e-8

    def test_two_body_period_return(self):
        spec, state0, period = circular_two_body()
        save = TimeGrid(np.array([0.0, period]))
        traj = integrate_adaptive(
            lambda s, t: gravitational_rhs(s, spec), state0, (0.0, period),
            rtol=1e-9, atol=1e-9, save_at=save,
        )
        np.testing.assert_allclose(traj.states[-1], state0, atol=1e-4)

    def test_three_body_energy_drift_every_save_point(self):
        state0 = figure_eight_state()
        save = TimeGrid.uniform(0.0, 7.0, 70)
        traj = integrate_adaptive(
            grav_rhs, state0, (0.0, 7.0), rtol=1e-9, atol=1e-9, save_at=save
        )
        e0 = total_energy(state0, GRAV)
        for state in traj.states:
            assert abs(total_energy(state, GRAV) - e0) / abs(e0) < 1e-6

    def test_fixed_and_adaptive_agree(self):
        state0 = figure_eight_state()
        save = TimeGrid.uniform(0.0, 7.0, 70)
        adaptive = integrate_adaptive(
            grav_rhs, state0, (0.0, 7.0), rtol=1e-9, atol=1e-9, save_at=save
        )
        fixed = integrate_fixed(grav_rhs, state0, save, substeps=10)
        np.testing.assert_allclose(fixed.states, adaptive.states, atol=1e-3)

    def test_blowup_underflows_step_size(self):
        # dh/dt = h^2 from h=1 diverges at t=1, inside the span
        with pytest.raises(StepSizeUnderflow):
            integrate_adaptive(
                lambda s, t: s * s,
                np.array([1.0]),
                (0.0, 2.0),
                save_at=TimeGrid(np.array([0.0, 2.0])),
            )

    def test_save_points_hit_exactly(self):
        save = TimeGrid(np.array([0.0, 0.31, 0.5, 0.77, 1.0]))
        traj = integrate_adaptive(
            lambda s, t: -s, np.array([1.0]), (0.0, 1.0), save_at=save
        )
        np.testing.assert_allclose(
            traj.states[:, 0], np.exp(-save.times), rtol=1e-8
        )
