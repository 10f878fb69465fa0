import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from gravlearn.dynamics import BodySpec
from gravlearn.integrators import TimeGrid
from gravlearn.models import init_model_params, predict, ude_model
from gravlearn.optimizers import (
    Stage1Config,
    Stage2Config,
    TrainConfig,
    adam_init,
    adam_step,
    adamw_step,
    bfgs_minimize,
    node_default_config,
    train,
    ude_default_config,
)


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        params = np.array([1.0, -2.0, 0.5])
        state = adam_init(3)
        _, new = adam_step(state, params, np.zeros(3), lr=1e-3)
        np.testing.assert_array_equal(new, params)

    def test_first_step_formula(self):
        # scalar param 0, grad 2.0, lr 1e-3: bias correction makes the first
        # update approximately -lr * sign(grad)
        state = adam_init(1)
        _, new = adam_step(state, np.array([0.0]), np.array([2.0]), lr=1e-3)
        assert new[0] == pytest.approx(-1e-3, rel=1e-7)

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        params = rng.standard_normal(10)
        grad = rng.standard_normal(10)
        s1, p1 = adam_step(adam_init(10), params, grad, lr=1e-3)
        s2, p2 = adam_step(adam_init(10), params, grad, lr=1e-3)
        assert np.array_equal(p1, p2)
        assert np.array_equal(s1.first_moment, s2.first_moment)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_first_step_magnitude_bound(self, seed):
        rng = np.random.default_rng(seed)
        params = rng.standard_normal(6)
        grad = rng.standard_normal(6) * 10.0 ** rng.integers(-3, 4)
        lr = 10.0 ** rng.uniform(-4, -1)
        _, new = adam_step(adam_init(6), params, grad, lr=lr)
        assert np.max(np.abs(new - params)) <= lr * (1.0 + 1e-9)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            adam_step(adam_init(3), np.zeros(3), np.zeros(4), lr=1e-3)


class TestAdamW:
    def test_pure_decay_with_zero_gradient(self):
        state = adam_init(1)
        _, new = adamw_step(state, np.array([1.0]), np.array([0.0]), 1e-3, 0.01)
        assert new[0] == pytest.approx(0.99999, abs=1e-12)

    def test_zero_decay_reduces_to_adam(self):
        rng = np.random.default_rng(1)
        params = rng.standard_normal(5)
        grad = rng.standard_normal(5)
        _, adam_out = adam_step(adam_init(5), params, grad, lr=1e-3)
        _, adamw_out = adamw_step(adam_init(5), params, grad, 1e-3, 0.0)
        np.testing.assert_array_equal(adam_out, adamw_out)

    @given(st.floats(0.0, 0.5), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_decay_never_flips_sign(self, weight_decay, seed):
        # with zero gradient the update is a pure contraction by
        # (1 - lr*wd) in (0, 1], which cannot cross zero
        rng = np.random.default_rng(seed)
        params = rng.standard_normal(4)
        _, new = adamw_step(adam_init(4), params, np.zeros(4), 1e-3, weight_decay)
        assert np.all(new * params >= 0.0)


class TestBFGS:
    def test_quadratic_converges_fast(self):
        target = np.array([1.0, -2.0, 3.0, 0.5])

        def loss(p):
            return 0.5 * float(np.sum((p - target) ** 2))

        def grad(p):
            return p - target

        res = bfgs_minimize(loss, grad, np.zeros(4), max_iters=20)
        assert res.n_iters <= 5
        np.testing.assert_allclose(res.params, target, atol=1e-8)

    def test_stationary_start_returns_immediately(self):
        def loss(p):
            return float(np.sum(p**2))

        def grad(p):
            return 2.0 * p

        start = np.zeros(3)
        res = bfgs_minimize(loss, grad, start, max_iters=10)
        assert res.converged
        assert res.n_iters == 0
        np.testing.assert_array_equal(res.params, start)

    def test_rosenbrock_monotone_decrease(self):
        def loss(p):
            x, y = p
            return float((1 - x) ** 2 + 100.0 * (y - x * x) ** 2)

        def grad(p):
            x, y = p
            return np.array(
                [-2 * (1 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)]
            )

        res = bfgs_minimize(loss, grad, np.array([-1.2, 1.0]), max_iters=150)
        losses = np.array(res.losses)
        # Armijo acceptance guarantees decrease up to float round-off;
        # backtracking-only line searches make no speed promise here
        assert np.all(np.diff(losses) <= 0.0)
        assert losses[-1] < losses[0]

    def test_never_exceeds_starting_loss(self):
        def loss(p):
            return float(np.sum(np.abs(p) ** 1.3))

        def grad(p):
            return 1.3 * np.sign(p) * np.abs(p) ** 0.3

        start = np.array([2.0, -3.0])
        res = bfgs_minimize(loss, grad, start, max_iters=30)
        assert res.losses[-1] <= loss(start)


def tiny_problem(seed=0):
    spec = BodySpec(masses=np.array([1.0, 1.2]), spatial_dim=3)
    model = ude_model(spec, units=8, seed=seed)
    rng = np.random.default_rng(99)
    gen_params = rng.standard_normal(model.mlp_spec.n_params) * 0.2
    grid = TimeGrid.uniform(0.0, 0.5, 6)
    state0 = rng.uniform(-1, 1, spec.state_size)
    data = predict(model, gen_params, grid, state0, substeps=2)
    return model, data


class TestTrain:
    def test_zero_epochs_returns_init(self):
        model, data = tiny_problem()
        config = TrainConfig(stage1=Stage1Config(epochs=0), stage2=None, seed=3)
        result = train(model, data, config, substeps=2)
        np.testing.assert_array_equal(
            result.params, init_model_params(model, seed=3)
        )
        assert result.loss_history.size == 0

    def test_deterministic_given_seed(self):
        model, data = tiny_problem()
        config = TrainConfig(
            stage1=Stage1Config(optimizer="adam", lr=1e-3, epochs=8),
            stage2=None,
            seed=7,
        )
        a = train(model, data, config, substeps=2)
        b = train(model, data, config, substeps=2)
        assert np.array_equal(a.params, b.params)
        assert np.array_equal(a.loss_history, b.loss_history)

    def test_loss_history_one_entry_per_step(self):
        model, data = tiny_problem()
        config = TrainConfig(stage1=Stage1Config(epochs=5), stage2=None, seed=0)
        result = train(model, data, config, substeps=2)
        assert result.loss_history.size == 5

    def test_two_stage_improves_or_holds(self):
        model, data = tiny_problem()
        config = TrainConfig(
            stage1=Stage1Config(optimizer="adam", lr=1e-3, epochs=10),
            stage2=Stage2Config(max_iters=10),
            seed=1,
        )
        result = train(model, data, config, substeps=2)
        assert result.final_loss <= result.loss_history[0]

    def test_node_defaults_match_selected_values(self):
        config = node_default_config()
        assert config.stage1.optimizer == "adam"
        assert config.stage1.lr == 1e-3
        assert config.stage1.epochs == 200
        assert config.stage2.max_iters == 200

    def test_ude_defaults_match_selected_values(self):
        config = ude_default_config()
        assert config.stage1.optimizer == "adamw"
        assert config.stage1.lr == 1e-3
        assert config.stage1.epochs == 700
        assert config.stage2 is None

    def test_config_validation(self):
        with pytest.raises(ValueError):
            Stage1Config(optimizer="sgd")
        with pytest.raises(ValueError):
            Stage1Config(lr=0.0)
        with pytest.raises(ValueError):
            Stage1Config(epochs=-1)
        with pytest.raises(ValueError):
            Stage2Config(max_iters=0)
