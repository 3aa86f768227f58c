import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replay_dynamics.linesearch import (
    LinearTheta,
    LineSearchConfig,
    MetricPair,
    Transition,
    TrueWeights,
    env_step,
    greedy_action,
    measure_M,
    metrics,
    q_value,
    reward,
    stationary_weights,
    td_error,
    td_update,
)

BETA = TrueWeights(0.1, 0.5)
CFG = LineSearchConfig(BETA)
finite = st.floats(-50, 50, allow_nan=False)


class TestTypes:
    def test_zero_slope_rejected(self):
        with pytest.raises(ValueError):
            TrueWeights(0.0, 0.5)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            TrueWeights(math.nan, 0.5)
        with pytest.raises(ValueError):
            LinearTheta(math.inf, 0.0)
        with pytest.raises(ValueError):
            Transition(0.0, 0.01, math.nan, 0.01)

    @pytest.mark.parametrize("kw", [dict(v=0.0), dict(gamma=1.0), dict(gamma=-0.1), dict(horizon=0)])
    def test_config_invariants(self, kw):
        with pytest.raises(ValueError):
            LineSearchConfig(BETA, **kw)


class TestReward:
    def test_values(self):
        assert reward(CFG, -5.0) == pytest.approx(0.0, abs=1e-15)
        assert reward(CFG, 0.0) == 0.5
        assert reward(CFG, 1.0) == pytest.approx(0.6)


class TestEnvStep:
    def test_move_right(self):
        tr = env_step(CFG, -5.0, 0.01)
        assert tr.x_next == pytest.approx(-4.99)
        assert tr.r == pytest.approx(0.001)
        assert not tr.terminal

    def test_move_left(self):
        tr = env_step(CFG, 0.0, -0.01)
        assert tr.x_next == pytest.approx(-0.01)
        assert tr.r == pytest.approx(0.499)

    def test_invalid_action(self):
        with pytest.raises(ValueError):
            env_step(CFG, -5.0, 0.02)


class TestQAndPolicy:
    def test_q_value(self):
        assert q_value(LinearTheta(0.1, 0.5), -5.0, 0.01) == pytest.approx(0.001)
        assert q_value(LinearTheta(0.0, 1.0), 123.0, -0.01) == 1.0
        assert q_value(LinearTheta(1.0, 0.0), 2.0, -0.01) == pytest.approx(1.99)

    @pytest.mark.parametrize("th1, expected", [(0.05, 0.01), (-0.1, -0.01), (0.0, 0.01)])
    def test_greedy_action(self, th1, expected):
        assert greedy_action(LinearTheta(th1, 0.0), 0.01) == expected

    @given(th1=st.floats(1e-6, 5), steps=st.integers(1, 200))
    def test_greedy_trajectory_is_linear(self, th1, steps):
        theta = LinearTheta(th1, 0.0)
        x = -5.0
        for _ in range(steps):
            x = env_step(CFG, x, greedy_action(theta, CFG.v)).x_next
        assert x == pytest.approx(-5.0 + 0.01 * steps, abs=1e-9)


class TestTdError:
    @given(x=finite, right=st.booleans())
    def test_zero_at_true_weights(self, x, right):
        tr = env_step(CFG, x, 0.01 if right else -0.01)
        assert td_error(LinearTheta(0.1, 0.5), tr, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_mismatch_value(self):
        tr = env_step(CFG, -5.0, 0.01)
        assert td_error(LinearTheta(0.0, 1.0), tr, 0.0) == pytest.approx(-0.999)

    @given(x=finite, right=st.booleans())
    def test_zero_at_discounted_fixed_point(self, x, right):
        gamma = 0.5
        theta = stationary_weights(BETA, 0.01, gamma)
        assert theta.theta1 == pytest.approx(0.2)
        tr = env_step(CFG, x, 0.01 if right else -0.01)
        assert td_error(theta, tr, gamma) == pytest.approx(0.0, abs=1e-12)

    def test_terminal_drops_bootstrap(self):
        theta = LinearTheta(0.3, 0.2)
        tr = Transition(1.0, 0.01, 0.4, 1.01, terminal=True)
        assert td_error(theta, tr, 0.9) == pytest.approx(0.4 - q_value(theta, 1.0, 0.01))

    def test_batch_matches_scalar(self):
        theta = LinearTheta(0.2, 0.7)
        trs = [env_step(CFG, x, a) for x, a in [(-5, 0.01), (1.0, -0.01), (3.0, 0.01)]]
        batch = Transition(*(np.array(col) for col in zip(*[(t.x, t.a, t.r, t.x_next, t.terminal) for t in trs])))
        np.testing.assert_allclose(td_error(theta, batch, 0.7), [td_error(theta, t, 0.7) for t in trs])


class TestTdUpdate:
    def test_worked_example(self):
        tr = env_step(CFG, -5.0, 0.01)
        new = td_update(LinearTheta(0.0, 1.0), tr, 0.01, 0.0)
        assert new.theta1 == pytest.approx(0.0498501)
        assert new.theta2 == pytest.approx(1.0 - 0.00999)

    def test_fixed_point_is_identity(self):
        theta = LinearTheta(0.1, 0.5)
        tr = env_step(CFG, 2.0, -0.01)
        new = td_update(theta, tr, 0.05, 0.0)
        assert new.as_array() == pytest.approx(theta.as_array(), abs=1e-15)

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            td_update(LinearTheta(0, 1), env_step(CFG, 0.0, 0.01), 0.0, 0.0)

    def test_repeated_update_shrinks_error(self):
        theta = LinearTheta(0.0, 1.0)
        tr = env_step(CFG, -5.0, 0.01)
        errs = []
        for _ in range(50):
            errs.append(abs(td_error(theta, tr, 0.0)))
            theta = td_update(theta, tr, 0.01, 0.0)
        assert all(b < a for a, b in zip(errs, errs[1:]))

    @settings(max_examples=200)
    @given(th1=finite, th2=finite, x=finite, right=st.booleans())
    def test_gradient_matches_finite_differences(self, th1, th2, x, right):
        a = 0.01 if right else -0.01
        # Q is linear in theta, so a wide dyadic step has no truncation error
        eps = 0.5
        num = [
            (q_value(LinearTheta(th1 + eps, th2), x, a) - q_value(LinearTheta(th1 - eps, th2), x, a)) / (2 * eps),
            (q_value(LinearTheta(th1, th2 + eps), x, a) - q_value(LinearTheta(th1, th2 - eps), x, a)) / (2 * eps),
        ]
        np.testing.assert_allclose(num, [x + a, 1.0], rtol=1e-8, atol=1e-11)


class TestMetrics:
    def test_values(self):
        assert metrics(LinearTheta(0.0, 1.0), BETA) == MetricPair(-0.1, 0.5)
        assert metrics(LinearTheta(0.1, 0.5), BETA) == MetricPair(0.0, 0.0)
        assert metrics(LinearTheta(0.2, 0.5), BETA) == pytest.approx((0.1, 0.0))

    @given(d1=st.integers(-1000, 1000), d2=st.integers(-1000, 1000))
    def test_inverse_shift(self, d1, d2):
        # dyadic offsets keep the sums exact
        d = (d1 / 1024, d2 / 1024)
        beta = TrueWeights(0.125, 0.5)
        assert metrics(LinearTheta(beta.beta1 + d[0], beta.beta2 + d[1]), beta) == d

    def test_measure(self):
        assert measure_M(0, 0) == 0
        assert measure_M(-0.1, 0.5) == pytest.approx(0.6)
        assert measure_M(0.02, -0.03) == pytest.approx(0.05)
