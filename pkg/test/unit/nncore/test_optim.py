import numpy
import pytest
from numpy.testing import assert_allclose

from surfeat.exceptions import InvalidArgumentError, RunAbortedError
from surfeat.nncore.layers import Parameter
from surfeat.nncore.optim import AdamW, OptimizerState, adamw_step, cosine_schedule


def _parameter(value, grad):
    parameter = Parameter((1,))
    parameter.data[...] = value
    parameter.grad = numpy.array([grad], dtype=parameter.dtype)
    return parameter


@pytest.mark.parametrize(
    "step, expected", [(0, 1.0), (5, 0.55), (10, 0.1)]
)
def test_cosine_schedule(step, expected):
    assert cosine_schedule(step, 10, 1.0, 0.1) == pytest.approx(expected)


def test_cosine_schedule__out_of_range():
    with pytest.raises(InvalidArgumentError):
        cosine_schedule(11, 10, 1.0, 0.0)


def test_adamw__first_step():
    parameter = _parameter(1.0, 2.0)
    optimizer = AdamW([("p", parameter)], total_steps=10, lr=0.1, weight_decay=(0.5, 0.0))
    optimizer.step()
    # decay 1 - 0.1 * 0.5, then a unit-magnitude bias-corrected Adam step
    assert_allclose(parameter.data, [0.85], rtol=1e-6)
    assert optimizer.state.step == 1
    assert_allclose(optimizer.state.m["p"], [0.2], rtol=1e-6)


def test_adamw__learning_rate_schedule_mode():
    state = OptimizerState(total_steps=4, base_lr=0.2, wd_max=0.01, schedule_mode="learning-rate")
    state.step = 2
    lr, decay = state.coefficients()
    assert lr == pytest.approx(0.1)
    assert decay == pytest.approx(0.01)


def test_adamw__zero_grad():
    parameter = _parameter(1.0, 3.0)
    AdamW([("p", parameter)], total_steps=1).zero_grad()
    assert_allclose(parameter.grad, [0.0])


def test_adamw__non_finite_gradient_aborts():
    parameter = _parameter(1.0, numpy.nan)
    state = OptimizerState(total_steps=3)
    with pytest.raises(RunAbortedError) as error:
        adamw_step(state, [("p", parameter)])
    assert error.value.step == 1


def test_adamw__unknown_schedule_mode():
    with pytest.raises(InvalidArgumentError):
        AdamW([], total_steps=1, schedule_mode="step")
