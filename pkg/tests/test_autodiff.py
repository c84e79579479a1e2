import numpy as np
import pytest
from nets import affine_net, random_net, square_net, sum_of_squares_net
from oracles import (
    fd_gradient,
    fd_laplacian,
    fd_param_gradient,
    forward,
    kink_guarded_point,
    rel_err,
)

from sobolev_bench.autodiff import dual
from sobolev_bench.autodiff.derivatives import (
    ActivationKind,
    dual_gradient,
    dual_laplacian,
    eval_point,
    input_gradient,
    input_hessian,
    input_laplacian,
    layer_params,
    param_gradient,
    propagate,
)
from sobolev_bench.autodiff.tape import Tape, reduce_sum, square
from sobolev_bench.errors import ContractError, InputShapeError
from sobolev_bench.networks import from_arrays, init_model


def test_eval_relu_kills_negative_input():
    m = from_arrays([[[1.0]], [[1.0]]], [[0.0], [0.0]], ["relu", "identity"])
    assert eval_point(m, [-0.5]) == 0.0


def test_eval_square_net():
    assert eval_point(square_net(), [0.7]) == pytest.approx(0.49, abs=1e-15)


def test_eval_matches_loop_oracle():
    m = random_net(3, 2, [5, 4], ["relu", "relu_squared"])
    x = np.array([0.3, 0.4])
    assert eval_point(m, x) == pytest.approx(forward(m, x), rel=1e-13)


def test_eval_rejects_wrong_dimension():
    with pytest.raises(InputShapeError):
        eval_point(square_net(), [0.1, 0.2])


def test_square_net_gradient():
    assert input_gradient(square_net(), [0.7])[0] == pytest.approx(1.4, abs=1e-14)


def test_affine_gradient_constant():
    m = affine_net([3.0, -2.0])
    for x in ([0.1, 0.2], [0.9, 0.5]):
        np.testing.assert_allclose(input_gradient(m, x), [3.0, -2.0], atol=0)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = random_net(seed, 3, [6, 6], ["relu", "relu"])
    x = kink_guarded_point(m, rng, 3)
    fd = fd_gradient(lambda p: forward(m, p), x)
    assert rel_err(input_gradient(m, x), fd) < 1e-5


@pytest.mark.parametrize("seed", range(5))
def test_forward_and_reverse_gradients_agree(seed):
    rng = np.random.default_rng(seed)
    m = random_net(seed, 4, [7, 5], ["relu_squared", "relu"])
    X = rng.uniform(size=(20, 4))
    assert rel_err(input_gradient(m, X, "reverse"), input_gradient(m, X, "forward")) < 1e-10


def test_sum_of_squares_laplacian_is_four():
    X = np.random.default_rng(0).uniform(size=(50, 2))
    np.testing.assert_allclose(input_laplacian(sum_of_squares_net(), X), 4.0, atol=1e-12)


def test_relu_net_laplacian_is_zero():
    m = random_net(1, 2, [8, 8], ["relu", "relu"])
    assert input_laplacian(m, [0.37, 0.61]) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_dsrn_laplacian_matches_second_differences(seed):
    rng = np.random.default_rng(seed)
    m = random_net(seed, 2, [6, 6, 6], ["relu", "relu", "relu_squared"])
    x = kink_guarded_point(m, rng, 2)
    fd = fd_laplacian(lambda p: forward(m, p), x)
    assert rel_err(input_laplacian(m, x), fd, floor=1e-3) < 1e-3


@pytest.mark.parametrize("seed", range(3))
def test_laplacian_equals_hessian_trace_and_dual(seed):
    rng = np.random.default_rng(seed)
    m = random_net(seed, 3, [5, 4], ["relu_squared", "relu_squared"])
    x = rng.uniform(size=3)
    lap = input_laplacian(m, x)
    assert lap == pytest.approx(np.trace(input_hessian(m, x)), rel=1e-12)
    assert lap == pytest.approx(dual_laplacian(m, x), rel=1e-12)
    np.testing.assert_allclose(dual_gradient(m, x), input_gradient(m, x), rtol=1e-12)


def test_dual_product_rule_and_kink():
    x = dual.DualValue(3.0, 1.0)
    y = x * x - 2.0 * x
    assert (y.primal, y.tangent) == (3.0, 4.0)
    assert dual.relu(dual.DualValue(0.0, 1.0)).tangent == 0.0
    assert dual.relu_squared(dual.DualValue(2.0, 1.0)).tangent == 4.0


def test_activation_derivative_rules_and_kinks():
    z = np.array([-1.0, 0.0, 2.0])
    np.testing.assert_array_equal(ActivationKind.RELU.first(z), [0.0, 0.0, 1.0])
    np.testing.assert_array_equal(ActivationKind.RELU_SQUARED.first(z), [0.0, 0.0, 4.0])
    np.testing.assert_array_equal(ActivationKind.RELU_SQUARED.second(z), [0.0, 0.0, 2.0])


def test_param_gradient_affine_quadratic():
    m = affine_net([2.0, -1.0], 0.5)
    x = np.array([[0.3, 0.8]])
    pg = param_gradient(m, lambda p: square(propagate(p, x).value).sum())
    phi = 2.0 * 0.3 - 0.8 + 0.5
    np.testing.assert_allclose(pg.flat(), 2 * phi * np.array([0.3, 0.8, 1.0]), rtol=1e-14)


def test_param_gradient_of_gradient_norm_on_square_net():
    m = square_net()
    x = np.array([[0.7]])

    def loss_params(p):
        return reduce_sum(square(propagate(p, x, order=1).grad))

    def loss_model(mm):
        return float(input_gradient(mm, [0.7])[0] ** 2)

    pg = param_gradient(m, loss_params)
    assert rel_err(pg.flat(), fd_param_gradient(m, loss_model)) < 1e-4


def test_param_gradient_of_pinn_integrand():
    m = random_net(2, 2, [5], ["relu_squared"])
    x = np.array([[0.4, 0.6]])
    f = 3.0

    def loss_params(p):
        return square(propagate(p, x, order=2).laplacian + f).sum()

    def loss_model(mm):
        return (input_laplacian(mm, x[0]) + f) ** 2

    pg = param_gradient(m, loss_params)
    assert rel_err(pg.flat(), fd_param_gradient(m, loss_model, h=1e-5)) < 1e-3


def test_gradient_linearity():
    m = random_net(4, 2, [4], ["relu_squared"])
    X = np.random.default_rng(1).uniform(size=(6, 2))

    def l1(p):
        return square(propagate(p, X).value).sum()

    def l2(p):
        return reduce_sum(square(propagate(p, X, order=1).grad))

    g1, g2 = param_gradient(m, l1).flat(), param_gradient(m, l2).flat()
    g = param_gradient(m, lambda p: 2.0 * l1(p) + (-3.0) * l2(p)).flat()
    np.testing.assert_allclose(g, 2.0 * g1 - 3.0 * g2, rtol=1e-12, atol=1e-14)


def test_backward_rejects_non_scalar_root():
    tape = Tape()
    v = tape.var(np.ones(3))
    with pytest.raises(ContractError):
        tape.backward(v * 2.0, [v])


def test_backward_sum_of_gradients_and_single_visit():
    tape = Tape()
    a = tape.var(np.array([1.0, 2.0]))
    shared = a * a
    out = (shared + shared).sum()
    (g,) = tape.backward(out, [a])
    np.testing.assert_allclose(g, 4.0 * np.array([1.0, 2.0]))


def test_polynomial_nets_reproduce_derivatives_exactly():
    X = np.random.default_rng(5).uniform(size=(30, 2))
    m = sum_of_squares_net()
    np.testing.assert_allclose(input_gradient(m, X), 2.0 * X, rtol=0, atol=1e-15)
    H = input_hessian(m, X)
    np.testing.assert_allclose(H, np.broadcast_to(2.0 * np.eye(2), H.shape), atol=1e-15)


def test_jet_value_matches_evaluate():
    m = init_model(3, [4, 4], ["relu", "relu_squared"], 0)
    X = np.random.default_rng(0).uniform(size=(5, 3))
    jet = propagate(layer_params(m), X, order=2)
    np.testing.assert_allclose(jet.value, [forward(m, x) for x in X], rtol=1e-13)
