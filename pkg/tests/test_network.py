import math

import numpy as np
import pytest

from tscrl.network import (AdamState, Gradients, NetworkSpec, adam_step,
                           batch_loss, forward, gradient_check, init_params,
                           loss_and_grad, relative_error, zero_params)
from tscrl.rng import substream


def tiny(spec_dims, seed=0):
    spec = NetworkSpec(spec_dims[0], spec_dims[-1], tuple(spec_dims[1:-1]))
    return init_params(spec, np.random.default_rng(seed))


def random_batch(params, batch, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(batch, params.spec.input_dim))
    acts = rng.integers(0, params.spec.output_dim, batch)
    y = rng.normal(size=batch)
    return X, acts, y


def test_agent_geometries():
    turn = NetworkSpec.for_agent("turn")
    assert turn.dims == (192, 512, 512, 512, 256, 128, 4)
    time = NetworkSpec.for_agent("time")
    assert time.dims == (48, 512, 512, 512, 256, 128, 20)
    with pytest.raises(ValueError):
        NetworkSpec.for_agent("bogus")


def test_init_shapes_and_determinism():
    spec = NetworkSpec.for_agent("time")
    a = init_params(spec, substream(7, "init"))
    shapes = [w.shape for w in a.weights]
    assert shapes == [(48, 512), (512, 512), (512, 512), (512, 256),
                      (256, 128), (128, 20)]
    assert all(not b.any() for b in a.biases)
    b = init_params(spec, substream(7, "init"))
    assert all((x == y).all() for x, y in zip(a.weights, b.weights))
    c = init_params(spec, substream(8, "init"))
    assert any((x != y).any() for x, y in zip(a.weights, c.weights))


def test_zero_input_zero_bias_gives_zero_output():
    params = tiny([5, 4, 3])
    out = forward(params, np.zeros(5))
    assert (out == 0).all()


def test_hand_computed_tiny_forward():
    # 2-1-2 net: pre-activation 2*1 + (-1)*1 + 0.5 = 1.5, rectified 1.5,
    # outputs 1.5*2 + 0.1 and 1.5*(-3) - 0.2.
    spec = NetworkSpec(2, 2, (1,))
    params = zero_params(spec)
    params.weights[0][:] = [[2.0], [-1.0]]
    params.biases[0][:] = [0.5]
    params.weights[1][:] = [[2.0, -3.0]]
    params.biases[1][:] = [0.1, -0.2]
    out = forward(params, np.array([1.0, 1.0]))
    assert out == pytest.approx([3.1, -4.7])


def test_batched_forward_equals_per_sample():
    params = tiny([6, 5, 4, 3], seed=2)
    X = np.random.default_rng(3).normal(size=(7, 6))
    batch = forward(params, X)
    singles = np.stack([forward(params, x) for x in X])
    # no cross-sample coupling; tolerance only for BLAS kernel differences
    assert np.allclose(batch, singles, rtol=1e-12, atol=1e-14)


def test_dimension_mismatch_rejected():
    params = tiny([6, 5, 3])
    with pytest.raises(ValueError):
        forward(params, np.zeros(7))


def test_zero_loss_zero_grads_when_targets_equal_predictions():
    params = tiny([4, 3, 2], seed=1)
    X = np.random.default_rng(0).normal(size=(5, 4))
    q = forward(params, X)
    acts = np.array([0, 1, 0, 1, 0])
    y = q[np.arange(5), acts]
    loss, grads = loss_and_grad(params, X, acts, y)
    assert loss == 0.0
    assert all(not g.any() for g in grads.weights + grads.biases)


def test_single_sample_hand_derived_gradient():
    # Linear chain 1-1-1: h = relu(2*1) = 2, q = 3*h = 6, y = 10.
    # dL/dq = 2(q - y) = -8, so dw2 = -8*2, db2 = -8, dw1 = -8*3*1, db1 = -24.
    spec = NetworkSpec(1, 1, (1,))
    params = zero_params(spec)
    params.weights[0][:] = [[2.0]]
    params.weights[1][:] = [[3.0]]
    loss, grads = loss_and_grad(params, np.array([[1.0]]), np.array([0]),
                                np.array([10.0]))
    assert loss == pytest.approx(16.0)
    assert grads.weights[1][0, 0] == pytest.approx(-16.0)
    assert grads.biases[1][0] == pytest.approx(-8.0)
    assert grads.weights[0][0, 0] == pytest.approx(-24.0)
    assert grads.biases[0][0] == pytest.approx(-24.0)


def test_nontaken_actions_get_zero_gradient():
    params = tiny([3, 4, 5], seed=4)
    X = np.random.default_rng(1).normal(size=(1, 3))
    _, grads = loss_and_grad(params, X, np.array([2]), np.array([0.7]))
    out_bias_grad = grads.biases[-1]
    assert out_bias_grad[2] != 0
    assert all(out_bias_grad[i] == 0 for i in range(5) if i != 2)


def test_gradient_check_small_nets():
    for seed in range(4):
        params = tiny([5, 8, 6, 3], seed=seed)
        X, acts, y = random_batch(params, 6, seed=seed)
        assert gradient_check(params, X, acts, y) < 1e-6


def test_gradient_check_flags_corruption():
    params = tiny([4, 6, 3], seed=0)
    X, acts, y = random_batch(params, 5, seed=5)
    _, grads = loss_and_grad(params, X, acts, y)
    # double one nonzero entry; the harness must notice
    w = grads.weights[0]
    idx = np.unravel_index(np.abs(w).argmax(), w.shape)
    w[idx] *= 2.0
    assert gradient_check(params, X, acts, y, analytic=grads) > 0.1


def test_gradient_check_zero_loss_batch():
    params = tiny([3, 4, 2], seed=2)
    X = np.random.default_rng(2).normal(size=(4, 3))
    acts = np.array([0, 1, 0, 1])
    y = forward(params, X)[np.arange(4), acts]
    assert gradient_check(params, X, acts, y) == pytest.approx(0.0, abs=1e-6)


def test_gradient_check_validates_perturbation():
    params = tiny([3, 4, 2])
    X, acts, y = random_batch(params, 3)
    with pytest.raises(ValueError):
        gradient_check(params, X, acts, y, perturbation=0.0)


def test_adam_zero_grads_is_fixed_point():
    params = tiny([4, 5, 2], seed=3)
    before = params.copy()
    state = AdamState.for_params(params)
    zero = Gradients([np.zeros_like(w) for w in params.weights],
                     [np.zeros_like(b) for b in params.biases])
    adam_step(params, zero, state, lr=0.1)
    assert all((a == b).all() for a, b in zip(params.weights, before.weights))
    assert state.step == 1


def test_adam_first_step_matches_closed_form():
    # Scalar parameter, constant gradient 1, lr .001: m_hat = 1, v_hat = 1,
    # so the displacement is -lr / (1 + eps).
    spec = NetworkSpec(1, 1, ())
    params = zero_params(spec)
    params.weights[0][0, 0] = 1.0
    state = AdamState.for_params(params)
    g = Gradients([np.array([[1.0]])], [np.array([0.0])])
    adam_step(params, g, state, lr=0.001)
    expected = 1.0 - 0.001 * 1.0 / (math.sqrt(1.0) + 1e-8)
    assert abs(params.weights[0][0, 0] - expected) < 1e-12


def test_adam_two_steps_deterministic():
    def run():
        params = tiny([3, 4, 2], seed=6)
        state = AdamState.for_params(params)
        X, acts, y = random_batch(params, 4, seed=7)
        for _ in range(2):
            _, grads = loss_and_grad(params, X, acts, y)
            adam_step(params, grads, state, lr=0.01)
        return [w.copy() for w in params.weights]

    a, b = run(), run()
    assert all((x == y).all() for x, y in zip(a, b))


def test_loss_nonnegative_and_zero_iff_match():
    params = tiny([4, 6, 3], seed=9)
    X, acts, y = random_batch(params, 8, seed=9)
    loss, _ = loss_and_grad(params, X, acts, y)
    assert loss > 0
    q = forward(params, X)
    exact = q[np.arange(8), acts]
    loss2, _ = loss_and_grad(params, X, acts, exact)
    assert loss2 == 0.0


def test_network_is_not_additive():
    # Rectifiers break superposition: f(x1 + x2) != f(x1) + f(x2).
    spec = NetworkSpec(1, 1, (1,))
    params = zero_params(spec)
    params.weights[0][:] = [[1.0]]
    params.weights[1][:] = [[1.0]]
    x1, x2 = np.array([1.0]), np.array([-1.0])
    lhs = forward(params, x1 + x2)
    rhs = forward(params, x1) + forward(params, x2)
    assert not np.allclose(lhs, rhs)


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1e-12, -1e-12) < 1e-3
