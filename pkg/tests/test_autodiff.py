import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqrisk import autodiff as ad
from seqrisk.autodiff import (
    NonFiniteError,
    ShapeMismatchError,
    Tensor,
    grad_check,
    tape,
)
from seqrisk.optim import Adam, NonFiniteGradientError


def finite_diff(f, x, eps=1e-5):
    return (f(x + eps) - f(x - eps)) / (2 * eps)


def test_softmax_of_equal_logits_is_uniform():
    out = ad.softmax(Tensor([0.0, 0.0]))
    assert np.allclose(out.values, [0.5, 0.5])


def test_tanh_derivative_at_zero_is_one():
    x = Tensor(np.array([0.0]))
    y = ad.tsum(ad.tanh(x))
    y.backward()
    assert x.grad[0] == pytest.approx(1.0)


def test_elementwise_mul_backward_matches_finite_differences():
    rng = np.random.default_rng(0)
    xv, yv = rng.normal(size=5), rng.normal(size=5)
    x, y = Tensor(xv), Tensor(yv)
    ad.tsum(ad.mul(x, y)).backward()
    assert np.allclose(x.grad, yv)
    for i in range(5):
        def f(v, i=i):
            pert = xv.copy()
            pert[i] = v
            return float((pert * yv).sum())
        assert x.grad[i] == pytest.approx(finite_diff(f, xv[i]), abs=1e-7)


def test_grad_check_square():
    x = Tensor(np.array([3.0]))
    err = grad_check(lambda params: ad.tsum(ad.mul(params[0], params[0])), [x])
    assert err < 1e-9
    ad.tsum(ad.mul(x, x)).backward()
    assert x.grad[0] == pytest.approx(6.0)


def test_grad_check_weighted_bce_toy_head():
    rng = np.random.default_rng(1)
    w = Tensor(rng.normal(size=(3, 2)))
    b = Tensor(np.zeros(2))
    x = np.array([0.5, -1.0, 2.0])
    y = np.array([1.0, 0.0])
    b_w = np.array([0.7, 1.0])

    def f(params):
        w_, b_ = params
        p = ad.sigmoid(ad.add(ad.matmul(Tensor(x), w_), b_))
        p = ad.clip(p, 1e-12, 1 - 1e-12)
        pos = ad.mul(Tensor(y * b_w), ad.log(p))
        neg = ad.mul(Tensor(1.0 - y), ad.log(ad.sub(1.0, p)))
        return ad.mul(ad.tsum(ad.add(pos, neg)), -1.0)

    assert grad_check(f, [w, b]) < 1e-6


def test_grad_check_constant_function():
    x = Tensor(np.array([2.0, -1.0]))
    err = grad_check(lambda params: ad.tsum(ad.mul(params[0], 0.0)), [x])
    assert err == 0.0


def test_grad_check_rejects_bad_eps():
    x = Tensor(np.array([1.0]))
    with pytest.raises(ValueError):
        grad_check(lambda p: ad.tsum(p[0]), [x], eps=0.5)


def test_gru_style_composite_grad_check():
    rng = np.random.default_rng(2)
    W = Tensor(rng.normal(scale=0.5, size=(3, 4)))
    U = Tensor(rng.normal(scale=0.5, size=(4, 4)))
    x = np.array([0.3, -0.2, 0.9])

    def f(params):
        W_, U_ = params
        h = Tensor(np.zeros(4))
        for _ in range(3):
            z = ad.sigmoid(ad.add(ad.matmul(Tensor(x), W_), ad.matmul(h, U_)))
            c = ad.tanh(ad.add(ad.matmul(Tensor(x), W_), ad.matmul(ad.mul(z, h), U_)))
            h = ad.add(ad.mul(ad.sub(1.0, z), h), ad.mul(z, c))
        return ad.tsum(ad.mul(ad.softmax(h), h))

    assert grad_check(f, [W, U], eps=1e-5) < 1e-4


def test_softmax_sums_to_one_and_positive():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = Tensor(rng.normal(scale=5, size=(4, 7)))
        y = ad.softmax(x, axis=1).values
        assert np.allclose(y.sum(axis=1), 1.0, atol=1e-12)
        assert (y > 0).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_backward_of_sum_is_sum_of_backwards(seed):
    rng = np.random.default_rng(seed)
    av, bv = rng.normal(size=4), rng.normal(size=4)
    x1 = Tensor(av)
    loss_a = ad.tsum(ad.tanh(x1))
    loss_a.backward()
    ga = x1.grad.copy()
    x2 = Tensor(av)
    loss_b = ad.tsum(ad.mul(ad.sigmoid(x2), bv))
    loss_b.backward()
    gb = x2.grad.copy()
    x3 = Tensor(av)
    combined = ad.add(ad.tsum(ad.tanh(x3)), ad.tsum(ad.mul(ad.sigmoid(x3), bv)))
    combined.backward()
    assert np.allclose(x3.grad, ga + gb, atol=1e-12)


def test_shape_mismatch_names_the_op():
    with pytest.raises(ShapeMismatchError, match="add"):
        ad.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))
    with pytest.raises(ShapeMismatchError, match="matmul"):
        ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))


def test_non_finite_forward_raises():
    with pytest.raises(NonFiniteError):
        ad.log(Tensor(np.array([0.0])))
    with pytest.raises(NonFiniteError):
        Tensor(np.array([np.nan]))


def test_tape_order_is_reverse_of_recording():
    x = Tensor(np.array([1.0]))
    a = ad.tanh(x)
    b = ad.sigmoid(a)
    c = ad.tsum(ad.mul(a, b))
    nodes = tape(c)
    orders = [n._order for n in nodes]
    assert orders == sorted(orders)
    assert nodes[-1] is c


def test_matmul_matvec_cases():
    rng = np.random.default_rng(4)
    M = rng.normal(size=(3, 4))
    v = rng.normal(size=4)
    u = rng.normal(size=3)
    mt, vt, ut = Tensor(M), Tensor(v), Tensor(u)
    out = ad.matmul(mt, vt)
    assert np.allclose(out.values, M @ v)
    ad.tsum(ad.mul(out, ut)).backward()
    assert np.allclose(mt.grad, np.outer(u, v))
    assert np.allclose(vt.grad, M.T @ u)


def test_broadcast_add_unbroadcasts_gradient():
    a = Tensor(np.ones((3, 4)))
    b = Tensor(np.ones(4))
    ad.tsum(ad.add(a, b)).backward()
    assert np.allclose(a.grad, np.ones((3, 4)))
    assert np.allclose(b.grad, 3 * np.ones(4))


def test_concat_and_getitem_roundtrip_gradients():
    a, b = Tensor(np.ones((2, 2))), Tensor(np.full((2, 3), 2.0))
    joined = ad.concat([a, b], axis=1)
    picked = ad.getitem(joined, (slice(None), slice(1, 4)))
    ad.tsum(picked).backward()
    assert np.allclose(a.grad, [[0, 1], [0, 1]])
    assert np.allclose(b.grad, [[1, 1, 0], [1, 1, 0]])


# -- optimizer ----------------------------------------------------------------


def test_adam_zero_gradient_leaves_params_but_advances_step():
    p = Tensor(np.array([1.0, -2.0]))
    opt = Adam([p], lr=0.1)
    p.grad = np.zeros(2)
    opt.step()
    assert opt.step_count == 1
    assert np.allclose(p.values, [1.0, -2.0])


def test_adam_first_step_is_bias_corrected_lr():
    p = Tensor(np.array([0.0]))
    opt = Adam([p], lr=0.1)
    p.grad = np.array([1.0])
    opt.step()
    assert p.values[0] == pytest.approx(-0.1, rel=1e-6)


def test_adam_identical_params_stay_identical():
    p1, p2 = Tensor(np.array([0.3])), Tensor(np.array([0.3]))
    opt = Adam([p1, p2], lr=0.05)
    for g in (0.7, -0.2, 1.1):
        p1.grad = np.array([g])
        p2.grad = np.array([g])
        opt.step()
    assert p1.values[0] == p2.values[0]


def test_adam_rejects_non_finite_gradients():
    p = Tensor(np.array([0.0]))
    opt = Adam([p])
    p.grad = np.array([np.inf])
    with pytest.raises(NonFiniteGradientError):
        opt.step()
