import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ssimgen import autodiff as ad
from ssimgen import ssim
from ssimgen.autodiff import Tensor
from ssimgen.errors import DomainError, NonFiniteValue, NotScalarOutput, ShapeMismatch


def test_forward_examples():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(ad.matmul(a, np.eye(2)).data, a.data)
    assert ad.mean(Tensor([1.0, 2.0, 3.0])).item() == 2
    assert ad.variance(Tensor([1.0, 2.0, 3.0])).item() == 1


def test_variance_matches_block_stats():
    v = np.array([4.0, 8.0, 1.0, 7.0, 2.0])
    sigma = ssim.block_stats(ssim.Block(v, 255)).sigma
    assert ad.variance(Tensor(v)).item() == pytest.approx(sigma**2, rel=1e-14)


def test_backward_sum_of_squares():
    x = Tensor([1.0, 2.0])
    (g,) = ad.backward(ad.tsum(ad.square(x)), [x])
    assert g.tolist() == [2.0, 4.0]


def test_constant_output_has_zero_gradient():
    x, y = Tensor([1.0, 2.0]), Tensor([3.0])
    out = ad.tsum(Tensor([5.0, 6.0]) * 2.0)
    gx, gy = ad.backward(out, [x, y])
    assert np.all(gx == 0) and np.all(gy == 0)


def test_unreachable_leaf_gets_zero():
    x, y = Tensor(2.0), Tensor([1.0, 1.0])
    gx, gy = ad.backward(x * x, [x, y])
    assert gx == 4.0 and gy.tolist() == [0.0, 0.0]


def test_not_scalar_output():
    with pytest.raises(NotScalarOutput):
        ad.backward(Tensor([1.0, 2.0]) * 2)


def test_shared_subexpression_visited_once():
    x = Tensor(3.0)
    y = x * x
    z = y + y + y  # dz/dx = 6x
    (g,) = ad.backward(z, [x])
    assert g == 18.0


def test_deep_chain_without_recursion_limit():
    x = Tensor(1.0)
    y = x
    for _ in range(5000):
        y = y * 1.0
    (g,) = ad.backward(y, [x])
    assert g == 1.0


def test_shape_errors():
    with pytest.raises(ShapeMismatch):
        ad.add(Tensor(np.ones(3)), Tensor(np.ones(2)))
    with pytest.raises(ShapeMismatch):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeMismatch):
        ad.ssim_dist2_diff(np.ones(3), np.ones(4), 1.0)
    with pytest.raises(ShapeMismatch):
        ad.concat([Tensor(np.ones((2, 2))), Tensor(np.ones((2, 3)))], axis=0)


def test_domain_errors():
    with pytest.raises(DomainError):
        ad.sqrt(Tensor([-1e-6]))
    assert ad.sqrt(Tensor([-1e-13])).data.tolist() == [0.0]
    with pytest.raises(DomainError):
        ad.log(Tensor([0.0]))


def test_non_finite_is_fatal():
    with pytest.raises(NonFiniteValue):
        ad.exp(Tensor([1000.0]))
    with pytest.raises(NonFiniteValue):
        ad.div(Tensor(1.0), Tensor(0.0))


def test_sqrt_gradient_at_zero():
    x = Tensor([0.0, 4.0])
    (g,) = ad.backward(ad.tsum(ad.sqrt(x)), [x])
    assert g.tolist() == [0.0, 0.25]


def test_broadcast_scalar_and_unbroadcast():
    x = Tensor(np.ones((2, 3)))
    b = Tensor(np.array([1.0, 2.0, 3.0]))
    s = Tensor(2.0)
    gx, gb, gs = ad.backward(ad.tsum((x + b) * s), [x, b, s])
    assert np.all(gx == 2) and gb.tolist() == [4.0, 4.0, 4.0] and gs == 6 + 2 * 6


def test_slice_concat_take_gradients():
    x = Tensor(np.arange(6.0).reshape(2, 3))
    gx = ad.backward(ad.tsum(ad.concat([x[:, :2], x[:, 1:]], axis=1)), [x])[0]
    assert gx.tolist() == [[1, 2, 1], [1, 2, 1]]
    idx = np.array([[0, 0], [2, 1]])
    gx = ad.backward(ad.tsum(ad.take(x, idx)), [x])[0]
    assert gx.tolist() == [[2, 1, 1], [2, 1, 1]]


# ---------------------------------------------------------------- ssim composite


def test_ssim_dist2_examples():
    assert ad.ssim_dist2_diff([1.0, -1.0], [1.0, -1.0], 9e-4).item() == 0
    assert ad.ssim_dist2_diff([1.0, -1.0], [-1.0, 1.0], 9e-4).item() == pytest.approx(8 / 4.0009, abs=1e-15)
    assert ad.ssim_dist2_diff([1.0, -1.0], [-1.0, 1.0], 9e-4).item() == pytest.approx(1.999550, abs=1e-6)


def test_ssim_dist2_gradient_zero_at_minimum():
    x = Tensor(np.array([3.0, 1.0, 4.0, 1.0]))
    (g,) = ad.backward(ad.ssim_dist2_diff(x, x.data.copy(), 0.5), [x])
    assert np.all(g == 0)


@given(arrays(np.float64, st.integers(2, 12), elements=st.floats(0, 1)), st.integers(0, 1000))
def test_ssim_dist2_matches_dist_eq1(x, seed):
    y = np.random.default_rng(seed).uniform(size=x.size)
    c = ssim.constants(1.0, x.size)[3]
    d = ssim.dist_eq1(ssim.Block(x, 1.0), ssim.Block(y, 1.0))
    assert abs(ad.ssim_dist2_diff(x, y, c).item() - d * d) < 1e-10


# ---------------------------------------------------------------- grad_check


def test_grad_check_quadratic_form():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(5, 5))
    A = A @ A.T

    def f(x):
        return ad.tsum(x * ad.matmul(Tensor(A), ad.reshape(x, (5, 1))).reshape(5))

    assert ad.grad_check(f, rng.normal(size=5)) < 1e-8


def test_grad_check_eps_range():
    with pytest.raises(ValueError):
        ad.grad_check(lambda x: ad.tsum(x), np.ones(2), eps=1e-2)


def test_grad_check_flags_a_wrong_gradient():
    def bad_square(x):
        return ad._node(x.data**2, (x,), lambda g: (3.0 * x.data * g,), "bad")

    assert ad.grad_check(lambda x: ad.tsum(bad_square(x)), np.array([1.0, 2.0])) > 0.1


@pytest.mark.parametrize("seed", range(20))
def test_grad_check_two_layer_tanh(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 3))
    w2 = rng.normal(size=(5, 1))

    def f(w1_flat):
        h = ad.tanh(ad.matmul(Tensor(x), ad.reshape(w1_flat, (3, 5))))
        return ad.mean(ad.square(ad.matmul(h, Tensor(w2))))

    assert ad.grad_check(f, rng.normal(size=15)) < 1e-4


@pytest.mark.parametrize(
    "fn",
    [ad.exp, ad.tanh, ad.sigmoid, ad.softplus, lambda t: ad.log(ad.exp(t) + 1.0), lambda t: ad.power(ad.exp(t), 1.5)],
)
def test_grad_check_elementwise(fn):
    p = np.random.default_rng(1).normal(size=6)
    assert ad.grad_check(lambda x: ad.tsum(fn(x) * np.arange(6.0)), p) < 1e-7


def test_grad_check_variance_and_div():
    p = np.random.default_rng(2).normal(size=(3, 4))
    assert ad.grad_check(lambda x: ad.tsum(ad.variance(x, axis=-1) / (ad.square(x[:, 0]) + 1.0)), p) < 1e-7


# ---------------------------------------------------------------- linearity and determinism


def test_backward_is_linear():
    rng = np.random.default_rng(5)
    p = rng.normal(size=8)

    def l1(x):
        return ad.tsum(ad.tanh(x) * 2.0)

    def l2(x):
        return ad.mean(ad.square(x - 0.5))

    x = Tensor(p)
    (g_sum,) = ad.backward(l1(x) + l2(x), [x])
    x1, x2 = Tensor(p), Tensor(p)
    (g1,) = ad.backward(l1(x1), [x1])
    (g2,) = ad.backward(l2(x2), [x2])
    assert np.array_equal(g_sum, g1 + g2)


def test_replay_determinism():
    p = np.random.default_rng(9).uniform(size=(3, 8))

    def run():
        x = Tensor(p)
        y = ad.tsum(ad.ssim_dist2_diff(x, p[::-1], 0.1))
        return y.item(), ad.backward(y, [x])[0]

    v1, g1 = run()
    v2, g2 = run()
    assert v1 == v2 and np.array_equal(g1, g2)


# ---------------------------------------------------------------- Adam


def test_adam_zero_gradient_keeps_params():
    p = [np.array([1.0, -2.0])]
    st_ = ad.AdamState.for_params(p, 0.1)
    out, st_ = ad.adam_step(p, [np.zeros(2)], st_)
    assert np.array_equal(out[0], p[0]) and st_.t == 1


def test_adam_first_step():
    p = [np.array(1.0)]
    out, _ = ad.adam_step(p, [np.array(1.0)], ad.AdamState.for_params(p, 0.1))
    assert out[0] == pytest.approx(1.0 - 0.1 / (1 + 1e-8), abs=1e-15)


def test_adam_defaults_and_determinism():
    s = ad.AdamState.for_params([np.zeros(1)])
    assert (s.beta1, s.beta2, s.eps) == (0.9, 0.999, 1e-8)
    rng = np.random.default_rng(0)
    grads = [[rng.normal(size=3)] for _ in range(5)]

    def run():
        p = [np.ones(3)]
        st_ = ad.AdamState.for_params(p, 0.01)
        for g in grads:
            p, st_ = ad.adam_step(p, g, st_)
        return p[0]

    assert np.array_equal(run(), run())


def test_adam_shape_mismatch():
    p = [np.zeros(2)]
    with pytest.raises(ShapeMismatch):
        ad.adam_step(p, [np.zeros(3)], ad.AdamState.for_params(p))


def test_adam_minimises_quadratic():
    p = [np.array([5.0, -3.0])]
    st_ = ad.AdamState.for_params(p, 0.1)
    for _ in range(500):
        p, st_ = ad.adam_step(p, [2 * p[0]], st_)
    assert np.all(np.abs(p[0]) < 1e-2)
