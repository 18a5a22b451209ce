"""The compiled core and the numpy fallback must implement the same math.

Every kernel is compared across backends on random inputs; agreement is
numerical (1e-12 relative), not bit-exact, since summation order differs.
"""

import numpy as np
import pytest

from rankforge.backend import pykernels

kernels = pytest.importorskip(
    "rankforge.backend._kernels", reason="compiled kernel core not built"
)


def _close(a, b):
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.fixture(params=range(5))
def case(request):
    rng = np.random.default_rng(request.param)
    b, din, dout = rng.integers(1, 9), rng.integers(1, 40), rng.integers(1, 30)
    return {
        "x": rng.normal(size=(b, din)),
        "w": rng.normal(size=(dout, din)),
        "b": rng.normal(size=dout),
        "dy": rng.normal(size=(b, dout)),
        "scores": rng.normal(size=b + 2),
        "ranks": rng.permutation(b + 2) + 1,
        "rng": rng,
    }


def test_linear_forward_matches(case):
    _close(
        kernels.linear_forward(case["x"], case["w"], case["b"]),
        pykernels.linear_forward(case["x"], case["w"], case["b"]),
    )


def test_linear_backward_matches(case):
    got = kernels.linear_backward(case["x"], case["w"], case["dy"])
    want = pykernels.linear_backward(case["x"], case["w"], case["dy"])
    for g, w in zip(got, want):
        _close(g, w)


def test_relu_matches(case):
    a = case["rng"].normal(size=(6, 7))
    dh = case["rng"].normal(size=(6, 7))
    _close(kernels.relu_forward(a), pykernels.relu_forward(a))
    _close(kernels.relu_backward(dh, a), pykernels.relu_backward(dh, a))


def test_sigmoid_matches(case):
    a = case["rng"].uniform(-600, 600, size=64)
    _close(kernels.sigmoid(a), pykernels.sigmoid(a))


def test_bce_logits_matches(case):
    l = case["rng"].normal(size=(5, 4)) * 10
    t = (case["rng"].random(size=(5, 4)) < 0.5).astype(float)
    loss_c, dl_c = kernels.bce_logits(l, t)
    loss_p, dl_p = pykernels.bce_logits(l, t)
    _close(loss_c, loss_p)
    _close(dl_c, dl_p)


def test_pairwise_logistic_matches(case):
    loss_c, d_c = kernels.pairwise_logistic(case["scores"], case["ranks"])
    loss_p, d_p = pykernels.pairwise_logistic(case["scores"], case["ranks"])
    _close(loss_c, loss_p)
    _close(d_c, d_p)


def test_pairwise_hinge_matches(case):
    for margin in (0.5, 1.0):
        loss_c, d_c = kernels.pairwise_hinge(case["scores"], case["ranks"], margin)
        loss_p, d_p = pykernels.pairwise_hinge(case["scores"], case["ranks"], margin)
        _close(loss_c, loss_p)
        _close(d_c, d_p)


def test_pairwise_kernels_on_tied_ranks():
    scores = np.array([0.3, -0.2, 0.9, 0.1])
    ranks = np.array([2, 1, 2, 3])
    loss_c, d_c = kernels.pairwise_logistic(scores, ranks)
    loss_p, d_p = pykernels.pairwise_logistic(scores, ranks)
    _close(loss_c, loss_p)
    _close(d_c, d_p)


def test_singleton_batches_are_zero():
    for mod in (kernels, pykernels):
        loss, d = mod.pairwise_logistic(np.array([1.0]), np.array([1]))
        assert loss == 0.0 and d.shape == (1,)
        loss, d = mod.pairwise_hinge(np.array([1.0]), np.array([1]), 1.0)
        assert loss == 0.0 and d.shape == (1,)
