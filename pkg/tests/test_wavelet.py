import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from coad.errors import ShapeError
from coad.wavelet import WaveletComponents, dwt2_haar, idwt2_haar


def blockwise_oracle(x):
    """Per-block loop over the 2x2 formulas, no vectorisation."""
    h, w = x.shape
    out = np.zeros((4, h // 2, w // 2))
    for i in range(h // 2):
        for j in range(w // 2):
            a, b = x[2 * i, 2 * j], x[2 * i, 2 * j + 1]
            c, d = x[2 * i + 1, 2 * j], x[2 * i + 1, 2 * j + 1]
            out[:, i, j] = [(a + b + c + d) / 2, (a - b + c - d) / 2, (a + b - c - d) / 2, (a - b - c + d) / 2]
    return out


even_channels = st.tuples(st.integers(1, 8), st.integers(1, 8)).flatmap(
    lambda hw: arrays(
        np.float64,
        (2 * hw[0], 2 * hw[1]),
        elements=st.floats(0, 1, allow_nan=False, allow_infinity=False),
    )
)


def test_constant_block_has_no_detail():
    comps = dwt2_haar(np.ones((2, 2)))
    assert comps.LL.tolist() == [[2.0]]
    for band in (comps.HL, comps.LH, comps.HH):
        assert band.tolist() == [[0.0]]


def test_single_corner_pixel():
    comps = dwt2_haar(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert [c.tolist() for c in comps] == [[[0.5]]] * 4


def test_224_shape_contract():
    comps = dwt2_haar(np.random.default_rng(0).random((224, 224)))
    assert all(c.shape == (112, 112) for c in comps)


def test_inverse_of_constant():
    z = np.zeros((1, 1))
    out = idwt2_haar(WaveletComponents(np.array([[2.0]]), z, z, z))
    assert out.tolist() == [[1.0, 1.0], [1.0, 1.0]]


def test_zero_components_give_zero_image():
    z = np.zeros((3, 5))
    assert not idwt2_haar((z, z, z, z)).any()


def test_round_trip_8x8():
    x = np.random.default_rng(1).random((8, 8))
    assert np.abs(idwt2_haar(dwt2_haar(x)) - x).max() < 1e-6


@pytest.mark.parametrize("shape", [(3, 4), (4, 5), (1, 2), (0, 2)])
def test_odd_or_empty_dims_rejected(shape):
    with pytest.raises(ShapeError):
        dwt2_haar(np.zeros(shape))


def test_mismatched_subbands_rejected():
    with pytest.raises(ShapeError):
        idwt2_haar((np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2))))


def test_torch_and_numpy_agree_with_batch_dims():
    x = torch.rand(2, 3, 6, 10, dtype=torch.float64)
    t = dwt2_haar(x)
    n = dwt2_haar(x.numpy())
    for a, b in zip(t, n):
        np.testing.assert_allclose(a.numpy(), b, atol=1e-12)
    np.testing.assert_allclose(idwt2_haar(t).numpy(), x.numpy(), atol=1e-12)


def test_torch_inverse_is_differentiable():
    comps = [torch.rand(4, 4, requires_grad=True) for _ in range(4)]
    idwt2_haar(comps).pow(2).sum().backward()
    assert all(c.grad is not None for c in comps)


@settings(max_examples=60, deadline=None)
@given(even_channels)
def test_matches_blockwise_oracle(x):
    np.testing.assert_allclose(np.stack(dwt2_haar(x)), blockwise_oracle(x), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(even_channels)
def test_round_trip_property(x):
    assert np.abs(idwt2_haar(dwt2_haar(x)) - x).max() < 1e-5


@settings(max_examples=60, deadline=None)
@given(even_channels, st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(x, alpha, beta):
    y = np.flip(x)
    lhs = dwt2_haar(alpha * x + beta * y)
    rhs = [alpha * p + beta * q for p, q in zip(dwt2_haar(x), dwt2_haar(y))]
    for l, r in zip(lhs, rhs):
        np.testing.assert_allclose(l, r, atol=1e-5)


@settings(max_examples=60, deadline=None)
@given(even_channels)
def test_energy_preserved(x):
    energy = sum(float((c**2).sum()) for c in dwt2_haar(x))
    assert energy == pytest.approx(float((x**2).sum()), rel=1e-5, abs=1e-12)
