"""Frozen feature extractor: layer shapes and the forward pass."""

import numpy as np
import pytest

from olbench.errors import ShapeError
from olbench.frozen import (
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    FrozenModel,
    MaxPool2x2,
    Relu,
    Softmax,
    conv2d_forward,
    forward,
    layer_output_shape,
    maxpool2x2,
)
from olbench.linalg import FLOAT, mat_vec_affine, softmax
from oracles import conv2d_loops


def rand(shape, seed):
    return np.random.default_rng(seed).normal(size=shape).astype(FLOAT)


def dense_stack(m_in=600, hidden=128, seed=0):
    """Gesture-style extractor: m_in -> hidden -> hidden, relu between."""
    return FrozenModel(
        layers=[
            Dense(rand((hidden, m_in), seed), rand(hidden, seed + 1)),
            Relu(),
            Dense(rand((hidden, hidden), seed + 2), rand(hidden, seed + 3)),
            Relu(),
        ],
        input_shape=("flat", m_in),
    )


def conv_stack(side, seed=0):
    """Digit-style extractor: two same-padded 3x3 conv + pool blocks."""
    return FrozenModel(
        layers=[
            Conv2d(rand((3, 3, 1, 4), seed), rand(4, seed + 1), "same"),
            Relu(),
            MaxPool2x2(),
            Conv2d(rand((3, 3, 4, 8), seed + 2), rand(8, seed + 3), "same"),
            Relu(),
            MaxPool2x2(),
            Flatten(),
        ],
        input_shape=("image", side, side, 1),
    )


class TestConv2d:
    @pytest.mark.parametrize("padding", ["valid", "same"])
    def test_matches_loop_oracle(self, padding):
        x = rand((4, 4, 2), 5)
        f = rand((3, 3, 2, 3), 6)
        b = rand(3, 7)
        got = conv2d_forward(x, f, b, padding)
        want = conv2d_loops(x, f, b, padding)
        assert got.shape == want.shape
        np.testing.assert_allclose(got.astype(np.float64), want, atol=1e-6)

    def test_same_preserves_plane(self):
        out = conv2d_forward(rand((5, 7, 1), 1), rand((3, 3, 1, 2), 2), rand(2, 3), "same")
        assert out.shape == (5, 7, 2)

    def test_valid_shrinks(self):
        out = conv2d_forward(rand((5, 7, 1), 1), rand((3, 3, 1, 2), 2), rand(2, 3), "valid")
        assert out.shape == (3, 5, 2)

    def test_kernel_too_large(self):
        with pytest.raises(ShapeError, match="larger than"):
            conv2d_forward(rand((2, 2, 1), 1), rand((3, 3, 1, 1), 2), rand(1, 3), "valid")

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError, match="channels"):
            conv2d_forward(rand((4, 4, 2), 1), rand((3, 3, 1, 1), 2), rand(1, 3), "same")


class TestMaxPool:
    def test_hand_case(self):
        x = np.array(
            [[1, 2, 5, 3], [4, 0, 1, 1], [7, 2, 9, 0], [0, 1, 2, 8]], dtype=FLOAT
        )[:, :, None]
        out = maxpool2x2(x)
        np.testing.assert_array_equal(out[:, :, 0], [[4, 5], [7, 9]])

    def test_odd_trailing_dropped(self):
        x = np.arange(5 * 5, dtype=FLOAT).reshape(5, 5)[:, :, None]
        assert maxpool2x2(x).shape == (2, 2, 1)

    def test_too_small(self):
        with pytest.raises(ShapeError):
            maxpool2x2(np.ones((1, 4, 1), FLOAT))


class TestShapes:
    def test_dense_chain_feature_len(self):
        assert dense_stack().feature_len == 128

    def test_conv_chain_feature_len_32(self):
        # Two pool halvings: 32 -> 16 -> 8; flatten 8*8*8.
        assert conv_stack(32).feature_len == 512

    def test_conv_chain_feature_len_28(self):
        # 28 -> 14 -> 7; flatten 7*7*8.
        assert conv_stack(28).feature_len == 392

    def test_bad_chain_names_layer_index(self):
        with pytest.raises(ShapeError, match=r"layer 1 \(dense\)"):
            FrozenModel(
                layers=[
                    Dense(rand((8, 4), 0), rand(8, 1)),
                    Dense(rand((3, 9), 2), rand(3, 3)),
                ],
                input_shape=("flat", 4),
            )

    def test_model_must_end_flat(self):
        with pytest.raises(ShapeError, match="flat feature vector"):
            FrozenModel(
                layers=[Conv2d(rand((3, 3, 1, 2), 0), rand(2, 1), "same")],
                input_shape=("image", 8, 8, 1),
            )

    def test_dense_on_image_rejected(self):
        with pytest.raises(ShapeError, match="flat input"):
            layer_output_shape(Dense(rand((2, 4), 0), rand(2, 1)), ("image", 4, 4, 1))

    def test_flatten_shape(self):
        assert layer_output_shape(Flatten(), ("image", 3, 5, 2)) == ("flat", 30)

    def test_relu_dropout_passthrough_shape(self):
        for layer in (Relu(), Dropout(0.5)):
            assert layer_output_shape(layer, ("flat", 9)) == ("flat", 9)

    def test_dropout_rate_validated(self):
        with pytest.raises(ValueError):
            Dropout(1.0)


class TestForward:
    def test_dense_is_affine_composition(self):
        model = FrozenModel(
            layers=[Dense(rand((3, 5), 8), rand(3, 9))],
            input_shape=("flat", 5),
        )
        x = rand(5, 10)
        np.testing.assert_array_equal(
            forward(model, x),
            mat_vec_affine(model.layers[0].weights, x, model.layers[0].biases),
        )

    def test_relu_clamps(self):
        model = FrozenModel(layers=[Relu()], input_shape=("flat", 4))
        out = forward(model, np.array([-1.0, 0.0, 2.0, -0.5], FLOAT))
        np.testing.assert_array_equal(out, [0.0, 0.0, 2.0, 0.0])

    def test_softmax_layer(self):
        model = FrozenModel(layers=[Softmax()], input_shape=("flat", 3))
        x = rand(3, 11)
        np.testing.assert_array_equal(forward(model, x), softmax(x))

    def test_dropout_is_identity_at_inference(self):
        model = FrozenModel(layers=[Dropout(0.9)], input_shape=("flat", 6))
        x = rand(6, 12)
        np.testing.assert_array_equal(forward(model, x), x)

    def test_conv_model_equals_primitive_composition(self):
        model = conv_stack(12, seed=20)
        img = rand((12, 12, 1), 21)
        x = conv2d_forward(img, model.layers[0].filters, model.layers[0].biases, "same")
        x = np.maximum(x, np.float32(0.0))
        x = maxpool2x2(x)
        x = conv2d_forward(x, model.layers[3].filters, model.layers[3].biases, "same")
        x = np.maximum(x, np.float32(0.0))
        x = maxpool2x2(x)
        np.testing.assert_array_equal(forward(model, img), x.reshape(-1))

    def test_output_length_matches_feature_len(self):
        model = conv_stack(16, seed=30)
        out = forward(model, rand((16, 16, 1), 31))
        assert out.shape == (model.feature_len,) and out.dtype == FLOAT

    def test_grayscale_plane_coerced_to_single_channel(self):
        model = conv_stack(8, seed=40)
        plane = rand((8, 8), 41)
        np.testing.assert_array_equal(forward(model, plane), forward(model, plane[:, :, None]))

    def test_flat_input_length_checked(self):
        model = dense_stack(m_in=10)
        with pytest.raises(ShapeError, match="input length"):
            forward(model, rand(9, 50))

    def test_image_shape_checked(self):
        model = conv_stack(8)
        with pytest.raises(ShapeError, match="input shape"):
            forward(model, rand((9, 8, 1), 51))

    def test_deterministic(self):
        model = conv_stack(10, seed=60)
        img = rand((10, 10, 1), 61)
        np.testing.assert_array_equal(forward(model, img), forward(model, img))
