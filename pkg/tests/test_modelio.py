"""Text model format: round trips, golden fixture, and parse errors."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from olbench.errors import FormatError, ShapeError
from olbench.frozen import (
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    FrozenModel,
    HeadSeed,
    MaxPool2x2,
    Relu,
    Softmax,
    forward,
)
from olbench.linalg import FLOAT
from olbench.modelio import (
    MAGIC,
    format_float,
    load_head_seed,
    load_model,
    save_head_seed,
    save_model,
)


def rand(shape, seed):
    return np.random.default_rng(seed).normal(size=shape).astype(FLOAT)


def build_conv_model():
    model = FrozenModel(
        layers=[
            Conv2d(rand((3, 3, 1, 4), 0), rand(4, 1), "same"),
            Relu(),
            MaxPool2x2(),
            Conv2d(rand((3, 3, 4, 6), 2), rand(6, 3), "valid"),
            Relu(),
            Flatten(),
            Dropout(0.25),
        ],
        input_shape=("image", 12, 12, 1),
    )
    head = HeadSeed(rand((3, model.feature_len), 4), rand(3, 5), ["0", "1", "2"])
    return model, head


def build_dense_model():
    model = FrozenModel(
        layers=[
            Dense(rand((16, 10), 6), rand(16, 7)),
            Relu(),
            Dense(rand((8, 16), 8), rand(8, 9)),
            Softmax(),
        ],
        input_shape=("flat", 10),
    )
    head = HeadSeed(rand((5, 8), 10), rand(5, 11), ["A", "E", "I", "O", "U"])
    return model, head


class TestFormatFloat:
    @given(st.floats(allow_nan=False, allow_infinity=False, width=32))
    @settings(max_examples=300, deadline=None)
    def test_round_trips_float32_exactly(self, x):
        v = np.float32(x)
        assert np.float32(format_float(v)) == v

    def test_compact_values(self):
        assert format_float(np.float32(0.5)) == "0.5"
        assert format_float(np.float32(1)) == "1"


@pytest.mark.parametrize("builder", [build_conv_model, build_dense_model])
class TestRoundTrip:
    def test_arrays_bit_exact(self, tmp_path, builder):
        model, head = builder()
        path = tmp_path / "model.txt"
        save_model(path, model, head)
        loaded, loaded_head = load_model(path)
        assert loaded.input_shape == model.input_shape
        assert loaded.feature_len == model.feature_len
        assert [l.kind for l in loaded.layers] == [l.kind for l in model.layers]
        for mine, theirs in zip(model.layers, loaded.layers):
            for attr in ("weights", "biases", "filters"):
                if hasattr(mine, attr):
                    np.testing.assert_array_equal(getattr(mine, attr), getattr(theirs, attr))
            if hasattr(mine, "padding"):
                assert mine.padding == theirs.padding
        np.testing.assert_array_equal(loaded_head.weights, head.weights)
        np.testing.assert_array_equal(loaded_head.biases, head.biases)
        assert loaded_head.labels == head.labels

    def test_resave_is_byte_identical(self, tmp_path, builder):
        model, head = builder()
        first = tmp_path / "a.txt"
        second = tmp_path / "b.txt"
        save_model(first, model, head)
        save_model(second, *load_model(first))
        assert first.read_bytes() == second.read_bytes()

    def test_forward_identical_after_reload(self, tmp_path, builder):
        model, head = builder()
        path = tmp_path / "model.txt"
        save_model(path, model, head)
        loaded, _ = load_model(path)
        raw = (
            rand((12, 12, 1), 70)
            if model.input_shape[0] == "image"
            else rand(model.input_shape[1], 70)
        )
        np.testing.assert_array_equal(forward(model, raw), forward(loaded, raw))


GOLDEN = """\
olmodel v1
# a tiny extractor with every simple layer kind
input flat 2

layer dense 2 2
1 0.5
-0.25 2
0.125 -1
layer relu
head 2 2 yes no
3 -4
0.5 0.75
1 -2
"""


class TestGoldenFixture:
    def test_parses_to_expected_arrays(self, tmp_path):
        path = tmp_path / "golden.txt"
        path.write_text(GOLDEN)
        model, head = load_model(path)
        assert model.input_shape == ("flat", 2)
        assert model.feature_len == 2
        dense = model.layers[0]
        np.testing.assert_array_equal(dense.weights, [[1.0, 0.5], [-0.25, 2.0]])
        np.testing.assert_array_equal(dense.biases, [0.125, -1.0])
        assert model.layers[1].kind == "relu"
        assert head.labels == ["yes", "no"]
        np.testing.assert_array_equal(head.weights, [[3.0, -4.0], [0.5, 0.75]])
        np.testing.assert_array_equal(head.biases, [1.0, -2.0])

    def test_forward_hand_value(self, tmp_path):
        path = tmp_path / "golden.txt"
        path.write_text(GOLDEN)
        model, _ = load_model(path)
        # dense: [1*2+0.5*2+0.125, -0.25*2+2*2-1] = [3.125, 2.5]; relu no-op
        np.testing.assert_array_equal(
            forward(model, np.array([2.0, 2.0], FLOAT)), [3.125, 2.5]
        )


class TestHeadCheckpoint:
    def test_round_trip(self, tmp_path):
        head = HeadSeed(rand((4, 6), 20), rand(4, 21), ["a", "b", "c", "d"])
        path = tmp_path / "head.txt"
        save_head_seed(path, head)
        loaded = load_head_seed(path)
        np.testing.assert_array_equal(loaded.weights, head.weights)
        np.testing.assert_array_equal(loaded.biases, head.biases)
        assert loaded.labels == head.labels

    def test_zero_layer_file_is_identity_extractor(self, tmp_path):
        head = HeadSeed(rand((2, 3), 22), rand(2, 23), ["x", "y"])
        path = tmp_path / "head.txt"
        save_head_seed(path, head)
        model, _ = load_model(path)
        assert model.feature_len == 3
        x = rand(3, 24)
        np.testing.assert_array_equal(forward(model, x), x)

    def test_whitespace_label_rejected_on_write(self, tmp_path):
        head = HeadSeed(rand((1, 2), 25), rand(1, 26), ["bad label"])
        with pytest.raises(ValueError, match="whitespace"):
            save_head_seed(tmp_path / "head.txt", head)


def _write(tmp_path, text):
    path = tmp_path / "model.txt"
    path.write_text(text)
    return path


class TestParseErrors:
    def test_bad_magic(self, tmp_path):
        path = _write(tmp_path, "olmodel v2\ninput flat 2\n")
        with pytest.raises(FormatError, match=r"model\.txt:1: .*header"):
            load_model(path)

    def test_bad_input_line(self, tmp_path):
        path = _write(tmp_path, f"{MAGIC}\ninput cube 2 2 2\n")
        with pytest.raises(FormatError, match=r"model\.txt:2"):
            load_model(path)

    def test_unknown_layer(self, tmp_path):
        path = _write(tmp_path, f"{MAGIC}\ninput flat 2\nlayer gru 4\n")
        with pytest.raises(FormatError, match="unknown layer kind 'gru'"):
            load_model(path)

    def test_wrong_value_count(self, tmp_path):
        path = _write(tmp_path, f"{MAGIC}\ninput flat 2\nlayer dense 1 2\n1.0\n")
        with pytest.raises(FormatError, match="expected 2 values, got 1"):
            load_model(path)

    def test_bad_float(self, tmp_path):
        path = _write(
            tmp_path, f"{MAGIC}\ninput flat 2\nlayer dense 1 2\n1.0 oops\n0\n"
        )
        with pytest.raises(FormatError, match=r"model\.txt:4: .*bad float"):
            load_model(path)

    def test_truncated_file(self, tmp_path):
        path = _write(tmp_path, f"{MAGIC}\ninput flat 2\nlayer dense 2 2\n1 2\n")
        with pytest.raises(FormatError, match="unexpected end of file"):
            load_model(path)

    def test_missing_head(self, tmp_path):
        path = _write(tmp_path, f"{MAGIC}\ninput flat 2\nlayer relu\n")
        with pytest.raises(FormatError, match="missing head block"):
            load_model(path)

    def test_head_label_count_mismatch(self, tmp_path):
        path = _write(tmp_path, f"{MAGIC}\ninput flat 2\nhead 2 2 only_one\n")
        with pytest.raises(FormatError, match="lists 1 labels"):
            load_model(path)

    def test_duplicate_head_labels(self, tmp_path):
        path = _write(
            tmp_path,
            f"{MAGIC}\ninput flat 2\nhead 2 2 same same\n1 2\n3 4\n0 0\n",
        )
        with pytest.raises(FormatError, match="not distinct"):
            load_model(path)

    def test_trailing_content_after_head(self, tmp_path):
        path = _write(
            tmp_path,
            f"{MAGIC}\ninput flat 1\nhead 1 1 a\n1\n0\nlayer relu\n",
        )
        with pytest.raises(FormatError, match="after head block"):
            load_model(path)

    def test_head_feature_len_mismatch(self, tmp_path):
        path = _write(
            tmp_path,
            f"{MAGIC}\ninput flat 3\nhead 1 2 a\n1 2\n0\n",
        )
        with pytest.raises(ShapeError, match="head expects 2 features"):
            load_model(path)

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = _write(
            tmp_path,
            f"# leading comment\n\n{MAGIC}\n\ninput flat 1  # inline\n"
            "head 1 1 a\n0.5\n0.25\n",
        )
        model, head = load_model(path)
        assert model.feature_len == 1
        assert head.labels == ["a"]
