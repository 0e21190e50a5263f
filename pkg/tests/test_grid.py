import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import pairwise_sum
from osmosis.grid import LabelMap, MultiChannelImage, ScalarField, shift_to_positive, total_mass, unshift


def test_total_mass_trivial():
    assert total_mass(ScalarField(np.ones((2, 2)))) == 4.0
    assert total_mass(ScalarField([[1.0, 2.0], [3.0, 4.0]])) == 10.0


def test_total_mass_matches_pairwise_oracle(rng):
    f = ScalarField(rng.uniform(0.1, 10, (64, 64)))
    ref = pairwise_sum(f.values)
    assert abs(total_mass(f) - ref) <= 1e-14 * ref


def test_shift_examples():
    f = ScalarField([[0.0, 255.0], [0.0, 0.0]])
    assert shift_to_positive(f, 1.0).values.tolist() == [[1.0, 256.0], [1.0, 1.0]]
    assert np.all(shift_to_positive(ScalarField(np.zeros((3, 3))), 1).values == 1)


def test_shift_rejects_bad_offset():
    with pytest.raises(ValueError):
        shift_to_positive(ScalarField(np.ones((2, 2))), 0.0)


def test_scalar_field_validation():
    with pytest.raises(ValueError):
        ScalarField(np.ones((1, 5)))
    with pytest.raises(ValueError):
        ScalarField([[1.0, np.nan], [1.0, 1.0]])
    f = ScalarField(np.ones((2, 3)))
    assert (f.width, f.height) == (3, 2)
    with pytest.raises(ValueError):
        f.values[0, 0] = 5.0


def test_multichannel_and_labels():
    img = MultiChannelImage.from_array(np.ones((4, 5, 3)))
    assert img.tag == "RGB" and len(img) == 3 and img.to_array().shape == (4, 5, 3)
    with pytest.raises(ValueError):
        MultiChannelImage.from_array(np.ones((4, 5, 5)))
    assert LabelMap(np.array([[0, 1], [1, 0]])).is_binary()
    assert not LabelMap(np.array([[0, 2], [1, 0]])).is_binary()
    with pytest.raises(ValueError):
        LabelMap(np.array([[0, -1], [1, 0]]))


fields = arrays(np.float64, (6, 7), elements=st.floats(-1e3, 1e3))


@settings(max_examples=50, deadline=None)
@given(fields, fields, st.floats(-10, 10), st.floats(-10, 10))
def test_total_mass_is_linear(x, y, a, b):
    lhs = total_mass(ScalarField(a * x + b * y))
    rhs = a * total_mass(ScalarField(x)) + b * total_mass(ScalarField(y))
    scale = abs(a) * np.abs(x).sum() + abs(b) * np.abs(y).sum() + 1e-300
    assert abs(lhs - rhs) <= 1e-12 * scale


@settings(max_examples=50, deadline=None)
@given(fields, st.floats(1e-3, 1e3))
def test_shift_round_trip(x, offset):
    f = ScalarField(x)
    back = unshift(shift_to_positive(f, offset), offset)
    assert np.abs(back.values - x).max() <= 1e-12 * max(1.0, np.abs(x).max())
