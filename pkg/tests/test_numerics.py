import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqa_transfer.errors import ArgumentError, NumericError
from aqa_transfer.numerics import Rng, central_diff, gaussian_fill


class TestRng:
    def test_same_seed_same_stream(self):
        a = Rng(42)
        b = Rng(42)
        assert [a.next_u64() for _ in range(100)] == [
            b.next_u64() for _ in range(100)
        ]

    def test_different_seeds_differ(self):
        assert Rng(1).next_u64() != Rng(2).next_u64()

    def test_uniform_range(self):
        rng = Rng(7)
        draws = [rng.uniform() for _ in range(1000)]
        assert all(0.0 <= u < 1.0 for u in draws)

    def test_randbelow_bounds_and_coverage(self):
        rng = Rng(3)
        draws = [rng.randbelow(5) for _ in range(500)]
        assert set(draws) == {0, 1, 2, 3, 4}

    def test_randbelow_rejects_nonpositive(self):
        with pytest.raises(ArgumentError):
            Rng(0).randbelow(0)

    def test_shuffle_is_permutation_and_deterministic(self):
        items = list(range(20))
        a, b = items[:], items[:]
        Rng(9).shuffle(a)
        Rng(9).shuffle(b)
        assert a == b
        assert sorted(a) == items
        assert a != items

    def test_spawn_streams_are_distinct(self):
        parent = Rng(5)
        c1, c2 = parent.spawn(), parent.spawn()
        assert c1.next_u64() != c2.next_u64()


class TestGaussianFill:
    def test_zero_std_gives_zero_matrix(self):
        m = gaussian_fill((4, 7), 0.0, Rng(11))
        assert m.shape == (4, 7)
        assert np.all(m == 0.0)

    def test_sample_moments(self):
        # std=0.1, 10^4 draws: mean within +-0.01, std within [0.09, 0.11]
        m = gaussian_fill((100, 100), 0.1, Rng(1))
        assert abs(m.mean()) < 0.01
        assert 0.09 < m.std() < 0.11

    def test_bit_identical_for_same_inputs(self):
        a = gaussian_fill((13, 5), 0.7, Rng(21))
        b = gaussian_fill((13, 5), 0.7, Rng(21))
        assert a.tobytes() == b.tobytes()

    def test_negative_std_rejected(self):
        with pytest.raises(ArgumentError):
            gaussian_fill((2, 2), -0.1, Rng(0))


class TestCentralDiff:
    def test_quadratic_is_exact(self):
        assert central_diff(lambda x: x * x, 3.0, 1e-5) == pytest.approx(
            6.0, abs=1e-6
        )

    def test_constant_is_zero(self):
        assert central_diff(lambda x: 4.25, 1.0, 1e-5) == 0.0

    def test_sine_at_zero(self):
        assert central_diff(math.sin, 0.0, 1e-5) == pytest.approx(
            1.0, abs=1e-9
        )

    def test_rejects_bad_h(self):
        with pytest.raises(ArgumentError):
            central_diff(math.sin, 0.0, 0.0)

    def test_nonfinite_output_raises(self):
        with pytest.raises(NumericError):
            central_diff(lambda x: float("nan"), 0.0, 1e-5)

    @given(
        a=st.floats(-5, 5),
        b=st.floats(-5, 5),
        c=st.floats(-5, 5),
        x=st.floats(-3, 3),
    )
    @settings(max_examples=50)
    def test_degree_two_polynomials_exact(self, a, b, c, x):
        deriv = central_diff(lambda t: a * t * t + b * t + c, x, 1e-4)
        expected = 2 * a * x + b
        assert deriv == pytest.approx(expected, abs=1e-6 + 1e-8 * abs(expected))


def test_matmul_associativity():
    rng = Rng(17)
    for _ in range(5):
        a = rng.normal_block(12).reshape(3, 4)
        b = rng.normal_block(20).reshape(4, 5)
        c = rng.normal_block(10).reshape(5, 2)
        left = (a @ b) @ c
        right = a @ (b @ c)
        assert np.allclose(left, right, rtol=1e-9)
