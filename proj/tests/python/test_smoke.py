import math
from fractions import Fraction

import pytest

import collapse_lab as cl


def test_version():
    assert cl.__version__ == "0.1.0"


def test_rng_streams_reproducible():
    a = cl.RngStream(42, 7)
    b = cl.RngStream(42, 7)
    assert [a.next_u64() for _ in range(8)] == [b.next_u64() for _ in range(8)]
    c = cl.RngStream(42, 8)
    assert a.next_u64() != c.next_u64()
    u = cl.RngStream(1, 0).uniform()
    assert 0.0 <= u < 1.0


def test_win_probability_is_initial_fraction():
    assert cl.win_probability(0.3, 0.01) == pytest.approx(0.3, abs=1e-15)
    assert cl.win_probability(0.5, 0.1) == pytest.approx(0.5, abs=1e-15)
    assert cl.win_probability_exact(3, 10) == ("3", "10")
    assert cl.win_probability_fraction(2500, 10000) == Fraction(1, 4)


def test_expected_duration_closed_form():
    # k (K - k) tosses from k of K quanta at unit stakes
    assert cl.expected_duration(30, 100) == pytest.approx(30 * 70, abs=1e-9)


def test_spin_quadrature_half_angle_law():
    for theta in (0.3, 1.0, math.pi / 2, 2.2):
        expected = math.cos(theta / 2.0) ** 2
        assert cl.spin_up_probability(theta) == pytest.approx(expected, abs=1e-6)
    up = cl.spin_up_probability(1.1)
    down = cl.spin_up_probability(math.pi - 1.1)  # flipped axis, same polar line
    assert up + down == pytest.approx(1.0, abs=1e-9)


def test_spin_sampling_matches_quadrature():
    theta = 0.9
    n = 40000
    freq = cl.spin_up_frequency(theta, n_draws=n, seed=11)
    p = cl.spin_up_probability(theta)
    se = math.sqrt(p * (1.0 - p) / n)
    assert abs(freq - p) < 5.0 * se


def test_offdiagonal_magnitude_decay():
    # lambda t (a1 - a2)^2 = 2 puts the off-diagonal at 1/e of its start
    start = math.sqrt(0.3 * 0.7)
    val = cl.offdiagonal_magnitude(0.3, lam=1.0, t=2.0)
    assert val == pytest.approx(start * math.exp(-1.0), abs=1e-12)


def test_born_frequency_small_ensemble():
    freq, decided = cl.born_frequency(0.3, n_traj=400, seed=5)
    assert decided > 390
    assert abs(freq - 0.3) < 0.12  # ~5 binomial stderr at n = 400
