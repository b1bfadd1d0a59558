import pytest

from anonspread.randomness import RandomSource, as_probability, mix_seed


def test_mix_seed_deterministic():
    assert mix_seed(42, 1, 2) == mix_seed(42, 1, 2)
    assert mix_seed(42, 1, 2) != mix_seed(42, 2, 1)
    assert mix_seed(42) != mix_seed(43)
    assert 0 <= mix_seed(2**100, -5) < 2**64


def test_random_source_repeatable():
    a = RandomSource(7)
    b = RandomSource(7)
    assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]
    assert a.choice([10, 20, 30]) == b.choice([10, 20, 30])


def test_spawn_is_keyed_not_sequential():
    r = RandomSource(7)
    # spawning never consumes parent state, and keys matter
    s1 = r.spawn(1)
    _ = r.random()
    s1_again = RandomSource(7).spawn(1)
    assert s1.random() == s1_again.random()
    assert RandomSource(7).spawn(1).random() != RandomSource(7).spawn(2).random()


def test_subset_sorted_and_bounded():
    r = RandomSource(3)
    out = r.subset([5, 1, 9, 4], 2)
    assert out == sorted(out) and len(out) == 2
    assert set(out) <= {5, 1, 9, 4}
    assert r.subset([3, 1], 5) == [3, 1]  # k past the population is everything


def test_bernoulli_edge_probabilities():
    r = RandomSource(0)
    assert all(r.bernoulli(1.0) for _ in range(100))
    assert not any(r.bernoulli(0.0) for _ in range(100))


def test_as_probability():
    from fractions import Fraction

    assert as_probability(Fraction(1, 4)) == 0.25
    assert as_probability(0.5) == 0.5
