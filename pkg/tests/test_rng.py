import numpy as np

from afen.rng import RandomStream, hash_key, mix64


def test_same_seed_same_draws():
    a = RandomStream(42).uniform(1000)
    b = RandomStream(42).uniform(1000)
    np.testing.assert_array_equal(a, b)


def test_different_seeds_differ():
    a = RandomStream(1).uniform(100)
    b = RandomStream(2).uniform(100)
    assert np.any(a != b)


def test_chunking_is_irrelevant():
    s1 = RandomStream(9)
    s2 = RandomStream(9)
    whole = s1.uniform(100)
    parts = np.concatenate([s2.uniform(37), s2.uniform(63)])
    np.testing.assert_array_equal(whole, parts)


def test_substreams_ignore_creation_order():
    root = RandomStream(5)
    root.uniform(17)  # consume some state first
    a = root.substream("clip-a").normal(50)
    b = RandomStream(5).substream("clip-a").normal(50)
    np.testing.assert_array_equal(a, b)


def test_substreams_are_distinct():
    root = RandomStream(5)
    assert np.any(root.substream("x").uniform(64) != root.substream("y").uniform(64))


def test_uniform_range_and_mean():
    u = RandomStream(0).uniform(200000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 5e-3


def test_normal_moments():
    z = RandomStream(3).normal(200000)
    assert abs(z.mean()) < 1e-2
    assert abs(z.std() - 1.0) < 1e-2


def test_integers_bounds():
    v = RandomStream(8).integers(10000, 3, 9)
    assert v.min() >= 3 and v.max() <= 8
    assert set(np.unique(v)) == set(range(3, 9))


def test_permutation_is_permutation():
    p = RandomStream(11).permutation(500)
    assert sorted(p.tolist()) == list(range(500))


def test_mix64_scrambles_consecutive():
    vals = mix64(np.arange(1, 100, dtype=np.uint64))
    assert len(np.unique(vals)) == 99


def test_hash_key_stable():
    assert hash_key("abc") == hash_key("abc")
    assert hash_key("abc") != hash_key("abd")
