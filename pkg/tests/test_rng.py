"""The PRNG stack is a wire format: these vectors pin it down."""

import math

from guidenav.rng import Xoshiro256pp, fnv1a_64, hash_text


def test_fnv1a_reference_vectors():
    # Published FNV-1a 64-bit test values.
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_xoshiro_reference_sequence():
    # Reference output sequence of xoshiro256++ for state (1, 2, 3, 4); the
    # first two terms are small enough to verify by hand from the update rule.
    rng = Xoshiro256pp(0)
    rng._s = [1, 2, 3, 4]
    assert [rng.next_u64() for _ in range(4)] == [
        41943041,
        58720359,
        3588806011781223,
        3591011842654386,
    ]


def test_seeding_is_deterministic_and_seed_sensitive():
    a = Xoshiro256pp(1234)
    b = Xoshiro256pp(1234)
    c = Xoshiro256pp(1235)
    seq_a = [a.next_u64() for _ in range(8)]
    seq_b = [b.next_u64() for _ in range(8)]
    seq_c = [c.next_u64() for _ in range(8)]
    assert seq_a == seq_b
    assert seq_a != seq_c


def test_uniform_range_and_moments():
    rng = Xoshiro256pp(hash_text("uniform-check"))
    values = [rng.uniform() for _ in range(20000)]
    assert all(0.0 <= v < 1.0 for v in values)
    mean = sum(values) / len(values)
    assert abs(mean - 0.5) < 0.01


def test_gaussian_moments():
    rng = Xoshiro256pp(hash_text("gaussian-check"))
    values = rng.gaussians(20000)
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    assert abs(mean) < 0.03
    assert abs(var - 1.0) < 0.05
    assert abs(math.sqrt(var) - 1.0) < 0.03
