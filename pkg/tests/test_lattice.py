import hashlib
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentinel.lattice import (
    LatticeDigest,
    lt_add,
    lt_hash_block,
    lt_reduce,
    lt_reduce_pairwise,
    lt_sub,
    lt_zero,
)

from oracles import lat_add_scalar, lat_block, lat_sub_scalar, lat_sum

digest64 = st.binary(min_size=64, max_size=64).map(LatticeDigest)


def _rand(rng):
    return LatticeDigest(rng.randbytes(64))


def test_zero_is_identity():
    rng = random.Random(0)
    x = _rand(rng)
    assert lt_add(lt_zero(), x).data == x.data
    assert lt_sub(x, lt_zero()).data == x.data
    assert lt_zero().data == bytes(64)


def test_self_cancellation():
    x = _rand(random.Random(1))
    assert lt_sub(x, x).data == lt_zero().data


def test_wraparound_all_partitions():
    full = LatticeDigest(struct.pack("<32H", *([0xFFFF] * 32)))
    one = LatticeDigest(struct.pack("<32H", *([0x0001] * 32)))
    assert lt_add(full, one).data == bytes(64)
    half = LatticeDigest(struct.pack("<32H", *([0x8000] * 32)))
    assert lt_add(half, half).data == bytes(64)


def test_modular_borrow():
    one = LatticeDigest(struct.pack("<32H", *([0x0001] * 32)))
    assert lt_sub(lt_zero(), one).partitions() == tuple([0xFFFF] * 32)


@given(digest64, digest64)
@settings(max_examples=200)
def test_masked_add_matches_scalar_oracle(a, b):
    assert lt_add(a, b).data == lat_add_scalar(a.data, b.data)


@given(digest64, digest64)
@settings(max_examples=200)
def test_sub_matches_scalar_oracle(a, b):
    assert lt_sub(a, b).data == lat_sub_scalar(a.data, b.data)


@given(digest64, digest64)
@settings(max_examples=100)
def test_add_commutative(a, b):
    assert lt_add(a, b).data == lt_add(b, a).data


@given(digest64, digest64, digest64)
@settings(max_examples=100)
def test_add_associative(a, b, c):
    assert lt_add(lt_add(a, b), c).data == lt_add(a, lt_add(b, c)).data


@given(digest64, digest64)
@settings(max_examples=100)
def test_sub_inverts_add(a, b):
    assert lt_sub(lt_add(a, b), b).data == a.data
    assert lt_sub(lt_add(a, b), a).data == b.data


def test_masked_add_bulk_random():
    rng = random.Random(42)
    for _ in range(1000):
        a, b = rng.randbytes(64), rng.randbytes(64)
        assert lt_add(LatticeDigest(a), LatticeDigest(b)).data == lat_add_scalar(a, b)


def test_hash_block_is_tagged_blake2b():
    assert lt_hash_block(0, b"").data == hashlib.blake2b(bytes(8)).digest()
    assert lt_hash_block(5, b"xyz").data == lat_block(5, b"xyz")


def test_index_tag_separates_identical_data():
    rng = random.Random(9)
    for _ in range(100):
        data = rng.randbytes(rng.randint(0, 100))
        assert lt_hash_block(0, data).data != lt_hash_block(1, data).data


def test_reduce_empty_is_zero():
    assert lt_reduce([]).data == lt_zero().data
    assert lt_reduce_pairwise([]).data == lt_zero().data


def test_reduce_order_invariant():
    rng = random.Random(23)
    digests = [_rand(rng) for _ in range(97)]
    forward = lt_reduce(digests)
    assert lt_reduce(list(reversed(digests))).data == forward.data
    shuffled = digests[:]
    rng.shuffle(shuffled)
    assert lt_reduce(shuffled).data == forward.data


def test_reduce_matches_fold_and_tree():
    rng = random.Random(29)
    digests = [_rand(rng) for _ in range(97)]
    expected = lat_sum(d.data for d in digests)
    assert lt_reduce(digests).data == expected
    assert lt_reduce_pairwise(digests).data == expected


def test_set_homomorphism():
    rng = random.Random(31)
    for _ in range(50):
        s1 = [lt_hash_block(i, rng.randbytes(32)) for i in range(rng.randint(0, 20))]
        base = len(s1)
        s2 = [lt_hash_block(base + i, rng.randbytes(32)) for i in range(rng.randint(0, 20))]
        union = lt_reduce(s1 + s2)
        assert union.data == lt_add(lt_reduce(s1), lt_reduce(s2)).data
        # removal: subtracting one side's sum recovers the other
        assert lt_sub(union, lt_reduce(s1)).data == lt_reduce(s2).data


def test_member_removal():
    rng = random.Random(37)
    digests = [lt_hash_block(i, rng.randbytes(16)) for i in range(10)]
    whole = lt_reduce(digests)
    for i in range(10):
        without = lt_reduce(digests[:i] + digests[i + 1 :])
        assert lt_sub(whole, digests[i]).data == without.data


def test_hex_serialization_round_trip():
    d = _rand(random.Random(41))
    assert len(d.hex()) == 128
    assert LatticeDigest.from_hex(d.hex()).data == d.data


def test_digest_length_enforced():
    with pytest.raises(ValueError):
        LatticeDigest(bytes(63))
