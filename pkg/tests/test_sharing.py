import itertools
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from bridgedist.field import P61, poly_eval
from bridgedist.sharing import (
    ReconstructFailure,
    Share,
    SharingPolicy,
    decode_address,
    encode_address,
    reconstruct,
    share,
)


class FixedRng:
    def __init__(self, *values):
        self.values = list(values)

    def randrange(self, p):
        return self.values.pop(0)


def corrupt(shares, positions, rnd, p=P61):
    out = list(shares)
    for k in positions:
        s = out[k]
        out[k] = Share(s.index, (s.value + rnd.randrange(1, p)) % p, s.secret_id)
    return out


class TestPolicy:
    def test_default_tau(self):
        assert SharingPolicy(10).tau == 3
        assert SharingPolicy(4).tau == 1

    def test_invalid(self):
        for m, tau in [(0, None), (3, 3), (3, -1)]:
            with pytest.raises(ValueError):
                SharingPolicy(m, tau)

    def test_indices_must_fit_field(self):
        with pytest.raises(ValueError):
            SharingPolicy(7, 2, p=7)

    def test_share_index_zero_rejected(self):
        with pytest.raises(ValueError):
            Share(0, 1)


class TestShare:
    def test_tau_zero_copies_secret(self):
        shares = share(42, SharingPolicy(5, 0), random.Random(0))
        assert [s.value for s in shares] == [42] * 5

    def test_small_field_example(self):
        shares = share(5, SharingPolicy(3, 1, p=7), FixedRng(2))
        assert [(s.index, s.value) for s in shares] == [(1, 0), (2, 2), (3, 4)]

    def test_secret_id_carried(self):
        assert {s.secret_id for s in share(1, SharingPolicy(4), random.Random(0), 9)} == {9}

    def test_two_shares_reveal_nothing_exhaustive(self):
        # For every secret the pair (f(i), f(j)) ranges over the whole plane
        # exactly once as the two random coefficients vary.
        p, i, j = 11, 2, 7
        for secret in range(p):
            seen = Counter(
                (poly_eval([secret, a, b], i, p), poly_eval([secret, a, b], j, p))
                for a, b in itertools.product(range(p), repeat=2)
            )
            assert len(seen) == p * p and set(seen.values()) == {1}

    def test_two_shares_uniform_chi_square(self):
        p = 11
        pol = SharingPolicy(10, 2, p=p)
        rnd = random.Random(5)
        for secret in (0, 3, 10):
            cells = Counter()
            for _ in range(10_000):
                sh = share(secret, pol, rnd)
                cells[(sh[1].value, sh[6].value)] += 1
            obs = [cells[(a, b)] for a in range(p) for b in range(p)]
            assert chisquare(obs).pvalue > 0.001


class TestReconstruct:
    def test_all_honest(self):
        pol = SharingPolicy(10)
        assert reconstruct(share(5, pol, random.Random(1)), pol) == 5

    def test_three_wrong_of_ten(self):
        pol = SharingPolicy(10, 3)
        rnd = random.Random(2)
        shares = corrupt(share(987654321, pol, rnd), [0, 4, 9], rnd)
        assert reconstruct(shares, pol) == 987654321

    def test_four_wrong_is_never_silently_accepted(self):
        pol = SharingPolicy(10, 3)
        rnd = random.Random(3)
        for _ in range(30):
            secret = rnd.randrange(P61)
            shares = corrupt(share(secret, pol, rnd), rnd.sample(range(10), 4), rnd)
            try:
                got = reconstruct(shares, pol)
            except ReconstructFailure:
                continue
            assert got == secret

    def test_every_pattern_up_to_three(self):
        pol = SharingPolicy(10, 3)
        rnd = random.Random(4)
        secret = rnd.randrange(P61)
        clean = share(secret, pol, rnd)
        for c in range(4):
            for where in itertools.combinations(range(10), c):
                assert reconstruct(corrupt(clean, where, rnd), pol) == secret

    def test_missing_shares_still_decode(self):
        pol = SharingPolicy(10, 3)
        shares = share(77, pol, random.Random(6))
        assert reconstruct(shares[3:], pol) == 77

    def test_too_few(self):
        pol = SharingPolicy(10, 3)
        with pytest.raises(ReconstructFailure):
            reconstruct(share(1, pol, random.Random(0))[:3], pol)

    def test_duplicate_indices(self):
        pol = SharingPolicy(4, 1)
        sh = share(1, pol, random.Random(0))
        with pytest.raises(ReconstructFailure):
            reconstruct(sh + [sh[0]], pol)

    @pytest.mark.parametrize("p", [7, 11])
    def test_round_trip_exhaustive_small_field(self, p):
        pol = SharingPolicy(5, 1, p=p)
        rnd = random.Random(p)
        for s in range(p):
            assert reconstruct(share(s, pol, rnd), pol) == s

    @settings(max_examples=50)
    @given(st.integers(0, P61 - 1), st.integers(4, 13), st.randoms(use_true_random=False))
    def test_round_trip_with_fault_bound_errors(self, secret, m, rnd):
        pol = SharingPolicy(m)
        shares = corrupt(share(secret, pol, rnd), rnd.sample(range(m), pol.faults), rnd)
        assert reconstruct(shares, pol) == secret


class TestAddresses:
    def test_round_trip(self):
        v = encode_address("192.0.2.7", 443)
        assert v < 1 << 48 < P61
        assert decode_address(v) == ("192.0.2.7", 443)

    def test_layout(self):
        assert encode_address("0.0.0.1", 2) == (1 << 16) + 2

    def test_bad_port(self):
        with pytest.raises(ValueError):
            encode_address("1.2.3.4", 70000)

    @given(st.integers(0, (1 << 32) - 1), st.integers(0, (1 << 16) - 1))
    def test_property(self, ip, port):
        import ipaddress

        text = str(ipaddress.IPv4Address(ip))
        assert decode_address(encode_address(text, port)) == (text, port)
