"""Shamir secret sharing of bridge addresses with error-correcting recovery."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .field import (
    P61,
    DecodeFailure,
    DuplicateX,
    berlekamp_welch_decode,
    interpolate_at,
    lagrange_interpolate,
    poly_eval,
    unique_radius,
)


class ReconstructFailure(Exception):
    pass


@dataclass(frozen=True)
class Share:
    index: int
    value: int
    secret_id: int | None = None

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("share index must be >= 1; x=0 holds the secret")


@dataclass(frozen=True)
class SharingPolicy:
    """``m`` distributors, privacy threshold ``tau`` (defaults to ``m // 3``)."""

    m: int
    tau: int | None = None
    p: int = P61

    def __post_init__(self):
        if self.tau is None:
            object.__setattr__(self, "tau", self.m // 3)
        if self.m < 1 or not 0 <= self.tau < self.m:
            raise ValueError(f"invalid sharing policy m={self.m}, tau={self.tau}")
        if self.m >= self.p:
            raise ValueError("need m < p so share indices are distinct field points")

    @property
    def faults(self) -> int:
        """Wrong shares always survivable with all ``m`` collected at the default tau.

        That is ``(m - 1) // 3``: with ``m`` a multiple of 3, ``m // 3`` bad
        shares on top of ``tau = m // 3`` exceed the decoding radius.
        """
        return (self.m - 1) // 3


def share(secret: int, policy: SharingPolicy, rng, secret_id: int | None = None) -> list[Share]:
    """Split ``secret`` into ``policy.m`` shares on a random degree-tau polynomial.

    ``rng`` only needs a ``randrange`` method (``random.Random`` works).
    """
    p = policy.p
    coeffs = [secret % p] + [rng.randrange(p) for _ in range(policy.tau)]
    return [Share(j, poly_eval(coeffs, j, p), secret_id) for j in range(1, policy.m + 1)]


@lru_cache(maxsize=1 << 16)
def _decode_secret(points: tuple[tuple[int, int], ...], tau: int, eps: int, p: int) -> int:
    head = points[: tau + 1]
    guess = interpolate_at(head, 0, p)
    if len(points) > tau + 1:
        # cheap path: all points already on one degree-tau polynomial
        f = lagrange_interpolate(head, p)
        if all(poly_eval(f, x) == y for x, y in points[tau + 1 :]):
            return guess
    elif eps == 0:
        return guess
    return poly_eval(berlekamp_welch_decode(points, tau, eps, p), 0)


def reconstruct(
    shares: Sequence[Share], policy: SharingPolicy, max_errors: int | None = None
) -> int:
    """Recover the secret, tolerating up to ``max_errors`` wrong shares.

    ``max_errors`` defaults to the unique-decoding radius for the number of
    shares supplied, e.g. 3 for ten shares at ``tau = 3``.
    """
    tau, p = policy.tau, policy.p
    eta = len(shares)
    if eta < tau + 1:
        raise ReconstructFailure(f"{eta} shares cannot determine a degree-{tau} polynomial")
    eps = unique_radius(eta, tau) if max_errors is None else max_errors
    eps = max(eps, 0)
    points = tuple(sorted((s.index % p, s.value % p) for s in shares))
    try:
        return _decode_secret(points, tau, eps, p)
    except DuplicateX as exc:
        raise ReconstructFailure("duplicate share indices") from exc
    except (DecodeFailure, ValueError) as exc:
        raise ReconstructFailure(str(exc)) from exc


def encode_address(ip: str, port: int) -> int:
    """Pack an IPv4 address and TCP port into one 48-bit integer."""
    if not 0 <= port < 1 << 16:
        raise ValueError(f"port out of range: {port}")
    return int(ipaddress.IPv4Address(ip)) << 16 | port


def decode_address(value: int) -> tuple[str, int]:
    if not 0 <= value < 1 << 48:
        raise ValueError("not a packed IPv4:port value")
    return str(ipaddress.IPv4Address(value >> 16)), value & 0xFFFF
