"""Prime-field arithmetic, polynomials and Berlekamp-Welch decoding.

Field elements are plain Python ints in ``[0, p)``.  Every function takes the
modulus explicitly and defaults to the Mersenne prime ``2**61 - 1``, which is
wide enough to hold any packed IPv4:port bridge address.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

P61 = (1 << 61) - 1

# Deterministic Miller-Rabin witnesses for n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


class FieldError(ArithmeticError):
    pass


class ZeroInverse(FieldError):
    pass


class DuplicateX(FieldError, ValueError):
    pass


class DecodeFailure(FieldError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def check_modulus(p: int) -> int:
    """Return ``p`` unchanged, or raise ``ValueError`` if it is not prime."""
    if not is_prime(p):
        raise ValueError(f"field modulus {p} is not prime")
    return p


def inverse(a: int, p: int = P61) -> int:
    a %= p
    if a == 0:
        raise ZeroInverse("0 has no multiplicative inverse")
    return pow(a, p - 2, p)


@dataclass(frozen=True)
class Polynomial:
    """Polynomial over GF(p), coefficients lowest degree first.

    Trailing zero coefficients are stripped on construction, so the zero
    polynomial has ``coeffs == ()`` and ``degree == -1``.
    """

    coeffs: tuple[int, ...]
    p: int = P61

    def __post_init__(self):
        c = [int(v) % self.p for v in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x: int) -> int:
        return poly_eval(self, x)

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __add__(self, other: Polynomial) -> Polynomial:
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for k, v in enumerate(b):
            out[k] += v
        return Polynomial(tuple(out), self.p)

    def __neg__(self) -> Polynomial:
        return Polynomial(tuple(-v for v in self.coeffs), self.p)

    def __sub__(self, other: Polynomial) -> Polynomial:
        return self + (-other)

    def __mul__(self, other: Polynomial) -> Polynomial:
        if not self.coeffs or not other.coeffs:
            return Polynomial((), self.p)
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Polynomial(tuple(out), self.p)

    def __divmod__(self, other: Polynomial) -> tuple[Polynomial, Polynomial]:
        if not other.coeffs:
            raise ZeroDivisionError("polynomial division by zero")
        p = self.p
        rem = list(self.coeffs)
        dd = other.degree
        lead_inv = inverse(other.coeffs[-1], p)
        quot = [0] * max(0, len(rem) - dd)
        for k in range(len(rem) - 1, dd - 1, -1):
            c = rem[k] * lead_inv % p
            if c:
                quot[k - dd] = c
                for j, b in enumerate(other.coeffs):
                    rem[k - dd + j] = (rem[k - dd + j] - c * b) % p
        return Polynomial(tuple(quot), p), Polynomial(tuple(rem[:dd]), p)


def poly_eval(f: Polynomial | Sequence[int], x: int, p: int | None = None) -> int:
    """Horner evaluation of ``f`` at ``x``."""
    if isinstance(f, Polynomial):
        coeffs, p = f.coeffs, f.p if p is None else p
    else:
        coeffs, p = f, P61 if p is None else p
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def _check_distinct(xs: Iterable[int], p: int) -> list[int]:
    xs = [x % p for x in xs]
    if len(set(xs)) != len(xs):
        raise DuplicateX("evaluation points must have distinct x-coordinates")
    return xs


def lagrange_interpolate(points: Sequence[tuple[int, int]], p: int = P61) -> Polynomial:
    """Unique polynomial of degree < len(points) through ``points``."""
    if not points:
        raise ValueError("need at least one point")
    xs = _check_distinct((x for x, _ in points), p)
    ys = [y % p for _, y in points]
    result = Polynomial((), p)
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        if yi == 0:
            continue
        basis = Polynomial((1,), p)
        denom = 1
        for j, xj in enumerate(xs):
            if j != i:
                basis = basis * Polynomial((-xj, 1), p)
                denom = denom * (xi - xj) % p
        scale = yi * inverse(denom, p) % p
        result = result + Polynomial(tuple(c * scale for c in basis.coeffs), p)
    return result


def interpolate_at(points: Sequence[tuple[int, int]], x0: int, p: int = P61) -> int:
    """Value at ``x0`` of the interpolating polynomial, without building it."""
    xs = _check_distinct((x for x, _ in points), p)
    total = 0
    for i, (xi, (_, yi)) in enumerate(zip(xs, points)):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if j != i:
                num = num * (x0 - xj) % p
                den = den * (xi - xj) % p
        total = (total + yi * num * inverse(den, p)) % p
    return total


def solve_linear(rows: list[list[int]], rhs: list[int], p: int = P61) -> list[int] | None:
    """One solution of ``rows @ x = rhs`` over GF(p), or None if inconsistent.

    Pivots on the first nonzero entry in row order; free variables are set to
    zero, which keeps the returned solution deterministic.
    """
    n_rows = len(rows)
    n_cols = len(rows[0]) if rows else 0
    aug = [[v % p for v in row] + [b % p] for row, b in zip(rows, rhs)]
    pivots = []
    r = 0
    for c in range(n_cols):
        sel = next((i for i in range(r, n_rows) if aug[i][c]), None)
        if sel is None:
            continue
        aug[r], aug[sel] = aug[sel], aug[r]
        inv = inverse(aug[r][c], p)
        aug[r] = [v * inv % p for v in aug[r]]
        for i in range(n_rows):
            if i != r and aug[i][c]:
                k = aug[i][c]
                aug[i] = [(a - k * b) % p for a, b in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    if any(aug[i][-1] for i in range(r, n_rows)):
        return None
    x = [0] * n_cols
    for i, c in enumerate(pivots):
        x[c] = aug[i][-1]
    return x


def unique_radius(eta: int, tau: int) -> int:
    """Errors always correctable with a unique answer: ``2e + tau + 1 <= eta``."""
    return (eta - tau - 1) // 2


def berlekamp_welch_decode(
    points: Sequence[tuple[int, int]], tau: int, epsilon: int, p: int = P61
) -> Polynomial:
    """Recover the degree-``tau`` polynomial behind ``points`` with up to
    ``epsilon`` of them wrong.

    Requires ``2 * epsilon < len(points) - tau + 1``.  The error locator is
    taken monic; locator degrees ``epsilon, epsilon - 1, ..., 0`` are tried in
    turn until ``Q / E`` divides exactly and the quotient disagrees with at
    most ``epsilon`` points.  Raises :class:`DecodeFailure` otherwise.

    When ``len(points) == 2 * epsilon + tau`` two codewords can both lie within
    distance ``epsilon`` of the input; one of them is returned.
    """
    eta = len(points)
    if tau < 0 or epsilon < 0:
        raise ValueError("tau and epsilon must be non-negative")
    if eta < tau + 1:
        raise ValueError(f"{eta} points cannot determine a degree-{tau} polynomial")
    if not 2 * epsilon < eta - tau + 1:
        raise ValueError(
            f"epsilon={epsilon} too large for {eta} points at degree {tau}"
        )
    xs = _check_distinct((x for x, _ in points), p)
    ys = [y % p for _, y in points]
    found = _bw_search(xs, ys, tau, epsilon, p)
    if found is None and eta == 2 * epsilon + tau:
        # At this length the top-degree system is underdetermined and may miss
        # a codeword at distance exactly epsilon.  Dropping one of its error
        # positions leaves a uniquely decodable word at radius epsilon - 1.
        for k in range(eta):
            sub_x, sub_y = xs[:k] + xs[k + 1 :], ys[:k] + ys[k + 1 :]
            cand = _bw_search(sub_x, sub_y, tau, epsilon - 1, p)
            if cand is not None and _disagreements(cand, xs, ys) <= epsilon:
                found = cand
                break
    if found is None:
        raise DecodeFailure(f"no degree-{tau} polynomial within {epsilon} errors")
    return found


def _disagreements(f: Polynomial, xs: Sequence[int], ys: Sequence[int]) -> int:
    return sum(1 for x, y in zip(xs, ys) if poly_eval(f, x) != y)


def _bw_search(xs, ys, tau, epsilon, p) -> Polynomial | None:
    powers = [[pow(x, k, p) for k in range(2 * epsilon + tau + 2)] for x in xs]
    for e in range(epsilon, -1, -1):
        nq = e + tau + 1
        rows = []
        rhs = []
        for pw, y in zip(powers, ys):
            rows.append([y * pw[k] % p for k in range(e)] + [-pw[j] % p for j in range(nq)])
            rhs.append(-y * pw[e] % p)
        sol = solve_linear(rows, rhs, p)
        if sol is None:
            continue
        locator = Polynomial(tuple(sol[:e]) + (1,), p)
        q = Polynomial(tuple(sol[e:]), p)
        quot, rem = divmod(q, locator)
        if rem or quot.degree > tau:
            continue
        if _disagreements(quot, xs, ys) <= epsilon:
            return quot
    return None
