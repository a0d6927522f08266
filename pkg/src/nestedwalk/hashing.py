"""k-wise independent hash functions from polynomials over a prime field.

A uniform degree-(k-1) polynomial over GF(p) restricted to any k distinct
points is exactly uniform over [p]^k.  For a range smaller than p the
evaluation is folded into [ell] by rejection at the range-reduction
boundary: values past the largest multiple of ell are redrawn from a
keyed hash stream, leaving each per-point marginal within 2^-20
statistical distance of uniform.
"""

import hashlib
from dataclasses import dataclass
from itertools import permutations, product

import random

_REJECTION_ROUNDS = 64


def is_prime(n):
    """Deterministic Miller-Rabin, exact for 64-bit inputs."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
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


def next_prime(n):
    p = max(2, n)
    while not is_prime(p):
        p += 1
    return p


@dataclass(frozen=True)
class PolyHash:
    """Degree-(k-1) polynomial over GF(p), range-reduced to [ell]."""

    coefficients: tuple
    p: int
    n: int
    ell: int

    @property
    def k(self):
        return len(self.coefficients)

    def raw(self, x):
        """Polynomial value in [0, p) by Horner evaluation."""
        acc = 0
        for c in reversed(self.coefficients):
            acc = (acc * x + c) % self.p
        return acc

    def __call__(self, x):
        y = self.raw(x)
        boundary = self.ell * (self.p // self.ell)
        if boundary == self.p:
            return y % self.ell
        key = hashlib.blake2b(
            repr((self.coefficients, self.p)).encode(), digest_size=16
        ).digest()
        for attempt in range(_REJECTION_ROUNDS):
            if y < boundary:
                return y % self.ell
            h = hashlib.blake2b(repr((x, attempt)).encode(), key=key,
                                digest_size=16).digest()
            y = int.from_bytes(h, "big") % self.p
        return 0  # residual probability < 2^-64


def sample(k, n, ell, rng_seed):
    """Uniform member of the k-wise family for domain [n], range [ell]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    p = next_prime(max(n, ell))
    rng = random.Random(rng_seed)
    coeffs = tuple(rng.randrange(p) for _ in range(k))
    return PolyHash(coeffs, p, n, ell)


def verify_kwise(k, p, degree=None):
    """Exhaustively test k-wise uniformity of the degree family over GF(p).

    Enumerates all p^(degree+1) polynomials and all ordered k-tuples of
    distinct points; passes iff every value tuple occurs the same number
    of times.  ``degree`` defaults to k-1 (the correct family); lower
    degrees serve as negative controls.
    """
    if not is_prime(p):
        raise ValueError("p must be prime")
    if degree is None:
        degree = k - 1
    n_coeff = degree + 1
    points = list(permutations(range(p), k))
    expected = p ** n_coeff / p ** k
    worst = 0.0
    for pts in points:
        counts = {}
        for coeffs in product(range(p), repeat=n_coeff):
            f = PolyHash(coeffs, p, p, p)
            key = tuple(f(x) for x in pts)
            counts[key] = counts.get(key, 0) + 1
        full = [counts.get(v, 0) for v in product(range(p), repeat=k)]
        dev = max(abs(c - expected) for c in full)
        worst = max(worst, dev)
        if dev > 0:
            return {"passed": False, "max_count_deviation": worst, "points": pts}
    return {"passed": True, "max_count_deviation": worst, "points": None}
