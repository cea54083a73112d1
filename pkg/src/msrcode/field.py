"""Arithmetic in the prime field GF(q) plus labeled, seeded sampling.

Hot paths work on plain ``int`` values through :class:`PrimeField`;
:class:`FieldElement` is the checked, modulus-tagged public value type.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import FieldMismatchError, ParamError

MERSENNE_61 = (1 << 61) - 1
DEFAULT_Q = MERSENNE_61

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for every n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
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


class PrimeField:
    """GF(q) for a prime 3 <= q < 2**64."""

    __slots__ = ("q",)

    def __init__(self, q: int = DEFAULT_Q):
        q = int(q)
        if q < 3 or q >= 1 << 64:
            raise ParamError(f"field modulus must satisfy 3 <= q < 2**64, got {q}")
        if not is_prime(q):
            raise ParamError(f"field modulus {q} is not prime")
        self.q = q

    def __repr__(self):
        return f"PrimeField({self.q})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self):
        return hash(("PrimeField", self.q))

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(value % self.q, self.q)

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def neg(self, a: int) -> int:
        return -a % self.q

    def mul(self, a: int, b: int) -> int:
        return a * b % self.q

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise ZeroDivisionError("zero has no inverse in GF(q)")
        return pow(a, self.q - 2, self.q)

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            raise ValueError("exponent must be nonnegative")
        return pow(a % self.q, e, self.q)

    def sample_nonzero(self, rng: SeededRng) -> int:
        return rng.randrange_nonzero(self.q)


@dataclass(frozen=True, slots=True)
class FieldElement:
    value: int
    q: int

    def __post_init__(self):
        if not 0 <= self.value < self.q:
            raise ValueError(f"{self.value} is not a canonical residue mod {self.q}")

    def _check(self, other: FieldElement):
        if not isinstance(other, FieldElement):
            return NotImplemented
        if other.q != self.q:
            raise FieldMismatchError(f"GF({self.q}) vs GF({other.q})")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FieldElement((self.value + other.value) % self.q, self.q)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FieldElement((self.value - other.value) % self.q, self.q)

    def __mul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FieldElement(self.value * other.value % self.q, self.q)

    def __neg__(self):
        return FieldElement(-self.value % self.q, self.q)

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** -e
        return FieldElement(pow(self.value, e, self.q), self.q)

    def inverse(self) -> FieldElement:
        if self.value == 0:
            raise ZeroDivisionError("zero has no inverse in GF(q)")
        return FieldElement(pow(self.value, self.q - 2, self.q), self.q)

    def __int__(self):
        return self.value


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()


def power(a: FieldElement, e: int) -> FieldElement:
    """Square-and-multiply exponentiation; ``power(0, 0) == 1``."""
    if e < 0:
        raise ValueError("exponent must be nonnegative")
    result, base = 1, a.value
    while e:
        if e & 1:
            result = result * base % a.q
        base = base * base % a.q
        e >>= 1
    return FieldElement(result % a.q, a.q)


class SeededRng:
    """Counter-based stream keyed by ``(seed, label)``.

    Block ``c`` of the stream is ``blake2b(seed || label || c)``; two streams
    with different labels are independent and any value is reproducible from
    the key alone.
    """

    __slots__ = ("seed", "label", "_key", "_counter")

    def __init__(self, seed: int, label: str):
        self.seed = int(seed)
        self.label = label
        self._key = self.seed.to_bytes(8, "little", signed=False) + label.encode()
        self._counter = 0

    def next_u64(self) -> int:
        h = hashlib.blake2b(
            self._key + self._counter.to_bytes(8, "little"), digest_size=8
        )
        self._counter += 1
        return int.from_bytes(h.digest(), "little")

    def randrange_nonzero(self, q: int) -> int:
        """Uniform draw from {1, ..., q-1} by rejection sampling."""
        span = q - 1
        limit = ((1 << 64) // span) * span
        while True:
            u = self.next_u64()
            if u < limit:
                return 1 + u % span

    def child(self, label: str) -> SeededRng:
        return SeededRng(self.seed, f"{self.label}/{label}")


def sample_nonzero(rng: SeededRng, field: PrimeField) -> FieldElement:
    return FieldElement(field.sample_nonzero(rng), field.q)
