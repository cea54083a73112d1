"""Shared builders for tests."""

import random
from itertools import product

from msrcode.code import CodeParams, MsrCode
from msrcode.linalg import DiagonalMatrix


def random_file(code, r: random.Random):
    return [r.randrange(code.q) for _ in range(code.params.file_size)]


def handmade(params: CodeParams, entries) -> MsrCode:
    """Code from explicit diagonals: ``entries[(j, i)] -> tuple``."""
    coding = {key: DiagonalMatrix(params.q, tuple(v)) for key, v in entries.items()}
    return MsrCode(params, coding, seed=None, attempts_used=0, label="handmade")


def brute_force_solutions(rows, rhs, q):
    """Every x in GF(q)^n with rows @ x == rhs, by enumeration."""
    n = len(rows[0])
    return [
        list(x)
        for x in product(range(q), repeat=n)
        if all(sum(a * b for a, b in zip(row, x)) % q == t for row, t in zip(rows, rhs))
    ]
