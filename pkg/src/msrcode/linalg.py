"""Dense and diagonal matrices over GF(q).

All routines are exact and value-semantic: inputs are never modified.
Diagonal matrices stay as vectors; :meth:`DiagonalMatrix.dense` exists for
tests and the naive MDS oracle only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ParamError, SingularMatrix


class FieldMatrix:
    __slots__ = ("q", "rows")

    def __init__(self, q: int, rows: Iterable[Iterable[int]]):
        self.q = q
        self.rows = [[v % q for v in row] for row in rows]
        if self.rows:
            width = len(self.rows[0])
            if any(len(r) != width for r in self.rows):
                raise ParamError("ragged matrix rows")

    @classmethod
    def zeros(cls, q, nrows, ncols):
        return cls(q, [[0] * ncols for _ in range(nrows)])

    @classmethod
    def identity(cls, q, n):
        return cls(q, [[int(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def column_vector(cls, q, values: Sequence[int]):
        return cls(q, [[v] for v in values])

    @classmethod
    def from_columns(cls, q, columns: Sequence[Sequence[int]], nrows: int | None = None):
        if nrows is None:
            nrows = len(columns[0]) if columns else 0
        return cls(q, [[col[r] for col in columns] for r in range(nrows)])

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def ncols(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def entries(self) -> list[int]:
        """Row-major flat view."""
        return [v for row in self.rows for v in row]

    def column(self, c: int) -> list[int]:
        return [row[c] for row in self.rows]

    def columns(self) -> list[list[int]]:
        return [list(col) for col in zip(*self.rows)] if self.rows else []

    def transpose(self) -> FieldMatrix:
        return FieldMatrix(self.q, self.columns())

    def copy(self) -> FieldMatrix:
        return FieldMatrix(self.q, self.rows)

    def __eq__(self, other):
        return isinstance(other, FieldMatrix) and self.q == other.q and self.rows == other.rows

    def __repr__(self):
        return f"FieldMatrix(q={self.q}, rows={self.rows})"


@dataclass(frozen=True)
class DiagonalMatrix:
    q: int
    diag: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "diag", tuple(v % self.q for v in self.diag))

    @classmethod
    def identity(cls, q, dim):
        return cls(q, (1,) * dim)

    @property
    def dim(self) -> int:
        return len(self.diag)

    def is_invertible(self) -> bool:
        return all(self.diag)

    def apply(self, vec: Sequence[int]) -> list[int]:
        """Entrywise product with a vector of length ``dim``."""
        if len(vec) != self.dim:
            raise ParamError(f"vector length {len(vec)} != diagonal dim {self.dim}")
        q = self.q
        return [d * v % q for d, v in zip(self.diag, vec)]

    def __matmul__(self, other: DiagonalMatrix) -> DiagonalMatrix:
        if other.dim != self.dim or other.q != self.q:
            raise ParamError("diagonal shape/field mismatch")
        return DiagonalMatrix(self.q, tuple(a * b for a, b in zip(self.diag, other.diag)))

    def __add__(self, other: DiagonalMatrix) -> DiagonalMatrix:
        if other.dim != self.dim or other.q != self.q:
            raise ParamError("diagonal shape/field mismatch")
        return DiagonalMatrix(self.q, tuple(a + b for a, b in zip(self.diag, other.diag)))

    def __sub__(self, other: DiagonalMatrix) -> DiagonalMatrix:
        return self + (-other)

    def __neg__(self) -> DiagonalMatrix:
        return DiagonalMatrix(self.q, tuple(-a for a in self.diag))

    def inverse(self) -> DiagonalMatrix:
        if not self.is_invertible():
            raise SingularMatrix("diagonal matrix has a zero entry")
        q = self.q
        return DiagonalMatrix(q, tuple(pow(a, q - 2, q) for a in self.diag))

    def power(self, e: int) -> DiagonalMatrix:
        # entrywise, so 0**0 == 1 as required by zero-tolerant alignment
        return DiagonalMatrix(self.q, tuple(pow(a, e, self.q) for a in self.diag))

    def dense(self) -> FieldMatrix:
        n = self.dim
        return FieldMatrix(self.q, [[self.diag[i] if i == j else 0 for j in range(n)] for i in range(n)])


def mat_mul(a: FieldMatrix, b: FieldMatrix) -> FieldMatrix:
    if a.q != b.q:
        raise ParamError("field mismatch")
    if a.ncols != b.nrows:
        raise ParamError(f"shape mismatch: {a.shape} x {b.shape}")
    q = a.q
    bcols = b.columns()
    return FieldMatrix(q, [[sum(x * y for x, y in zip(row, col)) % q for col in bcols] for row in a.rows])


def mat_vec(a: FieldMatrix, v: Sequence[int]) -> list[int]:
    if a.ncols != len(v):
        raise ParamError(f"shape mismatch: {a.shape} x {len(v)}")
    q = a.q
    return [sum(x * y for x, y in zip(row, v)) % q for row in a.rows]


def diag_apply(d: DiagonalMatrix, v: FieldMatrix) -> FieldMatrix:
    """Scale row ``m`` of ``v`` by ``d.diag[m]`` in O(dim * cols)."""
    if d.dim != v.nrows:
        raise ParamError(f"diagonal dim {d.dim} != matrix rows {v.nrows}")
    q = v.q
    return FieldMatrix(q, [[s * x % q for x in row] for s, row in zip(d.diag, v.rows)])


def dot(u: Sequence[int], v: Sequence[int], q: int) -> int:
    return sum(a * b for a, b in zip(u, v)) % q


def _eliminate(rows: list[list[int]], q: int, ncols: int) -> tuple[int, list[int]]:
    """Reduce ``rows`` in place to row-echelon form.

    Returns the rank and the pivot columns. First-nonzero pivoting; no
    column swaps are applied.
    """
    r = 0
    pivots = []
    nrows = len(rows)
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        prow = rows[r]
        inv = pow(prow[c], q - 2, q)
        if inv != 1:
            prow[:] = [x * inv % q for x in prow]
        for i in range(r + 1, nrows):
            f = rows[i][c]
            if f:
                rows[i] = [(x - f * y) % q for x, y in zip(rows[i], prow)]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return r, pivots


def rank(a: FieldMatrix) -> int:
    rows = [list(r) for r in a.rows]
    return _eliminate(rows, a.q, a.ncols)[0]


def solve(a: FieldMatrix, b: FieldMatrix) -> FieldMatrix:
    """Solve ``a @ x == b`` for square, nonsingular ``a``."""
    if a.nrows != a.ncols:
        raise ParamError(f"solve needs a square matrix, got {a.shape}")
    if b.nrows != a.nrows:
        raise ParamError(f"right-hand side has {b.nrows} rows, expected {a.nrows}")
    q, n, m = a.q, a.nrows, b.ncols
    aug = [list(ra) + list(rb) for ra, rb in zip(a.rows, b.rows)]
    for c in range(n):
        piv = next((i for i in range(c, n) if aug[i][c]), None)
        if piv is None:
            raise SingularMatrix(f"matrix is singular (column {c})")
        aug[c], aug[piv] = aug[piv], aug[c]
        prow = aug[c]
        inv = pow(prow[c], q - 2, q)
        if inv != 1:
            prow[:] = [x * inv % q for x in prow]
        for i in range(n):
            if i != c:
                f = aug[i][c]
                if f:
                    aug[i] = [(x - f * y) % q for x, y in zip(aug[i], prow)]
    return FieldMatrix(q, [row[n:n + m] for row in aug])


def inverse(a: FieldMatrix) -> FieldMatrix:
    return solve(a, FieldMatrix.identity(a.q, a.nrows))


def det_small(a: FieldMatrix) -> int:
    """Determinant by elimination; meant for the m x m blocks of the MDS check."""
    if a.nrows != a.ncols:
        raise ParamError(f"determinant needs a square matrix, got {a.shape}")
    q, n = a.q, a.nrows
    rows = [list(r) for r in a.rows]
    det = 1
    for c in range(n):
        piv = next((i for i in range(c, n) if rows[i][c]), None)
        if piv is None:
            return 0
        if piv != c:
            rows[c], rows[piv] = rows[piv], rows[c]
            det = -det
        pv = rows[c][c]
        det = det * pv % q
        inv = pow(pv, q - 2, q)
        for i in range(c + 1, n):
            f = rows[i][c] * inv % q
            if f:
                rows[i] = [(x - f * y) % q for x, y in zip(rows[i], rows[c])]
    return det % q


def block_diag(blocks: Sequence[FieldMatrix]) -> FieldMatrix:
    q = blocks[0].q
    total_r = sum(b.nrows for b in blocks)
    total_c = sum(b.ncols for b in blocks)
    out = FieldMatrix.zeros(q, total_r, total_c)
    r0 = c0 = 0
    for b in blocks:
        for i, row in enumerate(b.rows):
            out.rows[r0 + i][c0:c0 + b.ncols] = row
        r0 += b.nrows
        c0 += b.ncols
    return out


def hstack(mats: Sequence[FieldMatrix]) -> FieldMatrix:
    q = mats[0].q
    return FieldMatrix(q, [sum((m.rows[i] for m in mats), []) for i in range(mats[0].nrows)])


def vstack(mats: Sequence[FieldMatrix]) -> FieldMatrix:
    q = mats[0].q
    return FieldMatrix(q, [row for m in mats for row in m.rows])
