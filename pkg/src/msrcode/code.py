"""Exact-repair MSR code: construction, MDS verification, encode, reconstruct.

Nodes are numbered 1..n. Nodes 1..k are systematic and store ``x_i``;
parity node ``j > k`` stores ``D_j = sum_i A[j, i] x_i`` where every
``A[j, i]`` is a random diagonal matrix of dimension ``M/k``.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .errors import ConstructionFailed, CorruptCodeError, ParamError, SingularMatrix
from .field import DEFAULT_Q, PrimeField, SeededRng
from .linalg import DiagonalMatrix, FieldMatrix, det_small, rank, solve

log = logging.getLogger(__name__)

INT64_MAX = (1 << 63) - 1
DEFAULT_MAX_ATTEMPTS = 8


@dataclass(frozen=True)
class CodeParams:
    n: int
    k: int
    delta: int
    q: int = DEFAULT_Q

    def __post_init__(self):
        if not (2 <= self.k < self.n):
            raise ParamError(f"need 2 <= k < n, got n={self.n}, k={self.k}")
        if self.delta < 1:
            raise ParamError(f"delta must be >= 1, got {self.delta}")
        PrimeField(self.q)
        for name in ("gamma", "per_node", "file_size", "beta", "sub_beta", "nominal_bandwidth"):
            if getattr(self, name) > INT64_MAX:
                raise ParamError(f"derived size {name} overflows 64-bit range")

    @property
    def field(self) -> PrimeField:
        return PrimeField(self.q)

    @property
    def gamma(self) -> int:
        return (self.n - self.k) * (self.k - 1)

    @property
    def sub_beta(self) -> int:
        return self.delta ** self.gamma

    @property
    def beta(self) -> int:
        return (self.delta + 1) ** self.gamma

    @property
    def per_node(self) -> int:
        return (self.n - self.k) * self.sub_beta

    @property
    def file_size(self) -> int:
        return self.k * self.per_node

    # alias matching the usual notation
    M = file_size

    @property
    def nominal_bandwidth(self) -> int:
        return (self.n - 1) * self.beta

    @property
    def effective_bandwidth(self) -> int:
        return (self.k - 1) * self.beta + (self.n - self.k) * self.sub_beta

    @property
    def parity_ids(self) -> range:
        return range(self.k + 1, self.n + 1)

    @property
    def systematic_ids(self) -> range:
        return range(1, self.k + 1)


@dataclass(frozen=True)
class NodeShard:
    node_id: int
    data: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "data", tuple(self.data))


@dataclass(frozen=True)
class FileVector:
    symbols: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))

    def __len__(self):
        return len(self.symbols)

    def parts(self, k: int) -> list[tuple[int, ...]]:
        """Split into ``x_1 .. x_k``, each of length ``len/k``."""
        size = len(self.symbols) // k
        return [self.symbols[i * size:(i + 1) * size] for i in range(k)]

    @classmethod
    def from_parts(cls, parts: Sequence[Sequence[int]]) -> FileVector:
        return cls(tuple(v for p in parts for v in p))


@dataclass(frozen=True, eq=False)
class MsrCode:
    params: CodeParams
    coding: Mapping[tuple[int, int], DiagonalMatrix]
    seed: int | None = None
    attempts_used: int = 0
    label: str = field(default="random")

    def __post_init__(self):
        p = self.params
        expected = {(j, i) for j in p.parity_ids for i in p.systematic_ids}
        if set(self.coding) != expected:
            raise ParamError("coding matrices must cover every (parity, systematic) pair")
        for key, mat in self.coding.items():
            if mat.dim != p.per_node or mat.q != p.q:
                raise ParamError(f"coding matrix {key} has wrong dimension or field")

    @property
    def q(self) -> int:
        return self.params.q

    def matrix(self, j: int, i: int) -> DiagonalMatrix:
        """``A[j, i]`` for any node j, including the implicit systematic rows."""
        p = self.params
        if j <= p.k:
            return DiagonalMatrix(p.q, (int(j == i),) * p.per_node)
        return self.coding[(j, i)]

    def digest(self) -> str:
        """SHA-256 over every diagonal entry in (j, i, m) order, u64 little-endian."""
        h = hashlib.sha256()
        for key in sorted(self.coding):
            for v in self.coding[key].diag:
                h.update(v.to_bytes(8, "little"))
        return h.hexdigest()

    def same_matrices(self, other: MsrCode) -> bool:
        return self.params == other.params and dict(self.coding) == dict(other.coding)


def sample_coding_matrices(params: CodeParams, seed: int, attempt: int) -> dict:
    q, dim = params.q, params.per_node
    coding = {}
    for j in params.parity_ids:
        for i in params.systematic_ids:
            rng = SeededRng(seed, f"A/{attempt}/{j}/{i}")
            coding[(j, i)] = DiagonalMatrix(q, tuple(rng.randrange_nonzero(q) for _ in range(dim)))
    return coding


def construct(
    n: int,
    k: int,
    delta: int,
    q: int = DEFAULT_Q,
    seed: int = 0,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> MsrCode:
    """Sample diagonal coding matrices until the MDS property verifies.

    Every attempt resamples all matrices from a fresh ``(seed, attempt)``
    label. Raises :class:`ConstructionFailed` when ``max_attempts`` runs out,
    which in practice means ``q`` is too small for the parameters.
    """
    params = CodeParams(n, k, delta, q)
    if max_attempts < 1:
        raise ParamError("max_attempts must be >= 1")
    for attempt in range(max_attempts):
        code = MsrCode(params, sample_coding_matrices(params, seed, attempt), seed, attempt + 1)
        if mds_check_fast(code):
            return code
        log.debug("construction attempt %d failed MDS check", attempt + 1)
    raise ConstructionFailed(
        f"no MDS code for (n={n}, k={k}, delta={delta}) over GF({q}) "
        f"after {max_attempts} attempts; increase q",
        attempts=max_attempts,
    )


def regenerate(params: CodeParams, seed: int, attempts_used: int) -> MsrCode:
    """Rebuild the matrices a previous :func:`construct` call settled on."""
    if attempts_used < 1:
        raise ParamError("attempts_used must be >= 1")
    return MsrCode(params, sample_coding_matrices(params, seed, attempts_used - 1), seed, attempts_used)


def fixture_4_2() -> MsrCode:
    """The hand-built (4, 2) code over GF(5) with M = 4."""
    q = 5
    params = CodeParams(4, 2, 1, q)
    coding = {
        (3, 1): DiagonalMatrix(q, (1, 2)),
        (4, 1): DiagonalMatrix(q, (2, 1)),
        (3, 2): DiagonalMatrix.identity(q, 2),
        (4, 2): DiagonalMatrix.identity(q, 2),
    }
    return MsrCode(params, coding, seed=None, attempts_used=0, label="fixture_4_2")


def encode(code: MsrCode, file: FileVector | Sequence[int]) -> list[NodeShard]:
    p = code.params
    symbols = file.symbols if isinstance(file, FileVector) else tuple(file)
    if len(symbols) != p.file_size:
        raise ParamError(f"file has {len(symbols)} symbols, code expects M={p.file_size}")
    q, size = p.q, p.per_node
    xs = [[v % q for v in symbols[i * size:(i + 1) * size]] for i in range(p.k)]
    shards = [NodeShard(i + 1, xs[i]) for i in range(p.k)]
    for j in p.parity_ids:
        acc = [0] * size
        for i in p.systematic_ids:
            a = code.coding[(j, i)].diag
            x = xs[i - 1]
            for m in range(size):
                acc[m] += a[m] * x[m]
        shards.append(NodeShard(j, [v % q for v in acc]))
    return shards


def _check_subset(params: CodeParams, ids: Iterable[int]) -> list[int]:
    ids = list(ids)
    if len(ids) != params.k or len(set(ids)) != params.k:
        raise ParamError(f"need exactly k={params.k} distinct node ids, got {ids}")
    if any(not 1 <= j <= params.n for j in ids):
        raise ParamError(f"node ids out of range 1..{params.n}: {ids}")
    return sorted(ids)


def reconstruct(code: MsrCode, shards: Sequence[NodeShard]) -> FileVector:
    """Recover the whole file from any ``k`` shards.

    Known systematic parts are substituted first; the remaining system is
    block diagonal with one ``m x m`` block per coordinate.
    """
    p = code.params
    ids = _check_subset(p, (s.node_id for s in shards))
    by_id = {s.node_id: s for s in shards}
    size, q = p.per_node, p.q
    for s in shards:
        if len(s.data) != size:
            raise ParamError(f"shard {s.node_id} has {len(s.data)} symbols, expected {size}")
    xs: dict[int, Sequence[int]] = {i: by_id[i].data for i in ids if i <= p.k}
    parity = [j for j in ids if j > p.k]
    missing = [i for i in p.systematic_ids if i not in xs]
    if parity:
        residual = {}
        for j in parity:
            r = list(by_id[j].data)
            for i, x in xs.items():
                a = code.coding[(j, i)].diag
                for t in range(size):
                    r[t] -= a[t] * x[t]
            residual[j] = r
        solved = {i: [0] * size for i in missing}
        for t in range(size):
            block = FieldMatrix(q, [[code.coding[(j, c)].diag[t] for c in missing] for j in parity])
            rhs = FieldMatrix(q, [[residual[j][t]] for j in parity])
            try:
                sol = solve(block, rhs)
            except SingularMatrix as exc:
                raise CorruptCodeError(
                    f"reconstruction system singular at coordinate {t} for nodes {ids}"
                ) from exc
            for c, row in zip(missing, sol.rows):
                solved[c][t] = row[0]
        xs.update(solved)
    return FileVector.from_parts([xs[i] for i in p.systematic_ids])


def stacked_matrix(code: MsrCode, ids: Sequence[int]) -> FieldMatrix:
    """The dense ``M x M`` generator rows of the chosen nodes."""
    p = code.params
    size = p.per_node
    rows = []
    for j in ids:
        blocks = [code.matrix(j, i).diag for i in p.systematic_ids]
        for t in range(size):
            row = [0] * p.file_size
            for bi, d in enumerate(blocks):
                row[bi * size + t] = d[t]
            rows.append(row)
    return FieldMatrix(p.q, rows)


def mds_check_naive(code: MsrCode) -> bool:
    """Dense rank test of every k-subset; the reference oracle."""
    p = code.params
    return all(
        rank(stacked_matrix(code, ids)) == p.file_size
        for ids in combinations(range(1, p.n + 1), p.k)
    )


def _singular_coords(code: MsrCode, ids: Sequence[int]):
    p = code.params
    parity = [j for j in ids if j > p.k]
    if not parity:
        return
    present = set(ids)
    missing = [i for i in p.systematic_ids if i not in present]
    rows = [[code.coding[(j, c)].diag for c in missing] for j in parity]
    for t in range(p.per_node):
        block = FieldMatrix(p.q, [[d[t] for d in row] for row in rows])
        if det_small(block) == 0:
            yield t


def failing_blocks(code: MsrCode, ids: Sequence[int]) -> list[int]:
    """Coordinates whose ``m x m`` block is singular for this node subset."""
    return list(_singular_coords(code, sorted(ids)))


def mds_check_fast(code: MsrCode) -> bool:
    """MDS test via the block-diagonal reduction: O(C(n,k) * M/k * m^3)."""
    p = code.params
    for ids in combinations(range(1, p.n + 1), p.k):
        if next(_singular_coords(code, ids), None) is not None:
            return False
    return True
