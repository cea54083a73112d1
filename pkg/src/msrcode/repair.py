"""Exact single-node repair by asymptotic interference alignment.

A repair is phrased over a :class:`RepairView`: one unknown node content,
``n - k`` "parity-like" helpers whose content mixes the unknown with
interference, and ``k - 1`` interference helpers storing the interfering
parts verbatim. Systematic failures use the code as is; parity failures go
through :func:`transform_for_parity` first, which yields a view of exactly
the same shape.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .code import CodeParams, MsrCode, NodeShard
from .errors import ParamError, RepairInfeasible, SingularMatrix, StateError
from .field import SeededRng
from .linalg import DiagonalMatrix, FieldMatrix, inverse, mat_vec, solve

log = logging.getLogger(__name__)

DEFAULT_REPAIR_ATTEMPTS = 8

Pair = tuple[int, int]


# -- mixed-radix exponent indexing -------------------------------------------

def encode_exponents(alpha: Sequence[int], radix: int) -> int:
    """Column index of an exponent vector; the first pair is most significant."""
    idx = 0
    for a in alpha:
        if not 0 <= a < radix:
            raise ValueError(f"exponent {a} outside [0, {radix})")
        idx = idx * radix + a
    return idx


def decode_exponents(index: int, radix: int, length: int) -> list[int]:
    out = [0] * length
    for pos in range(length - 1, -1, -1):
        index, out[pos] = divmod(index, radix)
    if index:
        raise ValueError("index out of range for the given radix/length")
    return out


# -- views -------------------------------------------------------------------

@dataclass(frozen=True)
class RepairView:
    """Coefficient family seen by a newcomer repairing ``failed``.

    ``desired[j]`` multiplies the unknown inside helper ``j``'s content and
    ``interference[(j, i)]`` multiplies interfering part ``i``, which helper
    ``interference_nodes[i]`` stores verbatim.
    """

    failed: int
    q: int
    per_node: int
    parity_nodes: tuple[int, ...]
    interference_nodes: Mapping[int, int]
    desired: Mapping[int, DiagonalMatrix]
    interference: Mapping[Pair, DiagonalMatrix]

    @property
    def pairs(self) -> list[Pair]:
        return sorted(self.interference)

    @property
    def helpers(self) -> set[int]:
        return set(self.parity_nodes) | set(self.interference_nodes.values())


def systematic_view(code: MsrCode, f: int) -> RepairView:
    p = code.params
    if not 1 <= f <= p.k:
        raise ParamError(f"node {f} is not systematic (k={p.k})")
    others = [i for i in p.systematic_ids if i != f]
    return RepairView(
        failed=f,
        q=p.q,
        per_node=p.per_node,
        parity_nodes=tuple(p.parity_ids),
        interference_nodes={i: i for i in others},
        desired={j: code.coding[(j, f)] for j in p.parity_ids},
        interference={(j, i): code.coding[(j, i)] for j in p.parity_ids for i in others},
    )


@dataclass(frozen=True)
class ParityTransform:
    """Change of basis that makes parity node ``parity`` look systematic.

    With ``x1' = D_parity`` standing in for ``x_1``, ``coeffs[(j, 1)]`` is the
    coefficient on ``x1'`` and ``coeffs[(j, i)]`` (i >= 2) the coefficient on
    ``x_i``, for ``j = 1`` (whose content is ``x_1``) and every other parity.
    """

    parity: int
    nodes: tuple[int, ...]
    coeffs: Mapping[Pair, DiagonalMatrix]

    def content(self, j: int, x1p: Sequence[int], xs: Mapping[int, Sequence[int]]) -> list[int]:
        """Evaluate node ``j``'s content from ``x1'`` and ``x_2..x_k``."""
        acc = self.coeffs[(j, 1)].apply(x1p)
        q = self.coeffs[(j, 1)].q
        for i, x in xs.items():
            acc = [(a + b) % q for a, b in zip(acc, self.coeffs[(j, i)].apply(x))]
        return acc


def transform_for_parity(code: MsrCode, p: int) -> ParityTransform:
    params = code.params
    if p not in params.parity_ids:
        raise ParamError(f"node {p} is not a parity node")
    k = params.k
    a_p1 = code.coding[(p, 1)]
    if not a_p1.is_invertible():
        raise SingularMatrix(f"A[{p},1] has a zero diagonal entry")
    a_p1_inv = a_p1.inverse()
    coeffs: dict[Pair, DiagonalMatrix] = {(1, 1): a_p1_inv}
    for i in range(2, k + 1):
        coeffs[(1, i)] = -(a_p1_inv @ code.coding[(p, i)])
    others = [j for j in params.parity_ids if j != p]
    for j in others:
        a_j1 = code.coding[(j, 1)]
        coeffs[(j, 1)] = a_j1 @ a_p1_inv
        # substitute x_1 = A[p,1]^-1 (x1' - sum_i A[p,i] x_i) into D_j
        for i in range(2, k + 1):
            coeffs[(j, i)] = code.coding[(j, i)] - a_j1 @ a_p1_inv @ code.coding[(p, i)]
    return ParityTransform(p, (1, *others), coeffs)


def parity_view(code: MsrCode, p: int) -> RepairView:
    tr = transform_for_parity(code, p)
    k = code.params.k
    return RepairView(
        failed=p,
        q=code.q,
        per_node=code.params.per_node,
        parity_nodes=tr.nodes,
        interference_nodes={i: i for i in range(2, k + 1)},
        desired={j: tr.coeffs[(j, 1)] for j in tr.nodes},
        interference={(j, i): tr.coeffs[(j, i)] for j in tr.nodes for i in range(2, k + 1)},
    )


def view_for(code: MsrCode, node: int) -> RepairView:
    if node <= code.params.k:
        return systematic_view(code, node)
    return parity_view(code, node)


# -- repair vectors ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RepairVectors:
    failed: int
    delta: int
    w: tuple[int, ...]
    V: FieldMatrix
    Vp: FieldMatrix
    pairs: tuple[Pair, ...]
    align_map: Mapping[Pair, tuple[int, ...]]
    view: RepairView
    decoder: FieldMatrix
    attempts_used: int = 1
    _vcols: list = field(default=None, repr=False)
    _vpcols: list = field(default=None, repr=False)

    @property
    def v_columns(self) -> list[list[int]]:
        return self._vcols

    @property
    def vp_columns(self) -> list[list[int]]:
        return self._vpcols


def _exponent_columns(w, pairs, view, radix) -> list[list[int]]:
    """All columns ``prod A[pair]^alpha[pair] w`` for exponents in [0, radix)."""
    q = view.q
    cols = [list(w)]
    for pair in pairs:
        base = view.interference[pair].diag
        powers = [[pow(a, e, q) for a in base] for e in range(radix)]
        cols = [[c * s % q for c, s in zip(col, powers[e])] for col in cols for e in range(radix)]
    return cols


def align_index(c: int, pair_pos: int, delta: int, gamma: int) -> int:
    alpha = decode_exponents(c, delta, gamma)
    alpha[pair_pos] += 1
    return encode_exponents(alpha, delta + 1)


def _stacked_desired(view: RepairView, vcols) -> FieldMatrix:
    q = view.q
    rows = []
    for j in view.parity_nodes:
        d = view.desired[j].diag
        for col in vcols:
            rows.append([v * a % q for v, a in zip(col, d)])
    return FieldMatrix(q, rows)


def build_from_view(
    view: RepairView,
    delta: int,
    seed: int,
    max_attempts: int = DEFAULT_REPAIR_ATTEMPTS,
) -> RepairVectors:
    pairs = tuple(view.pairs)
    gamma = len(pairs)
    if len(view.parity_nodes) * delta ** gamma != view.per_node:
        raise ParamError("view shape does not match (n-k) * delta^gamma = M/k")
    align_map = {
        pair: tuple(align_index(c, pos, delta, gamma) for c in range(delta ** gamma))
        for pos, pair in enumerate(pairs)
    }
    for attempt in range(max_attempts):
        rng = SeededRng(seed, f"w/{view.failed}/{attempt}")
        w = tuple(rng.randrange_nonzero(view.q) for _ in range(view.per_node))
        vcols = _exponent_columns(w, pairs, view, delta)
        try:
            decoder = inverse(_stacked_desired(view, vcols))
        except SingularMatrix:
            log.debug("repair vectors for node %d singular on attempt %d", view.failed, attempt + 1)
            continue
        vpcols = _exponent_columns(w, pairs, view, delta + 1)
        return RepairVectors(
            failed=view.failed,
            delta=delta,
            w=w,
            V=FieldMatrix.from_columns(view.q, vcols, view.per_node),
            Vp=FieldMatrix.from_columns(view.q, vpcols, view.per_node),
            pairs=pairs,
            align_map=align_map,
            view=view,
            decoder=decoder,
            attempts_used=attempt + 1,
            _vcols=vcols,
            _vpcols=vpcols,
        )
    raise RepairInfeasible(
        f"reconstruction rank condition failed for node {view.failed} "
        f"after {max_attempts} attempts",
        attempts=max_attempts,
    )


def build_repair_vectors(
    code: MsrCode,
    f: int,
    seed: int | None = None,
    max_attempts: int = DEFAULT_REPAIR_ATTEMPTS,
) -> RepairVectors:
    """Repair vectors for systematic node ``f``."""
    return build_from_view(systematic_view(code, f), code.params.delta, _seed(code, seed), max_attempts)


def build_parity_repair_vectors(
    code: MsrCode,
    p: int,
    seed: int | None = None,
    max_attempts: int = DEFAULT_REPAIR_ATTEMPTS,
) -> RepairVectors:
    return build_from_view(parity_view(code, p), code.params.delta, _seed(code, seed), max_attempts)


def build_for_node(code: MsrCode, node: int, seed: int | None = None,
                   max_attempts: int = DEFAULT_REPAIR_ATTEMPTS) -> RepairVectors:
    return build_from_view(view_for(code, node), code.params.delta, _seed(code, seed), max_attempts)


def _seed(code: MsrCode, seed: int | None) -> int:
    if seed is not None:
        return seed
    return code.seed if code.seed is not None else 0


def check_alignment(rv: RepairVectors) -> bool:
    """Entrywise: ``A[j,i] V[:, c] == Vp[:, align_map[(j,i)][c]]`` for all pairs and columns."""
    for pair in rv.pairs:
        a = rv.view.interference[pair]
        targets = rv.align_map[pair]
        for c, col in enumerate(rv.v_columns):
            if a.apply(col) != rv.vp_columns[targets[c]]:
                return False
    return True


# -- downloads and repair ----------------------------------------------------

@dataclass(frozen=True)
class DownloadBundle:
    """What the newcomer receives: ``y`` from interference helpers, ``z`` from the rest."""

    y: Mapping[int, tuple[int, ...]]
    z: Mapping[int, tuple[int, ...]]

    @property
    def symbol_count(self) -> int:
        return sum(len(v) for v in self.y.values()) + sum(len(v) for v in self.z.values())

    def per_helper(self) -> dict[int, int]:
        out = {node: len(v) for node, v in self.z.items()}
        out.update({node: len(v) for node, v in self.y.items()})
        return out


def _shard_map(shards: Sequence[NodeShard], expected: set[int], per_node: int) -> dict[int, Sequence[int]]:
    got = {s.node_id: s.data for s in shards}
    if len(got) != len(shards) or set(got) != expected:
        raise StateError(f"helper set {sorted(got)} != required {sorted(expected)}")
    for node, data in got.items():
        if len(data) != per_node:
            raise ParamError(f"helper {node} shard has {len(data)} symbols, expected {per_node}")
    return got


def extract_downloads(code: MsrCode, rv: RepairVectors, shards: Sequence[NodeShard]) -> DownloadBundle:
    """Project each helper's shard: ``Vp^T x_i`` or ``V^T D_j``."""
    view = rv.view
    q = view.q
    data = _shard_map(shards, view.helpers, view.per_node)
    y = {}
    for i, node in view.interference_nodes.items():
        x = data[node]
        y[node] = tuple(sum(a * b for a, b in zip(col, x)) % q for col in rv.vp_columns)
    z = {}
    for j in view.parity_nodes:
        d = data[j]
        z[j] = tuple(sum(a * b for a, b in zip(col, d)) % q for col in rv.v_columns)
    return DownloadBundle(y, z)


def repair_from_bundle(rv: RepairVectors, bundle: DownloadBundle) -> NodeShard:
    """Cancel interference by index lookup, then solve for the unknown."""
    view = rv.view
    q = view.q
    stacked = []
    for j in view.parity_nodes:
        cleaned = list(bundle.z[j])
        for i, node in view.interference_nodes.items():
            yi = bundle.y[node]
            targets = rv.align_map[(j, i)]
            for c in range(len(cleaned)):
                cleaned[c] -= yi[targets[c]]
        stacked.extend(v % q for v in cleaned)
    return NodeShard(rv.failed, mat_vec(rv.decoder, stacked))


def repair_systematic(code: MsrCode, f: int, bundle: DownloadBundle, rv: RepairVectors) -> NodeShard:
    if rv.failed != f or f > code.params.k:
        raise ParamError(f"repair vectors built for node {rv.failed}, not systematic node {f}")
    return repair_from_bundle(rv, bundle)


def repair_parity(
    code: MsrCode,
    p: int,
    shards: Sequence[NodeShard],
    rv: RepairVectors | None = None,
    max_attempts: int = DEFAULT_REPAIR_ATTEMPTS,
) -> NodeShard:
    if rv is None:
        rv = build_parity_repair_vectors(code, p, max_attempts=max_attempts)
    elif rv.failed != p:
        raise ParamError(f"repair vectors built for node {rv.failed}, not {p}")
    return repair_from_bundle(rv, extract_downloads(code, rv, shards))


def repair_node(code: MsrCode, node: int, shards: Sequence[NodeShard],
                rv: RepairVectors | None = None) -> tuple[NodeShard, DownloadBundle]:
    """Repair any node from the other ``n - 1`` shards; returns the shard and what was downloaded."""
    if rv is None:
        rv = build_for_node(code, node)
    bundle = extract_downloads(code, rv, shards)
    return repair_from_bundle(rv, bundle), bundle


# -- the hand-built (4, 2) example -------------------------------------------

FIXTURE_VECTOR = (1, 1)


def fixture_downloads(shards: Sequence[NodeShard]) -> DownloadBundle:
    """One scalar ``[1 1] . data`` from each of nodes 2, 3 and 4."""
    data = _shard_map(shards, {2, 3, 4}, 2)
    q = 5
    proj = {j: (sum(a * b for a, b in zip(FIXTURE_VECTOR, data[j])) % q,) for j in (2, 3, 4)}
    return DownloadBundle(y={2: proj[2]}, z={3: proj[3], 4: proj[4]})


def repair_fixture_from_bundle(code: MsrCode, bundle: DownloadBundle) -> NodeShard:
    q = code.q
    s2 = bundle.y[2][0]
    # A[3,2] = A[4,2] = I, so the interference in both parity downloads is v^T x_2
    cleaned = [(bundle.z[3][0] - s2) % q, (bundle.z[4][0] - s2) % q]
    rows = [code.coding[(j, 1)].apply(FIXTURE_VECTOR) for j in (3, 4)]
    x1 = solve(FieldMatrix(q, rows), FieldMatrix.column_vector(q, cleaned))
    return NodeShard(1, x1.column(0))


def repair_fixture_4_2(shards: Sequence[NodeShard], code: MsrCode | None = None) -> NodeShard:
    from .code import fixture_4_2

    code = code or fixture_4_2()
    return repair_fixture_from_bundle(code, fixture_downloads(shards))


# -- bandwidth accounting ----------------------------------------------------

@dataclass(frozen=True)
class BandwidthReport:
    n: int
    k: int
    delta: int
    M: int
    nominal_B: int
    effective_B: int

    @property
    def nominal_ratio(self) -> Fraction:
        return Fraction(self.nominal_B, self.M)

    @property
    def effective_ratio(self) -> Fraction:
        return Fraction(self.effective_B, self.M)

    @property
    def cutset_ratio(self) -> Fraction:
        return Fraction(self.n - 1, self.k * (self.n - self.k))

    @property
    def excess_factor(self) -> Fraction:
        gamma = (self.n - self.k) * (self.k - 1)
        return Fraction(self.delta + 1, self.delta) ** gamma

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "delta": self.delta,
            "M": self.M,
            "nominal_B": self.nominal_B,
            "effective_B": self.effective_B,
            "nominal_ratio": str(self.nominal_ratio),
            "cutset_ratio": str(self.cutset_ratio),
            "excess_factor": str(self.excess_factor),
        }


def bandwidth_report(params: CodeParams) -> BandwidthReport:
    return BandwidthReport(
        n=params.n,
        k=params.k,
        delta=params.delta,
        M=params.file_size,
        nominal_B=params.nominal_bandwidth,
        effective_B=params.effective_bandwidth,
    )
