"""In-process storage cluster: placement, failure injection, metered repair."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .code import FileVector, MsrCode, NodeShard, encode, reconstruct
from .errors import ConfigError, InsufficientShards, ParamError, StateError
from .formats import ShardHeader, read_shard, shard_filename, write_shard
from .repair import (
    BandwidthReport,
    RepairVectors,
    bandwidth_report,
    build_for_node,
    extract_downloads,
    fixture_downloads,
    repair_fixture_from_bundle,
    repair_from_bundle,
)

log = logging.getLogger(__name__)

DEFAULT_SYMBOL_BYTES = 7


def packing_width(q: int, symbol_bytes: int | None = None) -> int:
    """Bytes per symbol; every packed value must stay below ``q``."""
    width = DEFAULT_SYMBOL_BYTES if symbol_bytes is None else symbol_bytes
    if width < 1 or (1 << (8 * width)) >= q:
        raise ConfigError(
            f"cannot pack {width} bytes per symbol into GF({q}); "
            "choose a larger q or configure a smaller symbol width"
        )
    return width


def pack_bytes(data: bytes, width: int, chunk_symbols: int) -> tuple[list[FileVector], int]:
    """Split ``data`` into zero-padded chunks of ``chunk_symbols`` symbols."""
    if not data:
        return [], 0
    chunk_bytes = width * chunk_symbols
    n_chunks = -(-len(data) // chunk_bytes)
    padding = n_chunks * chunk_bytes - len(data)
    padded = data + bytes(padding)
    chunks = []
    for c in range(n_chunks):
        base = c * chunk_bytes
        chunks.append(FileVector(
            int.from_bytes(padded[base + s * width:base + (s + 1) * width], "little")
            for s in range(chunk_symbols)
        ))
    return chunks, padding


def unpack_bytes(chunks: Sequence[FileVector], width: int, original_length: int) -> bytes:
    out = bytearray()
    for chunk in chunks:
        for v in chunk.symbols:
            out += v.to_bytes(width, "little")
    if len(out) < original_length:
        raise ParamError("not enough symbols for the recorded original length")
    return bytes(out[:original_length])


@dataclass(frozen=True)
class ChunkedFile:
    """Ingested content; ``symbol_bytes`` is None when raw symbols were ingested."""

    original_length: int
    chunks: tuple[FileVector, ...]
    padding: int
    symbol_bytes: int | None = DEFAULT_SYMBOL_BYTES

    @property
    def chunk_count(self) -> int:
        return len(self.chunks)


@dataclass(frozen=True)
class RepairOutcome:
    node_id: int
    shards: tuple[NodeShard, ...]
    report: BandwidthReport
    measured_symbols: int
    per_helper: dict[int, int] = field(default_factory=dict)
    expected_symbols: int = 0


class Cluster:
    """``n`` node slots holding one shard stream each; at most one slot failed."""

    def __init__(self, code: MsrCode, storage_dir=None, symbol_bytes: int | None = None):
        self.code = code
        self.params = code.params
        self.symbol_bytes = symbol_bytes
        self.storage_dir = Path(storage_dir) if storage_dir is not None else None
        self.nodes: list[list[NodeShard] | None] = [[] for _ in range(self.params.n)]
        self.file: ChunkedFile | None = None
        self.chunk_count = 0
        self.metered_downloads: list[int] = []
        self._vectors: dict[int, RepairVectors] = {}
        if self.storage_dir is not None:
            self.storage_dir.mkdir(parents=True, exist_ok=True)

    # -- placement ----------------------------------------------------------

    def ingest(self, data: bytes) -> ChunkedFile:
        width = packing_width(self.params.q, self.symbol_bytes)
        chunks, padding = pack_bytes(bytes(data), width, self.params.file_size)
        return self._place(ChunkedFile(len(data), tuple(chunks), padding, width))

    def ingest_symbols(self, symbols: Sequence[int]) -> ChunkedFile:
        """Place raw field symbols; for small fields where byte packing is impossible."""
        q, m = self.params.q, self.params.file_size
        symbols = list(symbols)
        if any(not 0 <= v < q for v in symbols):
            raise ParamError(f"symbols must lie in [0, {q})")
        n_chunks = -(-len(symbols) // m)
        padding = n_chunks * m - len(symbols)
        symbols += [0] * padding
        chunks = tuple(FileVector(symbols[c * m:(c + 1) * m]) for c in range(n_chunks))
        return self._place(ChunkedFile(len(symbols) - padding, chunks, padding, None))

    def _place(self, cf: ChunkedFile) -> ChunkedFile:
        if self.failed_node() is not None:
            raise StateError("cannot ingest while a node is failed")
        streams: list[list[NodeShard]] = [[] for _ in range(self.params.n)]
        for chunk in cf.chunks:
            for shard in encode(self.code, chunk):
                streams[shard.node_id - 1].append(shard)
        self.nodes = streams
        self.file = cf
        self.chunk_count = cf.chunk_count
        for j in range(1, self.params.n + 1):
            self._persist(j)
        return cf

    # -- state --------------------------------------------------------------

    def _check_id(self, node_id: int):
        if not 1 <= node_id <= self.params.n:
            raise StateError(f"no node {node_id} (n={self.params.n})")

    def failed_node(self) -> int | None:
        for j, slot in enumerate(self.nodes, start=1):
            if slot is None:
                return j
        return None

    def alive(self) -> list[int]:
        return [j for j, slot in enumerate(self.nodes, start=1) if slot is not None]

    def read_shard(self, node_id: int) -> list[NodeShard]:
        self._check_id(node_id)
        slot = self.nodes[node_id - 1]
        if slot is None:
            raise StateError(f"node {node_id} is unavailable")
        return list(slot)

    def fail_node(self, node_id: int):
        self._check_id(node_id)
        current = self.failed_node()
        if current is not None:
            raise StateError(f"node {current} already failed; single-failure model")
        self.nodes[node_id - 1] = None
        if self.storage_dir is not None:
            (self.storage_dir / shard_filename(node_id)).unlink(missing_ok=True)

    # -- repair -------------------------------------------------------------

    def _is_fixture_repair(self, node_id: int) -> bool:
        return self.code.label == "fixture_4_2" and node_id == 1

    def repair_vectors(self, node_id: int) -> RepairVectors:
        # coding matrices are per code, not per chunk, so one build serves every chunk
        if node_id not in self._vectors:
            self._vectors[node_id] = build_for_node(self.code, node_id)
        return self._vectors[node_id]

    def repair_node(self) -> RepairOutcome:
        f = self.failed_node()
        if f is None:
            raise StateError("no failed node to repair")
        chunk_count = self.chunk_count
        helpers = [j for j in range(1, self.params.n + 1) if j != f]
        fixture = self._is_fixture_repair(f)
        rv = None if fixture else self.repair_vectors(f)
        measured = 0
        per_helper: dict[int, int] = {}
        repaired = []
        for c in range(chunk_count):
            shards = [self.nodes[j - 1][c] for j in helpers]
            if fixture:
                bundle = fixture_downloads(shards)
                shard = repair_fixture_from_bundle(self.code, bundle)
            else:
                bundle = extract_downloads(self.code, rv, shards)
                shard = repair_from_bundle(rv, bundle)
            measured += bundle.symbol_count
            for node, cnt in bundle.per_helper().items():
                per_helper[node] = per_helper.get(node, 0) + cnt
            repaired.append(shard)
        per_chunk = 3 if fixture else self.params.effective_bandwidth
        expected = chunk_count * per_chunk
        if measured != expected:
            raise AssertionError(f"metered {measured} symbols, theory says {expected}")
        self.metered_downloads.append(measured)
        self.nodes[f - 1] = repaired
        self._persist(f)
        log.info("repaired node %d: %d symbols over %d chunks", f, measured, chunk_count)
        return RepairOutcome(f, tuple(repaired), bandwidth_report(self.params), measured,
                             per_helper, expected)

    # -- retrieval ----------------------------------------------------------

    def extract_chunks(self, node_ids: Sequence[int] | None = None) -> list[FileVector]:
        alive = self.alive()
        if node_ids is None:
            if len(alive) < self.params.k:
                raise InsufficientShards(f"only {len(alive)} alive nodes, need {self.params.k}")
            node_ids = alive[: self.params.k]
        node_ids = list(node_ids)
        if len(set(node_ids)) != self.params.k:
            raise InsufficientShards(f"need exactly k={self.params.k} distinct nodes, got {node_ids}")
        for j in node_ids:
            self._check_id(j)
            if self.nodes[j - 1] is None:
                raise InsufficientShards(f"node {j} is not alive")
        streams = {j: self.nodes[j - 1] for j in node_ids}
        return [
            reconstruct(self.code, [streams[j][c] for j in node_ids])
            for c in range(self.chunk_count)
        ]

    def extract(self, node_ids: Sequence[int] | None = None) -> bytes:
        if self.file is None:
            return b""
        if self.file.symbol_bytes is None:
            raise ConfigError("cluster holds raw symbols; use extract_symbols()")
        return unpack_bytes(self.extract_chunks(node_ids), self.file.symbol_bytes, self.file.original_length)

    def extract_symbols(self, node_ids: Sequence[int] | None = None) -> list[int]:
        if self.file is None:
            return []
        out = [v for ch in self.extract_chunks(node_ids) for v in ch.symbols]
        if self.file.symbol_bytes is None:
            return out[: self.file.original_length]
        return out

    # -- persistence --------------------------------------------------------

    def header_for(self, node_id: int) -> ShardHeader:
        p = self.params
        cf = self.file
        return ShardHeader(p.q, p.n, p.k, p.delta, node_id,
                           self.chunk_count, cf.original_length if cf else 0)

    def _persist(self, node_id: int):
        if self.storage_dir is None or self.file is None:
            return
        stream = self.nodes[node_id - 1]
        write_shard(self.storage_dir / shard_filename(node_id), self.header_for(node_id),
                    [s.data for s in stream])

    @classmethod
    def from_streams(cls, code: MsrCode, streams: dict[int, list[NodeShard]], chunk_count: int,
                     original_length: int, symbol_bytes: int | None = None,
                     storage_dir=None) -> Cluster:
        """Assemble a cluster from shard streams; absent node ids are marked failed."""
        cl = cls(code, storage_dir, symbol_bytes)
        missing = [j for j in range(1, code.params.n + 1) if j not in streams]
        if len(missing) > 1:
            raise StateError(f"nodes {missing} missing; single-failure model")
        for j in range(1, code.params.n + 1):
            stream = streams.get(j)
            if stream is not None and len(stream) != chunk_count:
                raise StateError(f"node {j} holds {len(stream)} chunks, expected {chunk_count}")
            cl.nodes[j - 1] = list(stream) if stream is not None else None
        width = packing_width(code.params.q, symbol_bytes)
        cl.chunk_count = chunk_count
        chunks = tuple(cl.extract_chunks()) if cl.alive() else ()
        padding = chunk_count * code.params.file_size * width - original_length
        cl.file = ChunkedFile(original_length, chunks, padding, width)
        return cl

    @classmethod
    def load(cls, code: MsrCode, storage_dir, symbol_bytes: int | None = None) -> Cluster:
        """Rebuild a cluster from persisted shards; a missing file marks that node failed."""
        storage_dir = Path(storage_dir)
        streams, headers = {}, []
        for j in range(1, code.params.n + 1):
            path = storage_dir / shard_filename(j)
            if path.exists():
                header, chunks = read_shard(path)
                header.check_against(code.params)
                headers.append(header)
                streams[j] = chunks
        if not headers:
            raise StateError("no shard files found")
        first = headers[0]
        if any((h.chunk_count, h.original_length) != (first.chunk_count, first.original_length)
               for h in headers):
            raise StateError("shard files disagree on chunk_count/original_length")
        return cls.from_streams(code, streams, first.chunk_count, first.original_length,
                                symbol_bytes, storage_dir)
