"""On-disk formats: JSON code descriptors and binary ``.msra`` shard files.

Shard file layout (all integers little-endian)::

    magic "MSRA" | version u8 = 1 | q u64 | n u16 | k u16 | delta u32
    | node_id u16 | chunk_count u32 | original_length u64
    | chunk_count * (M/k) symbols, u64 each
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from .code import CodeParams, MsrCode, NodeShard, regenerate
from .errors import DigestMismatch, FormatError, ParamError

MAGIC = b"MSRA"
SHARD_VERSION = 1
DESCRIPTOR_VERSION = 1
_HEADER = struct.Struct("<4sBQHHIHIQ")
HEADER_SIZE = _HEADER.size


@dataclass(frozen=True)
class ShardHeader:
    q: int
    n: int
    k: int
    delta: int
    node_id: int
    chunk_count: int
    original_length: int

    @property
    def params(self) -> CodeParams:
        return CodeParams(self.n, self.k, self.delta, self.q)

    def check_against(self, params: CodeParams):
        mine = (self.q, self.n, self.k, self.delta)
        theirs = (params.q, params.n, params.k, params.delta)
        if mine != theirs:
            raise FormatError(
                f"shard for node {self.node_id} has (q, n, k, delta)={mine}, descriptor says {theirs}"
            )


def pack_shard(header: ShardHeader, chunks: Sequence[Sequence[int]]) -> bytes:
    if len(chunks) != header.chunk_count:
        raise FormatError("chunk_count does not match the number of chunks")
    out = bytearray(
        _HEADER.pack(
            MAGIC, SHARD_VERSION, header.q, header.n, header.k, header.delta,
            header.node_id, header.chunk_count, header.original_length,
        )
    )
    for chunk in chunks:
        out += struct.pack(f"<{len(chunk)}Q", *chunk)
    return bytes(out)


def unpack_shard(blob: bytes) -> tuple[ShardHeader, list[NodeShard]]:
    if len(blob) < HEADER_SIZE:
        raise FormatError("shard file truncated before end of header")
    magic, version, q, n, k, delta, node_id, chunk_count, original_length = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != SHARD_VERSION:
        raise FormatError(f"unsupported shard version {version}")
    header = ShardHeader(q, n, k, delta, node_id, chunk_count, original_length)
    try:
        per_node = header.params.per_node
    except ParamError as exc:
        raise FormatError(f"shard header has invalid parameters: {exc}") from exc
    body = blob[HEADER_SIZE:]
    if len(body) != chunk_count * per_node * 8:
        raise FormatError(
            f"shard body is {len(body)} bytes, expected {chunk_count * per_node * 8}"
        )
    symbols = struct.unpack(f"<{chunk_count * per_node}Q", body)
    for v in symbols:
        if v >= q:
            raise FormatError("symbol out of field range")
    chunks = [NodeShard(node_id, symbols[c * per_node:(c + 1) * per_node]) for c in range(chunk_count)]
    return header, chunks


def write_shard(path, header: ShardHeader, chunks: Sequence[Sequence[int]]):
    Path(path).write_bytes(pack_shard(header, chunks))


def read_shard(path) -> tuple[ShardHeader, list[NodeShard]]:
    return unpack_shard(Path(path).read_bytes())


def shard_filename(node_id: int) -> str:
    return f"shard_{node_id}.msra"


@dataclass(frozen=True)
class CodeDescriptor:
    format_version: int
    n: int
    k: int
    delta: int
    q: int
    seed: int
    attempts_used: int
    matrix_digest: str
    symbol_bytes: int | None = None

    @classmethod
    def from_code(cls, code: MsrCode, symbol_bytes: int | None = None) -> CodeDescriptor:
        if code.seed is None:
            raise ParamError("only seeded codes can be described; hand-built codes have no seed")
        p = code.params
        return cls(DESCRIPTOR_VERSION, p.n, p.k, p.delta, p.q, code.seed,
                   code.attempts_used, code.digest(), symbol_bytes)

    def to_json(self) -> str:
        d = asdict(self)
        if d["symbol_bytes"] is None:
            del d["symbol_bytes"]
        return json.dumps(d, indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> CodeDescriptor:
        try:
            d = json.loads(text)
            desc = cls(
                format_version=int(d["format_version"]),
                n=int(d["n"]),
                k=int(d["k"]),
                delta=int(d["delta"]),
                q=int(d["q"]),
                seed=int(d["seed"]),
                attempts_used=int(d["attempts_used"]),
                matrix_digest=str(d["matrix_digest"]),
                symbol_bytes=None if d.get("symbol_bytes") is None else int(d["symbol_bytes"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed code descriptor: {exc}") from exc
        if desc.format_version != DESCRIPTOR_VERSION:
            raise FormatError(f"unsupported descriptor version {desc.format_version}")
        return desc

    def load_code(self) -> MsrCode:
        """Regenerate matrices from the seed and check them against the digest."""
        code = regenerate(CodeParams(self.n, self.k, self.delta, self.q), self.seed, self.attempts_used)
        if code.digest() != self.matrix_digest:
            raise DigestMismatch(
                f"matrix digest mismatch: descriptor {self.matrix_digest[:16]}..., "
                f"regenerated {code.digest()[:16]}..."
            )
        return code


def save_descriptor(path, code: MsrCode, symbol_bytes: int | None = None) -> CodeDescriptor:
    desc = CodeDescriptor.from_code(code, symbol_bytes)
    Path(path).write_text(desc.to_json())
    return desc


def load_descriptor(path) -> tuple[CodeDescriptor, MsrCode]:
    desc = CodeDescriptor.from_json(Path(path).read_text())
    return desc, desc.load_code()
