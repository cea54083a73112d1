"""``msrcode`` command line: construct, encode, decode, repair, verify, bench.

Exit codes: 0 success, 1 usage, 2 verification failure, 3 construction or
repair infeasible, 4 I/O or format error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .cluster import Cluster, packing_width, unpack_bytes
from .code import CodeParams, construct, mds_check_fast, mds_check_naive, reconstruct
from .errors import (
    ConfigError,
    ConstructionFailed,
    DigestMismatch,
    FormatError,
    InsufficientShards,
    ParamError,
    RepairInfeasible,
    StateError,
)
from .field import DEFAULT_Q
from .formats import ShardHeader, load_descriptor, read_shard, save_descriptor, shard_filename, write_shard
from .repair import bandwidth_report, build_for_node, check_alignment

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("msrcode")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt_ratio(r: Fraction) -> str:
    return f"{r.numerator}/{r.denominator} ({float(r):.6f})"


def _print_params(params: CodeParams, out):
    rep = bandwidth_report(params)
    print(f"n={params.n} k={params.k} delta={params.delta} q={params.q}", file=out)
    print(f"gamma={params.gamma} M={params.file_size} per_node={params.per_node} "
          f"beta={params.beta} sub_beta={params.sub_beta}", file=out)
    print(f"nominal_B={rep.nominal_B} effective_B={rep.effective_B}", file=out)
    print(f"nominal_ratio={fmt_ratio(rep.nominal_ratio)} cutset_ratio={fmt_ratio(rep.cutset_ratio)}", file=out)


def cmd_construct(args, out) -> int:
    if args.symbol_bytes is not None or args.q <= 1 << 56:
        packing_width(args.q, args.symbol_bytes)
    code = construct(args.n, args.k, args.delta, args.q, args.seed, args.max_attempts)
    desc = save_descriptor(args.out, code, args.symbol_bytes)
    _print_params(code.params, out)
    print(f"attempts_used={code.attempts_used} digest={desc.matrix_digest}", file=out)
    return EXIT_OK


def cmd_encode(args, out) -> int:
    desc, code = load_descriptor(args.descriptor)
    data = Path(args.input).read_bytes()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cluster = Cluster(code, symbol_bytes=desc.symbol_bytes)
    cf = cluster.ingest(data)
    for j in range(1, code.params.n + 1):
        write_shard(out_dir / shard_filename(j), cluster.header_for(j),
                    [s.data for s in cluster.read_shard(j)])
    print(f"wrote {code.params.n} shards to {out_dir}: {cf.chunk_count} chunks, "
          f"{len(data)} bytes, padding {cf.padding}", file=out)
    return EXIT_OK


def _read_shards(paths, code):
    streams: dict[int, list] = {}
    headers: list[ShardHeader] = []
    for path in paths:
        header, chunks = read_shard(path)
        header.check_against(code.params)
        if header.node_id in streams:
            raise FormatError(f"duplicate shard for node {header.node_id}")
        streams[header.node_id] = chunks
        headers.append(header)
    if not headers:
        raise FormatError("no shard files given")
    first = headers[0]
    for h in headers[1:]:
        if (h.chunk_count, h.original_length) != (first.chunk_count, first.original_length):
            raise FormatError("shard headers disagree on chunk_count/original_length")
    return streams, first


def cmd_decode(args, out) -> int:
    desc, code = load_descriptor(args.descriptor)
    streams, first = _read_shards(args.shards, code)
    k = code.params.k
    if len(streams) < k:
        raise InsufficientShards(f"got {len(streams)} shards, need {k}")
    chosen = sorted(streams)[:k]
    chunks = [reconstruct(code, [streams[j][c] for j in chosen]) for c in range(first.chunk_count)]
    width = packing_width(code.params.q, desc.symbol_bytes)
    data = unpack_bytes(chunks, width, first.original_length)
    Path(args.out).write_bytes(data)
    print(f"decoded {len(data)} bytes from nodes {chosen}", file=out)
    return EXIT_OK


def cmd_repair(args, out) -> int:
    desc, code = load_descriptor(args.descriptor)
    n = code.params.n
    streams, first = _read_shards(args.shards, code)
    expected = set(range(1, n + 1)) - {args.failed}
    if not 1 <= args.failed <= n or set(streams) != expected:
        raise ParamError(f"repair of node {args.failed} needs shards for exactly {sorted(expected)}, "
                         f"got {sorted(streams)}")
    cluster = Cluster.from_streams(code, streams, first.chunk_count, first.original_length,
                                   desc.symbol_bytes)
    outcome = cluster.repair_node()
    write_shard(args.out, cluster.header_for(args.failed), [s.data for s in outcome.shards])
    rep = outcome.report
    print(f"repaired node {args.failed} ({first.chunk_count} chunks) -> {args.out}", file=out)
    print(f"measured_symbols={outcome.measured_symbols}", file=out)
    print(f"effective_B={rep.effective_B} per chunk", file=out)
    print(f"nominal_B={rep.nominal_B} per chunk", file=out)
    print(f"nominal_ratio={fmt_ratio(rep.nominal_ratio)}", file=out)
    print(f"cutset_ratio={fmt_ratio(rep.cutset_ratio)}", file=out)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    try:
        desc, code = load_descriptor(args.descriptor)
    except DigestMismatch as exc:
        print(f"digest: FAIL ({exc})", file=out)
        return EXIT_VERIFY
    print("digest: ok", file=out)
    failures = []

    def report(name, ok):
        print(f"{name}: {'ok' if ok else 'FAIL'}", file=out)
        if not ok:
            failures.append(name)

    fast = mds_check_fast(code)
    report("mds_fast", fast)
    if args.naive_oracle:
        naive = mds_check_naive(code)
        report("mds_naive", naive)
        report("fast==naive", fast == naive)
    for node in range(1, code.params.n + 1):
        try:
            rv = build_for_node(code, node)
        except RepairInfeasible:
            report(f"repair_rank[node={node}]", False)
            continue
        report(f"alignment[node={node}]", check_alignment(rv))
    if failures:
        print(f"verification failed: {', '.join(failures)}", file=out)
        return EXIT_VERIFY
    return EXIT_OK


BENCH_COLUMNS = ["delta", "M", "beta", "nominal_B", "effective_B", "nominal_ratio",
                 "nominal_ratio_decimal", "cutset_ratio", "excess_factor"]


def bench_rows(n: int, k: int, deltas, q: int = DEFAULT_Q, warn=None):
    rows = []
    for d in deltas:
        try:
            params = CodeParams(n, k, d, q)
        except ParamError as exc:
            if warn:
                warn(f"skipping delta={d}: {exc}")
            continue
        rep = bandwidth_report(params)
        rows.append({
            "delta": d,
            "M": rep.M,
            "beta": params.beta,
            "nominal_B": rep.nominal_B,
            "effective_B": rep.effective_B,
            "nominal_ratio": f"{rep.nominal_ratio.numerator}/{rep.nominal_ratio.denominator}",
            "nominal_ratio_decimal": f"{float(rep.nominal_ratio):.6f}",
            "cutset_ratio": f"{rep.cutset_ratio.numerator}/{rep.cutset_ratio.denominator}",
            "excess_factor": f"{rep.excess_factor.numerator}/{rep.excess_factor.denominator}",
        })
    return rows


def cmd_bench(args, out) -> int:
    deltas = sorted(set(args.delta_list))
    if args.n <= args.k or args.k < 2:
        raise ParamError(f"need 2 <= k < n, got n={args.n}, k={args.k}")
    rows = bench_rows(args.n, args.k, deltas, args.q,
                      warn=lambda m: print(f"warning: {m}", file=sys.stderr))
    if args.format == "csv":
        w = csv.DictWriter(out, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    else:
        widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) if rows else len(c) for c in BENCH_COLUMNS}
        print("  ".join(c.rjust(widths[c]) for c in BENCH_COLUMNS), file=out)
        for r in rows:
            print("  ".join(str(r[c]).rjust(widths[c]) for c in BENCH_COLUMNS), file=out)
    return EXIT_OK


def _delta_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("deltas must be integers >= 1")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="msrcode", description="Exact-repair MSR codes via interference alignment.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("construct", help="sample and verify a code, write its descriptor")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=int, default=1)
    p.add_argument("--q", type=int, default=DEFAULT_Q)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-attempts", type=int, default=8)
    p.add_argument("--symbol-bytes", type=int, default=None,
                   help="bytes packed per field symbol (default 7, needs q > 2^56)")
    p.add_argument("--out", required=True, help="descriptor path")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("encode", help="split a file into n shard files")
    p.add_argument("descriptor")
    p.add_argument("input")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="rebuild a file from any k shard files")
    p.add_argument("descriptor")
    p.add_argument("shards", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("repair", help="regenerate one node from the other n-1 shards")
    p.add_argument("descriptor")
    p.add_argument("shards", nargs="+")
    p.add_argument("--failed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("verify", help="check MDS and alignment properties of a descriptor")
    p.add_argument("descriptor")
    p.add_argument("--naive-oracle", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="bandwidth ratio table over several deltas")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta-list", type=_delta_list, default=[1, 2, 3, 5, 10])
    p.add_argument("--q", type=int, default=DEFAULT_Q)
    p.add_argument("--format", choices=["csv", "table"], default="csv")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except (ParamError, StateError, InsufficientShards) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DigestMismatch as exc:
        print(f"digest error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ConstructionFailed as exc:
        print(f"construction failed after {exc.attempts} attempts: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RepairInfeasible as exc:
        print(f"repair infeasible after {exc.attempts} attempts: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, FormatError, ConfigError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
