import os
import random

import pytest
from hypothesis import given, settings, strategies as st

from msrcode.cluster import Cluster, pack_bytes, packing_width, unpack_bytes
from msrcode.code import construct, fixture_4_2
from msrcode.errors import ConfigError, InsufficientShards, RepairInfeasible, StateError
from msrcode.formats import read_shard, shard_filename

Q = 2**61 - 1


@pytest.fixture(scope="module")
def code():
    return construct(4, 2, 1, Q, seed=5)


def test_ingest_empty(code):
    cl = Cluster(code)
    cf = cl.ingest(b"")
    assert cf.chunk_count == 0 and cf.padding == 0
    assert cl.extract() == b""


def test_ingest_exact_chunk(code):
    cl = Cluster(code)
    cf = cl.ingest(bytes(range(28)))
    assert cf.chunk_count == 1 and cf.padding == 0
    assert len(cf.chunks[0]) == 4


def test_ingest_one_byte(code):
    cf = Cluster(code).ingest(b"\x07")
    assert cf.chunk_count == 1
    assert cf.padding == 7 * 4 - 1
    assert cf.chunks[0].symbols == (7, 0, 0, 0)


def test_packing_width():
    assert packing_width(Q) == 7
    with pytest.raises(ConfigError):
        packing_width(5)
    with pytest.raises(ConfigError):
        packing_width(Q, 8)
    assert packing_width(65537, 2) == 2
    with pytest.raises(ConfigError):
        Cluster(fixture_4_2()).ingest(b"x")


def test_pack_round_trip():
    r = random.Random(0)
    for n in (0, 1, 6, 7, 8, 55, 56, 57, 200):
        data = r.randbytes(n)
        chunks, pad = pack_bytes(data, 7, 8)
        assert unpack_bytes(chunks, 7, n) == data
        assert all(v < 2**56 for c in chunks for v in c.symbols)


def test_fail_node_errors(code):
    cl = Cluster(code)
    cl.ingest(b"hello world")
    cl.fail_node(1)
    with pytest.raises(StateError):
        cl.fail_node(2)
    with pytest.raises(StateError):
        cl.read_shard(1)
    with pytest.raises(StateError):
        Cluster(code).fail_node(5)
    with pytest.raises(StateError):
        Cluster(code).repair_node()


def test_repair_metering_systematic(code):
    cl = Cluster(code)
    data = os.urandom(28)
    cl.ingest(data)
    before = [cl.read_shard(j) for j in range(1, 5)]
    cl.fail_node(1)
    out = cl.repair_node()
    assert out.measured_symbols == 6
    assert out.per_helper == {2: 4, 3: 1, 4: 1}
    assert [cl.read_shard(j) for j in range(1, 5)] == before
    assert cl.extract() == data


def test_fixture_cluster_node1():
    cl = Cluster(fixture_4_2())
    cl.ingest_symbols([1, 0, 0, 1, 4, 3, 2, 1])
    cl.fail_node(1)
    out = cl.repair_node()
    assert out.measured_symbols == 3 * 2
    assert cl.extract_symbols([3, 4]) == [1, 0, 0, 1, 4, 3, 2, 1]


def test_fixture_cluster_other_nodes():
    cl = Cluster(fixture_4_2())
    cl.ingest_symbols([1, 2, 3])
    for node in (3, 4):
        cl.fail_node(node)
        assert cl.repair_node().measured_symbols == 6
    assert cl.extract_symbols([3, 4]) == [1, 2, 3]
    with pytest.raises(ConfigError):
        cl.extract()
    # A[3,2] = A[4,2] = I makes the generic desired-signal matrix rank 1 for node 2
    cl.fail_node(2)
    with pytest.raises(RepairInfeasible):
        cl.repair_node()
    assert cl.failed_node() == 2


def test_extract_subsets_after_repair():
    code = construct(5, 3, 1, Q, seed=8)
    cl = Cluster(code)
    data = random.Random(1).randbytes(300)
    cl.ingest(data)
    for node in range(1, 6):
        cl.fail_node(node)
        with pytest.raises(InsufficientShards):
            cl.extract([node, 1 if node != 1 else 2, 3 if node != 3 else 4])
        out = cl.repair_node()
        assert out.measured_symbols == out.expected_symbols
        for ids in ([1, 2, 3], [3, 4, 5], [node, *[j for j in (1, 4, 5) if j != node][:2]]):
            assert cl.extract(ids) == data


def test_insufficient_alive(code):
    cl = Cluster(code)
    cl.ingest(b"abc")
    cl.fail_node(2)
    with pytest.raises(InsufficientShards):
        cl.extract([1])
    assert cl.extract() == b"abc"


def test_persistence(tmp_path, code):
    data = random.Random(2).randbytes(100)
    cl = Cluster(code, storage_dir=tmp_path)
    cl.ingest(data)
    assert sorted(p.name for p in tmp_path.iterdir()) == [shard_filename(j) for j in range(1, 5)]
    original = (tmp_path / shard_filename(3)).read_bytes()
    cl.fail_node(3)
    assert not (tmp_path / shard_filename(3)).exists()
    reloaded = Cluster.load(code, tmp_path)
    assert reloaded.failed_node() == 3
    assert reloaded.extract() == data
    reloaded.repair_node()
    assert (tmp_path / shard_filename(3)).read_bytes() == original
    header, chunks = read_shard(tmp_path / shard_filename(3))
    assert header.original_length == 100 and header.chunk_count == 4


_prop_code = construct(5, 3, 1, Q, seed=17)


@settings(max_examples=25, deadline=None)
@given(st.binary(max_size=400), st.integers(1, 5), st.integers(0, 2**32))
def test_any_failure_round_trip(data, node, seed):
    cl = Cluster(_prop_code)
    cl.ingest(data)
    cl.fail_node(node)
    cl.repair_node()
    ids = random.Random(seed).sample(range(1, 6), 3)
    assert cl.extract(ids) == data
