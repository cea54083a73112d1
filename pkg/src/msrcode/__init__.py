"""Exact-repair minimum-storage regenerating codes over GF(q).

Diagonal random coding matrices give an (n, k) MDS code; any single failed
node is regenerated exactly with interference-aligned repair vectors whose
bandwidth per stored symbol tends to the cut-set value (n-1)/(k(n-k)) as the
alignment parameter ``delta`` grows.
"""

from .cluster import ChunkedFile, Cluster, RepairOutcome
from .code import (
    CodeParams,
    FileVector,
    MsrCode,
    NodeShard,
    construct,
    encode,
    fixture_4_2,
    mds_check_fast,
    mds_check_naive,
    reconstruct,
)
from .errors import (
    ConfigError,
    ConstructionFailed,
    CorruptCodeError,
    DigestMismatch,
    FormatError,
    InsufficientShards,
    MsrError,
    ParamError,
    RepairInfeasible,
    SingularMatrix,
    StateError,
)
from .field import DEFAULT_Q, FieldElement, PrimeField, SeededRng
from .linalg import DiagonalMatrix, FieldMatrix
from .repair import (
    BandwidthReport,
    DownloadBundle,
    RepairVectors,
    bandwidth_report,
    build_parity_repair_vectors,
    build_repair_vectors,
    check_alignment,
    extract_downloads,
    repair_fixture_4_2,
    repair_node,
    repair_parity,
    repair_systematic,
    transform_for_parity,
)

__version__ = "0.1.0"
