"""Tensor-network engine: MPS/MPO, two-site DMRG and TDVP."""

from .dmrg import DMRGResult, TruncationPolicy, dmrg_ground_state
from .measure import effective_local_objective, expectation, mpo_expectation, mpo_variance, reduce_to_qubits
from .mpo import MatrixProductOperator, build_mpo
from .state import (
    MatrixProductState,
    apply_local_gate,
    dense_to_mps,
    fidelity,
    mps_to_dense,
    overlap,
    read_mps,
    write_mps,
)
from .tdvp import TDVPEngine, tdvp_evolve

__all__ = [
    "DMRGResult", "TruncationPolicy", "dmrg_ground_state", "effective_local_objective", "expectation",
    "mpo_expectation", "mpo_variance", "reduce_to_qubits", "MatrixProductOperator", "build_mpo",
    "MatrixProductState", "apply_local_gate", "dense_to_mps", "fidelity", "mps_to_dense", "overlap",
    "read_mps", "write_mps", "TDVPEngine", "tdvp_evolve",
]
