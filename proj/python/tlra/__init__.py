"""Sketching-based low-rank approximation of third-order tensors.

Tensors are numpy arrays of shape (n1, n2, n3); factorizations are (U, V, W)
triples with A ~ sum_r U[:, r] x V[:, r] x W[:, r].
"""

from ._tlra import (
    DegenerateInputError,
    InvalidParams,
    NumericalError,
    ParseError,
    ShapeError,
    Stream,
    TlraError,
    cur,
    curt,
    decompose,
    distsim,
    l1_decompose,
    leverage_scores,
    planted,
    read_tns,
    residual,
    set_reproducible,
    write_tns,
)

__all__ = [
    "DegenerateInputError",
    "InvalidParams",
    "NumericalError",
    "ParseError",
    "ShapeError",
    "Stream",
    "TlraError",
    "cur",
    "curt",
    "decompose",
    "distsim",
    "l1_decompose",
    "leverage_scores",
    "planted",
    "read_tns",
    "residual",
    "set_reproducible",
    "write_tns",
]
