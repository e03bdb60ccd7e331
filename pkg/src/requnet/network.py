"""Explicit feed-forward networks with the rectified-quadratic activation.

A network is an ordered sequence of affine layers (A_k, b_k).  Evaluation
applies sigma2(x) = max(0, x)^2 componentwise after every layer except the
last, which stays affine.  All constructions in this package emit weights
whose zero entries are exact, so complexity accounting counts bit-exact
nonzeros, never thresholded ones.

Weight matrices are stored in CSR sparse form (row-major).  The networks
built by the matrix-inversion and PDE modules have interior layers whose
dense size is orders of magnitude larger than their nonzero count, so a
dense representation is not viable at the sizes the test grids exercise;
CSR keeps evaluation and nonzero accounting exact and cheap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, EmptyNetwork, NonFiniteEntry

__all__ = [
    "Network",
    "ComplexityReport",
    "requ",
    "make_network",
    "realize",
    "realize_batch",
    "complexity",
    "save_network",
    "load_network",
]


def requ(x):
    """Rectified quadratic unit sigma2(x) = (max(0, x))^2, componentwise."""
    return np.square(np.maximum(x, 0.0))


def _freeze(arr):
    arr.setflags(write=False)
    return arr


def _as_csr(matrix):
    if sp.issparse(matrix):
        A = matrix.tocsr().astype(np.float64, copy=False)
    else:
        A = sp.csr_matrix(np.asarray(matrix, dtype=np.float64))
    A.sort_indices()
    return A


class Network:
    """Immutable sequence of affine layers (A_k, b_k).

    A_k is N_k x N_{k-1} (CSR), b_k has length N_k.  Instances are
    validated on construction and safe to share across threads; all
    evaluation is pure.
    """

    __slots__ = ("layers", "input_dim", "output_dim")

    def __init__(self, layers):
        checked = []
        prev_rows = None
        for A, b in layers:
            A = _as_csr(A)
            b = np.asarray(b, dtype=np.float64)
            if b.ndim != 1 or b.shape[0] != A.shape[0]:
                raise DimensionMismatch(
                    f"bias length {b.shape} does not match {A.shape[0]} rows"
                )
            rows, cols = A.shape
            if rows < 1 or cols < 1:
                raise DimensionMismatch("zero-dimensional layer rejected")
            if prev_rows is not None and cols != prev_rows:
                raise DimensionMismatch(
                    f"layer expects {cols} inputs but previous layer emits {prev_rows}"
                )
            if not np.isfinite(A.data).all() or not np.isfinite(b).all():
                raise NonFiniteEntry("layer contains NaN or infinite entries")
            prev_rows = rows
            checked.append((A, _freeze(b if not b.flags.writeable else b.copy())))
        if not checked:
            raise EmptyNetwork("a network needs at least one layer")
        object.__setattr__(self, "layers", tuple(checked))
        object.__setattr__(self, "input_dim", checked[0][0].shape[1])
        object.__setattr__(self, "output_dim", checked[-1][0].shape[0])

    def __setattr__(self, name, value):
        raise AttributeError("Network is immutable")

    @property
    def depth(self):
        return len(self.layers)

    def __call__(self, x):
        return realize(self, x)

    def __repr__(self):
        widths = [self.input_dim] + [A.shape[0] for A, _ in self.layers]
        return f"Network(depth={self.depth}, widths={widths})"


@dataclass(frozen=True)
class ComplexityReport:
    """Exact size accounting: depth L, node count N0 + sum N_k, and the
    per-layer nonzero counts M_k = nnz(A_k) + nnz(b_k)."""

    depth: int
    nodes: int
    total_nnz: int
    layer_nnz: tuple


def make_network(layers):
    """Validate and build a Network from (matrix, bias) pairs.

    Matrices may be dense arrays or scipy sparse; biases are 1-d vectors
    whose length matches the matrix row count.  Sparse inputs are copied
    so the caller cannot mutate the network afterwards.
    """
    layers = list(layers)
    if not layers:
        raise EmptyNetwork("a network needs at least one layer")
    return Network(
        (A.copy() if sp.issparse(A) else A, b) for A, b in layers
    )


def realize(net, x):
    """Evaluate the network: sigma2 after every layer except the last."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise DimensionMismatch(
            f"input length {x.shape} does not match input_dim {net.input_dim}"
        )
    last = len(net.layers) - 1
    for k, (A, b) in enumerate(net.layers):
        x = A @ x + b
        if k != last:
            x = requ(x)
    return x


def realize_batch(net, X, chunk=None):
    """Evaluate the network on each column of X (input_dim x n_samples).

    Identical arithmetic to realize per column; useful when evaluating a
    large network on a parameter grid.  When `chunk` is given the columns
    are processed at most `chunk` at a time, which bounds the working-set
    size at (widest layer) x chunk doubles regardless of the sample count.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != net.input_dim:
        raise DimensionMismatch(
            f"batch shape {X.shape} does not match input_dim {net.input_dim}"
        )
    if chunk is not None and X.shape[1] > chunk:
        blocks = [
            realize_batch(net, X[:, j : j + chunk])
            for j in range(0, X.shape[1], chunk)
        ]
        return np.concatenate(blocks, axis=1)
    last = len(net.layers) - 1
    for k, (A, b) in enumerate(net.layers):
        X = A @ X + b[:, None]
        if k != last:
            X = requ(X)
    return X


def complexity(net):
    """Exact complexity report; an entry counts as zero only when it is
    bit-exactly zero."""
    layer_nnz = []
    nodes = net.input_dim
    for A, b in net.layers:
        layer_nnz.append(int(np.count_nonzero(A.data)) + int(np.count_nonzero(b)))
        nodes += A.shape[0]
    return ComplexityReport(
        depth=len(net.layers),
        nodes=nodes,
        total_nnz=sum(layer_nnz),
        layer_nnz=tuple(layer_nnz),
    )


def _network_doc(net):
    return {
        "input_dim": int(net.input_dim),
        "layers": [
            {
                "rows": int(A.shape[0]),
                "cols": int(A.shape[1]),
                "A": A.toarray().ravel(order="C").tolist(),
                "b": b.tolist(),
            }
            for A, b in net.layers
        ],
    }


def save_network(path, net):
    """Write the network as JSON; floats use shortest round-trip decimals,
    so save/load is bit-exact for finite doubles.

    Matrices are written densely (row-major), so the format is meant for
    desk-scale networks, not the large test-grid compositions.
    """
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_network_doc(net), fh)


def _network_from_doc(doc):
    layers = []
    for layer in doc["layers"]:
        rows, cols = int(layer["rows"]), int(layer["cols"])
        A = np.asarray(layer["A"], dtype=np.float64).reshape(rows, cols)
        b = np.asarray(layer["b"], dtype=np.float64)
        layers.append((A, b))
    net = make_network(layers)
    if net.input_dim != int(doc["input_dim"]):
        raise DimensionMismatch("declared input_dim does not match first layer")
    return net


def load_network(path):
    """Read a network written by save_network."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return _network_from_doc(doc)
