"""Structural operations on rectified-quadratic networks.

The calculus rests on one 4-unit gadget: with

    omega1 = (1, -1, 1, -1),  gamma1 = (1, -1, -1, 1),  beta1 = (1, 1, -1, -1)/4

every real x satisfies x = beta1 . sigma2(omega1 * x + gamma1), because
sigma2(s) + sigma2(-s) = s^2 collapses the four squares to
((x+1)^2 - (x-1)^2)/4.  Stacking the gadget per coordinate gives identity
networks of any depth, which in turn give composition and padding
operations whose depth and nonzero counts obey exact formulas:

    concat:        depth L1 + L2 - 1 (boundary affine maps fused)
    sparse_concat: depth L1 + L2     (composition through a 2-layer identity)
    extend:        pad to a requested depth with an identity prefix
    parallelize:   block-diagonal stacking on disjoint input lanes
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, EmptyList, InvalidArgument
from .network import Network

__all__ = [
    "OMEGA1",
    "GAMMA1",
    "BETA1",
    "concat",
    "identity_network",
    "sparse_concat",
    "extend",
    "parallelize",
    "affine_network",
]

OMEGA1 = np.array([1.0, -1.0, 1.0, -1.0])
GAMMA1 = np.array([1.0, -1.0, -1.0, 1.0])
BETA1 = np.array([0.25, 0.25, -0.25, -0.25])


def concat(phi1, phi2):
    """Compose phi1 after phi2 by fusing phi1's first affine layer with
    phi2's last: realize(result, x) = realize(phi1, realize(phi2, x)).

    Exact (the fused boundary is affine-after-affine); depth L1 + L2 - 1.
    """
    if phi1.input_dim != phi2.output_dim:
        raise DimensionMismatch(
            f"cannot compose: {phi1.input_dim} inputs after {phi2.output_dim} outputs"
        )
    A1, b1 = phi1.layers[0]
    AL, bL = phi2.layers[-1]
    fused = (A1 @ AL, A1 @ bL + b1)
    return Network(phi2.layers[:-1] + (fused,) + phi1.layers[1:])


def _identity_blocks(n):
    """Per-coordinate gadget blocks: W (4n x n), Gamma (4n), B (n x 4n)."""
    eye = sp.eye(n, format="csr")
    W = sp.kron(eye, sp.csr_matrix(OMEGA1.reshape(4, 1)), format="csr")
    B = sp.kron(eye, sp.csr_matrix(BETA1.reshape(1, 4)), format="csr")
    Gamma = np.tile(GAMMA1, n)
    return W, Gamma, B


def identity_network(n, L):
    """Network of depth L computing the identity on R^n exactly.

    L = 1 is the affine identity; L >= 2 threads each coordinate through
    the 4-unit gadget L-1 times, for exactly 20nL - 28n nonzeros.
    """
    if n < 1 or L < 1:
        raise InvalidArgument(f"need n >= 1 and L >= 1, got n={n}, L={L}")
    if L == 1:
        return Network([(sp.eye(n, format="csr"), np.zeros(n))])
    W, Gamma, B = _identity_blocks(n)
    middle = (W @ B, Gamma)
    layers = [(W, Gamma)] + [middle] * (L - 2) + [(B, np.zeros(n))]
    return Network(layers)


def sparse_concat(phi1, phi2):
    """Compose phi1 after phi2 through a 2-layer identity network.

    Depth L1 + L2; keeps each factor's interior weights untouched, so the
    result's nonzero count is M1 + M2 plus boundary terms bounded by
    4*M_first(phi1) + 4*M_last(phi2) + 4*out_dim(phi2).
    """
    n = phi2.output_dim
    if phi1.input_dim != n:
        raise DimensionMismatch(
            f"cannot compose: {phi1.input_dim} inputs after {n} outputs"
        )
    return concat(concat(phi1, identity_network(n, 2)), phi2)


def extend(phi, L):
    """Pad phi to depth L (same realization) with an identity prefix."""
    if L < phi.depth:
        raise InvalidArgument(f"cannot extend depth {phi.depth} network to {L}")
    if L == phi.depth:
        return phi
    return sparse_concat(identity_network(phi.output_dim, L - phi.depth), phi)


def parallelize(phis):
    """Run networks side by side on disjoint input lanes.

    The result consumes the concatenation of all inputs and emits the
    concatenation of all outputs.  Networks of unequal depth are padded
    with extend; at equal depth the nonzero count is exactly additive.
    """
    phis = list(phis)
    if not phis:
        raise EmptyList("parallelize needs at least one network")
    L = max(phi.depth for phi in phis)
    padded = [extend(phi, L) for phi in phis]
    layers = []
    for k in range(L):
        A = sp.block_diag([p.layers[k][0] for p in padded], format="csr")
        b = np.concatenate([p.layers[k][1] for p in padded])
        layers.append((A, b))
    return Network(layers)


def affine_network(A, b=0):
    """Single-layer network computing x -> Ax + b (no activation)."""
    A = A if sp.issparse(A) else np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionMismatch("affine_network needs a matrix")
    if np.ndim(b) == 0:
        b = np.full(A.shape[0], float(b))
    return Network([(A, b)])
