"""Networks that perform exact matrix arithmetic, and the Neumann-series
approximate inverse built from them.

Matrices enter and leave networks flattened column-major (vec / matr).
One application of the 4-unit product gadget computes x*y exactly, so a
2-layer network computes a full matrix product A @ B exactly; squaring,
dyadic powers A^(2^j), and the partial sums

    sum_{k=0}^{2^l - 1} A^k  =  prod_{i=0}^{l-1} (A^(2^i) + I)

follow by composition.  For ||A||_2 <= 1 - delta the partial sum is within
(1-delta)^(2^l)/delta of (I - A)^{-1}, which the length rule neumann_length
drives below a requested epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .calculus import (
    BETA1,
    GAMMA1,
    OMEGA1,
    affine_network,
    concat,
    extend,
    parallelize,
    sparse_concat,
)
from .errors import ConvergenceFailure, DimensionMismatch, InvalidArgument
from .network import Network

__all__ = [
    "vec",
    "matr",
    "scalar_product_network",
    "mult_network",
    "square_network",
    "power_network",
    "NeumannPlan",
    "neumann_length",
    "inversion_network",
    "neumann_partial_sum_oracle",
    "spectral_norm",
]


def vec(A):
    """Flatten a d x l matrix column-major: (A_11, ..., A_d1, A_12, ...)."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionMismatch("vec expects a matrix")
    return A.ravel(order="F")


def matr(v, d, l):
    """Inverse of vec: reshape a length-d*l vector to d x l, column-major."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != d * l:
        raise DimensionMismatch(f"need a vector of length {d * l}, got {v.shape}")
    return v.reshape((d, l), order="F")


def scalar_product_network():
    """2-layer network computing (x, y) -> x*y exactly for all reals.

    Layer 1 forms the four combinations +-x +- y; layer 2 combines their
    squares as ((x+y)^2 - (x-y)^2)/4 = x*y.  8 + 4 nonzeros.
    """
    A1 = np.column_stack([OMEGA1, GAMMA1])
    A2 = BETA1.reshape(1, 4)
    return Network([(A1, np.zeros(4)), (A2, np.zeros(1))])


def mult_network(d, n, l):
    """2-layer network computing (vec A, vec B) -> vec(A @ B) exactly,
    for A of shape d x n and B of shape n x l.

    One product gadget per scalar term A_ik * B_kj: 4*d*n*l hidden units,
    first-layer nonzeros exactly 8*d*n*l, last-layer 4*d*n*l.
    """
    if d < 1 or n < 1 or l < 1:
        raise InvalidArgument(f"need d, n, l >= 1, got {(d, n, l)}")
    dl = d * l
    # one gadget per (output m = j*d + i, summand k), rows grouped 4 apart
    mm = np.repeat(np.arange(dl), n)
    kk = np.tile(np.arange(n), dl)
    ii = mm % d
    jj = mm // d
    rows = ((4 * (mm * n + kk))[:, None] + np.arange(4)).ravel()
    col_a = kk * d + ii
    col_b = d * n + jj * n + kk
    r = np.concatenate([rows, rows])
    c = np.concatenate([np.repeat(col_a, 4), np.repeat(col_b, 4)])
    vals = np.concatenate([np.tile(OMEGA1, dl * n), np.tile(GAMMA1, dl * n)])
    A1 = sp.coo_matrix((vals, (r, c)), shape=(4 * dl * n, n * (d + l))).tocsr()
    A2 = sp.csr_matrix(
        (
            np.tile(BETA1, dl * n),
            np.arange(4 * dl * n),
            np.arange(0, 4 * dl * n + 1, 4 * n),
        ),
        shape=(dl, 4 * dl * n),
    )
    return Network([(A1, np.zeros(4 * dl * n)), (A2, np.zeros(dl))])


def _duplicator(n):
    """Affine layer x -> (x; x)."""
    eye = sp.eye(n, format="csr")
    return affine_network(sp.vstack([eye, eye], format="csr"), np.zeros(2 * n))


def square_network(d):
    """2-layer network computing vec A -> vec(A @ A) exactly (A is d x d)."""
    if d < 1:
        raise InvalidArgument(f"need d >= 1, got {d}")
    return concat(mult_network(d, d, d), _duplicator(d * d))


def power_network(d, j):
    """Network computing vec A -> vec(A^(2^j)) exactly by repeated squaring.

    Depth exactly 2j; nonzeros at most 64*j*d^3.
    """
    if d < 1 or j < 1:
        raise InvalidArgument(f"need d >= 1 and j >= 1, got d={d}, j={j}")
    net = square_network(d)
    for _ in range(j - 1):
        net = sparse_concat(square_network(d), net)
    return net


@dataclass(frozen=True)
class NeumannPlan:
    """Partial-sum length for the Neumann inverse: the smallest dyadic
    l with (1-delta)^(2^l)/delta <= epsilon, via the closed form
    l = ceil(log2(log_{1-delta}(delta*epsilon) + 1))."""

    epsilon: float
    delta: float
    l: int


def neumann_length(epsilon, delta):
    """Closed-form partial-sum length; epsilon, delta must lie in (0, 1)."""
    if not (0.0 < epsilon < 1.0):
        raise InvalidArgument(f"epsilon must be in (0,1), got {epsilon}")
    if not (0.0 < delta < 1.0):
        raise InvalidArgument(f"delta must be in (0,1), got {delta}")
    terms = math.log(delta * epsilon) / math.log(1.0 - delta)
    l = math.ceil(math.log2(terms + 1.0))
    return NeumannPlan(epsilon=float(epsilon), delta=float(delta), l=int(l))


def _shift_by_identity(d):
    """Affine layer vec M -> vec(M + I)."""
    dd = d * d
    return affine_network(sp.eye(dd, format="csr"), vec(np.eye(d)))


def inversion_network(d, epsilon, delta):
    """Network mapping vec A -> approximately vec((I - A)^{-1}).

    Computes the exact partial sum sum_{k < 2^l} A^k in factored form
    prod_i (A^(2^i) + I), with l = neumann_length(epsilon, delta).l, so for
    every A with ||A||_2 <= 1 - delta the spectral-norm error is at most
    (1-delta)^(2^l)/delta <= epsilon.  Depth exactly 2l + 1.
    """
    if d < 1:
        raise InvalidArgument(f"need d >= 1, got {d}")
    l = neumann_length(epsilon, delta).l
    dd = d * d
    pi = _shift_by_identity(d)
    for m in range(2, l + 1):
        factor = sparse_concat(_shift_by_identity(d), power_network(d, m - 1))
        pi = sparse_concat(mult_network(d, d, d), parallelize([pi, factor]))
    fan_out = affine_network(
        sp.vstack([sp.eye(dd, format="csr")] * l, format="csr"), np.zeros(l * dd)
    )
    net = concat(pi, fan_out)
    if l == 1:
        # the single-factor case collapses to one affine layer; pad so the
        # depth formula 2l + 1 holds uniformly
        net = extend(net, 3)
    return net


def neumann_partial_sum_oracle(A, l):
    """sum_{k=0}^{2^l - 1} A^k by direct term accumulation, as an
    independent check of the factored form the network encodes."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("need a square matrix")
    if l < 1:
        raise InvalidArgument(f"need l >= 1, got {l}")
    total = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for _ in range(2**l - 1):
        term = term @ A
        total += term
    return total


def spectral_norm(A, tol=1e-12, max_iter=100000):
    """Largest singular value by power iteration on A^T A.

    Deterministic start vector (1, ..., 1)/sqrt(n); if the iterate ever
    collapses to zero the iteration restarts from successive basis vectors.
    Raises ConvergenceFailure if the relative change in the Rayleigh
    quotient still exceeds tol at the iteration cap.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionMismatch("spectral_norm expects a matrix")
    n = A.shape[1]
    M = A.T @ A

    def start(k):
        if k == 0:
            return np.full(n, 1.0 / math.sqrt(n))
        e = np.zeros(n)
        e[k - 1] = 1.0
        return e

    tried = 0
    v = start(tried)
    est = 0.0
    for _ in range(max_iter):
        w = M @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            tried += 1
            if tried > n:
                return 0.0
            v = start(tried)
            est = 0.0
            continue
        v = w / norm_w
        new_est = float(v @ (M @ v))
        if abs(new_est - est) <= tol * new_est:
            return math.sqrt(new_est)
        est = new_est
    raise ConvergenceFailure(
        f"power iteration did not converge within {max_iter} iterations"
    )
