"""Parametric diffusion on the unit square, reduced bases, and the
network constructions that approximate the parameter-to-solution map.

The model problem is a chessboard-coefficient diffusion: (0,1)^2 is split
into an s-by-s grid of subdomains, the diffusion coefficient is
a_y(x) = mu + sum_i y_i on subdomain i with y in [0,1]^p, p = s^2, and the
right-hand side is f(x) = 20 + 10 x1 - 5 x2.  Discretization uses P1
finite elements on a uniform right-triangle mesh with homogeneous
Dirichlet boundary.  The Gram matrix G is the unit-coefficient stiffness
matrix (the H^1_0 seminorm), which makes beta = mu and alpha = mu + 1
exact spectral bounds for every parametric operator in the box.

The network side composes three exact pieces: a two-layer affine-in-y
network for the scaled reduced operator, a constant network for the
reduced load, and the Neumann-series inversion network.  Because the
operator and load networks are exact, the whole approximation budget is
spent on the truncated Neumann series, and the end-to-end error against
the reduced solve stays below the requested epsilon.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .calculus import BETA1, GAMMA1, OMEGA1, affine_network, concat, parallelize, sparse_concat
from .errors import (
    DimensionMismatch,
    EmptySnapshotSet,
    InvalidArgument,
    SingularSystem,
)
from .matrixnets import inversion_network, mult_network, vec
from .network import Network, _network_doc, _network_from_doc, realize_batch

__all__ = [
    "AffineSystem",
    "ReducedBasis",
    "ErrorReport",
    "assemble_affine_system",
    "assemble_load",
    "solve_high_fidelity",
    "build_reduced_basis",
    "reduced_solve",
    "b_network",
    "f_network",
    "contraction_network",
    "inv_b_network",
    "solution_network",
    "evaluate_error",
    "write_error_csv",
    "save_reduced_network",
    "load_reduced_network",
]


@dataclass(frozen=True)
class AffineSystem:
    """Assembled affine-parametric system B_y = B0 + sum_i y_i Bs[i].

    B0 is the shift part (mu times the unit stiffness matrix), Bs[i] the
    stiffness restricted to subdomain i; their sum over all i equals the
    unit stiffness matrix G, which doubles as the Gram matrix of the
    H^1_0 seminorm.  All matrices are D x D CSR over the interior nodes.
    """

    grid_n: int
    s: int
    mu: float
    D: int
    p: int
    B0: sp.csr_matrix
    Bs: tuple
    f: np.ndarray
    G: sp.csr_matrix


@dataclass(frozen=True)
class ReducedBasis:
    """G-orthonormal reduced basis and the reduced-space components.

    theta[0] = V^T B0 V and theta[i] = V^T Bs[i-1] V, so the reduced
    operator at parameter y is theta[0] + sum_i y_i theta[i].  alpha and
    beta are the coefficient sup/inf, lam = 1/(alpha+beta) the scaling
    that makes I - lam*B a contraction, delta = lam*beta its margin.
    truncation_sup is the largest G-norm projection residual among the
    snapshots dropped during orthonormalization (None when the basis was
    loaded from disk and the build-time value is unknown).
    """

    V: np.ndarray
    d: int
    theta: tuple
    f_rb: np.ndarray
    alpha: float
    beta: float
    lam: float
    delta: float
    truncation_sup: float | None = 0.0

    @property
    def p(self):
        return len(self.theta) - 1


@dataclass(frozen=True)
class ErrorReport:
    """Per-parameter network errors against the reduced solve.

    Exactly one of the three error columns is populated, matching `mode`;
    worst_case is its maximum.  rb_truncation carries the reduced-basis
    truncation residual through to the report for context.
    """

    params: np.ndarray
    mode: str
    err_euclid_rb: np.ndarray | None
    err_g_h: np.ndarray | None
    err_rel_g: np.ndarray | None
    worst_case: float
    target_eps: float | None
    rb_truncation: float | None


def _default_load(x, y):
    return 20.0 + 10.0 * x - 5.0 * y


def _mesh_triangles(grid_n):
    """Vertex grid-index triples for the two triangles of every cell.

    Cells are unit squares of the (grid_n+1)^2 grid; each splits along the
    (i,j)-(i+1,j+1) diagonal.  Returns two (ncells, 3, 2) integer arrays.
    """
    side = grid_n + 1
    cx, cy = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    cx = cx.ravel()
    cy = cy.ravel()

    def verts(*corners):
        return np.stack(
            [np.stack([cx + dx, cy + dy], axis=1) for dx, dy in corners], axis=1
        )

    lower = verts((0, 0), (1, 0), (1, 1))
    upper = verts((0, 0), (1, 1), (0, 1))
    return lower, upper


def _local_stiffness(tri_xy):
    """Exact P1 stiffness of one triangle with vertex coordinates (3, 2)."""
    x = tri_xy[:, 0]
    y = tri_xy[:, 1]
    area = 0.5 * abs((x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]))
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    return (np.outer(b, b) + np.outer(c, c)) / (4.0 * area), area


def _dof_index(verts, grid_n):
    """Interior-node numbering (row-major by y then x); boundary -> -1."""
    ix = verts[..., 0]
    iy = verts[..., 1]
    interior = (ix >= 1) & (ix <= grid_n) & (iy >= 1) & (iy <= grid_n)
    return np.where(interior, (iy - 1) * grid_n + (ix - 1), -1)


def _stiffness_coo(dofs, kloc, D):
    """Accumulate one constant local matrix over many triangles (CSR)."""
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    vals = np.tile(kloc.ravel(), dofs.shape[0])
    keep = (rows >= 0) & (cols >= 0)
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(D, D))
    return mat.tocsr()


def _validate_system_args(grid_n, s, mu):
    if int(grid_n) != grid_n or grid_n < 3:
        raise InvalidArgument(f"grid_n must be an integer >= 3, got {grid_n}")
    if int(s) != s or s < 1:
        raise InvalidArgument(f"chessboard side s must be an integer >= 1, got {s}")
    if not np.isfinite(mu) or mu <= 0:
        raise InvalidArgument(f"shift mu must be positive, got {mu}")


def assemble_load(grid_n, func):
    """Interior load vector for a callable f(x, y) on the same P1 mesh.

    Uses the exact quadrature for linear integrands, area/12 * (2 f_a +
    f_b + f_c) against each hat; for non-linear f this is the usual
    vertex-based approximation.  func must accept numpy arrays.
    """
    if int(grid_n) != grid_n or grid_n < 3:
        raise InvalidArgument(f"grid_n must be an integer >= 3, got {grid_n}")
    h = 1.0 / (grid_n + 1)
    D = grid_n * grid_n
    f = np.zeros(D)
    for tris in _mesh_triangles(grid_n):
        dofs = _dof_index(tris, grid_n)
        xy = tris * h
        fv = func(xy[:, :, 0], xy[:, :, 1])
        _, area = _local_stiffness(xy[0])
        weights = area / 12.0 * (fv + fv.sum(axis=1, keepdims=True))
        for a in range(3):
            keep = dofs[:, a] >= 0
            np.add.at(f, dofs[keep, a], weights[keep, a])
    return f


def assemble_affine_system(grid_n, s, mu):
    """P1 assembly of the chessboard-coefficient diffusion problem.

    grid_n x grid_n interior nodes, s x s coefficient subdomains, shift
    mu > 0.  Each element contributes to the subdomain containing its
    centroid.  Returns the unit stiffness both as the Gram matrix G and,
    scaled by mu, as the parameter-independent part B0.
    """
    _validate_system_args(grid_n, s, mu)
    grid_n, s = int(grid_n), int(s)
    h = 1.0 / (grid_n + 1)
    D = grid_n * grid_n
    p = s * s

    K_parts = []
    sub_parts = [[] for _ in range(p)]
    for tris in _mesh_triangles(grid_n):
        dofs = _dof_index(tris, grid_n)
        xy = tris * h
        kloc, _ = _local_stiffness(xy[0])
        centroid = xy.mean(axis=1)
        col = np.clip((centroid[:, 0] * s).astype(int), 0, s - 1)
        row = np.clip((centroid[:, 1] * s).astype(int), 0, s - 1)
        sub = row * s + col
        K_parts.append(_stiffness_coo(dofs, kloc, D))
        for i in range(p):
            sub_parts[i].append(_stiffness_coo(dofs[sub == i], kloc, D))

    K = (K_parts[0] + K_parts[1]).tocsr()
    Bs = tuple((a + b).tocsr() for a, b in sub_parts)
    f = assemble_load(grid_n, _default_load)
    return AffineSystem(
        grid_n=grid_n,
        s=s,
        mu=float(mu),
        D=D,
        p=p,
        B0=(mu * K).tocsr(),
        Bs=Bs,
        f=f,
        G=K,
    )


def _parametric_matrix(sys, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (sys.p,):
        raise DimensionMismatch(
            f"parameter has shape {y.shape}, expected ({sys.p},)"
        )
    B = sys.B0.copy()
    for yi, Bi in zip(y, sys.Bs):
        B = B + yi * Bi
    return B.tocsr()


def solve_high_fidelity(sys, y):
    """Direct sparse solve of B_y u = f at one parameter."""
    B = _parametric_matrix(sys, y)
    try:
        lu = spla.splu(B.tocsc())
        u = lu.solve(sys.f)
    except RuntimeError as exc:
        raise SingularSystem(f"high-fidelity operator is singular: {exc}") from exc
    if not np.isfinite(u).all():
        raise SingularSystem("high-fidelity solve produced non-finite values")
    return u


def build_reduced_basis(sys, snapshot_params, drop_tol=1e-8):
    """Snapshot solves plus modified Gram-Schmidt in the G-inner product.

    Each snapshot is projected out of the current basis twice (one
    re-orthogonalization pass keeps V^T G V at the 1e-10 level even when
    snapshots are numerically dependent) and dropped when its residual
    G-norm falls below drop_tol times the largest snapshot G-norm.
    """
    params = np.asarray(snapshot_params, dtype=np.float64)
    if params.ndim == 1 and sys.p == 1:
        params = params.reshape(-1, 1)
    if params.size == 0:
        raise EmptySnapshotSet("need at least one snapshot parameter")
    if params.ndim != 2 or params.shape[1] != sys.p:
        raise DimensionMismatch(
            f"snapshot parameters have shape {params.shape}, expected (*, {sys.p})"
        )
    if not (np.isfinite(drop_tol) and drop_tol >= 0):
        raise InvalidArgument(f"drop_tol must be a nonnegative real, got {drop_tol}")

    G = sys.G
    snapshots = [solve_high_fidelity(sys, y) for y in params]
    scale = max(
        np.sqrt(max(float(u @ (G @ u)), 0.0)) for u in snapshots
    )

    basis = []
    g_basis = []
    truncation_sup = 0.0
    for u in snapshots:
        v = u.copy()
        for _ in range(2):
            for vi, wi in zip(basis, g_basis):
                v = v - (wi @ v) * vi
        norm = np.sqrt(max(float(v @ (G @ v)), 0.0))
        if norm < drop_tol * scale or norm == 0.0:
            truncation_sup = max(truncation_sup, norm)
            continue
        v = v / norm
        basis.append(v)
        g_basis.append(G @ v)

    if not basis:
        raise EmptySnapshotSet(
            "every snapshot fell below drop_tol; no basis vector survives"
        )
    V = np.array(basis).T
    d = V.shape[1]
    alpha = sys.mu + 1.0
    beta = sys.mu
    lam = 1.0 / (alpha + beta)
    theta = (V.T @ (sys.B0 @ V),) + tuple(V.T @ (Bi @ V) for Bi in sys.Bs)
    return ReducedBasis(
        V=V,
        d=d,
        theta=theta,
        f_rb=V.T @ sys.f,
        alpha=alpha,
        beta=beta,
        lam=lam,
        delta=lam * beta,
        truncation_sup=truncation_sup,
    )


def _reduced_operator(rb, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (rb.p,):
        raise DimensionMismatch(f"parameter has shape {y.shape}, expected ({rb.p},)")
    th = rb.theta[0].copy()
    for yi, ti in zip(y, rb.theta[1:]):
        th += yi * ti
    return th


def reduced_solve(rb, y):
    """Direct solve of the d x d reduced system at one parameter."""
    th = _reduced_operator(rb, y)
    try:
        return np.linalg.solve(th, rb.f_rb)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"reduced operator is singular: {exc}") from exc


def b_network(rb):
    """Two-layer network mapping y to vec(lam * B^rb_y) exactly.

    Each parameter passes through the four-unit identity gadget, so the
    affine dependence on y survives the activation; the second layer
    recombines the gadget outputs with vec(lam*theta_i) columns.  At most
    8p + (4p+1)d^2 nonzeros.
    """
    p, d = rb.p, rb.d
    A1 = sp.kron(sp.eye(p), sp.csr_matrix(OMEGA1.reshape(4, 1)), format="csr")
    b1 = np.tile(GAMMA1, p)
    blocks = [np.outer(vec(rb.lam * ti), BETA1) for ti in rb.theta[1:]]
    A2 = sp.csr_matrix(np.hstack(blocks))
    b2 = vec(rb.lam * rb.theta[0])
    return Network([(A1, b1), (A2, b2)])


def f_network(rb):
    """Depth-1 constant network emitting the reduced load for every y."""
    return Network([(sp.csr_matrix((rb.d, rb.p)), rb.f_rb.copy())])


def contraction_network(rb):
    """Two-layer network mapping y to vec(I - lam * B^rb_y) exactly.

    Same weights as b_network with the last layer negated and the
    identity added to its bias; the output is the Neumann-series
    contraction, with spectral norm at most 1 - delta over the box.
    """
    bnet = b_network(rb)
    (A1, b1), (A2, b2) = bnet.layers
    return Network([(A1, b1), (-A2, vec(np.eye(rb.d)) - b2)])


def inv_b_network(rb, epsilon):
    """Network mapping y to approximately vec((B^rb_y)^{-1}).

    Feeds the exact contraction network into the Neumann inversion
    network and rescales by lam.  The inversion stage runs at tolerance
    epsilon/(2*lam) with contraction margin delta/2, which bounds the
    spectral error of the composite by epsilon/2 uniformly over the box.
    """
    if not (np.isfinite(epsilon) and 0.0 < epsilon < 1.0):
        raise InvalidArgument(f"epsilon must lie in (0, 1), got {epsilon}")
    # The inversion stage needs its tolerance in (0, 1); the 0.9 clamp can
    # only engage when epsilon/(2*lam) > 0.9, where it still leaves the
    # composite error below epsilon/2.
    eps_inner = min(epsilon / (2.0 * rb.lam), 0.9)
    inv = inversion_network(rb.d, eps_inner, rb.delta / 2.0)
    core = sparse_concat(inv, contraction_network(rb))
    head = affine_network(rb.lam * sp.identity(rb.d * rb.d, format="csr"))
    return concat(head, core)


def solution_network(rb, epsilon, C_f):
    """End-to-end solution-map networks (reduced and high-fidelity).

    The reduced variant multiplies the approximate inverse against the
    exact reduced load, fed by a fan-out of the parameter to both lanes;
    the high-fidelity variant lifts it through V.  The inverse is built
    at epsilon/(epsilon*beta + 2*C_f), so the reduced output stays within
    epsilon of reduced_solve (Euclidean), and the lifted output within
    epsilon in the G-norm by G-orthonormality of V.
    """
    if not (np.isfinite(epsilon) and 0.0 < epsilon < 1.0):
        raise InvalidArgument(f"epsilon must lie in (0, 1), got {epsilon}")
    f_norm = float(np.linalg.norm(rb.f_rb))
    if not (np.isfinite(C_f) and C_f > 0 and C_f >= f_norm):
        raise InvalidArgument(
            f"C_f must be positive and at least |f_rb| = {f_norm:.6g}, got {C_f}"
        )
    p, d = rb.p, rb.d
    # With the exact load network the budget epsilon*C_f' / (eps*beta + 2C_f)
    # already sits below epsilon/2; clamp only to keep the argument in (0,1).
    eps_prime = min(epsilon / (epsilon * rb.beta + 2.0 * C_f), 0.9)
    lanes = parallelize([inv_b_network(rb, eps_prime), f_network(rb)])
    core = sparse_concat(mult_network(d, d, 1), lanes)
    fan_out = affine_network(sp.vstack([sp.identity(p), sp.identity(p)], format="csr"))
    rb_net = concat(core, fan_out)
    h_net = sparse_concat(affine_network(sp.csr_matrix(rb.V)), rb_net)
    return rb_net, h_net


def _gram_cholesky(G):
    dense = G.toarray() if sp.issparse(G) else np.asarray(G, dtype=np.float64)
    try:
        return np.linalg.cholesky(dense)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"Gram matrix is not positive definite: {exc}") from exc


_MODES = ("euclidean-rb", "g-norm-h", "relative-g")


def evaluate_error(rb, net, test_params, G, mode, target_eps=None, outputs=None, chunk=16):
    """Per-parameter error of a solution network against reduced_solve.

    Modes: "euclidean-rb" compares a reduced-output network with the
    reduced solution in the Euclidean norm; "g-norm-h" and "relative-g"
    compare a high-fidelity-output network with the lifted solution V u
    in the G-norm (absolute resp. relative), via the Cholesky factor of
    G.  `outputs` may carry precomputed network outputs (one column per
    parameter) to avoid re-evaluating the same network across modes.
    """
    if mode not in _MODES:
        raise InvalidArgument(f"mode must be one of {_MODES}, got {mode!r}")
    params = np.asarray(test_params, dtype=np.float64)
    if params.ndim == 1 and rb.p == 1:
        params = params.reshape(-1, 1)
    if params.ndim != 2 or params.shape[1] != rb.p:
        raise DimensionMismatch(
            f"test parameters have shape {params.shape}, expected (*, {rb.p})"
        )
    if net.input_dim != rb.p:
        raise DimensionMismatch(
            f"network consumes {net.input_dim} inputs, parameters have {rb.p}"
        )
    expected_out = rb.d if mode == "euclidean-rb" else rb.V.shape[0]
    if net.output_dim != expected_out:
        raise DimensionMismatch(
            f"network emits {net.output_dim} outputs, mode {mode!r} needs {expected_out}"
        )

    u_rb = np.column_stack([reduced_solve(rb, y) for y in params])
    if outputs is None:
        outputs = realize_batch(net, params.T, chunk=chunk)
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.shape != (expected_out, params.shape[0]):
        raise DimensionMismatch(
            f"outputs have shape {outputs.shape}, expected {(expected_out, params.shape[0])}"
        )

    err_euclid = err_g = err_rel = None
    if mode == "euclidean-rb":
        err_euclid = np.linalg.norm(u_rb - outputs, axis=0)
        errors = err_euclid
    else:
        L = _gram_cholesky(G)
        lifted = rb.V @ u_rb
        diff = L.T @ (lifted - outputs)
        errors = np.linalg.norm(diff, axis=0)
        if mode == "g-norm-h":
            err_g = errors
        else:
            denom = np.linalg.norm(L.T @ lifted, axis=0)
            errors = errors / denom
            err_rel = errors
    return ErrorReport(
        params=params,
        mode=mode,
        err_euclid_rb=err_euclid,
        err_g_h=err_g,
        err_rel_g=err_rel,
        worst_case=float(errors.max()),
        target_eps=None if target_eps is None else float(target_eps),
        rb_truncation=rb.truncation_sup,
    )


def write_error_csv(path, params, err_euclid_rb, err_g_h, err_rel_g):
    """Error table: one row per parameter, then a MAX row.

    Columns: y_1..y_p, err_euclid_rb, err_g_h, err_rel_g; the final row
    has MAX in the first cell and the column maxima in the error cells.
    """
    params = np.asarray(params, dtype=np.float64)
    cols = [np.asarray(c, dtype=np.float64) for c in (err_euclid_rb, err_g_h, err_rel_g)]
    n, p = params.shape
    for c in cols:
        if c.shape != (n,):
            raise DimensionMismatch(
                f"error column has shape {c.shape}, expected ({n},)"
            )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [f"y_{i + 1}" for i in range(p)] + ["err_euclid_rb", "err_g_h", "err_rel_g"]
        )
        for k in range(n):
            writer.writerow(
                [repr(float(v)) for v in params[k]] + [repr(float(c[k])) for c in cols]
            )
        writer.writerow(["MAX"] + [""] * (p - 1) + [repr(float(c.max())) for c in cols])


def save_reduced_network(path, net, rb):
    """Network JSON plus a top-level reduced_basis payload."""
    doc = _network_doc(net)
    doc["reduced_basis"] = {
        "V": rb.V.tolist(),
        "theta": [np.asarray(t).tolist() for t in rb.theta],
        "f_rb": rb.f_rb.tolist(),
        "alpha": rb.alpha,
        "beta": rb.beta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_reduced_network(path):
    """Read a (network, reduced basis) pair written by save_reduced_network."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    net = _network_from_doc(doc)
    payload = doc["reduced_basis"]
    V = np.asarray(payload["V"], dtype=np.float64)
    theta = tuple(np.asarray(t, dtype=np.float64) for t in payload["theta"])
    alpha = float(payload["alpha"])
    beta = float(payload["beta"])
    lam = 1.0 / (alpha + beta)
    rb = ReducedBasis(
        V=V,
        d=V.shape[1],
        theta=theta,
        f_rb=np.asarray(payload["f_rb"], dtype=np.float64),
        alpha=alpha,
        beta=beta,
        lam=lam,
        delta=lam * beta,
        truncation_sup=None,
    )
    return net, rb
