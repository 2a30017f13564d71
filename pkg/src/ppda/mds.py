"""Stress majorization over incomplete distance matrices.

Implements weighted SMACOF with a binary known-entry mask, plus a fast
anchored variant for the mask pattern produced by the anchor protocol: the
client-client block fully unknown, everything else known. In that pattern the
free-free block of the mask Laplacian is ``M * I`` (each client has exactly
``M`` known pairs, none of them to other clients), so the Guttman transform
for the clients reduces to a closed-form update with the anchors held fixed.

The anchored update for the client block is

    X_new = (B11 @ X + (B12 + 1) @ X_A) / M

where ``B`` is the usual SMACOF majorization matrix and ``1`` the all-ones
N x M block. Clients embedded this way never see each other's positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import orthogonal_procrustes
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.spatial.distance import cdist

from .protocol import PartialDistanceMatrix, WeightMask

MODES = ("anchored", "full")


@dataclass(frozen=True)
class MdsConfig:
    """Solver settings: target dimension, stop tolerance, epoch cap, mode."""

    dim: int
    tol: float = 1e-3
    max_epochs: int = 5000
    mode: str = "anchored"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"embedding dimension must be positive, got {self.dim}")
        if self.tol < 0.0:
            raise ValueError(f"tolerance must be non-negative, got {self.tol}")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be non-negative, got {self.max_epochs}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class EmbeddingResult:
    """Coordinates plus the per-epoch stress trace.

    ``coords`` holds clients first; for anchored runs it is the N client rows
    only, for full runs all N+M rows. ``stress_trace[0]`` is the stress of the
    initial configuration and each later entry follows one update.
    """

    coords: np.ndarray
    stress_trace: np.ndarray
    epochs_run: int
    converged: bool
    n_clients: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.coords).all():
            raise ValueError("embedding coordinates contain non-finite values")


def _self_dists(coords: np.ndarray) -> np.ndarray:
    """All pairwise distances of one configuration via its Gram matrix.

    Equivalent to a pairwise loop but runs through one BLAS product. Squared
    distances come from the Gram diagonal, so the result's diagonal is exactly
    zero and identical rows cancel exactly.
    """
    gram = coords @ coords.T
    sq = np.diag(gram)
    d = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0))
    np.fill_diagonal(d, 0.0)
    return d


def stress(coords: np.ndarray, dist: np.ndarray, mask: WeightMask | np.ndarray) -> float:
    """Weighted raw stress: sum over known pairs of squared distance residuals."""
    w = mask.w if isinstance(mask, WeightMask) else np.asarray(mask, dtype=float)
    actual = _self_dists(np.asarray(coords, dtype=float))
    resid = np.where(w > 0.0, dist - actual, 0.0)
    return float(np.sum(w * resid**2) / 2.0)


def guttman_b(coords: np.ndarray, dist: np.ndarray, mask: WeightMask | np.ndarray) -> np.ndarray:
    """Majorization matrix B(X) for the current configuration.

    Off-diagonal entries are ``-w_ij * delta_ij / d_ij(X)`` with the
    convention that coincident points (``d_ij = 0``) contribute zero; the
    diagonal makes every row sum to zero.
    """
    w = mask.w if isinstance(mask, WeightMask) else np.asarray(mask, dtype=float)
    actual = _self_dists(np.asarray(coords, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where((w > 0.0) & (actual > 0.0), dist / actual, 0.0)
    b = -w * ratio
    np.fill_diagonal(b, 0.0)
    np.fill_diagonal(b, -b.sum(axis=1))
    return b


def mask_laplacian(mask: WeightMask | np.ndarray) -> np.ndarray:
    """Laplacian V of the mask: -w off the diagonal, row sums zero."""
    w = mask.w if isinstance(mask, WeightMask) else np.asarray(mask, dtype=float)
    return np.diag(w.sum(axis=1)) - w


def _laplacian_pinv(v: np.ndarray, connected: bool) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a mask Laplacian.

    For a connected mask the nullspace is exactly the all-ones direction and
    ``pinv(V) = inv(V + J) - J`` with ``J = 11^T / n``; otherwise fall back to
    a full SVD-based pseudo-inverse.
    """
    n = v.shape[0]
    if connected:
        j = np.full((n, n), 1.0 / n)
        return np.linalg.inv(v + j) - j
    return np.linalg.pinv(v, hermitian=True)


def _factorized_solver(matrix: np.ndarray):
    """Return a solver for a fixed symmetric positive-definite system.

    Raises ``numpy.linalg.LinAlgError`` when the matrix is singular so the
    caller can fall back to a pseudo-inverse.
    """
    inverse = np.linalg.inv(matrix)
    return lambda rhs: inverse @ rhs


def _check_rows_known(w: np.ndarray) -> None:
    row_counts = w.sum(axis=1)
    missing = np.nonzero(row_counts == 0)[0]
    if missing.size:
        raise ValueError(
            f"row {missing[0]} of the mask has no known distances; every point "
            f"needs at least one known pair"
        )


def smacof_full(
    dist: np.ndarray,
    mask: WeightMask,
    config: MdsConfig,
    fixed_indices: np.ndarray | None = None,
    fixed_coords: np.ndarray | None = None,
    init: np.ndarray | None = None,
) -> EmbeddingResult:
    """Weighted SMACOF over an arbitrary known-entry mask.

    Starts from a seeded i.i.d. standard normal configuration (or ``init``
    when given) and applies the Guttman transform until the stress decrease
    falls below ``config.tol`` or ``config.max_epochs`` updates have run. The
    stress trace is non-increasing by majorization.

    When ``fixed_indices``/``fixed_coords`` are given, those rows are clamped
    and only the remaining rows are updated, using the constrained transform
    ``X_f = V_ff^+ (B_ff X_f + (B_fc - V_fc) X_c)``. The returned coordinate
    matrix always contains all rows, clamped ones included.
    """
    w = mask.w
    n = w.shape[0]
    if dist.shape != w.shape:
        raise ValueError(f"distance shape {dist.shape} does not match mask {w.shape}")
    _check_rows_known(w)

    if (fixed_indices is None) != (fixed_coords is None):
        raise ValueError("fixed_indices and fixed_coords must be given together")
    if init is not None:
        init = np.asarray(init, dtype=float)
        if init.shape != (n, config.dim):
            raise ValueError(
                f"init shape {init.shape} does not match {n} rows "
                f"in dimension {config.dim}"
            )
    rng = np.random.default_rng(config.seed)

    if fixed_indices is None:
        coords = init.copy() if init is not None else rng.standard_normal((n, config.dim))
        n_comp, _ = _cc(csr_matrix(w), directed=False)
        v_pinv = _laplacian_pinv(mask_laplacian(w), connected=n_comp == 1)

        def update(x: np.ndarray) -> np.ndarray:
            return v_pinv @ (guttman_b(x, dist, w) @ x)

    else:
        fixed_idx = np.asarray(fixed_indices, dtype=int)
        fixed_x = np.asarray(fixed_coords, dtype=float)
        if fixed_x.shape != (fixed_idx.size, config.dim):
            raise ValueError(
                f"fixed coordinates shape {fixed_x.shape} does not match "
                f"{fixed_idx.size} rows in dimension {config.dim}"
            )
        free_idx = np.setdiff1d(np.arange(n), fixed_idx)
        if free_idx.size == 0:
            raise ValueError("at least one row must be free to update")
        coords = np.zeros((n, config.dim))
        coords[fixed_idx] = fixed_x
        if init is not None:
            coords[free_idx] = init[free_idx]
        else:
            coords[free_idx] = rng.standard_normal((free_idx.size, config.dim))
        v = mask_laplacian(w)
        v_ff = v[np.ix_(free_idx, free_idx)]
        v_fc = v[np.ix_(free_idx, fixed_idx)]

        try:
            solve_ff = _factorized_solver(v_ff)
        except np.linalg.LinAlgError:
            v_ff_pinv = np.linalg.pinv(v_ff, hermitian=True)
            solve_ff = lambda rhs: v_ff_pinv @ rhs  # noqa: E731

        def update(x: np.ndarray) -> np.ndarray:
            b = guttman_b(x, dist, w)
            rhs = b[np.ix_(free_idx, free_idx)] @ x[free_idx]
            rhs += (b[np.ix_(free_idx, fixed_idx)] - v_fc) @ x[fixed_idx]
            out = x.copy()
            out[free_idx] = solve_ff(rhs)
            return out

    trace = [stress(coords, dist, w)]
    converged = False
    epochs = 0
    for _ in range(config.max_epochs):
        coords = update(coords)
        epochs += 1
        trace.append(stress(coords, dist, w))
        if trace[-2] - trace[-1] < config.tol:
            converged = True
            break
    return EmbeddingResult(
        coords=coords,
        stress_trace=np.array(trace),
        epochs_run=epochs,
        converged=converged,
        n_clients=n,
    )


def smacof_anchored(
    pdm: PartialDistanceMatrix,
    anchor_coords: np.ndarray,
    config: MdsConfig,
    init: np.ndarray | None = None,
) -> EmbeddingResult:
    """Anchored SMACOF: clients move, anchors stay at ``anchor_coords``.

    Requires the pure protocol mask (no revealed client-client entries); with
    revealed entries the closed-form update is invalid and the caller should
    run :func:`smacof_full` instead. Starts from a seeded standard normal
    client configuration unless ``init`` (one row per client) is given.
    Per-epoch work touches only the N x M client-anchor block, so large
    anchor sets stay cheap.
    """
    if pdm.known_cc:
        raise ValueError(
            "anchored mode requires an empty client-client block; "
            f"{len(pdm.known_cc)} revealed pairs present, use full mode"
        )
    n, m = pdm.n_clients, pdm.n_anchors
    if m == 0:
        raise ValueError("anchored mode needs at least one anchor")
    anchor_coords = np.asarray(anchor_coords, dtype=float)
    if anchor_coords.shape != (m, config.dim):
        raise ValueError(
            f"anchor coordinates shape {anchor_coords.shape} does not match "
            f"{m} anchors in dimension {config.dim}"
        )

    delta12 = pdm.d12
    # Anchors never move, so their residual against d22 is a constant stress
    # term; include it to keep traces comparable with the full solver.
    anchor_actual = cdist(anchor_coords, anchor_coords)
    off_diag = ~np.eye(m, dtype=bool)
    const_stress = float(np.sum((pdm.d22 - anchor_actual)[off_diag] ** 2) / 2.0)

    rng = np.random.default_rng(config.seed)
    if init is not None:
        init = np.asarray(init, dtype=float)
        if init.shape != (n, config.dim):
            raise ValueError(
                f"init shape {init.shape} does not match {n} clients "
                f"in dimension {config.dim}"
            )
        coords = init.copy()
    else:
        coords = rng.standard_normal((n, config.dim))
    # Client-anchor distances via the Gram expansion: one BLAS product per
    # epoch instead of a compiled pairwise loop. Anchor norms are constant.
    anchor_sq = np.einsum("ij,ij->i", anchor_coords, anchor_coords)
    anchor_colsum = anchor_coords.sum(axis=0)

    def client_anchor_dists(x: np.ndarray) -> np.ndarray:
        x_sq = np.einsum("ij,ij->i", x, x)
        gram = x @ anchor_coords.T
        return np.sqrt(np.maximum(x_sq[:, None] + anchor_sq[None, :] - 2.0 * gram, 0.0))

    actual12 = client_anchor_dists(coords)

    def client_stress(d12_actual: np.ndarray) -> float:
        return float(np.sum((delta12 - d12_actual) ** 2))

    trace = [client_stress(actual12) + const_stress]
    converged = False
    epochs = 0
    for _ in range(config.max_epochs):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(actual12 > 0.0, delta12 / actual12, 0.0)
        b12 = -ratio
        b11_diag = ratio.sum(axis=1)
        coords = (b11_diag[:, None] * coords + b12 @ anchor_coords + anchor_colsum) / m
        epochs += 1
        actual12 = client_anchor_dists(coords)
        trace.append(client_stress(actual12) + const_stress)
        if trace[-2] - trace[-1] < config.tol:
            converged = True
            break
    return EmbeddingResult(
        coords=coords,
        stress_trace=np.array(trace),
        epochs_run=epochs,
        converged=converged,
        n_clients=n,
    )


def classical_mds(dist: np.ndarray, dim: int) -> np.ndarray:
    """Classical (Torgerson) MDS from a full distance matrix.

    Double-centers the squared distances, eigendecomposes the Gram matrix and
    keeps the ``dim`` leading non-negative components; trailing columns are
    zero-padded when the matrix has lower rank than requested.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if dist.shape != (n, n):
        raise ValueError(f"distance matrix must be square, got {dist.shape}")
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * j @ (dist**2) @ j
    eigvals, eigvecs = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1][:dim]
    vals = np.clip(eigvals[order], 0.0, None)
    coords = eigvecs[:, order] * np.sqrt(vals)
    if dim > n:
        coords = np.hstack([coords, np.zeros((n, dim - coords.shape[1]))])
    return coords


def estimate_distances(emb: EmbeddingResult) -> np.ndarray:
    """Estimated client-client distance matrix from an embedding.

    Uses the client rows only; the result is symmetric with a zero diagonal.
    """
    clients = emb.coords[: emb.n_clients]
    k_hat = cdist(clients, clients)
    k_hat = (k_hat + k_hat.T) / 2.0
    np.fill_diagonal(k_hat, 0.0)
    return k_hat


def aligned_error(recovered: np.ndarray, truth: np.ndarray) -> float:
    """Relative Frobenius error after optimal rigid alignment.

    Centers both configurations, solves orthogonal Procrustes for the
    rotation/reflection, and reports ``||R(recovered) - truth||_F /
    ||truth||_F`` on the centered coordinates.
    """
    recovered = np.asarray(recovered, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if recovered.shape != truth.shape:
        raise ValueError(f"shape mismatch: {recovered.shape} vs {truth.shape}")
    rec = recovered - recovered.mean(axis=0)
    tru = truth - truth.mean(axis=0)
    denom = np.linalg.norm(tru)
    if denom == 0.0:
        raise ValueError("truth configuration has zero spread")
    rotation, _ = orthogonal_procrustes(rec, tru)
    return float(np.linalg.norm(rec @ rotation - tru) / denom)
