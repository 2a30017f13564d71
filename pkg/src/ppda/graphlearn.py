"""Graph learning from embeddings or distance estimates.

Three routes into a graph:

- ``learn_adjacency``: per-row closed form. Row i of the adjacency solves
  ``min a^T k + gamma * ||a||^2`` over the probability simplex with a zero
  self-weight, where ``k`` holds squared distances; the solution is a simplex
  projection of ``-k / (2 gamma)``. The regularizer can be given explicitly
  or derived per row from a target neighbor count.
- ``sgl_lite``: a simplified spectral-constrained maximum-likelihood solver
  over Laplacians of non-negative edge weights, alternating projected
  gradient ascent with an eigenvector-guided edge cut that enforces a target
  number of connected components.
- ``scm_from_embeddings`` / ``scm_from_distances``: sample covariance
  matrices, either directly from coordinates or reconstructed from squared
  distances and Gram diagonal via double centering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import cdist

from .mds import EmbeddingResult


@dataclass
class AdjacencyMatrix:
    """Symmetric non-negative adjacency with a zero diagonal.

    ``gamma`` records the mean per-row regularizer when the matrix came from
    the neighbor-count rule; it is informational only.
    """

    a: np.ndarray
    gamma: float | None = None

    def __post_init__(self) -> None:
        self.a = np.asarray(self.a, dtype=float)
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise ValueError(f"adjacency must be square, got {self.a.shape}")
        if not np.allclose(self.a, self.a.T, atol=1e-12):
            raise ValueError("adjacency must be symmetric")
        if np.any(self.a < 0.0):
            raise ValueError("adjacency entries must be non-negative")
        if np.any(np.abs(np.diagonal(self.a)) > 0.0):
            raise ValueError("adjacency diagonal must be zero")

    @property
    def n_nodes(self) -> int:
        return self.a.shape[0]


@dataclass
class LaplacianMatrix:
    """Graph Laplacian: symmetric, non-positive off-diagonal, zero row sums.

    ``converged`` and ``objective_trace`` carry solver diagnostics when the
    matrix came from :func:`sgl_lite`.
    """

    theta: np.ndarray
    converged: bool = True
    objective_trace: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float)
        n = self.theta.shape[0]
        if self.theta.shape != (n, n):
            raise ValueError(f"laplacian must be square, got {self.theta.shape}")
        if not np.array_equal(self.theta, self.theta.T):
            raise ValueError("laplacian must be symmetric")
        off = self.theta - np.diag(np.diagonal(self.theta))
        if np.any(off > 0.0):
            raise ValueError("laplacian off-diagonal entries must be non-positive")
        if np.any(np.abs(self.theta.sum(axis=1)) > 1e-9 * max(1.0, np.abs(self.theta).max())):
            raise ValueError("laplacian row sums must be zero")

    @property
    def n_nodes(self) -> int:
        return self.theta.shape[0]


@dataclass
class Scm:
    """Sample covariance-style Gram matrix, symmetric and PSD within tolerance."""

    s: np.ndarray

    def __post_init__(self) -> None:
        self.s = np.asarray(self.s, dtype=float)
        n = self.s.shape[0]
        if self.s.shape != (n, n):
            raise ValueError(f"matrix must be square, got {self.s.shape}")
        if not np.allclose(self.s, self.s.T, atol=1e-10 * max(1.0, np.abs(self.s).max())):
            raise ValueError("matrix must be symmetric")


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Sort-and-threshold: with ``u`` the values sorted in decreasing order, the
    threshold is set by the largest index whose shifted partial sum stays
    positive, then everything below it clips to zero.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    if v.size == 0:
        raise ValueError("cannot project an empty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    cond = u + (1.0 - css) / idx > 0.0
    rho = int(np.nonzero(cond)[0][-1])
    theta = (1.0 - css[rho]) / (rho + 1)
    return np.maximum(v + theta, 0.0)


def scm_from_embeddings(emb: EmbeddingResult | np.ndarray) -> Scm:
    """Gram matrix of the client coordinates."""
    coords = emb.coords[: emb.n_clients] if isinstance(emb, EmbeddingResult) else np.asarray(emb, dtype=float)
    s = coords @ coords.T
    return Scm(s=(s + s.T) / 2.0)


def scm_from_distances(sq_dist: np.ndarray, gram_diag: np.ndarray) -> Scm:
    """Recover a Gram matrix from squared distances and its own diagonal.

    Uses the polarization identity ``S = -(K - 1 d^T - d 1^T) / 2`` where
    ``K`` holds squared pairwise distances and ``d`` the squared norms. With
    consistent inputs this equals the Gram matrix exactly.
    """
    sq_dist = np.asarray(sq_dist, dtype=float)
    gram_diag = np.asarray(gram_diag, dtype=float).ravel()
    n = gram_diag.size
    if sq_dist.shape != (n, n):
        raise ValueError(f"squared-distance shape {sq_dist.shape} does not match {n} norms")
    if not np.allclose(sq_dist, sq_dist.T, atol=1e-9 * max(1.0, np.abs(sq_dist).max())):
        raise ValueError("squared-distance matrix must be symmetric")
    ones = np.ones(n)
    s = -0.5 * (sq_dist - np.outer(ones, gram_diag) - np.outer(gram_diag, ones))
    return Scm(s=(s + s.T) / 2.0)


def gram_to_sq_dist(s: np.ndarray) -> np.ndarray:
    """Squared pairwise distances implied by a Gram matrix."""
    d = np.diagonal(s)
    k = d[:, None] + d[None, :] - 2.0 * s
    return np.clip(k, 0.0, None)


def _neighbor_gamma(row: np.ndarray, m: int) -> float:
    """Per-row regularizer that makes the simplex solution exactly m-sparse."""
    srt = np.sort(row)
    gamma = 0.5 * (m * srt[m] - srt[:m].sum())
    # Ties or identical distances can push the closed form to zero; any tiny
    # positive value then yields the same (uniform over ties) projection.
    return max(gamma, 1e-12)


def learn_adjacency(
    sq_dist: np.ndarray,
    gamma: float | None = None,
    neighbors: int | None = None,
) -> AdjacencyMatrix:
    """Closed-form per-row graph from squared distances.

    Exactly one of ``gamma`` (shared explicit regularizer) and ``neighbors``
    (target per-row neighbor count ``m``, regularizer derived row-wise from
    the sorted distances) must be given. Rows solve the simplex-constrained
    quadratic independently and the result is symmetrized as ``(A + A^T)/2``.
    With the neighbor rule each pre-symmetrization row has exactly ``m``
    non-zeros when the row distances are distinct.
    """
    k = np.asarray(sq_dist, dtype=float)
    n = k.shape[0]
    if k.shape != (n, n):
        raise ValueError(f"distance matrix must be square, got {k.shape}")
    if n < 2:
        raise ValueError("need at least two nodes to learn a graph")
    if (gamma is None) == (neighbors is None):
        raise ValueError("specify exactly one of gamma or neighbors")
    if gamma is not None and gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if neighbors is not None and not 1 <= neighbors <= n - 2:
        raise ValueError(f"neighbors must lie in [1, {n - 2}], got {neighbors}")

    a = np.zeros((n, n))
    off_mask = ~np.eye(n, dtype=bool)
    gammas = []
    for i in range(n):
        row = k[i][off_mask[i]]
        g = gamma if gamma is not None else _neighbor_gamma(row, neighbors)
        gammas.append(g)
        a[i][off_mask[i]] = project_simplex(-row / (2.0 * g))
    sym = (a + a.T) / 2.0
    np.fill_diagonal(sym, 0.0)
    return AdjacencyMatrix(a=sym, gamma=float(np.mean(gammas)))


def weights_to_laplacian(weights: np.ndarray) -> np.ndarray:
    """Laplacian from a symmetric non-negative weight matrix."""
    return np.diag(weights.sum(axis=1)) - weights


def _rank_adaptive_objective(
    weights: np.ndarray, k_cost: np.ndarray, alpha: float, k: int, tol_scale: float = 1e-9
) -> tuple[float, np.ndarray]:
    """Penalized likelihood and eigenvalues for the current weights.

    ``log gdet`` is taken at the target rank: the ``k`` smallest eigenvalues
    are exempt (they vanish at the component target) and the remaining
    ``n - k`` must all stay positive. A graph fragmented beyond ``k``
    components therefore scores ``-inf``, which is what stops gradient steps
    from disconnecting more than the target allows.
    """
    theta = weights_to_laplacian(weights)
    eigvals = np.linalg.eigvalsh(theta)
    top = max(eigvals[-1], 1e-300)
    kept = eigvals[k:]
    if kept.size == 0 or kept.min() <= tol_scale * top:
        return -np.inf, eigvals
    half = np.sum(weights * k_cost) / 2.0
    l1 = weights.sum() / 2.0
    return float(np.sum(np.log(kept)) - half - alpha * l1), eigvals


def _component_cut(weights: np.ndarray, vectors: np.ndarray, k: int) -> np.ndarray:
    """Zero out edges so the graph splits into exactly ``k`` components.

    Edges are ranked by the squared distance between their endpoints in the
    spectral embedding given by the ``k`` bottom eigenvectors; the most
    separated edges are removed first, then removed edges are greedily
    restored (least separated first) while more than ``k`` components remain.
    """
    n = weights.shape[0]
    n_comp, _ = _cc(csr_matrix(weights > 0.0), directed=False)
    if n_comp >= k:
        return weights.copy()
    sep = cdist(vectors, vectors, metric="sqeuclidean")
    ii, jj = np.nonzero(np.triu(weights, k=1) > 0.0)
    order = np.argsort(sep[ii, jj])[::-1]
    cut = weights.copy()
    removed: list[int] = []
    for pos in order:
        i, j = ii[pos], jj[pos]
        cut[i, j] = 0.0
        cut[j, i] = 0.0
        removed.append(pos)
        n_comp, _ = _cc(csr_matrix(cut > 0.0), directed=False)
        if n_comp >= k:
            break
    # Restore removed edges that do not merge components back below k.
    for pos in reversed(removed):
        i, j = ii[pos], jj[pos]
        n_comp, labels = _cc(csr_matrix(cut > 0.0), directed=False)
        if n_comp <= k:
            break
        if labels[i] != labels[j]:
            continue
        cut[i, j] = weights[i, j]
        cut[j, i] = weights[j, i]
    return cut


def _initial_weights(k_cost: np.ndarray) -> np.ndarray:
    """Neighbor-rule graph plus a faint spanning tree for connectivity."""
    n = k_cost.shape[0]
    if n == 2:
        base = learn_adjacency(k_cost, gamma=1.0).a
    else:
        base = learn_adjacency(k_cost, neighbors=min(10, n - 2)).a
    mst = minimum_spanning_tree(csr_matrix(k_cost + 1e-12)).toarray()
    tree_edges = (mst + mst.T) > 0.0
    floor = 1e-3 * max(base.max(), 1e-12)
    weights = base.copy()
    weights[tree_edges & (weights < floor)] = floor
    return weights


def sgl_lite(s: Scm | np.ndarray, k: int, alpha: float = 0.0, iters: int = 300) -> LaplacianMatrix:
    """Spectral-constrained graph Laplacian estimation, simplified.

    Maximizes ``log gdet(Theta) - tr(Theta S) - alpha ||w||_1`` over
    Laplacians of non-negative edge weights, subject to the graph having
    exactly ``k`` connected components (so the ``k`` smallest eigenvalues
    vanish). Alternates projected gradient ascent on the weights with an
    eigenvector-guided cut; every accepted move keeps the recorded objective
    non-decreasing, and a run that never reaches the component target returns
    the best iterate flagged ``converged=False``.
    """
    s_mat = s.s if isinstance(s, Scm) else Scm(s=np.asarray(s, dtype=float)).s
    n = s_mat.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"component count k must lie in [1, {n - 1}], got {k}")
    if iters < 1:
        raise ValueError(f"iters must be positive, got {iters}")
    eigvals_s = np.linalg.eigvalsh(s_mat)
    if eigvals_s[0] < -1e-8 * max(np.trace(s_mat), 1.0):
        raise ValueError(
            f"matrix is not positive semidefinite (lambda_min = {eigvals_s[0]:.3e})"
        )

    k_cost = gram_to_sq_dist(s_mat)
    weights = _initial_weights(k_cost)
    obj, eigvals = _rank_adaptive_objective(weights, k_cost, alpha, k)
    trace = [obj]
    best_weights, best_obj = weights.copy(), obj
    step = 1.0
    off_mask = ~np.eye(n, dtype=bool)

    for _ in range(iters):
        theta = weights_to_laplacian(weights)
        vals, vecs = np.linalg.eigh(theta)
        # Gradient of the rank-target log-gdet: pseudo-inverse restricted to
        # the n - k leading eigendirections.
        kept_vals = np.maximum(vals[k:], 1e-300)
        kept_vecs = vecs[:, k:]
        pinv = (kept_vecs / kept_vals) @ kept_vecs.T
        grad_field = np.diagonal(pinv)[:, None] + np.diagonal(pinv)[None, :] - 2.0 * pinv
        grad = grad_field - k_cost - alpha
        grad[~off_mask] = 0.0

        improved = False
        for _ in range(30):
            cand = np.clip(weights + step * grad, 0.0, None)
            cand = (cand + cand.T) / 2.0
            cand_obj, _ = _rank_adaptive_objective(cand, k_cost, alpha, k)
            if cand_obj >= obj:
                weights, obj = cand, cand_obj
                step *= 1.5
                improved = True
                break
            step /= 2.0

        cut = _component_cut(weights, vecs[:, :k], k)
        if not np.array_equal(cut, weights):
            cut_obj, _ = _rank_adaptive_objective(cut, k_cost, alpha, k)
            if cut_obj >= obj:
                weights, obj = cut, cut_obj
        trace.append(obj)
        if obj > best_obj:
            best_weights, best_obj = weights.copy(), obj
        n_comp, _ = _cc(csr_matrix(weights > 0.0), directed=False)
        if n_comp == k and not improved:
            break

    n_comp, _ = _cc(csr_matrix(weights > 0.0), directed=False)
    if n_comp != k:
        weights, obj = best_weights, best_obj
        n_comp, _ = _cc(csr_matrix(weights > 0.0), directed=False)
    theta = weights_to_laplacian(weights)
    return LaplacianMatrix(
        theta=theta,
        converged=bool(n_comp == k),
        objective_trace=np.array(trace),
    )
