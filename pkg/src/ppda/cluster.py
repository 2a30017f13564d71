"""Clustering by constrained Laplacian rank.

Learns a row-stochastic similarity ``P`` close to a given adjacency while
forcing the Laplacian of ``(P + P^T) / 2`` to have exactly ``k`` zero
eigenvalues, i.e. the similarity graph splits into exactly ``k`` connected
components. Cluster labels then fall out of the components directly, with no
k-means step.

The rank constraint is enforced through an adaptive penalty: each outer
iteration takes the ``k`` bottom eigenvectors ``F`` of the current Laplacian,
updates every row as a simplex projection of ``a_i - (lambda/2) v_i`` where
``v_ij = ||f_i - f_j||^2``, and doubles or halves ``lambda`` depending on
whether the spectrum has too few or too many near-zero eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.spatial.distance import cdist

from .graphlearn import AdjacencyMatrix, project_simplex, weights_to_laplacian


@dataclass(frozen=True)
class ClrConfig:
    """Cluster count, penalty schedule start, outer-iteration cap, and the
    relative eigenvalue threshold deciding when an eigenvalue counts as zero."""

    k: int
    lambda0: float = 1.0
    max_outer: int = 100
    rank_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"cluster count must be positive, got {self.k}")
        if self.lambda0 <= 0.0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if self.max_outer < 1:
            raise ValueError(f"max_outer must be positive, got {self.max_outer}")
        if self.rank_tol <= 0.0:
            raise ValueError(f"rank_tol must be positive, got {self.rank_tol}")


@dataclass
class ClusterResult:
    """Labels, the learned similarity, and the penalty trajectory.

    ``p`` is the symmetrized similarity; ``p_rows`` keeps the raw
    row-stochastic matrix whose rows sum to one before symmetrization.
    """

    labels: np.ndarray
    p: AdjacencyMatrix
    lambda_trace: np.ndarray
    converged: bool
    p_rows: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))


def connected_components(adjacency: AdjacencyMatrix | np.ndarray, threshold: float = 1e-10) -> np.ndarray:
    """Component labels over edges with weight strictly above ``threshold``."""
    a = adjacency.a if isinstance(adjacency, AdjacencyMatrix) else np.asarray(adjacency, dtype=float)
    if threshold < 0.0:
        raise ValueError(f"threshold must be non-negative, got {threshold}")
    _, labels = _cc(csr_matrix(a > threshold), directed=False)
    return labels


def clr(adjacency: AdjacencyMatrix, config: ClrConfig) -> ClusterResult:
    """Constrained-Laplacian-rank clustering of a similarity graph.

    Alternates the bottom-eigenvector computation with simplex-projected row
    updates, adapting the penalty weight until the similarity graph has
    exactly ``config.k`` components (``k`` eigenvalues below
    ``rank_tol * lambda_max``). An adjacency that already satisfies the rank
    constraint is returned unchanged.
    """
    a = adjacency.a
    n = adjacency.n_nodes
    if not 1 <= config.k < n:
        raise ValueError(f"cluster count {config.k} must lie in [1, {n - 1}]")

    off_mask = ~np.eye(n, dtype=bool)
    p = a.copy()
    # Start from a feasible point: rows on the simplex, zero diagonal. Rows
    # that already sum to one are left untouched.
    for i in range(n):
        row_sum = p[i][off_mask[i]].sum()
        if abs(row_sum - 1.0) > 1e-9:
            p[i][off_mask[i]] = project_simplex(p[i][off_mask[i]])

    lam = config.lambda0
    lam_trace: list[float] = []
    converged = False
    for outer in range(config.max_outer):
        theta = weights_to_laplacian((p + p.T) / 2.0)
        eigvals, eigvecs = np.linalg.eigh(theta)
        threshold = config.rank_tol * max(eigvals[-1], 1e-300)
        if eigvals[config.k - 1] < threshold <= eigvals[config.k]:
            converged = True
            break
        if outer > 0:
            if eigvals[config.k - 1] >= threshold:
                lam *= 2.0
            elif eigvals[config.k] < threshold:
                lam /= 2.0
        lam_trace.append(lam)
        if lam > 1e14 or lam < 1e-14:
            break

        f = eigvecs[:, : config.k]
        v = cdist(f, f, metric="sqeuclidean")
        target = a - (lam / 2.0) * v
        for i in range(n):
            p[i][off_mask[i]] = project_simplex(target[i][off_mask[i]])
            p[i, i] = 0.0

    sym = (p + p.T) / 2.0
    np.fill_diagonal(sym, 0.0)
    labels = connected_components(sym, threshold=1e-10)
    return ClusterResult(
        labels=labels,
        p=AdjacencyMatrix(a=sym),
        lambda_trace=np.array(lam_trace),
        converged=converged,
        p_rows=p,
    )
