"""Synthetic data generation and dataset ingestion.

Graph models (Erdos-Renyi, Barabasi-Albert, random geometric), improper-GMRF
smooth signals on a graph, isotropic Gaussian blobs, and a small CSV loader
with optional z-score normalization. Also handles the anchor/non-anchor split,
including the privacy rule that anchors must be strictly fewer than the
feature dimension when enforcement is requested.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

GRAPH_KINDS = ("er", "ba", "rgg")


class PrivacyViolation(ValueError):
    """Raised when an anchor split would let the server reconstruct clients.

    Exact reconstruction becomes possible once the number of anchors reaches
    the feature dimension (plus one for the translation), so enforcement
    rejects any split with ``n_anchors >= dim``.
    """


@dataclass(frozen=True)
class GraphSpec:
    """Parameters of a random graph draw.

    ``p`` is the edge probability for ``er`` and the connection radius on the
    unit square for ``rgg``; ``m`` is the attachment count for ``ba``.
    """

    kind: str
    n_nodes: int
    p: float = 0.1
    m: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in GRAPH_KINDS:
            raise ValueError(f"unknown graph kind {self.kind!r}, expected one of {GRAPH_KINDS}")
        if self.n_nodes < 2:
            raise ValueError(f"n_nodes must be at least 2, got {self.n_nodes}")
        if self.kind == "er" and not 0.0 <= self.p <= 1.0:
            raise ValueError(f"edge probability must lie in [0, 1], got {self.p}")
        if self.kind == "rgg" and self.p <= 0.0:
            raise ValueError(f"connection radius must be positive, got {self.p}")
        if self.kind == "ba" and self.m < 1:
            raise ValueError(f"attachment count must be at least 1, got {self.m}")


@dataclass
class Dataset:
    """Feature rows with optional integer class labels."""

    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {self.features.shape}")
        if not np.isfinite(self.features).all():
            raise ValueError("features contain non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.features.shape[0],):
                raise ValueError(
                    f"labels length {self.labels.shape} does not match "
                    f"{self.features.shape[0]} feature rows"
                )

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class AnchorSplit:
    """Anchor/non-anchor partition of a dataset.

    ``non_anchors`` keeps the client rows (with their labels, if any) in their
    original relative order; ``anchors`` holds the anchor feature rows, which
    are the only raw coordinates the server is allowed to see.
    """

    non_anchors: Dataset
    anchors: np.ndarray
    anchor_indices: np.ndarray
    non_anchor_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def n_clients(self) -> int:
        return self.non_anchors.n_rows

    @property
    def n_anchors(self) -> int:
        return self.anchors.shape[0]


def generate_graph(spec: GraphSpec) -> np.ndarray:
    """Draw a random graph and return its dense binary adjacency matrix.

    All three models produce simple undirected graphs: a symmetric 0/1 matrix
    with a zero diagonal. Draws are deterministic given ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_nodes
    if spec.kind == "er":
        upper = rng.random((n, n)) < spec.p
        adj = np.triu(upper, k=1).astype(float)
        adj = adj + adj.T
    elif spec.kind == "rgg":
        points = rng.random((n, 2))
        dist = cdist(points, points)
        adj = (dist < spec.p).astype(float)
        np.fill_diagonal(adj, 0.0)
    else:
        adj = _barabasi_albert(n, spec.m, rng)
    return adj


def _barabasi_albert(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Preferential attachment starting from ``m`` isolated seed nodes.

    Each newcomer attaches ``m`` distinct edges; the first newcomer links to
    all seed nodes (they are tied at degree zero), so the final edge count is
    exactly ``m * (n - m)``.
    """
    if m >= n:
        raise ValueError(f"attachment count m={m} must be smaller than n_nodes={n}")
    adj = np.zeros((n, n))
    # Endpoints repeated by degree; sampling uniformly from this list is
    # sampling proportional to degree.
    repeated: list[int] = []
    targets = list(range(m))
    for source in range(m, n):
        for t in targets:
            adj[source, t] = 1.0
            adj[t, source] = 1.0
        repeated.extend(targets)
        repeated.extend([source] * m)
        if source + 1 < n:
            chosen: set[int] = set()
            while len(chosen) < m:
                chosen.add(repeated[rng.integers(len(repeated))])
            targets = sorted(chosen)
    return adj


def graph_laplacian(adjacency: np.ndarray) -> np.ndarray:
    """Combinatorial Laplacian ``L = diag(degrees) - A``."""
    adjacency = np.asarray(adjacency, dtype=float)
    return np.diag(adjacency.sum(axis=1)) - adjacency


def sample_igmrf(adjacency: np.ndarray, n_samples: int, seed: int = 0) -> np.ndarray:
    """Draw smooth signals from the improper GMRF defined by a graph.

    Each sample is a zero-mean Gaussian vector over the nodes with precision
    equal to the graph Laplacian; the covariance is the Laplacian's
    Moore-Penrose pseudo-inverse, realized through its eigendecomposition.
    Samples live in the span of the non-null eigenvectors, so on a connected
    graph every sample is orthogonal to the all-ones vector.

    Returns a ``(n_nodes, n_samples)`` matrix whose rows serve as node
    features. An edgeless graph has a fully null Laplacian and yields zeros.
    """
    adjacency = np.asarray(adjacency, dtype=float)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {adjacency.shape}")
    if not np.array_equal(adjacency, adjacency.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diagonal(adjacency) != 0.0):
        raise ValueError("adjacency must have a zero diagonal")
    if n_samples < 1:
        raise ValueError(f"n_samples must be positive, got {n_samples}")

    theta = graph_laplacian(adjacency)
    eigvals, eigvecs = np.linalg.eigh(theta)
    cutoff = 1e-9 * max(eigvals[-1], 0.0)
    keep = eigvals > cutoff
    n = adjacency.shape[0]
    if not keep.any():
        return np.zeros((n, n_samples))
    # Symmetric pseudo-inverse square root restricted to the non-null span.
    root = (eigvecs[:, keep] / np.sqrt(eigvals[keep])) @ eigvecs[:, keep].T
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, n_samples))
    return root @ z


def generate_blobs(
    n_clusters: int,
    per_cluster: int,
    dim: int,
    separation: float = 10.0,
    seed: int = 0,
) -> Dataset:
    """Isotropic unit-variance Gaussian blobs with balanced cluster sizes.

    Cluster centers are drawn uniformly from ``[-separation, separation]`` in
    each coordinate, which keeps them far apart relative to the unit spread
    once the dimension is moderately large.
    """
    if n_clusters < 1 or per_cluster < 1 or dim < 1:
        raise ValueError("n_clusters, per_cluster and dim must all be positive")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-separation, separation, size=(n_clusters, dim))
    labels = np.repeat(np.arange(n_clusters), per_cluster)
    features = centers[labels] + rng.standard_normal((labels.size, dim))
    return Dataset(features=features, labels=labels, name=f"blobs_k{n_clusters}")


def split_anchors(
    data: Dataset,
    fraction: float | None = None,
    count: int | None = None,
    seed: int = 0,
    enforce_privacy: bool = False,
) -> AnchorSplit:
    """Pick anchor rows uniformly at random and separate them from clients.

    Exactly one of ``fraction`` and ``count`` selects the anchor count; with a
    fraction the count is ``max(1, floor(fraction * n_rows))``. When
    ``enforce_privacy`` is set, splits with at least as many anchors as
    feature dimensions raise :class:`PrivacyViolation`.
    """
    if (fraction is None) == (count is None):
        raise ValueError("specify exactly one of fraction or count")
    n = data.n_rows
    if fraction is not None:
        if not 0.0 < fraction < 1.0:
            raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
        n_anchors = max(1, math.floor(fraction * n))
    else:
        n_anchors = int(count)  # type: ignore[arg-type]
    if not 1 <= n_anchors < n:
        raise ValueError(f"anchor count {n_anchors} must lie in [1, {n - 1}]")
    if enforce_privacy and n_anchors >= data.dim:
        raise PrivacyViolation(
            f"{n_anchors} anchors with feature dimension {data.dim}: clients are "
            f"recoverable unless anchors are fewer than the dimension"
        )

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    anchor_idx = np.sort(order[:n_anchors])
    client_idx = np.sort(order[n_anchors:])
    client_labels = None if data.labels is None else data.labels[client_idx]
    non_anchors = Dataset(
        features=data.features[client_idx].copy(),
        labels=client_labels,
        name=data.name,
    )
    return AnchorSplit(
        non_anchors=non_anchors,
        anchors=data.features[anchor_idx].copy(),
        anchor_indices=anchor_idx,
        non_anchor_indices=client_idx,
    )


def load_csv(path: str, label_column: str | None = None, normalize: str = "none") -> Dataset:
    """Load a rectangular numeric CSV with a header row.

    ``label_column`` names a column to peel off as integer labels; string
    labels are mapped to codes in order of first appearance. ``normalize``
    is ``"none"`` or ``"zscore"`` (constant columns z-score to zero). Parse
    problems raise ``ValueError`` naming the offending row and column.
    """
    if normalize not in ("none", "zscore"):
        raise ValueError(f"normalize must be 'none' or 'zscore', got {normalize!r}")
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        header = [name.strip() for name in header]
        label_pos = None
        if label_column is not None:
            if label_column not in header:
                raise ValueError(
                    f"{path}: label column {label_column!r} not found in header {header}"
                )
            label_pos = header.index(label_column)

        rows: list[list[float]] = []
        labels: list[int] = []
        label_codes: dict[str, int] = {}
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {row_num} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for col, cell in enumerate(row):
                if col == label_pos:
                    labels.append(_parse_label(cell, label_codes))
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: row {row_num}, column {header[col]!r}: "
                        f"cannot parse {cell.strip()!r} as a number"
                    ) from None
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")

    features = np.array(rows, dtype=float)
    if normalize == "zscore":
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        scale = np.where(std > 0.0, std, 1.0)
        features = (features - mean) / scale
        features[:, std == 0.0] = 0.0
    name = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return Dataset(
        features=features,
        labels=np.array(labels, dtype=int) if label_pos is not None else None,
        name=name,
    )


def _parse_label(cell: str, codes: dict[str, int]) -> int:
    text = cell.strip()
    try:
        value = float(text)
    except ValueError:
        return codes.setdefault(text, len(codes))
    if value != int(value):
        return codes.setdefault(text, len(codes))
    return int(value)
