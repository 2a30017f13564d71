"""Client/server distance exchange.

The server broadcasts the anchor coordinates; each client replies with its
distances to the anchors only, optionally perturbed by bounded uniform noise.
The server then assembles an incomplete distance matrix whose client-client
block is unknown except for explicitly revealed pairs. Raw client features
never appear on the server side of this exchange.

Node ordering everywhere is clients first (0..N-1), anchors last (N..N+M-1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .datagen import AnchorSplit


@dataclass(frozen=True)
class NoiseSpec:
    """Additive measurement noise, uniform on ``[0, c]`` per reported distance."""

    c: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.c < 0.0:
            raise ValueError(f"noise bound c must be non-negative, got {self.c}")


@dataclass
class WeightMask:
    """Binary symmetric mask with a zero diagonal marking known distances."""

    w: np.ndarray

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=float)
        if self.w.ndim != 2 or self.w.shape[0] != self.w.shape[1]:
            raise ValueError(f"mask must be square, got shape {self.w.shape}")
        if not np.array_equal(self.w, self.w.T):
            raise ValueError("mask must be symmetric")
        if np.any(np.diagonal(self.w) != 0.0):
            raise ValueError("mask diagonal must be zero")
        if not np.isin(self.w, (0.0, 1.0)).all():
            raise ValueError("mask entries must be 0 or 1")


@dataclass
class PartialDistanceMatrix:
    """Server-side view of the distance information.

    ``d12`` holds client-to-anchor distances (N x M), ``d22`` the exact
    anchor-to-anchor distances (M x M), and ``known_cc`` any revealed
    client-client distances keyed by client index pairs ``(i, j)`` with
    ``i < j``. No feature vectors are stored.
    """

    d12: np.ndarray
    d22: np.ndarray
    known_cc: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.d12 = np.asarray(self.d12, dtype=float)
        self.d22 = np.asarray(self.d22, dtype=float)
        if self.d12.ndim != 2:
            raise ValueError(f"d12 must be 2-d, got shape {self.d12.shape}")
        m = self.d12.shape[1]
        if self.d22.shape != (m, m):
            raise ValueError(f"d22 shape {self.d22.shape} does not match {m} anchors")
        if np.any(self.d12 < 0.0) or np.any(self.d22 < 0.0):
            raise ValueError("distances must be non-negative")
        if not np.allclose(self.d22, self.d22.T):
            raise ValueError("d22 must be symmetric")
        if np.any(np.abs(np.diagonal(self.d22)) > 0.0):
            raise ValueError("d22 diagonal must be zero")
        n = self.d12.shape[0]
        for (i, j), value in self.known_cc.items():
            if not 0 <= i < j < n:
                raise ValueError(f"revealed pair {(i, j)} out of range for {n} clients")
            if value < 0.0:
                raise ValueError(f"revealed distance for pair {(i, j)} is negative")

    @property
    def n_clients(self) -> int:
        return self.d12.shape[0]

    @property
    def n_anchors(self) -> int:
        return self.d12.shape[1]

    @property
    def size(self) -> int:
        return self.n_clients + self.n_anchors


def client_distances(split: AnchorSplit, noise: NoiseSpec = NoiseSpec()) -> PartialDistanceMatrix:
    """Simulate the anchor broadcast round.

    Client reports carry additive noise drawn uniformly from ``[0, c]``;
    anchor-to-anchor distances are computed exactly on the server.
    """
    d12 = cdist(split.non_anchors.features, split.anchors)
    if noise.c > 0.0:
        rng = np.random.default_rng(noise.seed)
        d12 = d12 + rng.uniform(0.0, noise.c, size=d12.shape)
    d22 = cdist(split.anchors, split.anchors)
    # cdist can leave tiny asymmetries and a nonzero diagonal at float noise level.
    d22 = (d22 + d22.T) / 2.0
    np.fill_diagonal(d22, 0.0)
    return PartialDistanceMatrix(d12=d12, d22=d22)


def reveal_blocks(
    pdm: PartialDistanceMatrix,
    split: AnchorSplit,
    ratio: float,
    seed: int = 0,
) -> PartialDistanceMatrix:
    """Reveal an i.i.d. fraction of exact client-client distances.

    Sampling is uniform without replacement over the ``N (N - 1) / 2``
    client pairs; ``ratio=0`` reveals nothing and ``ratio=1`` reveals every
    pair. Returns a new matrix; the input is not modified.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"reveal ratio must lie in [0, 1], got {ratio}")
    n = pdm.n_clients
    if split.n_clients != n:
        raise ValueError(
            f"split has {split.n_clients} clients but the matrix has {n}"
        )
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    n_reveal = int(round(ratio * len(pairs)))
    known = dict(pdm.known_cc)
    if n_reveal > 0:
        rng = np.random.default_rng(seed)
        chosen = rng.choice(len(pairs), size=n_reveal, replace=False)
        features = split.non_anchors.features
        for idx in chosen:
            i, j = pairs[idx]
            known[(i, j)] = float(np.linalg.norm(features[i] - features[j]))
    return PartialDistanceMatrix(d12=pdm.d12.copy(), d22=pdm.d22.copy(), known_cc=known)


def assemble(pdm: PartialDistanceMatrix) -> tuple[np.ndarray, WeightMask]:
    """Build the full (N+M) x (N+M) distance matrix and its known-entry mask.

    Unknown entries are NaN so that accidental use without consulting the
    mask fails loudly; the mask is the authoritative flag channel. The
    diagonal is zero in the matrix and zero in the mask.
    """
    n, m = pdm.n_clients, pdm.n_anchors
    size = n + m
    dist = np.full((size, size), np.nan)
    mask = np.zeros((size, size))

    dist[:n, n:] = pdm.d12
    dist[n:, :n] = pdm.d12.T
    mask[:n, n:] = 1.0
    mask[n:, :n] = 1.0

    dist[n:, n:] = pdm.d22
    mask[n:, n:] = 1.0 - np.eye(m)

    for (i, j), value in pdm.known_cc.items():
        dist[i, j] = value
        dist[j, i] = value
        mask[i, j] = 1.0
        mask[j, i] = 1.0

    np.fill_diagonal(dist, 0.0)
    np.fill_diagonal(mask, 0.0)
    return dist, WeightMask(w=mask)
