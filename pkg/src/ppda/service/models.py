"""Request and response schemas for the HTTP service.

Endpoints exchange small JSON bodies; bulky numeric payloads (feature
matrices, distance matrices, embeddings) stay on disk and are referenced by
path, so the service is meant to share a filesystem with its clients.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..pipelines import ExperimentConfig, ValidationReport


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateRequest(BaseModel):
    kind: Literal["er", "ba", "rgg", "blobs"]
    out_dir: str
    seed: int = 0
    # Graph kinds.
    nodes: int | None = None
    p: float = 0.1
    m: int = 2
    samples: int | None = None  # IGMRF feature count; omit to skip features
    # Blobs.
    clusters: int | None = None
    per_cluster: int | None = None
    dim: int | None = None
    separation: float = 10.0


class GenerateResponse(BaseModel):
    files: dict[str, str]
    n_rows: int
    n_columns: int | None = None
    n_edges: int | None = None


class SimulateRequest(BaseModel):
    features: str
    out_dir: str
    label_column: str | None = None
    normalize: Literal["none", "zscore"] = "none"
    anchor_fraction: float | None = None
    anchor_count: int | None = None
    enforce_privacy: bool = False
    noise_c: float = Field(default=0.0, ge=0.0)
    reveal_ratio: float = Field(default=0.0, ge=0.0, le=1.0)
    seed: int = 0
    keep_truth: bool = True


class SimulateResponse(BaseModel):
    files: dict[str, str]
    n_clients: int
    n_anchors: int
    n_revealed: int


class EmbedRequest(BaseModel):
    partial_base: str  # path without the .csv/.json suffix
    anchors: str  # anchor feature CSV from simulate
    out_dir: str
    mode: Literal["anchored", "full"] = "anchored"
    dim: int | None = None  # None keeps the anchor feature dimension
    tol: float = Field(default=1e-3, ge=0.0)
    max_epochs: int = Field(default=5000, ge=0)
    seed: int = 0


class EmbedResponse(BaseModel):
    files: dict[str, str]
    mode_used: str
    epochs_run: int
    converged: bool
    final_stress: float


class LearnGraphRequest(BaseModel):
    distances: str  # dense CSV of unsquared distance estimates
    out_dir: str
    method: Literal["adjacency", "sgl"] = "adjacency"
    gamma: float | None = None
    neighbors: int | None = None
    clusters: int | None = None  # component target for sgl
    alpha: float = 0.0
    iters: int = 300


class LearnGraphResponse(BaseModel):
    files: dict[str, str]
    n_nodes: int
    n_edges: int
    converged: bool = True


class ClusterRequest(BaseModel):
    graph: str  # edge-list CSV
    n_nodes: int
    clusters: int
    out_dir: str
    lambda0: float = 1.0
    max_outer: int = 100


class ClusterResponse(BaseModel):
    files: dict[str, str]
    n_components: int
    converged: bool


class EvaluateRequest(BaseModel):
    estimated: str | None = None
    truth: str | None = None
    knn_k: int = Field(default=10, ge=1)
    labels: str | None = None
    truth_labels: str | None = None
    out: str | None = None  # optional metrics.json destination


class EvaluateResponse(BaseModel):
    metrics: dict[str, float]
    files: dict[str, str] = {}


class PipelineRequest(BaseModel):
    config: ExperimentConfig


class PipelineResponse(BaseModel):
    payload: dict


class ValidateRequest(BaseModel):
    config: ExperimentConfig


class ValidateResponse(BaseModel):
    report: ValidationReport
    ok: bool
