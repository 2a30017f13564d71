"""End-to-end experiment runner.

A single JSON-serializable config describes one experiment family; ``run``
executes it seed by seed through the stage chain (data generation, distance
protocol, embedding, graph learning, clustering, metrics) and writes all
artifacts under the output directory. ``validate`` performs the static checks
without running anything.

Per-seed artifacts land in ``<output_dir>/seed_<s>/`` (plus a group level for
swept parameters); the aggregated ``summary.csv`` and ``metrics.json`` land in
``output_dir`` itself. Identical configs and seeds produce byte-identical
summaries. Any stage failure is re-raised as :class:`PipelineError` naming the
stage, with every partially written file removed first.
"""

from __future__ import annotations

import math
import os
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field
from scipy.spatial.distance import cdist

from . import io
from .cluster import ClrConfig, clr
from .datagen import (
    Dataset,
    GraphSpec,
    generate_blobs,
    generate_graph,
    load_csv,
    sample_igmrf,
    split_anchors,
)
from .graphlearn import learn_adjacency
from .mds import MdsConfig, classical_mds, estimate_distances, smacof_anchored, smacof_full
from .metrics import ari, f_score, nmi, relative_error
from .protocol import NoiseSpec, assemble, client_distances, reveal_blocks

PIPELINE_NAMES = (
    "synthetic_table1",
    "partial_table2",
    "blobs",
    "uci_clustering",
    "noise_sweep",
    "animals",
)


class GraphConfig(BaseModel):
    """Synthetic graph + IGMRF feature source: N clients, M anchor nodes."""

    kind: Literal["er", "ba", "rgg"]
    n_clients: int = Field(ge=2)
    n_anchors: int = Field(ge=1)
    p: float = 0.1
    m: int = 2
    dim: int = Field(ge=1)


class BlobsConfig(BaseModel):
    clusters: int = Field(ge=1)
    per_cluster: int = Field(ge=1)
    dim: int = Field(ge=1)
    separation: float = 10.0


class DatasetConfig(BaseModel):
    path: str
    label_column: str | None = None
    normalize: Literal["none", "zscore"] = "none"


class AnchorConfig(BaseModel):
    """Anchor selection for dataset-backed pipelines; graph pipelines carry
    their anchor count in the graph section instead."""

    fraction: float | None = 0.1
    count: int | None = None
    enforce_privacy: bool = False


class MdsSettings(BaseModel):
    mode: Literal["anchored", "full"] = "anchored"
    dim: int | None = None  # None embeds in the original feature dimension
    tol: float = Field(default=1e-3, ge=0.0)
    max_epochs: int = Field(default=5000, ge=0)


class GraphLearnSettings(BaseModel):
    gamma: float | None = None
    neighbors: int | None = 10


class ClusterSettings(BaseModel):
    k: int | None = None  # None falls back to the number of distinct labels
    lambda0: float = 1.0
    max_outer: int = 100


class MetricSettings(BaseModel):
    knn_k: int = Field(default=10, ge=1)


class ExperimentConfig(BaseModel):
    pipeline: Literal[
        "synthetic_table1",
        "partial_table2",
        "blobs",
        "uci_clustering",
        "noise_sweep",
        "animals",
    ]
    graph: GraphConfig | None = None
    blobs: BlobsConfig | None = None
    dataset: DatasetConfig | None = None
    anchors: AnchorConfig = AnchorConfig()
    noise_c: float = Field(default=0.0, ge=0.0)
    reveal_ratio: float = Field(default=0.0, ge=0.0, le=1.0)
    reveal_ratios: list[float] | None = None  # partial_table2 sweep
    noise_levels: list[float] | None = None  # noise_sweep sweep
    mds: MdsSettings = MdsSettings()
    graph_learning: GraphLearnSettings = GraphLearnSettings()
    clustering: ClusterSettings = ClusterSettings()
    metrics: MetricSettings = MetricSettings()
    seeds: list[int] = Field(min_length=1)
    output_dir: str
    note: str | None = None


class ValidationReport(BaseModel):
    violations: list[str] = []
    warnings: list[str] = []

    @property
    def ok(self) -> bool:
        return not self.violations


class PipelineError(RuntimeError):
    """A stage failure, annotated with the stage name and the config echo."""

    def __init__(self, stage: str, config: ExperimentConfig, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(
            f"stage {stage!r} failed for pipeline {config.pipeline!r}: {cause} "
            f"| config: {config.model_dump_json()}"
        )


def _sub_seed(seed: int, stage: int) -> int:
    """Disjoint per-stage random streams derived from one experiment seed."""
    return seed * 8 + stage


def _dataset_shape(cfg: ExperimentConfig) -> tuple[int, int] | None:
    """(rows, dim) for the configured data source, if statically known."""
    if cfg.graph is not None:
        return cfg.graph.n_clients + cfg.graph.n_anchors, cfg.graph.dim
    if cfg.blobs is not None:
        return cfg.blobs.clusters * cfg.blobs.per_cluster, cfg.blobs.dim
    if cfg.dataset is not None and os.path.isfile(cfg.dataset.path):
        with open(cfg.dataset.path) as handle:
            header = handle.readline().strip().split(",")
            rows = sum(1 for line in handle if line.strip())
        dim = len(header) - (1 if cfg.dataset.label_column in header else 0)
        return rows, dim
    return None


def _anchor_count(cfg: ExperimentConfig, n_rows: int) -> int:
    if cfg.graph is not None:
        return cfg.graph.n_anchors
    if cfg.anchors.count is not None:
        return cfg.anchors.count
    if cfg.anchors.fraction is not None:
        return max(1, math.floor(cfg.anchors.fraction * n_rows))
    raise ValueError("anchor selection needs a fraction or a count")


def validate(cfg: ExperimentConfig) -> ValidationReport:
    """Static checks: required sections, privacy rule, shape and mode fit."""
    report = ValidationReport()
    needs = {
        "synthetic_table1": "graph",
        "partial_table2": "graph",
        "noise_sweep": "graph",
        "blobs": "blobs",
        "uci_clustering": "dataset",
        "animals": "dataset",
    }
    section = needs[cfg.pipeline]
    if getattr(cfg, section) is None:
        report.violations.append(
            f"pipeline {cfg.pipeline!r} requires the {section!r} config section"
        )
        return report

    if cfg.dataset is not None and not os.path.isfile(cfg.dataset.path):
        report.violations.append(f"dataset file not found: {cfg.dataset.path}")

    if cfg.graph is None and cfg.anchors.fraction is None and cfg.anchors.count is None:
        report.violations.append("anchor selection needs a fraction or a count")
    if cfg.anchors.fraction is not None and not 0.0 < cfg.anchors.fraction < 1.0:
        report.violations.append(
            f"anchor fraction must lie in (0, 1), got {cfg.anchors.fraction}"
        )

    shape = _dataset_shape(cfg)
    if shape is not None:
        rows, dim = shape
        try:
            n_anchors = _anchor_count(cfg, rows)
        except ValueError as exc:
            report.violations.append(str(exc))
            return report
        if not 1 <= n_anchors < rows:
            report.violations.append(
                f"anchor count {n_anchors} must lie in [1, {rows - 1}]"
            )
        elif cfg.anchors.enforce_privacy and n_anchors >= dim:
            report.violations.append(
                f"privacy violation: {n_anchors} anchors >= feature dimension {dim}; "
                f"clients would be recoverable"
            )
        target_dim = cfg.mds.dim or dim
        if target_dim > dim:
            report.warnings.append(
                f"embedding dimension {target_dim} exceeds the feature dimension {dim}"
            )
        if cfg.mds.dim is not None and cfg.mds.dim != dim and cfg.mds.dim > n_anchors:
            report.warnings.append(
                f"embedding dimension {cfg.mds.dim} exceeds the anchor count "
                f"{n_anchors}; projected anchors span at most {n_anchors - 1} dimensions"
            )
        k = cfg.clustering.k
        if cfg.pipeline in ("blobs", "uci_clustering") and k is not None:
            n_clients = rows - n_anchors
            if not 1 <= k < n_clients:
                report.violations.append(
                    f"cluster count {k} must lie in [1, {n_clients - 1}]"
                )

    reveals = cfg.reveal_ratios if cfg.reveal_ratios is not None else [cfg.reveal_ratio]
    if any(not 0.0 <= r <= 1.0 for r in reveals):
        report.violations.append(f"reveal ratios must lie in [0, 1]: {reveals}")
    if cfg.mds.mode == "anchored" and any(r > 0.0 for r in reveals):
        report.warnings.append(
            "anchored mode cannot use revealed client-client entries; "
            "those runs fall back to the full solver"
        )
    if cfg.noise_levels is not None and any(c < 0.0 for c in cfg.noise_levels):
        report.violations.append(f"noise levels must be non-negative: {cfg.noise_levels}")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        report.warnings.append("duplicate seeds collapse to identical runs")
    return report


class _Tracker:
    """Records every file written so failures can clean up after themselves."""

    def __init__(self) -> None:
        self.files: list[str] = []
        self.dirs: list[str] = []

    def dir(self, path: str) -> str:
        missing = []
        probe = os.path.abspath(path)
        while probe and not os.path.isdir(probe):
            missing.append(probe)
            parent = os.path.dirname(probe)
            if parent == probe:
                break
            probe = parent
        io.ensure_dir(path)
        self.dirs.extend(reversed(missing))
        return path

    def add(self, path: str) -> str:
        self.files.append(path)
        return path

    def cleanup(self) -> None:
        for path in self.files:
            try:
                os.unlink(path)
            except OSError:
                pass
        for path in reversed(self.dirs):
            try:
                os.rmdir(path)
            except OSError:
                pass


def _recover_distances(
    data: Dataset,
    n_anchors: int,
    cfg: ExperimentConfig,
    seed: int,
    noise_c: float,
    reveal_ratio: float,
    enforce_privacy: bool,
) -> dict:
    """One protocol + embedding round; returns matrices and quality metrics."""
    split = split_anchors(
        data, count=n_anchors, seed=_sub_seed(seed, 2), enforce_privacy=enforce_privacy
    )
    pdm = client_distances(split, NoiseSpec(c=noise_c, seed=_sub_seed(seed, 3)))
    if reveal_ratio > 0.0:
        pdm = reveal_blocks(pdm, split, reveal_ratio, seed=_sub_seed(seed, 4))

    dim = data.dim
    target_dim = cfg.mds.dim or dim
    if target_dim == dim:
        anchor_coords = split.anchors
    else:
        anchor_coords = classical_mds(pdm.d22, target_dim)

    mds_config = MdsConfig(
        dim=target_dim,
        tol=cfg.mds.tol,
        max_epochs=cfg.mds.max_epochs,
        mode="anchored" if cfg.mds.mode == "anchored" and not pdm.known_cc else "full",
        seed=_sub_seed(seed, 5),
    )
    if mds_config.mode == "anchored":
        emb = smacof_anchored(pdm, anchor_coords, mds_config)
    else:
        dist, mask = assemble(pdm)
        emb = smacof_full(dist, mask, mds_config)
        emb.n_clients = split.n_clients

    k_hat = estimate_distances(emb)
    d_true = cdist(split.non_anchors.features, split.non_anchors.features)
    knn_k = min(cfg.metrics.knn_k, split.n_clients - 1)
    return {
        "split": split,
        "embedding": emb,
        "k_hat": k_hat,
        "d_true": d_true,
        "metrics": {
            "re": relative_error(k_hat, d_true),
            "fscore": f_score(k_hat, d_true, k=knn_k),
        },
    }


def _cluster_both_routes(rec: dict, cfg: ExperimentConfig) -> dict:
    """CLR on the recovered distances and, for reference, on the true ones."""
    labels_true = rec["split"].non_anchors.labels
    k = cfg.clustering.k
    if k is None:
        if labels_true is None:
            raise ValueError("cluster count is unset and the data has no labels")
        k = int(np.unique(labels_true).size)
    gl = cfg.graph_learning
    n_clients = rec["k_hat"].shape[0]
    neighbors = None if gl.gamma is not None else min(gl.neighbors or 10, n_clients - 2)
    clr_config = ClrConfig(k=k, lambda0=cfg.clustering.lambda0, max_outer=cfg.clustering.max_outer)

    adjacency = learn_adjacency(rec["k_hat"] ** 2, gamma=gl.gamma, neighbors=neighbors)
    result = clr(adjacency, clr_config)
    out = {"adjacency": adjacency, "clr": result, "metrics": {}}
    if labels_true is not None:
        out["metrics"]["nmi_private"] = nmi(result.labels, labels_true)
        out["metrics"]["ari_private"] = ari(result.labels, labels_true)
        adjacency_np = learn_adjacency(rec["d_true"] ** 2, gamma=gl.gamma, neighbors=neighbors)
        result_np = clr(adjacency_np, clr_config)
        out["metrics"]["nmi_nonprivate"] = nmi(result_np.labels, labels_true)
        out["metrics"]["ari_nonprivate"] = ari(result_np.labels, labels_true)
    return out


def _write_seed_artifacts(
    tracker: _Tracker,
    seed_dir: str,
    rec: dict,
    cluster_out: dict | None,
    gl_settings: GraphLearnSettings,
    seed_metrics: dict,
    cfg: ExperimentConfig,
) -> None:
    emb = rec["embedding"]
    io.write_embedding(tracker.add(os.path.join(seed_dir, "embedding.csv")), emb.coords)
    io.write_stress(tracker.add(os.path.join(seed_dir, "stress.csv")), emb.stress_trace)
    io.write_matrix(tracker.add(os.path.join(seed_dir, "distances.csv")), rec["k_hat"])
    if cluster_out is not None:
        adjacency = cluster_out["adjacency"]
        io.write_labels(
            tracker.add(os.path.join(seed_dir, "labels.csv")), cluster_out["clr"].labels
        )
    else:
        n_clients = rec["k_hat"].shape[0]
        neighbors = (
            None
            if gl_settings.gamma is not None
            else min(gl_settings.neighbors or 10, n_clients - 2)
        )
        adjacency = learn_adjacency(
            rec["k_hat"] ** 2, gamma=gl_settings.gamma, neighbors=neighbors
        )
    io.write_edge_list(tracker.add(os.path.join(seed_dir, "graph.csv")), adjacency.a)
    io.write_graphml(tracker.add(os.path.join(seed_dir, "graph.graphml")), adjacency.a)
    io.write_metrics(
        tracker.add(os.path.join(seed_dir, "metrics.json")),
        {"seed_metrics": seed_metrics, "config": cfg.model_dump(), "seed_dir": seed_dir},
    )


def _aggregate(per_seed: list[dict], group: dict | None = None) -> list[dict]:
    """Mean/std rows per metric, ordered by metric name."""
    rows = []
    keys = sorted({k for m in per_seed for k in m})
    for key in keys:
        values = np.array([m[key] for m in per_seed if key in m], dtype=float)
        row = dict(group or {})
        row.update(
            metric=key,
            mean=float(values.mean()),
            std=float(values.std()),
            n_seeds=int(values.size),
        )
        rows.append(row)
    return rows


def _graph_dataset(cfg: ExperimentConfig, seed: int) -> Dataset:
    g = cfg.graph
    assert g is not None
    spec = GraphSpec(
        kind=g.kind, n_nodes=g.n_clients + g.n_anchors, p=g.p, m=g.m, seed=_sub_seed(seed, 0)
    )
    adjacency = generate_graph(spec)
    features = sample_igmrf(adjacency, g.dim, seed=_sub_seed(seed, 1))
    return Dataset(features=features, name=f"{g.kind}_igmrf")


def _source_dataset(cfg: ExperimentConfig, seed: int) -> Dataset:
    if cfg.graph is not None:
        return _graph_dataset(cfg, seed)
    if cfg.blobs is not None:
        b = cfg.blobs
        return generate_blobs(
            b.clusters, b.per_cluster, b.dim, separation=b.separation, seed=_sub_seed(seed, 0)
        )
    assert cfg.dataset is not None
    return load_csv(
        cfg.dataset.path,
        label_column=cfg.dataset.label_column,
        normalize=cfg.dataset.normalize,
    )


def run(cfg: ExperimentConfig) -> dict:
    """Execute an experiment config; returns the aggregate payload.

    The returned dict mirrors the top-level ``metrics.json``: aggregated
    summary rows, the config echo, and the output locations.
    """
    report = validate(cfg)
    if report.violations:
        raise PipelineError(
            "validate", cfg, ValueError("; ".join(report.violations))
        )
    tracker = _Tracker()
    try:
        if cfg.pipeline in ("synthetic_table1", "blobs", "uci_clustering", "animals"):
            summary_rows, extra = _run_plain(cfg, tracker)
        elif cfg.pipeline == "partial_table2":
            summary_rows, extra = _run_sweep(
                cfg,
                tracker,
                "reveal_ratio",
                cfg.reveal_ratios or [0.1, 0.3, 0.5],
            )
        else:
            summary_rows, extra = _run_sweep(
                cfg,
                tracker,
                "noise_c",
                cfg.noise_levels if cfg.noise_levels is not None else [0.0, 0.1, 0.3, 0.5, 0.7],
            )
    except PipelineError:
        tracker.cleanup()
        raise
    except Exception as exc:
        tracker.cleanup()
        raise PipelineError("run", cfg, exc) from exc

    payload = {
        "pipeline": cfg.pipeline,
        "summary": summary_rows,
        "config": cfg.model_dump(),
        "output_dir": cfg.output_dir,
        "warnings": report.warnings,
    }
    if cfg.note:
        payload["note"] = cfg.note
    payload.update(extra)
    tracker.dir(cfg.output_dir)
    io.write_summary(tracker.add(os.path.join(cfg.output_dir, "summary.csv")), summary_rows)
    io.write_metrics(tracker.add(os.path.join(cfg.output_dir, "metrics.json")), payload)
    return payload


def _run_plain(cfg: ExperimentConfig, tracker: _Tracker) -> tuple[list[dict], dict]:
    """Pipelines without a swept parameter: one pass over the seeds."""
    per_seed: list[dict] = []
    wants_clusters = cfg.pipeline in ("blobs", "uci_clustering")
    for seed in cfg.seeds:
        stage = "datagen"
        try:
            data = _source_dataset(cfg, seed)
            n_anchors = _anchor_count(cfg, data.n_rows)
            stage = "protocol/mds"
            rec = _recover_distances(
                data,
                n_anchors,
                cfg,
                seed,
                noise_c=cfg.noise_c,
                reveal_ratio=cfg.reveal_ratio,
                enforce_privacy=cfg.anchors.enforce_privacy,
            )
            seed_metrics = dict(rec["metrics"])
            cluster_out = None
            if wants_clusters:
                stage = "graphlearn/cluster"
                cluster_out = _cluster_both_routes(rec, cfg)
                seed_metrics.update(cluster_out["metrics"])
            stage = "artifacts"
            seed_dir = tracker.dir(os.path.join(cfg.output_dir, f"seed_{seed}"))
            _write_seed_artifacts(
                tracker, seed_dir, rec, cluster_out, cfg.graph_learning, seed_metrics, cfg
            )
            per_seed.append(seed_metrics)
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(stage, cfg, exc) from exc
    return _aggregate(per_seed), {"per_seed": per_seed}


def _run_sweep(
    cfg: ExperimentConfig, tracker: _Tracker, param: str, values: list[float]
) -> tuple[list[dict], dict]:
    """Sweep one protocol parameter with paired seeds across the levels."""
    summary_rows: list[dict] = []
    per_level: dict[str, list[dict]] = {}
    for value in values:
        per_seed: list[dict] = []
        for seed in cfg.seeds:
            stage = "datagen"
            try:
                data = _source_dataset(cfg, seed)
                n_anchors = _anchor_count(cfg, data.n_rows)
                stage = "protocol/mds"
                rec = _recover_distances(
                    data,
                    n_anchors,
                    cfg,
                    seed,
                    noise_c=value if param == "noise_c" else cfg.noise_c,
                    reveal_ratio=value if param == "reveal_ratio" else cfg.reveal_ratio,
                    enforce_privacy=cfg.anchors.enforce_privacy,
                )
                stage = "artifacts"
                seed_dir = tracker.dir(
                    os.path.join(cfg.output_dir, f"{param}_{value:g}", f"seed_{seed}")
                )
                _write_seed_artifacts(
                    tracker, seed_dir, rec, None, cfg.graph_learning, rec["metrics"], cfg
                )
                per_seed.append(dict(rec["metrics"]))
            except PipelineError:
                raise
            except Exception as exc:
                raise PipelineError(stage, cfg, exc) from exc
        group = {param: float(value)}
        summary_rows.extend(_aggregate(per_seed, group=group))
        per_level[f"{value:g}"] = per_seed
    return summary_rows, {"per_level": per_level}
