"""FastAPI service exposing the pipeline stages.

Each endpoint wraps one core operation: synthetic data generation, the
distance protocol, embedding, graph learning, clustering, metric evaluation,
whole-pipeline runs, and config validation. The command-line client in
:mod:`ppda.cli` talks to these routes, in-process by default.
"""

from __future__ import annotations

import os

import numpy as np
from fastapi import FastAPI, HTTPException
from scipy.spatial.distance import cdist

from .. import __version__, io
from ..cluster import ClrConfig, clr, connected_components
from ..datagen import (
    Dataset,
    GraphSpec,
    PrivacyViolation,
    generate_blobs,
    generate_graph,
    load_csv,
    sample_igmrf,
    split_anchors,
)
from ..graphlearn import learn_adjacency, sgl_lite
from ..mds import MdsConfig, classical_mds, estimate_distances, smacof_anchored, smacof_full
from ..metrics import ari, f_score, nmi, relative_error
from ..pipelines import PipelineError, run, validate
from ..protocol import NoiseSpec, assemble, client_distances, reveal_blocks
from . import models


def create_app() -> FastAPI:
    app = FastAPI(title="ppda", version=__version__)

    @app.exception_handler(ValueError)
    async def _value_error(_, exc: ValueError):
        from fastapi.responses import JSONResponse

        status = 403 if isinstance(exc, PrivacyViolation) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.exception_handler(PipelineError)
    async def _pipeline_error(_, exc: PipelineError):
        from fastapi.responses import JSONResponse

        return JSONResponse(
            status_code=400, content={"detail": str(exc), "stage": exc.stage}
        )

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(_, exc: FileNotFoundError):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.get("/v1/health", response_model=models.HealthResponse)
    def health() -> models.HealthResponse:
        return models.HealthResponse(status="ok", version=__version__)

    @app.post("/v1/generate", response_model=models.GenerateResponse)
    def generate(req: models.GenerateRequest) -> models.GenerateResponse:
        io.ensure_dir(req.out_dir)
        files: dict[str, str] = {}
        if req.kind == "blobs":
            if req.clusters is None or req.per_cluster is None or req.dim is None:
                raise HTTPException(
                    status_code=422,
                    detail="blobs need clusters, per_cluster and dim",
                )
            data = generate_blobs(
                req.clusters, req.per_cluster, req.dim, separation=req.separation, seed=req.seed
            )
            path = os.path.join(req.out_dir, "dataset.csv")
            io.write_dataset(path, data)
            files["dataset_csv"] = path
            return models.GenerateResponse(
                files=files, n_rows=data.n_rows, n_columns=data.dim
            )
        if req.nodes is None:
            raise HTTPException(status_code=422, detail="graph kinds need nodes")
        spec = GraphSpec(kind=req.kind, n_nodes=req.nodes, p=req.p, m=req.m, seed=req.seed)
        adjacency = generate_graph(spec)
        graph_csv = os.path.join(req.out_dir, "graph.csv")
        graphml = os.path.join(req.out_dir, "graph.graphml")
        io.write_edge_list(graph_csv, adjacency)
        io.write_graphml(graphml, adjacency)
        files.update(graph_csv=graph_csv, graphml=graphml)
        n_columns = None
        if req.samples is not None:
            features = sample_igmrf(adjacency, req.samples, seed=req.seed)
            path = os.path.join(req.out_dir, "features.csv")
            io.write_dataset(path, Dataset(features=features, name="igmrf"))
            files["features_csv"] = path
            n_columns = req.samples
        return models.GenerateResponse(
            files=files,
            n_rows=req.nodes,
            n_columns=n_columns,
            n_edges=int(adjacency.sum() / 2),
        )

    @app.post("/v1/simulate", response_model=models.SimulateResponse)
    def simulate(req: models.SimulateRequest) -> models.SimulateResponse:
        data = load_csv(req.features, label_column=req.label_column, normalize=req.normalize)
        if (req.anchor_fraction is None) == (req.anchor_count is None):
            raise HTTPException(
                status_code=422,
                detail="specify exactly one of anchor_fraction and anchor_count",
            )
        split = split_anchors(
            data,
            fraction=req.anchor_fraction,
            count=req.anchor_count,
            seed=req.seed,
            enforce_privacy=req.enforce_privacy,
        )
        pdm = client_distances(split, NoiseSpec(c=req.noise_c, seed=req.seed))
        if req.reveal_ratio > 0.0:
            pdm = reveal_blocks(pdm, split, req.reveal_ratio, seed=req.seed)
        io.ensure_dir(req.out_dir)
        base = os.path.join(req.out_dir, "partial")
        csv_path, json_path = io.write_partial(
            base,
            pdm,
            {"noise_c": req.noise_c, "revealed_ratio": req.reveal_ratio, "seed": req.seed},
        )
        anchors_path = os.path.join(req.out_dir, "anchors.csv")
        io.write_dataset(anchors_path, Dataset(features=split.anchors, name="anchors"))
        files = {
            "partial_base": base,
            "partial_csv": csv_path,
            "partial_json": json_path,
            "anchors_csv": anchors_path,
        }
        if req.keep_truth:
            truth = cdist(split.non_anchors.features, split.non_anchors.features)
            truth_path = os.path.join(req.out_dir, "true_distances.csv")
            io.write_matrix(truth_path, truth)
            files["truth_csv"] = truth_path
            if split.non_anchors.labels is not None:
                labels_path = os.path.join(req.out_dir, "true_labels.csv")
                io.write_labels(labels_path, split.non_anchors.labels)
                files["labels_csv"] = labels_path
        return models.SimulateResponse(
            files=files,
            n_clients=split.n_clients,
            n_anchors=split.n_anchors,
            n_revealed=len(pdm.known_cc),
        )

    @app.post("/v1/embed", response_model=models.EmbedResponse)
    def embed(req: models.EmbedRequest) -> models.EmbedResponse:
        pdm, _ = io.read_partial(req.partial_base)
        anchors = load_csv(req.anchors).features
        if anchors.shape[0] != pdm.n_anchors:
            raise HTTPException(
                status_code=422,
                detail=f"anchor file has {anchors.shape[0]} rows, "
                f"matrix expects {pdm.n_anchors}",
            )
        dim = req.dim or anchors.shape[1]
        mode = req.mode
        if mode == "anchored" and pdm.known_cc:
            mode = "full"
        config = MdsConfig(
            dim=dim, tol=req.tol, max_epochs=req.max_epochs, mode=mode, seed=req.seed
        )
        if mode == "anchored":
            coords = anchors if dim == anchors.shape[1] else classical_mds(pdm.d22, dim)
            emb = smacof_anchored(pdm, coords, config)
        else:
            dist, mask = assemble(pdm)
            dist = np.where(np.isnan(dist), 0.0, dist)
            emb = smacof_full(dist, mask, config)
            emb.n_clients = pdm.n_clients
        k_hat = estimate_distances(emb)
        io.ensure_dir(req.out_dir)
        emb_path = os.path.join(req.out_dir, "embedding.csv")
        stress_path = os.path.join(req.out_dir, "stress.csv")
        dist_path = os.path.join(req.out_dir, "distances.csv")
        io.write_embedding(emb_path, emb.coords)
        io.write_stress(stress_path, emb.stress_trace)
        io.write_matrix(dist_path, k_hat)
        return models.EmbedResponse(
            files={
                "embedding_csv": emb_path,
                "stress_csv": stress_path,
                "distances_csv": dist_path,
            },
            mode_used=mode,
            epochs_run=emb.epochs_run,
            converged=emb.converged,
            final_stress=float(emb.stress_trace[-1]),
        )

    @app.post("/v1/learn-graph", response_model=models.LearnGraphResponse)
    def learn_graph(req: models.LearnGraphRequest) -> models.LearnGraphResponse:
        distances = io.read_matrix(req.distances)
        io.ensure_dir(req.out_dir)
        files: dict[str, str] = {}
        converged = True
        if req.method == "adjacency":
            n = distances.shape[0]
            gamma, neighbors = req.gamma, req.neighbors
            if gamma is None and neighbors is None:
                neighbors = min(10, n - 2)
            adjacency = learn_adjacency(distances**2, gamma=gamma, neighbors=neighbors)
            weights = adjacency.a
        else:
            if req.clusters is None:
                raise HTTPException(status_code=422, detail="sgl needs a cluster count")
            gram = -0.5 * _double_center(distances**2)
            lap = sgl_lite(gram, k=req.clusters, alpha=req.alpha, iters=req.iters)
            weights = -lap.theta.copy()
            np.fill_diagonal(weights, 0.0)
            weights = np.clip(weights, 0.0, None)
            converged = lap.converged
            lap_path = os.path.join(req.out_dir, "laplacian.csv")
            io.write_matrix(lap_path, lap.theta)
            files["laplacian_csv"] = lap_path
        graph_csv = os.path.join(req.out_dir, "graph.csv")
        graphml = os.path.join(req.out_dir, "graph.graphml")
        io.write_edge_list(graph_csv, weights)
        io.write_graphml(graphml, weights)
        files.update(graph_csv=graph_csv, graphml=graphml)
        return models.LearnGraphResponse(
            files=files,
            n_nodes=distances.shape[0],
            n_edges=int((np.triu(weights, 1) > 0).sum()),
            converged=converged,
        )

    @app.post("/v1/cluster", response_model=models.ClusterResponse)
    def cluster(req: models.ClusterRequest) -> models.ClusterResponse:
        from ..graphlearn import AdjacencyMatrix

        weights = io.read_edge_list(req.graph, req.n_nodes)
        result = clr(
            AdjacencyMatrix(a=weights),
            ClrConfig(k=req.clusters, lambda0=req.lambda0, max_outer=req.max_outer),
        )
        io.ensure_dir(req.out_dir)
        labels_path = os.path.join(req.out_dir, "labels.csv")
        p_path = os.path.join(req.out_dir, "p_graph.csv")
        io.write_labels(labels_path, result.labels)
        io.write_edge_list(p_path, result.p.a)
        return models.ClusterResponse(
            files={"labels_csv": labels_path, "p_graph_csv": p_path},
            n_components=int(np.unique(result.labels).size),
            converged=result.converged,
        )

    @app.post("/v1/evaluate", response_model=models.EvaluateResponse)
    def evaluate(req: models.EvaluateRequest) -> models.EvaluateResponse:
        out: dict[str, float] = {}
        if (req.estimated is None) != (req.truth is None):
            raise HTTPException(
                status_code=422, detail="estimated and truth must be given together"
            )
        if req.estimated is not None and req.truth is not None:
            estimated = io.read_matrix(req.estimated)
            truth = io.read_matrix(req.truth)
            out["re"] = relative_error(estimated, truth)
            k = min(req.knn_k, truth.shape[0] - 1)
            out["fscore"] = f_score(estimated, truth, k=k)
        if (req.labels is None) != (req.truth_labels is None):
            raise HTTPException(
                status_code=422, detail="labels and truth_labels must be given together"
            )
        if req.labels is not None and req.truth_labels is not None:
            labels = io.read_labels(req.labels)
            truth_labels = io.read_labels(req.truth_labels)
            out["nmi"] = nmi(labels, truth_labels)
            out["ari"] = ari(labels, truth_labels)
        if not out:
            raise HTTPException(status_code=422, detail="nothing to evaluate")
        files: dict[str, str] = {}
        if req.out is not None:
            io.write_metrics(req.out, out)
            files["metrics_json"] = req.out
        return models.EvaluateResponse(metrics=out, files=files)

    @app.post("/v1/pipeline", response_model=models.PipelineResponse)
    def pipeline(req: models.PipelineRequest) -> models.PipelineResponse:
        payload = run(req.config)
        return models.PipelineResponse(payload=payload)

    @app.post("/v1/validate", response_model=models.ValidateResponse)
    def validate_config(req: models.ValidateRequest) -> models.ValidateResponse:
        report = validate(req.config)
        return models.ValidateResponse(report=report, ok=report.ok)

    return app


def _double_center(sq_dist: np.ndarray) -> np.ndarray:
    n = sq_dist.shape[0]
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    return j @ sq_dist @ j


app = create_app()
