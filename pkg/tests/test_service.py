"""HTTP service: the full stage chain plus error contracts."""

import os
import warnings

import numpy as np
import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore", DeprecationWarning)
    from fastapi.testclient import TestClient

from ppda.service import create_app


@pytest.fixture()
def client():
    return TestClient(create_app())


class TestHealth:
    def test_reports_ok_and_version(self, client):
        res = client.get("/v1/health")
        assert res.status_code == 200
        body = res.json()
        assert body["status"] == "ok"
        assert body["version"]


class TestGenerate:
    def test_er_graph_with_features(self, client, tmp_path):
        res = client.post(
            "/v1/generate",
            json={
                "kind": "er",
                "nodes": 12,
                "p": 0.4,
                "samples": 6,
                "seed": 0,
                "out_dir": str(tmp_path / "g"),
            },
        )
        assert res.status_code == 200
        body = res.json()
        assert body["n_rows"] == 12
        assert body["n_columns"] == 6
        assert body["n_edges"] > 0
        for key in ("graph_csv", "graphml", "features_csv"):
            assert os.path.isfile(body["files"][key])

    def test_blobs(self, client, tmp_path):
        res = client.post(
            "/v1/generate",
            json={
                "kind": "blobs",
                "clusters": 3,
                "per_cluster": 5,
                "dim": 4,
                "seed": 1,
                "out_dir": str(tmp_path / "b"),
            },
        )
        assert res.status_code == 200
        body = res.json()
        assert body["n_rows"] == 15
        assert os.path.isfile(body["files"]["dataset_csv"])

    def test_blobs_missing_shape_is_422(self, client, tmp_path):
        res = client.post(
            "/v1/generate",
            json={"kind": "blobs", "out_dir": str(tmp_path / "x")},
        )
        assert res.status_code == 422

    def test_graph_missing_nodes_is_422(self, client, tmp_path):
        res = client.post(
            "/v1/generate", json={"kind": "er", "out_dir": str(tmp_path / "x")}
        )
        assert res.status_code == 422


class TestFullChain:
    def test_generate_simulate_embed_learn_cluster_evaluate(self, client, tmp_path):
        base = tmp_path

        gen = client.post(
            "/v1/generate",
            json={
                "kind": "blobs",
                "clusters": 3,
                "per_cluster": 10,
                "dim": 6,
                "separation": 9.0,
                "seed": 0,
                "out_dir": str(base / "data"),
            },
        ).json()

        sim = client.post(
            "/v1/simulate",
            json={
                "features": gen["files"]["dataset_csv"],
                "label_column": "label",
                "anchor_count": 8,
                "noise_c": 0.0,
                "seed": 0,
                "out_dir": str(base / "sim"),
            },
        )
        assert sim.status_code == 200
        sim = sim.json()
        assert sim["n_clients"] == 22
        assert sim["n_anchors"] == 8
        assert sim["n_revealed"] == 0
        for key in ("partial_base", "partial_csv", "partial_json", "anchors_csv", "truth_csv", "labels_csv"):
            assert key in sim["files"]

        emb = client.post(
            "/v1/embed",
            json={
                "partial_base": sim["files"]["partial_base"],
                "anchors": sim["files"]["anchors_csv"],
                "mode": "anchored",
                "dim": 3,
                "tol": 1e-9,
                "max_epochs": 3000,
                "seed": 0,
                "out_dir": str(base / "emb"),
            },
        )
        assert emb.status_code == 200
        emb = emb.json()
        assert emb["mode_used"] == "anchored"
        assert emb["converged"]
        assert emb["final_stress"] >= 0.0
        for key in ("embedding_csv", "stress_csv", "distances_csv"):
            assert os.path.isfile(emb["files"][key])

        graph = client.post(
            "/v1/learn-graph",
            json={
                "distances": emb["files"]["distances_csv"],
                "method": "adjacency",
                "neighbors": 6,
                "out_dir": str(base / "graph"),
            },
        )
        assert graph.status_code == 200
        graph = graph.json()
        assert graph["n_nodes"] == 22
        assert graph["n_edges"] > 0

        clu = client.post(
            "/v1/cluster",
            json={
                "graph": graph["files"]["graph_csv"],
                "n_nodes": 22,
                "clusters": 3,
                "out_dir": str(base / "clu"),
            },
        )
        assert clu.status_code == 200
        clu = clu.json()
        assert clu["n_components"] == 3
        assert clu["converged"]

        ev = client.post(
            "/v1/evaluate",
            json={
                "estimated": emb["files"]["distances_csv"],
                "truth": sim["files"]["truth_csv"],
                "labels": clu["files"]["labels_csv"],
                "truth_labels": sim["files"]["labels_csv"],
                "knn_k": 5,
                "out": str(base / "metrics.json"),
            },
        )
        assert ev.status_code == 200
        metrics = ev.json()["metrics"]
        assert set(metrics) == {"re", "fscore", "nmi", "ari"}
        assert metrics["re"] < 0.1
        assert metrics["ari"] == pytest.approx(1.0)
        assert os.path.isfile(str(base / "metrics.json"))

    def test_sgl_route_writes_laplacian(self, client, tmp_path):
        gen = client.post(
            "/v1/generate",
            json={
                "kind": "blobs",
                "clusters": 3,
                "per_cluster": 8,
                "dim": 4,
                "separation": 9.0,
                "seed": 5,
                "out_dir": str(tmp_path / "d"),
            },
        ).json()
        sim = client.post(
            "/v1/simulate",
            json={
                "features": gen["files"]["dataset_csv"],
                "label_column": "label",
                "anchor_count": 5,
                "seed": 0,
                "out_dir": str(tmp_path / "s"),
            },
        ).json()
        emb = client.post(
            "/v1/embed",
            json={
                "partial_base": sim["files"]["partial_base"],
                "anchors": sim["files"]["anchors_csv"],
                "tol": 1e-9,
                "out_dir": str(tmp_path / "e"),
            },
        ).json()
        res = client.post(
            "/v1/learn-graph",
            json={
                "distances": emb["files"]["distances_csv"],
                "method": "sgl",
                "clusters": 3,
                "iters": 200,
                "out_dir": str(tmp_path / "g"),
            },
        )
        assert res.status_code == 200
        body = res.json()
        assert os.path.isfile(body["files"]["laplacian_csv"])
        from ppda.io import read_matrix

        theta = read_matrix(body["files"]["laplacian_csv"])
        assert np.allclose(theta.sum(axis=1), 0.0, atol=1e-8)

    def test_full_mode_embed_runs_on_revealed_matrix(self, client, tmp_path):
        gen = client.post(
            "/v1/generate",
            json={
                "kind": "blobs",
                "clusters": 2,
                "per_cluster": 6,
                "dim": 4,
                "seed": 2,
                "out_dir": str(tmp_path / "d"),
            },
        ).json()
        sim = client.post(
            "/v1/simulate",
            json={
                "features": gen["files"]["dataset_csv"],
                "label_column": "label",
                "anchor_count": 4,
                "reveal_ratio": 0.5,
                "seed": 3,
                "out_dir": str(tmp_path / "s"),
            },
        ).json()
        assert sim["n_revealed"] == round(0.5 * 8 * 7 / 2)
        # anchored request silently upgrades to full because entries exist
        emb = client.post(
            "/v1/embed",
            json={
                "partial_base": sim["files"]["partial_base"],
                "anchors": sim["files"]["anchors_csv"],
                "mode": "anchored",
                "out_dir": str(tmp_path / "e"),
            },
        )
        assert emb.status_code == 200
        assert emb.json()["mode_used"] == "full"


class TestErrorContracts:
    def test_privacy_violation_is_403(self, client, tmp_path):
        gen = client.post(
            "/v1/generate",
            json={
                "kind": "blobs",
                "clusters": 2,
                "per_cluster": 5,
                "dim": 3,
                "seed": 0,
                "out_dir": str(tmp_path / "d"),
            },
        ).json()
        res = client.post(
            "/v1/simulate",
            json={
                "features": gen["files"]["dataset_csv"],
                "label_column": "label",
                "anchor_count": 3,  # = dim -> full recovery possible
                "enforce_privacy": True,
                "out_dir": str(tmp_path / "s"),
            },
        )
        assert res.status_code == 403
        assert "privacy" in res.json()["detail"].lower() or "anchor" in res.json()["detail"].lower()

    def test_both_anchor_selectors_is_422(self, client, tmp_path):
        gen = client.post(
            "/v1/generate",
            json={
                "kind": "blobs",
                "clusters": 2,
                "per_cluster": 5,
                "dim": 3,
                "seed": 0,
                "out_dir": str(tmp_path / "d"),
            },
        ).json()
        res = client.post(
            "/v1/simulate",
            json={
                "features": gen["files"]["dataset_csv"],
                "anchor_count": 2,
                "anchor_fraction": 0.1,
                "out_dir": str(tmp_path / "s"),
            },
        )
        assert res.status_code == 422

    def test_missing_file_is_404(self, client, tmp_path):
        res = client.post(
            "/v1/simulate",
            json={
                "features": str(tmp_path / "missing.csv"),
                "anchor_count": 2,
                "out_dir": str(tmp_path / "s"),
            },
        )
        assert res.status_code == 404

    def test_evaluate_with_nothing_is_422(self, client):
        res = client.post("/v1/evaluate", json={})
        assert res.status_code == 422

    def test_evaluate_half_pair_is_422(self, client, tmp_path):
        res = client.post("/v1/evaluate", json={"estimated": str(tmp_path / "x.csv")})
        assert res.status_code == 422

    def test_sgl_without_cluster_count_is_422(self, client, tmp_path):
        from ppda.io import write_matrix

        path = str(tmp_path / "d.csv")
        write_matrix(path, np.array([[0.0, 1.0], [1.0, 0.0]]))
        res = client.post(
            "/v1/learn-graph",
            json={"distances": path, "method": "sgl", "out_dir": str(tmp_path / "g")},
        )
        assert res.status_code == 422


class TestPipelineEndpoints:
    def _config(self, tmp_path):
        return {
            "pipeline": "synthetic_table1",
            "graph": {"kind": "er", "n_clients": 6, "n_anchors": 3, "p": 0.5, "dim": 4},
            "seeds": [0],
            "output_dir": str(tmp_path / "out"),
        }

    def test_validate_endpoint(self, client, tmp_path):
        res = client.post("/v1/validate", json={"config": self._config(tmp_path)})
        assert res.status_code == 200
        assert res.json()["ok"]

    def test_validate_reports_violations(self, client, tmp_path):
        cfg = self._config(tmp_path)
        cfg.pop("graph")
        res = client.post("/v1/validate", json={"config": cfg})
        assert res.status_code == 200
        body = res.json()
        assert not body["ok"]
        assert body["report"]["violations"]

    def test_pipeline_endpoint_runs_and_writes(self, client, tmp_path):
        cfg = self._config(tmp_path)
        res = client.post("/v1/pipeline", json={"config": cfg})
        assert res.status_code == 200
        payload = res.json()["payload"]
        assert payload["pipeline"] == "synthetic_table1"
        assert os.path.isfile(os.path.join(cfg["output_dir"], "summary.csv"))

    def test_pipeline_endpoint_surfaces_stage_errors(self, client, tmp_path):
        cfg = self._config(tmp_path)
        cfg.pop("graph")
        res = client.post("/v1/pipeline", json={"config": cfg})
        assert res.status_code == 400
        assert res.json()["stage"] == "validate"
