"""Readers and writers for the on-disk formats.

Everything round-trips through this module: edge-list CSV and GraphML for
graphs, triplet CSV plus a JSON header for partial distance matrices, dense
matrix CSV, embedding/stress/label CSVs, metrics JSON, and the aggregated
summary CSV. Floats are written with ``repr`` so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os

import networkx as nx
import numpy as np

from .datagen import Dataset
from .protocol import PartialDistanceMatrix


def write_dataset(path: str, data: Dataset) -> None:
    """Feature CSV with columns ``f1..fd`` plus a ``label`` column if present."""
    d = data.dim
    header = [f"f{i + 1}" for i in range(d)]
    if data.labels is not None:
        header.append("label")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in range(data.n_rows):
            row = [repr(float(x)) for x in data.features[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            writer.writerow(row)


def write_edge_list(path: str, adjacency: np.ndarray, threshold: float = 0.0) -> None:
    """Edge list CSV ``src,dst,weight`` over the upper triangle."""
    a = np.asarray(adjacency, dtype=float)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["src", "dst", "weight"])
        ii, jj = np.nonzero(np.triu(a, k=1) > threshold)
        for i, j in zip(ii.tolist(), jj.tolist()):
            writer.writerow([i, j, repr(float(a[i, j]))])


def read_edge_list(path: str, n_nodes: int) -> np.ndarray:
    """Dense adjacency from an edge-list CSV; isolated nodes stay zero rows."""
    a = np.zeros((n_nodes, n_nodes))
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header[:3] != ["src", "dst", "weight"]:
            raise ValueError(f"{path}: expected header src,dst,weight, got {header}")
        for row in reader:
            if not row:
                continue
            i, j, w = int(row[0]), int(row[1]), float(row[2])
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ValueError(f"{path}: edge ({i}, {j}) out of range for {n_nodes} nodes")
            a[i, j] = w
            a[j, i] = w
    return a


def write_graphml(path: str, adjacency: np.ndarray, threshold: float = 0.0) -> None:
    a = np.asarray(adjacency, dtype=float)
    graph = nx.Graph()
    graph.add_nodes_from(range(a.shape[0]))
    ii, jj = np.nonzero(np.triu(a, k=1) > threshold)
    graph.add_weighted_edges_from(
        (int(i), int(j), float(a[i, j])) for i, j in zip(ii, jj)
    )
    nx.write_graphml(graph, path)


def write_matrix(path: str, matrix: np.ndarray) -> None:
    """Dense numeric CSV with generated column names ``c0..c{n-1}``."""
    m = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"c{i}" for i in range(m.shape[1])])
        for row in m:
            writer.writerow([repr(float(x)) for x in row])


def read_matrix(path: str) -> np.ndarray:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    return np.array(rows)


def write_embedding(path: str, coords: np.ndarray) -> None:
    """Embedding CSV ``id,x1..xd`` with row index as the id."""
    coords = np.asarray(coords, dtype=float)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id"] + [f"x{i + 1}" for i in range(coords.shape[1])])
        for i, row in enumerate(coords):
            writer.writerow([i] + [repr(float(x)) for x in row])


def read_embedding(path: str) -> np.ndarray:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        next(reader)
        rows = [[float(x) for x in row[1:]] for row in reader if row]
    return np.array(rows)


def write_stress(path: str, trace: np.ndarray) -> None:
    """Stress trace CSV ``epoch,stress``; epoch 0 is the initial configuration."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["epoch", "stress"])
        for epoch, value in enumerate(np.asarray(trace, dtype=float)):
            writer.writerow([epoch, repr(float(value))])


def read_stress(path: str) -> np.ndarray:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        next(reader)
        return np.array([float(row[1]) for row in reader if row])


def write_labels(path: str, labels: np.ndarray) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "label"])
        for i, label in enumerate(np.asarray(labels).ravel()):
            writer.writerow([i, int(label)])


def read_labels(path: str) -> np.ndarray:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        next(reader)
        return np.array([int(row[1]) for row in reader if row], dtype=int)


def write_partial(base_path: str, pdm: PartialDistanceMatrix, meta: dict) -> tuple[str, str]:
    """Write a partial distance matrix as triplets plus a JSON header.

    ``base_path`` is extended to ``<base>.csv`` (rows ``i,j,delta`` over known
    pairs, global indices with clients first) and ``<base>.json`` holding
    ``{"N", "M", "noise_c", "revealed_ratio", "seed"}``. Only distances cross
    this boundary; no feature vectors are serialized.
    """
    csv_path = base_path + ".csv"
    json_path = base_path + ".json"
    n, m = pdm.n_clients, pdm.n_anchors
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["i", "j", "delta"])
        for i in range(n):
            for j in range(m):
                writer.writerow([i, n + j, repr(float(pdm.d12[i, j]))])
        for i in range(m):
            for j in range(i + 1, m):
                writer.writerow([n + i, n + j, repr(float(pdm.d22[i, j]))])
        for (i, j), value in sorted(pdm.known_cc.items()):
            writer.writerow([i, j, repr(float(value))])
    header = {
        "N": n,
        "M": m,
        "noise_c": float(meta.get("noise_c", 0.0)),
        "revealed_ratio": float(meta.get("revealed_ratio", 0.0)),
        "seed": int(meta.get("seed", 0)),
    }
    with open(json_path, "w") as handle:
        json.dump(header, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return csv_path, json_path


def read_partial(base_path: str) -> tuple[PartialDistanceMatrix, dict]:
    """Inverse of :func:`write_partial`."""
    with open(base_path + ".json") as handle:
        meta = json.load(handle)
    n, m = int(meta["N"]), int(meta["M"])
    d12 = np.zeros((n, m))
    d22 = np.zeros((m, m))
    known_cc: dict[tuple[int, int], float] = {}
    with open(base_path + ".csv", newline="") as handle:
        reader = csv.reader(handle)
        next(reader)
        for row in reader:
            if not row:
                continue
            i, j, value = int(row[0]), int(row[1]), float(row[2])
            if i < n and j < n:
                known_cc[(min(i, j), max(i, j))] = value
            elif i < n <= j:
                d12[i, j - n] = value
            elif j < n <= i:
                d12[j, i - n] = value
            else:
                d22[i - n, j - n] = value
                d22[j - n, i - n] = value
    return PartialDistanceMatrix(d12=d12, d22=d22, known_cc=known_cc), meta


def write_metrics(path: str, payload: dict) -> None:
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_metrics(path: str) -> dict:
    with open(path) as handle:
        return json.load(handle)


def write_summary(path: str, rows: list[dict]) -> None:
    """Aggregated summary CSV; one row per (group, metric) with mean and std."""
    if not rows:
        raise ValueError("summary must contain at least one row")
    fields = list(rows[0].keys())
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_format_cell(row[f]) for f in fields])


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_summary(path: str) -> list[dict]:
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        return [dict(row) for row in reader]


def ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)
