"""Command-line client for the service.

Every subcommand builds a JSON request and sends it to the corresponding
service route. Without ``--server`` the app runs in-process (no socket, same
filesystem); with ``--server http://host:port`` the same requests go to a
remote instance started via ``ppda serve``.
"""

from __future__ import annotations

import asyncio
import json
import sys

import click
import httpx


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server:
        response = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
    else:
        from .service import create_app

        async def _go() -> httpx.Response:
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://ppda.local", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(_go())
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise SystemExit(f"error ({response.status_code}): {detail}")
    return response.json()


def _emit(result: dict) -> None:
    click.echo(json.dumps(result, indent=2, sort_keys=True))


@click.group()
@click.option("--server", envvar="PPDA_SERVER", default=None, help="Remote service URL; defaults to in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Privacy-preserving distance approximation toolkit."""
    ctx.obj = server


@main.command()
@click.option("--kind", type=click.Choice(["er", "ba", "rgg", "blobs"]), required=True)
@click.option("--out", "out_dir", required=True, help="Output directory.")
@click.option("--seed", default=0, show_default=True)
@click.option("--nodes", type=int, default=None, help="Node count for graph kinds.")
@click.option("--p", default=0.1, show_default=True, help="Edge probability (er) or radius (rgg).")
@click.option("--m", default=2, show_default=True, help="Attachment count (ba).")
@click.option("--samples", type=int, default=None, help="IGMRF samples to draw as features.")
@click.option("--clusters", type=int, default=None, help="Blob cluster count.")
@click.option("--per-cluster", type=int, default=None, help="Rows per blob cluster.")
@click.option("--dim", type=int, default=None, help="Blob feature dimension.")
@click.option("--separation", default=10.0, show_default=True, help="Blob center box half-width.")
@click.pass_obj
def generate(server, kind, out_dir, seed, nodes, p, m, samples, clusters, per_cluster, dim, separation):
    """Generate a synthetic graph (plus smooth features) or Gaussian blobs."""
    _emit(
        _post(
            server,
            "/v1/generate",
            {
                "kind": kind,
                "out_dir": out_dir,
                "seed": seed,
                "nodes": nodes,
                "p": p,
                "m": m,
                "samples": samples,
                "clusters": clusters,
                "per_cluster": per_cluster,
                "dim": dim,
                "separation": separation,
            },
        )
    )


@main.command()
@click.option("--features", required=True, help="Feature CSV (header row, numeric).")
@click.option("--out", "out_dir", required=True)
@click.option("--label-column", default=None, help="Column to treat as labels.")
@click.option("--normalize", type=click.Choice(["none", "zscore"]), default="none", show_default=True)
@click.option("--anchor-fraction", type=float, default=None)
@click.option("--anchor-count", type=int, default=None)
@click.option("--enforce-privacy", is_flag=True, help="Reject splits with anchors >= dimension.")
@click.option("--noise-c", default=0.0, show_default=True, help="Uniform noise bound on reported distances.")
@click.option("--reveal-ratio", default=0.0, show_default=True, help="Fraction of client pairs revealed exactly.")
@click.option("--seed", default=0, show_default=True)
@click.option("--no-truth", is_flag=True, help="Skip writing evaluation-only truth files.")
@click.pass_obj
def simulate(server, features, out_dir, label_column, normalize, anchor_fraction, anchor_count, enforce_privacy, noise_c, reveal_ratio, seed, no_truth):
    """Run the client/server distance exchange on a feature CSV."""
    _emit(
        _post(
            server,
            "/v1/simulate",
            {
                "features": features,
                "out_dir": out_dir,
                "label_column": label_column,
                "normalize": normalize,
                "anchor_fraction": anchor_fraction,
                "anchor_count": anchor_count,
                "enforce_privacy": enforce_privacy,
                "noise_c": noise_c,
                "reveal_ratio": reveal_ratio,
                "seed": seed,
                "keep_truth": not no_truth,
            },
        )
    )


@main.command()
@click.option("--partial", "partial_base", required=True, help="Partial matrix base path (without .csv/.json).")
@click.option("--anchors", required=True, help="Anchor feature CSV.")
@click.option("--out", "out_dir", required=True)
@click.option("--mode", type=click.Choice(["anchored", "full"]), default="anchored", show_default=True)
@click.option("--dim", type=int, default=None, help="Embedding dimension; defaults to the anchor dimension.")
@click.option("--tol", default=1e-3, show_default=True, help="Stress-decrease stopping tolerance.")
@click.option("--max-epochs", default=5000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def embed(server, partial_base, anchors, out_dir, mode, dim, tol, max_epochs, seed):
    """Embed a partial distance matrix and estimate client distances."""
    _emit(
        _post(
            server,
            "/v1/embed",
            {
                "partial_base": partial_base,
                "anchors": anchors,
                "out_dir": out_dir,
                "mode": mode,
                "dim": dim,
                "tol": tol,
                "max_epochs": max_epochs,
                "seed": seed,
            },
        )
    )


@main.command("learn-graph")
@click.option("--distances", required=True, help="Dense CSV of distance estimates.")
@click.option("--out", "out_dir", required=True)
@click.option("--method", type=click.Choice(["adjacency", "sgl"]), default="adjacency", show_default=True)
@click.option("--gamma", type=float, default=None, help="Explicit row regularizer.")
@click.option("--neighbors", type=int, default=None, help="Target neighbors per row.")
@click.option("--clusters", type=int, default=None, help="Component target (sgl).")
@click.option("--alpha", default=0.0, show_default=True, help="Sparsity penalty (sgl).")
@click.option("--iters", default=300, show_default=True, help="Outer iterations (sgl).")
@click.pass_obj
def learn_graph(server, distances, out_dir, method, gamma, neighbors, clusters, alpha, iters):
    """Learn a graph from recovered distances."""
    _emit(
        _post(
            server,
            "/v1/learn-graph",
            {
                "distances": distances,
                "out_dir": out_dir,
                "method": method,
                "gamma": gamma,
                "neighbors": neighbors,
                "clusters": clusters,
                "alpha": alpha,
                "iters": iters,
            },
        )
    )


@main.command()
@click.option("--graph", required=True, help="Edge-list CSV.")
@click.option("--n-nodes", type=int, required=True)
@click.option("--clusters", type=int, required=True)
@click.option("--out", "out_dir", required=True)
@click.option("--lambda0", default=1.0, show_default=True)
@click.option("--max-outer", default=100, show_default=True)
@click.pass_obj
def cluster(server, graph, n_nodes, clusters, out_dir, lambda0, max_outer):
    """Cluster a graph by constrained Laplacian rank."""
    _emit(
        _post(
            server,
            "/v1/cluster",
            {
                "graph": graph,
                "n_nodes": n_nodes,
                "clusters": clusters,
                "out_dir": out_dir,
                "lambda0": lambda0,
                "max_outer": max_outer,
            },
        )
    )


@main.command()
@click.option("--estimated", default=None, help="Dense CSV of estimated distances.")
@click.option("--truth", default=None, help="Dense CSV of true distances.")
@click.option("--knn-k", default=10, show_default=True)
@click.option("--labels", default=None, help="Predicted labels CSV.")
@click.option("--truth-labels", default=None, help="Ground-truth labels CSV.")
@click.option("--out", default=None, help="Optional metrics.json destination.")
@click.pass_obj
def evaluate(server, estimated, truth, knn_k, labels, truth_labels, out):
    """Score recovered distances and/or cluster labels."""
    _emit(
        _post(
            server,
            "/v1/evaluate",
            {
                "estimated": estimated,
                "truth": truth,
                "knn_k": knn_k,
                "labels": labels,
                "truth_labels": truth_labels,
                "out": out,
            },
        )
    )


def _load_config(path: str, seed: int | None, out: str | None) -> dict:
    with open(path) as handle:
        config = json.load(handle)
    if seed is not None:
        config["seeds"] = [seed]
    if out is not None:
        config["output_dir"] = out
    return config


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Replace the config's seed list with one seed.")
@click.option("--out", default=None, help="Override the config's output directory.")
@click.pass_obj
def pipeline(server, config_path, seed, out):
    """Run a full experiment described by a JSON config."""
    _emit(
        _post(server, "/v1/pipeline", {"config": _load_config(config_path, seed, out)})
    )


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", default=None)
@click.pass_obj
def validate(server, config_path, seed, out):
    """Static checks on an experiment config; exits non-zero on violations."""
    result = _post(
        server, "/v1/validate", {"config": _load_config(config_path, seed, out)}
    )
    _emit(result)
    if not result.get("ok", False):
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("ppda.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
