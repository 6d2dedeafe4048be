"""Operator entry points: ingest, descriptors, synth, simulate, evaluate,
report, serve.

Every command is a thin composition of library operations. Contract
violations exit nonzero with a single machine-parseable line on stderr:
``error: <Kind>: <message>``.
"""

from __future__ import annotations

import functools
import os
import sys

import click
import numpy as np

from . import descriptors as descriptors_mod
from . import evaluation, report, service
from .dataset import SplitSpec, ingest, load_dataset, load_records, save_dataset, split
from .errors import DataError, ElicitError
from .prediction import SamplerConfig
from .session import SessionConfig


def _fail_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ElicitError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Interactive knowledge elicitation for sparse linear prediction."""


@main.command("ingest")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_fail_cleanly
def ingest_cmd(data_path, out_path):
    """Build a dataset file from line-delimited JSON document records."""
    dataset = ingest(load_records(data_path))
    save_dataset(dataset, out_path)
    click.echo(
        f"dataset features={dataset.n_features} documents={dataset.n_samples} "
        f"out={out_path}"
    )


@main.command("descriptors")
@click.option("--aux", "aux_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--clusters", default=20, show_default=True, type=int)
@click.option("--sample", default=1000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@_fail_cleanly
def descriptors_cmd(aux_path, data_path, clusters, sample, seed, out_path):
    """Cluster the auxiliary corpus and emit per-feature tf-idf descriptors."""
    dataset, _ = load_dataset(data_path)
    aux = descriptors_mod.load_corpus(aux_path)
    aux = descriptors_mod.filter_corpus(aux, dataset.feature_names)
    model = descriptors_mod.cluster(aux, clusters, min(sample, len(aux.docs)), seed)
    matrix = descriptors_mod.build_tfidf(aux, model, dataset.feature_names)
    descriptors_mod.save_descriptors(matrix, out_path)
    click.echo(
        f"descriptors features={matrix.n_features} clusters={matrix.n_descriptors} "
        f"out={out_path}"
    )


@main.command("synth")
@click.option("--features", "k", default=457, show_default=True, type=int)
@click.option("--docs", "n", default=162, show_default=True, type=int)
@click.option("--relevant", default=20, show_default=True, type=int)
@click.option("--effect", default=1.0, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--aux-out", "aux_path", type=click.Path(), default=None,
              help="Also write a matching auxiliary corpus (JSON lines).")
@click.option("--aux-docs", default=1000, show_default=True, type=int)
@_fail_cleanly
def synth_cmd(k, n, relevant, effect, seed, out_path, aux_path, aux_docs):
    """Generate a topic-blocked synthetic dataset with known relevant features."""
    # persist the unsplit design; simulate re-splits with its own seed
    full, truth, _ = evaluation.generate_synthetic_full(k, n, relevant, effect, seed)
    truth_names = [full.feature_names[j] for j in truth]
    save_dataset(full, out_path, truth=truth_names)
    if aux_path is not None:
        aux = evaluation.synthetic_corpus(k, aux_docs, seed)
        descriptors_mod.save_corpus(aux, aux_path)
    click.echo(
        f"synthetic features={k} documents={n} relevant={len(truth)} out={out_path}"
        + (f" aux={aux_path}" if aux_path else "")
    )


def _load_benchmark(dataset_path, descriptors_path, split_seed, iterations, batch):
    dataset, truth = load_dataset(dataset_path)
    if truth is None:
        raise DataError(
            f"{dataset_path}: dataset lacks ground-truth relevance; "
            "simulated runs need a truth field (see `synth`)"
        )
    matrix = descriptors_mod.load_descriptors(descriptors_path)
    if matrix.feature_names != dataset.feature_names:
        raise DataError("descriptor features do not match the dataset")
    train, test = split(dataset, SplitSpec(train_fraction=0.5, seed=split_seed))
    config = evaluation.BenchmarkConfig(
        train=train,
        test=test,
        descriptors=matrix,
        session=SessionConfig(
            max_iterations=iterations,
            batch_size=batch,
            sampler=SamplerConfig(),
        ),
    )
    truth_vec = np.zeros(dataset.n_features, dtype=np.int64)
    for name in truth:
        truth_vec[dataset.feature_index(name)] = 1
    return config, truth_vec


@main.command("simulate")
@click.option("--condition", required=True, type=click.Choice(["c1", "c2", "c3"]))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--descriptors", "descriptors_path", required=True,
              type=click.Path(exists=True))
@click.option("--runs", default=1, show_default=True, type=int)
@click.option("--eps", default=0.0, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--split-seed", default=0, show_default=True, type=int)
@click.option("--iterations", default=20, show_default=True, type=int)
@click.option("--batch", default=10, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@_fail_cleanly
def simulate_cmd(condition, dataset_path, descriptors_path, runs, eps, seed,
                 split_seed, iterations, batch, out_path):
    """Run simulated-expert sessions and write one MSE row per iteration."""
    if runs < 1:
        raise DataError("--runs must be >= 1")
    config, truth_vec = _load_benchmark(
        dataset_path, descriptors_path, split_seed, iterations, batch
    )
    oracle = evaluation.OracleExpert(true_relevance=truth_vec, noise_eps=eps)
    results = [
        evaluation.simulate_run(condition, oracle, config, seed=seed + i)
        for i in range(runs)
    ]
    evaluation.save_runs(results, out_path)
    click.echo(f"runs={len(results)} condition={condition} out={out_path}")


@main.command("evaluate")
@click.option("--group-a", "path_a", required=True, type=click.Path(exists=True))
@click.option("--group-b", "path_b", required=True, type=click.Path(exists=True))
@click.option("--permutations", default=10_000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@_fail_cleanly
def evaluate_cmd(path_a, path_b, permutations, seed):
    """Permutation-test two run tables; print the statistic and p-value."""
    runs_a = evaluation.load_runs(path_a)
    runs_b = evaluation.load_runs(path_b)
    result = evaluation.permutation_test(runs_a, runs_b, permutations, seed)
    click.echo(
        f"observed_stat={result.observed_stat!r} p_value={result.p_value!r} "
        f"n_permutations={result.n_permutations}"
    )


@main.command("report")
@click.option("--group-a", "path_a", required=True, type=click.Path(exists=True))
@click.option("--group-b", "path_b", type=click.Path(exists=True), default=None)
@click.option("--permutations", default=10_000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out-dir", required=True, type=click.Path())
@_fail_cleanly
def report_cmd(path_a, path_b, permutations, seed, out_dir):
    """Render MSE curves, the permutation histogram, and a summary table."""
    os.makedirs(out_dir, exist_ok=True)
    runs = evaluation.load_runs(path_a)
    written = []
    if path_b is not None:
        runs_b = evaluation.load_runs(path_b)
        result = evaluation.permutation_test(
            runs, runs_b, permutations, seed, keep_distribution=True
        )
        written.append(
            report.save_permutation_histogram(
                result, os.path.join(out_dir, "permutation.png")
            )
        )
        click.echo(
            f"observed_stat={result.observed_stat!r} p_value={result.p_value!r} "
            f"n_permutations={result.n_permutations}"
        )
        runs = runs + runs_b
    written.append(report.save_mse_curves(runs, os.path.join(out_dir, "curves.png")))
    written.append(report.write_summary(runs, os.path.join(out_dir, "summary.tsv")))
    for path in written:
        click.echo(f"wrote {path}")


@main.command("serve")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--descriptors", "descriptors_path", required=True,
              type=click.Path(exists=True))
@click.option("--split-seed", default=0, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=None, type=int,
              help="Defaults to ELICIT_PORT or 8000.")
@_fail_cleanly
def serve_cmd(dataset_path, descriptors_path, split_seed, host, port):
    """Serve the session API over HTTP."""
    import uvicorn

    if port is None:
        port = int(os.environ.get("ELICIT_PORT", "8000"))
    dataset, _ = load_dataset(dataset_path)
    matrix = descriptors_mod.load_descriptors(descriptors_path)
    if matrix.feature_names != dataset.feature_names:
        raise DataError("descriptor features do not match the dataset")
    train, test = split(dataset, SplitSpec(train_fraction=0.5, seed=split_seed))
    app = service.create_app(train, test, matrix)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
