"""Command-line interface: simulate, aggregate, evaluate, sweep, report.

Exit codes: 0 ok, 1 validation failure, 2 numerical failure, 3 I/O failure.
"""
from __future__ import annotations

import csv
import json
import sys
import time
from pathlib import Path

import click

from . import io
from .baselines import dawid_skene, mace_result, majority_vote
from .data import SubpopulationMap, ValidationError, validate
from .experiments import (METHODS, RESULT_FIELDS, EvaluationError,
                          evaluate_files, run_sweep, single_truth_table)
from .imputation import ImputationPolicy, impute
from .inference import FitConfig, NumericalError, fit
from .io import ParseError, fmt_float
from .simulator import SimConfig, generate


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    try:
        fn()
    except (ParseError, OSError) as exc:
        _fail(3, str(exc))
    except NumericalError as exc:
        _fail(2, str(exc))
    except (ValidationError, EvaluationError, ValueError) as exc:
        _fail(1, str(exc))


def _load_manifest_config(path):
    return io.read_manifest(path)["config"]


@click.group()
@click.version_option()
def main():
    """Crowd label aggregation with subpopulation-level truths."""


FIT_OPTIONS = [
    click.option("--max-iterations", type=int, default=50, show_default=True),
    click.option("--convergence-tol", type=float, default=1e-6,
                 show_default=True),
    click.option("--restarts", type=int, default=10, show_default=True),
    click.option("--theta-prior", type=(float, float), default=(0.5, 0.5),
                 show_default=True,
                 help="Beta prior on annotator competence."),
    click.option("--xi-prior", type=float, default=0.5, show_default=True,
                 help="Symmetric Dirichlet prior on spam emissions."),
    click.option("--update-rule", type=click.Choice(["vb", "map"]),
                 default="vb", show_default=True),
]


def _add_options(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn
    return wrap


def _fit_config(cfg: dict) -> FitConfig:
    return FitConfig(
        max_iterations=cfg["max_iterations"],
        convergence_tol=cfg["convergence_tol"],
        restarts=cfg["restarts"],
        seed=cfg["seed"],
        theta_prior=tuple(cfg["theta_prior"]),
        xi_prior=cfg["xi_prior"],
        update_rule=cfg["update_rule"],
    )


@main.command()
@click.option("--n-annotators", type=int, default=150, show_default=True)
@click.option("--minority-proportion", type=float, default=0.2,
              show_default=True)
@click.option("--n-items", type=int, default=500, show_default=True)
@click.option("--n-labels", type=int, default=2, show_default=True)
@click.option("--global-spam-rate", type=float, default=0.1,
              show_default=True)
@click.option("--divisiveness-rate", type=float, default=0.2,
              show_default=True)
@click.option("--annotations-per-item", type=int, default=5,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--spam-rate-concentration", type=float, default=2.0,
              show_default=True)
@click.option("--constant-spam-rate", is_flag=True, default=False)
@click.option("--from-manifest", type=click.Path(exists=True), default=None,
              help="Reload the resolved config of a previous run; other "
                   "flags are ignored.")
@click.option("--output-dir", type=click.Path(), required=True)
def simulate(from_manifest, output_dir, **flags):
    """Generate a synthetic annotated world with known ground truth."""
    def run():
        cfg = (_load_manifest_config(from_manifest)
               if from_manifest else flags)
        config = SimConfig(**cfg)
        start = time.perf_counter()
        world = generate(config)
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.write_annotations(out / "annotations.csv", world.annotations)
        io.write_subpopulations(out / "annotators.csv", world.subpops)
        io.write_truth_labels(out / "truth_labels.csv", world)
        io.write_truth_spam(out / "truth_spam.csv", world)
        io.write_manifest(
            out / "manifest.json", "simulate", dict(cfg), {},
            config.seed, time.perf_counter() - start)
        click.echo(f"wrote {world.annotations.n_records} records to {out}")
    _guarded(run)


@main.command()
@click.argument("annotations_file", type=click.Path(exists=True))
@click.option("--annotators-file", type=click.Path(exists=True),
              default=None,
              help="annotator -> subpopulation map; required for nutmeg.")
@click.option("--method", type=click.Choice(METHODS), default="nutmeg",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_add_options(FIT_OPTIONS)
@click.option("--imputation-mode",
              type=click.Choice(["impute", "leave_missing"]),
              default="impute", show_default=True)
@click.option("--min-support", type=int, default=1, show_default=True)
@click.option("--from-manifest", type=click.Path(exists=True), default=None)
@click.option("--output-dir", type=click.Path(), required=True)
def aggregate(annotations_file, annotators_file, method, imputation_mode,
              min_support, from_manifest, output_dir, **fit_flags):
    """Aggregate an annotation file into per-subpopulation labels."""
    def run():
        cfg = {"annotations_file": str(annotations_file),
               "annotators_file": (str(annotators_file)
                                   if annotators_file else None),
               "method": method,
               "imputation_mode": imputation_mode,
               "min_support": min_support,
               **fit_flags}
        if from_manifest:
            cfg = _load_manifest_config(from_manifest)
        start = time.perf_counter()
        annotations = io.read_annotations(cfg["annotations_file"])
        inputs = {"annotations": cfg["annotations_file"]}
        fit_config = _fit_config(cfg)

        competence = None
        if cfg["method"] == "nutmeg":
            if not cfg["annotators_file"]:
                raise ValidationError(
                    ["method nutmeg requires --annotators-file"])
            subpops = io.read_subpopulations(cfg["annotators_file"])
            inputs["annotators"] = cfg["annotators_file"]
            ds = validate(annotations, subpops)
            result = fit(ds, fit_config)
            table = impute(result, ds, ImputationPolicy(
                mode=cfg["imputation_mode"],
                min_support=cfg["min_support"]))
            competence = result.competence
        else:
            ds = validate(annotations,
                          SubpopulationMap.single(annotations.annotators))
            if cfg["method"] == "mace":
                result = fit(ds, fit_config)
                table = result.posterior
                competence = result.competence
            elif cfg["method"] == "majority":
                table = single_table(majority_vote(ds), ds)
            else:
                table = single_table(dawid_skene(ds, fit_config), ds)

        out = Path(cfg.get("output_dir") or output_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.write_labels(out / "labels.csv", table)
        if competence is not None:
            io.write_competence(out / "competence.csv", competence)
        io.write_manifest(out / "manifest.json", "aggregate", dict(cfg),
                          inputs, cfg["seed"],
                          time.perf_counter() - start)
        click.echo(f"wrote labels for {table.entries.shape[0]} items "
                   f"to {out}")
    _guarded(run)


def single_table(result, ds):
    """Per-item baseline posterior as a one-subpopulation table."""
    import numpy as np

    from .data import PosteriorTable
    N, L = result.posterior.shape
    return PosteriorTable(
        items=ds.annotations.items,
        subpopulations=("all",),
        label_space=ds.annotations.label_space,
        entries=result.posterior[:, None, :],
        imputed=np.zeros((N, 1), dtype=bool),
        fallback=np.zeros((N, 1), dtype=bool),
    )


@main.command()
@click.argument("labels_file", type=click.Path(exists=True))
@click.option("--truth-labels", type=click.Path(exists=True), required=True)
@click.option("--truth-spam", type=click.Path(exists=True), default=None)
@click.option("--competence-file", type=click.Path(exists=True),
              default=None)
@click.option("--output", type=click.Path(), default=None,
              help="Write the metrics JSON here instead of stdout.")
def evaluate(labels_file, truth_labels, truth_spam, competence_file, output):
    """Score a labels file against ground-truth files."""
    def run():
        label_rows = io.read_labels(labels_file)
        truth = io.read_truth_labels(truth_labels)
        spam = io.read_truth_spam(truth_spam) if truth_spam else None
        competence = None
        if competence_file:
            competence = {}
            with open(competence_file, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    competence[row["annotator_id"]] = float(row["theta"])
        report = evaluate_files(label_rows, truth, spam, competence)
        text = json.dumps(report, indent=2, sort_keys=True)
        if output:
            Path(output).write_text(text + "\n", encoding="utf-8")
        else:
            click.echo(text)
    _guarded(run)


@main.command()
@click.argument("grid_file", type=click.Path(exists=True))
@click.option("--methods", default="nutmeg,mace,majority,dawid-skene",
              show_default=True, help="Comma-separated method list.")
@click.option("--replicates", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_add_options(FIT_OPTIONS)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--from-manifest", type=click.Path(exists=True), default=None)
@click.option("--output-dir", type=click.Path(), required=True)
def sweep(grid_file, methods, replicates, seed, workers, from_manifest,
          output_dir, **fit_flags):
    """Run a simulation grid and write long-format results.csv.

    GRID_FILE is a JSON object mapping simulator config fields to value
    lists, e.g. {"divisiveness_rate": [0, 0.5, 1.0]}.
    """
    def run():
        cfg = {"grid_file": str(grid_file), "methods": methods,
               "replicates": replicates, "seed": seed,
               "workers": workers, **fit_flags}
        if from_manifest:
            cfg = _load_manifest_config(from_manifest)
        start = time.perf_counter()
        grid = json.loads(Path(cfg["grid_file"]).read_text(
            encoding="utf-8"))
        method_list = [m.strip() for m in cfg["methods"].split(",")
                       if m.strip()]
        unknown = set(method_list) - set(METHODS)
        if unknown:
            raise ValidationError(
                [f"unknown method {m!r}" for m in sorted(unknown)])
        fit_config = _fit_config({**cfg, "seed": cfg["seed"]})

        out = Path(cfg.get("output_dir") or output_dir)
        out.mkdir(parents=True, exist_ok=True)
        results_path = out / "results.csv"
        # each batch is appended whole, so the file stays well-formed
        # even if the sweep is interrupted mid-run
        with open(results_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
            writer.writeheader()
            n_rows = 0
            for batch in run_sweep(
                    grid, method_list, cfg["replicates"], cfg["seed"],
                    fit_config, workers=cfg["workers"]):
                for row in batch:
                    if isinstance(row.get("value"), float):
                        row["value"] = fmt_float(row["value"])
                    writer.writerow(row)
                    n_rows += 1
                fh.flush()
        io.write_manifest(out / "manifest.json", "sweep", dict(cfg),
                          {"grid": cfg["grid_file"]}, cfg["seed"],
                          time.perf_counter() - start)
        click.echo(f"wrote {n_rows} result rows to {results_path}")
    _guarded(run)


@main.command()
@click.argument("results_file", type=click.Path(exists=True))
@click.option("--output-dir", type=click.Path(), required=True)
def report(results_file, output_dir):
    """Render figures from a sweep results file."""
    def run():
        from .plots import render_report
        written = render_report(results_file, output_dir)
        if not written:
            click.echo("results do not span any renderable figure")
        for path in written:
            click.echo(f"wrote {path}")
    _guarded(run)


if __name__ == "__main__":
    main()
