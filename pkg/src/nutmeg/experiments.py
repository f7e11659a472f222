"""Experiment orchestration: run aggregation methods on synthetic worlds,
collect metric rows, and evaluate result files against truth files."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields

import numpy as np

from . import baselines, metrics
from .data import PosteriorTable, SubpopulationMap, validate
from .imputation import ImputationPolicy, impute
from .inference import FitConfig, fit
from .simulator import SimConfig, SyntheticWorld, sweep_grid

METHODS = ("nutmeg", "mace", "majority", "dawid-skene")


def single_truth_table(result: baselines.BaselineResult,
                       world: SyntheticWorld) -> PosteriorTable:
    """Replicate a per-item posterior across the world's subpopulations so
    single-truth methods can be scored against each group's truth."""
    N, L = result.posterior.shape
    P = world.subpops.n_subpopulations
    entries = np.repeat(result.posterior[:, None, :], P, axis=1)
    return PosteriorTable(
        items=world.annotations.items,
        subpopulations=world.subpops.subpopulations,
        label_space=world.annotations.label_space,
        entries=entries,
        imputed=np.zeros((N, P), dtype=bool),
        fallback=np.zeros((N, P), dtype=bool),
    )


def run_method(world: SyntheticWorld, method: str,
               fit_config: FitConfig = FitConfig(),
               policy: ImputationPolicy = ImputationPolicy()
               ) -> metrics.EvalReport:
    """Fit one method on a synthetic world and score it against the truth."""
    if method == "nutmeg":
        ds = validate(world.annotations, world.subpops)
        result = fit(ds, fit_config)
        table = impute(result, ds, policy)
        report = metrics.evaluate(table, world, result.competence)
        # divisiveness is estimated on observed cells only; imputed cells
        # borrow their labels and would dilute the disagreement signal
        return dataclasses.replace(
            report,
            divisiveness_estimate=metrics.divisiveness_estimate(
                result.posterior.decoded, result.posterior.defined))

    single = validate(
        world.annotations,
        SubpopulationMap.single(world.annotations.annotators))
    if method == "mace":
        mres = fit(single, fit_config)
        table = single_truth_table(baselines.mace_result(mres), world)
        return metrics.evaluate(table, world, mres.competence)
    if method == "majority":
        result = baselines.majority_vote(single)
    elif method == "dawid-skene":
        result = baselines.dawid_skene(single, fit_config)
    else:
        raise ValueError(f"unknown method {method!r}")
    table = single_truth_table(result, world)
    return metrics.evaluate(table, world)


def report_rows(config: SimConfig, replicate: int, method: str,
                report: metrics.EvalReport) -> list:
    """Flatten an EvalReport into long-format result rows."""
    base = asdict(config)
    base.pop("constant_spam_rate")
    base["replicate"] = replicate
    base["method"] = method

    def row(name, value, status="ok"):
        return {**base, "metric_name": name,
                "value": "" if value is None else value,
                "status": status}

    rows = []
    for group, acc in report.accuracy_by_subpop.items():
        rows.append(row(f"accuracy_{group}", acc))
    for group, acc in report.accuracy_observed_by_subpop.items():
        rows.append(row(f"accuracy_observed_{group}", acc))
    rows.append(row("divisiveness_estimate", report.divisiveness_estimate))
    rows.append(row("competence_pearson", report.competence_pearson))
    return rows


def _run_cell(args):
    config, replicate, world, methods, fit_config, policy = args
    rows = []
    for method in methods:
        try:
            report = run_method(world, method, fit_config, policy)
            rows.extend(report_rows(config, replicate, method, report))
        except Exception as exc:  # recorded, sweep continues
            base = asdict(config)
            base.pop("constant_spam_rate")
            rows.append({**base, "replicate": replicate, "method": method,
                         "metric_name": "error", "value": "",
                         "status": f"error:{type(exc).__name__}"})
    return rows


def run_sweep(grid: dict, methods=METHODS, replicates: int = 1,
              base_seed: int = 0, fit_config: FitConfig = FitConfig(),
              policy: ImputationPolicy = ImputationPolicy(),
              base_config: SimConfig = SimConfig(),
              workers: int = 1):
    """Yield result-row batches per (cell, replicate) in deterministic order.

    Cells own derived seeds, so results are independent of worker
    scheduling; batches are yielded in grid order regardless of workers.
    """
    tasks = [(config, rep, world, tuple(methods), fit_config, policy)
             for config, rep, world in sweep_grid(
                 grid, replicates, base_seed, base_config)]
    if workers <= 1:
        for task in tasks:
            yield _run_cell(task)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(_run_cell, tasks)


RESULT_FIELDS = (
    [f.name for f in fields(SimConfig) if f.name != "constant_spam_rate"]
    + ["replicate", "method", "metric_name", "value", "status"])


class EvaluationError(ValueError):
    """Identifier mismatch between result files and truth files."""


def evaluate_files(label_rows: list, truth_labels: dict,
                   truth_spam: dict | None = None,
                   competence_rows: dict | None = None) -> dict:
    """Score a labels.csv against truth files; pure file-level metrics.

    ``label_rows`` are parsed labels.csv rows; ``truth_labels`` maps
    (item, subpopulation) to the true label; ``competence_rows`` maps
    annotator to fitted theta.
    """
    groups = sorted({row["subpopulation"] for row in label_rows})
    truth_groups = sorted({g for _, g in truth_labels})
    single_truth = groups == ["all"] and truth_groups != ["all"]

    matched = 0
    correct = {g: [0, 0] for g in truth_groups}
    correct_obs = {g: [0, 0] for g in truth_groups}
    for row in label_rows:
        targets = (truth_groups if single_truth else [row["subpopulation"]])
        for g in targets:
            key = (row["item_id"], g)
            if key not in truth_labels:
                continue
            matched += 1
            hit = int(row["label"] == truth_labels[key])
            correct[g][0] += hit
            correct[g][1] += 1
            if row["imputed"] == "false":
                correct_obs[g][0] += hit
                correct_obs[g][1] += 1
    if matched == 0:
        raise EvaluationError(
            "no (item, subpopulation) overlap between labels and truth")

    def _acc(table):
        return {g: (c / n if n else None) for g, (c, n) in table.items()}

    report = {
        "accuracy_by_subpop": _acc(correct),
        "accuracy_observed_by_subpop": _acc(correct_obs),
        "cells_by_subpop": {g: n for g, (_, n) in correct.items()},
    }

    # divisiveness over items decoded for exactly two subpopulations
    if not single_truth and len(groups) == 2:
        decoded = {}
        for row in label_rows:
            if row["imputed"] != "false":
                continue  # observed cells only; imputed cells borrow labels
            decoded.setdefault(row["item_id"], {})[
                row["subpopulation"]] = row["label"]
        pairs = [d for d in decoded.values() if len(d) == 2]
        report["divisiveness_estimate"] = (
            float(np.mean([d[groups[0]] != d[groups[1]] for d in pairs]))
            if pairs else None)
    else:
        report["divisiveness_estimate"] = None

    report["competence_pearson"] = None
    if truth_spam and competence_rows:
        common = sorted(set(truth_spam) & set(competence_rows))
        if len(common) >= 2:
            theta = np.array([competence_rows[a] for a in common])
            truth = np.array([1.0 - truth_spam[a] for a in common])
            if np.ptp(theta) > 0 and np.ptp(truth) > 0:
                from scipy.stats import pearsonr
                report["competence_pearson"] = float(
                    pearsonr(theta, truth).statistic)
    return report
