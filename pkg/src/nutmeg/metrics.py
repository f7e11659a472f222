"""Evaluation metrics: per-subpopulation accuracy, divisiveness-rate
estimation, competence correlation, and Jensen-Shannon divergence."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import pearsonr

from .data import CompetenceTable, PosteriorTable
from .simulator import SyntheticWorld


@dataclass(frozen=True)
class EvalReport:
    accuracy_by_subpop: dict            # includes imputed cells
    accuracy_observed_by_subpop: dict   # imputed cells excluded
    divisiveness_estimate: float | None
    competence_pearson: float | None
    jsd_by_subpop: dict = field(default_factory=dict)
    cells_by_subpop: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy_by_subpop": self.accuracy_by_subpop,
            "accuracy_observed_by_subpop": self.accuracy_observed_by_subpop,
            "divisiveness_estimate": self.divisiveness_estimate,
            "competence_pearson": self.competence_pearson,
            "jsd_by_subpop": self.jsd_by_subpop,
            "cells_by_subpop": self.cells_by_subpop,
        }


def subpop_accuracy(decoded: np.ndarray, truth: np.ndarray,
                    evaluable: np.ndarray, subpop_names) -> dict:
    """Fraction of evaluable cells where decoded equals truth, per group.

    A group with zero evaluable cells is reported as None (undefined),
    never as 0.
    """
    out = {}
    for k, name in enumerate(subpop_names):
        mask = evaluable[:, k]
        if not mask.any():
            out[name] = None
        else:
            out[name] = float(
                np.mean(decoded[mask, k] == truth[mask, k]))
    return out


def divisiveness_estimate(decoded: np.ndarray,
                          defined: np.ndarray) -> float | None:
    """Fraction of items whose two decoded subpopulation labels differ.

    Items with an undefined cell are excluded from numerator and
    denominator.
    """
    if decoded.shape[1] != 2:
        raise ValueError("divisiveness estimate needs exactly 2 subpops")
    both = defined.all(axis=1)
    if not both.any():
        return None
    return float(np.mean(decoded[both, 0] != decoded[both, 1]))


def competence_correlation(fitted: CompetenceTable,
                           world: SyntheticWorld) -> float | None:
    """Pearson r between fitted theta and true competence (1 - spam rate).

    Annotators are aligned by identifier; undefined when either side has
    zero variance or fewer than two annotators intersect.
    """
    rate_of = dict(zip(world.all_annotators, world.true_spam_rates))
    theta, truth = [], []
    for j, ann in enumerate(fitted.annotators):
        if ann in rate_of:
            theta.append(fitted.theta[j])
            truth.append(1.0 - rate_of[ann])
    if len(theta) < 2:
        return None
    theta = np.asarray(theta)
    truth = np.asarray(truth)
    if np.ptp(theta) == 0 or np.ptp(truth) == 0:
        return None
    return float(pearsonr(theta, truth).statistic)


def jsd(p, q, base: str = "e") -> float:
    """Jensen-Shannon divergence between two distributions.

    0*log(0/x) is taken as 0. Natural log by default; pass base="2" for
    bits. Symmetric, 0 iff p == q, at most log(2) (base-e).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = 0.5 * (p + q)

    def _kl(x, y):
        nz = x > 0
        return float(np.sum(x[nz] * np.log(x[nz] / y[nz])))

    val = 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
    if base == "2":
        val /= np.log(2.0)
    return val


def evaluate(posterior: PosteriorTable, world: SyntheticWorld,
             competence: CompetenceTable | None = None) -> EvalReport:
    """Full report for a (possibly imputed) posterior table against a
    synthetic world's ground truth."""
    decoded = posterior.decoded
    defined = posterior.defined
    names = posterior.subpopulations
    truth = world.true_labels

    acc_all = subpop_accuracy(decoded, truth, defined, names)
    acc_obs = subpop_accuracy(
        decoded, truth, defined & ~posterior.imputed, names)
    div = (divisiveness_estimate(decoded, defined)
           if decoded.shape[1] == 2 else None)
    comp = (competence_correlation(competence, world)
            if competence is not None else None)
    cells = {name: int(defined[:, k].sum())
             for k, name in enumerate(names)}
    return EvalReport(
        accuracy_by_subpop=acc_all,
        accuracy_observed_by_subpop=acc_obs,
        divisiveness_estimate=div,
        competence_pearson=comp,
        cells_by_subpop=cells,
    )
