"""Single-truth aggregation baselines: majority vote and Dawid-Skene.

MACE is not reimplemented here: it is exactly the subpopulation model fit
with every annotator in one group, exposed as :func:`mace`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .data import Dataset, SubpopulationMap, validate
from .inference import FitConfig, FitResult, NumericalError, fit

# additive pseudo-counts keeping tiny instances away from zero probabilities
DS_SMOOTHING = 0.01


@dataclass(frozen=True)
class BaselineResult:
    method: str
    posterior: np.ndarray       # (N, L)
    objective_trace: np.ndarray = field(default=None, repr=False)
    chosen_restart: int = 0
    confusion: np.ndarray = field(default=None, repr=False)  # (M, L, L), D&S
    class_prior: np.ndarray = field(default=None, repr=False)

    @property
    def decoded(self) -> np.ndarray:
        """Argmax labels, ties to the lowest label index."""
        return np.argmax(self.posterior, axis=1)


def majority_vote(dataset: Dataset) -> BaselineResult:
    """Per-item empirical label frequencies; modal label decoding."""
    N, L = dataset.n_items, dataset.n_labels
    counts = np.zeros((N, L))
    np.add.at(counts, (dataset.item_idx, dataset.label_idx), 1.0)
    posterior = counts / counts.sum(axis=1, keepdims=True)
    return BaselineResult(method="majority", posterior=posterior)


def ds_e_step(dataset: Dataset, log_pi: np.ndarray, log_p: np.ndarray):
    """Posterior over per-item truths given confusion matrices and prior.

    Returns (qT, logZ_total) with qT of shape (N, L).
    """
    N, L = dataset.n_items, dataset.n_labels
    scores = np.tile(log_p, (N, 1))
    np.add.at(scores, dataset.item_idx,
              log_pi[dataset.ann_idx, :, dataset.label_idx])
    logZ = logsumexp(scores, axis=1)
    qT = np.exp(scores - logZ[:, None])
    return qT, float(logZ.sum())


def _ds_m_step(dataset: Dataset, qT: np.ndarray):
    M, L = dataset.n_annotators, dataset.n_labels
    counts = np.full((M, L, L), DS_SMOOTHING)
    np.add.at(counts, (dataset.ann_idx, slice(None), dataset.label_idx),
              qT[dataset.item_idx])
    pi = counts / counts.sum(axis=2, keepdims=True)
    p = qT.sum(axis=0) + DS_SMOOTHING
    p = p / p.sum()
    return pi, p


def _ds_penalty(pi, p) -> float:
    """Pseudo-count log-prior keeping the smoothed-EM trace monotone."""
    return float(DS_SMOOTHING * (np.log(pi).sum() + np.log(p).sum()))


def dawid_skene(dataset: Dataset,
                config: FitConfig = FitConfig()) -> BaselineResult:
    """Classical per-annotator confusion-matrix EM.

    Same restart/convergence contract as the main fit; deterministic given
    the config seed. Restart 0 starts from majority-vote posteriors,
    further restarts perturb them with seeded Dirichlet noise.
    """
    N, M, L = dataset.n_items, dataset.n_annotators, dataset.n_labels
    if L < 2:
        raise ValueError("need at least 2 labels")
    mv = majority_vote(dataset).posterior

    results = []
    for r in range(config.restarts):
        if r == 0:
            qT = mv
        else:
            rng = np.random.default_rng(
                np.random.SeedSequence(
                    [config.seed & 0xFFFFFFFFFFFFFFFF, r]))
            qT = 0.5 * mv + 0.5 * rng.dirichlet(np.ones(L), size=N)
        pi, p = _ds_m_step(dataset, qT)
        trace = []
        for _ in range(config.max_iterations):
            qT, logZ = ds_e_step(dataset, np.log(pi), np.log(p))
            obj = logZ + _ds_penalty(pi, p)
            if not np.isfinite(obj):
                raise NumericalError("non-finite Dawid-Skene objective")
            converged = bool(trace) and (
                abs(obj - trace[-1])
                <= config.convergence_tol * (abs(trace[-1]) + 1e-12))
            trace.append(obj)
            if converged:
                break
            pi, p = _ds_m_step(dataset, qT)
        results.append((np.asarray(trace), qT, pi, p))

    best = int(np.argmax([res[0][-1] for res in results]))
    trace, qT, pi, p = results[best]
    return BaselineResult(
        method="dawid-skene",
        posterior=qT,
        objective_trace=trace,
        chosen_restart=best,
        confusion=pi,
        class_prior=p,
    )


def mace(dataset: Dataset, config: FitConfig = FitConfig()) -> FitResult:
    """Competence model with a single subpopulation over all annotators."""
    single = SubpopulationMap.single(dataset.annotations.annotators)
    return fit(validate(dataset.annotations, single), config)


def mace_result(fit_result: FitResult) -> BaselineResult:
    """Flatten a single-subpopulation fit into a per-item baseline result."""
    assert fit_result.posterior.entries.shape[1] == 1
    return BaselineResult(
        method="mace",
        posterior=fit_result.posterior.entries[:, 0, :],
        objective_trace=fit_result.objective_trace,
        chosen_restart=fit_result.chosen_restart,
    )
