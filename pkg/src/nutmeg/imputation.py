"""Posterior imputation for (item, subpopulation) cells with no annotations.

An unobserved cell borrows from items that look the same to the observed
subpopulations: take the decoded labels of the item's observed cells, find
other items decoded identically on those same subpopulations that do have
annotations from the missing group, and average that group's posteriors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, PosteriorTable
from .inference import FitResult


@dataclass(frozen=True)
class ImputationPolicy:
    mode: str = "impute"  # "impute" or "leave_missing"
    min_support: int = 1

    def __post_init__(self):
        if self.mode not in ("impute", "leave_missing"):
            raise ValueError(f"unknown imputation mode {self.mode!r}")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")


def impute(fit: FitResult, dataset: Dataset,
           policy: ImputationPolicy = ImputationPolicy()) -> PosteriorTable:
    """Fill unobserved cells of the fit's posterior table.

    Observed cells are never modified. In leave_missing mode the table is
    returned with unobserved cells still undefined. Fallback cells (no
    matching items, or support below ``min_support``) receive the truth
    prior and are flagged.
    """
    src = fit.posterior
    entries = src.entries.copy()
    fallback = src.fallback.copy()
    observed = dataset.observed
    N, P, _ = entries.shape

    if policy.mode == "leave_missing":
        return PosteriorTable(
            items=src.items,
            subpopulations=src.subpopulations,
            label_space=src.label_space,
            entries=entries,
            imputed=~observed,
            fallback=fallback,
        )

    decoded = src.decoded  # observed decodes only; -1 elsewhere
    truth_prior = fit.truth_prior
    if truth_prior is None:
        L = src.label_space.size
        truth_prior = np.full(L, 1.0 / L)

    for i in range(N):
        for k in range(P):
            if observed[i, k]:
                continue
            obs_k = np.flatnonzero(observed[i])
            matches = []
            if obs_k.size:
                target = decoded[i, obs_k]
                # items decoded identically on the same observed
                # subpopulations, with annotations from group k
                cand = (observed[:, k]
                        & np.all(observed[:, obs_k], axis=1)
                        & np.all(decoded[:, obs_k] == target, axis=1))
                matches = np.flatnonzero(cand)
            if len(matches) >= policy.min_support:
                entries[i, k] = src.entries[matches, k].mean(axis=0)
            else:
                entries[i, k] = truth_prior
                fallback[i, k] = True

    return PosteriorTable(
        items=src.items,
        subpopulations=src.subpopulations,
        label_space=src.label_space,
        entries=entries,
        imputed=~observed,
        fallback=fallback,
    )
