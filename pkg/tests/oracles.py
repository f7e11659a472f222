"""Brute-force reference implementations used as independent oracles.

These enumerate every latent assignment directly from the generative
definitions (truth draw, spam indicator, emission) and never reuse the
library's vectorized E-step shortcuts.
"""
import itertools

import numpy as np


def nutmeg_brute_posteriors(dataset, theta, xi, truth_prior):
    """Exact q(T), q(S=1) by summing the joint over all T assignments,
    with the per-record spam indicator summed from its two values."""
    N, P, L = dataset.n_items, dataset.n_subpops, dataset.n_labels
    cells = [(i, k) for i in range(N) for k in range(P)]
    recs = list(zip(dataset.item_idx, dataset.ann_idx, dataset.label_idx))
    ksub = dataset.subpop_of_annotator

    post = np.zeros((N, P, L))
    spam = np.zeros(len(recs))
    total = 0.0
    for assignment in itertools.product(range(L), repeat=len(cells)):
        tmap = dict(zip(cells, assignment))
        p = 1.0
        for cell in cells:
            p *= truth_prior[tmap[cell]]
        contrib = []
        for i, j, a in recs:
            t = tmap[(i, ksub[j])]
            p_keep = theta[j] * (1.0 if a == t else 0.0)   # S = 0
            p_spam = (1.0 - theta[j]) * xi[j][a]           # S = 1
            p *= p_keep + p_spam
            contrib.append((p_keep, p_spam))
        total += p
        for idx, (i, k) in enumerate(cells):
            post[i, k, assignment[idx]] += p
        for r, (p_keep, p_spam) in enumerate(contrib):
            if p_keep + p_spam > 0:
                spam[r] += p * p_spam / (p_keep + p_spam)
    return post / total, spam / total


def dawid_skene_brute_posteriors(dataset, confusion, class_prior):
    """Exact q(T) by summing the joint over all per-item truth vectors."""
    N, L = dataset.n_items, dataset.n_labels
    recs = list(zip(dataset.item_idx, dataset.ann_idx, dataset.label_idx))
    post = np.zeros((N, L))
    total = 0.0
    for assignment in itertools.product(range(L), repeat=N):
        p = 1.0
        for t in assignment:
            p *= class_prior[t]
        for i, j, a in recs:
            p *= confusion[j][assignment[i]][a]
        total += p
        for i in range(N):
            post[i, assignment[i]] += p
    return post / total


def random_tiny_dataset(rng, max_items=3, max_annotators=4, n_labels=2,
                        max_subpops=2):
    """Small random instance with every item and annotator covered."""
    from nutmeg.data import (AnnotationSet, LabelSpace, SubpopulationMap,
                             validate)

    N = int(rng.integers(1, max_items + 1))
    M = int(rng.integers(2, max_annotators + 1))
    P = int(rng.integers(1, max_subpops + 1))
    items = [f"i{i}" for i in range(N)]
    anns = [f"a{j}" for j in range(M)]
    pairs = [(i, j) for i in range(N) for j in range(M)]
    low = min(N + M, len(pairs))
    keep = set(map(tuple, rng.permutation(pairs)[
        :int(rng.integers(low, len(pairs) + 1))]))
    # guarantee coverage of every item and annotator
    for i in range(N):
        keep.add((i, int(rng.integers(M))))
    for j in range(M):
        keep.add((int(rng.integers(N)), j))
    records = tuple(
        (items[i], anns[j], int(rng.integers(n_labels)))
        for i, j in sorted(keep))
    groups = [f"g{k}" for k in range(P)]
    assignment = {a: groups[int(rng.integers(P))] for a in anns}
    annotations = AnnotationSet(
        items=tuple(items), annotators=tuple(anns), records=records,
        label_space=LabelSpace(tuple(str(x) for x in range(n_labels))))
    return validate(annotations,
                    SubpopulationMap(assignment, tuple(groups)))
