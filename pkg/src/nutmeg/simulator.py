"""Synthetic crowd-annotation generator with known ground truth.

Two subpopulations (majority / minority) share a truth on non-divisive
items and hold distinct truths on divisive ones. Each annotator carries a
personal spam rate; a spamming annotator emits a uniformly random label,
otherwise they emit their group's truth. Items receive a fixed number of
annotations from distinct, uniformly sampled annotators.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, fields, replace

import numpy as np

from .data import AnnotationSet, LabelSpace, SubpopulationMap

MAJORITY = "majority"
MINORITY = "minority"
_SEED_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class SimConfig:
    n_annotators: int = 150
    minority_proportion: float = 0.2
    n_items: int = 500
    n_labels: int = 2
    global_spam_rate: float = 0.1
    divisiveness_rate: float = 0.2
    annotations_per_item: int = 5
    seed: int = 0
    spam_rate_concentration: float = 2.0
    constant_spam_rate: bool = False

    def __post_init__(self):
        if not 0 < self.minority_proportion <= 0.5:
            raise ValueError("minority_proportion must be in (0, 0.5]")
        if not 0 <= self.global_spam_rate <= 1:
            raise ValueError("global_spam_rate must be in [0, 1]")
        if not 0 <= self.divisiveness_rate <= 1:
            raise ValueError("divisiveness_rate must be in [0, 1]")
        if self.annotations_per_item > self.n_annotators:
            raise ValueError(
                "annotations_per_item cannot exceed n_annotators")
        if self.n_labels < 2:
            raise ValueError("need at least 2 labels")
        if self.spam_rate_concentration <= 0:
            raise ValueError("spam_rate_concentration must be positive")


@dataclass(frozen=True)
class SyntheticWorld:
    config: SimConfig
    annotations: AnnotationSet        # annotators without records pruned
    subpops: SubpopulationMap
    all_annotators: tuple             # full pool, including unsampled
    true_labels: np.ndarray           # (N, 2) label indices per subpop
    true_spam_rates: np.ndarray       # (n_annotators,) aligned to pool
    divisive_items: tuple             # item ids whose truths differ


def _spam_rates(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    m = config.global_spam_rate
    if config.constant_spam_rate or m in (0.0, 1.0):
        return np.full(config.n_annotators, m)
    c = config.spam_rate_concentration
    # redraw until the sample mean tracks the configured global rate
    for _ in range(1000):
        rates = rng.beta(c * m, c * (1.0 - m), size=config.n_annotators)
        if abs(rates.mean() - m) <= 0.01:
            return rates
    return rates


def generate(config: SimConfig) -> SyntheticWorld:
    """Build one synthetic world; deterministic given config.seed."""
    rng = np.random.default_rng(
        np.random.SeedSequence(config.seed & _SEED_MASK))
    N, M, L = config.n_items, config.n_annotators, config.n_labels

    width = max(4, len(str(N - 1)))
    items = tuple(f"i{idx:0{width}d}" for idx in range(N))
    awidth = max(3, len(str(M - 1)))
    pool = tuple(f"a{idx:0{awidth}d}" for idx in range(M))

    n_minority = int(round(config.minority_proportion * M))
    group_of = np.zeros(M, dtype=np.int64)
    group_of[rng.choice(M, size=n_minority, replace=False)] = 1

    spam_rates = _spam_rates(config, rng)

    n_div = int(round(config.divisiveness_rate * N))
    divisive = np.zeros(N, dtype=bool)
    divisive[rng.choice(N, size=n_div, replace=False)] = True

    true_labels = np.zeros((N, 2), dtype=np.int64)
    true_labels[:, 0] = rng.integers(L, size=N)
    true_labels[:, 1] = true_labels[:, 0]
    # divisive items: minority truth uniform over the remaining labels
    offsets = rng.integers(1, L, size=int(divisive.sum()))
    true_labels[divisive, 1] = (true_labels[divisive, 0] + offsets) % L

    records = []
    for i in range(N):
        chosen = rng.choice(M, size=config.annotations_per_item,
                            replace=False)
        spam_draw = rng.random(config.annotations_per_item)
        spam_label = rng.integers(L, size=config.annotations_per_item)
        for pos, j in enumerate(chosen):
            if spam_draw[pos] < spam_rates[j]:
                label = int(spam_label[pos])
            else:
                label = int(true_labels[i, group_of[j]])
            records.append((items[i], pool[j], label))

    seen = {j for _, j, _ in records}
    active = tuple(a for a in pool if a in seen)
    label_space = LabelSpace(tuple(str(x) for x in range(L)))
    annotations = AnnotationSet(
        items=items, annotators=active, records=tuple(records),
        label_space=label_space)
    subpops = SubpopulationMap(
        assignment={pool[j]: (MINORITY if group_of[j] else MAJORITY)
                    for j in range(M)},
        subpopulations=(MAJORITY, MINORITY))
    return SyntheticWorld(
        config=config,
        annotations=annotations,
        subpops=subpops,
        all_annotators=pool,
        true_labels=true_labels,
        true_spam_rates=spam_rates,
        divisive_items=tuple(items[i] for i in np.flatnonzero(divisive)),
    )


def cell_seed(base_seed: int, coords: tuple, replicate: int) -> int:
    """Deterministic per-cell seed from the grid coordinates."""
    ss = np.random.SeedSequence(
        [base_seed & _SEED_MASK, *[int(c) for c in coords], int(replicate)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] & (_SEED_MASK >> 1))


def sweep_grid(grid: dict, replicates: int = 1, base_seed: int = 0,
               base_config: SimConfig = SimConfig()):
    """Enumerate (SimConfig, SyntheticWorld) over a cartesian grid.

    ``grid`` maps SimConfig field names to value lists. Cells are visited
    in row-major order of the grid's field order; each (cell, replicate)
    owns an independent derived seed, so any subset can be regenerated.
    """
    valid = {f.name for f in fields(SimConfig)}
    unknown = set(grid) - valid
    if unknown:
        raise ValueError(f"unknown SimConfig fields: {sorted(unknown)}")
    names = list(grid)
    value_lists = [list(grid[n]) for n in names]
    for coords in itertools.product(
            *[range(len(v)) for v in value_lists]):
        overrides = {n: value_lists[pos][c]
                     for pos, (n, c) in enumerate(zip(names, coords))}
        for rep in range(replicates):
            seed = cell_seed(base_seed, coords, rep)
            config = replace(base_config, seed=seed, **overrides)
            yield config, rep, generate(config)
