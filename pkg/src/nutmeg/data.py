"""Shared data model: label spaces, annotation sets, subpopulation maps,
posterior and competence tables, and dataset validation.

All labels are stored as indices into a :class:`LabelSpace`; external
identifiers only appear at the I/O boundary. Annotations are kept in sparse
long format because real crowdsourced data rarely covers the full
item x annotator grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class ValidationError(ValueError):
    """Raised when a dataset violates its invariants.

    Collects *all* violations found, not just the first one.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        msg = "dataset validation failed:\n" + "\n".join(
            f"  - {p}" for p in self.problems)
        super().__init__(msg)


@dataclass(frozen=True)
class LabelSpace:
    """Ordered set of distinct label identifiers."""

    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def size(self) -> int:
        return len(self.labels)

    @cached_property
    def index_of(self) -> dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    def problems(self) -> list:
        out = []
        if len(set(self.labels)) != len(self.labels):
            out.append("label space contains duplicate labels")
        if len(self.labels) < 2:
            out.append(f"label space needs >= 2 labels, got {len(self.labels)}")
        return out


@dataclass(frozen=True)
class AnnotationSet:
    """Sparse long-format annotations: (item, annotator, label index) triples."""

    items: tuple
    annotators: tuple
    records: tuple  # of (item_id, annotator_id, label_index)
    label_space: LabelSpace

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(str(x) for x in self.items))
        object.__setattr__(
            self, "annotators", tuple(str(x) for x in self.annotators))
        object.__setattr__(
            self, "records",
            tuple((str(i), str(j), int(a)) for i, j, a in self.records))

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_annotators(self) -> int:
        return len(self.annotators)

    @property
    def n_records(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class SubpopulationMap:
    """Total assignment of each annotator to exactly one subpopulation."""

    assignment: dict  # annotator_id -> subpopulation_id
    subpopulations: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "subpopulations",
            tuple(str(x) for x in self.subpopulations))
        object.__setattr__(
            self, "assignment",
            {str(k): str(v) for k, v in self.assignment.items()})

    @property
    def n_subpopulations(self) -> int:
        return len(self.subpopulations)

    @classmethod
    def single(cls, annotators, name="all") -> "SubpopulationMap":
        """Degenerate map placing every annotator in one group."""
        return cls({a: name for a in annotators}, (name,))


@dataclass(frozen=True)
class Dataset:
    """Validated, index-aligned view of an AnnotationSet + SubpopulationMap.

    Immutable after construction; safe to share across workers.
    """

    annotations: AnnotationSet
    subpops: SubpopulationMap
    item_idx: np.ndarray      # (R,) int
    ann_idx: np.ndarray       # (R,) int
    label_idx: np.ndarray     # (R,) int
    subpop_of_annotator: np.ndarray  # (M,) int

    @property
    def n_items(self):
        return self.annotations.n_items

    @property
    def n_annotators(self):
        return self.annotations.n_annotators

    @property
    def n_subpops(self):
        return self.subpops.n_subpopulations

    @property
    def n_labels(self):
        return self.annotations.label_space.size

    @property
    def n_records(self):
        return self.annotations.n_records

    @cached_property
    def record_subpop(self) -> np.ndarray:
        """(R,) subpopulation index of each record's annotator."""
        return self.subpop_of_annotator[self.ann_idx]

    @cached_property
    def observed(self) -> np.ndarray:
        """(N, P) bool: cell has at least one annotation."""
        obs = np.zeros((self.n_items, self.n_subpops), dtype=bool)
        obs[self.item_idx, self.record_subpop] = True
        return obs


def validate(annotations: AnnotationSet,
             subpops: SubpopulationMap) -> Dataset:
    """Check every invariant and return an index-aligned dataset handle.

    Raises :class:`ValidationError` listing all violations found.
    """
    problems = list(annotations.label_space.problems())
    L = annotations.label_space.size

    if len(set(annotations.items)) != len(annotations.items):
        problems.append("duplicate item identifiers")
    if len(set(annotations.annotators)) != len(annotations.annotators):
        problems.append("duplicate annotator identifiers")
    if subpops.n_subpopulations < 1:
        problems.append("need at least one subpopulation")
    if len(set(subpops.subpopulations)) != len(subpops.subpopulations):
        problems.append("duplicate subpopulation identifiers")

    item_index = {x: i for i, x in enumerate(annotations.items)}
    ann_index = {x: i for i, x in enumerate(annotations.annotators)}
    subpop_index = {x: i for i, x in enumerate(subpops.subpopulations)}

    seen_pairs = set()
    item_idx, ann_idx, label_idx = [], [], []
    for item, ann, a in annotations.records:
        ok = True
        if item not in item_index:
            problems.append(f"record references unknown item {item!r}")
            ok = False
        if ann not in ann_index:
            problems.append(f"record references unknown annotator {ann!r}")
            ok = False
        if not (0 <= a < L):
            problems.append(
                f"record ({item!r}, {ann!r}) has label index {a} "
                f"outside [0, {L})")
            ok = False
        if (item, ann) in seen_pairs:
            problems.append(f"duplicate record for ({item!r}, {ann!r})")
            ok = False
        seen_pairs.add((item, ann))
        if ok:
            item_idx.append(item_index[item])
            ann_idx.append(ann_index[ann])
            label_idx.append(a)

    covered_items = {i for i, _, _ in annotations.records}
    covered_anns = {j for _, j, _ in annotations.records}
    for item in annotations.items:
        if item not in covered_items:
            problems.append(f"item {item!r} has no records")
    for ann in annotations.annotators:
        if ann not in covered_anns:
            problems.append(f"annotator {ann!r} has no records")

    subpop_of = np.zeros(len(annotations.annotators), dtype=np.int64)
    for ann in annotations.annotators:
        group = subpops.assignment.get(ann)
        if group is None:
            problems.append(f"annotator {ann!r} has no subpopulation")
        elif group not in subpop_index:
            problems.append(
                f"annotator {ann!r} assigned to unknown subpopulation "
                f"{group!r}")
        else:
            subpop_of[ann_index[ann]] = subpop_index[group]

    if problems:
        raise ValidationError(problems)

    return Dataset(
        annotations=annotations,
        subpops=subpops,
        item_idx=np.asarray(item_idx, dtype=np.int64),
        ann_idx=np.asarray(ann_idx, dtype=np.int64),
        label_idx=np.asarray(label_idx, dtype=np.int64),
        subpop_of_annotator=subpop_of,
    )


@dataclass(frozen=True)
class CountsSummary:
    item_subpop: np.ndarray   # (N, P) int annotation counts
    per_annotator: np.ndarray  # (M,) int item counts


def counts_summary(dataset: Dataset) -> CountsSummary:
    """Exact annotation counts per (item, subpopulation) and per annotator."""
    item_subpop = np.zeros((dataset.n_items, dataset.n_subpops),
                           dtype=np.int64)
    np.add.at(item_subpop, (dataset.item_idx, dataset.record_subpop), 1)
    per_annotator = np.bincount(dataset.ann_idx,
                                minlength=dataset.n_annotators)
    return CountsSummary(item_subpop=item_subpop, per_annotator=per_annotator)


@dataclass(frozen=True)
class PosteriorTable:
    """Per-(item, subpopulation) categorical posterior over labels.

    ``entries[i, k]`` is NaN-filled where no posterior is defined (an
    unobserved cell before imputation, or a leave-missing cell after).
    ``imputed[i, k]`` is True iff no annotator from subpopulation k labeled
    item i; ``fallback`` marks imputed cells that fell back to the truth
    prior for lack of matching items.
    """

    items: tuple
    subpopulations: tuple
    label_space: LabelSpace
    entries: np.ndarray   # (N, P, L) float
    imputed: np.ndarray   # (N, P) bool
    fallback: np.ndarray  # (N, P) bool

    @cached_property
    def defined(self) -> np.ndarray:
        """(N, P) bool: cell holds a posterior distribution."""
        return ~np.isnan(self.entries[:, :, 0])

    @cached_property
    def decoded(self) -> np.ndarray:
        """(N, P) argmax labels; ties go to the lowest label index;
        -1 where undefined."""
        safe = np.where(np.isnan(self.entries), -np.inf, self.entries)
        out = np.argmax(safe, axis=2)
        return np.where(self.defined, out, -1)

    def cell_status(self, i: int, k: int) -> str:
        """One of 'false' (observed), 'true' (imputed), 'missing'."""
        if not self.imputed[i, k]:
            return "false"
        return "true" if self.defined[i, k] else "missing"


@dataclass(frozen=True)
class CompetenceTable:
    """Per-annotator non-spamming probability and spam-emission behavior."""

    annotators: tuple
    label_space: LabelSpace
    theta: np.ndarray  # (M,) in [0, 1]
    xi: np.ndarray     # (M, L), rows sum to 1
