"""File formats: long-format annotation CSVs, result tables, manifests.

All CSVs are UTF-8 with a header row; identifiers are restricted to
[A-Za-z0-9_-]+ so no quoting is ever needed; floats are rendered with 9
significant digits.
"""
from __future__ import annotations

import csv
import hashlib
import json
import re
from pathlib import Path

import numpy as np

from .data import (AnnotationSet, CompetenceTable, LabelSpace,
                   PosteriorTable, SubpopulationMap)

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


class ParseError(ValueError):
    """Input file failed to parse; message carries the line number."""


def fmt_float(x: float) -> str:
    return f"{x:.9g}"


def _check_id(value: str, path, lineno: int) -> str:
    if not _ID_RE.match(value):
        raise ParseError(
            f"{path}:{lineno}: identifier {value!r} contains characters "
            "outside [A-Za-z0-9_-]")
    return value


def _read_rows(path, expected_header):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise ParseError(f"{path}:1: empty file")
    if rows[0] != expected_header:
        raise ParseError(
            f"{path}:1: expected header {','.join(expected_header)}, "
            f"got {','.join(rows[0])}")
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(expected_header):
            raise ParseError(
                f"{path}:{lineno}: expected {len(expected_header)} "
                f"fields, got {len(row)}")
        yield lineno, row


def read_annotations(path) -> AnnotationSet:
    """Read (item_id, annotator_id, label) triples.

    The label space is the sorted set of distinct labels seen; item and
    annotator order follows first appearance.
    """
    triples = []
    for lineno, (item, ann, label) in _read_rows(
            path, ["item_id", "annotator_id", "label"]):
        triples.append((_check_id(item, path, lineno),
                        _check_id(ann, path, lineno),
                        _check_id(label, path, lineno)))
    labels = LabelSpace(tuple(sorted({lab for _, _, lab in triples})))
    items = tuple(dict.fromkeys(item for item, _, _ in triples))
    annotators = tuple(dict.fromkeys(ann for _, ann, _ in triples))
    records = tuple((item, ann, labels.index_of[lab])
                    for item, ann, lab in triples)
    return AnnotationSet(items=items, annotators=annotators,
                         records=records, label_space=labels)


def write_annotations(path, annotations: AnnotationSet) -> None:
    labels = annotations.label_space.labels
    lines = ["item_id,annotator_id,label"]
    lines += [f"{i},{j},{labels[a]}" for i, j, a in annotations.records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_subpopulations(path) -> SubpopulationMap:
    assignment = {}
    for lineno, (ann, group) in _read_rows(
            path, ["annotator_id", "subpopulation"]):
        assignment[_check_id(ann, path, lineno)] = _check_id(
            group, path, lineno)
    groups = tuple(dict.fromkeys(assignment.values()))
    return SubpopulationMap(assignment=assignment, subpopulations=groups)


def write_subpopulations(path, subpops: SubpopulationMap) -> None:
    lines = ["annotator_id,subpopulation"]
    lines += [f"{ann},{group}" for ann, group in subpops.assignment.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_labels(path, posterior: PosteriorTable) -> None:
    """labels.csv: one row per defined or missing cell."""
    from .inference import confidence

    labels = posterior.label_space.labels
    decoded = posterior.decoded
    lines = ["item_id,subpopulation,label,posterior_max,confidence,imputed"]
    for i, item in enumerate(posterior.items):
        for k, group in enumerate(posterior.subpopulations):
            status = posterior.cell_status(i, k)
            if status == "missing":
                # leave_missing cells carry no estimate; no row is written
                continue
            cell = posterior.entries[i, k]
            lines.append(
                f"{item},{group},{labels[decoded[i, k]]},"
                f"{fmt_float(float(cell.max()))},"
                f"{fmt_float(confidence(cell))},{status}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_competence(path, competence: CompetenceTable) -> None:
    labels = competence.label_space.labels
    header = "annotator_id,theta," + ",".join(f"xi_{lab}" for lab in labels)
    lines = [header]
    for j, ann in enumerate(competence.annotators):
        xi = ",".join(fmt_float(x) for x in competence.xi[j])
        lines.append(f"{ann},{fmt_float(competence.theta[j])},{xi}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labels(path) -> list[dict]:
    """Parse labels.csv rows (or truth_labels.csv via read_truth_labels)."""
    out = []
    header = ["item_id", "subpopulation", "label", "posterior_max",
              "confidence", "imputed"]
    for _, row in _read_rows(path, header):
        out.append(dict(zip(header, row)))
    return out


def write_truth_labels(path, world) -> None:
    labels = world.annotations.label_space.labels
    lines = ["item_id,subpopulation,true_label"]
    for i, item in enumerate(world.annotations.items):
        for k, group in enumerate(world.subpops.subpopulations):
            lines.append(f"{item},{group},{labels[world.true_labels[i, k]]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_truth_labels(path) -> dict:
    """(item_id, subpopulation) -> true label string."""
    out = {}
    for _, (item, group, label) in _read_rows(
            path, ["item_id", "subpopulation", "true_label"]):
        out[(item, group)] = label
    return out


def write_truth_spam(path, world) -> None:
    lines = ["annotator_id,true_spam_rate"]
    for ann, rate in zip(world.all_annotators, world.true_spam_rates):
        lines.append(f"{ann},{fmt_float(float(rate))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_truth_spam(path) -> dict:
    out = {}
    for _, (ann, rate) in _read_rows(
            path, ["annotator_id", "true_spam_rate"]):
        out[ann] = float(rate)
    return out


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command: str, config: dict, inputs: dict,
                   seed: int, duration: float) -> None:
    """manifest.json: everything needed to reproduce the run bit-for-bit."""
    from . import __version__

    manifest = {
        "command": command,
        "config": config,
        "input_digests": {name: file_digest(p) for name, p in inputs.items()},
        "version": __version__,
        "seed": seed,
        "duration_seconds": round(duration, 3),
    }
    Path(path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
