import numpy as np
import pytest

from nutmeg.data import CompetenceTable, LabelSpace
from nutmeg.metrics import (competence_correlation, divisiveness_estimate,
                            evaluate, jsd, subpop_accuracy)
from nutmeg.simulator import SimConfig, generate

BINARY = LabelSpace(("0", "1"))


def test_jsd_identity_and_symmetry():
    p = np.array([0.2, 0.3, 0.5])
    q = np.array([0.6, 0.1, 0.3])
    assert jsd(p, p) == pytest.approx(0.0, abs=1e-12)
    assert jsd(p, q) == pytest.approx(jsd(q, p), abs=1e-12)
    assert jsd(p, q) > 0


def test_jsd_disjoint_support_is_log2():
    assert jsd([1.0, 0.0], [0.0, 1.0]) == pytest.approx(np.log(2.0))
    assert jsd([1.0, 0.0], [0.0, 1.0], base="2") == pytest.approx(1.0)


def test_jsd_hand_value():
    # JSD((0.5, 0.5), (1, 0)) in nats
    assert jsd([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.2158, abs=1e-4)


def test_subpop_accuracy_counts_and_undefined():
    decoded = np.array([[0, 1], [1, 1], [0, 0]])
    truth = np.array([[0, 0], [1, 1], [1, 0]])
    evaluable = np.array([[True, True], [True, True], [True, False]])
    acc = subpop_accuracy(decoded, truth, evaluable, ("maj", "min"))
    assert acc["maj"] == pytest.approx(2 / 3)
    assert acc["min"] == pytest.approx(1 / 2)
    none_mask = np.zeros((3, 2), dtype=bool)
    none_mask[:, 1] = evaluable[:, 1]
    acc = subpop_accuracy(decoded, truth, none_mask, ("maj", "min"))
    assert acc["maj"] is None


def test_divisiveness_excludes_undefined_items():
    decoded = np.array([[0, 1], [1, 1], [0, 1]])
    defined = np.array([[True, True], [True, True], [True, False]])
    assert divisiveness_estimate(decoded, defined) == pytest.approx(0.5)
    assert divisiveness_estimate(decoded, np.zeros((3, 2), bool)) is None
    with pytest.raises(ValueError):
        divisiveness_estimate(decoded[:, :1], defined[:, :1])


def test_competence_correlation_alignment():
    world = generate(SimConfig(seed=0, n_items=50, n_annotators=20))
    # fitted theta exactly equal to true competence -> r == 1
    rate_of = dict(zip(world.all_annotators, world.true_spam_rates))
    anns = world.annotations.annotators
    theta = np.array([1.0 - rate_of[a] for a in anns])
    table = CompetenceTable(annotators=anns, theta=theta,
                            xi=np.full((len(anns), 2), 0.5),
                            label_space=BINARY)
    assert competence_correlation(table, world) == pytest.approx(1.0)
    flat = CompetenceTable(annotators=anns,
                           theta=np.full(len(anns), 0.9),
                           xi=np.full((len(anns), 2), 0.5),
                           label_space=BINARY)
    assert competence_correlation(flat, world) is None


def test_evaluate_perfect_decode_on_truth():
    from nutmeg.data import PosteriorTable
    world = generate(SimConfig(seed=1, n_items=60, n_annotators=20,
                               divisiveness_rate=0.25))
    N = len(world.annotations.items)
    entries = np.zeros((N, 2, 2))
    for i in range(N):
        for k in range(2):
            entries[i, k, world.true_labels[i, k]] = 1.0
    table = PosteriorTable(
        items=world.annotations.items,
        subpopulations=world.subpops.subpopulations,
        label_space=world.annotations.label_space,
        entries=entries, imputed=np.zeros((N, 2), bool),
        fallback=np.zeros((N, 2), bool))
    report = evaluate(table, world)
    assert report.accuracy_by_subpop == {"majority": 1.0, "minority": 1.0}
    assert report.divisiveness_estimate == pytest.approx(
        len(world.divisive_items) / N)
    assert report.cells_by_subpop == {"majority": N, "minority": N}
