import numpy as np
import pytest

from nutmeg.data import (AnnotationSet, LabelSpace, PosteriorTable,
                         SubpopulationMap, validate)
from nutmeg.imputation import ImputationPolicy, impute
from nutmeg.inference import FitConfig, fit
from oracles import random_tiny_dataset

BINARY = LabelSpace(("0", "1"))


def hole_dataset():
    """Three items; i2 has no minority annotations, i0/i1 do and agree
    with i2 on the majority side."""
    records = (
        ("i0", "a0", 1), ("i0", "a1", 1), ("i0", "b0", 0),
        ("i1", "a0", 1), ("i1", "a1", 1), ("i1", "b1", 0),
        ("i2", "a0", 1), ("i2", "a1", 1),
    )
    ann = AnnotationSet(items=("i0", "i1", "i2"),
                        annotators=("a0", "a1", "b0", "b1"),
                        records=records, label_space=BINARY)
    subpops = SubpopulationMap(
        {"a0": "maj", "a1": "maj", "b0": "min", "b1": "min"},
        ("maj", "min"))
    return validate(ann, subpops)


def test_unobserved_cell_gets_mean_of_matching_items():
    ds = hole_dataset()
    result = fit(ds, FitConfig(seed=0, restarts=2))
    table = impute(result, ds, ImputationPolicy())
    k_min = table.subpopulations.index("min")
    expected = result.posterior.entries[[0, 1], k_min].mean(axis=0)
    assert np.allclose(table.entries[2, k_min], expected)
    assert table.imputed[2, k_min]
    assert not table.fallback[2, k_min]
    # observed cells are untouched
    obs = ds.observed
    assert np.array_equal(table.entries[obs], result.posterior.entries[obs])
    assert not table.imputed[obs].any()


def test_leave_missing_keeps_cell_undefined():
    ds = hole_dataset()
    result = fit(ds, FitConfig(seed=0, restarts=2))
    table = impute(result, ds, ImputationPolicy(mode="leave_missing"))
    k_min = table.subpopulations.index("min")
    assert not table.defined[2, k_min]
    assert table.cell_status(2, k_min) == "missing"


def test_fallback_when_no_match():
    # the only fully-observed items disagree with the target's decode
    records = (
        ("i0", "a0", 0), ("i0", "b0", 0),
        ("i1", "a0", 1), ("i1", "a1", 1),
    )
    ann = AnnotationSet(items=("i0", "i1"),
                        annotators=("a0", "a1", "b0"),
                        records=records, label_space=BINARY)
    subpops = SubpopulationMap(
        {"a0": "maj", "a1": "maj", "b0": "min"}, ("maj", "min"))
    ds = validate(ann, subpops)
    result = fit(ds, FitConfig(seed=1, restarts=2))
    table = impute(result, ds)
    k_min = table.subpopulations.index("min")
    assert table.fallback[1, k_min]
    # fallback cells carry the truth prior (uniform by default)
    assert np.allclose(table.entries[1, k_min], [0.5, 0.5])


def test_min_support_forces_fallback():
    ds = hole_dataset()
    result = fit(ds, FitConfig(seed=0, restarts=2))
    table = impute(result, ds, ImputationPolicy(min_support=3))
    k_min = table.subpopulations.index("min")
    assert table.fallback[2, k_min]


def test_single_subpopulation_never_imputes():
    rng = np.random.default_rng(4)
    ds = random_tiny_dataset(rng, max_subpops=1)
    result = fit(ds, FitConfig(seed=0, restarts=1))
    table = impute(result, ds)
    assert not table.imputed.any()
    assert not table.fallback.any()


def test_imputed_values_stay_in_convex_hull():
    for seed in range(6):
        rng = np.random.default_rng(seed)
        ds = random_tiny_dataset(rng, max_items=4, max_subpops=2)
        result = fit(ds, FitConfig(seed=seed, restarts=1,
                                   max_iterations=10))
        table = impute(result, ds)
        assert np.all(table.entries >= -1e-12)
        assert np.allclose(table.entries.sum(axis=2), 1.0, atol=1e-9)


def test_policy_validation():
    with pytest.raises(ValueError):
        ImputationPolicy(mode="extrapolate")
    with pytest.raises(ValueError):
        ImputationPolicy(min_support=0)
