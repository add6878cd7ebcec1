import json
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from effort_alloc.instances import fig3, random_instance
from effort_alloc.model import (
    ActionSpec,
    ConditioningError,
    DiscreteDist,
    EstimationError,
    ProblemInstance,
    ValidationError,
    condition_on_elapsed,
    dumps_instance,
    estimate_dist,
    load_instance,
    mean,
    pmf_from_cdf,
    save_instance,
    sharing_set,
    validate,
)


def D(probs, never=0):
    return DiscreteDist({t: F(p) for t, p in probs.items()}, F(never))


# -- pmf_from_cdf ------------------------------------------------------------

def test_pmf_from_cdf_two_atoms():
    d = pmf_from_cdf({1: F(1, 2), 2: F(1, 2), 3: F(1, 2), 4: F(1)}, 5)
    assert d.probs == {1: F(1, 2), 4: F(1, 2)}
    assert d.never == 0


def test_pmf_from_cdf_point_mass():
    d = pmf_from_cdf({1: F(1)}, 5)
    assert d.probs == {1: 1} and d.never == 0


def test_pmf_from_cdf_folds_late_mass_into_never():
    d = pmf_from_cdf({2: F(3, 10), 5: F(3, 10)}, 4)
    assert d.probs == {2: F(3, 10)}
    assert d.never == F(7, 10)


def test_pmf_from_cdf_rejects_decreasing():
    with pytest.raises(ValidationError):
        pmf_from_cdf({1: F(1, 2), 2: F(1, 4), 3: F(1)}, 5)


def test_pmf_from_cdf_rejects_short_cdf():
    with pytest.raises(ValidationError, match="< 1"):
        pmf_from_cdf({1: F(1, 2), 3: F(9, 10)}, 5)


@given(st.lists(st.integers(1, 20), min_size=1, max_size=6), st.integers(1, 12))
def test_pmf_cdf_roundtrip_exact(weights, deadline):
    total = sum(weights)
    cdf, acc = {}, F(0)
    for i, w in enumerate(weights, start=1):
        acc += F(w, total)
        cdf[i] = acc
    d = pmf_from_cdf(cdf, deadline)
    for t, c in cdf.items():
        if t <= deadline:
            assert d.cdf(t) == c
    assert d.total() == 1


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6))
def test_pmf_cdf_roundtrip_float(weights):
    total = sum(weights)
    cdf, acc = {}, 0.0
    for i, w in enumerate(weights, start=1):
        acc += w / total
        cdf[i] = acc
    cdf[len(weights)] = 1.0
    d = pmf_from_cdf(cdf, len(weights))
    for t, c in cdf.items():
        assert abs(d.cdf(t) - c) <= 1e-12


# -- conditioning ------------------------------------------------------------

def test_condition_drops_first_atom():
    assert condition_on_elapsed(D({1: F(1, 2), 4: F(1, 2)}), 1).probs == {3: 1}


def test_condition_on_certain_event_fails():
    with pytest.raises(ConditioningError):
        condition_on_elapsed(D({1: 1}), 1)


def test_condition_renormalizes():
    d = condition_on_elapsed(D({1: F(1, 4), 2: F(1, 4), 3: F(1, 2)}), 1)
    assert d.probs == {1: F(1, 3), 2: F(2, 3)}


def test_condition_keeps_never_mass_proportional():
    d = condition_on_elapsed(D({1: F(1, 2), 3: F(1, 4)}, F(1, 4)), 1)
    assert d.probs == {2: F(1, 2)} and d.never == F(1, 2)


@given(st.lists(st.integers(0, 5), min_size=2, max_size=6), st.integers(1, 4))
def test_conditioning_preserves_total(weights, s):
    if sum(weights) == 0:
        weights[0] = 1
    total = sum(weights)
    d = DiscreteDist({i + 1: F(w, total) for i, w in enumerate(weights)})
    if d.tail(s) == 0:
        with pytest.raises(ConditioningError):
            condition_on_elapsed(d, s)
        return
    c = condition_on_elapsed(d, s)
    assert c.total() == 1
    assert all(t >= 1 for t in c.support)


# -- mean --------------------------------------------------------------------

def test_mean_examples():
    assert mean(D({1: F(1, 2), 4: F(1, 2)})) == F(5, 2)
    assert mean(D({1: F(1, 2), 10: F(1, 2)})) == F(11, 2)
    assert mean(D({2: F(3, 10)}, F(7, 10)), sentinel_value=5) == F(41, 10)


def test_mean_requires_sentinel_for_never_mass():
    with pytest.raises(ValueError):
        mean(D({2: F(3, 10)}, F(7, 10)))


# -- estimation ---------------------------------------------------------------

def test_estimate_counts():
    d = estimate_dist([1, 1, 4, 4], 5)
    assert d.probs == {1: F(1, 2), 4: F(1, 2)} and d.never == 0


def test_estimate_laplace():
    d = estimate_dist([1, 1, 4, 4], 4, alpha=1)
    assert d.probs == {1: F(3, 9), 2: F(1, 9), 3: F(1, 9), 4: F(3, 9)}
    assert d.never == F(1, 9)


def test_estimate_all_beyond_deadline():
    d = estimate_dist([7, 9], 5)
    assert d.never == 1 and not d.probs


def test_estimate_errors():
    with pytest.raises(EstimationError):
        estimate_dist([], 5)
    with pytest.raises(EstimationError):
        estimate_dist([0, 1], 5)
    assert estimate_dist([], 3, alpha=1).total() == 1


def test_estimate_float_alpha_gives_floats():
    d = estimate_dist([1, 2, 2], 3, alpha=0.5)
    assert isinstance(d.never, float)
    assert abs(d.total() - 1) < 1e-12


# -- sharing and validation ------------------------------------------------------

def test_sharing_sets_fig3():
    inst = fig3()
    assert sharing_set(inst, 0, 0) == {0, 1}
    assert sharing_set(inst, 2, 0) == {2}
    assert sharing_set(inst, 0, 1) == {0}
    with pytest.raises(IndexError):
        sharing_set(inst, 3, 0)


def test_sharing_is_reflexive_without_shared_actions():
    inst = random_instance(5, k_range=(2, 3), sharing=False)
    for k, skel in enumerate(inst.skeletons):
        for j in range(len(skel)):
            assert sharing_set(inst, k, j) == {k}


def test_fig3_validates_with_tree_sharing():
    inst = fig3()
    assert validate(inst) == []
    assert inst.shared_prefix_ok


def test_validate_reports_bad_mass_and_unknown_action():
    cat = {"x": ActionSpec("x", D({1: F(9, 10)}), D({1: 1}))}
    inst = ProblemInstance(3, cat, [("x",), ("y",)])
    problems = validate(inst)
    assert any("'x'" in p and "sum" in p for p in problems)
    assert any("unknown action_id 'y'" in p for p in problems)


def test_validate_rejects_bad_deadline_and_empty_skeleton():
    cat = {"x": ActionSpec("x", D({1: 1}), D({1: 1}))}
    problems = validate(ProblemInstance(0, cat, [(), ("x",)]))
    assert any(p.startswith("deadline") for p in problems)
    assert any("empty plan skeleton" in p for p in problems)


def test_float_mass_tolerance():
    ok = DiscreteDist({1: 0.1, 2: 0.2, 3: 0.7})
    bad = DiscreteDist({1: 0.1, 2: 0.2, 3: 0.69})
    assert ok.violations() == []
    assert bad.violations()


def test_shared_prefix_detection():
    a = ActionSpec("a", D({1: 1}), D({1: 1}))
    b = ActionSpec("b", D({1: 1}), D({1: 1}))
    c = ActionSpec("c", D({1: 1}), D({1: 1}))
    cat = {"a": a, "b": b, "c": c}
    assert ProblemInstance(5, cat, [("a", "b"), ("a", "c")]).shared_prefix_ok
    assert not ProblemInstance(5, cat, [("a", "b"), ("c", "b")]).shared_prefix_ok
    assert not ProblemInstance(5, cat, [("a", "b"), ("b",)]).shared_prefix_ok


# -- JSON --------------------------------------------------------------------------

def test_fig3_json_roundtrip_is_exact(tmp_path):
    inst = fig3()
    path = tmp_path / "fig3.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert back == inst
    assert dumps_instance(back) == dumps_instance(inst)


def test_json_accepts_decimal_strings_and_numbers(tmp_path):
    doc = {
        "deadline": 3,
        "actions": {"x": {"planning": {"1": "0.25", "2": 0.75}, "execution": {"1": "1"}}},
        "skeletons": [["x"]],
    }
    path = tmp_path / "i.json"
    path.write_text(json.dumps(doc))
    inst = load_instance(path)
    assert inst.catalog["x"].planning.probs == {1: F(1, 4), 2: F(3, 4)}
    assert validate(inst) == []


def test_json_missing_key():
    with pytest.raises(ValidationError, match="deadline"):
        ProblemInstance.from_json({"actions": {}, "skeletons": []})


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_random_instances_roundtrip(seed):
    inst = random_instance(seed, sharing=seed % 2 == 0)
    assert ProblemInstance.from_json(json.loads(dumps_instance(inst))) == inst


def test_float_exact_conversion():
    inst = fig3()
    f = inst.to_float()
    assert not f.exact and f.to_exact() == inst
    rng = random.Random(1)
    d = DiscreteDist({1: rng.random()})
    assert isinstance(d.to_exact().probs[1], F)
