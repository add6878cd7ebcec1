from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from effort_alloc.instances import fig3, random_instance
from effort_alloc.mdp import (
    FAILURE,
    SUCCESS,
    CapacityError,
    ImpossibleStateError,
    Kernel,
    MdpState,
    UnavailableActionError,
    available,
    canonical,
    exact_value,
    hazard,
    initial_state,
    policy_value,
    successors,
)
from effort_alloc.model import ActionSpec, DiscreteDist, ProblemInstance
from effort_alloc.policies import ExactPolicy
from effort_alloc.sim import evaluate


def D(probs, never=0):
    return DiscreteDist({t: F(p) for t, p in probs.items()}, F(never))


def single(plan, exe, deadline):
    return ProblemInstance(deadline, {"x": ActionSpec("x", plan, exe)}, [("x",)])


def test_hazard_examples():
    d = D({1: F(1, 2), 4: F(1, 2)})
    assert hazard(d, 0) == F(1, 2)
    assert hazard(d, 1) == 0
    assert hazard(d, 3) == 1
    assert hazard(D({1: 1}), 0) == 1
    with pytest.raises(ImpossibleStateError):
        hazard(D({1: 1}), 1)


def test_fig3_root_allocating_to_third_skeleton():
    inst = fig3()
    out = successors(initial_state(inst), 2, inst)
    assert len(out) == 1
    (s, p), = out
    assert p == 1
    assert s.progress[2] == (0, 1, 0) and s.ct == 1


def test_fig3_root_allocating_to_shared_action():
    inst = fig3()
    out = {s.progress: p for s, p in successors(initial_state(inst), 0, inst)}
    assert out == {
        ((0, 1, 0), (0, 1, 0), (0, 0, 0)): F(1, 2),
        ((1, 0, 1), (1, 0, 1), (0, 0, 0)): F(1, 4),
        ((1, 0, 10), (1, 0, 10), (0, 0, 0)): F(1, 4),
    }


def test_deadline_exhaustion_goes_to_failure():
    inst = single(D({1: F(1, 2), 3: F(1, 2)}), D({1: 1}), 3)
    state = MdpState(2, ((0, 1, 0),))
    assert successors(state, 0, inst) == [(FAILURE, 1)]


def test_last_step_success_and_late_execution():
    inst = single(D({1: 1}), D({1: F(1, 2), 5: F(1, 2)}), 2)
    out = dict(successors(initial_state(inst), 0, inst))
    assert out == {SUCCESS: F(1, 2), FAILURE: F(1, 2)}


def test_unavailable_actions_raise():
    inst = fig3()
    with pytest.raises(UnavailableActionError):
        successors(SUCCESS, 0, inst)
    dead = MdpState(1, (None, (0, 0, 0), (0, 0, 0)))
    with pytest.raises(UnavailableActionError):
        successors(dead, 0, inst)


def test_canonical_marks_hopeless_skeletons():
    inst = fig3()
    s = MdpState(3, ((1, 0, 10), (1, 0, 10), (0, 1, 0)))
    c = canonical(inst, s)
    assert c.progress[0] is None and c.progress[1] is None
    assert available(inst, c) == (2,)


def test_exact_fig3():
    sol = exact_value(fig3())
    assert sol.value == F(9, 16)
    assert sol.action(initial_state(fig3())) == 0


def test_exact_trivial_success():
    assert exact_value(single(D({1: 1}), D({1: 1}), 2)).value == 1


def test_exact_capacity_error():
    with pytest.raises(CapacityError, match="cap"):
        exact_value(fig3(), max_states=3)


def _all_states(inst):
    kern = Kernel(inst)
    seen, todo = set(), [kern.root]
    while todo:
        s = todo.pop()
        if s in seen or s.is_terminal:
            continue
        seen.add(s)
        for k in kern.available(s):
            todo.extend(n for n, _ in kern.transitions(s, k))
    return kern, seen


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_transition_invariants(seed):
    inst = random_instance(seed, sharing=seed % 2 == 0)
    kern, states = _all_states(inst)
    for s in states:
        for k in kern.available(s):
            raw = successors(s, k, inst)
            assert sum(p for _, p in raw) == 1
            for n, _ in raw:
                if n.is_terminal:
                    continue
                assert n.ct == s.ct + 1 and n.ct <= inst.deadline
                # skeletons sharing a frontier action keep equal PT
                front = {}
                for m, prog in enumerate(n.progress):
                    if prog is None or prog[0] >= len(inst.skeletons[m]):
                        continue
                    a = inst.skeletons[m][prog[0]]
                    front.setdefault(a, set()).add(prog[1])
                assert all(len(v) == 1 for v in front.values())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_exact_value_monotone_in_deadline(seed):
    inst = random_instance(seed, d_range=(2, 5), sharing=seed % 3 == 0)
    v = exact_value(inst).value
    assert exact_value(inst.with_deadline(inst.deadline + 1)).value >= v
    assert 0 <= v <= 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_exact_value_invariant_under_relabelling(seed):
    inst = random_instance(seed, sharing=True)
    order = list(reversed(range(inst.K)))
    assert exact_value(inst.permuted(order)).value == exact_value(inst).value


def test_exact_policy_evaluates_to_its_value():
    for seed in range(10):
        inst = random_instance(seed, sharing=True)
        sol = exact_value(inst)
        assert policy_value(inst, ExactPolicy(inst)) == sol.value


@pytest.mark.slow
def test_exact_matches_simulation_of_extracted_policy():
    checked = 0
    for seed in range(200):
        inst = random_instance(seed, k_range=(2, 2), a_range=(1, 2), d_range=(3, 6), sharing=True)
        v = float(exact_value(inst).value)
        if not 0.05 < v < 0.95:
            continue
        rep = evaluate(inst, ExactPolicy(inst), 100_000, seed=seed)
        se = (v * (1 - v) / rep.n_runs) ** 0.5
        assert abs(rep.success_rate - v) <= 3 * se, (seed, v, rep.success_rate)
        checked += 1
        if checked == 2:
            break
    assert checked == 2
