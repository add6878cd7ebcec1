"""The effort-allocation MDP: states, transitions, terminal rules, exact solver.

A state is ``(ct, progress, terminal)`` where ``progress[k]`` is the triple
``(l_k, PT_k, ET_k)`` or ``None`` for a skeleton that can no longer succeed.
:func:`successors` keeps the literal triples of every skeleton; the solver and
the search tree work on :func:`canonical` states, where every unavailable
skeleton collapses to ``None``.

Refinement on the next step happens with the conditional hazard
``(CDF(PT+1) - CDF(PT)) / (1 - CDF(PT))`` of the frontier action's planning
distribution.  A skeleton succeeds only when fully refined with
``CT + ET <= D``; a fully refined but late skeleton is dead, not a failure.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

from .model import DiscreteDist, ProblemInstance, Prob

Progress = Optional[tuple[int, int, int]]


class ImpossibleStateError(ValueError):
    pass


class UnavailableActionError(ValueError):
    pass


class CapacityError(RuntimeError):
    pass


class MdpState(NamedTuple):
    ct: int
    progress: tuple[Progress, ...]
    terminal: Optional[str] = None

    @property
    def is_terminal(self) -> bool:
        return self.terminal is not None


SUCCESS = MdpState(-1, (), "success")
FAILURE = MdpState(-1, (), "failure")


class Transition(NamedTuple):
    next: MdpState
    prob: Prob


def initial_state(inst: ProblemInstance) -> MdpState:
    return MdpState(0, ((0, 0, 0),) * inst.K)


def hazard(planning: DiscreteDist, pt: int) -> Prob:
    """Probability the next allocated step completes refinement after ``pt`` failed steps."""
    rest = planning.tail(pt)
    if rest == 0:
        raise ImpossibleStateError(f"planning already certain to have completed within {pt} steps")
    return planning.pmf(pt + 1) / rest


def frontier(inst: ProblemInstance, state: MdpState, k: int) -> Optional[str]:
    p = state.progress[k]
    if p is None or p[0] >= len(inst.skeletons[k]):
        return None
    return inst.skeletons[k][p[0]]


def is_available(inst: ProblemInstance, state: MdpState, k: int) -> bool:
    """Whether allocating a step to skeleton ``k`` can still lead to success."""
    if state.is_terminal:
        return False
    p = state.progress[k]
    if p is None:
        return False
    l, pt, et = p
    skel = inst.skeletons[k]
    a_k = len(skel)
    if l >= a_k or state.ct + et + (a_k - l) > inst.deadline:
        return False
    return inst.last_planning_step[skel[l]] > pt


def available(inst: ProblemInstance, state: MdpState) -> tuple[int, ...]:
    return tuple(k for k in range(inst.K) if is_available(inst, state, k))


def canonical(inst: ProblemInstance, state: MdpState) -> MdpState:
    if state.is_terminal:
        return SUCCESS if state.terminal == "success" else FAILURE
    prog = tuple(p if is_available(inst, state, k) else None for k, p in enumerate(state.progress))
    if all(p is None for p in prog):
        return FAILURE
    return MdpState(state.ct, prog)


def _sharing(inst: ProblemInstance, state: MdpState, action_id: str) -> list[int]:
    return [m for m in range(inst.K) if frontier(inst, state, m) == action_id]


def successors(state: MdpState, k: int, inst: ProblemInstance) -> list[Transition]:
    """All successor states of allocating one step to skeleton ``k``."""
    if state.is_terminal:
        raise UnavailableActionError("terminal state has no successors")
    if not is_available(inst, state, k):
        raise UnavailableActionError(f"skeleton {k} is not available at CT={state.ct}")
    D = inst.deadline
    ct = state.ct + 1
    a = frontier(inst, state, k)
    spec = inst.catalog[a]
    pt_k = state.progress[k][1]
    h = hazard(spec.planning, pt_k)
    share = _sharing(inst, state, a)
    out: dict[MdpState, Prob] = {}

    def close(prog: list) -> MdpState:
        nxt = MdpState(ct, tuple(prog))
        if ct >= D or not available(inst, nxt):
            return FAILURE
        return nxt

    def add(s: MdpState, p: Prob) -> None:
        if p:
            out[s] = out.get(s, 0) + p

    if h:
        ex = spec.execution
        outcomes = [(x, ex.probs[x]) for x in ex.support]
        if ex.never:
            outcomes.append((None, ex.never))
        for x, px in outcomes:
            prog = list(state.progress)
            won = False
            for m in share:
                l, _, et = prog[m]
                if x is None:
                    prog[m] = None
                    continue
                prog[m] = (l + 1, 0, et + x)
                if l + 1 == len(inst.skeletons[m]) and ct + et + x <= D:
                    won = True
            add(SUCCESS if won else close(prog), h * px)
    if h != 1:
        prog = list(state.progress)
        for m in share:
            l, pt, et = prog[m]
            prog[m] = (l, pt + 1, et)
        add(close(prog), 1 - h)
    return [Transition(s, p) for s, p in out.items()]


class Kernel:
    """Cached canonical transition model for one instance."""

    def __init__(self, inst: ProblemInstance):
        self.inst = inst
        self._trans: dict = {}
        self._avail: dict = {}
        self.root = canonical(inst, initial_state(inst))

    def available(self, state: MdpState) -> tuple[int, ...]:
        got = self._avail.get(state)
        if got is None:
            got = self._avail[state] = available(self.inst, state)
        return got

    def transitions(self, state: MdpState, k: int) -> tuple[tuple[MdpState, Prob], ...]:
        key = (state, k)
        got = self._trans.get(key)
        if got is None:
            merged: dict[MdpState, Prob] = {}
            for s, p in successors(state, k, self.inst):
                c = canonical(self.inst, s)
                merged[c] = merged.get(c, 0) + p
            got = self._trans[key] = tuple(merged.items())
        return got


@dataclass
class ExactSolution:
    value: Prob
    policy: dict[MdpState, int]
    n_states: int
    kernel: Kernel

    def action(self, state: MdpState) -> Optional[int]:
        c = canonical(self.kernel.inst, state)
        if c.is_terminal:
            return None
        if c not in self.policy:
            _solve(self.kernel, c, {}, self.policy, None)
        return self.policy[c]


def _solve(kern: Kernel, state: MdpState, memo: dict, policy: dict, cap: Optional[int]) -> Prob:
    if state is SUCCESS or state == SUCCESS:
        return 1
    if state.is_terminal:
        return 0
    got = memo.get(state)
    if got is not None:
        return got
    if cap is not None and len(memo) >= cap:
        raise CapacityError(f"reachable state count exceeded the cap of {cap} states")
    best, best_k = None, None
    for k in kern.available(state):
        q = sum(p * _solve(kern, s, memo, policy, cap) for s, p in kern.transitions(state, k))
        if best is None or q > best:
            best, best_k = q, k
    memo[state] = best
    policy[state] = best_k
    return best


def exact_value(inst: ProblemInstance, max_states: int = 10**7) -> ExactSolution:
    """Expectimax over all reachable canonical states.

    Exact when the instance holds Fractions.  Raises :class:`CapacityError`
    once more than ``max_states`` states have been expanded.
    """
    kern = Kernel(inst)
    memo, policy = {}, {}
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * inst.deadline + 1000))
    try:
        v = _solve(kern, kern.root, memo, policy, max_states)
    finally:
        sys.setrecursionlimit(limit)
    one = Fraction(1) if inst.exact else 1.0
    return ExactSolution(v * one, policy, len(memo), kern)


def policy_value(inst: ProblemInstance, policy) -> Prob:
    """Exact success probability of ``policy`` (see :class:`effort_alloc.policies.Policy`).

    Memoizes on (canonical state, policy memory snapshot), so stateful
    policies are handled as long as their snapshot is hashable.
    """
    kern = Kernel(inst)
    memo: dict = {}

    def value(state: MdpState, snap) -> Prob:
        if state == SUCCESS:
            return 1
        if state.is_terminal:
            return 0
        key = (state, snap)
        got = memo.get(key)
        if got is not None:
            return got
        policy.restore(snap)
        k = policy.decide(state)
        after = policy.snapshot()
        v = 0 if k is None else sum(p * value(s, after) for s, p in kern.transitions(state, k))
        memo[key] = v
        return v

    policy.reset()
    return value(kern.root, policy.snapshot())
