"""Allocation policies: linear-contiguous DP, DP_Rerun, Greedy, Round Robin, exact.

Every policy answers ``decide(state) -> skeleton index | None``; ``None``
means the policy gives up (the episode then fails).  Decisions depend only on
the canonical MDP state plus a small hashable memory (``snapshot``), which lets
:func:`effort_alloc.mdp.policy_value` evaluate them exactly and lets the
simulator cache decisions across episodes.
"""

from __future__ import annotations

from typing import Callable, Optional

from .mdp import MdpState, available, canonical, exact_value
from .model import ProblemInstance, condition_on_elapsed, mean, DiscreteDist


class UnsupportedStructureError(ValueError):
    """The DP recurrence needs tree-structured action sharing."""


class DpSolver:
    """Memoized success probability PS(k, l, CT, ET) of the linear contiguous policy.

    PS(k, l, ...) with l == A_k (skeleton fully refined) is the on-time
    indicator ``CT + ET <= D``.  An override planning distribution may be given
    for the frontier action only; deeper levels always use the catalog.
    """

    def __init__(self, inst: ProblemInstance):
        if not inst.shared_prefix_ok:
            raise UnsupportedStructureError(
                "DP policies need tree-structured sharing (identical prefixes before shared actions)"
            )
        self.inst = inst
        self.D = inst.deadline
        self.memo: dict[tuple[int, int, int, int], object] = {}
        self.zero = inst.catalog[inst.skeletons[0][0]].planning.total() * 0
        lengths = inst.lengths()
        self._lengths = lengths
        # skeletons sharing the action at (k, j)
        self._share = {
            (k, j): tuple(m for m in range(inst.K) if lengths[m] > j and inst.skeletons[m][: j + 1] == skel[: j + 1])
            for k, skel in enumerate(inst.skeletons)
            for j in range(len(skel))
        }

    def ps(self, k: int, l: int, ct: int, et: int, planning: Optional[DiscreteDist] = None):
        D = self.D
        a_k = self._lengths[k]
        if l == a_k:
            return self.zero + (1 if ct + et <= D else 0)
        if ct + et + (a_k - l) > D:
            return self.zero
        key = (k, l, ct, et)
        if planning is None:
            got = self.memo.get(key)
            if got is not None:
                return got
        spec = self.inst.action(k, l)
        p = spec.planning if planning is None else planning
        e = spec.execution
        total = self.zero
        if l + 1 == a_k:
            # refine in t steps, then execute within the remaining time
            for t in p.support:
                if t > D - ct:
                    break
                total += p.probs[t] * e.cdf(D - t - ct - et)
        else:
            share = self._share[(k, l)]
            for t in p.support:
                if t > D - ct:
                    break
                inner = self.zero
                for m in e.support:
                    best = max(self.ps(k2, l + 1, ct + t, et + m) for k2 in share)
                    if best:
                        inner += e.probs[m] * best
                total += p.probs[t] * inner
        if planning is None:
            self.memo[key] = total
        return total

    def state_value(self, state: MdpState, k: int):
        """PS for skeleton ``k`` at ``state``, conditioning the frontier on its elapsed effort."""
        l, pt, et = state.progress[k]
        planning = None
        if pt > 0:
            planning = condition_on_elapsed(self.inst.action(k, l).planning, pt)
        return self.ps(k, l, state.ct, et, planning)


def solve_dp(inst: ProblemInstance, k: int, l: int = 0, ct: int = 0, et: int = 0, conditioned=None):
    """One PS value; ``conditioned`` optionally overrides the frontier planning distribution."""
    return DpSolver(inst).ps(k, l, ct, et, conditioned)


def _argmax(values: dict[int, object]) -> Optional[int]:
    best = None
    for k in sorted(values):
        if best is None or values[k] > values[best]:
            best = k
    return best


def dp_policy(inst: ProblemInstance) -> tuple[int, object]:
    """Skeleton with the highest PS(k, 0, 0, 0) and that value."""
    solver = DpSolver(inst)
    vals = {k: solver.ps(k, 0, 0, 0) for k in range(inst.K)}
    k = _argmax(vals)
    return k, vals[k]


def dp_rerun_decide(state: MdpState, inst: ProblemInstance, solver: Optional[DpSolver] = None) -> Optional[int]:
    solver = solver or DpSolver(inst)
    vals = {k: solver.state_value(state, k) for k in available(inst, state)}
    return _argmax(vals)


def greedy_scores(state: MdpState, inst: ProblemInstance, static: bool = False) -> dict[int, object]:
    sentinel = inst.deadline + 1
    scores = {}
    for k in available(inst, state):
        skel = inst.skeletons[k]
        if static:
            l, pt, et = 0, 0, 0
        else:
            l, pt, et = state.progress[k]
        score = et
        for j in range(l, len(skel)):
            spec = inst.catalog[skel[j]]
            plan = condition_on_elapsed(spec.planning, pt) if j == l else spec.planning
            score += mean(plan, sentinel) + mean(spec.execution, sentinel)
        scores[k] = score
    return scores


def greedy_decide(state: MdpState, inst: ProblemInstance, static: bool = False) -> Optional[int]:
    scores = greedy_scores(state, inst, static)
    best = None
    for k in sorted(scores):
        if best is None or scores[k] < scores[best]:
            best = k
    return best


def round_robin_decide(state: MdpState, inst: ProblemInstance, step: Optional[int] = None) -> Optional[int]:
    """Cycle through the available skeletons; ``step`` defaults to CT."""
    avail = available(inst, state)
    if not avail:
        return None
    return avail[(state.ct if step is None else step) % len(avail)]


class Policy:
    """Base class: caches decisions on (canonical state, memory snapshot)."""

    name = "policy"

    def __init__(self, inst: ProblemInstance):
        self.inst = inst
        self._cache: dict = {}
        self._canon: dict = {}
        self.cache_enabled = True

    def reset(self) -> None:
        pass

    def snapshot(self):
        return None

    def restore(self, snap) -> None:
        pass

    def decide(self, state: MdpState) -> Optional[int]:
        c = self._canon.get(state)
        if c is None:
            c = self._canon[state] = canonical(self.inst, state)
        if c.is_terminal:
            return None
        if not self.cache_enabled:
            return self._decide(c)
        key = (c, self.snapshot())
        hit = self._cache.get(key)
        if hit is None:
            k = self._decide(c)
            hit = self._cache[key] = (k, self.snapshot())
        else:
            self.restore(hit[1])
        return hit[0]

    def _decide(self, state: MdpState) -> Optional[int]:
        raise NotImplementedError


class RoundRobinPolicy(Policy):
    name = "round-robin"

    def _decide(self, state):
        return round_robin_decide(state, self.inst)


class GreedyPolicy(Policy):
    name = "greedy"

    def __init__(self, inst, static: bool = False):
        super().__init__(inst)
        self.static = static

    def _decide(self, state):
        return greedy_decide(state, self.inst, self.static)


class DpRerunPolicy(Policy):
    name = "dp-rerun"

    def __init__(self, inst):
        super().__init__(inst)
        self.solver = DpSolver(inst)

    def _decide(self, state):
        return dp_rerun_decide(state, self.inst, self.solver)


class DpPolicy(Policy):
    """Commit to the best linear contiguous skeleton and keep refining it.

    When a shared action completes, the branch with the highest PS among the
    skeletons that shared it is taken (the max inside the recurrence).  If the
    committed skeleton stops being available the policy gives up.
    """

    name = "dp"

    def __init__(self, inst):
        super().__init__(inst)
        self.solver = DpSolver(inst)
        self._memory: Optional[tuple[int, int]] = None

    def reset(self):
        self._memory = None

    def snapshot(self):
        return self._memory

    def restore(self, snap):
        self._memory = snap

    def _decide(self, state):
        avail = set(available(self.inst, state))
        if self._memory is None:
            k = _argmax({m: self.solver.state_value(state, m) for m in avail})
            if k is not None:
                self._memory = (k, state.progress[k][0])
            return k
        k, l_seen = self._memory
        prog = state.progress[k]
        skel = self.inst.skeletons[k]
        l_now = prog[0] if prog is not None else None
        if l_now is None:
            # committed skeleton collapsed; look up siblings that refined alongside it
            cands = [m for m in avail if state.progress[m][0] > l_seen
                     and self.inst.skeletons[m][: l_seen + 1] == skel[: l_seen + 1]]
            if not cands:
                return None
            l_now = state.progress[cands[0]][0]
        if l_now > l_seen:
            share = {m: self.solver.state_value(state, m) for m in avail
                     if state.progress[m][0] == l_now and self.inst.skeletons[m][:l_now] == skel[:l_now]}
            k = _argmax(share)
            if k is None:
                return None
            self._memory = (k, l_now)
            return k
        return k if k in avail else None


class ExactPolicy(Policy):
    name = "exact"

    def __init__(self, inst, max_states: int = 10**7):
        super().__init__(inst)
        self.solution = exact_value(inst, max_states)

    def _decide(self, state):
        return self.solution.action(state)


POLICY_NAMES = ("exact", "dp", "dp-rerun", "greedy", "round-robin", "mcts")


def make_policy(name: str, inst: ProblemInstance, **opts) -> Policy:
    """Build a policy by CLI name.  MCTS options: iterations, time_ms, c, seed, chance."""
    if name == "exact":
        return ExactPolicy(inst, opts.get("max_states", 10**7))
    if name == "dp":
        return DpPolicy(inst)
    if name == "dp-rerun":
        return DpRerunPolicy(inst)
    if name == "greedy":
        return GreedyPolicy(inst, static=opts.get("static", False))
    if name == "round-robin":
        return RoundRobinPolicy(inst)
    if name == "mcts":
        from .mcts import MctsPolicy

        return MctsPolicy(
            inst,
            iterations=opts.get("iterations"),
            time_ms=opts.get("time_ms"),
            c=opts.get("c", 0.5),
            seed=opts.get("seed", 0),
            chance=opts.get("chance", "stratified"),
        )
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")


PolicyFactory = Callable[[ProblemInstance], Policy]
