"""Knapsack to effort-allocation reduction, with brute-force oracles.

Item k (weight w_k, value v_k) becomes a one-action skeleton whose planning
CDF is 0 before w_k, eps*v_k on [w_k, W] and 1 after the deadline W.  With
zero execution time, refining a set of items on time is exactly a knapsack
packing, and for small eps the success probability 1 - prod(1 - eps*v) ranks
packings by total value.  eps = 1/(H^2 K^3) with H = max v_k.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .model import ActionSpec, DiscreteDist, ProblemInstance


class InfeasibleScheduleError(ValueError):
    """The chosen items do not fit within the capacity."""


@dataclass(frozen=True)
class KnapsackInstance:
    items: tuple[tuple[int, int], ...]  # (weight, value)
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "items", tuple((int(w), int(v)) for w, v in self.items))
        for w, v in self.items:
            if w < 1 or v < 1:
                raise ValueError(f"item weights and values must be >= 1, got ({w}, {v})")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")

    @property
    def K(self) -> int:
        return len(self.items)

    @classmethod
    def parse(cls, items: str, capacity: int) -> "KnapsackInstance":
        """Items as ``"w:v,w:v,..."``."""
        pairs = []
        for chunk in items.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                w, v = chunk.split(":")
                pairs.append((int(w), int(v)))
            except ValueError:
                raise ValueError(f"bad item {chunk!r}; expected weight:value") from None
        return cls(tuple(pairs), capacity)


def epsilon(ks: KnapsackInstance) -> Fraction:
    if not ks.items:
        return Fraction(1)
    h = max(v for _, v in ks.items)
    return Fraction(1, h * h * ks.K ** 3)


def reduce(ks: KnapsackInstance, exec_time: int = 0) -> ProblemInstance:
    """Build the allocation instance; ``exec_time`` c gives every skeleton a point
    execution time c and deadline W + c."""
    if exec_time < 0:
        raise ValueError("exec_time must be >= 0")
    if not ks.items:
        raise ValueError("the reduction needs at least one item")
    eps = epsilon(ks)
    W = ks.capacity
    catalog, skels = {}, []
    for k, (w, v) in enumerate(ks.items):
        if w <= W:
            planning = DiscreteDist({w: eps * v}, 1 - eps * v)
        else:
            planning = DiscreteDist({}, Fraction(1))
        aid = f"item{k}"
        catalog[aid] = ActionSpec(aid, planning, DiscreteDist({exec_time: Fraction(1)}))
        skels.append((aid,))
    return ProblemInstance(W + exec_time, catalog, tuple(skels), "knapsack")


def knapsack_oracle(items: Sequence[tuple[int, int]], capacity: int) -> int:
    """Optimal 0/1 knapsack value by the weight-indexed dynamic program."""
    best = [0] * (max(capacity, 0) + 1)
    for w, v in items:
        for c in range(capacity, w - 1, -1):
            if best[c - w] + v > best[c]:
                best[c] = best[c - w] + v
    return best[capacity] if capacity >= 0 else 0


def subset_success(inst: ProblemInstance, subset: Iterable[int]) -> Fraction:
    """Success probability of refining exactly the skeletons in ``subset``, one after another."""
    if not inst.exact:
        raise ValueError("reduction checks need exact rational probabilities")
    subset = sorted(set(subset))
    fail = Fraction(1)
    spent = 0
    ex = inst.catalog[inst.skeletons[0][0]].execution.support[0] if inst.K else 0
    budget = inst.deadline - ex
    for k in subset:
        plan = inst.catalog[inst.skeletons[k][0]].planning
        if not plan.support:
            raise InfeasibleScheduleError(f"item {k} is heavier than the capacity")
        w = plan.support[0]
        spent += w
        fail *= 1 - plan.probs[w]
    if spent > budget:
        raise InfeasibleScheduleError(f"subset weight {spent} exceeds capacity {budget}")
    return 1 - fail


def feasible_subsets(ks: KnapsackInstance):
    idx = range(ks.K)
    for r in range(ks.K + 1):
        for combo in combinations(idx, r):
            if sum(ks.items[k][0] for k in combo) <= ks.capacity:
                yield combo


def best_subset(ks: KnapsackInstance, inst: ProblemInstance | None = None) -> tuple[tuple[int, ...], Fraction]:
    """Feasible subset with the highest success probability (first found on ties)."""
    inst = inst or reduce(ks)
    best, best_p = (), Fraction(0)
    for combo in feasible_subsets(ks):
        p = subset_success(inst, combo)
        if p > best_p:
            best, best_p = combo, p
    return best, best_p
