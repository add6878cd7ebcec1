"""UCT search over the expectimax tree of the allocation MDP.

Each iteration descends by the UCT rule, expands one new node, scores it with
a uniformly random rollout to a terminal state (reward 1 on success, 0
otherwise) and adds the reward to the running mean Q(s,a) of every edge on
the path.  Chance outcomes are grouped under each action edge by the canonical
successor state.  The root decision is the most visited action.

Skeletons whose frontier is the same shared action have identical
transitions; they form one edge, keyed by the lowest skeleton index, so their
visits are not split.

Chance outcomes follow their transition probabilities.  With
``chance="stratified"`` (default) an edge sends its next visit to the outcome
whose arrival count lags its probability share the most, which keeps the
outcome frequencies within one visit of their expectation.  ``"sample"`` draws
outcomes at random instead.
"""

from __future__ import annotations

import math
import random
import time
import zlib
from bisect import bisect_right
from dataclasses import dataclass
from typing import Optional

from .mdp import SUCCESS, Kernel, MdpState, canonical, frontier
from .model import ProblemInstance
from .policies import Policy

DEFAULT_C = 0.5
CHANCE_MODES = ("stratified", "sample")


class SearchNode:
    __slots__ = ("state", "actions", "visits", "n", "q", "children", "arrivals", "reward")

    def __init__(self, state: MdpState, actions: tuple[int, ...]):
        self.state = state
        self.actions = actions
        self.visits = 0
        self.n = [0] * len(actions)
        self.q = [0.0] * len(actions)
        self.children: list[dict[MdpState, SearchNode]] = [dict() for _ in actions]
        # per edge: arrivals at each outcome, in the order of the transition table
        self.arrivals: list[Optional[list[int]]] = [None] * len(actions)
        self.reward = None
        if state.is_terminal:
            self.reward = 1.0 if state == SUCCESS else 0.0

    def value(self) -> float:
        """Visit-weighted mean of the action values, sum N(s,a) Q(s,a) / N(s)."""
        if not self.visits:
            return 0.0 if self.reward is None else self.reward
        return sum(n * q for n, q in zip(self.n, self.q)) / self.visits


def uct_select(node: SearchNode, c: float = DEFAULT_C) -> int:
    """Skeleton index maximizing Q + c*sqrt(ln N(s) / N(s,a)); unvisited actions first."""
    if node.reward is not None or not node.actions:
        raise ValueError("cannot select an action at a terminal node")
    return node.actions[_select_index(node, c)]


def _select_index(node: SearchNode, c: float) -> int:
    ns = node.n
    for i, n in enumerate(ns):
        if n == 0:
            return i
    log_n = math.log(node.visits)
    best_i, best = 0, -math.inf
    q = node.q
    for i in range(len(ns)):
        score = q[i] + c * math.sqrt(log_n / ns[i])
        if score > best:
            best_i, best = i, score
    return best_i


@dataclass
class SearchResult:
    action: int
    root: SearchNode
    iterations: int
    seconds: float

    @property
    def value(self) -> float:
        return self.root.value()

    def stats(self) -> dict[int, tuple[int, float]]:
        """{skeleton: (N(s,a), Q(s,a))} at the root."""
        return {a: (self.root.n[i], self.root.q[i]) for i, a in enumerate(self.root.actions)}


class Searcher:
    """Holds the float transition model; each :meth:`search` builds a fresh tree."""

    def __init__(self, inst: ProblemInstance, c: float = DEFAULT_C, chance: str = "stratified"):
        if chance not in CHANCE_MODES:
            raise ValueError(f"unknown chance mode {chance!r}")
        if c <= 0:
            raise ValueError("exploration constant must be positive")
        self.inst = inst.to_float()
        self.kernel = Kernel(self.inst)
        self.c = c
        self.chance = chance
        self._tables: dict = {}
        self._reps: dict = {}

    def actions(self, state: MdpState) -> tuple[int, ...]:
        """Available skeletons, one per distinct frontier action (lowest index kept)."""
        got = self._reps.get(state)
        if got is None:
            seen, reps = set(), []
            for k in self.kernel.available(state):
                a = frontier(self.inst, state, k)
                if a not in seen:
                    seen.add(a)
                    reps.append(k)
            got = self._reps[state] = tuple(reps)
        return got

    def _table(self, state: MdpState, k: int):
        """(cumulative probs, successor states, probs) for allocating to ``k``."""
        key = (state, k)
        got = self._tables.get(key)
        if got is None:
            trans = self.kernel.transitions(state, k)
            probs = [float(p) for _, p in trans]
            cum, acc = [], 0.0
            for p in probs:
                acc += p
                cum.append(acc)
            cum[-1] = 1.0 + 1e-9
            got = self._tables[key] = (cum, [s for s, _ in trans], probs)
        return got

    def _step(self, state: MdpState, k: int, rng: random.Random) -> MdpState:
        cum, states, _ = self._table(state, k)
        if len(states) == 1:
            return states[0]
        return states[bisect_right(cum, rng.random())]

    def rollout(self, state: MdpState, rng: random.Random) -> float:
        avail = self.kernel.available
        while not state.is_terminal:
            acts = avail(state)
            state = self._step(state, acts[int(rng.random() * len(acts))], rng)
        return 1.0 if state == SUCCESS else 0.0

    def _outcome(self, node: SearchNode, i: int, rng: random.Random) -> MdpState:
        if self.chance == "sample":
            return self._step(node.state, node.actions[i], rng)
        _, states, probs = self._table(node.state, node.actions[i])
        if len(states) == 1:
            return states[0]
        counts = node.arrivals[i]
        if counts is None:
            counts = node.arrivals[i] = [0] * len(states)
        total = node.n[i] + 1
        best_j, best = 0, -math.inf
        for j, p in enumerate(probs):
            lag = p * total - counts[j]
            if lag > best:
                best_j, best = j, lag
        counts[best_j] += 1
        return states[best_j]

    def search(self, root_state: MdpState, iterations: Optional[int] = None,
               time_ms: Optional[float] = None, seed: int = 0) -> SearchResult:
        if (iterations is None) == (time_ms is None):
            raise ValueError("give exactly one of iterations or time_ms")
        if (iterations is not None and iterations <= 0) or (time_ms is not None and time_ms <= 0):
            raise ValueError("search budget must be positive")
        state = canonical(self.inst, root_state)
        if state.is_terminal:
            raise ValueError("root state is terminal")
        rng = random.Random(seed)
        acts = self.actions
        root = SearchNode(state, acts(state))
        c = self.c
        clock = time.perf_counter
        t0 = clock()
        stop = None if time_ms is None else t0 + time_ms / 1000.0
        it = 0
        while True:
            if iterations is not None:
                if it >= iterations:
                    break
            elif it > 0 and clock() >= stop:
                break
            it += 1
            node, path = root, []
            # selection and expansion
            while True:
                if node.reward is not None:
                    reward = node.reward
                    break
                i = _select_index(node, c)
                s2 = self._outcome(node, i, rng)
                path.append((node, i))
                kids = node.children[i]
                child = kids.get(s2)
                if child is None:
                    child = kids[s2] = SearchNode(s2, () if s2.is_terminal else acts(s2))
                    # simulation
                    reward = child.reward if child.reward is not None else self.rollout(s2, rng)
                    break
                node = child
            # backpropagation
            for nd, i in path:
                nd.visits += 1
                n = nd.n[i] = nd.n[i] + 1
                nd.q[i] += (reward - nd.q[i]) / n
        best_i = max(range(len(root.n)), key=lambda i: (root.n[i], -i))
        return SearchResult(root.actions[best_i], root, it, clock() - t0)


def mcts_search(root_state: MdpState, inst: ProblemInstance, iterations: Optional[int] = None,
                time_ms: Optional[float] = None, c: float = DEFAULT_C, seed: int = 0,
                chance: str = "stratified") -> SearchResult:
    return Searcher(inst, c, chance).search(root_state, iterations, time_ms, seed)


def state_seed(seed: int, state: MdpState) -> int:
    return zlib.crc32(repr((seed, state.ct, state.progress)).encode())


class MctsPolicy(Policy):
    """Fresh UCT search at every decision, seeded from (seed, state).

    Seeding by state makes the policy a function of the state, so repeated
    states reuse the earlier answer through the base-class decision cache.
    """

    name = "mcts"

    def __init__(self, inst: ProblemInstance, iterations: Optional[int] = None,
                 time_ms: Optional[float] = None, c: float = DEFAULT_C, seed: int = 0,
                 chance: str = "stratified"):
        super().__init__(inst)
        if iterations is None and time_ms is None:
            iterations = 10_000
        self.searcher = Searcher(inst, c, chance)
        self.iterations = iterations
        self.time_ms = time_ms
        self.seed = seed
        self.searches = 0
        self.search_seconds = 0.0

    def _decide(self, state):
        res = self.searcher.search(state, self.iterations, self.time_ms, state_seed(self.seed, state))
        self.searches += 1
        self.search_seconds += res.seconds
        return res.action
