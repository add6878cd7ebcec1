"""Episode simulator and Monte Carlo evaluator.

Each episode draws an action's true planning duration and execution time
once, lazily, the first time effort goes to it.  Draws are keyed by the
action's position in the skeleton tree, so shared actions share one draw.
The alternative ``mode="hazard"`` flips a coin with the MDP hazard at every
step instead; both give the same outcome distribution.
"""

from __future__ import annotations

import math
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Optional

from .mdp import MdpState, available, frontier, hazard, initial_state
from .model import DiscreteDist, ProblemInstance


class ProtocolError(RuntimeError):
    """The policy picked a skeleton that cannot take effort."""


@dataclass
class EpisodeTrace:
    decisions: list[tuple[int, int]] = field(default_factory=list)
    refinements: list[tuple[str, int, Optional[int]]] = field(default_factory=list)
    outcome: str = "failure"
    final_ct: int = 0
    final_et: Optional[int] = None
    winner: Optional[int] = None

    @property
    def success(self) -> bool:
        return self.outcome == "success"


@dataclass
class EvalReport:
    n_runs: int
    successes: int
    seed: int
    decisions: int = 0
    decision_seconds: float = 0.0
    traces: list[EpisodeTrace] = field(default_factory=list, repr=False)

    @property
    def success_rate(self) -> float:
        return self.successes / self.n_runs

    @property
    def ci95_halfwidth(self) -> float:
        p = self.success_rate
        return 1.96 * math.sqrt(p * (1 - p) / self.n_runs)

    @property
    def stderr(self) -> float:
        p = self.success_rate
        return math.sqrt(p * (1 - p) / self.n_runs)


class _Sampler:
    __slots__ = ("cum", "values")

    def __init__(self, d: DiscreteDist):
        self.values: list[Optional[int]] = list(d.support)
        self.cum, acc = [], 0.0
        for t in d.support:
            acc += float(d.probs[t])
            self.cum.append(acc)
        if d.never:
            acc += float(d.never)
            self.cum.append(acc)
            self.values.append(None)
        self.cum[-1] = max(acc, 1.0) + 1e-9

    def draw(self, rng: random.Random) -> Optional[int]:
        return self.values[bisect_right(self.cum, rng.random())]


class Simulator:
    def __init__(self, inst: ProblemInstance):
        self.inst = inst
        self._planning = {i: _Sampler(a.planning) for i, a in inst.catalog.items()}
        self._execution = {i: _Sampler(a.execution) for i, a in inst.catalog.items()}
        self._avail: dict[MdpState, tuple[int, ...]] = {}
        self._share: dict[tuple[MdpState, str], list[int]] = {}

    def _available(self, state: MdpState) -> tuple[int, ...]:
        got = self._avail.get(state)
        if got is None:
            got = self._avail[state] = available(self.inst, state)
        return got

    def run(self, policy, seed: int, mode: str = "fixed", draws: Optional[dict] = None) -> EpisodeTrace:
        """One episode.  ``draws`` pre-sets {action tree node: (planning, execution)}, where a
        node is the skeleton prefix ending at the action."""
        inst, D = self.inst, self.inst.deadline
        rng = random.Random(seed)
        fixed = dict(draws or {})
        state = initial_state(inst)
        trace = EpisodeTrace()
        policy.reset()
        timer = time.perf_counter
        self.decision_seconds = 0.0
        while True:
            avail = self._available(state)
            if state.ct >= D or not avail:
                break
            t0 = timer()
            k = policy.decide(state)
            self.decision_seconds += timer() - t0
            if k is None:
                break
            if k not in avail:
                raise ProtocolError(f"policy chose unavailable skeleton {k} at CT={state.ct}")
            trace.decisions.append((state.ct, k))
            l, pt, et = state.progress[k]
            a = frontier(inst, state, k)
            if mode == "fixed":
                node = inst.skeletons[k][: l + 1]
                if node not in fixed:
                    fixed[node] = (self._planning[a].draw(rng), self._execution[a].draw(rng))
                duration, x = fixed[node]
                refined = duration == pt + 1
            elif mode == "hazard":
                refined = rng.random() < float(hazard(inst.catalog[a].planning, pt))
                x = self._execution[a].draw(rng) if refined else None
            else:
                raise ValueError(f"unknown simulation mode {mode!r}")
            ct = state.ct + 1
            prog = list(state.progress)
            share = self._share.get((state, a))
            if share is None:
                share = self._share[(state, a)] = [m for m in range(inst.K) if frontier(inst, state, m) == a]
            won = None
            if refined:
                trace.refinements.append((a, pt + 1, x))
                for m in share:
                    lm, _, etm = prog[m]
                    if x is None:
                        prog[m] = None
                        continue
                    prog[m] = (lm + 1, 0, etm + x)
                    if won is None and lm + 1 == len(inst.skeletons[m]) and ct + etm + x <= D:
                        won = m
            else:
                for m in share:
                    lm, ptm, etm = prog[m]
                    prog[m] = (lm, ptm + 1, etm)
            state = MdpState(ct, tuple(prog))
            if won is not None:
                trace.outcome = "success"
                trace.winner = won
                trace.final_et = prog[won][2]
                break
        trace.final_ct = state.ct
        return trace


def run_episode(inst: ProblemInstance, policy, seed: int, mode: str = "fixed",
                draws: Optional[dict] = None) -> EpisodeTrace:
    return Simulator(inst).run(policy, seed, mode, draws)


def evaluate(inst: ProblemInstance, policy, n_runs: int, seed: int = 0, mode: str = "fixed",
             keep_traces: bool = False) -> EvalReport:
    """Run ``n_runs`` episodes with seeds ``seed + i``."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    sim = Simulator(inst)
    report = EvalReport(n_runs, 0, seed)
    for i in range(n_runs):
        tr = sim.run(policy, seed + i, mode)
        report.successes += tr.success
        report.decisions += len(tr.decisions)
        report.decision_seconds += sim.decision_seconds
        if keep_traces:
            report.traces.append(tr)
    return report


def worker_count(default: int = 1) -> int:
    """Worker cap from ``EFFORT_ALLOC_THREADS`` (falls back to ``default``)."""
    raw = os.environ.get("EFFORT_ALLOC_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"EFFORT_ALLOC_THREADS must be an integer, got {raw!r}") from None


def _chunk(args) -> tuple[int, int, float]:
    inst, factory, start, count, mode = args
    policy = factory(inst)
    sim = Simulator(inst)
    wins = decisions = 0
    secs = 0.0
    for i in range(start, start + count):
        tr = sim.run(policy, i, mode)
        wins += tr.success
        decisions += len(tr.decisions)
        secs += sim.decision_seconds
    return wins, decisions, secs


def evaluate_parallel(inst: ProblemInstance, factory: Callable, n_runs: int, seed: int = 0,
                      workers: int = 1, mode: str = "fixed") -> EvalReport:
    """Same episodes and result as :func:`evaluate` with ``factory(inst)``, split
    across processes.  ``factory`` must be picklable."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    workers = max(1, min(workers, n_runs))
    if workers == 1:
        return evaluate(inst, factory(inst), n_runs, seed, mode)
    size = -(-n_runs // workers)
    jobs = [(inst, factory, seed + s, min(size, n_runs - s), mode) for s in range(0, n_runs, size)]
    report = EvalReport(n_runs, 0, seed)
    with ProcessPoolExecutor(workers) as pool:
        for wins, decisions, secs in pool.map(_chunk, jobs):
            report.successes += wins
            report.decisions += decisions
            report.decision_seconds += secs
    return report
