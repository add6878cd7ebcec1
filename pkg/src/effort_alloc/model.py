"""Problem representation: discrete time distributions, actions, plan skeletons.

Probabilities are either ``fractions.Fraction`` (exact mode) or ``float``.
Every distribution in one instance uses the same number type; use
:meth:`ProblemInstance.to_float` / :meth:`ProblemInstance.to_exact` to switch.

Skeleton and action positions are zero-based throughout the Python API.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

Prob = Union[Fraction, float]

FLOAT_TOL = 1e-12


class ValidationError(ValueError):
    """A distribution or instance breaks one of its invariants."""


class ConditioningError(ValueError):
    """Conditioning on an event of probability zero."""


class EstimationError(ValueError):
    pass


def _is_exact(x) -> bool:
    return isinstance(x, (Fraction, int))


@dataclass(frozen=True)
class DiscreteDist:
    """PMF over integer time steps plus a ``never`` atom.

    ``never`` is the mass of "not completed within the deadline".  Atoms may
    sit beyond the deadline (an execution time of 10 steps under D=5 is kept
    as 10 so means stay faithful); they are simply never within reach.
    Step 0 is only meaningful for execution times.
    """

    probs: Mapping[int, Prob]
    never: Prob = 0

    def __post_init__(self):
        cleaned = {int(t): p for t, p in sorted(self.probs.items()) if p != 0}
        object.__setattr__(self, "probs", cleaned)
        object.__setattr__(self, "_steps", tuple(cleaned))
        cum, acc = [], 0
        for t in self._steps:
            acc = acc + cleaned[t]
            cum.append(acc)
        object.__setattr__(self, "_cum", tuple(cum))

    # -- queries -------------------------------------------------------
    @property
    def exact(self) -> bool:
        return all(_is_exact(p) for p in self.probs.values()) and _is_exact(self.never)

    @property
    def support(self) -> tuple[int, ...]:
        return self._steps

    def total(self) -> Prob:
        return (self._cum[-1] if self._cum else 0) + self.never

    def pmf(self, t: int) -> Prob:
        return self.probs.get(t, 0)

    def cdf(self, t: int) -> Prob:
        """P(duration <= t); the ``never`` atom is never counted."""
        i = bisect_right(self._steps, t)
        return self._cum[i - 1] if i else 0

    def tail(self, t: int) -> Prob:
        """P(duration > t), including the ``never`` atom."""
        return self.total() - self.cdf(t)

    def finite_mass_after(self, t: int) -> Prob:
        return (self._cum[-1] if self._cum else 0) - self.cdf(t)

    def violations(self, name: str = "distribution", *, min_step: int = 1) -> list[str]:
        out = []
        for t, p in self.probs.items():
            if t < min_step:
                out.append(f"{name}: step {t} below minimum step {min_step}")
            if p < 0:
                out.append(f"{name}: negative probability {p} at step {t}")
        if self.never < 0:
            out.append(f"{name}: negative never-mass {self.never}")
        total = self.total()
        if self.exact:
            if total != 1:
                out.append(f"{name}: probabilities sum to {total}, not 1")
        elif abs(float(total) - 1.0) > FLOAT_TOL:
            out.append(f"{name}: probabilities sum to {float(total)!r}, not 1")
        return out

    # -- conversions ---------------------------------------------------
    def to_float(self) -> "DiscreteDist":
        return DiscreteDist({t: float(p) for t, p in self.probs.items()}, float(self.never))

    def to_exact(self) -> "DiscreteDist":
        def q(p):
            return p if _is_exact(p) else Fraction(p).limit_denominator(10**12)

        return DiscreteDist({t: Fraction(q(p)) for t, p in self.probs.items()}, Fraction(q(self.never)))

    def to_json(self) -> dict:
        out = {str(t): str(p) if _is_exact(p) else p for t, p in self.probs.items()}
        if self.never != 0:
            out["never"] = str(self.never) if _is_exact(self.never) else self.never
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "DiscreteDist":
        probs, never = {}, Fraction(0)
        for key, value in obj.items():
            p = _parse_prob(value)
            if key == "never":
                never = p
            else:
                probs[int(key)] = probs.get(int(key), 0) + p
        return cls(probs, never)

    @classmethod
    def point(cls, t: int, exact: bool = True) -> "DiscreteDist":
        return cls({t: Fraction(1) if exact else 1.0}, Fraction(0) if exact else 0.0)


def _parse_prob(value) -> Prob:
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def pmf_from_cdf(cdf: Mapping[int, Prob] | Iterable[tuple[int, Prob]], deadline: int) -> DiscreteDist:
    """Difference a step CDF into a PMF.

    ``cdf`` lists (step, cumulative probability) knots of a right-continuous
    step function.  Mass landing beyond ``deadline`` goes to ``never``.  If the
    knots stop at or before the deadline the CDF must already reach 1; if they
    reach past it, whatever is missing is taken as ``never`` mass.
    """
    knots = sorted(dict(cdf).items()) if isinstance(cdf, Mapping) else sorted(cdf)
    if not knots:
        raise ValidationError("empty CDF")
    probs: dict[int, Prob] = {}
    prev = 0
    for t, c in knots:
        if c < prev:
            raise ValidationError(f"CDF decreases at step {t} ({prev} -> {c})")
        if c > 1 + (0 if _is_exact(c) else FLOAT_TOL):
            raise ValidationError(f"CDF exceeds 1 at step {t}")
        if c != prev and t <= deadline:
            probs[t] = c - prev
        prev = c
    last_step, last = knots[-1]
    one = Fraction(1) if _is_exact(last) else 1.0
    if last_step <= deadline and (last != 1 if _is_exact(last) else abs(last - 1) > FLOAT_TOL):
        raise ValidationError(f"CDF ends at {last} < 1 by step {last_step} <= deadline {deadline}")
    finite = sum(probs.values(), 0 * one)
    return DiscreteDist(probs, one - finite)


def condition_on_elapsed(d: DiscreteDist, elapsed: int) -> DiscreteDist:
    """Distribution of the additional steps needed given ``elapsed`` steps passed without completion."""
    if elapsed < 0:
        raise ValueError("elapsed must be >= 0")
    if elapsed == 0:
        return d
    rest = d.tail(elapsed)
    if rest == 0:
        raise ConditioningError(f"completion is certain within {elapsed} steps; cannot condition")
    return DiscreteDist({t - elapsed: p / rest for t, p in d.probs.items() if t > elapsed}, d.never / rest)


def mean(d: DiscreteDist, sentinel_value: float | None = None) -> Prob:
    """Expected duration with the ``never`` atom counted as ``sentinel_value``."""
    m = sum((t * p for t, p in d.probs.items()), 0 * d.never)
    if d.never:
        if sentinel_value is None:
            raise ValueError("distribution has never-mass; a sentinel_value is required")
        m += sentinel_value * d.never
    return m


def estimate_dist(samples: Sequence[int | None], deadline: int, alpha=0) -> DiscreteDist:
    """Categorical MLE over steps 1..D plus the sentinel, with Laplace smoothing ``alpha``.

    Durations above the deadline (or ``None``) count toward the sentinel.
    Integer/Fraction ``alpha`` gives exact probabilities; a float gives floats.
    """
    n = len(samples)
    if n == 0 and not alpha:
        raise EstimationError("no samples and no smoothing")
    counts = Counter()
    for s in samples:
        if s is not None and s < 1:
            raise EstimationError(f"duration {s} < 1")
        counts[deadline + 1 if s is None or s > deadline else int(s)] += 1
    a = alpha if isinstance(alpha, float) else Fraction(alpha)
    denom = n + a * (deadline + 1)
    if isinstance(a, float):
        probs = {t: (counts[t] + a) / denom for t in range(1, deadline + 1)}
        never = (counts[deadline + 1] + a) / denom
    else:
        probs = {t: Fraction(counts[t]) / denom + a / denom for t in range(1, deadline + 1)}
        never = Fraction(counts[deadline + 1]) / denom + a / denom
    return DiscreteDist(probs, never)


@dataclass(frozen=True)
class ActionSpec:
    action_id: str
    planning: DiscreteDist
    execution: DiscreteDist


@dataclass(frozen=True)
class ProblemInstance:
    """Deadline, action catalog and K plan skeletons (tuples of action ids)."""

    deadline: int
    catalog: Mapping[str, ActionSpec]
    skeletons: tuple[tuple[str, ...], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "skeletons", tuple(tuple(s) for s in self.skeletons))
        object.__setattr__(self, "catalog", dict(self.catalog))

    @property
    def K(self) -> int:
        return len(self.skeletons)

    def lengths(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.skeletons)

    def action(self, k: int, j: int) -> ActionSpec:
        return self.catalog[self.skeletons[k][j]]

    @cached_property
    def shared_prefix_ok(self) -> bool:
        """True iff sharing is tree-structured: a shared action sits at the same
        position in every skeleton using it, behind an identical prefix."""
        seen: dict[str, tuple[str, ...]] = {}
        for skel in self.skeletons:
            for j, a in enumerate(skel):
                prefix = skel[:j]
                if a in seen and seen[a] != prefix:
                    return False
                seen[a] = prefix
            if len(set(skel)) != len(skel):
                return False
        return True

    @cached_property
    def last_planning_step(self) -> dict[str, int]:
        """Largest finite planning step per action (0 when it can never be refined)."""
        return {a: (spec.planning.support[-1] if spec.planning.support else 0) for a, spec in self.catalog.items()}

    @cached_property
    def exact(self) -> bool:
        return all(a.planning.exact and a.execution.exact for a in self.catalog.values())

    def to_float(self) -> "ProblemInstance":
        if not self.exact:
            return self
        cat = {i: ActionSpec(i, a.planning.to_float(), a.execution.to_float()) for i, a in self.catalog.items()}
        return ProblemInstance(self.deadline, cat, self.skeletons, self.name)

    def to_exact(self) -> "ProblemInstance":
        if self.exact:
            return self
        cat = {i: ActionSpec(i, a.planning.to_exact(), a.execution.to_exact()) for i, a in self.catalog.items()}
        return ProblemInstance(self.deadline, cat, self.skeletons, self.name)

    def permuted(self, order: Sequence[int]) -> "ProblemInstance":
        return ProblemInstance(self.deadline, self.catalog, [self.skeletons[i] for i in order], self.name)

    def with_deadline(self, deadline: int) -> "ProblemInstance":
        return ProblemInstance(deadline, self.catalog, self.skeletons, self.name)

    # -- JSON ------------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "deadline": self.deadline,
            "actions": {
                i: {"planning": a.planning.to_json(), "execution": a.execution.to_json()}
                for i, a in self.catalog.items()
            },
            "skeletons": [list(s) for s in self.skeletons],
        }

    @classmethod
    def from_json(cls, obj: Mapping, name: str = "") -> "ProblemInstance":
        try:
            deadline = obj["deadline"]
            actions = obj["actions"]
            skeletons = obj["skeletons"]
        except KeyError as exc:
            raise ValidationError(f"instance JSON is missing key {exc}") from None
        catalog = {
            str(i): ActionSpec(str(i), DiscreteDist.from_json(a["planning"]), DiscreteDist.from_json(a["execution"]))
            for i, a in actions.items()
        }
        return cls(int(deadline), catalog, [tuple(str(x) for x in s) for s in skeletons], name)


def load_instance(path: str | Path) -> ProblemInstance:
    path = Path(path)
    with open(path) as fh:
        obj = json.load(fh, parse_float=Fraction)
    return ProblemInstance.from_json(obj, name=path.stem)


def dumps_instance(inst: ProblemInstance) -> str:
    return json.dumps(inst.to_json(), indent=2)


def save_instance(inst: ProblemInstance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(inst) + "\n")


def sharing_set(inst: ProblemInstance, k: int, j: int) -> frozenset[int]:
    """Skeletons holding skeleton ``k``'s ``j``-th action at position ``j``."""
    if not 0 <= k < inst.K or not 0 <= j < len(inst.skeletons[k]):
        raise IndexError(f"no action at skeleton {k}, position {j}")
    a = inst.skeletons[k][j]
    return frozenset(m for m, s in enumerate(inst.skeletons) if len(s) > j and s[j] == a)


def validate(inst: ProblemInstance) -> list[str]:
    """Return every invariant violation as a message naming the offending field."""
    out = []
    if not isinstance(inst.deadline, int) or inst.deadline < 1:
        out.append(f"deadline: must be a positive integer, got {inst.deadline!r}")
    if inst.K < 1:
        out.append("skeletons: at least one plan skeleton is required")
    for k, skel in enumerate(inst.skeletons):
        if not skel:
            out.append(f"skeletons[{k}]: empty plan skeleton")
        for a in skel:
            if a not in inst.catalog:
                out.append(f"skeletons[{k}]: unknown action_id {a!r}")
    for i, a in inst.catalog.items():
        if a.action_id != i:
            out.append(f"actions[{i!r}]: action_id mismatch {a.action_id!r}")
        out += a.planning.violations(f"actions[{i!r}].planning", min_step=1)
        out += a.execution.violations(f"actions[{i!r}].execution", min_step=0)
    return out
