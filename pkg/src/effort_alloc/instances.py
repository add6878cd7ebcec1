"""Built-in problem instances and a random instance generator.

``fig3`` reproduces the worked three-skeleton example exactly.  The five
benchmark stand-ins and the two robot domains only keep the published
structure (skeleton count, sharing topology, deadline); their distributions
are synthetic and chosen to show the qualitative trait named in each
docstring.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction as F
from typing import Callable, Sequence

from .model import ActionSpec, DiscreteDist, ProblemInstance


@dataclass(frozen=True)
class NamedInstance:
    name: str
    instance: ProblemInstance
    provenance: str  # paper-exact | paper-structure | synthetic
    description: str = ""


def _d(probs: dict, never=0) -> DiscreteDist:
    return DiscreteDist({t: F(p) for t, p in probs.items()}, F(never))


def tree_instance(deadline: int, skeletons: Sequence[Sequence[str]],
                  dists: dict[str, tuple[DiscreteDist, DiscreteDist]], name: str = "") -> ProblemInstance:
    """Build an instance from labelled skeletons; equal labels behind equal
    prefixes become one shared action.  ``dists`` maps label -> (planning, execution)."""
    catalog, skels, ids = {}, [], {}
    for skel in skeletons:
        row = []
        for j, label in enumerate(skel):
            node = tuple(skel[: j + 1])
            if node not in ids:
                aid = label if label not in catalog else f"{label}@{len(catalog)}"
                ids[node] = aid
                plan, exe = dists[label]
                catalog[aid] = ActionSpec(aid, plan, exe)
            row.append(ids[node])
        skels.append(tuple(row))
    return ProblemInstance(deadline, catalog, skels, name)


def fig3() -> ProblemInstance:
    """Three skeletons, the first two sharing their first action, D=5; optimum 9/16."""
    ex = _d({1: F(1, 2), 10: F(1, 2)})
    return tree_instance(
        5,
        [["d11", "d12"], ["d11", "d22"], ["d31"]],
        {
            "d11": (_d({1: F(1, 2), 4: F(1, 2)}), ex),
            "d12": (_d({1: 1}), ex),
            "d22": (_d({1: 1}), ex),
            "d31": (_d({3: 1}), ex),
        },
        "fig3",
    )


def instance1() -> ProblemInstance:
    """Several shared actions; every skeleton has the same total mean (13)."""
    return tree_instance(
        14,
        [["a", "b"], ["a", "c"], ["d", "e"], ["d", "f"]],
        {"a": (_d({2: F(1, 2), 8: F(1, 2)}), _d({1: F(1, 2), 3: F(1, 2)})),
         "b": (_d({3: F(1, 2), 5: F(1, 2)}), _d({2: 1})),
         "c": (_d({1: F(3, 4), 13: F(1, 4)}), _d({1: F(1, 2), 3: F(1, 2)})),
         "d": (_d({4: 1}), _d({1: F(1, 2), 5: F(1, 2)})),
         "e": (_d({2: F(1, 2), 6: F(1, 2)}), _d({2: 1})),
         "f": (_d({1: F(1, 2), 7: F(1, 2)}), _d({1: F(1, 2), 3: F(1, 2)}))},
        "instance1",
    )


def instance2() -> ProblemInstance:
    """Two skeletons, equal means, symmetric planning times of different variance."""
    ex = _d({1: F(1, 2), 2: F(1, 2)})
    return tree_instance(
        9,
        [["a1", "a2"], ["b1", "b2"]],
        {"a1": (_d({2: F(1, 4), 3: F(1, 2), 4: F(1, 4)}), ex),
         "a2": (_d({1: F(1, 4), 2: F(1, 2), 3: F(1, 4)}), ex),
         "b1": (_d({1: F(1, 2), 5: F(1, 2)}), ex),
         "b2": (_d({1: F(1, 2), 3: F(1, 2)}), ex)},
        "instance2",
    )


def instance3() -> ProblemInstance:
    """A shared first action, unequal means, heavy-tailed planning times."""
    return tree_instance(
        20,
        [["s", "x1"], ["s", "x2"], ["y"]],
        {"s": (_d({1: F(1, 2), 2: F(1, 5), 16: F(3, 10)}), _d({1: F(4, 5), 3: F(1, 5)})),
         "x1": (_d({1: F(3, 5), 18: F(2, 5)}), _d({2: 1})),
         "x2": (_d({3: F(1, 2), 5: F(1, 4), 9: F(1, 4)}), _d({1: F(1, 2), 2: F(1, 2)})),
         "y": (_d({5: F(2, 5), 8: F(1, 5), 30: F(2, 5)}), _d({2: F(1, 2), 4: F(1, 2)}))},
        "instance3",
    )


def instance4() -> ProblemInstance:
    """Two one-action skeletons with equal means (3.6) and skewed distributions."""
    return tree_instance(
        4,
        [["a"], ["b"]],
        {"a": (_d({1: F(3, 5), 5: F(2, 5)}), _d({1: 1})),
         "b": (_d({2: F(3, 5), 3: F(2, 5)}), _d({1: F(4, 5), 2: F(1, 5)}))},
        "instance4",
    )


def instance5() -> ProblemInstance:
    """Skeletons that may be impossible to refine at all (never-mass)."""
    return tree_instance(
        14,
        [["p", "q"], ["r"], ["u", "v"]],
        {"p": (_d({1: F(7, 10)}, F(3, 10)), _d({1: 1})),
         "q": (_d({1: 1}), _d({1: 1})),
         "r": (_d({4: F(3, 5)}, F(2, 5)), _d({2: 1})),
         "u": (_d({2: F(1, 10)}, F(9, 10)), _d({1: 1})),
         "v": (_d({1: 1}), _d({1: 1}))},
        "instance5",
    )


def _move_dist(rng: random.Random, heavy: bool) -> tuple[DiscreteDist, DiscreteDist]:
    atoms = sorted(rng.sample(range(1, 6), 2))
    w = rng.choice([F(1, 2), F(3, 5), F(7, 10)])
    if heavy:
        plan = _d({atoms[0]: w * F(4, 5), atoms[1]: (1 - w) * F(4, 5), rng.randint(12, 30): F(1, 5)})
    else:
        plan = _d({atoms[0]: w, atoms[1]: 1 - w})
    e = rng.randint(1, 2)
    return plan, _d({e: F(1, 2), e + 1: F(1, 2)})


def navigation() -> ProblemInstance:
    """Four 4-move routes; the second and third share their first move."""
    skels = [
        ["R1-R2", "R2-R3", "R3-R4", "R4-R13"],
        ["R1-R5", "R5-R6", "R6-R7", "R7-R13"],
        ["R1-R5", "R5-R8", "R8-R9", "R9-R13"],
        ["R1-R10", "R10-R11", "R11-R12", "R12-R13"],
    ]
    rng = random.Random(22)
    labels = sorted({a for s in skels for a in s})
    dists = {a: _move_dist(rng, heavy=rng.random() < 0.25) for a in labels}
    return tree_instance(22, skels, dists, "navigation")


def manipulation() -> ProblemInstance:
    """Eight pick/place sequences with shared prefixes; each label is one move+pick or move+place."""
    b1 = ["pick-B1", "place-B1-R1"]
    b2 = ["pick-B2", "place-B2-R2"]
    b3 = ["pick-B3", "place-B3-C1"]
    b4 = ["pick-B4", "place-B4-C1"]
    b5 = ["pick-B5", "place-B5-C2"]
    b6 = ["pick-B6", "place-B6-C2"]
    skels = [
        b1 + b2,
        b1 + b6 + b2,
        b1 + b5 + b2,
        b1 + b5 + b6 + b2,
        b3 + b4 + b1 + b2,
        b3 + b4 + b1 + b6 + b2,
        b3 + b4 + b1 + b5 + b2,
        b3 + b4 + b1 + b5 + b6 + b2,
    ]
    rng = random.Random(40)
    labels = sorted({a for s in skels for a in s})
    dists = {a: _move_dist(rng, heavy=rng.random() < 0.5) for a in labels}
    return tree_instance(40, skels, dists, "manipulation")


_BUILTINS: dict[str, tuple[Callable[[], ProblemInstance], str]] = {
    "fig3": (fig3, "paper-exact"),
    "instance1": (instance1, "paper-structure"),
    "instance2": (instance2, "paper-structure"),
    "instance3": (instance3, "paper-structure"),
    "instance4": (instance4, "paper-structure"),
    "instance5": (instance5, "paper-structure"),
    "navigation": (navigation, "paper-structure"),
    "manipulation": (manipulation, "paper-structure"),
}

BUILTIN_SETS = {
    "five-instances": ("instance1", "instance2", "instance3", "instance4", "instance5"),
    "domains": ("navigation", "manipulation"),
    "all": tuple(_BUILTINS),
}


def builtin_names() -> tuple[str, ...]:
    return tuple(_BUILTINS)


def builtin(name: str) -> NamedInstance:
    try:
        make, provenance = _BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin instance {name!r}; known: {', '.join(_BUILTINS)}") from None
    return NamedInstance(name, make(), provenance, (make.__doc__ or "").strip())


def _random_dist(rng: random.Random, lo: int, hi: int, never_p: float, denom: int = 8) -> DiscreteDist:
    n_atoms = rng.randint(1, min(3, hi - lo + 1))
    steps = sorted(rng.sample(range(lo, hi + 1), n_atoms))
    cuts = sorted(rng.sample(range(1, denom), n_atoms)) if n_atoms < denom else list(range(1, denom))
    never = F(0)
    if rng.random() < never_p:
        never = F(1, denom)
    # split the finite mass (1 - never) into n_atoms positive parts
    bounds = [0] + cuts[: n_atoms - 1] + [denom]
    finite = 1 - never
    probs = {t: finite * F(bounds[i + 1] - bounds[i], denom) for i, t in enumerate(steps)}
    return DiscreteDist(probs, never)


def random_instance(seed: int, k_range=(1, 3), a_range=(1, 2), d_range=(2, 6), sharing: bool = False,
                    never_p: float = 0.15) -> ProblemInstance:
    """Small random tree-shared instance with exact rational probabilities."""
    rng = random.Random(seed)
    D = rng.randint(*d_range)
    K = rng.randint(*k_range)
    skels: list[list[str]] = []
    counter = 0
    for k in range(K):
        length = rng.randint(*a_range)
        if sharing and k > 0 and (k == 1 or rng.random() < 0.5):
            base = skels[rng.randrange(k)] if k > 1 else skels[0]
            keep = rng.randint(1, max(1, min(len(base), length) - (1 if length > 1 else 0)))
            skel = list(base[:keep])
        else:
            skel = []
        while len(skel) < length:
            counter += 1
            skel.append(f"x{counter}")
        skels.append(skel)
    labels = sorted({a for s in skels for a in s}, key=lambda s: int(s[1:]))
    dists = {a: (_random_dist(rng, 1, max(1, D - 1), never_p), _random_dist(rng, 0 if rng.random() < 0.2 else 1, 3, never_p / 2))
             for a in labels}
    return tree_instance(D, skels, dists, f"random-{seed}")
