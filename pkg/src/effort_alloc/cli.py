"""Command-line front end.

Exit codes: 0 ok, 1 domain error (invalid instance, capacity, ...), 2 usage error.
Result tables are CSV on stdout; success_rate and ci95 carry 6 decimals.
"""

from __future__ import annotations

import argparse
import csv
import functools
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import instances as builtins
from .mdp import CapacityError, exact_value
from .model import (
    EstimationError,
    ProblemInstance,
    ValidationError,
    dumps_instance,
    estimate_dist,
    load_instance,
    save_instance,
    validate,
)
from .policies import POLICY_NAMES, UnsupportedStructureError, make_policy
from .reduction import KnapsackInstance, epsilon, reduce
from .sim import evaluate_parallel, worker_count

EVAL_COLUMNS = ["instance", "policy", "runs", "seed", "success_rate", "ci95", "elapsed_ms"]
BENCH_COLUMNS = ["instance", "policy", "runs", "seed", "success_rate", "ci95", "decision_ms", "elapsed_ms"]


class DomainError(Exception):
    """Reported on stderr with exit code 1."""


# -- helpers -----------------------------------------------------------------

def _load(path: Optional[str], name: Optional[str]) -> tuple[str, ProblemInstance]:
    if name:
        try:
            return name, builtins.builtin(name).instance
        except KeyError as e:
            raise DomainError(str(e.args[0])) from None
    try:
        inst = load_instance(path)
    except FileNotFoundError:
        raise DomainError(f"instance file not found: {path}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise DomainError(f"cannot read instance {path}: {e}") from None
    problems = validate(inst)
    if problems:
        raise DomainError("invalid instance " + str(path) + ":\n  " + "\n  ".join(problems))
    return Path(path).stem, inst


def _policy_opts(args) -> dict:
    opts = {"c": args.uct_c, "seed": args.seed}
    if getattr(args, "mcts_time_ms", None) is not None:
        opts["time_ms"] = args.mcts_time_ms
    elif getattr(args, "mcts_iters", None) is not None:
        opts["iterations"] = args.mcts_iters
    return opts


def _run(inst: ProblemInstance, policy: str, runs: int, seed: int, opts: dict):
    factory = functools.partial(_make, policy, opts)
    try:
        return evaluate_parallel(inst, factory, runs, seed, worker_count())
    except UnsupportedStructureError as e:
        raise DomainError(f"{policy}: {e}") from None
    except CapacityError as e:
        raise DomainError(f"{policy}: {e}") from None


def _make(policy: str, opts: dict, inst: ProblemInstance):
    return make_policy(policy, inst, **opts)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("budgets must be positive integers")
    return vals


def _instance_source(p: argparse.ArgumentParser, many: bool = False) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    if many:
        g.add_argument("--instance", action="append", metavar="FILE", help="instance JSON (repeatable)")
        g.add_argument("--builtin", action="append", metavar="NAME", help="builtin instance (repeatable)")
        g.add_argument("--builtin-set", choices=sorted(builtins.BUILTIN_SETS))
    else:
        g.add_argument("--instance", metavar="FILE", help="instance JSON file")
        g.add_argument("--builtin", metavar="NAME", help="builtin instance name")


# -- subcommands ---------------------------------------------------------------

def cmd_validate(args) -> int:
    if args.builtin:
        name, inst = _load(None, args.builtin)
    else:
        try:
            inst = load_instance(args.instance)
        except FileNotFoundError:
            raise DomainError(f"instance file not found: {args.instance}") from None
        except (ValueError, KeyError, TypeError) as e:
            raise DomainError(f"cannot read instance {args.instance}: {e}") from None
        name = Path(args.instance).stem
    problems = validate(inst)
    if problems:
        print(f"{name}: {len(problems)} violation(s)")
        for msg in problems:
            print(f"  {msg}")
        return 1
    print(f"{name}: ok (K={inst.K}, D={inst.deadline}, shared_prefix_ok={str(inst.shared_prefix_ok).lower()})")
    return 0


def cmd_exact(args) -> int:
    name, inst = _load(args.instance, args.builtin)
    inst = inst.to_float() if args.float else inst.to_exact()
    t0 = time.perf_counter()
    try:
        sol = exact_value(inst, args.max_states)
    except CapacityError as e:
        raise DomainError(str(e)) from None
    elapsed = (time.perf_counter() - t0) * 1000
    root = sol.action(sol.kernel.root)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["instance", "value", "value_decimal", "root_action", "states", "elapsed_ms"])
    value = str(sol.value) if not args.float else repr(float(sol.value))
    out.writerow([name, value, _fmt(float(sol.value)), "none" if root is None else f"a_{root + 1}",
                  sol.n_states, f"{elapsed:.1f}"])
    return 0


def cmd_evaluate(args) -> int:
    name, inst = _load(args.instance, args.builtin)
    t0 = time.perf_counter()
    rep = _run(inst, args.policy, args.runs, args.seed, _policy_opts(args))
    elapsed = (time.perf_counter() - t0) * 1000
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(EVAL_COLUMNS)
    out.writerow([name, args.policy, args.runs, args.seed, _fmt(rep.success_rate), _fmt(rep.ci95_halfwidth),
                  f"{elapsed:.1f}"])
    return 0


def cmd_bench(args) -> int:
    if args.builtin_set:
        sources = [(n, None) for n in builtins.BUILTIN_SETS[args.builtin_set]]
    elif args.builtin:
        sources = [(n, None) for n in args.builtin]
    else:
        sources = [(None, f) for f in args.instance]
    loaded = [_load(path, name) for name, path in sources]
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in POLICY_NAMES:
            raise _Usage(f"unknown policy {p!r}; choose from {', '.join(POLICY_NAMES)}")
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(BENCH_COLUMNS)
    sys.stdout.flush()
    for name, inst in loaded:
        for policy in policies:
            variants = [(policy, _policy_opts(args))]
            if policy == "mcts":
                base = {"c": args.uct_c, "seed": args.seed}
                if args.mcts_time_ms:
                    variants = [(f"mcts@{t}ms", {**base, "time_ms": t}) for t in args.mcts_time_ms]
                else:
                    variants = [(f"mcts@{n}", {**base, "iterations": n}) for n in (args.mcts_iters or [10_000])]
            for label, opts in variants:
                t0 = time.perf_counter()
                rep = _run(inst, policy, args.runs, args.seed, opts)
                elapsed = (time.perf_counter() - t0) * 1000
                per_step = rep.decision_seconds * 1000 / rep.decisions if rep.decisions else 0.0
                out.writerow([name, label, args.runs, args.seed, _fmt(rep.success_rate),
                              _fmt(rep.ci95_halfwidth), f"{per_step:.4f}", f"{elapsed:.1f}"])
                sys.stdout.flush()
    return 0


def cmd_instances(args) -> int:
    if args.action == "list":
        out = csv.writer(sys.stdout, lineterminator="\n")
        out.writerow(["name", "provenance", "K", "deadline", "description"])
        for n in builtins.builtin_names():
            b = builtins.builtin(n)
            out.writerow([n, b.provenance, b.instance.K, b.instance.deadline, b.description])
        return 0
    if not args.name:
        raise _Usage("instances dump needs --name")
    _, inst = _load(None, args.name)
    if args.out:
        save_instance(inst, args.out)
    else:
        sys.stdout.write(dumps_instance(inst) + "\n")
    return 0


def cmd_generate_knapsack(args) -> int:
    try:
        ks = KnapsackInstance.parse(args.items, args.capacity)
        inst = reduce(ks, args.exec_time)
    except ValueError as e:
        raise DomainError(str(e)) from None
    if args.out:
        save_instance(inst, args.out)
        print(f"wrote {args.out}: K={inst.K}, D={inst.deadline}, epsilon={epsilon(ks)}")
    else:
        sys.stdout.write(dumps_instance(inst) + "\n")
    return 0


def cmd_estimate(args) -> int:
    samples = []
    try:
        text = Path(args.log).read_text()
    except FileNotFoundError:
        raise DomainError(f"log file not found: {args.log}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        tok = line.strip()
        if not tok or tok.startswith("#"):
            continue
        if tok.lower() in ("never", "inf", "none"):
            samples.append(None)
            continue
        try:
            samples.append(int(tok))
        except ValueError:
            raise DomainError(f"{args.log}:{lineno}: not an integer duration: {tok!r}") from None
    alpha = float(args.alpha) if args.float else _fraction(args.alpha)
    try:
        dist = estimate_dist(samples, args.deadline, alpha)
    except EstimationError as e:
        raise DomainError(str(e)) from None
    doc = json.dumps(dist.to_json(), indent=2)
    if args.out:
        Path(args.out).write_text(doc + "\n")
        print(f"wrote {args.out}: {len(samples)} samples")
    else:
        print(doc)
    return 0


def _fraction(text: str):
    from fractions import Fraction

    try:
        return Fraction(text)
    except ValueError:
        raise _Usage(f"--alpha must be a number, got {text!r}") from None


class _Usage(Exception):
    pass


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="effort-alloc", description="Deadline-aware effort allocation over plan skeletons.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    _instance_source(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("exact", help="optimal success probability by exhaustive expectimax")
    _instance_source(p)
    p.add_argument("--float", action="store_true", help="use floats instead of exact rationals")
    p.add_argument("--max-states", type=_positive, default=10**7)
    p.set_defaults(func=cmd_exact)

    def policy_flags(p, sweep=False):
        g = p.add_mutually_exclusive_group()
        if sweep:
            g.add_argument("--mcts-iters", type=_int_list, help="comma-separated iteration budgets per decision")
            g.add_argument("--mcts-time-ms", type=_int_list, help="comma-separated time budgets per decision (ms)")
        else:
            g.add_argument("--mcts-iters", type=_positive, help="iterations per decision (default 10000)")
            g.add_argument("--mcts-time-ms", type=_positive, help="wall-clock budget per decision (ms)")
        p.add_argument("--uct-c", type=float, default=0.5, help="UCT exploration constant (default 0.5)")
        p.add_argument("--runs", type=_positive, default=1000)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="Monte Carlo success rate of one policy")
    _instance_source(p)
    p.add_argument("--policy", choices=POLICY_NAMES, required=True)
    policy_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="policy x instance grid as CSV")
    _instance_source(p, many=True)
    p.add_argument("--policies", required=True, help="comma-separated subset of " + ",".join(POLICY_NAMES))
    policy_flags(p, sweep=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("instances", help="list or dump builtin instances")
    p.add_argument("action", choices=["list", "dump"])
    p.add_argument("--name")
    p.add_argument("--out")
    p.set_defaults(func=cmd_instances)

    p = sub.add_parser("generate-knapsack", help="write the knapsack reduction instance")
    p.add_argument("--items", required=True, help='weight:value pairs, e.g. "2:3,3:4,4:5"')
    p.add_argument("--capacity", type=_positive, required=True)
    p.add_argument("--exec-time", type=int, default=0, help="constant execution time (deadline becomes W + c)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate_knapsack)

    p = sub.add_parser("estimate", help="fit a step distribution from a duration log")
    p.add_argument("--log", required=True, help="one integer duration per line; 'never' for unfinished")
    p.add_argument("--deadline", type=_positive, required=True)
    p.add_argument("--alpha", default="0", help="Laplace smoothing weight (default 0)")
    p.add_argument("--float", action="store_true", help="float probabilities instead of rationals")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except _Usage as e:
        ap.print_usage(sys.stderr)
        print(f"{ap.prog}: error: {e}", file=sys.stderr)
        return 2
    except (DomainError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
