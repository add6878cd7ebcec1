"""Deadline-aware allocation of refinement effort across candidate plan skeletons."""

from .mdp import MdpState, exact_value, initial_state, policy_value, successors
from .model import ActionSpec, DiscreteDist, ProblemInstance, load_instance, save_instance, validate
from .policies import POLICY_NAMES, make_policy
from .sim import evaluate, run_episode

__version__ = "0.1.0"

__all__ = [
    "ActionSpec",
    "DiscreteDist",
    "MdpState",
    "POLICY_NAMES",
    "ProblemInstance",
    "evaluate",
    "exact_value",
    "initial_state",
    "load_instance",
    "make_policy",
    "policy_value",
    "run_episode",
    "save_instance",
    "successors",
    "validate",
]
