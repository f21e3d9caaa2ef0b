"""Excuse-guided robot teaching: explain why a STRIPS task is unsolvable and learn the missing actions."""
from pathlib import Path

from .pddl import ActionSchema, Atom, PDDLError, PlanningDomain, PlanningProblem, parse_domain, parse_problem
from .planning import (Budget, GroundTask, Plan, ground, prove_unsolvable, solve, validate_plan)
from .excuses import (Excuse, ExcuseSearchConfig, enumerate_minimal_excuses, generate_excuse, render_excuse,
                      verify_minimality)
from .demonstration import (DemonstrationTrace, EmbodimentMapping, learn_operators, map_embodiment,
                            merge_domains, read_trace, simulate_demonstrator)
from .metrics import check_misdirected, f1_savings, post_demo_solvability, useful_fraction
from .session import SessionConfig, run_guided_session, run_unguided_session

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled encoding or fixture, e.g. ``data_path("kitchen1.pddl")``."""
    return Path(__file__).parent / "data" / name


__all__ = [
    "ActionSchema", "Atom", "PDDLError", "PlanningDomain", "PlanningProblem", "parse_domain", "parse_problem",
    "Budget", "GroundTask", "Plan", "ground", "prove_unsolvable", "solve", "validate_plan",
    "Excuse", "ExcuseSearchConfig", "enumerate_minimal_excuses", "generate_excuse", "render_excuse",
    "verify_minimality",
    "DemonstrationTrace", "EmbodimentMapping", "learn_operators", "map_embodiment", "merge_domains", "read_trace",
    "simulate_demonstrator",
    "check_misdirected", "f1_savings", "post_demo_solvability", "useful_fraction",
    "SessionConfig", "run_guided_session", "run_unguided_session",
    "data_path",
]
