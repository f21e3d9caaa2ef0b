"""Effectiveness measures for guided demonstrations."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .demonstration import (DemonstrationTrace, EmbodimentMapping, lift_step,
                            is_known, map_embodiment, LearnedOperator, merge_domains)
from .excuses import Excuse
from .pddl import ActionSchema, Atom, PlanningDomain, PlanningProblem
from .planning import Budget, Certificate, GroundTask, Plan, ground, prove_unsolvable, solve

logger = logging.getLogger(__name__)


def f1_savings(full_trace: DemonstrationTrace | int, remaining_plan_len: int) -> float:
    """Fraction of the full demonstration the demonstrator no longer has to show."""
    full = full_trace if isinstance(full_trace, int) else len(full_trace)
    if full <= 0:
        raise ValueError("full demonstration has no steps")
    if remaining_plan_len <= 0:
        raise ValueError("remaining plan is empty: the excuse state would already model the goal")
    ratio = remaining_plan_len / full
    if ratio > 1:
        logger.warning("remaining plan (%d) longer than the full demonstration (%d); clamped",
                       remaining_plan_len, full)
        ratio = 1.0
    return ratio


def step_is_new(step, robot: PlanningDomain, object_types, mapping: EmbodimentMapping) -> bool:
    schema, _ = lift_step(step, object_types)
    op = LearnedOperator(schema, step.label, (0,), ((),))
    mapped = map_embodiment([op], mapping)[0]
    return not is_known(mapped, robot)


def useful_fraction(trace: DemonstrationTrace, robot: PlanningDomain, problem: PlanningProblem,
                    mapping: EmbodimentMapping | None = None) -> float:
    """Share of demonstrated steps whose (mapped) action the robot did not already have."""
    mapping = mapping or EmbodimentMapping.identity()
    steps = trace.active_steps
    if not steps:
        raise ValueError("trace has no demonstrated steps")
    types = problem.object_types()
    new = sum(step_is_new(s, robot, types, mapping) for s in steps)
    return new / len(steps)


class Misdirection(enum.Enum):
    OK = "ok"
    MISDIRECTED = "misdirected"
    EXCUSE_NOT_ACHIEVED = "excuse-not-achieved"


@dataclass(frozen=True)
class MisdirectionResult:
    status: Misdirection
    diagnosis: str = ""
    extra_changes: tuple[str, ...] = ()
    plan: Plan | None = None

    def to_dict(self) -> dict:
        return {"status": self.status.value, "diagnosis": self.diagnosis,
                "extra_changes": list(self.extra_changes)}


def check_misdirected(task: GroundTask, excuse: Excuse, result_state: Iterable[Atom],
                      budget: Budget | None = None) -> MisdirectionResult:
    """Did the demonstration reach the excuse in a way that still leaves the robot stuck?"""
    state_atoms = frozenset(result_state)
    missing = sorted(excuse.adds - state_atoms)
    lingering = sorted(excuse.removes & state_atoms)
    if missing or lingering:
        parts = []
        if missing:
            parts.append("still false: " + ", ".join(map(str, missing)))
        if lingering:
            parts.append("still true: " + ", ".join(map(str, lingering)))
        return MisdirectionResult(Misdirection.EXCUSE_NOT_ACHIEVED, "; ".join(parts))
    unknown = [a for a in state_atoms if a not in task.index]
    if unknown:
        raise ValueError("result state has atoms outside the fluent universe: " + ", ".join(map(str, unknown)))
    state = task.bits(state_atoms)
    result = solve(task.with_init(state), "satisficing", budget)
    if result.solved:
        return MisdirectionResult(Misdirection.OK, plan=result.plan)
    target = excuse.edited_state(task)
    extra = [f"+ {task.atoms[i]}" for i in range(task.size) if state >> i & 1 and not target >> i & 1] + \
            [f"- {task.atoms[i]}" for i in range(task.size) if target >> i & 1 and not state >> i & 1]
    diagnosis = "excuse holds but the robot task is unsolvable from the demonstrated state"
    if extra:
        diagnosis += "; facts changed beyond the excuse: " + ", ".join(extra)
    return MisdirectionResult(Misdirection.MISDIRECTED, diagnosis, tuple(extra))


@dataclass(frozen=True)
class PostDemoResult:
    solvable: bool
    plan: Plan | None = None
    origins: tuple[str, ...] = ()  # "prior" or "learned", per plan step
    certificate: Certificate | None = None
    domain: PlanningDomain | None = None

    @property
    def uses_learned(self) -> bool:
        return "learned" in self.origins

    def to_dict(self) -> dict:
        out = {"solvable": self.solvable}
        if self.plan is not None:
            out["plan"] = [{"action": a.label, "origin": o} for a, o in zip(self.plan.steps, self.origins)]
        if self.certificate is not None:
            out["certificate"] = self.certificate.describe()
        return out


def post_demo_solvability(robot: PlanningDomain, learned: Sequence[ActionSchema], problem: PlanningProblem,
                          budget: Budget | None = None) -> PostDemoResult:
    merged = merge_domains(robot, learned)
    task = ground(merged, problem)
    result = solve(task, "optimal", budget)
    if result.solved:
        prior = {a.name for a in robot.actions}
        origins = tuple("prior" if a.name in prior else "learned" for a in result.plan.steps)
        return PostDemoResult(True, result.plan, origins, domain=merged)
    proof = prove_unsolvable(task, budget)
    return PostDemoResult(False, certificate=proof.certificate, domain=merged)


@dataclass
class MetricsReport:
    f1_savings: float | None = None
    useful_fraction: float | None = None
    misdirected: MisdirectionResult | None = None
    post_demo: PostDemoResult | None = None
    demo_lengths: dict = field(default_factory=dict)  # excuseDemo / fullDemo / remaining

    def to_dict(self) -> dict:
        def r(x):
            return None if x is None else round(x, 6)
        return {
            "f1_savings": r(self.f1_savings),
            "useful_fraction": r(self.useful_fraction),
            "misdirected": self.misdirected.to_dict() if self.misdirected else None,
            "post_demo_solvable": self.post_demo.to_dict() if self.post_demo else None,
            "demo_lengths": dict(self.demo_lengths),
        }


def format_table(rows: Sequence[dict]) -> str:
    """Aligned text table in the layout of predicted demonstration sizes per scenario."""
    header = ["scenario", "E_min P", "E P", "G_R P", "F1", "post-demo"]
    body = []
    for row in rows:
        f1 = row.get("f1")
        body.append([
            str(row.get("scenario", "")),
            _cell(row.get("e_min")), _cell(row.get("e")), _cell(row.get("g_r")),
            "-" if f1 is None else f"{f1:.3f}",
            {True: "solvable", False: "unsolvable", None: "-"}[row.get("post_demo")],
        ])
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(header)]
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths)),
             "-+-".join("-" * w for w in widths)]
    lines.extend(" | ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body)
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    return "-" if v is None else str(v)
