"""Scenario benchmark: predicted demonstration sizes and outcomes per scenario.

A suite is a JSON manifest::

    {"scenarios": [
        {"name": "kitchen1",
         "robot_domain": "kitchen1_robot.pddl", "human_domain": "kitchen1_human.pddl",
         "problem": "kitchen1.pddl",
         "alternative_excuse": {"adds": ["(open pink-drawer)", ...], "removes": [...]},
         "expected": {"excuse": ["Open PinkDrawer"], "minimal": true, "e_min": 2,
                      "e": 7, "g_r": 9, "f1": 0.778, "post_demo": true}}]}

Paths are resolved relative to the manifest. Every key under ``expected`` is
optional; missing keys are computed and reported but not checked.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .demonstration import is_known, learn_operators, map_embodiment, simulate_demonstrator
from .excuses import (ExcuseSearchConfig, ExcuseStatus, Minimality, excuse_target, generate_excuse,
                      make_excuse, render_excuse, verify_minimality)
from .metrics import Misdirection, check_misdirected, f1_savings, format_table, post_demo_solvability
from .pddl import parse_atom, parse_domain, parse_problem
from .planning import Budget, ground, solve

logger = logging.getLogger(__name__)

F1_TOLERANCE = 5e-4  # expected F1 values are written to three decimals


def default_suite() -> Path:
    return Path(__file__).parent / "data" / "suite.json"


@dataclass
class BenchReport:
    rows: list[dict] = field(default_factory=list)
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    @property
    def misdirected_fraction(self) -> float | None:
        flags = [r["misdirected"] for r in self.rows if "misdirected" in r]
        return sum(flags) / len(flags) if flags else None

    def to_dict(self) -> dict:
        return {"ok": self.ok, "scenarios": self.rows, "mismatches": self.mismatches,
                "misdirected_fraction": self.misdirected_fraction}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        return format_table(self.rows)


def _human_length(human_task, excuse, budget) -> int | None:
    target = excuse_target(human_task, excuse)
    if target is None:
        return None
    result = solve(target, "optimal", budget)
    return len(result.plan) if result.solved else None


def run_scenario(scenario: dict, base: Path, budget: Budget | None = None) -> dict:
    budget = budget or Budget()
    robot = parse_domain((base / scenario["robot_domain"]).read_text(encoding="utf-8"))
    human = parse_domain((base / scenario["human_domain"]).read_text(encoding="utf-8"))
    problem = parse_problem((base / scenario["problem"]).read_text(encoding="utf-8"), robot)
    task, human_task = ground(robot, problem), ground(human, problem)

    row: dict = {"scenario": scenario["name"]}
    result = generate_excuse(task, ExcuseSearchConfig(max_edit_size=scenario.get("max_edit_size", 4)))
    if result.status is not ExcuseStatus.FOUND:
        row["excuse"] = None
        return row
    excuse = result.excuse
    row["excuse"] = render_excuse(excuse)
    row["excuse_size"] = excuse.size
    row["minimal"] = verify_minimality(task, excuse, budget).status is Minimality.MINIMAL
    row["e_min"] = _human_length(human_task, excuse, budget)
    alt = scenario.get("alternative_excuse")
    if alt is not None:
        e = make_excuse(task, [parse_atom(a) for a in alt.get("adds", [])],
                        [parse_atom(a) for a in alt.get("removes", [])])
        row["e"] = _human_length(human_task, e, budget)
    full = solve(human_task, "optimal", budget)
    row["g_r"] = len(full.plan) if full.solved else None
    remaining = solve(human_task.with_init(excuse.edited_state(human_task)), "optimal", budget)
    row["f1"] = round(f1_savings(len(full.plan), len(remaining.plan)), 6) \
        if full.solved and remaining.solved else None

    trace = simulate_demonstrator(human, problem, excuse, budget)
    new = [s for s in map_embodiment(learn_operators(trace, human, problem)) if not is_known(s, robot)]
    row["misdirected"] = check_misdirected(task, excuse, trace.final, budget).status is Misdirection.MISDIRECTED
    row["learned"] = sorted(s.name for s in new)
    row["post_demo"] = post_demo_solvability(robot, new, problem, budget).solvable
    return row


def _matches(field_name: str, expected, actual) -> bool:
    if field_name == "f1" and expected is not None and actual is not None:
        return abs(expected - actual) <= F1_TOLERANCE
    return expected == actual


def run_benchmark(suite: Path | str | None = None, budget: Budget | None = None) -> BenchReport:
    path = Path(suite) if suite is not None else default_suite()
    manifest = json.loads(path.read_text(encoding="utf-8"))
    report = BenchReport()
    for scenario in manifest.get("scenarios", []):
        row = run_scenario(scenario, path.parent, budget)
        report.rows.append(row)
        for key, expected in sorted(scenario.get("expected", {}).items()):
            if key not in row:
                report.mismatches.append(f"{scenario['name']}: {key}: no such measure")
            elif not _matches(key, expected, row[key]):
                report.mismatches.append(f"{scenario['name']}: {key}: expected {expected!r}, got {row[key]!r}")
    return report
