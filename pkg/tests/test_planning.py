import pytest

from excuse_guide.pddl import Atom, parse_domain, parse_problem
from excuse_guide.planning import (Budget, GroundingError, PlanError, SolveStatus, Unsolvability, Validity,
                                   apply, fluent_universe, format_plan, ground, h_add, h_max, parse_plan,
                                   prove_unsolvable, relaxed_reachable, solve, validate_plan)

from conftest import tasks
from oracles import bfs_length

SWAP = """(define (domain swap) (:requirements :strips)
(:predicates (p) (q))
(:action to-q :parameters () :precondition (p) :effect (and (q) (not (p))))
(:action to-p :parameters () :precondition (q) :effect (and (p) (not (q)))))"""


def swap_task(goal="(and (p) (q))"):
    d = parse_domain(SWAP)
    return ground(d, parse_problem(f"(define (problem s) (:domain swap) (:init (p)) (:goal {goal}))", d))


def test_fluent_universe_respects_types(kitchen1):
    robot, _, problem = kitchen1
    universe = fluent_universe(robot, problem.objects)
    assert Atom("open", ("pink-drawer",)) in universe
    assert Atom("open", ("red-plate",)) not in universe
    assert universe == sorted(universe)


def test_ground_counts(kitchen1):
    task, human = tasks(kitchen1)
    assert task.size == human.size
    names = {a.name for a in human.actions} - {a.name for a in task.actions}
    assert names == {"open-drawer"}
    assert task.goal and not task.satisfies_goal(task.init)


def test_apply_semantics(kitchen1):
    _, human = tasks(kitchen1)
    move = human.find_action("move", ("actor", "home", "drawer-front"))
    s = apply(human.init, move)
    assert s is not None
    assert Atom("agent-at", ("actor", "drawer-front")) in human.atoms_of(s)
    assert Atom("agent-at", ("actor", "home")) not in human.atoms_of(s)
    blocked = human.find_action("open-drawer", ("actor", "pink-drawer", "drawer-front"))
    assert apply(human.init, blocked) is None


def test_grounding_cap(kitchen2):
    robot, _, problem = kitchen2
    with pytest.raises(GroundingError, match="cap"):
        ground(robot, problem, cap=3)


def test_grounding_counts_every_binding():
    d = parse_domain("(define (domain c) (:requirements :strips :typing) (:types t) (:predicates (p ?x - t))"
                     " (:action link :parameters (?x ?y - t) :precondition (p ?x) :effect (p ?y)))")
    p = parse_problem("(define (problem c) (:domain c) (:objects o1 o2 o3 - t) (:init) (:goal (p o1)))", d)
    assert len(ground(d, p).actions) == 9


def test_add_delete_collision_is_an_error():
    d = parse_domain("(define (domain c) (:requirements :strips) (:predicates (p ?x))"
                     " (:action bad :parameters (?x) :precondition (and) :effect (and (p ?x) (not (p ?x)))))")
    p = parse_problem("(define (problem c) (:domain c) (:objects o) (:init) (:goal (p o)))", d)
    with pytest.raises(GroundingError):
        ground(d, p)


def test_non_injective_collision_is_skipped():
    d = parse_domain("(define (domain c) (:requirements :strips) (:predicates (p ?x))"
                     " (:action mv :parameters (?x ?y) :precondition (p ?x) :effect (and (p ?y) (not (p ?x)))))")
    p = parse_problem("(define (problem c) (:domain c) (:objects o1 o2) (:init (p o1)) (:goal (p o2)))", d)
    task = ground(d, p)
    assert sorted(a.args for a in task.actions) == [("o1", "o2"), ("o2", "o1")]


def test_optimal_kitchen_lengths(kitchen1, kitchen2):
    for scenario, length in ((kitchen1, 9), (kitchen2, 11)):
        _, human = tasks(scenario)
        result = solve(human, "optimal")
        assert result.status is SolveStatus.PLAN
        assert len(result.plan) == length
        assert validate_plan(human, result.plan).valid


def test_satisficing_plan_is_valid(kitchen2):
    _, human = tasks(kitchen2)
    result = solve(human, "satisficing")
    assert result.solved and validate_plan(human, result.plan).valid
    assert len(result.plan) >= 11


def test_deterministic_plans(kitchen2):
    _, human = tasks(kitchen2)
    assert solve(human).plan.to_text() == solve(human).plan.to_text()


def test_validation_verdicts(kitchen1):
    _, human = tasks(kitchen1)
    plan = solve(human).plan
    assert validate_plan(human, plan).cost == 9
    broken = validate_plan(human, plan.steps[1:])
    assert broken.status is Validity.INVALID and broken.failed_step == 0
    assert broken.cost == float("inf")
    short = validate_plan(human, plan.steps[:-1])
    assert short.status is Validity.GOAL_NOT_REACHED
    assert Atom("closed", ("pink-drawer",)) in short.unmet
    robot_task, _ = tasks(kitchen1)
    with pytest.raises(PlanError):
        validate_plan(robot_task, plan)


def test_plan_text_round_trip(kitchen2):
    _, human = tasks(kitchen2)
    plan = solve(human).plan
    text = format_plan(plan)
    assert text.startswith("; cost = 11")
    assert parse_plan(text, human) == plan


def test_relaxation_proof(kitchen1):
    robot_task, _ = tasks(kitchen1)
    verdict = prove_unsolvable(robot_task)
    assert verdict.status is Unsolvability.PROVEN_UNSOLVABLE
    assert verdict.certificate.method == "relaxation"
    assert Atom("inside", ("red-plate", "pink-drawer")) in verdict.certificate.unreached_goals
    assert not relaxed_reachable(robot_task, robot_task.init) & robot_task.bits(
        [Atom("open", ("pink-drawer",))])


def test_exhaustive_proof_when_relaxation_is_blind():
    task = swap_task()
    assert relaxed_reachable(task, task.init) & task.goal == task.goal
    verdict = prove_unsolvable(task)
    assert verdict.status is Unsolvability.PROVEN_UNSOLVABLE
    assert verdict.certificate.method == "exhaustive"
    assert verdict.certificate.states_explored == 2


def test_solvable_verdict_carries_witness():
    verdict = prove_unsolvable(swap_task("(q)"))
    assert verdict.status is Unsolvability.SOLVABLE
    assert len(verdict.witness) == 1


def test_budget_exceeded(kitchen2):
    _, human = tasks(kitchen2)
    assert solve(human, "optimal", Budget(max_expansions=3)).status is SolveStatus.BUDGET_EXCEEDED
    verdict = prove_unsolvable(swap_task(), Budget(max_expansions=1))
    assert verdict.status is Unsolvability.UNKNOWN


def test_heuristics_are_sane(kitchen1):
    _, human = tasks(kitchen1)
    optimal = len(solve(human).plan)
    assert h_max(human, human.init) <= optimal <= 9
    assert h_add(human, human.init) >= h_max(human, human.init)
    assert h_max(swap_task(), 0) == float("inf")


def test_empty_plan_on_satisfied_goal():
    task = swap_task("(p)")
    result = solve(task)
    assert result.solved and len(result.plan) == 0


def test_oracle_agrees_on_kitchen(kitchen1):
    _, human = tasks(kitchen1)
    from oracles import GAction
    acts = [GAction(a.label, frozenset(human.atoms_of(a.pre)), frozenset(human.atoms_of(a.add)),
                    frozenset(human.atoms_of(a.delete))) for a in human.actions]
    assert bfs_length(acts, human.atoms_of(human.init), human.atoms_of(human.goal)) == 9
