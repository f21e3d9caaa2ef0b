import json

import pytest

from excuse_guide.demonstration import (DemonstrationTrace, EmbodimentMapping, HumanUnreachableTarget,
                                        MappingEntry, MergeConflict, TraceError, TraceStep, explained_by,
                                        is_known, learn_operators, map_embodiment, merge_domains,
                                        read_trace, replays, schemas_equivalent, simulate_demonstrator,
                                        write_trace)
from excuse_guide.excuses import generate_excuse
from excuse_guide.pddl import ActionSchema, PlanningDomain, emit_domain, parse_atom, parse_domain
from excuse_guide.planning import ground

from conftest import load_domain, tasks


def A(text):
    return parse_atom(text)


def guided_trace(scenario):
    robot_task, _ = tasks(scenario)
    _, human, problem = scenario
    return simulate_demonstrator(human, problem, generate_excuse(robot_task).excuse)


def test_guided_traces(kitchen1, kitchen2, variant):
    assert [s.label for s in guided_trace(kitchen1).steps] == ["move", "open-drawer"]
    assert [s.label for s in guided_trace(kitchen2).steps] == ["move-chair"]
    assert [s.label for s in guided_trace(variant).steps] == ["move-chair", "open-drawer"]


def test_unguided_trace_reaches_goal(kitchen2):
    _, human, problem = kitchen2
    trace = simulate_demonstrator(human, problem)
    assert len(trace) == 11
    assert problem.goal <= trace.final


def test_unreachable_target(kitchen1):
    _, human, problem = kitchen1
    empty = PlanningDomain(human.name, human.requirements, human.types, human.predicates, (), human.mutex_pairs)
    with pytest.raises(HumanUnreachableTarget):
        simulate_demonstrator(empty, problem)


def test_nodes_of_interest(kitchen1):
    _, human, problem = kitchen1
    ops = learn_operators(guided_trace(kitchen1), human, problem)
    op = next(o for o in ops if o.label == "open-drawer")
    s = op.schema
    assert s.add == {A("(open ?drawer)")} and s.delete == {A("(closed ?drawer)")}
    # unchanged facts about touched objects are kept, including ones naming untouched objects
    assert A("(handle-at ?drawer ?location)") in s.pre
    assert A("(opening-at ?drawer ?location2)") in s.pre
    assert A("(hand-empty ?agent)") in s.pre
    assert [p for p, _ in s.params][:3] == ["?agent", "?drawer", "?location"]
    assert dict(op.bindings[0])["?location2"] == "counter-top"
    assert not any("red-plate" in str(a) for a in s.pre)


def test_learned_operators_replay(kitchen1, kitchen2, variant):
    for scenario in (kitchen1, kitchen2, variant):
        _, human, problem = scenario
        for trace in (guided_trace(scenario), simulate_demonstrator(human, problem)):
            for op in learn_operators(trace, human, problem):
                assert replays(op, trace), op.schema.name


def test_same_label_different_body_gets_variant(kitchen1):
    _, human, problem = kitchen1
    init = problem.init
    s1 = TraceStep("fiddle", ("pink-drawer",), init, (init - {A("(closed pink-drawer)")}) | {A("(open pink-drawer)")})
    s2 = TraceStep("fiddle", ("pink-drawer",), s1.post, s1.post - {A("(clear pink-drawer)")})
    trace = DemonstrationTrace(init, (s1, s2))
    ops = learn_operators(trace, human, problem)
    assert [o.schema.name for o in ops] == ["fiddle", "fiddle-2"]
    assert all(replays(o, trace) for o in ops)


def test_repeated_step_merges_into_one_operator(kitchen1):
    _, human, problem = kitchen1
    trace = simulate_demonstrator(human, problem)
    ops = learn_operators(trace, human, problem)
    moves = [o for o in ops if o.label == "move"]
    assert sum(len(o.steps) for o in moves) == 5


def test_trace_round_trip(kitchen1):
    trace = guided_trace(kitchen1)
    again = read_trace(write_trace(trace))
    assert again.steps == trace.steps and again.initial == trace.initial
    assert again.provenance == "replay-file"


@pytest.mark.parametrize("text, message", [
    ('', "header"),
    ('{"init": []}\n{"label": ["a", "b"], "touched": []}', "parallel"),
    ('{"init": []}\n{"label": "a", "parallel": true}', "parallel"),
    ('{"init": []}\n{"touched": []}', "label"),
    ('{"init": []}\n{"label": "a", "adds": ["(p x)"], "dels": ["(p x)"]}', "both"),
    ('{"init": []}\nnot json', "line 2"),
])
def test_trace_errors(text, message):
    with pytest.raises(TraceError, match=message):
        read_trace(text)


def test_chain_is_checked():
    a, b = frozenset({A("(p x)")}), frozenset({A("(q x)")})
    with pytest.raises(TraceError):
        DemonstrationTrace(a, (TraceStep("s", ("x",), b, a),))


def test_idle_steps_do_not_count(kitchen1):
    init = kitchen1[2].init
    trace = DemonstrationTrace(init, (TraceStep("wait", (), init, init),))
    assert len(trace) == 0 and not trace.active_steps
    assert learn_operators(trace, kitchen1[1], kitchen1[2]) == []


def test_vocabulary_is_checked(kitchen1):
    _, human, problem = kitchen1
    init = problem.init
    bad = DemonstrationTrace(init, (TraceStep("x", ("pink-drawer",), init, init | {A("(wobbly pink-drawer)")}),))
    with pytest.raises(TraceError, match="wobbly"):
        learn_operators(bad, human, problem)
    unknown = DemonstrationTrace(init, (TraceStep("x", ("ghost",), init, init - {A("(closed pink-drawer)")}),))
    with pytest.raises(TraceError, match="ghost"):
        learn_operators(unknown, human, problem)


def test_known_actions(kitchen1):
    robot, human, problem = kitchen1
    ops = learn_operators(simulate_demonstrator(human, problem), human, problem)
    known = {o.schema.name: is_known(o.schema, robot) for o in ops}
    assert known["open-drawer"] is False
    assert known["move"] and known["pick-up"] and known["close-drawer"]
    robot2 = load_domain("kitchen2_robot")
    assert all(is_known(o.schema, robot2) for o in ops)


def test_explained_by_requires_matching_effects():
    base = ActionSchema("a", (("?x", "object"),), frozenset({A("(p ?x)")}), frozenset({A("(q ?x)")}), frozenset())
    richer = ActionSchema("b", (("?y", "object"), ("?z", "object")), frozenset({A("(p ?y)"), A("(r ?z)")}),
                          frozenset({A("(q ?y)")}), frozenset())
    assert explained_by(richer, base)
    assert not explained_by(base, richer)
    other = ActionSchema("c", base.params, base.pre, frozenset({A("(r ?x)")}), frozenset())
    assert not explained_by(other, base)
    renamed = ActionSchema("z", (("?k", "object"),), frozenset({A("(p ?k)")}), frozenset({A("(q ?k)")}), frozenset())
    assert schemas_equivalent(base, renamed)


def test_mapping(kitchen2):
    robot, human, problem = kitchen2
    trace = simulate_demonstrator(human, problem, generate_excuse(tasks(kitchen2)[0]).excuse)
    ops = learn_operators(trace, human, problem)
    n = len(ops[0].schema.params)
    order = tuple(reversed(range(n)))
    mapping = EmbodimentMapping((MappingEntry("move-chair", "push-chair", order),))
    mapped = map_embodiment(ops, mapping)
    assert mapped[0].name == "push-chair"
    assert mapped[0].params == tuple(reversed(ops[0].schema.params))
    with pytest.raises(MergeConflict):
        map_embodiment(ops, EmbodimentMapping((MappingEntry("move-chair", "push", (0,)),)))
    with pytest.raises(ValueError):
        EmbodimentMapping((MappingEntry("a", "r"), MappingEntry("b", "r")))


def test_mapping_from_json():
    m = EmbodimentMapping.from_json(json.dumps([{"human": "Grab", "robot": "pick", "param_order": [1, 0]}]))
    assert m.lookup("grab") == MappingEntry("grab", "pick", (1, 0))
    lines = '{"human": "a", "robot": "b"}\n{"human": "c", "robot": "d"}\n'
    assert len(EmbodimentMapping.from_json(lines).entries) == 2
    assert EmbodimentMapping.from_json("").entries == ()


def test_merge(kitchen1):
    robot, human, problem = kitchen1
    ops = learn_operators(simulate_demonstrator(human, problem), human, problem)
    notes = []
    merged = merge_domains(robot, [o.schema for o in ops], notes)
    assert {a.name for a in robot.actions} <= {a.name for a in merged.actions}
    assert "open-drawer" in {a.name for a in merged.actions}
    assert robot.actions == merged.actions[:len(robot.actions)]
    assert parse_domain(emit_domain(merged)) == merged
    assert any("renamed" in n for n in notes)  # learned move is richer than the robot's own move


def test_merge_drops_duplicates_and_adds_predicates(kitchen1):
    robot = kitchen1[0]
    dup = ActionSchema("again", robot.actions[0].params, robot.actions[0].pre, robot.actions[0].add,
                       robot.actions[0].delete)
    new = ActionSchema("wipe", (("?t", "table"),), frozenset(), frozenset({A("(shiny ?t)")}), frozenset())
    notes = []
    merged = merge_domains(robot, [dup, new], notes)
    assert "again" not in {a.name for a in merged.actions}
    assert merged.predicate("shiny").signature == ("table",)
    assert ("table", "object") in merged.types
    ground(merged, kitchen1[2])
