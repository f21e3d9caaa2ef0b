import io
import json

import pytest

from excuse_guide import data_path
from excuse_guide.excuses import generate_excuse
from excuse_guide.pddl import PlanningDomain, emit_domain, parse_domain
from excuse_guide.session import (EXIT_INPUT_ERROR, EXIT_MISDIRECTED, EXIT_OK, AbortedSession, InputError,
                                  SessionConfig, interactive_repl, run_guided_session, run_unguided_session,
                                  trace_from_transcript)

from conftest import SCENARIOS, tasks


def config(name, **kw):
    robot, human, problem = SCENARIOS[name]
    kw.setdefault("human_domain", data_path(human + ".pddl"))
    return SessionConfig(data_path(robot + ".pddl"), data_path(problem + ".pddl"), **kw)


def test_guided_kitchen1(tmp_path):
    tr = run_guided_session(config("kitchen1", out=tmp_path))
    assert tr.exit_code == EXIT_OK
    assert [e["event"] for e in tr.events] == ["inputs", "unsolvability", "excuse", "demonstration", "learned",
                                               "merge", "post_demo", "metrics"]
    excuse = tr.find("excuse")
    assert excuse["rendered"] == ["Open PinkDrawer"]
    assert excuse["banner"] == ["Open PinkDrawer", "+ open(pink-drawer)", "- closed(pink-drawer)"]
    assert tr.find("demonstration")["length"] == 2
    post = tr.find("post_demo")
    assert post["solvable"] and len(post["plan"]) == 9
    assert {"transcript.json", "merged_domain.pddl", "report.json", "trace.jsonl"} <= {p.name for p in tmp_path.iterdir()}
    merged = parse_domain((tmp_path / "merged_domain.pddl").read_text())
    assert "open-drawer" in {a.name for a in merged.actions}
    assert json.loads((tmp_path / "transcript.json").read_text())["exit_code"] == 0


def test_already_solvable():
    cfg = SessionConfig(data_path("kitchen1_human.pddl"), data_path("kitchen1.pddl"),
                        data_path("kitchen1_human.pddl"))
    tr = run_guided_session(cfg)
    assert [e["event"] for e in tr.events] == ["inputs", "unsolvability", "plan"]
    assert tr.find("plan")["cost"] == 9 and tr.exit_code == EXIT_OK


def test_misdirected_replay():
    tr = run_guided_session(config("kitchen2", mode="replay", trace=data_path("kitchen2_misdirected.jsonl")))
    assert tr.exit_code == EXIT_MISDIRECTED
    assert tr.find("metrics")["misdirected"]["status"] == "misdirected"


def test_unguided():
    tr1 = run_unguided_session(config("kitchen1"))
    assert tr1.find("demonstration")["length"] == 9
    assert tr1.find("excuse")["shown"] is False
    assert tr1.report.useful_fraction < 1
    tr2 = run_unguided_session(config("kitchen2"))
    assert tr2.find("demonstration")["length"] == 11


def test_empty_human_domain(tmp_path):
    human = parse_domain(data_path("kitchen1_human.pddl").read_text())
    empty = PlanningDomain(human.name, human.requirements, human.types, human.predicates, (), human.mutex_pairs)
    path = tmp_path / "empty.pddl"
    path.write_text(emit_domain(empty))
    tr = run_unguided_session(config("kitchen1", human_domain=path))
    err = tr.events[-1]
    assert err["event"] == "error" and err["stage"] == "demonstration"
    assert "cannot reach" in err["message"]


def test_input_errors(tmp_path):
    tr = run_guided_session(SessionConfig(tmp_path / "missing.pddl", data_path("kitchen1.pddl"),
                                          data_path("kitchen1_human.pddl")))
    assert tr.exit_code == EXIT_INPUT_ERROR and tr.events[-1]["stage"] == "input"
    with pytest.raises(InputError):
        SessionConfig(data_path("kitchen1_robot.pddl"), data_path("kitchen1.pddl"))
    with pytest.raises(InputError):
        config("kitchen1", mode="replay")


def test_bad_replay_trace(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text('{"init": []}\n')
    tr = run_guided_session(config("kitchen1", mode="replay", trace=path))
    assert tr.exit_code == EXIT_INPUT_ERROR
    assert tr.events[-1]["stage"] == "demonstration"
    assert tr.find("excuse") is not None  # partial transcript kept


def test_transcript_determinism():
    a = run_guided_session(config("kitchen2-variant"))
    b = run_guided_session(config("kitchen2-variant"))
    assert a.to_json(with_timing=False) == b.to_json(with_timing=False)
    assert "timing" in a.to_dict() and len(a.timing) == len(a.events)


def test_replay_closure(tmp_path):
    first = run_guided_session(config("kitchen2-variant", out=tmp_path / "a"))
    data = json.loads((tmp_path / "a" / "transcript.json").read_text())
    trace = trace_from_transcript(data)
    path = tmp_path / "replay.jsonl"
    from excuse_guide.demonstration import write_trace
    path.write_text(write_trace(trace))
    second = run_guided_session(config("kitchen2-variant", mode="replay", trace=path))
    for event in ("learned", "merge", "post_demo", "metrics"):
        assert first.find(event) == second.find(event)
    assert second.merged_domain == first.merged_domain


def test_enumerate_all_ranks(tmp_path):
    from excuse_guide.excuses import ExcuseSearchConfig
    tr = run_guided_session(config("kitchen1", excuse=ExcuseSearchConfig(enumerate_all=True)))
    assert tr.find("excuse")["ranking"][0]["predicted_length"] == 2


# ---------------------------------------------------------------- REPL


def repl(scenario, script, excuse=True):
    robot_task, human_task = tasks(scenario)
    e = generate_excuse(robot_task).excuse if excuse else None
    out = io.StringIO()
    trace = interactive_repl(scenario[2].init, human_task, e, stdin=io.StringIO(script), stdout=out)
    return trace, out.getvalue()


def test_repl_reaches_excuse(kitchen1):
    trace, out = repl(kitchen1, "do (move actor home drawer-front)\ndo (open-drawer pink-drawer)\ndone\n")
    assert [s.label for s in trace.steps] == ["move", "open-drawer"]
    assert trace.provenance == "interactive"
    assert "Open PinkDrawer" in out and "+ open(pink-drawer)" in out


def test_repl_rejects_illegal_and_unknown(kitchen1):
    script = "do (open-drawer actor pink-drawer drawer-front)\ndo (fly actor)\nbogus\nabort\n"
    with pytest.raises(AbortedSession):
        repl(kitchen1, script)
    out = io.StringIO()
    robot_task, human_task = tasks(kitchen1)
    with pytest.raises(AbortedSession):
        interactive_repl(kitchen1[2].init, human_task, None, stdin=io.StringIO(script), stdout=out)
    text = out.getvalue()
    assert "illegal" in text and "(agent-at actor drawer-front)" in text
    assert "unknown action 'fly'" in text and "open-drawer" in text


def test_repl_undo_and_state(kitchen1):
    trace, out = repl(kitchen1, "do (move actor home drawer-front)\nundo\nstate\ndone\n", excuse=False)
    assert len(trace.steps) == 0
    assert "(agent-at actor home)" in out


def test_repl_done_asks_when_excuse_missing(kitchen1):
    trace, out = repl(kitchen1, "do (move actor home drawer-front)\ndone\nn\ndone\ny\n")
    assert "not achieved" in out
    assert len(trace.steps) == 1


def test_repl_free_form(kitchen2):
    robot_task, _ = tasks(kitchen2)
    e = generate_excuse(robot_task).excuse
    script = "do (shove chair pink-drawer) +(clear pink-drawer) -(blocks chair pink-drawer)\ndone\n"
    out = io.StringIO()
    trace = interactive_repl(kitchen2[2].init, None, e, stdin=io.StringIO(script), stdout=out)
    step = trace.steps[0]
    assert step.label == "shove" and step.touched == ("chair", "pink-drawer")
    assert {str(a) for a in step.adds} == {"(clear pink-drawer)"}


def test_interactive_session():
    script = "do (move-chair actor chair pink-drawer drawer-front)\ndone\n"
    cfg = config("kitchen2", mode="interactive", stdin=io.StringIO(script), stdout=io.StringIO())
    tr = run_guided_session(cfg)
    assert tr.exit_code == EXIT_OK
    assert tr.find("demonstration")["provenance"] == "interactive"
