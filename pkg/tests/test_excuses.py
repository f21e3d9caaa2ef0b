import time

import pytest

from excuse_guide.excuses import (Excuse, ExcuseSearchConfig, ExcuseStatus, ExcuseVerdict, Minimality,
                                  NoExcuseWithinBound, display_atom, edit_moves, enumerate_minimal_excuses,
                                  excuse_report, generate_excuse, make_excuse, move_size, rank_excuses,
                                  render_excuse, validate_excuse, verify_minimality)
from excuse_guide.pddl import Atom, parse_atom

from conftest import tasks
from test_planning import swap_task


def atoms(*texts):
    return [parse_atom(t) for t in texts]


def test_kitchen1_excuse(kitchen1):
    task, _ = tasks(kitchen1)
    result = generate_excuse(task)
    assert result.status is ExcuseStatus.FOUND
    e = result.excuse
    assert render_excuse(e) == ["Open PinkDrawer"]
    assert render_excuse(e, "full-diff") == ["+ open(pink-drawer)", "- closed(pink-drawer)"]
    assert (e.size, e.size_raw) == (1, 2)
    assert validate_excuse(task, e).verdict is ExcuseVerdict.VALID
    assert verify_minimality(task, e).status is Minimality.MINIMAL


def test_kitchen2_excuse(kitchen2):
    task, _ = tasks(kitchen2)
    e = generate_excuse(task).excuse
    assert render_excuse(e) == ["Clear PinkDrawer"]
    assert e.size == 1 and not e.removes


def test_variant_excuse_has_two_moves(variant):
    task, _ = tasks(variant)
    e = generate_excuse(task).excuse
    assert render_excuse(e) == ["Clear PinkDrawer", "Open PinkDrawer"]
    assert e.size == 2 and e.size_raw == 3
    assert enumerate_minimal_excuses(task) == [e]


def test_non_minimal_excuse_is_valid_but_not_minimal(kitchen2):
    task, _ = tasks(kitchen2)
    e = make_excuse(task, atoms("(inside red-plate pink-drawer)", "(clear pink-drawer)", "(open pink-drawer)"),
                    atoms("(closed pink-drawer)"))
    assert e.size == 3
    assert validate_excuse(task, e).verdict is ExcuseVerdict.VALID
    check = verify_minimality(task, e)
    assert check.status is Minimality.SMALLER_EXCUSE_EXISTS
    assert check.smaller.size == 1


def test_invalid_excuses(kitchen1):
    task, _ = tasks(kitchen1)
    goal_state = make_excuse(task, atoms("(inside red-plate pink-drawer)"), [])
    # the drawer is already closed, so placing the plate inside models the goal
    assert validate_excuse(task, goal_state).verdict is ExcuseVerdict.MODELS_GOAL
    useless = make_excuse(task, atoms("(hand-empty actor)"), []) if Atom("hand-empty", ("actor",)) \
        not in task.atoms_of(task.init) else make_excuse(task, [], atoms("(free table)"))
    assert validate_excuse(task, useless).verdict is ExcuseVerdict.STILL_UNSOLVABLE
    malformed = make_excuse(task, atoms("(closed pink-drawer)"), [])
    assert validate_excuse(task, malformed).verdict is ExcuseVerdict.MALFORMED_EDIT
    outside = Excuse(frozenset(atoms("(open red-plate)")), frozenset(), 1, 1)
    assert validate_excuse(task, outside).verdict is ExcuseVerdict.MALFORMED_EDIT


def test_already_solvable():
    result = generate_excuse(swap_task("(q)"))
    assert result.status is ExcuseStatus.TASK_ALREADY_SOLVABLE
    assert len(result.plan) == 1


def test_no_excuse_within_bound(variant):
    task, _ = tasks(variant)
    result = generate_excuse(task, ExcuseSearchConfig(max_edit_size=1))
    assert result.status is ExcuseStatus.NO_EXCUSE_WITHIN_BOUND
    assert result.diagnostics.candidates > 0
    with pytest.raises(NoExcuseWithinBound):
        enumerate_minimal_excuses(task, ExcuseSearchConfig(max_edit_size=1))


def test_swap_has_no_excuse():
    # p and q can never hold together; the only edits that help put both in I, which models the goal
    result = generate_excuse(swap_task())
    assert result.status is ExcuseStatus.NO_EXCUSE_WITHIN_BOUND


def test_candidate_restriction(kitchen1):
    task, _ = tasks(kitchen1)
    cfg = ExcuseSearchConfig(candidate_atoms=frozenset(atoms("(free table)")))
    assert generate_excuse(task, cfg).status is ExcuseStatus.NO_EXCUSE_WITHIN_BOUND


def test_edit_moves_pair_flip(kitchen1):
    task, _ = tasks(kitchen1)
    moves = edit_moves(task)
    flips = [m for m in moves if m.add and m.remove]
    assert len(flips) == 1
    assert task.atoms_of(flips[0].add) == frozenset(atoms("(open pink-drawer)"))
    assert [m.key[0] for m in moves] == sorted(m.key[0] for m in moves)
    assert move_size(task, atoms("(open pink-drawer)"), atoms("(closed pink-drawer)")) == 1
    assert move_size(task, atoms("(open pink-drawer)"), []) == 1


def test_ranking_prefers_cheaper_demonstration(kitchen2):
    task, human = tasks(kitchen2)
    cheap = generate_excuse(task).excuse
    dear = make_excuse(task, atoms("(inside red-plate pink-drawer)", "(open pink-drawer)", "(clear pink-drawer)"),
                       atoms("(closed pink-drawer)", "(on-table red-plate)", "(item-at red-plate table)",
                             "(blocks chair pink-drawer)"))
    ranked = rank_excuses([dear, cheap], human)
    assert [r.predicted_length for r in ranked] == [1, 9]
    assert ranked[0].excuse == cheap


def test_unreachable_excuse_ranks_last(kitchen1):
    task, human = tasks(kitchen1)
    e = generate_excuse(task).excuse
    odd = make_excuse(task, atoms("(adjacent home table)"), [])
    ranked = rank_excuses([odd, e], human)
    assert ranked[0].excuse == e and not ranked[1].reachable


def test_display_atom():
    assert display_atom(Atom("open", ("pink-drawer",))) == "Open PinkDrawer"
    assert display_atom(Atom("inside", ("red-plate", "pink-drawer"))) == "Inside RedPlate, PinkDrawer"
    assert display_atom(Atom("hand-empty", ())) == "HandEmpty"


def test_report_and_dict(kitchen1):
    task, _ = tasks(kitchen1)
    result = generate_excuse(task)
    d = result.excuse.to_dict()
    assert d["size_moves"] == 1 and d["rendered"] == ["Open PinkDrawer"]
    assert d["witness_plan"]
    assert "Open PinkDrawer" in excuse_report(result)


def test_fast(kitchen1, kitchen2, variant):
    t0 = time.perf_counter()
    for s in (kitchen1, kitchen2, variant):
        generate_excuse(tasks(s)[0])
    assert time.perf_counter() - t0 < 2.0
