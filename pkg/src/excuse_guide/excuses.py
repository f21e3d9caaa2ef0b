"""Minimal initial-state edits ("excuses") that make an unsolvable task solvable."""
from __future__ import annotations

import enum
import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .pddl import Atom
from .planning import (Budget, GroundTask, Plan, SolveStatus, is_solvable, iter_bits, popcount,
                       relaxed_reachable, solve, validate_plan)

logger = logging.getLogger(__name__)


class NoExcuseWithinBound(RuntimeError):
    pass


@dataclass(frozen=True)
class Move:
    """One unit of excuse size: a single atom toggle or a complementary-pair flip."""

    add: int
    remove: int
    key: tuple

    @property
    def bits(self) -> int:
        return self.add | self.remove


@dataclass(frozen=True)
class Excuse:
    adds: frozenset[Atom]
    removes: frozenset[Atom]
    size: int  # in edit moves
    size_raw: int
    witness: Plan | None = None

    @property
    def canonical_key(self) -> tuple:
        return (self.size, tuple(sorted(self.removes)), tuple(sorted(self.adds)))

    def edited_state(self, task: GroundTask) -> int:
        return (task.init & ~task.bits(self.removes)) | task.bits(self.adds)

    def to_dict(self) -> dict:
        return {
            "adds": [str(a) for a in sorted(self.adds)],
            "removes": [str(a) for a in sorted(self.removes)],
            "size_moves": self.size,
            "size_raw": self.size_raw,
            "rendered": render_excuse(self, "positive-only"),
            "diff": render_excuse(self, "full-diff"),
            "witness_plan": [a.label for a in self.witness.steps] if self.witness else None,
        }


@dataclass
class ExcuseSearchConfig:
    max_edit_size: int = 4
    enumerate_all: bool = False
    candidate_atoms: frozenset[Atom] | None = None
    budget: Budget = field(default_factory=lambda: Budget(max_expansions=100_000))

    def __post_init__(self):
        if self.max_edit_size < 1:
            raise ValueError("max_edit_size must be at least 1")


class ExcuseStatus(enum.Enum):
    FOUND = "found"
    NO_EXCUSE_WITHIN_BOUND = "no-excuse-within-bound"
    TASK_ALREADY_SOLVABLE = "task-already-solvable"


@dataclass
class SearchDiagnostics:
    candidates: int = 0
    models_goal: int = 0
    relaxed_pruned: int = 0
    budget_exhausted: int = 0
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "candidates": self.candidates,
            "models_goal": self.models_goal,
            "relaxed_pruned": self.relaxed_pruned,
            "budget_exhausted": self.budget_exhausted,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class ExcuseSearchResult:
    status: ExcuseStatus
    excuse: Excuse | None = None
    plan: Plan | None = None  # set when the task was already solvable
    diagnostics: SearchDiagnostics = field(default_factory=SearchDiagnostics)

    def to_dict(self) -> dict:
        out = {"status": self.status.value, "diagnostics": self.diagnostics.to_dict()}
        if self.excuse:
            out["excuse"] = self.excuse.to_dict()
        if self.plan:
            out["plan"] = [a.label for a in self.plan.steps]
        return out


# ---------------------------------------------------------------- moves


def edit_moves(task: GroundTask, candidate_atoms: Iterable[Atom] | None = None) -> list[Move]:
    """All single edit moves in canonical order (removes before adds, then atom order).

    A declared complementary pair where exactly one side holds in ``I`` is
    edited only as a whole flip, counted under the atom it adds.
    """
    allowed = None if candidate_atoms is None else {task.index[a] for a in candidate_atoms if a in task.index}
    init = task.init
    paired: set[int] = set()
    moves = []
    for p, q in task.mutex_pairs:
        hp, hq = bool(init >> p & 1), bool(init >> q & 1)
        if hp == hq:
            continue
        paired.update((p, q))
        added, removed = (q, p) if hp else (p, q)
        if allowed is not None and added not in allowed and removed not in allowed:
            continue
        moves.append(Move(1 << added, 1 << removed, (1, task.atoms[added])))
    for i, atom in enumerate(task.atoms):
        if i in paired or (allowed is not None and i not in allowed):
            continue
        if init >> i & 1:
            moves.append(Move(0, 1 << i, (0, atom)))
        else:
            moves.append(Move(1 << i, 0, (1, atom)))
    moves.sort(key=lambda m: m.key)
    return moves


def move_size(task: GroundTask, adds: Iterable[Atom], removes: Iterable[Atom]) -> int:
    """Size of an edit counted in moves: a fully flipped complementary pair counts once."""
    add_bits, rem_bits = task.bits(adds), task.bits(removes)
    edited = add_bits | rem_bits
    size = popcount(edited)
    for p, q in task.mutex_pairs:
        pb, qb = 1 << p, 1 << q
        if (add_bits & pb and rem_bits & qb) or (add_bits & qb and rem_bits & pb):
            size -= 1
    return size


def _combinations(moves: Sequence[Move], k: int) -> Iterator[tuple[int, int]]:
    for combo in itertools.combinations(moves, k):
        add = rem = used = 0
        ok = True
        for m in combo:
            if m.bits & used:
                ok = False
                break
            used |= m.bits
            add |= m.add
            rem |= m.remove
        if ok:
            yield add, rem


def _make_excuse(task: GroundTask, add: int, rem: int, witness: Plan | None) -> Excuse:
    adds, removes = task.atoms_of(add), task.atoms_of(rem)
    return Excuse(adds, removes, move_size(task, adds, removes), popcount(add | rem), witness)


def _try_candidate(task: GroundTask, add: int, rem: int, budget: Budget,
                   diag: SearchDiagnostics) -> Plan | None:
    state = (task.init & ~rem) | add
    diag.candidates += 1
    if task.satisfies_goal(state):
        diag.models_goal += 1
        return None
    edited = task.with_init(state)
    if relaxed_reachable(edited, state) & task.goal != task.goal:
        diag.relaxed_pruned += 1
        return None
    result = solve(edited, "satisficing", budget)
    if result.status is SolveStatus.BUDGET_EXCEEDED:
        diag.budget_exhausted += 1
    return result.plan


def _annotate(task: GroundTask, excuse: Excuse, diag: SearchDiagnostics) -> None:
    goal_adds = sorted(a for a in excuse.adds if task.index[a] in set(iter_bits(task.goal)))
    if goal_adds:
        diag.notes.append("excuse adds goal atoms: " + ", ".join(map(str, goal_adds)))
    if not task.mutex_pairs:
        diag.notes.append("no complementary pairs declared; the edited state is not checked for physical consistency")


def generate_excuse(task: GroundTask, cfg: ExcuseSearchConfig | None = None) -> ExcuseSearchResult:
    """Breadth-first search over edit sets of growing size; stops at the first excuse."""
    cfg = cfg or ExcuseSearchConfig()
    diag = SearchDiagnostics()
    first = is_solvable(task, cfg.budget)
    if first.solved:
        return ExcuseSearchResult(ExcuseStatus.TASK_ALREADY_SOLVABLE, plan=first.plan, diagnostics=diag)
    moves = edit_moves(task, cfg.candidate_atoms)
    for k in range(1, cfg.max_edit_size + 1):
        for add, rem in _combinations(moves, k):
            plan = _try_candidate(task, add, rem, cfg.budget, diag)
            if plan is not None:
                excuse = _make_excuse(task, add, rem, plan)
                _annotate(task, excuse, diag)
                logger.info("excuse of size %d after %d candidates", k, diag.candidates)
                return ExcuseSearchResult(ExcuseStatus.FOUND, excuse, diagnostics=diag)
    return ExcuseSearchResult(ExcuseStatus.NO_EXCUSE_WITHIN_BOUND, diagnostics=diag)


def enumerate_minimal_excuses(task: GroundTask, cfg: ExcuseSearchConfig | None = None) -> list[Excuse]:
    """Every excuse of the minimal size, in canonical order."""
    cfg = cfg or ExcuseSearchConfig()
    if is_solvable(task, cfg.budget).solved:
        return []
    moves = edit_moves(task, cfg.candidate_atoms)
    diag = SearchDiagnostics()
    for k in range(1, cfg.max_edit_size + 1):
        found = [_make_excuse(task, add, rem, plan)
                 for add, rem in _combinations(moves, k)
                 if (plan := _try_candidate(task, add, rem, cfg.budget, diag)) is not None]
        if found:
            return found
    raise NoExcuseWithinBound(f"no excuse with at most {cfg.max_edit_size} edit moves")


# ---------------------------------------------------------------- checks


class ExcuseVerdict(enum.Enum):
    VALID = "valid"
    MODELS_GOAL = "models-goal"
    STILL_UNSOLVABLE = "still-unsolvable"
    MALFORMED_EDIT = "malformed-edit"


@dataclass(frozen=True)
class ExcuseCheck:
    verdict: ExcuseVerdict
    reason: str = ""
    plan: Plan | None = None


def validate_excuse(task: GroundTask, excuse: Excuse, budget: Budget | None = None) -> ExcuseCheck:
    unknown = [a for a in excuse.adds | excuse.removes if a not in task.index]
    if unknown:
        return ExcuseCheck(ExcuseVerdict.MALFORMED_EDIT, "atoms outside the fluent universe: "
                           + ", ".join(map(str, sorted(unknown))))
    add, rem = task.bits(excuse.adds), task.bits(excuse.removes)
    if add & task.init:
        return ExcuseCheck(ExcuseVerdict.MALFORMED_EDIT, "adds atoms already in I: "
                           + ", ".join(map(str, task.sorted_atoms(add & task.init))))
    if rem & ~task.init:
        return ExcuseCheck(ExcuseVerdict.MALFORMED_EDIT, "removes atoms not in I: "
                           + ", ".join(map(str, task.sorted_atoms(rem & ~task.init))))
    state = (task.init & ~rem) | add
    if task.satisfies_goal(state):
        return ExcuseCheck(ExcuseVerdict.MODELS_GOAL, "edited state already models the goal")
    edited = task.with_init(state)
    if excuse.witness is not None:
        try:
            if validate_plan(edited, excuse.witness).valid:
                return ExcuseCheck(ExcuseVerdict.VALID, plan=excuse.witness)
        except ValueError:
            pass
    result = is_solvable(edited, budget)
    if result.solved:
        return ExcuseCheck(ExcuseVerdict.VALID, plan=result.plan)
    reason = "search budget exhausted" if result.status is SolveStatus.BUDGET_EXCEEDED else "no plan exists"
    return ExcuseCheck(ExcuseVerdict.STILL_UNSOLVABLE, reason)


class Minimality(enum.Enum):
    MINIMAL = "minimal"
    SMALLER_EXCUSE_EXISTS = "smaller-excuse-exists"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class MinimalityResult:
    status: Minimality
    smaller: Excuse | None = None


def verify_minimality(task: GroundTask, excuse: Excuse, budget: Budget | None = None) -> MinimalityResult:
    """Exhaustively check every edit of fewer moves than ``excuse``."""
    budget = budget or Budget(max_expansions=100_000)
    moves = edit_moves(task)
    diag = SearchDiagnostics()
    for k in range(1, excuse.size):
        for add, rem in _combinations(moves, k):
            plan = _try_candidate(task, add, rem, budget, diag)
            if plan is not None:
                return MinimalityResult(Minimality.SMALLER_EXCUSE_EXISTS, _make_excuse(task, add, rem, plan))
    if diag.budget_exhausted:
        return MinimalityResult(Minimality.UNKNOWN)
    return MinimalityResult(Minimality.MINIMAL)


# ---------------------------------------------------------------- ranking


@dataclass(frozen=True)
class RankedExcuse:
    excuse: Excuse
    predicted_length: int | None  # optimal human plan length to reach the excuse
    reachable: bool
    demonstration: Plan | None = None


def excuse_target(task: GroundTask, excuse: Excuse) -> GroundTask | None:
    """``task`` re-targeted at the excuse: adds must hold, removes must not."""
    if any(a not in task.index for a in excuse.adds | excuse.removes):
        return None
    return task.with_goal(task.bits(excuse.adds), task.bits(excuse.removes))


def rank_excuses(excuses: Sequence[Excuse], human_task: GroundTask,
                 budget: Budget | None = None) -> list[RankedExcuse]:
    """Order excuses by the optimal human demonstration needed to bring them about."""
    ranked = []
    for e in excuses:
        target = excuse_target(human_task, e)
        result = solve(target, "optimal", budget) if target is not None else None
        if result is not None and result.solved:
            ranked.append(RankedExcuse(e, len(result.plan), True, result.plan))
        else:
            ranked.append(RankedExcuse(e, None, False))
    ranked.sort(key=lambda r: (not r.reachable, r.predicted_length or 0, r.excuse.canonical_key))
    return ranked


# ---------------------------------------------------------------- rendering


def _camel(token: str) -> str:
    return "".join(part[:1].upper() + part[1:] for part in token.replace("_", "-").split("-") if part)


def display_atom(atom: Atom) -> str:
    """``(inside red-plate pink-drawer)`` -> ``Inside RedPlate, PinkDrawer``."""
    text = _camel(atom.predicate)
    if atom.args:
        text += " " + ", ".join(_camel(a) for a in atom.args)
    return text


def _fn_form(atom: Atom) -> str:
    return f"{atom.predicate}({', '.join(atom.args)})"


def render_excuse(excuse: Excuse, style: str = "positive-only") -> list[str]:
    if style == "positive-only":
        lines = [display_atom(a) for a in sorted(excuse.adds)]
        if not lines:
            lines = ["Not " + display_atom(a) for a in sorted(excuse.removes)]
        return lines
    if style == "full-diff":
        return [f"+ {_fn_form(a)}" for a in sorted(excuse.adds)] + \
               [f"- {_fn_form(a)}" for a in sorted(excuse.removes)]
    raise ValueError(f"unknown rendering style {style!r}")


def excuse_report(result: ExcuseSearchResult) -> str:
    return json.dumps(result.to_dict(), indent=2, sort_keys=True)


def make_excuse(task: GroundTask, adds: Iterable[Atom], removes: Iterable[Atom],
                witness: Plan | None = None) -> Excuse:
    adds, removes = frozenset(adds), frozenset(removes)
    return Excuse(adds, removes, move_size(task, adds, removes), len(adds | removes), witness)
