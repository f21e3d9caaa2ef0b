"""Grounding, STRIPS transition semantics, plan validation and search.

States are Python ints used as bitsets over the task's fluent universe; bit
``i`` stands for ``task.atoms[i]``.
"""
from __future__ import annotations

import enum
import heapq
import itertools
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .pddl import Atom, PlanningDomain, PlanningProblem, ROOT_TYPE, parse_atom

logger = logging.getLogger(__name__)

DEFAULT_GROUNDING_CAP = 100_000
DEFAULT_MAX_EXPANSIONS = 1_000_000


class GroundingError(ValueError):
    pass


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    cost: int
    pre: int
    add: int
    delete: int
    index: int = -1

    @property
    def label(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class GroundTask:
    """A grounded planning task; immutable, share freely between searches."""

    atoms: tuple[Atom, ...]
    actions: tuple[GroundAction, ...]
    init: int
    goal: int
    goal_neg: int = 0
    mutex_pairs: tuple[tuple[int, int], ...] = ()
    objects: tuple[tuple[str, str], ...] = ()
    index: dict = field(default=None, compare=False, repr=False)  # Atom -> bit position

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(self, "index", {a: i for i, a in enumerate(self.atoms)})

    # -- conversions
    def bits(self, atoms: Iterable[Atom]) -> int:
        out = 0
        for a in atoms:
            try:
                out |= 1 << self.index[a]
            except KeyError:
                raise KeyError(f"atom {a} is not in the fluent universe") from None
        return out

    def atoms_of(self, bits: int) -> frozenset[Atom]:
        return frozenset(self.atoms[i] for i in iter_bits(bits))

    def sorted_atoms(self, bits: int) -> list[Atom]:
        return [self.atoms[i] for i in iter_bits(bits)]

    def with_init(self, init: int) -> "GroundTask":
        return replace(self, init=init, index=self.index)

    def with_goal(self, goal: int, goal_neg: int = 0) -> "GroundTask":
        return replace(self, goal=goal, goal_neg=goal_neg, index=self.index)

    def satisfies_goal(self, state: int) -> bool:
        return state & self.goal == self.goal and not state & self.goal_neg

    def find_action(self, name: str, args: Sequence[str]) -> GroundAction:
        key = (name.lower(), tuple(a.lower() for a in args))
        for a in self.actions:
            if (a.name, a.args) == key:
                return a
        raise KeyError("(" + " ".join((key[0],) + key[1])+ ")")

    @property
    def size(self) -> int:
        return len(self.atoms)


def iter_bits(bits: int) -> Iterator[int]:
    i = 0
    while bits:
        if bits & 1:
            yield i
        bits >>= 1
        i += 1


def popcount(bits: int) -> int:
    return bin(bits).count("1")


# ---------------------------------------------------------------- grounding


def _objects_by_type(domain: PlanningDomain, objects: Sequence[tuple[str, str]]) -> dict[str, list[str]]:
    parents = domain.type_parent()
    out: dict[str, list[str]] = {ROOT_TYPE: []}
    for t, _ in domain.types:
        out[t] = []
    for name, t in sorted(objects):
        cur = t
        while True:
            out.setdefault(cur, []).append(name)
            if cur == ROOT_TYPE:
                break
            cur = parents.get(cur, ROOT_TYPE)
    return out


def fluent_universe(domain: PlanningDomain, objects: Sequence[tuple[str, str]]) -> list[Atom]:
    """Every type-consistent instantiation of every declared predicate, canonically ordered."""
    by_type = _objects_by_type(domain, objects)
    atoms = []
    for p in domain.predicates:
        for combo in itertools.product(*(by_type.get(t, []) for t in p.signature)):
            atoms.append(Atom(p.name, tuple(combo)))
    return sorted(atoms)


def ground(domain: PlanningDomain, problem: PlanningProblem, cap: int = DEFAULT_GROUNDING_CAP) -> GroundTask:
    """Instantiate every schema with every type-consistent binding.

    No reachability pruning is done: excuse search edits the initial state, so
    an action that is statically dead from ``I`` may become live from ``I'``.
    Bindings that map distinct parameters to the same object and make add and
    delete effects collide are skipped; a collision under a binding of
    pairwise distinct objects means the schema itself is contradictory and
    raises :class:`GroundingError`.
    """
    atoms = fluent_universe(domain, problem.objects)
    if len(atoms) > cap:
        raise GroundingError(f"fluent universe has {len(atoms)} atoms, above the cap of {cap}")
    index = {a: i for i, a in enumerate(atoms)}
    by_type = _objects_by_type(domain, problem.objects)

    def bits(lifted: Iterable[Atom], binding: dict[str, str]) -> int:
        out = 0
        for a in lifted:
            out |= 1 << index[a.substitute(binding)]
        return out

    actions: list[GroundAction] = []
    skipped = 0
    for schema in domain.actions:
        domains = [by_type.get(t, []) for _, t in schema.params]
        for combo in itertools.product(*domains):
            binding = dict(zip(schema.variables, combo))
            add = bits(schema.add, binding)
            dele = bits(schema.delete, binding)
            if add & dele:
                if len(set(combo)) == len(combo):
                    clash = [str(atoms[i]) for i in iter_bits(add & dele)]
                    raise GroundingError(
                        f"action ({schema.name} {' '.join(combo)}) adds and deletes {', '.join(clash)}")
                skipped += 1
                continue
            actions.append(GroundAction(schema.name, tuple(combo), schema.cost,
                                        bits(schema.pre, binding), add, dele, len(actions)))
            if len(actions) > cap:
                raise GroundingError(f"more than {cap} ground actions")
    if skipped:
        logger.debug("skipped %d non-injective bindings with colliding effects", skipped)

    pairs = []
    for p, q in domain.mutex_pairs:
        for a in atoms:
            if a.predicate == p:
                other = Atom(q, a.args)
                if other in index:
                    pairs.append((index[a], index[other]))
    return GroundTask(
        atoms=tuple(atoms),
        actions=tuple(actions),
        init=sum(1 << index[a] for a in problem.init),
        goal=sum(1 << index[a] for a in problem.goal),
        mutex_pairs=tuple(pairs),
        objects=problem.objects,
        index=index,
    )


# ---------------------------------------------------------------- transitions


def apply(state: int, action: GroundAction) -> int | None:
    """Successor of ``state`` under ``action``; ``None`` when a precondition fails."""
    if state & action.pre != action.pre:
        return None
    return (state & ~action.delete) | action.add


def apply_seq(state: int, actions: Iterable[GroundAction]) -> int | None:
    result, _ = apply_seq_verbose(state, actions)
    return result


def apply_seq_verbose(state: int, actions: Iterable[GroundAction]) -> tuple[int | None, int | None]:
    """Like :func:`apply_seq` but also return the index of the first failing step."""
    for i, a in enumerate(actions):
        nxt = apply(state, a)
        if nxt is None:
            return None, i
        state = nxt
    return state, None


@dataclass(frozen=True)
class Plan:
    steps: tuple[GroundAction, ...]

    @property
    def cost(self) -> int:
        return sum(a.cost for a in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def to_text(self) -> str:
        return format_plan(self)


class Validity(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    GOAL_NOT_REACHED = "goal-not-reached"


@dataclass(frozen=True)
class PlanValidation:
    status: Validity
    cost: float
    failed_step: int | None = None
    unmet: tuple[Atom, ...] = ()

    @property
    def valid(self) -> bool:
        return self.status is Validity.VALID


def validate_plan(task: GroundTask, plan: Plan | Sequence[GroundAction]) -> PlanValidation:
    steps = plan.steps if isinstance(plan, Plan) else tuple(plan)
    for a in steps:
        if not (0 <= a.index < len(task.actions)) or task.actions[a.index] != a:
            raise PlanError(f"action {a.label} does not belong to this task")
    state = task.init
    for i, a in enumerate(steps):
        nxt = apply(state, a)
        if nxt is None:
            return PlanValidation(Validity.INVALID, math.inf, i, tuple(task.sorted_atoms(a.pre & ~state)))
        state = nxt
    if not task.satisfies_goal(state):
        missing = (task.goal & ~state) | (task.goal_neg & state)
        return PlanValidation(Validity.GOAL_NOT_REACHED, math.inf, None, tuple(task.sorted_atoms(missing)))
    return PlanValidation(Validity.VALID, sum(a.cost for a in steps))


def format_plan(plan: Plan) -> str:
    lines = [f"; cost = {plan.cost}"]
    lines.extend(a.label for a in plan.steps)
    return "\n".join(lines) + "\n"


def parse_plan(text: str, task: GroundTask) -> Plan:
    steps = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        atom = parse_atom(line)
        try:
            steps.append(task.find_action(atom.predicate, atom.args))
        except KeyError:
            raise PlanError(f"line {lineno}: unknown action {line}") from None
    return Plan(tuple(steps))


# ---------------------------------------------------------------- delete relaxation


def relaxed_reachable(task: GroundTask, state: int) -> int:
    """Fixpoint of atoms reachable when delete effects are ignored."""
    reach = state
    pending = list(task.actions)
    changed = True
    while changed:
        changed = False
        rest = []
        for a in pending:
            if a.pre & reach == a.pre:
                if a.add & ~reach:
                    reach |= a.add
                    changed = True
            else:
                rest.append(a)
        pending = rest
    return reach


class _Relaxation:
    """Per-task tables for h_max / h_add (shared machinery with reachability)."""

    def __init__(self, task: GroundTask):
        self.task = task
        self.pre = [list(iter_bits(a.pre)) for a in task.actions]
        self.add = [list(iter_bits(a.add)) for a in task.actions]
        self.goal = list(iter_bits(task.goal))
        self.by_pre: list[list[int]] = [[] for _ in task.atoms]
        self.no_pre = []
        for i, pre in enumerate(self.pre):
            if not pre:
                self.no_pre.append(i)
            for p in pre:
                self.by_pre[p].append(i)

    def atom_costs(self, state: int, combine: str) -> list[float]:
        """Generalised Dijkstra over the relaxed task (Knuth-style)."""
        n = len(self.task.atoms)
        cost = [math.inf] * n
        heap: list[tuple[float, int]] = []
        for i in iter_bits(state):
            cost[i] = 0
            heap.append((0, i))
        unsat = [len(p) for p in self.pre]
        acc = [0.0] * len(self.pre)
        actions = self.task.actions

        def fire(ai: int, pre_cost: float) -> None:
            c = pre_cost + actions[ai].cost
            for q in self.add[ai]:
                if c < cost[q]:
                    cost[q] = c
                    heapq.heappush(heap, (c, q))

        for ai in self.no_pre:
            fire(ai, 0)
        heapq.heapify(heap)
        done = [False] * n
        while heap:
            c, p = heapq.heappop(heap)
            if done[p] or c > cost[p]:
                continue
            done[p] = True
            for ai in self.by_pre[p]:
                if combine == "max":
                    acc[ai] = max(acc[ai], c)
                else:
                    acc[ai] += c
                unsat[ai] -= 1
                if unsat[ai] == 0:
                    fire(ai, acc[ai])
        return cost

    def h(self, state: int, combine: str) -> float:
        if not self.goal:
            return 0
        costs = self.atom_costs(state, combine)
        vals = [costs[g] for g in self.goal]
        return max(vals) if combine == "max" else sum(vals)


def h_max(task: GroundTask, state: int) -> float:
    return _Relaxation(task).h(state, "max")


def h_add(task: GroundTask, state: int) -> float:
    return _Relaxation(task).h(state, "add")


# ---------------------------------------------------------------- search


class SolveStatus(enum.Enum):
    PLAN = "plan"
    UNSOLVABLE = "unsolvable"
    BUDGET_EXCEEDED = "budget-exceeded"


@dataclass(frozen=True)
class Budget:
    max_expansions: int = DEFAULT_MAX_EXPANSIONS
    max_seconds: float | None = None


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    plan: Plan | None = None
    expanded: int = 0

    @property
    def solved(self) -> bool:
        return self.status is SolveStatus.PLAN


def _successors(task: GroundTask, state: int) -> Iterator[tuple[GroundAction, int]]:
    for a in task.actions:
        if state & a.pre == a.pre:
            yield a, (state & ~a.delete) | a.add


def _extract(parents: dict[int, tuple[int, GroundAction] | None], state: int) -> Plan:
    steps = []
    while parents[state] is not None:
        prev, a = parents[state]
        steps.append(a)
        state = prev
    return Plan(tuple(reversed(steps)))


def solve(task: GroundTask, mode: str = "optimal", budget: Budget | None = None,
          heuristic: str | None = None) -> SolveResult:
    """Search for a plan.

    ``optimal`` runs A* with h_max (``heuristic="blind"`` gives uniform cost);
    ``satisficing`` runs greedy best-first search with h_add.  Open lists
    break ties on (f, h, insertion order), so results are reproducible.
    """
    budget = budget or Budget()
    if mode not in ("optimal", "satisficing"):
        raise ValueError(f"unknown search mode {mode!r}")
    heuristic = heuristic or ("hmax" if mode == "optimal" else "hadd")
    relax = _Relaxation(task) if heuristic in ("hmax", "hadd") else None
    combine = "max" if heuristic == "hmax" else "add"

    def h(state: int) -> float:
        return relax.h(state, combine) if relax else 0

    deadline = None if budget.max_seconds is None else time.monotonic() + budget.max_seconds
    counter = itertools.count()
    h0 = h(task.init)
    if h0 == math.inf:
        return SolveResult(SolveStatus.UNSOLVABLE)
    parents: dict[int, tuple[int, GroundAction] | None] = {task.init: None}
    g = {task.init: 0}
    key0 = (h0, h0) if mode == "optimal" else (h0, 0)
    open_list = [(key0, next(counter), task.init)]
    closed: set[int] = set()
    expanded = 0
    while open_list:
        _, _, state = heapq.heappop(open_list)
        if state in closed:
            continue
        if task.satisfies_goal(state):
            return SolveResult(SolveStatus.PLAN, _extract(parents, state), expanded)
        closed.add(state)
        expanded += 1
        if expanded > budget.max_expansions or (deadline and time.monotonic() > deadline):
            return SolveResult(SolveStatus.BUDGET_EXCEEDED, None, expanded)
        gs = g[state]
        for a, nxt in _successors(task, state):
            if nxt in closed:
                continue
            ng = gs + a.cost
            if mode == "satisficing" and nxt in g:
                continue
            if nxt in g and ng >= g[nxt]:
                continue
            hn = h(nxt)
            if hn == math.inf:
                continue
            g[nxt] = ng
            parents[nxt] = (state, a)
            key = (ng + hn, hn) if mode == "optimal" else (hn, 0)
            heapq.heappush(open_list, (key, next(counter), nxt))
    return SolveResult(SolveStatus.UNSOLVABLE, None, expanded)


def is_solvable(task: GroundTask, budget: Budget | None = None) -> SolveResult:
    """Cheap existence check: relaxed reachability, then satisficing search."""
    reach = relaxed_reachable(task, task.init)
    if reach & task.goal != task.goal:
        return SolveResult(SolveStatus.UNSOLVABLE)
    return solve(task, "satisficing", budget)


# ---------------------------------------------------------------- unsolvability


class Unsolvability(enum.Enum):
    PROVEN_UNSOLVABLE = "proven-unsolvable"
    SOLVABLE = "solvable"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Certificate:
    method: str  # "relaxation" or "exhaustive"
    unreached_goals: tuple[Atom, ...] = ()
    states_explored: int = 0

    def describe(self) -> str:
        if self.method == "relaxation":
            return "goal atoms unreachable even ignoring deletes: " + ", ".join(map(str, self.unreached_goals))
        return f"all {self.states_explored} reachable states explored without reaching the goal"


@dataclass(frozen=True)
class UnsolvabilityResult:
    status: Unsolvability
    certificate: Certificate | None = None
    witness: Plan | None = None


def prove_unsolvable(task: GroundTask, budget: Budget | None = None) -> UnsolvabilityResult:
    budget = budget or Budget()
    reach = relaxed_reachable(task, task.init)
    if reach & task.goal != task.goal:
        missing = tuple(task.sorted_atoms(task.goal & ~reach))
        return UnsolvabilityResult(Unsolvability.PROVEN_UNSOLVABLE, Certificate("relaxation", missing))
    # exhaustive breadth-first exploration of the reachable state space
    parents: dict[int, tuple[int, GroundAction] | None] = {task.init: None}
    frontier = deque([task.init])
    explored = 0
    while frontier:
        state = frontier.popleft()
        if task.satisfies_goal(state):
            return UnsolvabilityResult(Unsolvability.SOLVABLE, witness=_extract(parents, state))
        explored += 1
        if explored > budget.max_expansions:
            return UnsolvabilityResult(Unsolvability.UNKNOWN)
        for a, nxt in _successors(task, state):
            if nxt not in parents:
                parents[nxt] = (state, a)
                frontier.append(nxt)
    return UnsolvabilityResult(Unsolvability.PROVEN_UNSOLVABLE, Certificate("exhaustive", states_explored=explored))
