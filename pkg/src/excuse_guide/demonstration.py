"""Segmented demonstration traces and operator learning from them.

Operators are learned with the nodes-of-interest rule: every fact that
mentions an object the demonstrator touched becomes a precondition, whether
or not the step changed it.  Effects are the changed facts about touched
objects.
"""
from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

from .excuses import Excuse, excuse_target
from .pddl import (ROOT_TYPE, ActionSchema, Atom, PDDLError, PlanningDomain, PlanningProblem,
                   PredicateDecl, parse_atom)
from .planning import Budget, apply, ground, solve

logger = logging.getLogger(__name__)

IDLE_LABELS = frozenset({"idle"})


class TraceError(ValueError):
    pass


class MergeConflict(ValueError):
    pass


class HumanUnreachableTarget(RuntimeError):
    pass


@dataclass(frozen=True)
class TraceStep:
    label: str
    touched: tuple[str, ...]
    pre: frozenset[Atom]
    post: frozenset[Atom]

    @property
    def idle(self) -> bool:
        return self.label in IDLE_LABELS or self.pre == self.post

    @property
    def adds(self) -> frozenset[Atom]:
        return self.post - self.pre

    @property
    def dels(self) -> frozenset[Atom]:
        return self.pre - self.post


@dataclass(frozen=True)
class DemonstrationTrace:
    initial: frozenset[Atom]
    steps: tuple[TraceStep, ...] = ()
    provenance: str = "simulated"  # interactive | replay-file | simulated

    def __post_init__(self):
        state = self.initial
        for i, step in enumerate(self.steps):
            if step.pre != state:
                raise TraceError(f"broken state chain at step {i} ({step.label})")
            if not step.idle and not step.touched:
                raise TraceError(f"step {i} ({step.label}) changes the state but touches no object")
            state = step.post

    @property
    def final(self) -> frozenset[Atom]:
        return self.steps[-1].post if self.steps else self.initial

    @property
    def active_steps(self) -> list[TraceStep]:
        return [s for s in self.steps if not s.idle]

    def __len__(self) -> int:
        """Demonstration size: non-idle steps."""
        return len(self.active_steps)

    def prefix(self, n: int) -> "DemonstrationTrace":
        return DemonstrationTrace(self.initial, self.steps[:n], self.provenance)


# ---------------------------------------------------------------- trace files


def _atom_list(values, where: str) -> list[Atom]:
    if not isinstance(values, list):
        raise TraceError(f"{where}: expected a list of atoms")
    try:
        return [parse_atom(v) for v in values]
    except (PDDLError, TypeError) as exc:
        raise TraceError(f"{where}: {exc}") from None


def read_trace(text: str, provenance: str = "replay-file") -> DemonstrationTrace:
    """Read a line-oriented JSON trace (header record, then one record per step)."""
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append((lineno, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {lineno}: {exc.msg}") from None
    if not records or "init" not in records[0][1]:
        raise TraceError("trace must start with a header record {\"init\": [...]}")
    state = frozenset(_atom_list(records[0][1]["init"], "header"))
    initial = state
    steps = []
    for lineno, rec in records[1:]:
        where = f"line {lineno}"
        if rec.get("parallel") or isinstance(rec.get("label"), list):
            raise TraceError(f"{where}: parallel hand activities are not supported; "
                             "segment the demonstration into one activity at a time")
        label = rec.get("label")
        if not isinstance(label, str) or not label:
            raise TraceError(f"{where}: missing step label")
        touched = rec.get("touched", [])
        if not isinstance(touched, list) or not all(isinstance(t, str) for t in touched):
            raise TraceError(f"{where}: 'touched' must be a list of object names")
        adds = frozenset(_atom_list(rec.get("adds", []), where))
        dels = frozenset(_atom_list(rec.get("dels", []), where))
        if adds & dels:
            raise TraceError(f"{where}: atoms both added and deleted")
        post = (state - dels) | adds
        steps.append(TraceStep(label.lower(), tuple(t.lower() for t in touched), state, post))
        state = post
    return DemonstrationTrace(initial, tuple(steps), provenance)


def write_trace(trace: DemonstrationTrace) -> str:
    lines = [json.dumps({"init": [str(a) for a in sorted(trace.initial)]})]
    for s in trace.steps:
        lines.append(json.dumps({
            "label": s.label,
            "touched": list(s.touched),
            "adds": [str(a) for a in sorted(s.adds)],
            "dels": [str(a) for a in sorted(s.dels)],
        }))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- embodiment mapping


@dataclass(frozen=True)
class MappingEntry:
    human: str
    robot: str
    param_order: tuple[int, ...] | None = None


@dataclass(frozen=True)
class EmbodimentMapping:
    entries: tuple[MappingEntry, ...] = ()

    def __post_init__(self):
        humans = [e.human for e in self.entries]
        robots = [e.robot for e in self.entries]
        if len(set(humans)) != len(humans):
            raise ValueError("embodiment mapping lists a human label twice")
        if len(set(robots)) != len(robots):
            raise ValueError("embodiment mapping is not injective")

    @classmethod
    def identity(cls) -> "EmbodimentMapping":
        return cls()

    def lookup(self, label: str) -> MappingEntry | None:
        for e in self.entries:
            if e.human == label:
                return e
        return None

    @classmethod
    def from_json(cls, text: str) -> "EmbodimentMapping":
        text = text.strip()
        if not text:
            return cls()
        if text.startswith("["):
            records = json.loads(text)
        else:
            records = [json.loads(line) for line in text.splitlines() if line.strip()]
        entries = []
        for r in records:
            order = r.get("param_order")
            entries.append(MappingEntry(r["human"].lower(), r["robot"].lower(),
                                        tuple(order) if order is not None else None))
        return cls(tuple(entries))


# ---------------------------------------------------------------- learning


@dataclass(frozen=True)
class LearnedOperator:
    schema: ActionSchema
    label: str  # demonstrated label; schema.name may carry a -N variant suffix
    steps: tuple[int, ...]
    bindings: tuple[tuple[tuple[str, str], ...], ...]  # per step: (parameter, object) pairs

    @property
    def suffix(self) -> str:
        return self.schema.name[len(self.label):]


def instantiate(schema: ActionSchema, binding: Mapping[str, str]) -> tuple[frozenset, frozenset, frozenset]:
    sub = dict(binding)
    return (frozenset(a.substitute(sub) for a in schema.pre),
            frozenset(a.substitute(sub) for a in schema.add),
            frozenset(a.substitute(sub) for a in schema.delete))


def replays(op: LearnedOperator, trace: DemonstrationTrace) -> bool:
    """Does every contributing instance map its recorded pre-state onto its post-state?"""
    for idx, binding in zip(op.steps, op.bindings):
        step = trace.steps[idx]
        pre, add, dele = instantiate(op.schema, dict(binding))
        if not pre <= step.pre or (step.pre - dele) | add != step.post:
            return False
    return True


def lift_step(step: TraceStep, object_types: Mapping[str, str]) -> tuple[ActionSchema, dict[str, str]]:
    """Lift one step into a schema; returns the schema and its parameter binding."""
    touched = list(dict.fromkeys(step.touched))
    for o in touched:
        if o not in object_types:
            raise TraceError(f"step {step.label}: touched object {o!r} is not in the problem")
    focus = set(touched)

    def relevant(a: Atom) -> bool:
        return any(x in focus for x in a.args)

    pre = sorted(a for a in step.pre if relevant(a))
    add = sorted(a for a in step.adds if relevant(a))
    dele = sorted(a for a in step.dels if relevant(a))
    ignored = [a for a in step.adds | step.dels if not relevant(a)]
    if ignored:
        logger.warning("step %s changes facts about untouched objects, ignored: %s",
                       step.label, ", ".join(map(str, sorted(ignored))))
    order = list(touched)
    for a in itertools.chain(pre, add, dele):
        for x in a.args:
            if x not in object_types:
                raise TraceError(f"step {step.label}: atom {a} references unknown object {x!r}")
            if x not in order:
                order.append(x)
    names: dict[str, str] = {}
    counts: dict[str, int] = {}
    for o in order:
        t = object_types[o]
        counts[t] = counts.get(t, 0) + 1
        names[o] = f"?{t}" if counts[t] == 1 else f"?{t}{counts[t]}"
    schema = ActionSchema(
        name=step.label,
        params=tuple((names[o], object_types[o]) for o in order),
        pre=frozenset(a.substitute(names) for a in pre),
        add=frozenset(a.substitute(names) for a in add),
        delete=frozenset(a.substitute(names) for a in dele),
    )
    return schema, {names[o]: o for o in order}


def _check_vocabulary(trace: DemonstrationTrace, domain: PlanningDomain, object_types: Mapping[str, str]) -> None:
    preds = {p.name: p for p in domain.predicates}
    seen: set[Atom] = set(trace.initial)
    for s in trace.steps:
        seen |= s.post
    for a in seen:
        decl = preds.get(a.predicate)
        if decl is None:
            raise TraceError(f"atom {a} uses predicate {a.predicate!r} unknown to domain {domain.name!r}")
        if decl.arity != len(a.args):
            raise TraceError(f"atom {a} has arity {len(a.args)}, expected {decl.arity}")
        for x, t in zip(a.args, decl.signature):
            if x not in object_types:
                raise TraceError(f"atom {a} references object {x!r} absent from the problem")
            if not domain.is_subtype(object_types[x], t):
                raise TraceError(f"atom {a}: {x} is not a {t}")


def learn_operators(trace: DemonstrationTrace, domain: PlanningDomain,
                    problem: PlanningProblem) -> list[LearnedOperator]:
    object_types = problem.object_types()
    _check_vocabulary(trace, domain, object_types)
    ops: list[LearnedOperator] = []
    for idx, step in enumerate(trace.steps):
        if step.idle:
            continue
        schema, binding = lift_step(step, object_types)
        variants = [i for i, op in enumerate(ops) if op.label == step.label]
        for i in variants:
            if _same_body(ops[i].schema, schema):
                op = ops[i]
                ops[i] = LearnedOperator(op.schema, op.label, op.steps + (idx,),
                                         op.bindings + (tuple(binding.items()),))
                break
        else:
            name = step.label if not variants else f"{step.label}-{len(variants) + 1}"
            schema = ActionSchema(name, schema.params, schema.pre, schema.add, schema.delete, schema.cost)
            ops.append(LearnedOperator(schema, step.label, (idx,), (tuple(binding.items()),)))
    return ops


def _same_body(a: ActionSchema, b: ActionSchema) -> bool:
    return (a.params, a.pre, a.add, a.delete, a.cost) == (b.params, b.pre, b.add, b.delete, b.cost)


# ---------------------------------------------------------------- structural comparison


def _renamings(src: ActionSchema, dst: ActionSchema, exact: bool, is_subtype=None):
    """Injective maps from src parameters to dst parameters with compatible types."""
    if exact and len(src.params) != len(dst.params):
        return
    if len(src.params) > len(dst.params):
        return
    for combo in itertools.permutations(range(len(dst.params)), len(src.params)):
        ok = True
        for (sv, st), j in zip(src.params, combo):
            dt = dst.params[j][1]
            if exact or is_subtype is None:
                if st != dt:
                    ok = False
                    break
            elif not is_subtype(dt, st):
                ok = False
                break
        if ok:
            yield {sv: dst.params[j][0] for (sv, _), j in zip(src.params, combo)}


def schemas_equivalent(a: ActionSchema, b: ActionSchema) -> bool:
    """Equal up to a renaming of parameters (names of the actions are ignored)."""
    if a.cost != b.cost or len(a.pre) != len(b.pre) or len(a.add) != len(b.add) or len(a.delete) != len(b.delete):
        return False
    for m in _renamings(a, b, exact=True):
        if ({x.substitute(m) for x in a.pre} == b.pre and {x.substitute(m) for x in a.add} == b.add
                and {x.substitute(m) for x in a.delete} == b.delete):
            return True
    return False


def explained_by(learned: ActionSchema, known: ActionSchema, domain: PlanningDomain | None = None) -> bool:
    """Is ``learned`` an over-specialised copy of ``known``?

    True when some renaming of ``known``'s parameters reproduces the learned
    effects exactly and its preconditions are among the learned ones.
    """
    if len(known.add) != len(learned.add) or len(known.delete) != len(learned.delete):
        return False
    sub = domain.is_subtype if domain is not None else None
    for m in _renamings(known, learned, exact=False, is_subtype=sub):
        if ({x.substitute(m) for x in known.add} == learned.add
                and {x.substitute(m) for x in known.delete} == learned.delete
                and {x.substitute(m) for x in known.pre} <= learned.pre):
            return True
    return False


def is_known(schema: ActionSchema, robot: PlanningDomain) -> bool:
    return any(explained_by(schema, r, robot) for r in robot.actions)


# ---------------------------------------------------------------- embodiment + merging


def map_embodiment(ops: Sequence[LearnedOperator], mapping: EmbodimentMapping | None = None,
                   robot: PlanningDomain | None = None) -> list[ActionSchema]:
    mapping = mapping or EmbodimentMapping.identity()
    out: list[ActionSchema] = []
    for op in ops:
        s = op.schema
        entry = mapping.lookup(op.label)
        if entry is not None:
            params = s.params
            if entry.param_order is not None:
                if sorted(entry.param_order) != list(range(len(params))):
                    raise MergeConflict(f"param_order {list(entry.param_order)} does not permute "
                                        f"the {len(params)} parameters of {s.name!r}")
                params = tuple(params[i] for i in entry.param_order)
            s = ActionSchema(entry.robot + op.suffix, params, s.pre, s.add, s.delete, s.cost)
        for prev in out:
            if prev.name == s.name and not schemas_equivalent(prev, s):
                raise MergeConflict(f"two demonstrated actions map to {s.name!r} with different structure")
        if robot is not None:
            for r in robot.actions:
                if r.name == s.name and not schemas_equivalent(r, s):
                    raise MergeConflict(f"mapped action {s.name!r} clashes with a different robot action")
        if not any(prev.name == s.name for prev in out):
            out.append(s)
    return out


def merge_domains(robot: PlanningDomain, learned: Sequence[ActionSchema],
                  notes: list[str] | None = None) -> PlanningDomain:
    """Add learned schemas to the robot domain, keeping its own schemas verbatim."""
    notes = notes if notes is not None else []
    types = list(robot.types)
    known_types = {t for t, _ in types} | {ROOT_TYPE}
    predicates = list(robot.predicates)
    pred_names = {p.name: p for p in predicates}
    actions = list(robot.actions)
    requirements = list(robot.requirements)
    for schema in learned:
        var_types = dict(schema.params)
        for _, t in schema.params:
            if t not in known_types:
                types.append((t, ROOT_TYPE))
                known_types.add(t)
                notes.append(f"added type {t}")
        if any(t != ROOT_TYPE for _, t in schema.params) and ":typing" not in requirements:
            requirements.append(":typing")
        for a in schema.pre | schema.add | schema.delete:
            if a.predicate not in pred_names:
                decl = PredicateDecl(a.predicate, tuple((f"?x{i}", var_types[v]) for i, v in enumerate(a.args)))
                predicates.append(decl)
                pred_names[a.predicate] = decl
                notes.append(f"added predicate {a.predicate}")
        if any(schemas_equivalent(schema, a) for a in actions):
            notes.append(f"dropped {schema.name}: duplicate of an existing action")
            continue
        name = schema.name
        taken = {a.name for a in actions}
        if name in taken:
            k = 2
            while f"{schema.name}-{k}" in taken:
                k += 1
            name = f"{schema.name}-{k}"
            notes.append(f"renamed learned {schema.name} to {name}: name taken by a different action")
        actions.append(ActionSchema(name, schema.params, schema.pre, schema.add, schema.delete, schema.cost))
    if any(a.cost != 1 for a in actions) and ":action-costs" not in requirements:
        requirements.append(":action-costs")
    return PlanningDomain(robot.name, tuple(requirements), tuple(types), tuple(predicates),
                          tuple(actions), robot.mutex_pairs)


# ---------------------------------------------------------------- simulated demonstrator


def execute_plan(task, plan, provenance: str = "simulated") -> DemonstrationTrace:
    state = task.init
    steps = []
    for a in plan.steps:
        nxt = apply(state, a)
        if nxt is None:
            raise TraceError(f"plan step {a.label} is not applicable")
        steps.append(TraceStep(a.name, a.args, task.atoms_of(state), task.atoms_of(nxt)))
        state = nxt
    return DemonstrationTrace(task.atoms_of(task.init), tuple(steps), provenance)


def simulate_demonstrator(human: PlanningDomain, problem: PlanningProblem,
                          target: Excuse | None = None, budget: Budget | None = None) -> DemonstrationTrace:
    """Plan optimally in the human domain toward the goal (``target=None``) or an excuse."""
    task = ground(human, problem)
    if target is not None:
        task = excuse_target(task, target)
        if task is None:
            raise HumanUnreachableTarget("excuse mentions facts outside the human domain")
    result = solve(task, "optimal", budget)
    if not result.solved:
        what = "excuse state" if target is not None else "goal"
        raise HumanUnreachableTarget(f"the human domain cannot reach the {what} ({result.status.value})")
    return execute_plan(task, result.plan)
