"""Reader and writer for the STRIPS + typing + action-costs subset of PDDL.

Identifiers are case-insensitive and normalised to lower case.  Besides the
standard sections, domains may carry ``(:mutex-pair p q)`` annotations that
declare two predicates with the same signature as complementary (exactly one
of ``p(x)`` / ``q(x)`` is meant to hold, e.g. ``open`` / ``closed``).
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, Union

logger = logging.getLogger(__name__)

ROOT_TYPE = "object"
SUPPORTED_REQUIREMENTS = (":strips", ":typing", ":action-costs")

_IDENT = re.compile(r"^[a-z][a-z0-9_-]*$")


class PDDLError(ValueError):
    """A lexical, syntactic or semantic problem in a PDDL document."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)


class Atom(NamedTuple):
    """A (lifted or ground) atom.  Tuple ordering is the canonical atom order."""

    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return f"({self.predicate})"
        return f"({self.predicate} {' '.join(self.args)})"

    def substitute(self, binding: dict[str, str]) -> "Atom":
        return Atom(self.predicate, tuple(binding.get(a, a) for a in self.args))


def parse_atom(text: str) -> Atom:
    """Parse a single atom such as ``(inside red-plate pink-drawer)``."""
    nodes = _read_sexprs(text)
    if len(nodes) != 1 or not isinstance(nodes[0], _List):
        raise PDDLError(f"expected exactly one atom, got {text!r}")
    node = nodes[0]
    if not node.items or any(not isinstance(i, _Tok) for i in node.items):
        raise PDDLError(f"malformed atom {text!r}", node.line, node.col)
    head, *args = node.items
    return Atom(head.text, tuple(a.text for a in args))


def sort_atoms(atoms: Iterable[Atom]) -> list[Atom]:
    return sorted(atoms)


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    params: tuple[tuple[str, str], ...]

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def signature(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.params)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[tuple[str, str], ...]
    pre: frozenset[Atom]
    add: frozenset[Atom]
    delete: frozenset[Atom]
    cost: int = 1

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.params)


@dataclass(frozen=True)
class PlanningDomain:
    name: str
    requirements: tuple[str, ...]
    types: tuple[tuple[str, str], ...]  # (type, parent), declaration order
    predicates: tuple[PredicateDecl, ...]
    actions: tuple[ActionSchema, ...]
    mutex_pairs: tuple[tuple[str, str], ...] = ()

    def type_parent(self) -> dict[str, str]:
        return dict(self.types)

    def predicate(self, name: str) -> PredicateDecl:
        for p in self.predicates:
            if p.name == name:
                return p
        raise KeyError(name)

    def action(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def is_subtype(self, sub: str, sup: str) -> bool:
        parents = self.type_parent()
        t: str | None = sub
        while t is not None:
            if t == sup:
                return True
            t = parents.get(t)
        return False


@dataclass(frozen=True)
class PlanningProblem:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]
    init: frozenset[Atom]
    goal: frozenset[Atom]
    metric: bool = False

    def object_types(self) -> dict[str, str]:
        return dict(self.objects)


# ---------------------------------------------------------------- s-expressions


@dataclass
class _Tok:
    text: str
    line: int
    col: int


@dataclass
class _List:
    items: list["_Node"] = field(default_factory=list)
    line: int = 0
    col: int = 0


_Node = Union[_Tok, _List]

_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s()]+")


def _read_sexprs(text: str) -> list[_Node]:
    stack: list[_List] = [_List()]
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        s = m.group()
        col = m.start() - line_start + 1
        if s[0].isspace() or s[0] == ";":
            nl = s.count("\n")
            if nl:
                line += nl
                line_start = m.start() + s.rfind("\n") + 1
            continue
        if s == "(":
            node = _List([], line, col)
            stack[-1].items.append(node)
            stack.append(node)
        elif s == ")":
            if len(stack) == 1:
                raise PDDLError("unbalanced ')'", line, col)
            stack.pop()
        else:
            if not re.fullmatch(r"[A-Za-z0-9_?:\-.=]+", s):
                raise PDDLError(f"unexpected character sequence {s!r}", line, col)
            stack[-1].items.append(_Tok(s.lower(), line, col))
    if len(stack) != 1:
        open_node = stack[-1]
        raise PDDLError("unbalanced '(' (missing ')')", open_node.line, open_node.col)
    return stack[0].items


def _pos(node: _Node) -> tuple[int, int]:
    return node.line, node.col


def _err(message: str, node: _Node) -> PDDLError:
    return PDDLError(message, *_pos(node))


def _ident(node: _Node, what: str) -> str:
    if not isinstance(node, _Tok):
        raise _err(f"expected {what}, found a list", node)
    if not _IDENT.match(node.text):
        raise _err(f"invalid {what} {node.text!r}", node)
    return node.text


def _variable(node: _Node) -> str:
    if not isinstance(node, _Tok) or not node.text.startswith("?") or not _IDENT.match(node.text[1:]):
        raise _err("expected a variable like ?x", node)
    return node.text


def _typed_list(items: Sequence[_Node], variables: bool, typing: bool) -> list[tuple[str, str, _Node]]:
    """Parse ``a b - t c`` into [(a, t, node), (b, t, node), (c, object, node)]."""
    out: list[tuple[str, str, _Node]] = []
    pending: list[tuple[str, _Node]] = []
    i = 0
    while i < len(items):
        node = items[i]
        if isinstance(node, _Tok) and node.text == "-":
            if not typing:
                raise _err("typed list requires the :typing requirement", node)
            if i + 1 >= len(items):
                raise _err("missing type after '-'", node)
            tnode = items[i + 1]
            if isinstance(tnode, _List):
                raise _err("'either' types are not supported", tnode)
            tname = _ident(tnode, "type name")
            out.extend((n, tname, nd) for n, nd in pending)
            pending = []
            i += 2
            continue
        name = _variable(node) if variables else _ident(node, "name")
        pending.append((name, node))
        i += 1
    out.extend((n, ROOT_TYPE, nd) for n, nd in pending)
    return out


def _expect_head(node: _Node, head: str) -> _List:
    if not isinstance(node, _List) or not node.items or not isinstance(node.items[0], _Tok) \
            or node.items[0].text != head:
        raise _err(f"expected ({head} ...)", node)
    return node


def _conjunction(node: _Node, where: str) -> list[_Node]:
    """Flatten ``(and a b)`` / a single literal into a list of literal nodes."""
    if not isinstance(node, _List):
        raise _err(f"expected a formula in {where}", node)
    if not node.items:
        return []
    head = node.items[0]
    if isinstance(head, _Tok) and head.text == "and":
        return list(node.items[1:])
    return [node]


_UNSUPPORTED_CONNECTIVES = {
    "or": "disjunctive conditions",
    "forall": "universal quantification",
    "exists": "existential quantification",
    "imply": "implications",
    "when": "conditional effects",
    "=": "equality atoms",
}


class _Scope:
    """Name resolution shared by the domain and problem builders."""

    def __init__(self, domain_types: dict[str, str], predicates: dict[str, PredicateDecl]):
        self.parents = domain_types
        self.predicates = predicates

    def is_subtype(self, sub: str, sup: str) -> bool:
        t: str | None = sub
        while t is not None:
            if t == sup:
                return True
            t = self.parents.get(t)
        return False

    def atom(self, node: _Node, terms: dict[str, str], where: str, variables: bool) -> Atom:
        if not isinstance(node, _List) or not node.items:
            raise _err(f"expected an atom in {where}", node)
        head = node.items[0]
        if not isinstance(head, _Tok):
            raise _err(f"expected a predicate name in {where}", head)
        if head.text == "not":
            raise _err(f"negative literals are not supported in {where}", head)
        if head.text in _UNSUPPORTED_CONNECTIVES:
            raise _err(f"unsupported construct: {_UNSUPPORTED_CONNECTIVES[head.text]} ({where})", head)
        name = _ident(head, "predicate name")
        decl = self.predicates.get(name)
        if decl is None:
            raise _err(f"undeclared predicate {name!r}", head)
        args = node.items[1:]
        if len(args) != decl.arity:
            raise _err(f"arity mismatch for predicate {name!r}: expected {decl.arity}, got {len(args)}", node)
        out = []
        for arg, (_, ptype) in zip(args, decl.params):
            if not isinstance(arg, _Tok):
                raise _err("nested terms are not supported", arg)
            term = arg.text
            if term.startswith("?") and not variables:
                raise _err(f"variable {term} not allowed in {where}", arg)
            if term not in terms:
                kind = "unbound variable" if term.startswith("?") else "unknown object"
                raise _err(f"{kind} {term!r} in {where}", arg)
            if not self.is_subtype(terms[term], ptype):
                raise _err(f"ill-typed argument {term!r} of {name!r}: {terms[term]} is not a {ptype}", arg)
            out.append(term)
        return Atom(name, tuple(out))


# ---------------------------------------------------------------- domains


def parse_domain(text: str) -> PlanningDomain:
    """Parse and validate a domain document."""
    nodes = _read_sexprs(text)
    if len(nodes) != 1:
        raise PDDLError("expected exactly one (define ...) form", *(_pos(nodes[1]) if len(nodes) > 1 else (1, 1)))
    root = _expect_head(nodes[0], "define")
    if len(root.items) < 2:
        raise _err("missing (domain NAME)", root)
    header = _expect_head(root.items[1], "domain")
    if len(header.items) != 2:
        raise _err("expected (domain NAME)", header)
    name = _ident(header.items[1], "domain name")

    sections: dict[str, list[_List]] = {}
    for sec in root.items[2:]:
        if not isinstance(sec, _List) or not sec.items or not isinstance(sec.items[0], _Tok):
            raise _err("expected a domain section", sec)
        sections.setdefault(sec.items[0].text, []).append(sec)

    known = {":requirements", ":types", ":predicates", ":functions", ":action", ":mutex-pair"}
    for key, secs in sections.items():
        if key not in known:
            raise _err(f"unsupported domain section {key}", secs[0])
        if key not in (":action", ":mutex-pair") and len(secs) > 1:
            raise _err(f"duplicate section {key}", secs[1])

    requirements: list[str] = []
    for sec in sections.get(":requirements", []):
        for r in sec.items[1:]:
            if not isinstance(r, _Tok) or not r.text.startswith(":"):
                raise _err("malformed requirement", r)
            if r.text not in SUPPORTED_REQUIREMENTS:
                raise _err(f"unsupported requirement {r.text}", r)
            if r.text not in requirements:
                requirements.append(r.text)
    if not requirements:
        requirements = [":strips"]
    typing = ":typing" in requirements
    costs = ":action-costs" in requirements

    types: list[tuple[str, str]] = []
    parents: dict[str, str] = {}
    for sec in sections.get(":types", []):
        if not typing:
            raise _err(":types requires the :typing requirement", sec)
        for tname, parent, node in _typed_list(sec.items[1:], variables=False, typing=True):
            if tname == ROOT_TYPE:
                raise _err(f"type {ROOT_TYPE!r} is built in", node)
            if tname in parents:
                raise _err(f"duplicate type {tname!r}", node)
            parents[tname] = parent
            types.append((tname, parent))
    for tname, parent in types:
        if parent != ROOT_TYPE and parent not in parents:
            raise PDDLError(f"undeclared type {parent!r} (parent of {tname!r})")
    # cycles would make the hierarchy a non-tree
    for tname in parents:
        seen = {tname}
        t = parents[tname]
        while t != ROOT_TYPE:
            if t in seen:
                raise PDDLError(f"cyclic type hierarchy at {tname!r}")
            seen.add(t)
            t = parents[t]

    def check_type(t: str, node: _Node) -> None:
        if t != ROOT_TYPE and t not in parents:
            raise _err(f"undeclared type {t!r}", node)

    predicates: dict[str, PredicateDecl] = {}
    for sec in sections.get(":predicates", []):
        for pnode in sec.items[1:]:
            if not isinstance(pnode, _List) or not pnode.items:
                raise _err("malformed predicate declaration", pnode)
            pname = _ident(pnode.items[0], "predicate name")
            if pname in predicates:
                raise _err(f"duplicate predicate {pname!r}", pnode)
            params = _typed_list(pnode.items[1:], variables=True, typing=typing)
            seen_vars = set()
            for var, t, vnode in params:
                check_type(t, vnode)
                if var in seen_vars:
                    raise _err(f"duplicate parameter {var} in predicate {pname!r}", vnode)
                seen_vars.add(var)
            predicates[pname] = PredicateDecl(pname, tuple((v, t) for v, t, _ in params))

    for sec in sections.get(":functions", []):
        if not costs:
            raise _err(":functions requires the :action-costs requirement", sec)
        body = sec.items[1:]
        ok = (len(body) in (1, 3) and isinstance(body[0], _List) and len(body[0].items) == 1
              and isinstance(body[0].items[0], _Tok) and body[0].items[0].text == "total-cost")
        if ok and len(body) == 3:
            ok = isinstance(body[1], _Tok) and body[1].text == "-" and isinstance(body[2], _Tok) \
                and body[2].text == "number"
        if not ok:
            raise _err("only the (total-cost) function is supported", sec)

    mutex_pairs: list[tuple[str, str]] = []
    for sec in sections.get(":mutex-pair", []):
        if len(sec.items) != 3:
            raise _err("expected (:mutex-pair PRED PRED)", sec)
        p = _ident(sec.items[1], "predicate name")
        q = _ident(sec.items[2], "predicate name")
        for n, node in ((p, sec.items[1]), (q, sec.items[2])):
            if n not in predicates:
                raise _err(f"undeclared predicate {n!r}", node)
        if p == q or predicates[p].signature != predicates[q].signature:
            raise _err(f"mutex pair {p!r}/{q!r} must name two predicates with the same signature", sec)
        mutex_pairs.append((p, q))

    scope = _Scope(parents, predicates)
    actions: list[ActionSchema] = []
    for sec in sections.get(":action", []):
        action = _parse_action(sec, scope, typing, costs, check_type)
        if any(a.name == action.name for a in actions):
            raise _err(f"duplicate action {action.name!r}", sec)
        actions.append(action)

    return PlanningDomain(
        name=name,
        requirements=tuple(requirements),
        types=tuple(types),
        predicates=tuple(predicates.values()),
        actions=tuple(actions),
        mutex_pairs=tuple(mutex_pairs),
    )


def _parse_action(sec: _List, scope: _Scope, typing: bool, costs: bool, check_type) -> ActionSchema:
    if len(sec.items) < 2:
        raise _err("missing action name", sec)
    name = _ident(sec.items[1], "action name")
    fields: dict[str, _Node] = {}
    rest = sec.items[2:]
    if len(rest) % 2:
        raise _err(f"malformed action {name!r}", sec)
    for key, value in zip(rest[::2], rest[1::2]):
        if not isinstance(key, _Tok) or key.text not in (":parameters", ":precondition", ":effect"):
            raise _err(f"unexpected field in action {name!r}", key)
        if key.text in fields:
            raise _err(f"duplicate field {key.text} in action {name!r}", key)
        fields[key.text] = value

    params: list[tuple[str, str]] = []
    if ":parameters" in fields:
        pnode = fields[":parameters"]
        if not isinstance(pnode, _List):
            raise _err("parameters must be a list", pnode)
        for var, t, vnode in _typed_list(pnode.items, variables=True, typing=typing):
            check_type(t, vnode)
            if any(var == v for v, _ in params):
                raise _err(f"duplicate parameter {var} in action {name!r}", vnode)
            params.append((var, t))
    terms = dict(params)
    where = f"action {name!r}"

    pre: set[Atom] = set()
    if ":precondition" in fields:
        for lit in _conjunction(fields[":precondition"], where):
            pre.add(scope.atom(lit, terms, f"precondition of {where}", variables=True))

    add: set[Atom] = set()
    delete: set[Atom] = set()
    cost: int | None = None
    if ":effect" in fields:
        for lit in _conjunction(fields[":effect"], where):
            head = lit.items[0] if isinstance(lit, _List) and lit.items else lit
            if isinstance(head, _Tok) and head.text == "not":
                if len(lit.items) != 2:
                    raise _err("malformed negative effect", lit)
                delete.add(scope.atom(lit.items[1], terms, f"effect of {where}", variables=True))
            elif isinstance(head, _Tok) and head.text == "increase":
                if not costs:
                    raise _err("cost effects require the :action-costs requirement", lit)
                cost = _cost_effect(lit, cost)
            else:
                add.add(scope.atom(lit, terms, f"effect of {where}", variables=True))
    return ActionSchema(name, tuple(params), frozenset(pre), frozenset(add), frozenset(delete),
                        1 if cost is None else cost)


def _cost_effect(lit: _List, previous: int | None) -> int:
    items = lit.items
    ok = (len(items) == 3 and isinstance(items[1], _List) and len(items[1].items) == 1
          and isinstance(items[1].items[0], _Tok) and items[1].items[0].text == "total-cost"
          and isinstance(items[2], _Tok) and items[2].text.isdigit())
    if not ok:
        raise _err("expected (increase (total-cost) N) with a nonnegative integer N", lit)
    if previous is not None:
        raise _err("duplicate cost effect", lit)
    return int(items[2].text)


# ---------------------------------------------------------------- problems


def parse_problem(text: str, domain: PlanningDomain) -> PlanningProblem:
    """Parse a problem against an already parsed domain."""
    nodes = _read_sexprs(text)
    if len(nodes) != 1:
        raise PDDLError("expected exactly one (define ...) form")
    root = _expect_head(nodes[0], "define")
    if len(root.items) < 2:
        raise _err("missing (problem NAME)", root)
    header = _expect_head(root.items[1], "problem")
    if len(header.items) != 2:
        raise _err("expected (problem NAME)", header)
    name = _ident(header.items[1], "problem name")

    sections: dict[str, _List] = {}
    for sec in root.items[2:]:
        if not isinstance(sec, _List) or not sec.items or not isinstance(sec.items[0], _Tok):
            raise _err("expected a problem section", sec)
        key = sec.items[0].text
        if key not in (":domain", ":objects", ":init", ":goal", ":metric"):
            raise _err(f"unsupported problem section {key}", sec)
        if key in sections:
            raise _err(f"duplicate section {key}", sec)
        sections[key] = sec

    if ":domain" not in sections or len(sections[":domain"].items) != 2:
        raise _err("missing (:domain NAME)", root)
    domain_name = _ident(sections[":domain"].items[1], "domain name")
    if domain_name != domain.name:
        logger.warning("problem %s names domain %r but is parsed against %r", name, domain_name, domain.name)

    typing = ":typing" in domain.requirements
    parents = domain.type_parent()
    objects: dict[str, str] = {}
    if ":objects" in sections:
        for oname, t, node in _typed_list(sections[":objects"].items[1:], variables=False, typing=typing):
            if t != ROOT_TYPE and t not in parents:
                raise _err(f"object {oname!r} has unknown type {t!r}", node)
            if oname in objects:
                raise _err(f"duplicate object {oname!r}", node)
            objects[oname] = t

    scope = _Scope(parents, {p.name: p for p in domain.predicates})
    init: set[Atom] = set()
    if ":init" in sections:
        for lit in sections[":init"].items[1:]:
            if isinstance(lit, _List) and lit.items and isinstance(lit.items[0], _Tok) and lit.items[0].text == "=":
                if ":action-costs" not in domain.requirements:
                    raise _err("numeric initialisation requires :action-costs", lit)
                continue  # (= (total-cost) 0)
            init.add(scope.atom(lit, objects, "init", variables=False))

    if ":goal" not in sections or len(sections[":goal"].items) != 2:
        raise _err("missing (:goal FORMULA)", root)
    goal = {scope.atom(lit, objects, "goal", variables=False)
            for lit in _conjunction(sections[":goal"].items[1], "goal")}
    if not goal:
        raise _err("empty goal", sections[":goal"])

    metric = False
    if ":metric" in sections:
        m = sections[":metric"]
        texts = [i.text if isinstance(i, _Tok) else "(" + " ".join(
            x.text for x in i.items if isinstance(x, _Tok)) + ")" for i in m.items[1:]]
        if texts != ["minimize", "(total-cost)"]:
            raise _err("only (:metric minimize (total-cost)) is supported", m)
        metric = True

    return PlanningProblem(name, domain_name, tuple(objects.items()), frozenset(init), frozenset(goal), metric)


# ---------------------------------------------------------------- writers


def _fmt_typed(pairs: Iterable[tuple[str, str]], typing: bool) -> str:
    pairs = list(pairs)
    if not typing:
        return " ".join(n for n, _ in pairs)
    chunks: list[str] = []
    group: list[str] = []
    current = None
    for n, t in pairs:
        if t != current and group:
            chunks.append(" ".join(group) + f" - {current}")
            group = []
        current = t
        group.append(n)
    if group:
        chunks.append(" ".join(group) + f" - {current}")
    return " ".join(chunks)


def _fmt_conj(atoms: Sequence[str]) -> str:
    if not atoms:
        return "(and)"
    return "(and " + " ".join(atoms) + ")"


def emit_domain(domain: PlanningDomain) -> str:
    """Render a domain as PDDL text that re-parses to an equal domain."""
    typing = ":typing" in domain.requirements
    lines = [f"(define (domain {domain.name})", f"  (:requirements {' '.join(domain.requirements)})"]
    if domain.types:
        lines.append(f"  (:types {_fmt_typed(domain.types, True)})")
    preds = " ".join(
        f"({p.name}{' ' + _fmt_typed(p.params, typing) if p.params else ''})" for p in domain.predicates)
    lines.append(f"  (:predicates {preds})")
    if ":action-costs" in domain.requirements:
        lines.append("  (:functions (total-cost) - number)")
    for p, q in domain.mutex_pairs:
        lines.append(f"  (:mutex-pair {p} {q})")
    costs = ":action-costs" in domain.requirements
    for a in domain.actions:
        lines.append(f"  (:action {a.name}")
        lines.append(f"   :parameters ({_fmt_typed(a.params, typing)})")
        lines.append(f"   :precondition {_fmt_conj([str(x) for x in sort_atoms(a.pre)])}")
        eff = [str(x) for x in sort_atoms(a.add)] + [f"(not {x})" for x in sort_atoms(a.delete)]
        if costs:
            eff.append(f"(increase (total-cost) {a.cost})")
        elif a.cost != 1:
            raise ValueError(f"action {a.name!r} has cost {a.cost} but the domain lacks :action-costs")
        lines.append(f"   :effect {_fmt_conj(eff)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def emit_problem(problem: PlanningProblem, typing: bool = True) -> str:
    lines = [f"(define (problem {problem.name})", f"  (:domain {problem.domain_name})"]
    if problem.objects:
        lines.append(f"  (:objects {_fmt_typed(problem.objects, typing)})")
    lines.append("  (:init")
    lines.extend(f"    {a}" for a in sort_atoms(problem.init))
    lines.append("  )")
    lines.append(f"  (:goal {_fmt_conj([str(a) for a in sort_atoms(problem.goal)])})")
    if problem.metric:
        lines.append("  (:metric minimize (total-cost))")
    lines.append(")")
    return "\n".join(lines) + "\n"
