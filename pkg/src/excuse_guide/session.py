"""Guided and unguided teaching sessions, end to end.

A session detects unsolvability, finds and shows the excuse, acquires a
demonstration (simulated, replayed from a file, or typed at a REPL), learns
operators from it, merges them into the robot domain and scores the result.
"""
from __future__ import annotations

import cmd
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from .demonstration import (DemonstrationTrace, EmbodimentMapping, HumanUnreachableTarget, TraceError,
                            TraceStep, is_known, learn_operators, map_embodiment, merge_domains, read_trace,
                            simulate_demonstrator, write_trace, MergeConflict)
from .excuses import (Excuse, ExcuseSearchConfig, ExcuseStatus, enumerate_minimal_excuses, generate_excuse,
                      rank_excuses, render_excuse, NoExcuseWithinBound)
from .metrics import (Misdirection, MetricsReport, check_misdirected, f1_savings, post_demo_solvability,
                      useful_fraction)
from .pddl import Atom, PDDLError, PlanningDomain, PlanningProblem, emit_domain, parse_atom, parse_domain, \
    parse_problem
from .planning import GroundTask, GroundingError, Unsolvability, apply, ground, prove_unsolvable, solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNSOLVABLE = 2
EXIT_MISDIRECTED = 3
EXIT_INPUT_ERROR = 4


class InputError(ValueError):
    pass


class AbortedSession(RuntimeError):
    pass


@dataclass
class SessionConfig:
    robot_domain: Path
    problem: Path
    human_domain: Path | None = None
    mode: str = "simulate"  # simulate | replay | interactive
    trace: Path | None = None
    mapping: Path | None = None
    excuse: ExcuseSearchConfig = field(default_factory=ExcuseSearchConfig)
    out: Path | None = None
    stdin: IO[str] | None = None
    stdout: IO[str] | None = None

    def __post_init__(self):
        if self.mode not in ("simulate", "replay", "interactive"):
            raise InputError(f"unknown mode {self.mode!r}")
        if self.mode == "simulate" and self.human_domain is None:
            raise InputError("simulate mode needs a human domain")
        if self.mode == "replay" and self.trace is None:
            raise InputError("replay mode needs a trace file")


@dataclass
class SessionTranscript:
    kind: str  # guided | unguided
    events: list[dict] = field(default_factory=list)
    timing: list[float] = field(default_factory=list)
    exit_code: int = EXIT_OK
    merged_domain: str | None = None
    report: MetricsReport | None = None
    _t0: float = field(default_factory=time.monotonic, repr=False)

    def log(self, event: str, **payload) -> dict:
        entry = {"event": event, **payload}
        self.events.append(entry)
        self.timing.append(round(time.monotonic() - self._t0, 6))
        return entry

    def find(self, event: str) -> dict | None:
        for e in self.events:
            if e["event"] == event:
                return e
        return None

    def to_dict(self, with_timing: bool = True) -> dict:
        out = {"kind": self.kind, "exit_code": self.exit_code, "events": self.events}
        if with_timing:
            out["timing"] = self.timing
        return out

    def to_json(self, with_timing: bool = True) -> str:
        return json.dumps(self.to_dict(with_timing), indent=2, sort_keys=True) + "\n"


def trace_from_transcript(data: dict) -> DemonstrationTrace:
    """Re-ingest the demonstration section of a transcript as a replay trace."""
    for e in data["events"]:
        if e["event"] == "demonstration":
            return read_trace("\n".join(e["trace"]), provenance="replay-file")
    raise TraceError("transcript has no demonstration")


# ---------------------------------------------------------------- REPL


class TeachingRepl(cmd.Cmd):
    """Line-oriented teaching console.

    With a human task, ``do`` only accepts legal actions of the human domain;
    without one (free-form mode) ``do (label obj ...) +(atom) -(atom)``
    applies the listed edits verbatim.
    """

    prompt = "teach> "

    def __init__(self, initial: frozenset[Atom], human_task: GroundTask | None = None,
                 excuse: Excuse | None = None, stdin=None, stdout=None):
        super().__init__(stdin=stdin, stdout=stdout)
        if stdin is not None:
            self.use_rawinput = False
        self.initial = initial
        self.human_task = human_task
        self.excuse = excuse
        self.steps: list[TraceStep] = []
        self.trace: DemonstrationTrace | None = None
        self.aborted = False

    def _say(self, text: str = "") -> None:
        self.stdout.write(text + "\n")

    @property
    def state(self) -> frozenset[Atom]:
        return self.steps[-1].post if self.steps else self.initial

    def preloop(self) -> None:
        self._banner()

    def _banner(self) -> None:
        if self.excuse is not None:
            self._say("Please show me how to achieve: " + "; ".join(render_excuse(self.excuse)))
            for line in render_excuse(self.excuse, "full-diff"):
                self._say("  " + line)
        self._say("commands: do (action args...), state, excuse, undo, done, abort")

    def emptyline(self) -> bool:
        return False

    def default(self, line: str) -> bool:
        self._say(f"unknown command: {line.split()[0] if line.split() else line}")
        return False

    def do_state(self, arg: str) -> None:
        for a in sorted(self.state):
            self._say(f"  {a}")

    def do_excuse(self, arg: str) -> None:
        if self.excuse is None:
            self._say("no excuse: demonstrate the full task")
        else:
            self._banner()

    def do_undo(self, arg: str) -> None:
        if not self.steps:
            self._say("nothing to undo")
            return
        step = self.steps.pop()
        self._say(f"undid {step.label}")

    def do_do(self, arg: str) -> None:
        arg = arg.strip()
        if not arg.startswith("("):
            self._say("usage: do (action arg ...)")
            return
        close = arg.find(")")
        try:
            head = parse_atom(arg[:close + 1])
        except PDDLError as exc:
            self._say(f"cannot parse action: {exc}")
            return
        rest = arg[close + 1:].strip()
        if self.human_task is not None:
            self._do_legal(head, rest)
        else:
            self._do_free(head, rest)

    def _do_legal(self, head: Atom, rest: str) -> None:
        task = self.human_task
        if rest:
            self._say("explicit edits are only accepted in free-form mode")
            return
        names = sorted({a.name for a in task.actions})
        if head.predicate not in names:
            self._say(f"unknown action {head.predicate!r}; available: {', '.join(names)}")
            return
        state = task.bits(self.state)
        try:
            action = task.find_action(head.predicate, head.args)
        except KeyError:
            # partial argument lists pick the one applicable action they fit
            fits = [a for a in task.actions if a.name == head.predicate and _subsequence(head.args, a.args)
                    and apply(state, a) is not None]
            if len(fits) != 1:
                self._say(f"no applicable action matches {head}" if not fits else
                          "ambiguous; candidates: " + ", ".join(a.label for a in fits))
                return
            action = fits[0]
        nxt = apply(state, action)
        if nxt is None:
            unmet = task.sorted_atoms(action.pre & ~state)
            self._say(f"illegal: {action.label} needs " + ", ".join(map(str, unmet)))
            return
        self.steps.append(TraceStep(action.name, action.args, self.state, task.atoms_of(nxt)))
        self._say(f"ok: {action.label}")

    def _do_free(self, head: Atom, rest: str) -> None:
        adds, dels = set(), set()
        tokens = rest
        while tokens:
            sign, tokens = tokens[0], tokens[1:].lstrip()
            end = tokens.find(")")
            if sign not in "+-" or not tokens.startswith("(") or end < 0:
                self._say("usage: do (label obj ...) +(atom) -(atom) ...")
                return
            try:
                atom = parse_atom(tokens[:end + 1])
            except PDDLError as exc:
                self._say(f"cannot parse atom: {exc}")
                return
            (adds if sign == "+" else dels).add(atom)
            tokens = tokens[end + 1:].strip()
        post = (self.state - dels) | adds
        self.steps.append(TraceStep(head.predicate, head.args, self.state, frozenset(post)))
        self._say(f"ok: {head}")

    def _excuse_achieved(self) -> bool:
        if self.excuse is None:
            return True
        return self.excuse.adds <= self.state and not (self.excuse.removes & self.state)

    def do_done(self, arg: str) -> bool:
        if not self._excuse_achieved():
            self.stdout.write("the excuse is not achieved yet; finish anyway? [y/N] ")
            self.stdout.flush()
            answer = self.stdin.readline() if not self.use_rawinput else input()
            if answer.strip().lower() not in ("y", "yes"):
                return False
        self.trace = DemonstrationTrace(self.initial, tuple(self.steps), "interactive")
        return True

    def do_abort(self, arg: str) -> bool:
        self.aborted = True
        return True

    def do_EOF(self, arg: str) -> bool:
        self.aborted = True
        return True


def _subsequence(short, long) -> bool:
    it = iter(long)
    return all(x in it for x in short)


def interactive_repl(initial: frozenset[Atom], human_task: GroundTask | None = None,
                     excuse: Excuse | None = None, stdin=None, stdout=None) -> DemonstrationTrace:
    repl = TeachingRepl(initial, human_task, excuse, stdin=stdin, stdout=stdout or sys.stdout)
    repl.cmdloop()
    if repl.aborted or repl.trace is None:
        raise AbortedSession("demonstration aborted")
    return repl.trace


# ---------------------------------------------------------------- pipeline


@dataclass
class _Inputs:
    robot: PlanningDomain
    human: PlanningDomain | None
    problem: PlanningProblem
    mapping: EmbodimentMapping


def _read(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load(cfg: SessionConfig) -> _Inputs:
    try:
        robot = parse_domain(_read(cfg.robot_domain))
        human = parse_domain(_read(cfg.human_domain)) if cfg.human_domain else None
        problem = parse_problem(_read(cfg.problem), robot)
        if human is not None:
            parse_problem(_read(cfg.problem), human)
        mapping = EmbodimentMapping.from_json(_read(cfg.mapping)) if cfg.mapping else EmbodimentMapping()
    except (PDDLError, ValueError, KeyError) as exc:
        raise InputError(str(exc)) from None
    return _Inputs(robot, human, problem, mapping)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _persist(cfg: SessionConfig, tr: SessionTranscript) -> None:
    if cfg.out is None:
        return
    out = Path(cfg.out)
    _atomic_write(out / "transcript.json", tr.to_json())
    if tr.merged_domain is not None:
        _atomic_write(out / "merged_domain.pddl", tr.merged_domain)
    if tr.report is not None:
        _atomic_write(out / "report.json", json.dumps(tr.report.to_dict(), indent=2, sort_keys=True) + "\n")
    demo = tr.find("demonstration")
    if demo is not None:
        _atomic_write(out / "trace.jsonl", "\n".join(demo["trace"]) + "\n")


def _fail(tr: SessionTranscript, stage: str, message: str, code: int) -> SessionTranscript:
    tr.log("error", stage=stage, message=message)
    tr.exit_code = code
    return tr


def run_guided_session(cfg: SessionConfig) -> SessionTranscript:
    return _run(cfg, guided=True)


def run_unguided_session(cfg: SessionConfig) -> SessionTranscript:
    return _run(cfg, guided=False)


def _run(cfg: SessionConfig, guided: bool) -> SessionTranscript:
    tr = SessionTranscript("guided" if guided else "unguided")
    try:
        _pipeline(cfg, tr, guided)
    except InputError as exc:
        _fail(tr, "input", str(exc), EXIT_INPUT_ERROR)
    except (TraceError, MergeConflict) as exc:
        _fail(tr, "demonstration", str(exc), EXIT_INPUT_ERROR)
    except HumanUnreachableTarget as exc:
        _fail(tr, "demonstration", str(exc), EXIT_INPUT_ERROR)
    except AbortedSession as exc:
        _fail(tr, "demonstration", str(exc), EXIT_UNSOLVABLE)
    except GroundingError as exc:
        _fail(tr, "grounding", str(exc), EXIT_INPUT_ERROR)
    _persist(cfg, tr)
    return tr


def _pipeline(cfg: SessionConfig, tr: SessionTranscript, guided: bool) -> None:
    inputs = _load(cfg)
    robot, human, problem = inputs.robot, inputs.human, inputs.problem
    tr.log("inputs", robot_domain=robot.name, human_domain=human.name if human else None,
           problem=problem.name, mode=cfg.mode)
    task = ground(robot, problem)
    verdict = prove_unsolvable(task, cfg.excuse.budget)
    if verdict.status is Unsolvability.SOLVABLE:
        plan = solve(task, "optimal", cfg.excuse.budget).plan or verdict.witness
        tr.log("unsolvability", verdict="solvable")
        tr.log("plan", cost=plan.cost, steps=[a.label for a in plan.steps])
        tr.exit_code = EXIT_OK
        return
    if verdict.status is Unsolvability.UNKNOWN:
        _fail(tr, "unsolvability", "search budget exhausted before solvability was decided", EXIT_UNSOLVABLE)
        return
    tr.log("unsolvability", verdict="unsolvable", certificate=verdict.certificate.describe())

    human_task = ground(human, problem) if human is not None else None
    excuse: Excuse | None = None
    if guided or human_task is not None:
        excuse = _find_excuse(cfg, tr, task, human_task, show=guided)
        if excuse is None and guided:
            tr.exit_code = EXIT_UNSOLVABLE
            return

    trace = _acquire(cfg, tr, inputs, task, human_task, excuse if guided else None)
    tr.log("demonstration", provenance=trace.provenance, length=len(trace),
           steps=[{"label": s.label, "touched": list(s.touched),
                   "adds": [str(a) for a in sorted(s.adds)],
                   "dels": [str(a) for a in sorted(s.dels)]} for s in trace.steps],
           trace=write_trace(trace).splitlines())

    vocabulary = human if human is not None else robot
    learned = learn_operators(trace, vocabulary, problem)
    mapped = map_embodiment(learned, inputs.mapping)
    new = [s for s in mapped if not is_known(s, robot)]
    tr.log("learned", operators=[{"name": op.schema.name, "steps": list(op.steps),
                                  "parameters": [f"{v} - {t}" for v, t in op.schema.params]} for op in learned],
           new=[s.name for s in new])
    notes: list[str] = []
    merged = merge_domains(robot, new, notes)
    tr.merged_domain = emit_domain(merged)
    tr.log("merge", actions=[a.name for a in merged.actions], notes=notes)

    post = post_demo_solvability(robot, new, problem, cfg.excuse.budget)
    tr.log("post_demo", **post.to_dict())

    report = MetricsReport(post_demo=post)
    report.demo_lengths["demo"] = len(trace)
    if trace.active_steps:
        report.useful_fraction = useful_fraction(trace, robot, problem, inputs.mapping)
    if guided and excuse is not None:
        report.misdirected = check_misdirected(task, excuse, trace.final, cfg.excuse.budget)
    if human_task is not None and excuse is not None:
        full = solve(human_task, "optimal", cfg.excuse.budget)
        remaining = solve(human_task.with_init(excuse.edited_state(human_task)), "optimal", cfg.excuse.budget)
        if full.solved and remaining.solved:
            report.demo_lengths["full"] = len(full.plan)
            report.demo_lengths["remaining"] = len(remaining.plan)
            report.f1_savings = f1_savings(len(full.plan), len(remaining.plan))
    tr.report = report
    tr.log("metrics", **report.to_dict())

    if report.misdirected is not None and report.misdirected.status is Misdirection.MISDIRECTED:
        tr.exit_code = EXIT_MISDIRECTED
    elif not post.solvable:
        tr.exit_code = EXIT_UNSOLVABLE
    else:
        tr.exit_code = EXIT_OK


def _find_excuse(cfg: SessionConfig, tr: SessionTranscript, task: GroundTask,
                 human_task: GroundTask | None, show: bool) -> Excuse | None:
    ranking = None
    if cfg.excuse.enumerate_all:
        try:
            candidates = enumerate_minimal_excuses(task, cfg.excuse)
        except NoExcuseWithinBound as exc:
            _fail(tr, "excuse", str(exc), EXIT_UNSOLVABLE)
            return None
        if human_task is not None:
            ranking = rank_excuses(candidates, human_task, cfg.excuse.budget)
            excuse = ranking[0].excuse
        else:
            excuse = candidates[0]
        result = None
    else:
        result = generate_excuse(task, cfg.excuse)
        if result.status is not ExcuseStatus.FOUND:
            _fail(tr, "excuse", f"no excuse with at most {cfg.excuse.max_edit_size} edit moves", EXIT_UNSOLVABLE)
            return None
        excuse = result.excuse
    payload = excuse.to_dict()
    payload["banner"] = render_excuse(excuse) + render_excuse(excuse, "full-diff")
    payload["shown"] = show
    if result is not None:
        payload["diagnostics"] = result.diagnostics.to_dict()
    if ranking is not None:
        payload["ranking"] = [{"rendered": r.excuse.to_dict()["rendered"], "predicted_length": r.predicted_length,
                               "reachable": r.reachable} for r in ranking]
    tr.log("excuse", **payload)
    return excuse


def _acquire(cfg: SessionConfig, tr: SessionTranscript, inputs: _Inputs, task: GroundTask,
             human_task: GroundTask | None, excuse: Excuse | None) -> DemonstrationTrace:
    if cfg.mode == "simulate":
        return simulate_demonstrator(inputs.human, inputs.problem, excuse, cfg.excuse.budget)
    if cfg.mode == "replay":
        trace = read_trace(_read(cfg.trace))
        if trace.initial != inputs.problem.init:
            raise TraceError("replayed trace does not start in the problem's initial state")
        return trace
    return interactive_repl(inputs.problem.init, human_task, excuse, stdin=cfg.stdin, stdout=cfg.stdout)
