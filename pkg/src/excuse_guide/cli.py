"""``excuse-guide`` command-line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import default_suite, run_benchmark
from .excuses import ExcuseSearchConfig, ExcuseStatus, enumerate_minimal_excuses, generate_excuse, \
    rank_excuses, render_excuse, NoExcuseWithinBound
from .pddl import PDDLError, parse_domain, parse_problem
from .planning import GroundingError, Unsolvability, format_plan, ground, prove_unsolvable, solve
from .session import (EXIT_INPUT_ERROR, EXIT_OK, EXIT_UNSOLVABLE, InputError, SessionConfig,
                      run_guided_session, run_unguided_session)

log = logging.getLogger("excuse_guide")


def _task_args(p: argparse.ArgumentParser, human: bool = True) -> None:
    p.add_argument("--robot-domain", type=Path, required=True)
    p.add_argument("--problem", type=Path, required=True)
    if human:
        p.add_argument("--human-domain", type=Path)


def _excuse_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-edit-size", type=int, default=4)
    p.add_argument("--enumerate-all", action="store_true",
                   help="enumerate every minimal excuse (ranked by human effort when a human domain is given)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="excuse-guide",
                                     description="Excuse-guided robot teaching from demonstration.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="plan for a task or prove it unsolvable")
    _task_args(p, human=False)
    p.add_argument("--satisficing", action="store_true")

    p = sub.add_parser("excuse", help="find a minimal excuse for an unsolvable task")
    _task_args(p)
    _excuse_args(p)

    for name, text in (("guide", "run a guided teaching session"),
                       ("teach", "run an unguided teaching session (demonstrate the whole task)")):
        p = sub.add_parser(name, help=text)
        _task_args(p)
        _excuse_args(p)
        p.add_argument("--mode", choices=["simulate", "replay", "interactive"], default="simulate")
        p.add_argument("--trace", type=Path, help="JSONL trace for replay mode")
        p.add_argument("--mapping", type=Path, help="embodiment mapping (JSON)")
        p.add_argument("--out", type=Path, help="directory for transcript, merged domain and report")

    p = sub.add_parser("bench", help="run a scenario suite")
    p.add_argument("suite", type=Path, nargs="?", default=None,
                   help="suite manifest (defaults to the bundled kitchen suite)")
    p.add_argument("--out", type=Path, help="write the JSON report here")
    return parser


def _load_task(args):
    robot = parse_domain(args.robot_domain.read_text(encoding="utf-8"))
    problem = parse_problem(args.problem.read_text(encoding="utf-8"), robot)
    return robot, problem, ground(robot, problem)


def cmd_solve(args) -> int:
    _, _, task = _load_task(args)
    result = solve(task, "satisficing" if args.satisficing else "optimal")
    if result.solved:
        sys.stdout.write(format_plan(result.plan))
        return EXIT_OK
    proof = prove_unsolvable(task)
    if proof.status is Unsolvability.PROVEN_UNSOLVABLE:
        print("unsolvable: " + proof.certificate.describe())
    else:
        print(f"no plan found within the search budget ({result.status.value})")
    return EXIT_UNSOLVABLE


def cmd_excuse(args) -> int:
    _, problem, task = _load_task(args)
    cfg = ExcuseSearchConfig(max_edit_size=args.max_edit_size, enumerate_all=args.enumerate_all)
    if args.enumerate_all:
        try:
            excuses = enumerate_minimal_excuses(task, cfg)
        except NoExcuseWithinBound as exc:
            print(str(exc))
            return EXIT_UNSOLVABLE
        out = []
        if args.human_domain:
            human = parse_domain(args.human_domain.read_text(encoding="utf-8"))
            for r in rank_excuses(excuses, ground(human, problem)):
                out.append({**r.excuse.to_dict(), "predicted_length": r.predicted_length})
        else:
            out = [e.to_dict() for e in excuses]
        print(json.dumps(out, indent=2, sort_keys=True))
        return EXIT_OK
    result = generate_excuse(task, cfg)
    if result.status is ExcuseStatus.TASK_ALREADY_SOLVABLE:
        print("task is already solvable")
        sys.stdout.write(format_plan(result.plan))
        return EXIT_OK
    if result.status is ExcuseStatus.NO_EXCUSE_WITHIN_BOUND:
        print(f"no excuse with at most {args.max_edit_size} edit moves")
        return EXIT_UNSOLVABLE
    for line in render_excuse(result.excuse) + render_excuse(result.excuse, "full-diff"):
        print(line)
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_session(args, guided: bool) -> int:
    cfg = SessionConfig(robot_domain=args.robot_domain, problem=args.problem, human_domain=args.human_domain,
                        mode=args.mode, trace=args.trace, mapping=args.mapping,
                        excuse=ExcuseSearchConfig(max_edit_size=args.max_edit_size,
                                                  enumerate_all=args.enumerate_all),
                        out=args.out)
    transcript = (run_guided_session if guided else run_unguided_session)(cfg)
    for e in transcript.events:
        if e["event"] == "excuse" and e.get("shown"):
            print("excuse: " + "; ".join(e["rendered"]))
            for line in e["banner"][len(e["rendered"]):]:
                print("  " + line)
        elif e["event"] == "plan":
            print("task is solvable; plan: " + " ".join(e["steps"]))
        elif e["event"] == "demonstration":
            print(f"demonstration: {e['length']} step(s)")
        elif e["event"] == "learned":
            print("learned: " + (", ".join(e["new"]) or "nothing new"))
        elif e["event"] == "post_demo":
            print("post-demo: " + ("solvable" if e["solvable"] else "unsolvable"))
        elif e["event"] == "metrics":
            m = e["misdirected"]
            if m is not None and m["status"] != "ok":
                print(f"{m['status']}: {m['diagnosis']}")
            if e["f1_savings"] is not None:
                print(f"f1 savings: {e['f1_savings']:.3f}")
        elif e["event"] == "error":
            print(f"error [{e['stage']}]: {e['message']}", file=sys.stderr)
    if args.out:
        print(f"wrote {args.out}")
    return transcript.exit_code


def cmd_bench(args) -> int:
    report = run_benchmark(args.suite or default_suite())
    sys.stdout.write(report.table())
    for m in report.mismatches:
        print("MISMATCH " + m)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK if report.ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "excuse":
            return cmd_excuse(args)
        if args.command in ("guide", "teach"):
            return cmd_session(args, guided=args.command == "guide")
        return cmd_bench(args)
    except (OSError, PDDLError, GroundingError, InputError, json.JSONDecodeError) as exc:
        print(f"error [input]: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
