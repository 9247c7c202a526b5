"""Command-line front end.

Exit codes: 0 success (true, reachable, passed), 1 definite negative,
2 unknown or truncated, 3 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from . import corpus
from .logic import LogicError, fired_contracts, parse_formula, parse_theory, render, theory_of, entails
from .lts import BoundExceeded, bisim_probe, correspondence_check, random_program, top_successors
from .reduction import NO, YES, Bounds, explore, has_agent, has_constraint, reaches, run, successors, trace_json
from .syntax import ProcessError, Program, parse_program, to_normal_form

OK, NEGATIVE, UNKNOWN, USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    semantics: str = "reduction"
    bounds: Bounds = Bounds()
    seed: int = 0
    output: str = "text"

    def step(self, defs):
        if self.semantics == "lts":
            return lambda nf: top_successors(nf, defs)
        return lambda nf: successors(nf, defs)

    def ordered_step(self, defs):
        """Successors in a seed-dependent order; the set is unchanged."""
        base = self.step(defs)
        rng = random.Random(self.seed)

        def step(nf):
            out = base(nf)
            if self.seed:
                rng.shuffle(out)
            return out

        return step


def _config(args) -> RunConfig:
    return RunConfig(args.semantics, Bounds(args.max_states, args.max_depth), args.seed, args.format)


def load_program(ref: str) -> Program:
    """A file path, ``-`` for stdin, or the name of a corpus entry."""
    if ref == "-":
        text = sys.stdin.read()
    elif Path(ref).exists():
        text = Path(ref).read_text()
    elif ref in corpus.entries():
        text = corpus.get(ref).text
    else:
        raise UsageError(f"{ref}: no such file or corpus entry")
    prog = parse_program(text)
    prog.defs.validate(prog.main)
    return prog


def _emit(config: RunConfig, text: str, payload) -> None:
    if config.output == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


# ---------------------------------------------------------------------------
# Commands


def cmd_entail(args) -> int:
    theory_text = Path(args.theory).read_text() if args.theory != "-" else sys.stdin.read()
    theory = theory_of(parse_theory(theory_text))
    goal = parse_formula(args.goal)
    verdict = entails(theory, goal)
    if args.format == "json":
        payload = {"goal": render(goal), "entailed": verdict}
        if args.explain:
            payload["fired"] = [str(c) for c in fired_contracts(theory)]
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print("true" if verdict else "false")
        if args.explain:
            for c in fired_contracts(theory):
                print(f"  fired: {c}")
    return OK if verdict else NEGATIVE


def cmd_run(args) -> int:
    config = _config(args)
    prog = load_program(args.program)
    root = to_normal_form(prog.main, prog.defs)
    trace = run(root, prog.defs, seed=config.seed, max_steps=args.max_steps, step=config.step(prog.defs))
    truncated = len(trace) == args.max_steps and bool(config.step(prog.defs)(trace[-1][1]))
    if config.output == "json":
        print(trace_json(root, trace))
    else:
        print(root.key)
        for label, nf in trace:
            print(f"--{_label(label)['summary']}--> {nf.key}")
        if truncated:
            print(f"(stopped after {args.max_steps} steps)")
    return UNKNOWN if truncated else OK


def _predicate(args):
    if bool(args.reach_agent) == bool(args.reach_constraint):
        raise UsageError("give exactly one of --reach-agent and --reach-constraint")
    if args.reach_agent:
        return has_agent(args.reach_agent), f"agent {args.reach_agent}"
    f = parse_formula(args.reach_constraint)
    return has_constraint(f), f"constraint {render(f)}"


def cmd_check(args) -> int:
    config = _config(args)
    prog = load_program(args.program)
    predicate, what = _predicate(args)
    res = reaches(prog.main, prog.defs, predicate, config.bounds, config.step(prog.defs))
    word = {YES: "reachable", NO: "unreachable"}.get(res.verdict, "unknown")
    payload = {
        "target": what,
        "verdict": word,
        "states": res.states,
        "trace": [{**_label(label), "state": key} for label, key in res.trace],
    }
    lines = [f"{word} ({what}, {res.states} states)"]
    lines += [f"  --{_label(label).get('summary')}--> {key}" for label, key in res.trace]
    _emit(config, "\n".join(lines), payload)
    return {YES: OK, NO: NEGATIVE}.get(res.verdict, UNKNOWN)


def _label(label) -> dict:
    if hasattr(label, "to_json"):
        return {**label.to_json(), "summary": label.summary()}
    return {"action": str(label), "summary": str(label)}


def cmd_explore(args) -> int:
    config = _config(args)
    prog = load_program(args.program)
    g = explore(prog.main, prog.defs, config.bounds, config.ordered_step(prog.defs))
    dot = g.to_dot()
    if args.dot_out:
        Path(args.dot_out).write_text(dot + "\n")
    if config.output == "dot":
        print(dot)
    elif config.output == "json":
        print(json.dumps(g.to_json(), indent=2, sort_keys=True))
    else:
        print(f"{len(g.states)} states, {len(g.edges)} transitions{' (truncated)' if g.truncated else ''}")
        for key in g.states:
            print(f"  [{g.depth[key]}] {key}")
    return UNKNOWN if g.truncated else OK


def cmd_correspond(args) -> int:
    config = _config(args)
    bounds = Bounds(args.max_states, args.max_depth)
    if args.random:
        rng = random.Random(config.seed)
        samples = [random_program(rng, size=args.size) for _ in range(args.random)]
    else:
        prog = load_program(args.program)
        samples = [(prog.defs, prog.main)]
    checked = failed = truncated = 0
    examples = []
    for defs, main in samples:
        try:
            report = correspondence_check(main, defs, bounds, strict=args.strict, mutate_fuse=args.mutate_fuse)
        except BoundExceeded:
            truncated += 1
            continue
        checked += report.states_checked
        truncated += report.truncated
        if not report.passed:
            failed += 1
            examples.append(report.counterexamples[0])
    verdict = "fail" if failed else ("unknown" if truncated and args.strict else "pass")
    payload = {
        "verdict": verdict,
        "programs": len(samples),
        "states_checked": checked,
        "failed": failed,
        "truncated": truncated,
        "counterexamples": examples[:5],
    }
    text = f"{verdict}: {len(samples)} program(s), {checked} states, {failed} failing, {truncated} truncated"
    for ex in examples[:3]:
        text += f"\n  at {ex['state']}\n    reduction only: {ex['reduction_only']}\n    labelled only: {ex['labelled_only']}"
    _emit(config, text, payload)
    return {"pass": OK, "fail": NEGATIVE}.get(verdict, UNKNOWN)


def cmd_bisim(args) -> int:
    config = _config(args)
    left, right = load_program(args.left), load_program(args.right)
    defs = left.defs
    for const, d in right.defs.items():
        if const in defs and defs[const] != d:
            raise UsageError(f"the two programs define {const} differently")
        defs[const] = d
    try:
        report = bisim_probe(left.main, right.main, defs, depth=args.depth, max_pairs=config.bounds.max_states)
    except BoundExceeded as exc:
        _emit(config, f"unknown: {exc}", {"verdict": "unknown", "reason": str(exc)})
        return UNKNOWN
    verdict = "matched" if report.matched else "mismatch"
    text = f"{verdict} ({report.pairs} pairs, depth {args.depth})"
    if report.mismatch:
        text += "\n" + json.dumps(report.mismatch, indent=2)
    _emit(config, text, {"verdict": verdict, "pairs": report.pairs, "mismatch": report.mismatch})
    return OK if report.matched else NEGATIVE


def cmd_corpus(args) -> int:
    config = _config(args)
    if args.action == "list":
        payload = [{"name": e.name, "description": e.description} for e in corpus.entries().values()]
        _emit(config, "\n".join(f"{e.name:24} {e.description}" for e in corpus.entries().values()), payload)
        return OK
    if args.action == "show":
        for n in args.names:
            print(corpus.get(n).text, end="")
        return OK
    names = args.names or list(corpus.entries())
    worst = OK
    results = []
    for n in names:
        entry = corpus.get(n)
        prog = entry.program()
        for exp in entry.expectations:
            predicate = has_agent(exp.target) if exp.kind == "agent" else has_constraint(parse_formula(exp.target))
            res = reaches(prog.main, prog.defs, predicate, config.bounds, config.step(prog.defs))
            ok = res.verdict == exp.verdict
            if not ok:
                worst = max(worst, UNKNOWN if res.verdict not in (YES, NO) else NEGATIVE)
            results.append({"entry": n, "target": exp.target, "expected": exp.verdict, "got": res.verdict, "ok": ok})
    text = "\n".join(
        f"{'ok  ' if r['ok'] else 'FAIL'} {r['entry']:24} {r['target']:14} expected {r['expected']}, got {r['got']}"
        for r in results
    )
    _emit(config, text, results)
    return worst


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--semantics", choices=("reduction", "lts"), default="reduction")
    common.add_argument("--max-states", type=int, default=1000)
    common.add_argument("--max-depth", type=int, default=50)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("text", "json", "dot"), default="text")

    parser = argparse.ArgumentParser(prog="contractsync", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entail", parents=[common], help="decide entailment of a goal from a theory file")
    p.add_argument("theory", help="theory file: formulas ending with '.'; '-' for stdin")
    p.add_argument("goal")
    p.add_argument("--explain", action="store_true", help="list the contractual clauses that fired")
    p.set_defaults(func=cmd_entail)

    p = sub.add_parser("run", parents=[common], help="one seeded maximal run")
    p.add_argument("program", help="program file, '-' or corpus entry name")
    p.add_argument("--max-steps", type=int, default=100)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", parents=[common], help="exhaustive reachability of an agent or constraint")
    p.add_argument("program")
    p.add_argument("--reach-agent", metavar="NAME")
    p.add_argument("--reach-constraint", metavar="ATOM")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("explore", parents=[common], help="bounded state space")
    p.add_argument("program")
    p.add_argument("--dot-out", metavar="FILE")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("correspond", parents=[common], help="compare reduction and labelled successors")
    p.add_argument("program", nargs="?")
    p.add_argument("--random", type=int, metavar="N", help="check N seeded random programs instead")
    p.add_argument("--size", type=int, default=12)
    p.add_argument("--strict", action="store_true", help="report unknown when the bounds are hit")
    p.add_argument("--mutate-fuse", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_correspond, max_states=200)

    p = sub.add_parser("bisim", parents=[common], help="bounded bisimulation probe between two programs")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--depth", type=int, default=5)
    p.set_defaults(func=cmd_bisim, max_states=5000)

    p = sub.add_parser("corpus", parents=[common], help="built-in examples")
    p.add_argument("action", choices=("list", "show", "run"))
    p.add_argument("names", nargs="*")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if args.max_states < 1 or args.max_depth < 1:
        print("error: bounds must be positive", file=sys.stderr)
        return USAGE
    if args.command == "correspond" and not args.random and not args.program:
        print("error: give a program or --random N", file=sys.stderr)
        return USAGE
    try:
        return args.func(args)
    except (UsageError, KeyError, OSError, LogicError, ProcessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
