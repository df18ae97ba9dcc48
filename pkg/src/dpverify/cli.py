"""Command-line batch verifier.

Subcommands: verify-matmul (the bundled row-distribution model), check (a
.dp model file), export (process graphs, state graphs, machine-readable
reports), grid (the CI sweep over small instance sizes).

Exit codes are a contract: 0 all checks pass, 1 some check failed, 2 the
exploration was truncated by a bound, 64 usage or parameter error, 65 the
model file did not parse.  Reports are deterministic: identical inputs give
byte-identical output, independent of the worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import dsl
from .explorer import (
    Bounds, ExplorationResult, InitialConditionUnsatisfiable, InvariantSpec,
    check_final_spec, check_invariants, explore, scoped_overlap_events,
)
from .matmul import (
    InvalidParams, MatmulParams, NUMERIC, SYMBOLIC, build_augmented,
    inputs_for, theorem1_suite,
)
from .semantics import DistributedProcess
from .terms import ConcreteRow, ModelError, TupleV

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_TRUNCATED = 2
EXIT_USAGE = 64
EXIT_PARSE = 65

WORKERS_ENV = "DPVERIFY_WORKERS"


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(EXIT_USAGE, "%s: error: %s" % (self.prog, message))


class SystemExit2(Exception):
    def __init__(self, code, message=""):
        super().__init__(message)
        self.code = code
        self.message = message


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def read_rational_matrix(path: str) -> tuple[tuple[Fraction, ...], ...]:
    """A plain grid: one row per line, whitespace-separated entries written
    as integers or p/q rationals."""
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append(tuple(Fraction(tok) for tok in line.split()))
        except (ValueError, ZeroDivisionError) as exc:
            raise SystemExit2(EXIT_USAGE, "%s: bad rational entry: %s"
                              % (path, exc))
    if not rows:
        raise SystemExit2(EXIT_USAGE, "%s: no matrix rows found" % path)
    return tuple(rows)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _transition_line(result: ExplorationResult, edge_index: int) -> str:
    src, proc, eidx, dst = result.edges[edge_index]
    process = result.dp.processes[proc]
    action = process.edges[eidx].action
    text = dsl.format_action(action) or "(empty)"
    return "s%d -%s-> s%d : %s" % (src, process.name, dst, text)


def _witness_lines(result: ExplorationResult, state: int) -> list[str]:
    path = result.path_to(state)
    if not path:
        return ["    (the initial state)"]
    return ["    " + _transition_line(result, e) for e in path]


@dataclass
class Verdict:
    failed: bool
    lines: list[str]


def describe_exploration(result: ExplorationResult) -> list[str]:
    lines = [
        "states: %d" % result.state_count(),
        "transitions: %d" % len(result.edges),
        "terminal states: %d" % len(result.terminals),
        "deadlock states: %d" % len(result.deadlocks),
        "cycle: %s" % ("found" if result.has_cycle else "none"),
        "truncated: %s" % ("yes (%s)" % result.bound_fired
                           if result.truncated else "no"),
    ]
    return lines


def describe_invariants(result: ExplorationResult, suite: list[InvariantSpec],
                        violations) -> Verdict:
    by_spec: dict[str, list] = {}
    for v in violations:
        by_spec.setdefault(v.spec_id, []).append(v)
    lines = ["invariants: %d checked, %d passed"
             % (len(suite), len(suite) - len(by_spec))]
    failed = False
    for spec in suite:
        hits = by_spec.get(spec.id, [])
        status = "pass" if not hits else "FAIL"
        lines.append("  [%2s] %s  %s" % (spec.id, status, spec.description))
        if hits:
            failed = True
            first = hits[0]
            lines.append("       violated at state %d (%d state%s in all)"
                         % (first.state, len(hits),
                            "" if len(hits) == 1 else "s"))
            lines.extend(_witness_lines(result, first.state))
    return Verdict(failed, lines)


def describe_deadlocks(result: ExplorationResult) -> Verdict:
    if not result.deadlocks:
        return Verdict(False, [])
    lines = []
    first = result.deadlocks[0]
    lines.append("deadlock witness (state %d, shortest path):" % first)
    lines.extend(_witness_lines(result, first))
    return Verdict(True, lines)


def describe_cycle(result: ExplorationResult) -> list[str]:
    w = result.cycle_witness
    if w is None:
        return []
    lines = ["cycle witness (lasso):"]
    for e in w.prefix:
        lines.append("    " + _transition_line(result, e))
    lines.append("    -- cycle --")
    for e in w.cycle:
        lines.append("    " + _transition_line(result, e))
    return lines


def describe_terminal_products(result: ExplorationResult) -> list[str]:
    """Numeric-mode extra: print the product rows found in terminal states."""
    lines = []
    for idx in result.terminals:
        binding = result.states[idx].binding
        c = binding.value_of("C")
        if not isinstance(c, TupleV) or not any(
                isinstance(x, ConcreteRow) for x in c.items):
            continue
        lines.append("terminal state %d product:" % idx)
        for i, row in enumerate(c.items, start=1):
            lines.append("    C[%d] = %s" % (i, dsl.format_value(row)))
    return lines


def report_dict(result: ExplorationResult, suite=None, violations=None,
                final=None) -> dict:
    out = {
        "states": result.state_count(),
        "transitions": len(result.edges),
        "initial": result.initial,
        "terminals": result.terminals,
        "deadlocks": result.deadlocks,
        "cycle": None if result.cycle_witness is None else {
            "prefix": list(result.cycle_witness.prefix),
            "cycle": list(result.cycle_witness.cycle),
        },
        "truncated": result.truncated,
        "bound": result.bound_fired,
        "overlap_events": [
            {"state": e.state, "process": e.process, "edge": e.edge,
             "detail": e.detail} for e in result.overlap_events],
    }
    if suite is not None:
        out["invariants"] = {
            spec.id: sorted(v.state for v in violations if v.spec_id == spec.id)
            for spec in suite}
    if final is not None:
        out["final_check"] = {"holds": final.holds, "failures": final.failures}
    return out


def _emit_report(text: str, path: Optional[str]):
    sys.stdout.write(text)
    if path:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# dot export
# ---------------------------------------------------------------------------

def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def dot_processes(dp: DistributedProcess) -> str:
    lines = ["digraph processes {", "  rankdir=LR;"]
    for proc in dp.processes:
        lines.append("  subgraph cluster_%s {" % proc.name)
        lines.append('    label="%s";' % _dot_escape(proc.name))
        for node in sorted(proc.nodes):
            attrs = ["shape=doublecircle" if not proc.out_edges(node)
                     else "shape=circle"]
            if node == proc.initial:
                attrs.append("penwidth=2")
            lines.append('    %s_%d [label="%d", %s];'
                         % (proc.name, node, node, ", ".join(attrs)))
        for e in proc.edges:
            label = dsl.format_action(e.action)
            lines.append('    %s_%d -> %s_%d [label="%s"];'
                         % (proc.name, e.src, proc.name, e.dst,
                            _dot_escape(label)))
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def dot_states(result: ExplorationResult) -> str:
    terminal = set(result.terminals)
    deadlock = set(result.deadlocks)
    lines = ["digraph states {"]
    for i in range(result.state_count()):
        attrs = []
        if i in terminal:
            attrs.append("shape=doublecircle")
        elif i in deadlock:
            attrs.append("shape=octagon")
            attrs.append("style=filled")
            attrs.append('fillcolor="#f4cccc"')
        else:
            attrs.append("shape=circle")
        if i == result.initial:
            attrs.append("penwidth=2")
        lines.append('  s%d [%s];' % (i, ", ".join(attrs)))
    for src, proc, eidx, dst in result.edges:
        name = result.dp.processes[proc].name
        lines.append('  s%d -> s%d [label="%s:%d"];' % (src, dst, name, eidx))
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _matmul_params(args) -> MatmulParams:
    if args.mode == NUMERIC:
        if not args.numeric_a or not args.numeric_b:
            raise SystemExit2(EXIT_USAGE,
                              "numeric mode needs --numeric-a and --numeric-b")
        a = read_rational_matrix(args.numeric_a)
        b = read_rational_matrix(args.numeric_b)
        try:
            return MatmulParams(args.n_rows, args.n_workers, NUMERIC, a, b)
        except InvalidParams as exc:
            raise SystemExit2(EXIT_USAGE, "bad parameters: %s" % exc)
    try:
        return MatmulParams(args.n_rows, args.n_workers)
    except InvalidParams as exc:
        raise SystemExit2(EXIT_USAGE, "bad parameters: %s" % exc)


def _bounds(args) -> Bounds:
    try:
        return Bounds(max_states=args.max_states, max_queue=args.max_queue)
    except ModelError as exc:
        raise SystemExit2(EXIT_USAGE, str(exc))


@dataclass
class MatmulOutcome:
    result: ExplorationResult
    suite: list
    violations: list
    final: Optional[object]

    def failed(self) -> bool:
        if self.violations or self.result.deadlocks or self.result.has_cycle:
            return True
        if self.final is not None and not self.final.holds:
            return True
        return False

    def exit_code(self) -> int:
        if self.failed():
            return EXIT_VIOLATION
        if self.result.truncated:
            return EXIT_TRUNCATED
        return EXIT_OK


def run_matmul(params: MatmulParams, bounds: Bounds,
               workers: int) -> MatmulOutcome:
    dp = build_augmented(params)
    result = explore(dp, inputs_for(params), bounds, workers)
    suite = theorem1_suite(params)
    violations = check_invariants(result, suite)
    result.invariant_violations = violations
    final = None if result.truncated else check_final_spec(result)
    return MatmulOutcome(result, suite, violations, final)


def matmul_report(params: MatmulParams, outcome: MatmulOutcome) -> str:
    lines = ["model: matmul (rows N=%d, workers n=%d, %s)"
             % (params.n_rows, params.n_workers, params.mode)]
    lines.extend(describe_exploration(outcome.result))
    scoped = len(scoped_overlap_events(outcome.result))
    lines.append("disjoint-union overlaps in scope: %d (drain-phase exempt: %d)"
                 % (scoped, len(outcome.result.overlap_events) - scoped))
    inv = describe_invariants(outcome.result, outcome.suite,
                              outcome.violations)
    lines.extend(inv.lines)
    dead = describe_deadlocks(outcome.result)
    lines.extend(dead.lines)
    lines.extend(describe_cycle(outcome.result))
    if outcome.final is not None:
        lines.append("final check (every terminal has C = A*B): %s"
                     % ("holds" if outcome.final.holds else "FAILS"))
        lines.extend("    " + f for f in outcome.final.failures)
    else:
        lines.append("final check (every terminal has C = A*B): skipped "
                     "(truncated)")
    if params.mode == NUMERIC:
        lines.extend(describe_terminal_products(outcome.result))
    code = outcome.exit_code()
    lines.append("verdict: %s" % ("PASS" if code == EXIT_OK else
                                  "TRUNCATED" if code == EXIT_TRUNCATED
                                  else "FAIL"))
    return "\n".join(lines) + "\n"


def cmd_verify_matmul(args) -> int:
    params = _matmul_params(args)
    try:
        outcome = run_matmul(params, _bounds(args), args.workers)
    except InitialConditionUnsatisfiable as exc:
        raise SystemExit2(EXIT_USAGE, "model error: %s" % exc)
    _emit_report(matmul_report(params, outcome), args.report)
    if args.dot:
        Path(args.dot).write_text(dot_states(outcome.result))
    return outcome.exit_code()


def _load_model(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SystemExit2(EXIT_USAGE, str(exc))
    compiled = dsl.compile_text(text)
    if not compiled.ok():
        for d in compiled.diagnostics:
            sys.stderr.write("%s:%s\n" % (path, d))
        raise SystemExit2(EXIT_PARSE, "%s: model did not compile" % path)
    model = compiled.model
    missing = [n for n in model.dp.input_types() if n not in model.inputs]
    if missing:
        raise SystemExit2(EXIT_USAGE,
                          "%s: parameters without default values: %s"
                          % (path, ", ".join(sorted(missing))))
    return model


def cmd_check(args) -> int:
    model = _load_model(args.file)
    try:
        result = explore(model.dp, model.inputs, _bounds(args), args.workers)
    except InitialConditionUnsatisfiable as exc:
        sys.stdout.write("model: %s (%s)\nno runs: %s\nverdict: FAIL\n"
                         % (model.document.name, args.file, exc))
        return EXIT_VIOLATION
    violations = check_invariants(result, model.invariants)
    result.invariant_violations = violations

    lines = ["model: %s (%s)" % (model.document.name, args.file)]
    lines.extend(describe_exploration(result))
    lines.append("disjoint-union overlaps: %d" % len(result.overlap_events))
    failed = False
    if model.invariants:
        inv = describe_invariants(result, model.invariants, violations)
        failed = failed or inv.failed
        lines.extend(inv.lines)
    else:
        lines.append("invariants: none declared")
    dead = describe_deadlocks(result)
    failed = failed or dead.failed
    lines.extend(dead.lines)
    if result.has_cycle:
        lines.extend(describe_cycle(result))
        if args.require_termination:
            failed = True
            lines.append("termination required but a cycle exists")
    code = (EXIT_VIOLATION if failed
            else EXIT_TRUNCATED if result.truncated else EXIT_OK)
    lines.append("verdict: %s" % ("PASS" if code == EXIT_OK else
                                  "TRUNCATED" if code == EXIT_TRUNCATED
                                  else "FAIL"))
    _emit_report("\n".join(lines) + "\n", args.report)
    if args.dot:
        Path(args.dot).write_text(dot_states(result))
    return code


def cmd_export(args) -> int:
    if args.source == "matmul":
        params = _matmul_params(args)
        dp = build_augmented(params)
        inputs = inputs_for(params)
    else:
        model = _load_model(args.source)
        dp, inputs = model.dp, model.inputs

    if args.format == "dot-process":
        text = dot_processes(dp)
    else:
        result = explore(dp, inputs, _bounds(args), args.workers)
        if args.format == "dot-states":
            text = dot_states(result)
        else:  # report-json-like
            text = json.dumps(report_dict(result), indent=2, sort_keys=True)
            text += "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_grid(args) -> int:
    worst = EXIT_OK
    lines = []
    for n_rows in range(1, args.size + 1):
        for n_workers in range(1, args.size + 1):
            params = MatmulParams(n_rows, n_workers)
            outcome = run_matmul(params, _bounds(args), args.workers)
            code = outcome.exit_code()
            worst = max(worst, code)
            status = ("PASS" if code == EXIT_OK else
                      "TRUNCATED" if code == EXIT_TRUNCATED else "FAIL")
            lines.append(
                "N=%d n=%d states=%d transitions=%d deadlocks=%d "
                "cycle=%s invariant-violations=%d final=%s %s"
                % (n_rows, n_workers, outcome.result.state_count(),
                   len(outcome.result.edges), len(outcome.result.deadlocks),
                   "yes" if outcome.result.has_cycle else "no",
                   len(outcome.violations),
                   "holds" if outcome.final and outcome.final.holds else "FAILS",
                   status))
    lines.append("grid verdict: %s" % ("PASS" if worst == EXIT_OK else "FAIL"))
    _emit_report("\n".join(lines) + "\n", args.report)
    return worst


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_bounds(p):
    p.add_argument("--max-states", type=int, default=10 ** 6,
                   help="state-count bound before truncation")
    p.add_argument("--max-queue", type=int, default=64,
                   help="per-channel queue-length bound")
    p.add_argument("--workers", type=int, default=_default_workers(),
                   help="frontier expansion workers (results are identical "
                        "for any count; default from $%s)" % WORKERS_ENV)


def _add_matmul_params(p):
    p.add_argument("--n-rows", type=int, default=1, help="rows handed out (N)")
    p.add_argument("--n-workers", type=int, default=1, help="worker count (n)")
    p.add_argument("--mode", choices=[SYMBOLIC, NUMERIC], default=SYMBOLIC)
    p.add_argument("--numeric-a", metavar="FILE",
                   help="left factor, rows of p/q entries")
    p.add_argument("--numeric-b", metavar="FILE",
                   help="right factor, rows of p/q entries")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="dpverify",
                             description="explicit-state verifier for "
                                         "message-passing process models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-matmul", parents=[], help="verify the bundled "
                       "row-distribution model at one instance size")
    _add_matmul_params(p)
    _add_bounds(p)
    p.add_argument("--dot", metavar="OUT", help="also write the state graph")
    p.add_argument("--report", metavar="OUT", help="also write the report")
    p.set_defaults(fn=cmd_verify_matmul)

    p = sub.add_parser("check", help="explore and check a .dp model file")
    p.add_argument("file", metavar="FILE.dp")
    _add_bounds(p)
    p.add_argument("--require-termination", action="store_true",
                   help="fail when the reachable graph has a cycle")
    p.add_argument("--dot", metavar="OUT", help="also write the state graph")
    p.add_argument("--report", metavar="OUT", help="also write the report")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("export", help="write process graphs, state graphs or "
                       "a machine-readable report")
    p.add_argument("source", help="'matmul' or a .dp file path")
    _add_matmul_params(p)
    _add_bounds(p)
    p.add_argument("--format", required=True,
                   choices=["dot-process", "dot-states", "report-json-like"])
    p.add_argument("--out", metavar="OUT", help="output path (default stdout)")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("grid", help="sweep small instance sizes, for CI")
    p.add_argument("--size", type=int, default=3,
                   help="sweep N and n from 1 to this value")
    _add_bounds(p)
    p.add_argument("--report", metavar="OUT", help="also write the report")
    p.set_defaults(fn=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit2 as exc:
        if exc.message:
            sys.stderr.write(exc.message + "\n")
        return exc.code
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except ModelError as exc:
        sys.stderr.write("error: %s\n" % exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
