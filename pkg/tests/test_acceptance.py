"""Acceptance suite: one test per criterion, exact tolerances throughout.

Run with `pytest tests/test_acceptance.py -v -s` to see one pass/fail line
per criterion.  The instance grid is every (rows, workers) pair in
{1,2,3} x {1,2,3}; grid explorations are shared through a module fixture so
the whole suite stays fast.
"""

import random
import time
from fractions import Fraction

import pytest

from dpverify import (
    MatmulParams, build_augmented, build_mutant, build_plain,
    check_final_spec, check_invariants, dfs_find_cycle, erase_aux, explore,
    graphs_isomorphic, inputs_for, kahn_has_cycle, scoped_overlap_events,
    state_key, step_action, successors, theorem1_suite,
)
from dpverify import cli, dsl
from dpverify.process import Guard, Recv, Send

from helpers import (
    HAND_EDGES, HAND_STATES, HAND_TERMINAL, random_dp, random_walk,
)

GRID = [(n_rows, n_workers) for n_rows in (1, 2, 3) for n_workers in (1, 2, 3)]
ERASURE_INSTANCES = [(1, 1), (2, 1), (2, 2)]


@pytest.fixture(scope="module")
def grid_runs():
    """Augmented-model exploration of the whole grid, shared by criteria
    1, 2, 3, 4 and 8.  Also enforces the stated time budget."""
    t0 = time.monotonic()
    runs = {}
    for n_rows, n_workers in GRID:
        params = MatmulParams(n_rows, n_workers)
        result = explore(build_augmented(params), inputs_for(params))
        runs[(n_rows, n_workers)] = (params, result)
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, "grid exploration took %.1fs" % elapsed
    return runs


def _passed(line):
    print("\n[acceptance] %s: PASS" % line)


def test_c01_invariant_suite_holds_on_grid(grid_runs):
    for (n_rows, n_workers), (params, result) in grid_runs.items():
        assert not result.truncated, (n_rows, n_workers)
        suite = theorem1_suite(params)
        assert len(suite) == 12
        violations = check_invariants(result, suite)
        assert violations == [], (n_rows, n_workers, violations[:3])
    _passed("criterion 1: all 12 invariants, zero violations on the grid")


def test_c02_no_deadlocks_on_grid(grid_runs):
    for key, (_, result) in grid_runs.items():
        assert result.deadlocks == [], key
    _passed("criterion 2: zero deadlock states on the grid")


def test_c03_acyclic_by_two_algorithms(grid_runs):
    for key, (_, result) in grid_runs.items():
        kahn = kahn_has_cycle(result)
        dfs = dfs_find_cycle(result)
        assert kahn == (dfs is not None), key
        assert not kahn, key
        assert dfs is None, key
    _passed("criterion 3: acyclic on the grid, Kahn and DFS agree")


def _naive_vecmat(row, matrix):
    # Independent oracle: textbook dot products, nothing shared with the
    # packaged product interpretation.
    width = len(matrix[0])
    return tuple(sum((row[k] * matrix[k][j] for k in range(len(row))),
                     Fraction(0)) for j in range(width))


# Three hand-computed rational instances, frozen: (A, B, expected product).
NUMERIC_CASES = [
    (3, 1,
     ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)),
      (Fraction(1), Fraction(1))),
     ((Fraction(1, 2), Fraction(2)), (Fraction(3), Fraction(1, 3))),
     ((Fraction(1, 2), Fraction(2)), (Fraction(3), Fraction(1, 3)),
      (Fraction(7, 2), Fraction(7, 3)))),
    (1, 2,
     ((Fraction(2, 3), Fraction(5)),),
     ((Fraction(1), Fraction(0), Fraction(1, 2)),
      (Fraction(0), Fraction(3), Fraction(1, 5))),
     ((Fraction(2, 3), Fraction(15), Fraction(4, 3)),)),
    (2, 2,
     ((Fraction(1), Fraction(2)), (Fraction(3), Fraction(4))),
     ((Fraction(5), Fraction(6)), (Fraction(7), Fraction(8))),
     ((Fraction(19), Fraction(22)), (Fraction(43), Fraction(50)))),
]


def test_c04_final_product_holds(grid_runs):
    for key, (params, result) in grid_runs.items():
        verdict = check_final_spec(result)
        assert verdict.holds, (key, verdict.failures)
        # Symbolic mode: cell i must be exactly the i-th product atom.
        for idx in result.terminals:
            c = result.states[idx].binding.value_of("C")
            for i, cell in enumerate(c.items, start=1):
                assert cell.source == "prod" and cell.index == i

    for n_rows, n_workers, a, b, expected in NUMERIC_CASES:
        # Cross-check the frozen numbers with the independent oracle first.
        assert tuple(_naive_vecmat(row, b) for row in a) == expected
        params = MatmulParams(n_rows, n_workers, "numeric", a, b)
        result = explore(build_augmented(params), inputs_for(params))
        assert not result.truncated
        assert check_final_spec(result).holds
        for idx in result.terminals:
            c = result.states[idx].binding.value_of("C")
            got = tuple(cell.entries for cell in c.items)
            assert got == expected  # exact rational equality, tolerance zero
    _passed("criterion 4: C = A*B at every terminal, symbolic and numeric")


def test_c05_hand_enumeration_matches():
    params = MatmulParams(1, 1)
    result = explore(build_plain(params), inputs_for(params))
    assert result.state_count() == len(HAND_STATES) == 16
    for i, expected in enumerate(HAND_STATES):
        assert state_key(result.states[i]) == state_key(expected), \
            "state %d differs from the hand trace" % i
    assert sorted(result.edges) == sorted(HAND_EDGES)
    assert len(result.edges) == 19
    assert result.terminals == [HAND_TERMINAL]
    assert result.deadlocks == []
    _passed("criterion 5: explorer reproduces the hand-traced graph exactly")


CASES = 1000


def test_c06a_frame_property():
    rng = random.Random(601)
    checked = 0
    while checked < CASES:
        dp = random_dp(rng)
        states, path = random_walk(rng, dp, steps=3)
        for tr in successors(states[-1], dp):
            src, dst = tr.source, tr.target
            moved = tr.process
            # Only the moving process's control location changes.
            for i in range(len(dp.processes)):
                if i != moved:
                    assert src.locs[i] == dst.locs[i]
            # Only the moving process's variables change (the empty
            # transition of every other process keeps its binding).
            own = set(dp.processes[moved].private_names())
            for name, term in src.binding.items():
                if name not in own:
                    assert dst.binding.term(name) == term
            # At most one queue differs, by one appended or removed entry.
            keys = {k for k, _ in src.channels} | {k for k, _ in dst.channels}
            diffs = [k for k in keys if src.queue(k) != dst.queue(k)]
            action = dp.processes[moved].edges[tr.edge].action
            sends = sum(isinstance(s, Send) for s in action.steps)
            recvs = sum(isinstance(s, Recv) for s in action.steps)
            assert len(diffs) <= sends + recvs <= 1
            for k in diffs:
                before, after = src.queue(k).items, dst.queue(k).items
                if sends:
                    assert after[:-1] == before and len(after) == len(before) + 1
                else:
                    assert before[1:] == after and len(before) == len(after) + 1
            checked += 1
    assert checked >= CASES
    _passed("criterion 6a: frame property, %d cases" % checked)


def test_c06b_fifo_conservation():
    rng = random.Random(602)
    checked = 0
    while checked < CASES:
        dp = random_dp(rng)
        states, path = random_walk(rng, dp, steps=6)
        appended = {}
        consumed = {}
        for tr in path:
            keys = ({k for k, _ in tr.source.channels}
                    | {k for k, _ in tr.target.channels})
            for k in keys:
                before, after = tr.source.queue(k), tr.target.queue(k)
                if len(after) == len(before) + 1:
                    appended.setdefault(k, []).append(after.items[-1])
                elif len(after) == len(before) - 1:
                    consumed[k] = consumed.get(k, 0) + 1
                else:
                    assert before == after
        final = states[-1]
        keys = set(appended) | {k for k, _ in final.channels}
        for k in keys:
            sent = appended.get(k, [])
            taken = consumed.get(k, 0)
            # FIFO: what remains is exactly the unconsumed suffix, in order.
            assert final.queue(k).items == tuple(sent[taken:])
            checked += 1
        checked += 1
    _passed("criterion 6b: FIFO conservation, %d cases" % checked)


def test_c06c_guard_and_empty_transition_invariance():
    rng = random.Random(603)
    checked = 0
    while checked < CASES:
        dp = random_dp(rng)
        states, _ = random_walk(rng, dp, steps=3)
        for tr in successors(states[-1], dp):
            action = dp.processes[tr.process].edges[tr.edge].action
            if all(isinstance(s, Guard) for s in action.steps):
                # Guard-only actions: binding and every queue unchanged.
                assert tr.source.binding == tr.target.binding
                assert tr.source.channels == tr.target.channels
                checked += 1
            # Empty transitions of non-moving processes never touch their
            # variables:
            for i, proc in enumerate(dp.processes):
                if i == tr.process:
                    continue
                for name in proc.private_names():
                    assert (tr.source.binding.term(name)
                            == tr.target.binding.term(name))
        checked += 1
    _passed("criterion 6c: guard/empty-transition invariance, %d cases"
            % checked)


def test_c06d_action_atomicity():
    rng = random.Random(604)
    checked = 0
    while checked < CASES:
        dp = random_dp(rng)
        states, _ = random_walk(rng, dp, steps=3)
        state = states[-1]
        before = state_key(state)
        for i, proc in enumerate(dp.processes):
            for edge_index, edge in enumerate(proc.edges):
                out = step_action(state, i, edge_index, dp)
                assert state_key(state) == before, "input state mutated"
                if out is None:
                    checked += 1
        checked += 1
    _passed("criterion 6d: action atomicity, %d cases" % checked)


def test_c07_aux_erasure_equivalence():
    for n_rows, n_workers in ERASURE_INSTANCES:
        params = MatmulParams(n_rows, n_workers)
        plain = explore(build_plain(params), inputs_for(params))
        erased = explore(erase_aux(build_augmented(params)),
                         inputs_for(params))
        assert graphs_isomorphic(plain, erased), (n_rows, n_workers)
    _passed("criterion 7: aux-erased and plain graphs isomorphic")


def test_c08_disjoint_union_audit(grid_runs):
    for key, (_, result) in grid_runs.items():
        assert scoped_overlap_events(result) == [], key
    _passed("criterion 8: every in-scope disjoint union was disjoint")


def test_c09_mutation_sensitivity():
    caught = {}
    for mutation in ("drop-gamma-update", "swap-recv-guard", "send-tag-zero"):
        params = MatmulParams(2, 2)
        dp = build_mutant(params, mutation)
        result = explore(dp, inputs_for(params))
        violations = check_invariants(result, theorem1_suite(params))
        reasons = []
        if violations:
            reasons.append("invariants:%s" %
                           ",".join(sorted({v.spec_id for v in violations})))
        if result.deadlocks:
            reasons.append("deadlock")
        if result.has_cycle:
            reasons.append("cycle")
        if not result.truncated and result.terminals:
            if not check_final_spec(result).holds:
                reasons.append("final-check")
        assert reasons, "mutation %s went unnoticed" % mutation
        caught[mutation] = reasons
    # Each documented mutation trips at least one of criteria 1-4.
    assert set(caught) == {"drop-gamma-update", "swap-recv-guard",
                           "send-tag-zero"}
    _passed("criterion 9: mutations caught (%s)" % "; ".join(
        "%s -> %s" % (m, "+".join(r)) for m, r in sorted(caught.items())))


def test_c10_roundtrip_and_determinism(grid_runs):
    # Round-trip: parse(emit(dp)) explores to an isomorphic graph, for both
    # builders at every grid point.
    for (n_rows, n_workers), (params, aug_result) in grid_runs.items():
        inputs = inputs_for(params)
        for build, original in ((build_plain, None),
                                (build_augmented, aug_result)):
            dp = build(params)
            text = dsl.emit(dp, inputs)
            assert text == dsl.emit(dp, inputs)  # emit is deterministic
            compiled = dsl.compile_text(text)
            assert compiled.ok(), compiled.diagnostics[:3]
            reparsed = explore(compiled.model.dp, compiled.model.inputs)
            if original is None:
                original = explore(dp, inputs)
            assert graphs_isomorphic(original, reparsed), (n_rows, n_workers)

    # Reports are byte-identical across runs and across worker counts.
    params = MatmulParams(2, 2)
    reports = []
    for workers in (1, 1, 4):
        outcome = cli.run_matmul(params, cli.Bounds(), workers)
        reports.append(cli.matmul_report(params, outcome))
    assert reports[0] == reports[1] == reports[2]
    _passed("criterion 10: DSL round-trip and byte-identical reports")
