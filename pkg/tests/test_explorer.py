"""Explorer tests: reachability, bounds, cycles, dedup, determinism."""

import warnings

import pytest

from dpverify import (
    Action, Bounds, Edge, InitialConditionUnsatisfiable, InvariantSpec,
    MatmulParams, NAT, NatV, PredicateEvaluationError, SeqProcess, Var,
    app, boolc, build_plain, check_invariants, detect_cycles, dfs_find_cycle,
    explore, graphs_isomorphic, inputs_for, kahn_has_cycle, make_dp, nat,
    state_key,
)
from dpverify.explorer import ExplorationWarning

from helpers import counter_process, mutual_wait_dp, self_loop_dp, sink_process


def test_deadlock_toy_has_one_state():
    dp = mutual_wait_dp()
    r = explore(dp, {})
    assert r.state_count() == 1
    assert r.deadlocks == [0]
    assert r.terminals == []
    assert not r.truncated


def test_self_loop_reports_cycle_of_length_one():
    r = explore(self_loop_dp(), {})
    assert r.has_cycle
    assert r.cycle_witness.prefix == ()
    assert r.cycle_witness.cycle == (0,)
    assert kahn_has_cycle(r)
    assert dfs_find_cycle(r) is not None


def test_two_cycle_detectors_agree_on_matmul():
    for n_rows, n_workers in ((1, 2), (3, 2)):
        params = MatmulParams(n_rows, n_workers)
        r = explore(build_plain(params), inputs_for(params))
        assert kahn_has_cycle(r) is False
        assert dfs_find_cycle(r) is None
        assert detect_cycles(r) is None


def test_unsatisfiable_initial_condition_raises():
    params = MatmulParams(1, 1)
    dp = build_plain(params)
    inputs = dict(inputs_for(params))
    inputs["N"] = NatV(0)
    inputs["A"] = __import__("dpverify").TupleV(())
    with pytest.raises(InitialConditionUnsatisfiable):
        explore(dp, inputs)


def test_max_states_bound_truncates():
    params = MatmulParams(2, 2)
    r = explore(build_plain(params), inputs_for(params), Bounds(max_states=5))
    assert r.truncated and r.bound_fired == "max-states"
    assert r.state_count() <= 5
    # Unexpanded states are never classified as deadlocks.
    assert all(r.expanded[i] for i in r.deadlocks)


def test_max_queue_bound_prunes_flooding_sender():
    dp = make_dp([counter_process(limit=10)])
    r = explore(dp, {}, Bounds(max_queue=3))
    assert r.truncated and r.bound_fired == "max-queue"
    assert all(len(q) <= 3 for s in r.states for _, q in s.channels)


def test_max_depth_bound():
    dp = make_dp([counter_process(limit=10), sink_process()])
    r = explore(dp, {}, Bounds(max_depth=2))
    assert r.truncated and r.bound_fired == "max-depth"
    assert max(r.depth) <= 2


def test_detect_cycles_warns_on_truncated():
    params = MatmulParams(2, 2)
    r = explore(build_plain(params), inputs_for(params), Bounds(max_states=5))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        detect_cycles(r)
    assert any(issubclass(w.category, ExplorationWarning) for w in caught)


def test_bounds_must_be_positive():
    from dpverify import ModelError
    with pytest.raises(ModelError):
        Bounds(max_states=0)
    with pytest.raises(ModelError):
        Bounds(max_queue=-1)


def test_dedup_is_sound_on_reachable_states():
    params = MatmulParams(1, 1)
    r = explore(build_plain(params), inputs_for(params))
    keys = [state_key(s) for s in r.states]
    assert len(set(keys)) == len(keys)
    for i, a in enumerate(r.states):
        for j, b in enumerate(r.states):
            assert (keys[i] == keys[j]) == (a == b) == (i == j)


def test_exploration_is_deterministic_and_worker_independent():
    params = MatmulParams(2, 2)
    dp = build_plain(params)
    runs = [explore(dp, inputs_for(params), workers=w) for w in (1, 1, 4)]
    for other in runs[1:]:
        assert [state_key(s) for s in runs[0].states] \
            == [state_key(s) for s in other.states]
        assert runs[0].edges == other.edges
        assert runs[0].terminals == other.terminals
        assert runs[0].deadlocks == other.deadlocks


def test_bfs_paths_are_shortest():
    params = MatmulParams(2, 1)
    r = explore(build_plain(params), inputs_for(params))
    for i in range(r.state_count()):
        assert len(r.path_to(i)) == r.depth[i]
    assert r.path_to(0) == []


def test_path_edges_connect():
    params = MatmulParams(1, 1)
    r = explore(build_plain(params), inputs_for(params))
    goal = r.terminals[0]
    path = r.path_to(goal)
    at = 0
    for e in path:
        src, _, _, dst = r.edges[e]
        assert src == at
        at = dst
    assert at == goal


def test_check_invariants_scope_and_errors():
    params = MatmulParams(1, 1)
    r = explore(build_plain(params), inputs_for(params))
    vacuous = InvariantSpec("v", "never in scope",
                            predicate=lambda s, dp: False,
                            scope=lambda s, dp: False)
    assert check_invariants(r, [vacuous]) == []
    always = InvariantSpec("t", "holds everywhere",
                           predicate=lambda s, dp: True)
    assert check_invariants(r, [always]) == []
    hits = check_invariants(r, [InvariantSpec(
        "x", "fails where the coordinator has halted",
        predicate=lambda s, dp: s.locs[0] != 4)])
    assert {v.state for v in hits} == {11, 13, 15}

    def boom(s, dp):
        raise ValueError("boom")

    with pytest.raises(PredicateEvaluationError) as err:
        check_invariants(r, [InvariantSpec("b", "boom", predicate=boom)])
    assert err.value.state_index == 0


def test_graphs_isomorphic_negative():
    p11 = MatmulParams(1, 1)
    p21 = MatmulParams(2, 1)
    r1 = explore(build_plain(p11), inputs_for(p11))
    r2 = explore(build_plain(p21), inputs_for(p21))
    assert not graphs_isomorphic(r1, r2)
    assert graphs_isomorphic(r1, r1)


def test_overlap_events_only_from_committed_transitions():
    # A dunion inside an action that later blocks must not be reported.
    x = Var("x", NAT)
    from dpverify import Assign, Recv, set_type
    from dpverify.terms import make_nat_set
    alpha = Var("a", set_type(NAT))
    p = SeqProcess(
        name="P", nodes=frozenset((0, 1)), initial=0,
        edges=(Edge(0, Action((
            Assign(alpha, app("dunion", alpha, app("set_of", nat(1)))),
            Recv(app("channel", nat(1)), x),
        )), 1),),
        inputs=(), privates=(("x", NAT), ("a", set_type(NAT))),
        init_values=(("x", NatV(0)), ("a", make_nat_set([1]))),
        init_cond=boolc(True))
    r = explore(make_dp([p]), {})
    assert r.state_count() == 1  # the receive blocks forever
    assert r.overlap_events == []
