"""Sequential-process tests: classification, reduction, renaming, validation."""

import pytest

from dpverify import (
    Action, Assign, Edge, Guard, INTERNAL, MalformedAction, MatmulParams,
    NAT, NatV, RECEIVING, Recv, ReductionInapplicable, RenameClash,
    Renaming, SENDING, SeqProcess, Send, Var, app, boolc, build_plain,
    classify, explore, graphs_isomorphic, inputs_for, nat, reduce,
    rename, state_key, validate,
)
from dpverify.process import check_pattern
from dpverify.semantics import DistributedProcess, DpState
from dpverify.terms import Binding, Index, ROW, array_type, tuple_term


def hand_out_action():
    i = Var("i", NAT)
    return Action((
        Guard(app("le", i, app("min", Var("n", NAT), Var("N", NAT)))),
        Send(app("channel", i), tuple_term(Index(Var("A", array_type(ROW)), i),
                                           nat(0), i)),
        Assign(i, app("add", i, nat(1))),
    ))


def test_classify_sending_internal_empty():
    assert classify(hand_out_action()) == SENDING
    assert classify(Action((Guard(app("ge", Var("k", NAT), Var("N", NAT))),))) \
        == INTERNAL
    assert classify(Action(())) == INTERNAL
    recv = Recv(app("channel", nat(0)), Var("x", NAT))
    assert classify(Action((recv,))) == RECEIVING


def test_classify_rejects_two_message_passing_steps():
    send = Send(app("channel", nat(1)), nat(0))
    with pytest.raises(MalformedAction):
        classify(Action((send, send)))
    with pytest.raises(MalformedAction):
        classify(Action((send, Recv(app("channel", nat(1)), Var("x", NAT)))))


def _chain_process():
    x = Var("x", NAT)
    return SeqProcess(
        name="Chain", nodes=frozenset((0, 1, 2)), initial=0,
        edges=(
            Edge(0, Action((Guard(app("ge", x, nat(0))),)), 1),
            Edge(1, Action((Assign(x, nat(1)),)), 2),
        ),
        inputs=(), privates=(("x", NAT),), init_values=(("x", NatV(0)),),
        init_cond=boolc(True))


def test_reduce_chain_concatenates_labels():
    p = reduce(_chain_process(), 1)
    assert p.nodes == frozenset((0, 2))
    assert len(p.edges) == 1
    merged = p.edges[0]
    assert merged.src == 0 and merged.dst == 2
    assert [type(s).__name__ for s in merged.action.steps] == ["Guard", "Assign"]


def test_reduce_fan_makes_cartesian_product():
    x = Var("x", NAT)
    guard = Action((Guard(app("ge", x, nat(0))),))
    assign = Action((Assign(x, nat(0)),))
    p = SeqProcess(
        name="Fan", nodes=frozenset((0, 1, 5, 6, 7, 8)), initial=0,
        edges=(
            Edge(0, guard, 5), Edge(1, guard, 5),
            Edge(5, assign, 6), Edge(5, assign, 7), Edge(5, assign, 8),
        ),
        inputs=(), privates=(("x", NAT),), init_values=(("x", NatV(0)),),
        init_cond=boolc(True))
    reduced = reduce(p, 5)
    # 2 in-edges x 3 out-edges.
    assert len(reduced.edges) == 6
    assert {(e.src, e.dst) for e in reduced.edges} \
        == {(0, 6), (0, 7), (0, 8), (1, 6), (1, 7), (1, 8)}
    for e in reduced.edges:
        assert len(e.action.steps) == 2


def test_reduce_refuses_mp_mp_merge():
    x = Var("x", NAT)
    p = SeqProcess(
        name="Bad", nodes=frozenset((0, 1, 2)), initial=0,
        edges=(
            Edge(0, Action((Send(app("channel", nat(1)), nat(0)),)), 1),
            Edge(1, Action((Recv(app("channel", nat(2)), x),)), 2),
        ),
        inputs=(), privates=(("x", NAT),), init_values=(("x", NatV(0)),),
        init_cond=boolc(True))
    with pytest.raises(ReductionInapplicable):
        reduce(p, 1)


def test_reduce_refuses_initial_and_self_loops():
    p = _chain_process()
    with pytest.raises(ReductionInapplicable):
        reduce(p, 0)
    loop = SeqProcess(
        name="Loop", nodes=frozenset((0, 1)), initial=0,
        edges=(Edge(0, Action((Guard(boolc(True)),)), 1),
               Edge(1, Action((Guard(boolc(True)),)), 1)),
        inputs=(), privates=(), init_values=(), init_cond=boolc(True))
    with pytest.raises(ReductionInapplicable):
        reduce(loop, 1)


def test_reduce_preserves_reachable_graph_on_internal_split():
    # Split the worker's answer edge into guard-then-send through a fresh
    # node; reducing the fresh node must restore the original behavior.
    params = MatmulParams(1, 1)
    dp = build_plain(params)
    worker = dp.processes[1]
    guard, send = worker.edges[1].action.steps
    split = SeqProcess(
        name=worker.name, nodes=worker.nodes | {9}, initial=worker.initial,
        edges=(worker.edges[0],
               Edge(1, Action((guard,)), 9),
               Edge(9, Action((send,)), 0),
               worker.edges[2]),
        inputs=worker.inputs, privates=worker.privates,
        init_values=worker.init_values, init_cond=worker.init_cond)
    assert validate(split) == []
    merged = reduce(split, 9)
    dp_split = DistributedProcess((dp.processes[0], split))
    dp_merged = DistributedProcess((dp.processes[0], merged))
    inputs = inputs_for(params)
    r_plain = explore(dp, inputs)
    r_split = explore(dp_split, inputs)
    r_merged = explore(dp_merged, inputs)
    assert r_split.state_count() > r_plain.state_count()
    assert graphs_isomorphic(r_plain, r_merged, match_edge_ids=False)


def test_rename_identity_and_inverse():
    params = MatmulParams(1, 1)
    worker = build_plain(params).processes[1]
    assert rename(worker, Renaming(())) == worker
    eta = Renaming((("Y_1", "Z"), ("j_1", "t")))
    there = rename(worker, eta)
    assert "Z" in there.private_names() and "t" in there.private_names()
    back = rename(there, eta.inverse())
    assert back == worker


def test_rename_rewrites_labels():
    worker = build_plain(MatmulParams(1, 1)).processes[1]
    renamed = rename(worker, Renaming((("Y_1", "Yprime"),)))
    answer = renamed.edges[1].action.steps[1]
    assert isinstance(answer, Send)
    from dpverify import vars_of
    assert "Yprime" in vars_of(answer.msg)
    assert "Y_1" not in vars_of(answer.msg)


def test_rename_clashes():
    worker = build_plain(MatmulParams(1, 1)).processes[1]
    with pytest.raises(RenameClash):
        rename(worker, Renaming((("Y_1", "B"),)))  # collides with an input
    with pytest.raises(RenameClash):
        rename(worker, Renaming((("Y_1", "j_1"),)))  # collides with a private
    with pytest.raises(RenameClash):
        rename(worker, Renaming((("Y_1", "q"), ("j_1", "q"))))  # not injective
    with pytest.raises(RenameClash):
        rename(worker, Renaming((("B", "B2"),)))  # domain outside privates


def test_rename_preserves_semantics_modulo_renaming():
    # Rename the worker's variables inside the full model: the reachable
    # graphs must agree once keys are mapped through the renaming.
    params = MatmulParams(1, 1)
    dp = build_plain(params)
    eta = {"Y_1": "Z", "j_1": "t"}
    renamed = DistributedProcess(
        (dp.processes[0], rename(dp.processes[1],
                                 Renaming(tuple(sorted(eta.items()))))))
    inputs = inputs_for(params)
    r1 = explore(dp, inputs)
    r2 = explore(renamed, inputs)

    def keys(result, mapping):
        out = set()
        for s in result.states:
            values = {mapping.get(k, k): t.value for k, t in s.binding.items()}
            out.add(state_key(DpState(Binding.from_values(values),
                                      s.channels, s.locs)))
        return out

    assert keys(r1, eta) == keys(r2, {})
    assert r1.state_count() == r2.state_count()
    assert len(r1.edges) == len(r2.edges)


def test_validate_accepts_built_models():
    dp = build_plain(MatmulParams(2, 2))
    for proc in dp.processes:
        assert validate(proc) == []


def test_validate_reports_unknown_variable():
    p = SeqProcess(
        name="Bad", nodes=frozenset((0, 1)), initial=0,
        edges=(Edge(0, Action((Assign(Var("z", NAT), nat(1)),)), 1),),
        inputs=(), privates=(), init_values=(), init_cond=boolc(True))
    codes = [d.code for d in validate(p)]
    assert "unknown-variable" in codes


def test_validate_reports_double_send():
    send = Send(app("channel", nat(1)), nat(0))
    p = SeqProcess(
        name="Bad", nodes=frozenset((0, 1)), initial=0,
        edges=(Edge(0, Action((send, send)), 1),),
        inputs=(), privates=(), init_values=(), init_cond=boolc(True))
    codes = [d.code for d in validate(p)]
    assert "too-many-mp" in codes


def test_validate_reports_structure_problems():
    x = Var("x", NAT)
    p = SeqProcess(
        name="Bad", nodes=frozenset((0, 1, 9)), initial=7,
        edges=(Edge(0, Action((Guard(nat(3)),)), 5),),
        inputs=(("x", NAT),), privates=(("x", NAT),),
        init_values=(), init_cond=Var("zz", NAT))
    codes = {d.code for d in validate(p)}
    assert {"bad-initial", "bad-edge-endpoint", "input-private-overlap",
            "unknown-variable", "type-mismatch"} <= codes
    assert "missing-initializer" in codes or "duplicate-variable" in codes


def test_validate_unreachable_node():
    p = SeqProcess(
        name="Island", nodes=frozenset((0, 1, 2)), initial=0,
        edges=(Edge(0, Action(()), 1),),
        inputs=(), privates=(), init_values=(), init_cond=boolc(True))
    assert any(d.code == "unreachable-node" for d in validate(p))


def test_validate_aux_rules():
    alpha = Var("alpha", NAT)
    x = Var("x", NAT)
    aux_types = {"alpha": NAT}
    writes_real = SeqProcess(
        name="Aux", nodes=frozenset((0, 1)), initial=0,
        edges=(Edge(0, Action((Assign(x, nat(1)),), frozenset((0,))), 1),),
        inputs=(), privates=(("x", NAT),), init_values=(("x", NatV(0)),),
        init_cond=boolc(True))
    assert any(d.code == "aux-target"
               for d in validate(writes_real, aux_types))
    reads_aux = SeqProcess(
        name="Leak", nodes=frozenset((0, 1)), initial=0,
        edges=(Edge(0, Action((Guard(app("ge", alpha, nat(0))),)), 1),),
        inputs=(), privates=(), init_values=(), init_cond=boolc(True))
    assert any(d.code == "aux-leak" for d in validate(reads_aux, aux_types))


def test_parallel_identical_edges_stay_distinct():
    # Multigraph support: two same-labeled edges fire as separate
    # transitions, told apart by their edge index.
    x = Var("x", NAT)
    bump = Action((Assign(x, app("add", x, nat(1))),))
    p = SeqProcess(
        name="Twin", nodes=frozenset((0, 1)), initial=0,
        edges=(Edge(0, bump, 1), Edge(0, bump, 1)),
        inputs=(), privates=(("x", NAT),), init_values=(("x", NatV(0)),),
        init_cond=boolc(True))
    assert validate(p) == []
    from dpverify import initial_states, make_dp, successors
    dp = make_dp([p])
    s0 = initial_states(dp, {})[0]
    succs = successors(s0, dp)
    assert [(t.process, t.edge) for t in succs] == [(0, 0), (0, 1)]
    assert succs[0].target == succs[1].target


def test_pattern_restrictions():
    params = MatmulParams(1, 1)
    manager = build_plain(params).processes[0]
    collect = manager.edges[2].action.steps[1]
    assert isinstance(collect, Recv)
    assert check_pattern(collect.pattern, manager) == []
    # A private bound twice is rejected.
    j = Var("j", NAT)
    assert check_pattern(tuple_term(j, j), manager) != []
    # Cells must live in a private array.
    bad_cell = tuple_term(Index(Var("A", array_type(ROW)), j), j)
    assert any("private array" in p for p in check_pattern(bad_cell, manager))
