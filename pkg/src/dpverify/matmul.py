"""Builders for the manager/worker row-distribution model.

One coordinator process hands out row tasks over per-worker channels and
collects row products on channel 0; n workers each multiply one row at a
time and send the result back tagged with the row number.  The plain model
is the executable behavior; the augmented model adds three ghost sets
(alpha: busy channel indices, beta: rows being multiplied, gamma: rows
already written to the output) whose bookkeeping makes the invariant suite
expressible.

Node numbering follows the coordinator's 0..4 / worker's 0..2 layout so
violation witnesses cite recognizable control locations.  The coordinator's
counter i runs one ahead of a zero-based task counter: i is the number of
the next row to hand out.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .explorer import InvariantSpec
from .process import Action, Assign, Edge, Guard, Recv, SeqProcess, Send
from .semantics import (
    DistributedProcess, DpState, chan_key, make_dp,
)
from .terms import (
    ChannelId, Const, ConcreteMatrix, ConcreteRow, Index, MatrixAtom,
    ModelError, NAT, NatV, ROW, MATRIX, RowAtom, SRC_A, SetV, STAR, Term,
    TupleV, Value, Var, app, array_type, boolc, nat, prod_value, set_type,
    tuple_term,
)

SYMBOLIC = "symbolic"
NUMERIC = "numeric"


class InvalidParams(ModelError):
    pass


Rational = Fraction
Matrix = tuple[tuple[Fraction, ...], ...]


@dataclass(frozen=True)
class MatmulParams:
    """n_rows is the number of rows handed out (N), n_workers the number of
    worker processes (n).  Numeric mode carries the two rational factors."""

    n_rows: int
    n_workers: int
    mode: str = SYMBOLIC
    a: Optional[Matrix] = None
    b: Optional[Matrix] = None

    def __post_init__(self):
        if self.n_rows < 1:
            raise InvalidParams("need at least one row")
        if self.n_workers < 1:
            raise InvalidParams("need at least one worker")
        if self.mode not in (SYMBOLIC, NUMERIC):
            raise InvalidParams("mode must be symbolic or numeric")
        if self.mode == NUMERIC:
            if self.a is None or self.b is None:
                raise InvalidParams("numeric mode needs both factor matrices")
            if len(self.a) != self.n_rows:
                raise InvalidParams("left factor must have n_rows rows")
            widths = {len(r) for r in self.a}
            if len(widths) != 1:
                raise InvalidParams("left factor rows must have equal length")
            if widths.pop() != len(self.b):
                raise InvalidParams("inner dimensions do not match")
            if len({len(r) for r in self.b}) != 1:
                raise InvalidParams("right factor rows must have equal length")


ALPHA = "alpha"
BETA = "beta"
GAMMA = "gamma"

_N = Var("N", NAT)
_n = Var("n", NAT)
_A = Var("A", array_type(ROW))
_B = Var("B", MATRIX)
_C = Var("C", array_type(ROW))
_i = Var("i", NAT)
_j = Var("j", NAT)
_k = Var("k", NAT)
_l = Var("l", NAT)
_p = Var("p", NAT)


def _chan(index: Term) -> Term:
    return app("channel", index)


def _manager(n_rows: int, augmented: bool) -> SeqProcess:
    send_task = Send(_chan(_i), tuple_term(Index(_A, _i), nat(0), _i))
    resend_task = Send(_chan(_p), tuple_term(Index(_A, _i), nat(0), _i))
    recv_result = Recv(_chan(nat(0)), tuple_term(Index(_C, _j), _p, _j))
    bump_i = Assign(_i, app("add", _i, nat(1)))
    bump_k = Assign(_k, app("add", _k, nat(1)))
    bump_l = Assign(_l, app("add", _l, nat(1)))
    alpha = Var(ALPHA, set_type(NAT))
    gamma = Var(GAMMA, set_type(NAT))
    note_i_busy = Assign(alpha, app("dunion", alpha, app("set_of", _i)))
    note_p_busy = Assign(alpha, app("dunion", alpha, app("set_of", _p)))
    note_written = Assign(gamma, app("dunion", gamma, app("set_of", _j)))

    def act(steps, aux=()):
        return Action(tuple(steps), frozenset(aux))

    if augmented:
        hand_out = act([Guard(app("le", _i, app("min", _n, _N))),
                        send_task, note_i_busy, bump_i], aux=(2,))
        collect = act([Guard(app("lt", _k, _N)),
                       recv_result, note_written, bump_k], aux=(2,))
        hand_next = act([Guard(app("le", _i, _N)),
                         resend_task, note_p_busy, bump_i], aux=(2,))
    else:
        hand_out = act([Guard(app("le", _i, app("min", _n, _N))),
                        send_task, bump_i])
        collect = act([Guard(app("lt", _k, _N)), recv_result, bump_k])
        hand_next = act([Guard(app("le", _i, _N)), resend_task, bump_i])

    edges = (
        Edge(0, hand_out, 0),
        Edge(0, act([Guard(app("gt", _i, app("min", _n, _N)))]), 1),
        Edge(1, collect, 2),
        Edge(1, act([Guard(app("ge", _k, _N))]), 3),
        Edge(2, act([Guard(app("gt", _i, _N))]), 1),
        Edge(2, hand_next, 1),
        Edge(3, act([Guard(app("le", _l, _n)),
                     Send(_chan(_l), tuple_term(Const(STAR), nat(0), nat(0))),
                     bump_l]), 3),
        Edge(3, act([Guard(app("gt", _l, _n))]), 4),
    )
    init_cond = app("and",
                    app("and",
                        app("and", app("ge", _N, nat(1)), app("eq", _i, nat(1))),
                        app("eq", _k, nat(0))),
                    app("eq", _l, nat(1)))
    return SeqProcess(
        name="P0",
        nodes=frozenset(range(5)),
        initial=0,
        edges=edges,
        inputs=(("A", array_type(ROW)), ("B", MATRIX), ("N", NAT), ("n", NAT)),
        privates=(("C", array_type(ROW)), ("i", NAT), ("j", NAT), ("k", NAT),
                  ("l", NAT), ("p", NAT)),
        init_values=(("C", TupleV((STAR,) * n_rows)), ("i", NatV(1)),
                     ("j", NatV(0)), ("k", NatV(0)), ("l", NatV(1)),
                     ("p", NatV(0))),
        init_cond=init_cond,
    )


def _worker(w: int, augmented: bool) -> SeqProcess:
    y = Var("Y_%d" % w, ROW)
    jw = Var("j_%d" % w, NAT)
    alpha = Var(ALPHA, set_type(NAT))
    beta = Var(BETA, set_type(NAT))
    recv_task = Recv(_chan(nat(w)), tuple_term(y, nat(0), jw))
    send_result = Send(_chan(nat(0)), tuple_term(app("prod", y, _B), nat(w), jw))

    if augmented:
        take = Action((recv_task,
                       Assign(beta, app("dunion", beta, app("set_of", jw))),
                       Assign(alpha, app("diff", alpha, app("set_of", nat(w))))),
                      frozenset((1, 2)))
        answer = Action((Guard(app("ne", jw, nat(0))), send_result,
                         Assign(beta, app("diff", beta, app("set_of", jw)))),
                        frozenset((2,)))
    else:
        take = Action((recv_task,))
        answer = Action((Guard(app("ne", jw, nat(0))), send_result))

    edges = (
        Edge(0, take, 1),
        Edge(1, answer, 0),
        Edge(1, Action((Guard(app("eq", jw, nat(0))),)), 2),
    )
    return SeqProcess(
        name="P%d" % w,
        nodes=frozenset(range(3)),
        initial=0,
        edges=edges,
        inputs=(("B", MATRIX),),
        privates=(("Y_%d" % w, ROW), ("j_%d" % w, NAT)),
        init_values=(("Y_%d" % w, STAR), ("j_%d" % w, NatV(0))),
        init_cond=boolc(True),
    )


def build_plain(params: MatmulParams) -> DistributedProcess:
    procs = [_manager(params.n_rows, augmented=False)]
    procs += [_worker(w, augmented=False)
              for w in range(1, params.n_workers + 1)]
    return make_dp(procs)


def build_augmented(params: MatmulParams) -> DistributedProcess:
    procs = [_manager(params.n_rows, augmented=True)]
    procs += [_worker(w, augmented=True)
              for w in range(1, params.n_workers + 1)]
    aux = ((ALPHA, set_type(NAT)), (BETA, set_type(NAT)), (GAMMA, set_type(NAT)))
    return make_dp(procs, aux_vars=aux)


def inputs_for(params: MatmulParams) -> dict[str, Value]:
    """The input binding matching a built model: the factor payloads, the
    row count and the worker count."""
    if params.mode == NUMERIC:
        a_rows: tuple[Value, ...] = tuple(
            ConcreteRow(tuple(Fraction(x) for x in row)) for row in params.a)
        b_val: Value = ConcreteMatrix(
            tuple(tuple(Fraction(x) for x in row) for row in params.b))
    else:
        a_rows = tuple(RowAtom(SRC_A, i) for i in range(1, params.n_rows + 1))
        b_val = MatrixAtom("B")
    return {"A": TupleV(a_rows), "B": b_val,
            "N": NatV(params.n_rows), "n": NatV(params.n_workers)}


# ---------------------------------------------------------------------------
# The invariant suite
# ---------------------------------------------------------------------------

def _nat_set(binding, name) -> set[int]:
    v = binding.value_of(name)
    assert isinstance(v, SetV)
    return {x.n for x in v.items if isinstance(x, NatV)}


def _counter(binding, name) -> int:
    v = binding.value_of(name)
    assert isinstance(v, NatV)
    return v.n


def _queue_items(state: DpState, index: int):
    return state.queue(chan_key(ChannelId(index))).items


def _proj(items, k) -> list[int]:
    out = []
    for v in items:
        assert isinstance(v, TupleV) and len(v.items) >= k
        comp = v.items[k - 1]
        assert isinstance(comp, NatV)
        out.append(comp.n)
    return out


def _worker_count(dp: DistributedProcess) -> int:
    return len(dp.processes) - 1


def _outside_drain(state: DpState, dp: DistributedProcess) -> bool:
    # The suite speaks about the task/collect phases only; once the
    # coordinator starts draining the workers the bookkeeping is stale.
    return state.locs[0] not in (3, 4)


def theorem1_suite(params: MatmulParams) -> list[InvariantSpec]:
    """Twelve safety statements about the augmented model, all scoped to
    coordinator locations outside the drain phase.  Statement 6 has two
    parts, checked together; conditional statements are encoded as
    implications so vacuity stays visible in reports rather than being
    filtered out."""

    def spec(sid, description, predicate):
        return InvariantSpec(id=sid, description=description,
                             predicate=predicate, scope=_outside_drain)

    def s1(state, dp):
        b = state.binding
        return _nat_set(b, ALPHA) <= set(range(1, _counter(b, "i")))

    def s2(state, dp):
        b = state.binding
        return _counter(b, "i") - 1 <= _counter(b, "N")

    def s3(state, dp):
        b = state.binding
        k = _counter(b, "k")
        return len(_nat_set(b, GAMMA)) == k and k <= _counter(b, "N")

    def s4(state, dp):
        b = state.binding
        k = _counter(b, "k")
        if state.locs[0] == 1 and k < _counter(b, "N"):
            return k < _counter(b, "i") - 1
        return True

    def s5(state, dp):
        b = state.binding
        sources = set(_proj(_queue_items(state, 0), 2))
        return not (sources & _nat_set(b, ALPHA))

    def s6(state, dp):
        b = state.binding
        alpha = _nat_set(b, ALPHA)
        gamma = _nat_set(b, GAMMA)
        for w in range(1, _worker_count(dp) + 1):
            expected = 1 if w in alpha else 0
            if len(_queue_items(state, w)) != expected:
                return False
            if state.locs[w] == 1:
                if w in alpha or _counter(b, "j_%d" % w) in gamma:
                    return False
        return True

    def s7(state, dp):
        b = state.binding
        if state.locs[0] != 2:
            return True
        p = _counter(b, "p")
        return p not in _nat_set(b, ALPHA) and 1 <= p <= _counter(b, "i") - 1

    def s8(state, dp):
        b = state.binding
        parts = [_proj(_queue_items(state, w), 3)
                 for w in range(1, _worker_count(dp) + 1)]
        parts.append(sorted(_nat_set(b, BETA)))
        parts.append(_proj(_queue_items(state, 0), 3))
        parts.append(sorted(_nat_set(b, GAMMA)))
        combined: list[int] = []
        for part in parts:
            combined.extend(part)
        if len(combined) != len(set(combined)):
            return False  # the union must be disjoint
        return set(combined) == set(range(1, _counter(b, "i")))

    def s9(state, dp):
        b = state.binding
        a = b.value_of("A")
        n_rows = _counter(b, "N")
        for p in sorted(_nat_set(b, ALPHA)):
            items = _queue_items(state, p)
            if len(items) != 1:
                return False
            entry = items[0]
            if not (isinstance(entry, TupleV) and len(entry.items) == 3):
                return False
            payload, zero, tag = entry.items
            if not (isinstance(tag, NatV) and 1 <= tag.n <= n_rows):
                return False
            if zero != NatV(0):
                return False
            if payload != a.items[tag.n - 1]:
                return False
        return True

    def s10(state, dp):
        b = state.binding
        a = b.value_of("A")
        bm = b.value_of("B")
        n_rows = _counter(b, "N")
        workers = _worker_count(dp)
        for entry in _queue_items(state, 0):
            if not (isinstance(entry, TupleV) and len(entry.items) == 3):
                return False
            payload, sender, tag = entry.items
            if not (isinstance(tag, NatV) and 1 <= tag.n <= n_rows):
                return False
            if not (isinstance(sender, NatV) and 1 <= sender.n <= workers):
                return False
            if payload != prod_value(a.items[tag.n - 1], bm):
                return False
        return True

    def s11(state, dp):
        b = state.binding
        a = b.value_of("A")
        bm = b.value_of("B")
        c = b.value_of("C")
        for j in sorted(_nat_set(b, GAMMA)):
            if c.items[j - 1] != prod_value(a.items[j - 1], bm):
                return False
        return True

    def s12(state, dp):
        b = state.binding
        if _counter(b, "k") != _counter(b, "N"):
            return True
        return _nat_set(b, GAMMA) == set(range(1, _counter(b, "N") + 1))

    return [
        spec("1", "alpha stays within the handed-out rows {1..i-1}", s1),
        spec("2", "at most N tasks are ever handed out (i-1 <= N)", s2),
        spec("3", "written-row count matches k and stays within N", s3),
        spec("4", "collecting with k < N means some result is outstanding", s4),
        spec("5", "result senders are never marked busy (c0 sources vs alpha)", s5),
        spec("6", "busy channels hold exactly one task; an answering worker "
                  "is neither busy nor repeating a written row", s6),
        spec("7", "after a receive the sender p is idle and p <= i-1", s7),
        spec("8", "task tags, beta, result tags and gamma partition {1..i-1}", s8),
        spec("9", "every busy channel holds one well-formed task triple", s9),
        spec("10", "every queued result is a tagged row product", s10),
        spec("11", "every written output cell equals its row product", s11),
        spec("12", "k = N forces gamma = {1..N}", s12),
    ]


def message_shape_suite() -> list[InvariantSpec]:
    """Wire-format checks on every reachable state, drain phase included:
    task channels carry (row-or-empty, 0, nat) triples, the result channel
    carries (row, rank >= 1, tag >= 1) triples."""

    def row_like(v: Value) -> bool:
        return isinstance(v, (RowAtom, ConcreteRow)) or v == STAR

    def tasks(state, dp):
        for w in range(1, _worker_count(dp) + 1):
            for entry in _queue_items(state, w):
                if not (isinstance(entry, TupleV) and len(entry.items) == 3):
                    return False
                payload, zero, tag = entry.items
                if not row_like(payload) or zero != NatV(0) \
                        or not isinstance(tag, NatV):
                    return False
        return True

    def results(state, dp):
        for entry in _queue_items(state, 0):
            if not (isinstance(entry, TupleV) and len(entry.items) == 3):
                return False
            payload, sender, tag = entry.items
            if not row_like(payload) or payload == STAR:
                return False
            if not (isinstance(sender, NatV) and sender.n >= 1):
                return False
            if not (isinstance(tag, NatV) and tag.n >= 1):
                return False
        return True

    return [
        InvariantSpec("task-shape", "task channels carry (row, 0, nat)", tasks),
        InvariantSpec("result-shape", "result channel carries (row, >=1, >=1)",
                      results),
    ]


# ---------------------------------------------------------------------------
# Documented mutations for sensitivity testing
# ---------------------------------------------------------------------------

MUTATIONS = ("drop-gamma-update", "swap-recv-guard", "send-tag-zero")


def build_mutant(params: MatmulParams, mutation: str) -> DistributedProcess:
    """Deliberately broken variants of the augmented model.

    drop-gamma-update: the coordinator forgets to record written rows.
    swap-recv-guard: the collect/exit guard pair becomes k<=N / k>N, so the
    coordinator waits for one result more than will ever arrive.
    send-tag-zero: first-round tasks are tagged 0, which workers read as the
    stop signal."""
    if mutation not in MUTATIONS:
        raise InvalidParams("unknown mutation %r" % mutation)
    dp = build_augmented(params)
    manager = dp.processes[0]
    edges = list(manager.edges)
    if mutation == "drop-gamma-update":
        collect = edges[2]
        steps = collect.action.steps[:2] + collect.action.steps[3:]
        edges[2] = Edge(collect.src, Action(steps, frozenset()), collect.dst)
    elif mutation == "swap-recv-guard":
        collect = edges[2]
        steps = (Guard(app("le", _k, _N)),) + collect.action.steps[1:]
        edges[2] = Edge(collect.src, Action(steps, collect.action.aux),
                        collect.dst)
        leave = edges[3]
        edges[3] = Edge(leave.src,
                        Action((Guard(app("gt", _k, _N)),), frozenset()),
                        leave.dst)
    elif mutation == "send-tag-zero":
        hand_out = edges[0]
        steps = list(hand_out.action.steps)
        steps[1] = Send(_chan(_i), tuple_term(Index(_A, _i), nat(0), nat(0)))
        edges[0] = Edge(hand_out.src, Action(tuple(steps), hand_out.action.aux),
                        hand_out.dst)
    mutated = SeqProcess(
        name=manager.name, nodes=manager.nodes, initial=manager.initial,
        edges=tuple(edges), inputs=manager.inputs, privates=manager.privates,
        init_values=manager.init_values, init_cond=manager.init_cond)
    return DistributedProcess((mutated,) + dp.processes[1:],
                              dp.aux_vars, dp.aux_init)
