"""Shared test fixtures: toy models, the frozen hand enumeration for the
smallest instance, and a seeded generator of small random models."""

import random
from pathlib import Path

from dpverify import (
    Action, Assign, Binding, DistributedProcess, DpState, Edge, Guard,
    MatrixAtom, NAT, NatV, Queue, Recv, RowAtom, STAR, Send, SeqProcess,
    TupleV, Var, app, boolc, make_dp, nat,
)
from dpverify.terms import tuple_term

REPO_ROOT = Path(__file__).resolve().parents[1]
MODELS = REPO_ROOT / "models"


def model_text(name):
    return (MODELS / name).read_text()


# ---------------------------------------------------------------------------
# Toy models
# ---------------------------------------------------------------------------

def counter_process(name="Count", chan=1, limit=2):
    """Sends limit messages on a channel, then stops."""
    x = Var("x", NAT)
    return SeqProcess(
        name=name, nodes=frozenset((0, 1)), initial=0,
        edges=(
            Edge(0, Action((Guard(app("lt", x, nat(limit))),
                            Send(app("channel", nat(chan)), x),
                            Assign(x, app("add", x, nat(1))))), 0),
            Edge(0, Action((Guard(app("ge", x, nat(limit))),)), 1),
        ),
        inputs=(), privates=(("x", NAT),), init_values=(("x", NatV(0)),),
        init_cond=boolc(True))


def sink_process(name="Sink", chan=1):
    y = Var("y", NAT)
    return SeqProcess(
        name=name, nodes=frozenset((0,)), initial=0,
        edges=(Edge(0, Action((Recv(app("channel", nat(chan)), y),)), 0),),
        inputs=(), privates=(("y", NAT),), init_values=(("y", NatV(0)),),
        init_cond=boolc(True))


def mutual_wait_dp():
    """Two peers that each receive before sending: deadlocks immediately."""
    def peer(name, recv_on, send_on, var):
        v = Var(var, NAT)
        return SeqProcess(
            name=name, nodes=frozenset((0, 1, 2)), initial=0,
            edges=(
                Edge(0, Action((Recv(app("channel", nat(recv_on)), v),)), 1),
                Edge(1, Action((Send(app("channel", nat(send_on)), nat(7)),)), 2),
            ),
            inputs=(), privates=((var, NAT),), init_values=((var, NatV(0)),),
            init_cond=boolc(True))
    return make_dp([peer("L", 1, 2, "x"), peer("R", 2, 1, "y")])


def self_loop_dp():
    p = SeqProcess(
        name="Spin", nodes=frozenset((0,)), initial=0,
        edges=(Edge(0, Action((Guard(boolc(True)),)), 0),),
        inputs=(), privates=(), init_values=(), init_cond=boolc(True))
    return make_dp([p])


# ---------------------------------------------------------------------------
# Frozen hand enumeration: the complete reachable graph of the smallest
# row-distribution instance (one row, one worker), traced by hand from the
# two process graphs before the explorer existed.
# ---------------------------------------------------------------------------

A1 = RowAtom("A", 1)
PROD1 = RowAtom("prod", 1)
TASK1 = TupleV((A1, NatV(0), NatV(1)))
RESULT1 = TupleV((PROD1, NatV(1), NatV(1)))
STOP = TupleV((STAR, NatV(0), NatV(0)))


def hand_state(at0, at1, i, k, l, j, p, c1, y, jw, q0=(), q1=()):
    values = {
        "A": TupleV((A1,)), "B": MatrixAtom("B"), "N": NatV(1), "n": NatV(1),
        "C": TupleV((c1,)), "i": NatV(i), "j": NatV(j), "k": NatV(k),
        "l": NatV(l), "p": NatV(p), "Y_1": y, "j_1": NatV(jw),
    }
    channels = []
    if q0:
        channels.append((("c", 0), Queue(tuple(q0))))
    if q1:
        channels.append((("c", 1), Queue(tuple(q1))))
    return DpState(Binding.from_values(values), tuple(sorted(channels)),
                   (at0, at1))


# Milestones: task sent; worker took it; result queued; result written;
# stop sent; stop taken; both sides halted.
HAND_STATES = [
    hand_state(0, 0, 1, 0, 1, 0, 0, STAR, STAR, 0),                      # 0
    hand_state(0, 0, 2, 0, 1, 0, 0, STAR, STAR, 0, q1=(TASK1,)),         # 1
    hand_state(1, 0, 2, 0, 1, 0, 0, STAR, STAR, 0, q1=(TASK1,)),         # 2
    hand_state(0, 1, 2, 0, 1, 0, 0, STAR, A1, 1),                        # 3
    hand_state(1, 1, 2, 0, 1, 0, 0, STAR, A1, 1),                        # 4
    hand_state(0, 0, 2, 0, 1, 0, 0, STAR, A1, 1, q0=(RESULT1,)),         # 5
    hand_state(1, 0, 2, 0, 1, 0, 0, STAR, A1, 1, q0=(RESULT1,)),         # 6
    hand_state(2, 0, 2, 1, 1, 1, 1, PROD1, A1, 1),                       # 7
    hand_state(1, 0, 2, 1, 1, 1, 1, PROD1, A1, 1),                       # 8
    hand_state(3, 0, 2, 1, 1, 1, 1, PROD1, A1, 1),                       # 9
    hand_state(3, 0, 2, 1, 2, 1, 1, PROD1, A1, 1, q1=(STOP,)),           # 10
    hand_state(4, 0, 2, 1, 2, 1, 1, PROD1, A1, 1, q1=(STOP,)),           # 11
    hand_state(3, 1, 2, 1, 2, 1, 1, PROD1, STAR, 0),                     # 12
    hand_state(4, 1, 2, 1, 2, 1, 1, PROD1, STAR, 0),                     # 13
    hand_state(3, 2, 2, 1, 2, 1, 1, PROD1, STAR, 0),                     # 14
    hand_state(4, 2, 2, 1, 2, 1, 1, PROD1, STAR, 0),                     # 15
]

# (source state, process index, edge index, target state).  Manager edges:
# 0 hand-out loop, 1 leave hand-out, 2 collect, 3 leave collect, 4 skip
# resend, 5 resend, 6 stop loop, 7 halt.  Worker edges: 0 take, 1 answer,
# 2 halt.
HAND_EDGES = [
    (0, 0, 0, 1),
    (1, 0, 1, 2), (1, 1, 0, 3),
    (2, 1, 0, 4),
    (3, 0, 1, 4), (3, 1, 1, 5),
    (4, 1, 1, 6),
    (5, 0, 1, 6),
    (6, 0, 2, 7),
    (7, 0, 4, 8),
    (8, 0, 3, 9),
    (9, 0, 6, 10),
    (10, 0, 7, 11), (10, 1, 0, 12),
    (11, 1, 0, 13),
    (12, 0, 7, 13), (12, 1, 2, 14),
    (13, 1, 2, 15),
    (14, 0, 7, 15),
]

HAND_TERMINAL = 15


# ---------------------------------------------------------------------------
# Random small models for the semantics property suites
# ---------------------------------------------------------------------------

def random_process(rng: random.Random, name: str, var: str,
                   chans=(1, 2)) -> SeqProcess:
    x = Var(var, NAT)
    nodes = frozenset((0, 1, 2))
    edges = []
    n_edges = rng.randint(2, 4)
    for _ in range(n_edges):
        src = rng.choice((0, 0, 1, 2))
        dst = rng.choice((0, 1, 2))
        kind = rng.choice(("guard", "send", "recv", "assign", "mixed"))
        if kind == "guard":
            steps = (Guard(app(rng.choice(("lt", "le", "ge")), x,
                               nat(rng.randint(0, 3)))),)
        elif kind == "send":
            steps = (Send(app("channel", nat(rng.choice(chans))),
                          rng.choice((x, nat(rng.randint(0, 3)),
                                      tuple_term(x, nat(1))))),)
        elif kind == "recv":
            pattern = rng.choice((x, tuple_term(x, nat(1))))
            steps = (Recv(app("channel", nat(rng.choice(chans))), pattern),)
        elif kind == "assign":
            steps = (Assign(x, rng.choice((app("add", x, nat(1)),
                                           nat(rng.randint(0, 3))))),)
        else:
            steps = (Guard(app("le", x, nat(3))),
                     Send(app("channel", nat(rng.choice(chans))), x),
                     Assign(x, app("add", x, nat(1))))
        edges.append(Edge(src, Action(steps), dst))
    # Guarantee one guard-only edge so guard invariance gets exercised.
    edges.append(Edge(0, Action((Guard(app("ge", x, nat(0))),)), 1))
    return SeqProcess(
        name=name, nodes=nodes, initial=0, edges=tuple(edges),
        inputs=(), privates=((var, NAT),),
        init_values=((var, NatV(rng.randint(0, 2))),), init_cond=boolc(True))


def random_dp(rng: random.Random) -> DistributedProcess:
    return make_dp([random_process(rng, "A", "x"),
                    random_process(rng, "B", "y")])


def random_walk(rng: random.Random, dp, steps=4):
    """A random path from the initial state; returns the visited states and
    the transitions taken."""
    from dpverify import initial_states, successors
    state = initial_states(dp, {})[0]
    path = []
    states = [state]
    for _ in range(steps):
        succs = successors(state, dp)
        if not succs:
            break
        tr = rng.choice(succs)
        path.append(tr)
        state = tr.target
        states.append(state)
    return states, path
