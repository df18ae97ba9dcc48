"""Operational semantics: global states and the interleaving step relation.

A distributed process is a finite family of sequential processes with
pairwise disjoint private variables (enforced here by automatic renaming).
A state holds one global binding for every variable, the FIFO content of
every channel, and the control location of every process.  One transition
executes one whole edge label of one process atomically; all other
processes stand still, which is exactly the empty-transition clause of the
interleaving rule.

Channel addressing: channel i is a single shared FIFO.  The broadcast
channel is realized as one inbox per process: a broadcast send appends the
message to every other process's inbox, a broadcast receive reads the
receiver's own inbox.  This keeps one receiver from stealing a message
meant for all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .process import (
    Assign, Edge, Guard, Recv, Renaming, SeqProcess, Send, rename, validate,
)
from .terms import (
    BROADCAST, Binding, BoolV, ChanV, ChannelId, Const, EMPTY_QUEUE,
    EvaluationError, Index, ModelError, NatV, Queue, SetV, Term, TupleV,
    TypeMismatch, TypeTag, App, Value, Var, eval_term, type_of_value,
    types_compatible, value_key,
)


class MissingInput(ModelError):
    pass


# Channel-queue keys inside a state: ("c", i) is channel i, ("b", p) is the
# broadcast inbox of process p.
ChanKey = tuple


def chan_key(chan: ChannelId, receiver: Optional[int] = None) -> ChanKey:
    if chan.is_broadcast():
        if receiver is None:
            raise ModelError("broadcast queues are addressed per receiver")
        return ("b", receiver)
    return ("c", chan.index)


# ---------------------------------------------------------------------------
# Distributed processes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributedProcess:
    processes: tuple[SeqProcess, ...]
    aux_vars: tuple[tuple[str, TypeTag], ...] = ()
    aux_init: tuple[tuple[str, Value], ...] = ()

    def input_types(self) -> dict[str, TypeTag]:
        out: dict[str, TypeTag] = {}
        for p in self.processes:
            out.update(dict(p.inputs))
        return out

    def aux_types(self) -> dict[str, TypeTag]:
        return dict(self.aux_vars)

    def var_types(self) -> dict[str, TypeTag]:
        out = self.input_types()
        for p in self.processes:
            out.update(dict(p.privates))
        out.update(dict(self.aux_vars))
        return out

    def process_index(self, name: str) -> int:
        for i, p in enumerate(self.processes):
            if p.name == name:
                return i
        raise ModelError("no process named %r" % name)


def make_dp(processes, aux_vars=(), aux_init=None, check=True) -> DistributedProcess:
    """Assemble a distributed process.

    Same-named inputs across processes are shared and must agree on type.
    Colliding private names are renamed with deterministic suffixes so the
    disjointness requirement always holds.  With check=True each process is
    validated and any diagnostic raises."""
    processes = tuple(processes)
    names = [p.name for p in processes]
    if len(set(names)) != len(names):
        raise ModelError("duplicate process names: %s" % ", ".join(names))

    inputs: dict[str, TypeTag] = {}
    for p in processes:
        for n, ty in p.inputs:
            if n in inputs and inputs[n] != ty:
                raise ModelError(
                    "input %r declared with types %s and %s" % (n, inputs[n], ty))
            inputs[n] = ty

    aux_vars = tuple(aux_vars)
    aux_names = {n for n, _ in aux_vars}
    taken = set(inputs) | aux_names
    fixed = []
    for p in processes:
        mapping = {}
        for n, _ in p.privates:
            if n in taken:
                candidate = "%s_%s" % (n, p.name)
                k = 2
                while candidate in taken or candidate in mapping.values():
                    candidate = "%s_%s%d" % (n, p.name, k)
                    k += 1
                mapping[n] = candidate
        if mapping:
            p = rename(p, Renaming(tuple(sorted(mapping.items()))))
        taken |= set(p.private_names())
        fixed.append(p)

    init = dict(aux_init or ())
    full_init = []
    for n, ty in aux_vars:
        if n in init:
            v = init[n]
        elif ty.kind == "set":
            v = SetV(())
        else:
            raise ModelError("auxiliary %r of type %s needs an initial value"
                             % (n, ty))
        if not types_compatible(ty, type_of_value(v)):
            raise ModelError("auxiliary %r initial value has wrong type" % n)
        full_init.append((n, v))

    dp = DistributedProcess(tuple(fixed), aux_vars, tuple(full_init))
    if check:
        # Unreachable nodes are a lint, not an execution hazard.
        problems = ["%s: %s" % (p.name, d)
                    for p in dp.processes
                    for d in validate(p, dp.aux_types())
                    if d.code != "unreachable-node"]
        if problems:
            raise ModelError("invalid process model:\n"
                             + "\n".join("  " + line for line in problems))
    return dp


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DpState:
    """Global binding, per-channel queues (non-empty only), and control
    locations indexed like dp.processes."""

    binding: Binding
    channels: tuple[tuple[ChanKey, Queue], ...]
    locs: tuple[int, ...]

    def queue(self, key: ChanKey) -> Queue:
        for k, q in self.channels:
            if k == key:
                return q
        return EMPTY_QUEUE

    def with_queue(self, key: ChanKey, queue: Queue) -> "DpState":
        rest = tuple((k, q) for k, q in self.channels if k != key)
        if queue:
            rest = tuple(sorted(rest + ((key, queue),)))
        return DpState(self.binding, rest, self.locs)

    def with_binding(self, binding: Binding) -> "DpState":
        return DpState(binding, self.channels, self.locs)

    def with_loc(self, process: int, node: int) -> "DpState":
        locs = self.locs[:process] + (node,) + self.locs[process + 1:]
        return DpState(self.binding, self.channels, locs)


def state_key(s: DpState, drop_vars: frozenset = frozenset()) -> tuple:
    """Stable content-addressed key: locations, sorted binding, sorted
    non-empty queues.  drop_vars excludes variables from state identity."""
    bkey = tuple((n, value_key(t.value)) for n, t in s.binding.items()
                 if n not in drop_vars)
    ckey = tuple((k, tuple(value_key(v) for v in q.items))
                 for k, q in sorted(s.channels))
    return (s.locs, bkey, ckey)


class _StateEnv:
    """Adapter giving invariant terms read access to a state."""

    __slots__ = ("state", "dp")

    def __init__(self, state: DpState, dp: DistributedProcess):
        self.state = state
        self.dp = dp

    def loc_of(self, process_name: str) -> int:
        return self.state.locs[self.dp.process_index(process_name)]

    def queue_items(self, chan: ChannelId) -> tuple[Value, ...]:
        if chan.is_broadcast():
            raise EvaluationError(
                "broadcast content is per receiver; name an indexed channel")
        return self.state.queue(chan_key(chan)).items


def state_env(state: DpState, dp: DistributedProcess) -> _StateEnv:
    return _StateEnv(state, dp)


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------

def initial_states(dp: DistributedProcess,
                   inputs: Union[Binding, dict]) -> list[DpState]:
    """The initial state, if the given inputs satisfy every process's
    initial condition; empty otherwise.

    Inputs must cover exactly the shared input variables with values of the
    declared types.  Privates start at their declared initial values, ghost
    variables at theirs, all channels empty, every process at its start
    node."""
    if isinstance(inputs, Binding):
        given = {n: t.value for n, t in inputs.items()
                 if isinstance(t, Const)}
        if len(given) != len(inputs.items()):
            raise MissingInput("input binding must be ground")
    else:
        given = dict(inputs)
    declared = dp.input_types()
    missing = set(declared) - set(given)
    if missing:
        raise MissingInput("missing input values: %s" % ", ".join(sorted(missing)))
    extra = set(given) - set(declared)
    if extra:
        raise MissingInput("unknown inputs: %s" % ", ".join(sorted(extra)))
    for n, v in given.items():
        if not types_compatible(declared[n], type_of_value(v)):
            raise TypeMismatch("input %r has type %s, declared %s"
                               % (n, type_of_value(v), declared[n]))

    values = dict(given)
    for p in dp.processes:
        values.update(p.init_value_map())
    values.update(dict(dp.aux_init))
    binding = Binding.from_values(values)

    for p in dp.processes:
        cond = eval_term(p.init_cond, binding)
        if not isinstance(cond, BoolV):
            raise TypeMismatch("initial condition of %s is not boolean" % p.name)
        if not cond.flag:
            return []
    locs = tuple(p.initial for p in dp.processes)
    return [DpState(binding, (), locs)]


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    source: DpState
    process: int
    edge: int
    target: DpState


def _eval_chan(term: Term, binding: Binding, on_overlap) -> ChannelId:
    v = eval_term(term, binding, None, on_overlap)
    if not isinstance(v, ChanV):
        raise TypeMismatch("channel expression evaluated to %r" % (v,))
    return v.chan


def match_pattern(pattern: Term, value: Value, binding: Binding,
                  proc: SeqProcess) -> Optional[dict[str, Value]]:
    """Unify a restricted receive pattern against a message value.

    Returns the variable updates making the pattern equal the message, or
    None if no such update exists.  Private variables bind, constants and
    input reads compare, and array cells are written after the rest of the
    pattern has bound their index variables."""
    privates = set(proc.private_names())
    binds: dict[str, Value] = {}
    cells: list[tuple[str, Term, Value]] = []
    types = proc.var_types()

    def walk(pat: Term, val: Value) -> bool:
        if isinstance(pat, Const):
            return pat.value == val
        if isinstance(pat, Var):
            if pat.name in privates:
                declared = types[pat.name]
                if not types_compatible(declared, type_of_value(val)):
                    return False
                binds[pat.name] = val
                return True
            return binding.value_of(pat.name) == val
        if isinstance(pat, App) and pat.fsym == "tuple":
            if not isinstance(val, TupleV) or len(val.items) != len(pat.args):
                return False
            return all(walk(a, v) for a, v in zip(pat.args, val.items))
        if isinstance(pat, Index) and isinstance(pat.base, Var):
            cells.append((pat.base.name, pat.index, val))
            return True
        raise EvaluationError("unsupported receive pattern %r" % (pat,))

    if not walk(pattern, value):
        return None

    env = binding.updated_values(binds)
    for base, index_term, val in cells:
        idx = eval_term(index_term, env)
        if not isinstance(idx, NatV):
            raise TypeMismatch("cell index evaluated to %r" % (idx,))
        arr = env.value_of(base)
        if not isinstance(arr, TupleV):
            raise TypeMismatch("cell base %r is not an array" % base)
        if not 1 <= idx.n <= len(arr.items):
            raise EvaluationError("cell index %d out of range 1..%d"
                                  % (idx.n, len(arr.items)))
        new_arr = TupleV(arr.items[:idx.n - 1] + (val,) + arr.items[idx.n:])
        binds[base] = new_arr
        env = env.updated_values({base: new_arr})
    return binds


def step_elementary(state: DpState, process: int, ea, dp: DistributedProcess,
                    on_overlap=None) -> Optional[DpState]:
    """Execute one elementary action of one process, or report it disabled.

    Sends enqueue and never block; receives require a non-empty queue and a
    matching head; assignments update one variable or one array cell; guards
    either pass the state through or disable the step.  Only the stepping
    process's variables and the touched queue change."""
    binding = state.binding
    if isinstance(ea, Guard):
        cond = eval_term(ea.cond, binding, None, on_overlap)
        if not isinstance(cond, BoolV):
            raise TypeMismatch("guard evaluated to %r" % (cond,))
        return state if cond.flag else None
    if isinstance(ea, Send):
        chan = _eval_chan(ea.chan, binding, on_overlap)
        msg = eval_term(ea.msg, binding, None, on_overlap)
        if chan.is_broadcast():
            out = state
            for j in range(len(dp.processes)):
                if j != process:
                    key = chan_key(BROADCAST, j)
                    out = out.with_queue(key, out.queue(key).append(msg))
            return out
        key = chan_key(chan)
        return state.with_queue(key, state.queue(key).append(msg))
    if isinstance(ea, Recv):
        chan = _eval_chan(ea.chan, binding, on_overlap)
        key = chan_key(chan, process)
        queue = state.queue(key)
        if not queue:
            return None
        updates = match_pattern(ea.pattern, queue.head(), binding,
                                dp.processes[process])
        if updates is None:
            return None
        return (state.with_binding(binding.updated_values(updates))
                .with_queue(key, queue.tail()))
    if isinstance(ea, Assign):
        value = eval_term(ea.expr, binding, None, on_overlap)
        target = ea.target
        if isinstance(target, Var):
            return state.with_binding(binding.updated_values({target.name: value}))
        if isinstance(target, Index) and isinstance(target.base, Var):
            idx = eval_term(target.index, binding, None, on_overlap)
            if not isinstance(idx, NatV):
                raise TypeMismatch("cell index evaluated to %r" % (idx,))
            arr = binding.value_of(target.base.name)
            if not isinstance(arr, TupleV):
                raise TypeMismatch("assignment base %r is not an array"
                                   % target.base.name)
            if not 1 <= idx.n <= len(arr.items):
                raise EvaluationError("cell index %d out of range 1..%d"
                                      % (idx.n, len(arr.items)))
            new_arr = TupleV(arr.items[:idx.n - 1] + (value,) + arr.items[idx.n:])
            return state.with_binding(
                binding.updated_values({target.base.name: new_arr}))
        raise TypeMismatch("unsupported assignment target %r" % (target,))
    raise ModelError("unknown elementary action %r" % (ea,))


def step_action(state: DpState, process: int, edge_index: int,
                dp: DistributedProcess, on_overlap=None) -> Optional[DpState]:
    """Fire one whole edge label atomically: every elementary action must
    go through, otherwise the edge is disabled and the state untouched."""
    proc = dp.processes[process]
    edge = proc.edges[edge_index]
    if state.locs[process] != edge.src:
        return None
    current = state
    for ea in edge.action.steps:
        current = step_elementary(current, process, ea, dp, on_overlap)
        if current is None:
            return None
    return current.with_loc(process, edge.dst)


def successors(state: DpState, dp: DistributedProcess,
               on_overlap=None) -> list[Transition]:
    """All enabled transitions, enumerated by process index then edge index
    so exploration is reproducible."""
    out = []
    for i, proc in enumerate(dp.processes):
        node = state.locs[i]
        for edge_index, edge in enumerate(proc.edges):
            if edge.src != node:
                continue
            target = step_action(state, i, edge_index, dp, on_overlap)
            if target is not None:
                out.append(Transition(state, i, edge_index, target))
    return out


TERMINAL = "terminal"
DEADLOCK = "deadlock"
LIVE = "live"


def is_terminal(state: DpState, dp: DistributedProcess) -> bool:
    return all(not p.out_edges(state.locs[i])
               for i, p in enumerate(dp.processes))


def classify_state(state: DpState, dp: DistributedProcess,
                   succs: Optional[list[Transition]] = None) -> str:
    """Terminal if every process rests at a node with no outgoing edges;
    deadlock if non-terminal with no enabled transition; live otherwise."""
    if is_terminal(state, dp):
        return TERMINAL
    if succs is None:
        succs = successors(state, dp)
    return LIVE if succs else DEADLOCK


def erase_aux(dp: DistributedProcess) -> DistributedProcess:
    """Drop every auxiliary assignment and the ghost variables themselves.

    The erased model must behave identically; the explorer's isomorphism
    check is the machine side of that claim."""
    stripped = []
    for p in dp.processes:
        edges = tuple(Edge(e.src, e.action.without_aux(), e.dst)
                      for e in p.edges)
        stripped.append(SeqProcess(
            name=p.name, nodes=p.nodes, initial=p.initial, edges=edges,
            inputs=p.inputs, privates=p.privates, init_values=p.init_values,
            init_cond=p.init_cond))
    return DistributedProcess(tuple(stripped), (), ())
