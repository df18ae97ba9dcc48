"""Sequential processes: action-labeled control graphs.

A process is a graph whose edges carry actions (short sequences of
elementary sends, receives, assignments and guards, with at most one
send/receive per action), together with input variables, private variables
with declared initial values, and a boolean initial condition.  The control
variable is implicit: the execution layer tracks the current node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .terms import (
    BOOL, CHAN, Const, Index, ModelError, App, Term, TypeMismatch, TypeTag,
    UnboundVariable, Value, Var, infer_type, rename_term, type_of_value,
    types_compatible, vars_of, _has_state_terms,
)

NodeId = int


# ---------------------------------------------------------------------------
# Elementary actions and actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Send:
    chan: Term
    msg: Term


@dataclass(frozen=True)
class Recv:
    chan: Term
    pattern: Term


@dataclass(frozen=True)
class Assign:
    target: Term  # Var, or Index with a Var base
    expr: Term


@dataclass(frozen=True)
class Guard:
    cond: Term


ElementaryAction = Union[Send, Recv, Assign, Guard]

SENDING = "sending"
RECEIVING = "receiving"
INTERNAL = "internal"


class MalformedAction(ModelError):
    pass


@dataclass(frozen=True)
class Action:
    """A finite sequence of elementary actions executed atomically.

    aux marks the positions of auxiliary (ghost) assignments, which update
    bookkeeping variables only and can be erased without changing behavior.
    """

    steps: tuple[ElementaryAction, ...] = ()
    aux: frozenset[int] = frozenset()

    def without_aux(self) -> "Action":
        kept = tuple(s for i, s in enumerate(self.steps) if i not in self.aux)
        return Action(kept, frozenset())

    def mp_count(self) -> int:
        return sum(1 for s in self.steps if isinstance(s, (Send, Recv)))


def classify(action: Action) -> str:
    """Sending if the action contains a send, receiving if a receive,
    internal otherwise.  More than one send/receive is malformed."""
    sends = sum(1 for s in action.steps if isinstance(s, Send))
    recvs = sum(1 for s in action.steps if isinstance(s, Recv))
    if sends + recvs > 1:
        raise MalformedAction(
            "action holds %d message-passing steps, at most 1 allowed"
            % (sends + recvs))
    if sends:
        return SENDING
    if recvs:
        return RECEIVING
    return INTERNAL


# ---------------------------------------------------------------------------
# Sequential processes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    src: NodeId
    action: Action
    dst: NodeId


@dataclass(frozen=True)
class SeqProcess:
    name: str
    nodes: frozenset[NodeId]
    initial: NodeId
    edges: tuple[Edge, ...]
    inputs: tuple[tuple[str, TypeTag], ...]
    privates: tuple[tuple[str, TypeTag], ...]
    init_values: tuple[tuple[str, Value], ...]
    init_cond: Term

    def input_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.inputs)

    def private_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.privates)

    def var_types(self) -> dict[str, TypeTag]:
        out = dict(self.inputs)
        out.update(dict(self.privates))
        return out

    def init_value_map(self) -> dict[str, Value]:
        return dict(self.init_values)

    def out_edges(self, node: NodeId) -> list[tuple[int, Edge]]:
        return [(i, e) for i, e in enumerate(self.edges) if e.src == node]


def terms_of_ea(ea: ElementaryAction) -> tuple[Term, ...]:
    if isinstance(ea, Send):
        return (ea.chan, ea.msg)
    if isinstance(ea, Recv):
        return (ea.chan, ea.pattern)
    if isinstance(ea, Assign):
        return (ea.target, ea.expr)
    if isinstance(ea, Guard):
        return (ea.cond,)
    raise ModelError("unknown elementary action %r" % (ea,))


def _map_ea(ea: ElementaryAction, f) -> ElementaryAction:
    if isinstance(ea, Send):
        return Send(f(ea.chan), f(ea.msg))
    if isinstance(ea, Recv):
        return Recv(f(ea.chan), f(ea.pattern))
    if isinstance(ea, Assign):
        return Assign(f(ea.target), f(ea.expr))
    if isinstance(ea, Guard):
        return Guard(f(ea.cond))
    raise ModelError("unknown elementary action %r" % (ea,))


# ---------------------------------------------------------------------------
# Renaming
# ---------------------------------------------------------------------------

class RenameClash(ModelError):
    pass


@dataclass(frozen=True)
class Renaming:
    """An injective map on variable names; domain must be private variables."""

    mapping: tuple[tuple[str, str], ...]

    def as_dict(self) -> dict[str, str]:
        return dict(self.mapping)

    def inverse(self) -> "Renaming":
        return Renaming(tuple((b, a) for a, b in self.mapping))


def rename(p: SeqProcess, eta: Renaming) -> SeqProcess:
    """Rename private variables throughout labels, initializers and the
    initial condition.  The image must avoid inputs and untouched privates."""
    m = eta.as_dict()
    if len(set(m.values())) != len(m):
        raise RenameClash("renaming is not injective")
    privates = set(p.private_names())
    unknown = set(m) - privates
    if unknown:
        raise RenameClash("renaming domain outside privates: %s"
                          % ", ".join(sorted(unknown)))
    forbidden = set(p.input_names()) | (privates - set(m))
    hit = set(m.values()) & forbidden
    if hit:
        raise RenameClash("renamed variables collide with %s"
                          % ", ".join(sorted(hit)))

    def rt(t: Term) -> Term:
        return rename_term(t, m)

    return SeqProcess(
        name=p.name,
        nodes=p.nodes,
        initial=p.initial,
        edges=tuple(
            Edge(e.src,
                 Action(tuple(_map_ea(s, rt) for s in e.action.steps),
                        e.action.aux),
                 e.dst)
            for e in p.edges),
        inputs=p.inputs,
        privates=tuple((m.get(n, n), t) for n, t in p.privates),
        init_values=tuple((m.get(n, n), v) for n, v in p.init_values),
        init_cond=rt(p.init_cond),
    )


# ---------------------------------------------------------------------------
# Reduction
# ---------------------------------------------------------------------------

class ReductionInapplicable(ModelError):
    pass


def reduce(p: SeqProcess, v: NodeId) -> SeqProcess:
    """Remove node v, concatenating every in-label with every out-label.

    Applicable only when v is not the initial node, carries no self-loop,
    and all in-labels or all out-labels are internal (so no concatenation
    can hold two message-passing steps)."""
    if v not in p.nodes:
        raise ReductionInapplicable("node %r is not in the graph" % v)
    if v == p.initial:
        raise ReductionInapplicable("cannot reduce the initial node")
    ins = [e for e in p.edges if e.dst == v]
    outs = [e for e in p.edges if e.src == v]
    if any(e.src == v for e in ins):
        raise ReductionInapplicable("node %r has a self-loop" % v)
    ins_internal = all(classify(e.action) == INTERNAL for e in ins)
    outs_internal = all(classify(e.action) == INTERNAL for e in outs)
    if not (ins_internal or outs_internal):
        raise ReductionInapplicable(
            "neither all in-labels nor all out-labels of %r are internal" % v)

    kept = [e for e in p.edges if e.src != v and e.dst != v]
    new = []
    for ein in ins:
        for eout in outs:
            steps = ein.action.steps + eout.action.steps
            aux = frozenset(ein.action.aux) | frozenset(
                i + len(ein.action.steps) for i in eout.action.aux)
            merged = Action(steps, aux)
            if merged.mp_count() > 1:
                raise ReductionInapplicable(
                    "concatenated label would hold two message-passing steps")
            new.append(Edge(ein.src, merged, eout.dst))
    return SeqProcess(
        name=p.name,
        nodes=p.nodes - {v},
        initial=p.initial,
        edges=tuple(kept + new),
        inputs=p.inputs,
        privates=p.privates,
        init_values=p.init_values,
        init_cond=p.init_cond,
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    where: str = ""
    line: Optional[int] = None
    col: Optional[int] = None

    def __str__(self):
        pos = ""
        if self.line is not None:
            pos = "%d:%d: " % (self.line, self.col if self.col is not None else 0)
        where = " [%s]" % self.where if self.where else ""
        return "%s%s: %s%s" % (pos, self.code, self.message, where)


def pattern_leaves(pattern: Term) -> list[Term]:
    """Flatten a tuple-tree receive pattern into its leaves."""
    if isinstance(pattern, App) and pattern.fsym == "tuple":
        out = []
        for a in pattern.args:
            out.extend(pattern_leaves(a))
        return out
    return [pattern]


def check_pattern(pattern: Term, proc: SeqProcess) -> list[str]:
    """Validate the restricted receive-pattern form.

    Leaves must be private variables (each at most once), constants, input
    reads, or cells of private arrays whose index uses only declared
    variables or privates bound elsewhere in the same pattern."""
    problems = []
    privates = set(proc.private_names())
    inputs = set(proc.input_names())
    leaves = pattern_leaves(pattern)
    bound = []
    for leaf in leaves:
        if isinstance(leaf, Var) and leaf.name in privates:
            bound.append(leaf.name)
    dup = {n for n in bound if bound.count(n) > 1}
    if dup:
        problems.append("pattern binds %s more than once"
                        % ", ".join(sorted(dup)))
    for leaf in leaves:
        if isinstance(leaf, Const):
            continue
        if isinstance(leaf, Var):
            if leaf.name not in privates and leaf.name not in inputs:
                problems.append("pattern variable %r is not declared" % leaf.name)
            continue
        if isinstance(leaf, Index):
            if not (isinstance(leaf.base, Var) and leaf.base.name in privates):
                problems.append("pattern cell base must be a private array")
                continue
            free = vars_of(leaf.index)
            undeclared = free - privates - inputs
            if undeclared:
                problems.append("pattern cell index uses unknown %s"
                                % ", ".join(sorted(undeclared)))
            continue
        problems.append("unsupported pattern leaf %r" % (leaf,))
    return problems


def validate(p: SeqProcess, aux_types: Optional[dict[str, TypeTag]] = None
             ) -> list[Diagnostic]:
    """Check every structural invariant; an empty list means the process is
    well formed.  aux_types declares the ghost variables auxiliary
    assignments may read and write."""
    aux_types = aux_types or {}
    out: list[Diagnostic] = []

    def bad(code, message, where=""):
        out.append(Diagnostic(code, message, where))

    if p.initial not in p.nodes:
        bad("bad-initial", "initial node %r not among nodes" % p.initial)

    names = list(p.input_names()) + list(p.private_names())
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        bad("duplicate-variable",
            "declared more than once: %s" % ", ".join(sorted(dup)))
    overlap = set(p.input_names()) & set(p.private_names())
    if overlap:
        bad("input-private-overlap",
            "both input and private: %s" % ", ".join(sorted(overlap)))

    var_types = p.var_types()
    init_map = p.init_value_map()
    for name, ty in p.privates:
        if name not in init_map:
            bad("missing-initializer", "private %r has no initial value" % name)
        elif not types_compatible(ty, type_of_value(init_map[name])):
            bad("type-mismatch",
                "initializer of %r has type %s, declared %s"
                % (name, type_of_value(init_map[name]), ty))
    for name in init_map:
        if name not in dict(p.privates):
            bad("unknown-variable", "initializer for undeclared %r" % name)

    bad_init_vars = vars_of(p.init_cond) - set(var_types)
    if bad_init_vars:
        bad("unknown-variable",
            "initial condition uses %s" % ", ".join(sorted(bad_init_vars)),
            "init")
    else:
        try:
            ty = infer_type(p.init_cond, var_types)
            if not types_compatible(BOOL, ty):
                bad("type-mismatch", "initial condition has type %s" % ty, "init")
        except (TypeMismatch, UnboundVariable) as exc:
            bad("type-mismatch", str(exc), "init")

    all_types = dict(var_types)
    all_types.update(aux_types)

    for ei, e in enumerate(p.edges):
        where = "edge %d (%d->%d)" % (ei, e.src, e.dst)
        if e.src not in p.nodes or e.dst not in p.nodes:
            bad("bad-edge-endpoint", "endpoint not among nodes", where)
        try:
            classify(e.action)
        except MalformedAction as exc:
            bad("too-many-mp", str(exc), where)
        for si, step in enumerate(e.action.steps):
            is_aux = si in e.action.aux
            swhere = "%s step %d" % (where, si)
            used = frozenset()
            for t in terms_of_ea(step):
                used |= vars_of(t)
                if _has_state_terms(t):
                    bad("state-term-in-label",
                        "state-dependent terms are only for invariants", swhere)
            if is_aux:
                if not isinstance(step, Assign):
                    bad("aux-not-assignment",
                        "auxiliary steps must be assignments", swhere)
                    continue
                tgt = step.target
                if not (isinstance(tgt, Var) and tgt.name in aux_types):
                    bad("aux-target",
                        "auxiliary assignment must write an auxiliary variable",
                        swhere)
                unknown = used - set(all_types)
                if unknown:
                    bad("unknown-variable",
                        "uses %s" % ", ".join(sorted(unknown)), swhere)
                continue
            # Real steps must not depend on ghost state, or erasing the
            # auxiliaries would change behavior.
            leaked = used & set(aux_types)
            if leaked:
                bad("aux-leak",
                    "non-auxiliary step reads auxiliary %s"
                    % ", ".join(sorted(leaked)), swhere)
            unknown = used - set(var_types)
            if unknown - set(aux_types):
                bad("unknown-variable",
                    "uses %s" % ", ".join(sorted(unknown - set(aux_types))),
                    swhere)
                continue
            out.extend(Diagnostic(d.code, d.message, swhere)
                       for d in _check_step_types(step, p, var_types))
    reachable = _reachable_nodes(p)
    for node in sorted(p.nodes - reachable):
        bad("unreachable-node", "node %r cannot be reached" % node)
    return out


def _check_step_types(step, p: SeqProcess, var_types) -> list[Diagnostic]:
    out = []

    def check_type(term, expected, what):
        try:
            ty = infer_type(term, var_types)
        except (TypeMismatch, UnboundVariable) as exc:
            out.append(Diagnostic("type-mismatch", "%s: %s" % (what, exc)))
            return None
        if expected is not None and not types_compatible(expected, ty):
            out.append(Diagnostic(
                "type-mismatch", "%s has type %s, expected %s" % (what, ty, expected)))
        return ty

    if isinstance(step, Guard):
        check_type(step.cond, BOOL, "guard")
    elif isinstance(step, Send):
        check_type(step.chan, CHAN, "send channel")
        check_type(step.msg, None, "send message")
    elif isinstance(step, Recv):
        check_type(step.chan, CHAN, "receive channel")
        for problem in check_pattern(step.pattern, p):
            out.append(Diagnostic("bad-pattern", problem))
    elif isinstance(step, Assign):
        tgt = step.target
        if isinstance(tgt, Var):
            lhs_ty = check_type(tgt, None, "assignment target")
        elif isinstance(tgt, Index) and isinstance(tgt.base, Var):
            lhs_ty = check_type(tgt, None, "assignment target cell")
        else:
            out.append(Diagnostic(
                "bad-assignment", "target must be a variable or array cell"))
            lhs_ty = None
        rhs_ty = check_type(step.expr, None, "assignment expression")
        if lhs_ty is not None and rhs_ty is not None:
            if not types_compatible(lhs_ty, rhs_ty):
                out.append(Diagnostic(
                    "type-mismatch",
                    "assigning %s to target of type %s" % (rhs_ty, lhs_ty)))
    return out


def _reachable_nodes(p: SeqProcess) -> frozenset[NodeId]:
    seen = {p.initial}
    frontier = [p.initial]
    while frontier:
        node = frontier.pop()
        for _, e in p.out_edges(node):
            if e.dst not in seen:
                seen.add(e.dst)
                frontier.append(e.dst)
    return frozenset(seen)
