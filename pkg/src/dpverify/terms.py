"""Typed values, terms, bindings and FIFO queues.

This is the expression layer everything else builds on: ground values with a
canonical total order (so sets and whole states hash stably), a small closed
signature of interpreted function symbols, terms over variables, and bindings
with substitution/composition.  Evaluation is pure; the only observable side
channel is the optional overlap callback fired when a disjoint-union
application sees non-disjoint arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union


class ModelError(Exception):
    """Base error for malformed models or misused APIs."""


class EvaluationError(ModelError):
    pass


class UnboundVariable(EvaluationError):
    pass


class TypeMismatch(EvaluationError):
    pass


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeTag:
    """A type: one of the scalar kinds, or tuple/set/array over other types.

    "array" is an unsized homogeneous sequence; its values are ordinary
    tuples.  "any" is an internal wildcard used for polymorphic signature
    slots and the element type of the empty set literal.
    """

    kind: str
    args: tuple["TypeTag", ...] = ()

    def __str__(self):
        if self.kind == "tuple":
            return "tuple(%s)" % ", ".join(str(a) for a in self.args)
        if self.kind == "set":
            return "set of %s" % self.args[0]
        if self.kind == "array":
            return "array of %s" % self.args[0]
        return self.kind


BOOL = TypeTag("bool")
NAT = TypeTag("nat")
CHAN = TypeTag("chan")
ROW = TypeTag("row")
MATRIX = TypeTag("matrix")
NODE = TypeTag("node")
ANY = TypeTag("any")


def tuple_type(*args: TypeTag) -> TypeTag:
    return TypeTag("tuple", tuple(args))


def set_type(elem: TypeTag) -> TypeTag:
    if elem.kind == "set":
        raise ModelError("nested set types are not supported")
    return TypeTag("set", (elem,))


def array_type(elem: TypeTag) -> TypeTag:
    return TypeTag("array", (elem,))


def types_compatible(expected: TypeTag, actual: TypeTag) -> bool:
    if expected.kind == "any" or actual.kind == "any":
        return True
    if expected.kind == "array" and actual.kind in ("tuple", "array"):
        return all(types_compatible(expected.args[0], a) for a in actual.args)
    if actual.kind == "array" and expected.kind == "tuple":
        return all(types_compatible(a, actual.args[0]) for a in expected.args)
    if expected.kind != actual.kind:
        return False
    if len(expected.args) != len(actual.args):
        return False
    return all(types_compatible(e, a) for e, a in zip(expected.args, actual.args))


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelId:
    """A channel address: index i >= 0, or None for the broadcast channel."""

    index: Optional[int]

    def is_broadcast(self) -> bool:
        return self.index is None


BROADCAST = ChannelId(None)


class Value:
    """Base class for ground values.  All subclasses are frozen dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class BoolV(Value):
    flag: bool


@dataclass(frozen=True)
class NatV(Value):
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ModelError("naturals cannot be negative: %d" % self.n)


@dataclass(frozen=True)
class ChanV(Value):
    chan: ChannelId


@dataclass(frozen=True)
class TupleV(Value):
    items: tuple[Value, ...]


@dataclass(frozen=True)
class SetV(Value):
    """A finite set, stored as a canonically sorted tuple.  Use make_set."""

    items: tuple[Value, ...]

    def __post_init__(self):
        keys = [value_key(v) for v in self.items]
        if sorted(keys) != keys or len(set(keys)) != len(keys):
            raise ModelError("SetV items must be sorted and unique; use make_set")

    def as_pyset(self) -> frozenset:
        return frozenset(self.items)


SRC_A = "A"
SRC_PROD = "prod"


@dataclass(frozen=True)
class RowAtom(Value):
    """Opaque row payload: the i-th source row, or the i-th product row."""

    source: str
    index: int

    def __post_init__(self):
        if self.source not in (SRC_A, SRC_PROD):
            raise ModelError("unknown row source %r" % self.source)
        if self.index < 1:
            raise ModelError("row index must be >= 1")


@dataclass(frozen=True)
class StarV(Value):
    """The empty-string payload; distinct from every tuple and atom."""


STAR = StarV()


@dataclass(frozen=True)
class MatrixAtom(Value):
    name: str


@dataclass(frozen=True)
class NodeV(Value):
    node: int


@dataclass(frozen=True)
class ConcreteRow(Value):
    entries: tuple[Fraction, ...]


@dataclass(frozen=True)
class ConcreteMatrix(Value):
    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        widths = {len(r) for r in self.rows}
        if len(widths) > 1:
            raise ModelError("matrix rows must have equal length")


def make_set(items: Iterable[Value]) -> SetV:
    dedup = {value_key(v): v for v in items}
    return SetV(tuple(dedup[k] for k in sorted(dedup)))


EMPTY_SET = make_set(())


def make_nat_set(ns: Iterable[int]) -> SetV:
    return make_set(NatV(n) for n in ns)


def value_key(v: Value) -> tuple:
    """Canonical, hashable, totally ordered encoding of a value.

    Every key is a tuple whose first element is a short tag string and whose
    remaining shape is fixed per tag, so keys of different variants compare
    without type errors.
    """
    if isinstance(v, BoolV):
        return ("b", 1 if v.flag else 0)
    if isinstance(v, NatV):
        return ("n", v.n)
    if isinstance(v, ChanV):
        return ("c", 1, 0) if v.chan.is_broadcast() else ("c", 0, v.chan.index)
    if isinstance(v, TupleV):
        return ("t", len(v.items)) + tuple(value_key(x) for x in v.items)
    if isinstance(v, SetV):
        return ("s", len(v.items)) + tuple(value_key(x) for x in v.items)
    if isinstance(v, RowAtom):
        return ("r", 0 if v.source == SRC_A else 1, v.index)
    if isinstance(v, StarV):
        return ("star",)
    if isinstance(v, MatrixAtom):
        return ("m", v.name)
    if isinstance(v, NodeV):
        return ("v", v.node)
    if isinstance(v, ConcreteRow):
        return ("cr", len(v.entries)) + tuple(
            (e.numerator, e.denominator) for e in v.entries)
    if isinstance(v, ConcreteMatrix):
        return ("cm", len(v.rows)) + tuple(
            tuple((e.numerator, e.denominator) for e in row) for row in v.rows)
    raise ModelError("unknown value %r" % (v,))


def type_of_value(v: Value) -> TypeTag:
    if isinstance(v, BoolV):
        return BOOL
    if isinstance(v, NatV):
        return NAT
    if isinstance(v, ChanV):
        return CHAN
    if isinstance(v, TupleV):
        return tuple_type(*(type_of_value(x) for x in v.items))
    if isinstance(v, SetV):
        if not v.items:
            return TypeTag("set", (ANY,))
        return TypeTag("set", (type_of_value(v.items[0]),))
    if isinstance(v, (RowAtom, StarV, ConcreteRow)):
        return ROW
    if isinstance(v, (MatrixAtom, ConcreteMatrix)):
        return MATRIX
    if isinstance(v, NodeV):
        return NODE
    raise ModelError("unknown value %r" % (v,))


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    name: str
    type: TypeTag


@dataclass(frozen=True)
class Const(Term):
    value: Value


@dataclass(frozen=True)
class App(Term):
    fsym: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Index(Term):
    """An array-cell term: base evaluates to a tuple, index is 1-based."""

    base: Term
    index: Term


# State-dependent terms, used only by invariant expressions (never in edge
# labels): they read control locations and channel contents of a whole state.

@dataclass(frozen=True)
class AtLoc(Term):
    process: str


@dataclass(frozen=True)
class QueueLen(Term):
    chan: Term


@dataclass(frozen=True)
class QueueProj(Term):
    """The set of k-th components of the entries of a channel queue."""

    chan: Term
    component: int


def nat(n: int) -> Const:
    return Const(NatV(n))


def boolc(b: bool) -> Const:
    return Const(BoolV(b))


TRUE = boolc(True)
FALSE = boolc(False)


def vars_of(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, Const):
        return frozenset()
    if isinstance(t, App):
        out: frozenset[str] = frozenset()
        for a in t.args:
            out |= vars_of(a)
        return out
    if isinstance(t, Index):
        return vars_of(t.base) | vars_of(t.index)
    if isinstance(t, AtLoc):
        return frozenset()
    if isinstance(t, (QueueLen, QueueProj)):
        return vars_of(t.chan)
    raise ModelError("unknown term %r" % (t,))


def is_ground(t: Term) -> bool:
    return not vars_of(t) and not _has_state_terms(t)


def _has_state_terms(t: Term) -> bool:
    if isinstance(t, (AtLoc, QueueLen, QueueProj)):
        return True
    if isinstance(t, App):
        return any(_has_state_terms(a) for a in t.args)
    if isinstance(t, Index):
        return _has_state_terms(t.base) or _has_state_terms(t.index)
    return False


# ---------------------------------------------------------------------------
# Function symbols
# ---------------------------------------------------------------------------

def _nat2(v: Value, what: str) -> int:
    if not isinstance(v, NatV):
        raise TypeMismatch("%s expects naturals, got %r" % (what, v))
    return v.n


def _bool2(v: Value, what: str) -> bool:
    if not isinstance(v, BoolV):
        raise TypeMismatch("%s expects booleans, got %r" % (what, v))
    return v.flag


def _set2(v: Value, what: str) -> SetV:
    if not isinstance(v, SetV):
        raise TypeMismatch("%s expects sets, got %r" % (what, v))
    return v


def _vecmat(row: ConcreteRow, mat: ConcreteMatrix) -> ConcreteRow:
    if len(row.entries) != len(mat.rows):
        raise TypeMismatch("row length %d does not match matrix height %d"
                           % (len(row.entries), len(mat.rows)))
    width = len(mat.rows[0]) if mat.rows else 0
    out = []
    for j in range(width):
        acc = Fraction(0)
        for k, x in enumerate(row.entries):
            acc += x * mat.rows[k][j]
        out.append(acc)
    return ConcreteRow(tuple(out))


def prod_value(row: Value, mat: Value) -> Value:
    """Row-by-matrix product.  Symbolic atoms map to product atoms keyed by
    the row index; the empty payload stays empty; concrete rows multiply out
    exactly.  Mixing symbolic and concrete operands is rejected."""
    if isinstance(row, StarV):
        return STAR
    if isinstance(row, RowAtom) and isinstance(mat, MatrixAtom):
        return RowAtom(SRC_PROD, row.index)
    if isinstance(row, ConcreteRow) and isinstance(mat, ConcreteMatrix):
        return _vecmat(row, mat)
    raise TypeMismatch("prod cannot combine %r and %r" % (row, mat))


@dataclass(frozen=True)
class FuncSym:
    """An interpreted function symbol: name, signature, total interpretation.

    arg_types of None means variadic with unconstrained argument types.
    """

    name: str
    arg_types: Optional[tuple[TypeTag, ...]]
    result_type: Callable[[tuple[TypeTag, ...]], TypeTag]
    fn: Callable[..., Value]


def _fixed(t: TypeTag):
    return lambda args: t


def _make_signature() -> dict[str, FuncSym]:
    sig = {}

    def add(name, arg_types, result_type, fn):
        sig[name] = FuncSym(name, arg_types, result_type, fn)

    add("add", (NAT, NAT), _fixed(NAT),
        lambda a, b: NatV(_nat2(a, "add") + _nat2(b, "add")))
    # Truncated subtraction: naturals have no negatives.
    add("sub", (NAT, NAT), _fixed(NAT),
        lambda a, b: NatV(max(0, _nat2(a, "sub") - _nat2(b, "sub"))))
    add("min", (NAT, NAT), _fixed(NAT),
        lambda a, b: NatV(min(_nat2(a, "min"), _nat2(b, "min"))))
    add("eq", (ANY, ANY), _fixed(BOOL), lambda a, b: BoolV(a == b))
    add("ne", (ANY, ANY), _fixed(BOOL), lambda a, b: BoolV(a != b))
    add("lt", (NAT, NAT), _fixed(BOOL),
        lambda a, b: BoolV(_nat2(a, "lt") < _nat2(b, "lt")))
    add("le", (NAT, NAT), _fixed(BOOL),
        lambda a, b: BoolV(_nat2(a, "le") <= _nat2(b, "le")))
    add("gt", (NAT, NAT), _fixed(BOOL),
        lambda a, b: BoolV(_nat2(a, "gt") > _nat2(b, "gt")))
    add("ge", (NAT, NAT), _fixed(BOOL),
        lambda a, b: BoolV(_nat2(a, "ge") >= _nat2(b, "ge")))
    add("and", (BOOL, BOOL), _fixed(BOOL),
        lambda a, b: BoolV(_bool2(a, "and") and _bool2(b, "and")))
    add("or", (BOOL, BOOL), _fixed(BOOL),
        lambda a, b: BoolV(_bool2(a, "or") or _bool2(b, "or")))
    add("not", (BOOL,), _fixed(BOOL), lambda a: BoolV(not _bool2(a, "not")))
    add("tuple", None, lambda args: tuple_type(*args),
        lambda *items: TupleV(tuple(items)))
    add("channel", (NAT,), _fixed(CHAN),
        lambda a: ChanV(ChannelId(_nat2(a, "channel"))))
    add("set_of", None, lambda args: TypeTag("set", (args[0] if args else ANY,)),
        lambda *items: make_set(items))
    add("union", (TypeTag("set", (ANY,)), TypeTag("set", (ANY,))),
        lambda args: args[0],
        lambda a, b: make_set(_set2(a, "union").items + _set2(b, "union").items))
    # dunion is the marked union whose firings are audited for disjointness;
    # its plain result is the same as union.
    add("dunion", (TypeTag("set", (ANY,)), TypeTag("set", (ANY,))),
        lambda args: args[0],
        lambda a, b: make_set(_set2(a, "dunion").items + _set2(b, "dunion").items))
    add("diff", (TypeTag("set", (ANY,)), TypeTag("set", (ANY,))),
        lambda args: args[0],
        lambda a, b: make_set(
            x for x in _set2(a, "diff").items
            if x not in _set2(b, "diff").as_pyset()))
    add("member", (ANY, TypeTag("set", (ANY,))), _fixed(BOOL),
        lambda a, b: BoolV(a in _set2(b, "member").as_pyset()))
    add("size", (TypeTag("set", (ANY,)),), _fixed(NAT),
        lambda a: NatV(len(_set2(a, "size").items)))
    add("prod", (ROW, MATRIX), _fixed(ROW), prod_value)
    return sig


SIGNATURE: dict[str, FuncSym] = _make_signature()


def app(name: str, *args: Term) -> App:
    if name not in SIGNATURE:
        raise ModelError("unknown function symbol %r" % name)
    return App(name, tuple(args))


def tuple_term(*args: Term) -> App:
    return App("tuple", tuple(args))


def chan_term(index: Union[int, Term]) -> Term:
    if isinstance(index, int):
        return Const(ChanV(ChannelId(index)))
    return App("channel", (index,))


# ---------------------------------------------------------------------------
# Bindings
# ---------------------------------------------------------------------------

class Binding:
    """Immutable map from variable names to terms.

    In states every image is a Const; elsewhere images may be arbitrary
    terms.  Variables outside the mapping behave as mapped to themselves,
    which is how substitution realizes the identity default.
    """

    __slots__ = ("_map", "_key")

    def __init__(self, entries: Union[dict, Iterable[tuple[str, Term]], None] = None):
        if entries is None:
            m: dict[str, Term] = {}
        elif isinstance(entries, dict):
            m = dict(entries)
        else:
            m = dict(entries)
        for name, t in m.items():
            if not isinstance(t, Term):
                raise ModelError("binding image for %s must be a term" % name)
        self._map = m
        self._key = tuple(sorted(m.items(), key=lambda kv: kv[0]))

    @classmethod
    def from_values(cls, mapping: dict[str, Value]) -> "Binding":
        return cls({k: Const(v) for k, v in mapping.items()})

    def domain(self) -> frozenset[str]:
        return frozenset(self._map)

    def get(self, name: str) -> Optional[Term]:
        return self._map.get(name)

    def term(self, name: str) -> Term:
        try:
            return self._map[name]
        except KeyError:
            raise UnboundVariable("variable %r is not bound" % name) from None

    def value_of(self, name: str) -> Value:
        t = self.term(name)
        if not isinstance(t, Const):
            raise UnboundVariable("variable %r is bound to a non-ground term" % name)
        return t.value

    def updated(self, mapping: dict[str, Term]) -> "Binding":
        m = dict(self._map)
        m.update(mapping)
        return Binding(m)

    def updated_values(self, mapping: dict[str, Value]) -> "Binding":
        return self.updated({k: Const(v) for k, v in mapping.items()})

    def items(self) -> tuple[tuple[str, Term], ...]:
        return self._key

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def __eq__(self, other):
        return isinstance(other, Binding) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return "Binding(%r)" % (self._key,)


IDENTITY = Binding()


def substitute(t: Term, theta: Binding) -> Term:
    """Replace every bound variable occurrence by its image term."""
    if isinstance(t, Var):
        image = theta.get(t.name)
        return t if image is None else image
    if isinstance(t, Const):
        return t
    if isinstance(t, App):
        return App(t.fsym, tuple(substitute(a, theta) for a in t.args))
    if isinstance(t, Index):
        return Index(substitute(t.base, theta), substitute(t.index, theta))
    if isinstance(t, AtLoc):
        return t
    if isinstance(t, QueueLen):
        return QueueLen(substitute(t.chan, theta))
    if isinstance(t, QueueProj):
        return QueueProj(substitute(t.chan, theta), t.component)
    raise ModelError("unknown term %r" % (t,))


def compose(theta: Binding, theta2: Binding) -> Binding:
    """The binding mapping x to substitute(theta(x), theta2)."""
    m: dict[str, Term] = {}
    for name, t in theta.items():
        m[name] = substitute(t, theta2)
    for name, t in theta2.items():
        if name not in m:
            m[name] = t
    return Binding(m)


def rename_term(t: Term, mapping: dict[str, str]) -> Term:
    if isinstance(t, Var):
        return Var(mapping.get(t.name, t.name), t.type)
    if isinstance(t, Const):
        return t
    if isinstance(t, App):
        return App(t.fsym, tuple(rename_term(a, mapping) for a in t.args))
    if isinstance(t, Index):
        return Index(rename_term(t.base, mapping), rename_term(t.index, mapping))
    if isinstance(t, AtLoc):
        return t
    if isinstance(t, QueueLen):
        return QueueLen(rename_term(t.chan, mapping))
    if isinstance(t, QueueProj):
        return QueueProj(rename_term(t.chan, mapping), t.component)
    raise ModelError("unknown term %r" % (t,))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_term(t: Term, theta: Binding, state_env=None, on_overlap=None) -> Value:
    """Evaluate a term under a binding whose relevant images are ground.

    state_env supplies loc_of(process_name) and queue_items(ChannelId) for
    the state-dependent invariant terms; passing None makes those terms an
    error.  on_overlap(term, left, right, overlap) is called whenever a
    dunion application unions non-disjoint sets.
    """
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        image = theta.get(t.name)
        if image is None:
            raise UnboundVariable("variable %r is not bound" % t.name)
        if isinstance(image, Const):
            return image.value
        # One substitution pass, then ground evaluation: the image may be a
        # ground term rather than a packaged value.
        return eval_term(image, IDENTITY, state_env, on_overlap)
    if isinstance(t, Index):
        arr = eval_term(t.base, theta, state_env, on_overlap)
        if not isinstance(arr, TupleV):
            raise TypeMismatch("indexing into non-array value %r" % (arr,))
        idx = eval_term(t.index, theta, state_env, on_overlap)
        if not isinstance(idx, NatV):
            raise TypeMismatch("array index must be a natural, got %r" % (idx,))
        if not 1 <= idx.n <= len(arr.items):
            raise EvaluationError(
                "index %d out of range 1..%d" % (idx.n, len(arr.items)))
        return arr.items[idx.n - 1]
    if isinstance(t, App):
        fsym = SIGNATURE.get(t.fsym)
        if fsym is None:
            raise EvaluationError("unknown function symbol %r" % t.fsym)
        args = [eval_term(a, theta, state_env, on_overlap) for a in t.args]
        if fsym.arg_types is not None and len(args) != len(fsym.arg_types):
            raise TypeMismatch("%s expects %d arguments, got %d"
                               % (t.fsym, len(fsym.arg_types), len(args)))
        if t.fsym == "dunion" and on_overlap is not None:
            left, right = _set2(args[0], "dunion"), _set2(args[1], "dunion")
            overlap = left.as_pyset() & right.as_pyset()
            if overlap:
                on_overlap(t, left, right, make_set(overlap))
        return fsym.fn(*args)
    if isinstance(t, AtLoc):
        if state_env is None:
            raise EvaluationError("at(%s) needs a state context" % t.process)
        return NatV(state_env.loc_of(t.process))
    if isinstance(t, QueueLen):
        return NatV(len(_queue_of(t, theta, state_env, on_overlap)))
    if isinstance(t, QueueProj):
        items = _queue_of(t, theta, state_env, on_overlap)
        comps = []
        for v in items:
            if not isinstance(v, TupleV) or t.component > len(v.items):
                raise TypeMismatch(
                    "queue entry %r has no component %d" % (v, t.component))
            comps.append(v.items[t.component - 1])
        return make_set(comps)
    raise ModelError("unknown term %r" % (t,))


def _queue_of(t, theta, state_env, on_overlap) -> tuple[Value, ...]:
    if state_env is None:
        raise EvaluationError("channel-content terms need a state context")
    ch = eval_term(t.chan, theta, state_env, on_overlap)
    if not isinstance(ch, ChanV):
        raise TypeMismatch("expected a channel, got %r" % (ch,))
    return state_env.queue_items(ch.chan)


def infer_type(t: Term, var_types: dict[str, TypeTag]) -> TypeTag:
    """Static type of a term given declared variable types.

    Raises TypeMismatch on ill-typed applications and UnboundVariable for
    variables missing from the declaration environment.
    """
    if isinstance(t, Const):
        return type_of_value(t.value)
    if isinstance(t, Var):
        if t.name not in var_types:
            raise UnboundVariable("unknown variable %r" % t.name)
        declared = var_types[t.name]
        if not types_compatible(declared, t.type):
            raise TypeMismatch("variable %r used at type %s but declared %s"
                               % (t.name, t.type, declared))
        return declared
    if isinstance(t, Index):
        base = infer_type(t.base, var_types)
        idx = infer_type(t.index, var_types)
        if not types_compatible(NAT, idx):
            raise TypeMismatch("array index must be nat, got %s" % idx)
        if base.kind == "array":
            return base.args[0]
        if base.kind == "tuple":
            if not base.args:
                raise TypeMismatch("cannot index an empty tuple type")
            first = base.args[0]
            if all(types_compatible(first, a) for a in base.args):
                return first
            raise TypeMismatch("indexing into a non-homogeneous tuple")
        raise TypeMismatch("cannot index a value of type %s" % base)
    if isinstance(t, App):
        fsym = SIGNATURE.get(t.fsym)
        if fsym is None:
            raise TypeMismatch("unknown function symbol %r" % t.fsym)
        arg_tys = tuple(infer_type(a, var_types) for a in t.args)
        if fsym.arg_types is not None:
            if len(arg_tys) != len(fsym.arg_types):
                raise TypeMismatch("%s expects %d arguments, got %d"
                                   % (t.fsym, len(fsym.arg_types), len(arg_tys)))
            for want, got in zip(fsym.arg_types, arg_tys):
                if not types_compatible(want, got):
                    raise TypeMismatch("%s argument has type %s, expected %s"
                                       % (t.fsym, got, want))
        return fsym.result_type(arg_tys)
    if isinstance(t, AtLoc):
        return NAT
    if isinstance(t, QueueLen):
        _check_chan_type(t.chan, var_types)
        return NAT
    if isinstance(t, QueueProj):
        _check_chan_type(t.chan, var_types)
        return TypeTag("set", (ANY,))
    raise ModelError("unknown term %r" % (t,))


def _check_chan_type(chan: Term, var_types):
    ty = infer_type(chan, var_types)
    if not types_compatible(CHAN, ty):
        raise TypeMismatch("expected a channel term, got type %s" % ty)


# ---------------------------------------------------------------------------
# Queues
# ---------------------------------------------------------------------------

class EmptyQueueError(ModelError):
    pass


@dataclass(frozen=True)
class Queue:
    """An immutable FIFO sequence of values."""

    items: tuple[Value, ...] = ()

    def append(self, v: Value) -> "Queue":
        return Queue(self.items + (v,))

    def head(self) -> Value:
        if not self.items:
            raise EmptyQueueError("head of empty queue")
        return self.items[0]

    def tail(self) -> "Queue":
        if not self.items:
            raise EmptyQueueError("tail of empty queue")
        return Queue(self.items[1:])

    def proj(self, k: int) -> tuple[Value, ...]:
        """The k-th components (1-based) of the tuple entries."""
        out = []
        for v in self.items:
            if not isinstance(v, TupleV) or k > len(v.items):
                raise TypeMismatch("queue entry %r has no component %d" % (v, k))
            out.append(v.items[k - 1])
        return tuple(out)

    def __len__(self):
        return len(self.items)

    def __bool__(self):
        return bool(self.items)


EMPTY_QUEUE = Queue()
