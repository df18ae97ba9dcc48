"""Textual model format: parser, elaborator and pretty-printer.

The surface syntax mirrors the mathematical notation of the process
language: guards in brackets, ! and ? for message passing, := for
assignment, (+) for the audited disjoint union and \\ for set difference.
A document declares typed parameters (with optional default values),
auxiliary ghost variables, processes (singleton or replicated families
"process P[w in 1..n]"), and optional invariants over the global state.

The grammar is LL(1) with statement-level error recovery; every diagnostic
carries a line and column.  docs/grammar.ebnf holds the full grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .explorer import InvariantSpec
from .process import (
    Action, Assign, Diagnostic, Edge, Guard, Recv, SeqProcess, Send, validate,
)
from .semantics import DistributedProcess, make_dp, state_env
from .terms import (
    BOOL, BROADCAST, BoolV, CHAN, ChanV, ChannelId, ConcreteMatrix,
    ConcreteRow, Const, Index, MATRIX, MatrixAtom, ModelError, NAT, NatV, ROW,
    RowAtom, SRC_A, SRC_PROD, STAR, SetV, StarV, Term, TupleV, TypeTag, App,
    AtLoc, QueueLen, QueueProj, Value, Var, array_type, eval_term, infer_type,
    make_set, set_type, type_of_value, types_compatible,
)

KEYWORDS = {
    "model", "param", "aux", "process", "inputs", "private", "init", "nodes",
    "start", "edge", "invariant", "in", "not", "and", "or", "true", "false",
    "union", "of", "nat", "bool", "row", "matrix", "chan", "set", "array",
    "bcast", "c",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<nat>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>'[^'\n]*')
  | (?P<op>\(\+\)|:=|->|\.\.|!=|<=|>=|[][(){},:!?=<>+\-\\*/|])
""", re.VERBOSE)


@dataclass(frozen=True)
class Tok:
    kind: str  # ident | kw | nat | string | op | eof | error
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    toks = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            toks.append(Tok("error", text[i], line, col))
            i += 1
            col += 1
            continue
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "nl":
            line += 1
            col = 1
        elif kind in ("ws", "comment"):
            col += len(lexeme)
        else:
            if kind == "ident" and lexeme in KEYWORDS:
                kind = "kw"
            toks.append(Tok(kind, lexeme, line, col))
            col += len(lexeme)
        i = m.end()
    toks.append(Tok("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Expression and document ASTs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    line: int
    col: int


@dataclass(frozen=True)
class ENat(Expr):
    value: int


@dataclass(frozen=True)
class ERat(Expr):
    num: int
    den: int


@dataclass(frozen=True)
class EBool(Expr):
    value: bool


@dataclass(frozen=True)
class EStar(Expr):
    pass


@dataclass(frozen=True)
class EString(Expr):
    value: str


@dataclass(frozen=True)
class EVar(Expr):
    name: str


@dataclass(frozen=True)
class EIndex(Expr):
    name: str
    index: Expr


@dataclass(frozen=True)
class ECall(Expr):
    name: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class ETuple(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class ESet(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class EBin(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class ENot(Expr):
    arg: Expr


@dataclass(frozen=True)
class EChan(Expr):
    index: Optional[Expr]  # None means the broadcast channel


@dataclass(frozen=True)
class StepAst:
    kind: str  # guard | send | recv | assign
    aux: bool
    line: int
    col: int
    chan: Optional[Expr] = None
    payload: Optional[Expr] = None  # guard cond, send msg, recv pattern, rhs
    target: Optional[Expr] = None  # assignment lvalue


@dataclass(frozen=True)
class EdgeDecl:
    src: int
    dst: int
    steps: tuple[StepAst, ...]
    line: int
    col: int


@dataclass(frozen=True)
class ParamDecl:
    name: str
    type: TypeTag
    default: Optional[Expr]
    line: int
    col: int


@dataclass(frozen=True)
class PrivateDecl:
    name: str
    type: TypeTag
    init: Expr
    line: int
    col: int


@dataclass(frozen=True)
class ProcessDecl:
    name: str
    repl: Optional[tuple[str, Expr, Expr]]
    inputs: tuple[str, ...]
    privates: tuple[PrivateDecl, ...]
    init: Optional[Expr]
    nodes: tuple[int, ...]
    start: Optional[int]
    edges: tuple[EdgeDecl, ...]
    line: int
    col: int


@dataclass(frozen=True)
class InvariantDecl:
    name: str
    expr: Expr
    line: int
    col: int


@dataclass
class ModelDocument:
    name: str
    params: list[ParamDecl] = field(default_factory=list)
    auxes: list[ParamDecl] = field(default_factory=list)
    processes: list[ProcessDecl] = field(default_factory=list)
    invariants: list[InvariantDecl] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)


class _ParseFailure(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


ITEM_KEYWORDS = ("param", "aux", "process", "invariant")
BODY_KEYWORDS = ("inputs", "private", "init", "nodes", "start", "edge")


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []

    def peek(self) -> Tok:
        return self.toks[self.pos]

    def advance(self) -> Tok:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, expected: str, tok: Optional[Tok] = None):
        tok = tok or self.peek()
        got = tok.text or "end of input"
        raise _ParseFailure(Diagnostic(
            "syntax-error", "expected %s, got %r" % (expected, got),
            line=tok.line, col=tok.col))

    def expect_op(self, text: str) -> Tok:
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        self.fail("%r" % text)

    def expect_kw(self, word: str) -> Tok:
        tok = self.peek()
        if tok.kind == "kw" and tok.text == word:
            return self.advance()
        self.fail("keyword %r" % word)

    def expect_ident(self, what="a name") -> Tok:
        tok = self.peek()
        if tok.kind == "ident":
            return self.advance()
        self.fail(what)

    def expect_nat(self) -> int:
        tok = self.peek()
        if tok.kind == "nat":
            self.advance()
            return int(tok.text)
        self.fail("a number")

    def at_op(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text == text

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "kw" and tok.text == word

    def eat_op(self, text: str) -> bool:
        if self.at_op(text):
            self.advance()
            return True
        return False

    # -- document ---------------------------------------------------------

    def document(self) -> ModelDocument:
        try:
            self.expect_kw("model")
            name = self.expect_ident("a model name").text
        except _ParseFailure as pf:
            self.diagnostics.append(pf.diag)
            name = "unnamed"
        doc = ModelDocument(name)
        while self.peek().kind != "eof":
            tok = self.peek()
            try:
                if self.at_kw("param"):
                    doc.params.append(self.param_decl("param"))
                elif self.at_kw("aux"):
                    doc.auxes.append(self.param_decl("aux"))
                elif self.at_kw("process"):
                    doc.processes.append(self.process_decl())
                elif self.at_kw("invariant"):
                    doc.invariants.append(self.invariant_decl())
                else:
                    self.fail("param, aux, process or invariant")
            except _ParseFailure as pf:
                self.diagnostics.append(pf.diag)
                self.skip_to(ITEM_KEYWORDS)
        if not doc.processes:
            self.diagnostics.append(Diagnostic(
                "syntax-error", "a model must declare at least one process",
                line=1, col=1))
        doc.diagnostics = self.diagnostics
        return doc

    def skip_to(self, keywords):
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return
            if tok.kind == "kw" and tok.text in keywords:
                return
            self.advance()

    def param_decl(self, kw: str) -> ParamDecl:
        head = self.expect_kw(kw)
        name = self.expect_ident().text
        self.expect_op(":")
        ty = self.type_expr()
        default = None
        if self.eat_op("="):
            default = self.expr()
        return ParamDecl(name, ty, default, head.line, head.col)

    def type_expr(self) -> TypeTag:
        tok = self.peek()
        simple = {"nat": NAT, "bool": BOOL, "row": ROW, "matrix": MATRIX,
                  "chan": CHAN}
        if tok.kind == "kw" and tok.text in simple:
            self.advance()
            return simple[tok.text]
        if tok.kind == "kw" and tok.text in ("set", "array"):
            self.advance()
            self.expect_kw("of")
            inner = self.type_expr()
            if tok.text == "set":
                if inner.kind == "set":
                    self.fail("a non-set element type", tok)
                return set_type(inner)
            return array_type(inner)
        self.fail("a type")

    def process_decl(self) -> ProcessDecl:
        head = self.expect_kw("process")
        name = self.expect_ident("a process name").text
        repl = None
        if self.eat_op("["):
            var = self.expect_ident("a replication index").text
            self.expect_kw("in")
            lo = self.expr()
            self.expect_op("..")
            hi = self.expr()
            self.expect_op("]")
            repl = (var, lo, hi)
        self.expect_op("{")
        inputs: list[str] = []
        privates: list[PrivateDecl] = []
        init: Optional[Expr] = None
        nodes: list[int] = []
        start: Optional[int] = None
        edges: list[EdgeDecl] = []
        while not self.at_op("}"):
            tok = self.peek()
            if tok.kind == "eof":
                self.fail("'}'")
            try:
                if self.at_kw("inputs"):
                    self.advance()
                    inputs.append(self.expect_ident().text)
                    while self.eat_op(","):
                        inputs.append(self.expect_ident().text)
                elif self.at_kw("private"):
                    self.advance()
                    pname = self.expect_ident().text
                    self.expect_op(":")
                    ty = self.type_expr()
                    self.expect_op("=")
                    init_expr = self.expr()
                    privates.append(PrivateDecl(pname, ty, init_expr,
                                                tok.line, tok.col))
                elif self.at_kw("init"):
                    self.advance()
                    init = self.expr()
                elif self.at_kw("nodes"):
                    self.advance()
                    nodes.append(self.expect_nat())
                    while self.eat_op(","):
                        nodes.append(self.expect_nat())
                elif self.at_kw("start"):
                    self.advance()
                    start = self.expect_nat()
                elif self.at_kw("edge"):
                    edges.append(self.edge_decl())
                else:
                    self.fail("a process statement or '}'")
            except _ParseFailure as pf:
                self.diagnostics.append(pf.diag)
                self.skip_in_body()
        self.expect_op("}")
        return ProcessDecl(name, repl, tuple(inputs), tuple(privates), init,
                           tuple(nodes), start, tuple(edges),
                           head.line, head.col)

    def skip_in_body(self):
        while True:
            tok = self.peek()
            if tok.kind == "eof" or self.at_op("}"):
                return
            if tok.kind == "kw" and tok.text in BODY_KEYWORDS:
                return
            self.advance()

    def edge_decl(self) -> EdgeDecl:
        head = self.expect_kw("edge")
        src = self.expect_nat()
        self.expect_op("->")
        dst = self.expect_nat()
        steps: list[StepAst] = []
        if self.eat_op(":"):
            steps.append(self.step())
            while self.eat_op(","):
                steps.append(self.step())
        return EdgeDecl(src, dst, tuple(steps), head.line, head.col)

    def step(self) -> StepAst:
        tok = self.peek()
        aux = False
        if self.at_kw("aux"):
            self.advance()
            aux = True
        if self.at_op("["):
            if aux:
                self.fail("an assignment after 'aux'", tok)
            self.advance()
            cond = self.expr()
            self.expect_op("]")
            return StepAst("guard", False, tok.line, tok.col, payload=cond)
        if self.at_kw("c") or self.at_kw("bcast"):
            if aux:
                self.fail("an assignment after 'aux'", tok)
            chan = self.chan_expr()
            if self.eat_op("!"):
                return StepAst("send", False, tok.line, tok.col, chan=chan,
                               payload=self.expr())
            if self.eat_op("?"):
                return StepAst("recv", False, tok.line, tok.col, chan=chan,
                               payload=self.expr())
            self.fail("'!' or '?'")
        name = self.expect_ident("a guard, send, receive or assignment")
        target: Expr = EVar(name.line, name.col, name.text)
        if self.eat_op("["):
            idx = self.expr()
            self.expect_op("]")
            target = EIndex(name.line, name.col, name.text, idx)
        self.expect_op(":=")
        rhs = self.expr()
        return StepAst("assign", aux, tok.line, tok.col, target=target,
                       payload=rhs)

    def chan_expr(self) -> EChan:
        tok = self.peek()
        if self.at_kw("bcast"):
            self.advance()
            return EChan(tok.line, tok.col, None)
        self.expect_kw("c")
        self.expect_op("[")
        idx = self.expr()
        self.expect_op("]")
        return EChan(tok.line, tok.col, idx)

    def invariant_decl(self) -> InvariantDecl:
        head = self.expect_kw("invariant")
        name = self.expect_ident("an invariant name").text
        self.expect_op(":")
        return InvariantDecl(name, self.expr(), head.line, head.col)

    # -- expressions --------------------------------------------------------

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        lhs = self.and_expr()
        while self.at_kw("or"):
            tok = self.advance()
            lhs = EBin(tok.line, tok.col, "or", lhs, self.and_expr())
        return lhs

    def and_expr(self) -> Expr:
        lhs = self.not_expr()
        while self.at_kw("and"):
            tok = self.advance()
            lhs = EBin(tok.line, tok.col, "and", lhs, self.not_expr())
        return lhs

    def not_expr(self) -> Expr:
        if self.at_kw("not"):
            tok = self.advance()
            return ENot(tok.line, tok.col, self.not_expr())
        return self.comparison()

    CMP_OPS = {"=": "eq", "!=": "ne", "<": "lt", "<=": "le", ">": "gt",
               ">=": "ge"}

    def comparison(self) -> Expr:
        lhs = self.sum_expr()
        tok = self.peek()
        if tok.kind == "op" and tok.text in self.CMP_OPS:
            self.advance()
            return EBin(tok.line, tok.col, self.CMP_OPS[tok.text], lhs,
                        self.sum_expr())
        if self.at_kw("in"):
            self.advance()
            return EBin(tok.line, tok.col, "member", lhs, self.sum_expr())
        return lhs

    SUM_OPS = {"+": "add", "-": "sub", "(+)": "dunion", "\\": "diff"}

    def sum_expr(self) -> Expr:
        lhs = self.atom()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in self.SUM_OPS:
                self.advance()
                lhs = EBin(tok.line, tok.col, self.SUM_OPS[tok.text], lhs,
                           self.atom())
            elif self.at_kw("union"):
                self.advance()
                lhs = EBin(tok.line, tok.col, "union", lhs, self.atom())
            else:
                return lhs

    CALLABLE_KEYWORDS = ("row", "matrix", "chan", "array")

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "nat":
            self.advance()
            if self.at_op("/"):
                self.advance()
                den = self.expect_nat()
                return ERat(tok.line, tok.col, int(tok.text), den)
            return ENat(tok.line, tok.col, int(tok.text))
        if tok.kind == "string":
            self.advance()
            return EString(tok.line, tok.col, tok.text[1:-1])
        if self.at_kw("true"):
            self.advance()
            return EBool(tok.line, tok.col, True)
        if self.at_kw("false"):
            self.advance()
            return EBool(tok.line, tok.col, False)
        if self.at_op("*"):
            self.advance()
            return EStar(tok.line, tok.col)
        if self.at_kw("c") or self.at_kw("bcast"):
            return self.chan_expr()
        if tok.kind == "kw" and tok.text in self.CALLABLE_KEYWORDS:
            self.advance()
            return self.call(tok)
        if tok.kind == "ident":
            self.advance()
            if self.at_op("("):
                return self.call(tok)
            if self.at_op("["):
                self.advance()
                idx = self.expr()
                self.expect_op("]")
                return EIndex(tok.line, tok.col, tok.text, idx)
            return EVar(tok.line, tok.col, tok.text)
        if self.at_op("("):
            self.advance()
            first = self.expr()
            if self.at_op(","):
                items = [first]
                while self.eat_op(","):
                    items.append(self.expr())
                self.expect_op(")")
                return ETuple(tok.line, tok.col, tuple(items))
            self.expect_op(")")
            return first
        if self.at_op("{"):
            self.advance()
            items = []
            if not self.at_op("}"):
                items.append(self.expr())
                while self.eat_op(","):
                    items.append(self.expr())
            self.expect_op("}")
            return ESet(tok.line, tok.col, tuple(items))
        self.fail("an expression")

    def call(self, name_tok: Tok) -> ECall:
        self.expect_op("(")
        args = []
        if not self.at_op(")"):
            args.append(self.expr())
            while self.eat_op(","):
                args.append(self.expr())
        self.expect_op(")")
        return ECall(name_tok.line, name_tok.col, name_tok.text, tuple(args))


def parse(text: str) -> ModelDocument:
    """Parse a document; syntax problems land in .diagnostics rather than
    aborting, recovering at the next statement."""
    return _Parser(text).document()


# ---------------------------------------------------------------------------
# Elaboration: document -> distributed process
# ---------------------------------------------------------------------------

@dataclass
class ElaboratedModel:
    document: ModelDocument
    dp: DistributedProcess
    inputs: dict[str, Value]
    invariants: list[InvariantSpec]
    missing_params: list[str]


@dataclass
class CompileResult:
    document: Optional[ModelDocument]
    model: Optional[ElaboratedModel]
    diagnostics: list[Diagnostic]

    def ok(self) -> bool:
        return self.model is not None and not self.diagnostics


class _Elaborator:
    def __init__(self, doc: ModelDocument):
        self.doc = doc
        self.diagnostics: list[Diagnostic] = []
        self.param_types: dict[str, TypeTag] = {}
        self.param_values: dict[str, Value] = {}
        self.missing: list[str] = []
        self.aux_types: dict[str, TypeTag] = {}
        self.aux_init: dict[str, Value] = {}

    def bad(self, code, message, node):
        self.diagnostics.append(Diagnostic(code, message,
                                           line=node.line, col=node.col))

    # -- ground value expressions ------------------------------------------

    def eval_value(self, e: Expr, env: dict[str, Value]) -> Value:
        v = self._eval_value(e, env)
        if isinstance(v, Fraction):
            raise _ParseFailure(Diagnostic(
                "type-error", "rationals may appear only inside vec/matrix_of",
                line=e.line, col=e.col))
        return v

    def _eval_value(self, e: Expr, env: dict[str, Value]):
        err = lambda msg: _ParseFailure(Diagnostic(
            "type-error", msg, line=e.line, col=e.col))
        if isinstance(e, ENat):
            return NatV(e.value)
        if isinstance(e, ERat):
            return Fraction(e.num, e.den)
        if isinstance(e, EBool):
            return BoolV(e.value)
        if isinstance(e, EStar):
            return STAR
        if isinstance(e, EVar):
            if e.name not in env:
                raise err("unknown name %r in a value expression" % e.name)
            return env[e.name]
        if isinstance(e, ETuple):
            return TupleV(tuple(self.eval_value(x, env) for x in e.items))
        if isinstance(e, ESet):
            return make_set(self.eval_value(x, env) for x in e.items)
        if isinstance(e, EChan):
            if e.index is None:
                return ChanV(BROADCAST)
            idx = self.eval_value(e.index, env)
            if not isinstance(idx, NatV):
                raise err("channel index must be a natural")
            return ChanV(ChannelId(idx.n))
        if isinstance(e, ENot):
            v = self.eval_value(e.arg, env)
            if not isinstance(v, BoolV):
                raise err("'not' needs a boolean")
            return BoolV(not v.flag)
        if isinstance(e, EBin):
            from .terms import SIGNATURE
            lhs = self.eval_value(e.lhs, env)
            rhs = self.eval_value(e.rhs, env)
            try:
                return SIGNATURE[e.op].fn(lhs, rhs)
            except ModelError as exc:
                raise err(str(exc))
        if isinstance(e, EIndex):
            if e.name not in env:
                raise err("unknown name %r in a value expression" % e.name)
            arr = env[e.name]
            idx = self.eval_value(e.index, env)
            if not isinstance(arr, TupleV) or not isinstance(idx, NatV) \
                    or not 1 <= idx.n <= len(arr.items):
                raise err("bad array access in value expression")
            return arr.items[idx.n - 1]
        if isinstance(e, ECall):
            return self._eval_call(e, env, err)
        raise err("expression not allowed in a value position")

    def _eval_call(self, e: ECall, env, err):
        name = e.name
        if name == "matrix":
            if len(e.args) != 1 or not isinstance(e.args[0], EString):
                raise err("matrix expects a quoted name, like matrix('B')")
            return MatrixAtom(e.args[0].value)
        args = [self._eval_value(a, env) for a in e.args]

        def nat_arg(i):
            if i >= len(args) or not isinstance(args[i], NatV):
                raise err("%s expects a natural argument" % name)
            return args[i].n

        if name == "row":
            return RowAtom(SRC_A, nat_arg(0))
        if name == "prodrow":
            return RowAtom(SRC_PROD, nat_arg(0))
        if name == "rows":
            return TupleV(tuple(RowAtom(SRC_A, i)
                                for i in range(1, nat_arg(0) + 1)))
        if name == "array":
            if len(args) != 2:
                raise err("array expects a size and a fill value")
            fill = args[1]
            if isinstance(fill, Fraction):
                raise err("array fill cannot be a bare rational")
            return TupleV((fill,) * nat_arg(0))
        if name == "vec":
            entries = []
            for a in args:
                if isinstance(a, Fraction):
                    entries.append(a)
                elif isinstance(a, NatV):
                    entries.append(Fraction(a.n))
                else:
                    raise err("vec entries must be rationals")
            return ConcreteRow(tuple(entries))
        if name == "matrix_of":
            rows = []
            for a in args:
                if not isinstance(a, ConcreteRow):
                    raise err("matrix_of expects vec(...) rows")
                rows.append(a.entries)
            if len({len(r) for r in rows}) > 1:
                raise err("matrix_of rows must have equal length")
            return ConcreteMatrix(tuple(rows))
        if name == "chan":
            return ChanV(ChannelId(nat_arg(0)))
        if name == "tuple":
            for a in args:
                if isinstance(a, Fraction):
                    raise err("tuple entries cannot be bare rationals")
            return TupleV(tuple(args))
        from .terms import SIGNATURE
        if name in SIGNATURE:
            try:
                return SIGNATURE[name].fn(*args)
            except ModelError as exc:
                raise err(str(exc))
        raise err("unknown constructor %r in a value expression" % name)

    # -- terms ---------------------------------------------------------------

    VALUE_CONSTRUCTORS = ("row", "prodrow", "rows", "matrix", "array", "vec",
                          "matrix_of", "chan")
    TERM_CALLS = ("min", "size", "prod", "tuple")

    def elaborate_term(self, e: Expr, scope: dict[str, tuple], env: dict,
                       invariant: bool = False) -> Term:
        err = lambda msg, code="type-error": _ParseFailure(Diagnostic(
            code, msg, line=e.line, col=e.col))
        if isinstance(e, ENat):
            return Const(NatV(e.value))
        if isinstance(e, EBool):
            return Const(BoolV(e.value))
        if isinstance(e, EStar):
            return Const(STAR)
        if isinstance(e, ERat):
            raise err("bare rationals are not terms; use vec(...)")
        if isinstance(e, EString):
            raise err("strings appear only inside matrix('...')")
        if isinstance(e, EVar):
            entry = scope.get(e.name)
            if entry is None:
                raise err("unknown variable %r" % e.name, "unknown-variable")
            kind = entry[0]
            if kind == "repl":
                return Const(NatV(entry[1]))
            return Var(entry[1], entry[2])
        if isinstance(e, EIndex):
            base = self.elaborate_term(
                EVar(e.line, e.col, e.name), scope, env, invariant)
            return Index(base, self.elaborate_term(e.index, scope, env,
                                                   invariant))
        if isinstance(e, ETuple):
            return App("tuple", tuple(
                self.elaborate_term(x, scope, env, invariant) for x in e.items))
        if isinstance(e, ESet):
            return App("set_of", tuple(
                self.elaborate_term(x, scope, env, invariant) for x in e.items))
        if isinstance(e, EBin):
            return App(e.op, (self.elaborate_term(e.lhs, scope, env, invariant),
                              self.elaborate_term(e.rhs, scope, env, invariant)))
        if isinstance(e, ENot):
            return App("not", (self.elaborate_term(e.arg, scope, env, invariant),))
        if isinstance(e, EChan):
            if e.index is None:
                return Const(ChanV(BROADCAST))
            return App("channel",
                       (self.elaborate_term(e.index, scope, env, invariant),))
        if isinstance(e, ECall):
            if e.name in self.TERM_CALLS:
                return App(e.name, tuple(
                    self.elaborate_term(a, scope, env, invariant)
                    for a in e.args))
            if e.name in self.VALUE_CONSTRUCTORS:
                # Constructors denote ground values; fold them in place.
                return Const(self.eval_value(e, env))
            if e.name == "at":
                if not invariant:
                    raise err("at(...) is only available in invariants")
                if len(e.args) != 1 or not isinstance(e.args[0], EVar):
                    raise err("at expects a process name")
                return AtLoc(e.args[0].name)
            if e.name == "qlen":
                if not invariant:
                    raise err("qlen(...) is only available in invariants")
                if len(e.args) != 1:
                    raise err("qlen expects a channel")
                return QueueLen(self.elaborate_term(e.args[0], scope, env,
                                                    invariant))
            if e.name == "qset":
                if not invariant:
                    raise err("qset(...) is only available in invariants")
                if len(e.args) != 2 or not isinstance(e.args[1], ENat):
                    raise err("qset expects a channel and a component number")
                return QueueProj(
                    self.elaborate_term(e.args[0], scope, env, invariant),
                    e.args[1].value)
            raise err("unknown function %r" % e.name)
        raise err("cannot use this expression in a term position")

    # -- top level -----------------------------------------------------------

    def run(self) -> Optional[ElaboratedModel]:
        seen: set[str] = set()
        for decl in self.doc.params:
            if decl.name in seen:
                self.bad("duplicate-name", "parameter %r declared twice"
                         % decl.name, decl)
                continue
            seen.add(decl.name)
            self.param_types[decl.name] = decl.type
            if decl.default is None:
                self.missing.append(decl.name)
                continue
            try:
                v = self.eval_value(decl.default, dict(self.param_values))
            except _ParseFailure as pf:
                self.diagnostics.append(pf.diag)
                continue
            if not types_compatible(decl.type, type_of_value(v)):
                self.bad("type-error",
                         "default of %r has type %s, declared %s"
                         % (decl.name, type_of_value(v), decl.type), decl)
                continue
            self.param_values[decl.name] = v

        for decl in self.doc.auxes:
            if decl.name in seen or decl.name in self.aux_types:
                self.bad("duplicate-name", "%r declared twice" % decl.name, decl)
                continue
            self.aux_types[decl.name] = decl.type
            if decl.default is not None:
                try:
                    v = self.eval_value(decl.default, dict(self.param_values))
                    self.aux_init[decl.name] = v
                except _ParseFailure as pf:
                    self.diagnostics.append(pf.diag)
            elif decl.type.kind != "set":
                self.bad("type-error",
                         "auxiliary %r needs an initial value" % decl.name, decl)

        built: list[tuple[SeqProcess, ProcessDecl]] = []
        proc_names: set[str] = set()
        for decl in self.doc.processes:
            for proc in self.elaborate_process(decl):
                if proc.name in proc_names:
                    self.bad("duplicate-name",
                             "process %r declared twice" % proc.name, decl)
                    continue
                proc_names.add(proc.name)
                built.append((proc, decl))

        if self.diagnostics or not built:
            return None

        processes = [proc for proc, _ in built]
        ok = True
        for proc, decl in built:
            for d in validate(proc, self.aux_types):
                if d.code == "unreachable-node":
                    continue
                ok = False
                self.diagnostics.append(Diagnostic(
                    d.code, "%s: %s" % (proc.name, d.message),
                    d.where, decl.line, decl.col))
        if not ok:
            return None
        try:
            dp = make_dp(processes, tuple(self.aux_types.items()),
                         tuple(self.aux_init.items()), check=False)
        except ModelError as exc:
            self.diagnostics.append(Diagnostic("model-error", str(exc),
                                               line=1, col=1))
            return None

        invariants = []
        for decl in self.doc.invariants:
            spec = self.elaborate_invariant(decl, dp)
            if spec is not None:
                invariants.append(spec)
        if self.diagnostics:
            return None
        inputs = {n: self.param_values[n] for n in dp.input_types()
                  if n in self.param_values}
        return ElaboratedModel(self.doc, dp, inputs, invariants,
                               list(self.missing))

    def elaborate_process(self, decl: ProcessDecl) -> list[SeqProcess]:
        instances: list[tuple[str, Optional[tuple[str, int]]]] = []
        if decl.repl is None:
            instances.append((decl.name, None))
        else:
            var, lo_e, hi_e = decl.repl
            try:
                lo = self.eval_value(lo_e, dict(self.param_values))
                hi = self.eval_value(hi_e, dict(self.param_values))
            except _ParseFailure as pf:
                self.diagnostics.append(pf.diag)
                return []
            if not isinstance(lo, NatV) or not isinstance(hi, NatV):
                self.bad("type-error", "replication bounds must be naturals",
                         decl)
                return []
            for w in range(lo.n, hi.n + 1):
                instances.append(("%s%d" % (decl.name, w), (var, w)))
        out = []
        for name, repl in instances:
            proc = self.elaborate_instance(decl, name, repl)
            if proc is not None:
                out.append(proc)
        return out

    def elaborate_instance(self, decl: ProcessDecl, name: str,
                           repl: Optional[tuple[str, int]]
                           ) -> Optional[SeqProcess]:
        before = len(self.diagnostics)
        scope: dict[str, tuple] = {}
        env: dict[str, Value] = dict(self.param_values)
        suffix = "_%d" % repl[1] if repl else ""
        if repl:
            scope[repl[0]] = ("repl", repl[1])
            env[repl[0]] = NatV(repl[1])

        inputs = []
        for iname in decl.inputs:
            if iname not in self.param_types:
                self.bad("unknown-variable",
                         "input %r is not a declared parameter" % iname, decl)
                continue
            inputs.append((iname, self.param_types[iname]))
            scope[iname] = ("input", iname, self.param_types[iname])

        privates = []
        init_values = []
        for p in decl.privates:
            new_name = p.name + suffix
            if p.name in scope:
                self.bad("duplicate-name",
                         "%r already names something here" % p.name, p)
                continue
            try:
                v = self.eval_value(p.init, env)
            except _ParseFailure as pf:
                self.diagnostics.append(pf.diag)
                continue
            if not types_compatible(p.type, type_of_value(v)):
                self.bad("type-error",
                         "initializer of %r has type %s, declared %s"
                         % (p.name, type_of_value(v), p.type), p)
                continue
            privates.append((new_name, p.type))
            init_values.append((new_name, v))
            scope[p.name] = ("private", new_name, p.type)
        for aname, aty in self.aux_types.items():
            if aname not in scope:
                scope[aname] = ("aux", aname, aty)

        nodes = tuple(decl.nodes)
        if len(set(nodes)) != len(nodes):
            self.bad("duplicate-name", "a node is declared twice", decl)
        if decl.start is None:
            self.bad("syntax-error", "process %r has no start node" % decl.name,
                     decl)
            return None
        if decl.start not in nodes:
            self.bad("unknown-node", "start node %d is not declared"
                     % decl.start, decl)

        if decl.init is None:
            init_cond: Term = Const(BoolV(True))
        else:
            try:
                init_cond = self.elaborate_term(decl.init, scope, env)
            except _ParseFailure as pf:
                self.diagnostics.append(pf.diag)
                init_cond = Const(BoolV(True))

        edges = []
        for e in decl.edges:
            for endpoint in (e.src, e.dst):
                if endpoint not in nodes:
                    self.bad("unknown-node",
                             "edge endpoint %d is not a declared node"
                             % endpoint, e)
            steps = []
            aux_positions = []
            for s in e.steps:
                built = self.elaborate_step(s, scope, env)
                if built is None:
                    continue
                if s.aux:
                    aux_positions.append(len(steps))
                steps.append(built)
            edges.append(Edge(e.src, Action(tuple(steps),
                                            frozenset(aux_positions)), e.dst))
        if len(self.diagnostics) > before:
            return None
        return SeqProcess(
            name=name, nodes=frozenset(nodes),
            initial=decl.start if decl.start is not None else 0,
            edges=tuple(edges), inputs=tuple(inputs),
            privates=tuple(privates), init_values=tuple(init_values),
            init_cond=init_cond)

    def elaborate_step(self, s: StepAst, scope, env):
        try:
            if s.kind == "guard":
                return Guard(self.elaborate_term(s.payload, scope, env))
            if s.kind == "send":
                return Send(self.elaborate_chan(s.chan, scope, env),
                            self.elaborate_term(s.payload, scope, env))
            if s.kind == "recv":
                return Recv(self.elaborate_chan(s.chan, scope, env),
                            self.elaborate_term(s.payload, scope, env))
            if s.kind == "assign":
                return Assign(self.elaborate_term(s.target, scope, env),
                              self.elaborate_term(s.payload, scope, env))
        except _ParseFailure as pf:
            self.diagnostics.append(pf.diag)
            return None
        raise ModelError("unknown step kind %r" % s.kind)

    def elaborate_chan(self, e: EChan, scope, env) -> Term:
        if e.index is None:
            return Const(ChanV(BROADCAST))
        return App("channel", (self.elaborate_term(e.index, scope, env),))

    def elaborate_invariant(self, decl: InvariantDecl,
                            dp: DistributedProcess) -> Optional[InvariantSpec]:
        scope = {}
        for n, ty in dp.var_types().items():
            scope[n] = ("input", n, ty)
        try:
            term = self.elaborate_term(decl.expr, scope, dict(self.param_values),
                                       invariant=True)
        except _ParseFailure as pf:
            self.diagnostics.append(pf.diag)
            return None
        for leaf in _atloc_names(term):
            try:
                dp.process_index(leaf)
            except ModelError:
                self.bad("unknown-variable",
                         "at(%s): no such process" % leaf, decl)
                return None
        try:
            ty = infer_type(term, dp.var_types())
        except ModelError as exc:
            self.bad("type-error", str(exc), decl)
            return None
        if not types_compatible(BOOL, ty):
            self.bad("type-error", "invariant %r is not boolean" % decl.name,
                     decl)
            return None

        def predicate(state, dp_, term=term):
            v = eval_term(term, state.binding, state_env(state, dp_))
            return isinstance(v, BoolV) and v.flag

        return InvariantSpec(decl.name, "document invariant %s" % decl.name,
                             predicate)


def _atloc_names(t: Term) -> list[str]:
    out = []
    if isinstance(t, AtLoc):
        out.append(t.process)
    elif isinstance(t, App):
        for a in t.args:
            out.extend(_atloc_names(a))
    elif isinstance(t, Index):
        out.extend(_atloc_names(t.base))
        out.extend(_atloc_names(t.index))
    elif isinstance(t, (QueueLen, QueueProj)):
        out.extend(_atloc_names(t.chan))
    return out


def elaborate(doc: ModelDocument) -> tuple[Optional[ElaboratedModel],
                                           list[Diagnostic]]:
    el = _Elaborator(doc)
    model = el.run()
    return model, el.diagnostics


def compile_text(text: str) -> CompileResult:
    """Parse and elaborate in one go; .ok() means a runnable model."""
    doc = parse(text)
    if doc.diagnostics:
        return CompileResult(doc, None, list(doc.diagnostics))
    model, diagnostics = elaborate(doc)
    return CompileResult(doc, model, diagnostics)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def format_fraction(f: Fraction) -> str:
    if f.denominator == 1:
        return str(f.numerator)
    return "%d/%d" % (f.numerator, f.denominator)


def format_value(v: Value) -> str:
    if isinstance(v, NatV):
        return str(v.n)
    if isinstance(v, BoolV):
        return "true" if v.flag else "false"
    if isinstance(v, StarV):
        return "*"
    if isinstance(v, SetV):
        return "{%s}" % ", ".join(format_value(x) for x in v.items)
    if isinstance(v, TupleV):
        if len(v.items) >= 1 and len(set(v.items)) == 1:
            return "array(%d, %s)" % (len(v.items), format_value(v.items[0]))
        if len(v.items) >= 2:
            return "(%s)" % ", ".join(format_value(x) for x in v.items)
        return "tuple(%s)" % ", ".join(format_value(x) for x in v.items)
    if isinstance(v, RowAtom):
        return "%s(%d)" % ("row" if v.source == SRC_A else "prodrow", v.index)
    if isinstance(v, MatrixAtom):
        return "matrix('%s')" % v.name
    if isinstance(v, ChanV):
        return "bcast" if v.chan.is_broadcast() else "chan(%d)" % v.chan.index
    if isinstance(v, ConcreteRow):
        return "vec(%s)" % ", ".join(format_fraction(x) for x in v.entries)
    if isinstance(v, ConcreteMatrix):
        return "matrix_of(%s)" % ", ".join(
            "vec(%s)" % ", ".join(format_fraction(x) for x in row)
            for row in v.rows)
    raise ModelError("cannot print value %r" % (v,))


_PREC_OR, _PREC_AND, _PREC_NOT, _PREC_CMP, _PREC_SUM, _PREC_ATOM = range(6)

_BIN_PRINT = {
    "or": ("or", _PREC_OR), "and": ("and", _PREC_AND),
    "eq": ("=", _PREC_CMP), "ne": ("!=", _PREC_CMP), "lt": ("<", _PREC_CMP),
    "le": ("<=", _PREC_CMP), "gt": (">", _PREC_CMP), "ge": (">=", _PREC_CMP),
    "member": ("in", _PREC_CMP),
    "add": ("+", _PREC_SUM), "sub": ("-", _PREC_SUM),
    "union": ("union", _PREC_SUM), "dunion": ("(+)", _PREC_SUM),
    "diff": ("\\", _PREC_SUM),
}


def format_term(t: Term, prec: int = 0) -> str:
    if isinstance(t, Const):
        v = t.value
        if isinstance(v, ChanV):
            return "bcast" if v.chan.is_broadcast() else "c[%d]" % v.chan.index
        return format_value(v)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Index):
        return "%s[%s]" % (format_term(t.base, _PREC_ATOM), format_term(t.index))
    if isinstance(t, AtLoc):
        return "at(%s)" % t.process
    if isinstance(t, QueueLen):
        return "qlen(%s)" % format_chan(t.chan)
    if isinstance(t, QueueProj):
        return "qset(%s, %d)" % (format_chan(t.chan), t.component)
    if isinstance(t, App):
        if t.fsym == "tuple":
            if len(t.args) >= 2:
                return "(%s)" % ", ".join(format_term(a) for a in t.args)
            return "tuple(%s)" % ", ".join(format_term(a) for a in t.args)
        if t.fsym == "set_of":
            return "{%s}" % ", ".join(format_term(a) for a in t.args)
        if t.fsym == "channel":
            return "c[%s]" % format_term(t.args[0])
        if t.fsym == "not":
            inner = format_term(t.args[0], _PREC_NOT)
            out = "not %s" % inner
            return out if prec <= _PREC_NOT else "(%s)" % out
        if t.fsym in _BIN_PRINT:
            op, level = _BIN_PRINT[t.fsym]
            lhs = format_term(t.args[0], level)
            rhs = format_term(t.args[1], level + 1)
            out = "%s %s %s" % (lhs, op, rhs)
            return out if prec <= level else "(%s)" % out
        return "%s(%s)" % (t.fsym, ", ".join(format_term(a) for a in t.args))
    raise ModelError("cannot print term %r" % (t,))


def format_chan(t: Term) -> str:
    if isinstance(t, Const) and isinstance(t.value, ChanV):
        chan = t.value.chan
        return "bcast" if chan.is_broadcast() else "c[%d]" % chan.index
    if isinstance(t, App) and t.fsym == "channel":
        return "c[%s]" % format_term(t.args[0])
    return format_term(t)


def format_step(step, aux: bool = False) -> str:
    prefix = "aux " if aux else ""
    if isinstance(step, Guard):
        return "%s[%s]" % (prefix, format_term(step.cond))
    if isinstance(step, Send):
        return "%s%s ! %s" % (prefix, format_chan(step.chan),
                              format_term(step.msg))
    if isinstance(step, Recv):
        return "%s%s ? %s" % (prefix, format_chan(step.chan),
                              format_term(step.pattern))
    if isinstance(step, Assign):
        return "%s%s := %s" % (prefix, format_term(step.target),
                               format_term(step.expr))
    raise ModelError("cannot print step %r" % (step,))


def format_action(action: Action) -> str:
    return ", ".join(format_step(s, i in action.aux)
                     for i, s in enumerate(action.steps))


def format_type(ty: TypeTag) -> str:
    if ty.kind in ("nat", "bool", "row", "matrix", "chan"):
        return ty.kind
    if ty.kind == "set":
        return "set of %s" % format_type(ty.args[0])
    if ty.kind == "array":
        return "array of %s" % format_type(ty.args[0])
    if ty.kind == "tuple" and ty.args \
            and all(a == ty.args[0] for a in ty.args):
        return "array of %s" % format_type(ty.args[0])
    raise ModelError("type %s has no surface syntax" % ty)


def emit(dp: DistributedProcess, inputs: Optional[dict[str, Value]] = None,
         name: str = "exported") -> str:
    """Deterministic textual form of a distributed process.

    Processes are printed expanded (replication is parse-side sugar).  When
    an input binding is supplied its values become parameter defaults, which
    makes the output self-contained for the check command."""
    inputs = inputs or {}
    lines = ["model %s" % name, ""]
    for pname, ty in sorted(dp.input_types().items()):
        if pname in inputs:
            lines.append("param %s : %s = %s"
                         % (pname, format_type(ty), format_value(inputs[pname])))
        else:
            lines.append("param %s : %s" % (pname, format_type(ty)))
    aux_init = dict(dp.aux_init)
    for aname, ty in dp.aux_vars:
        lines.append("aux %s : %s = %s"
                     % (aname, format_type(ty), format_value(aux_init[aname])))
    for proc in dp.processes:
        lines.append("")
        lines.append("process %s {" % proc.name)
        if proc.inputs:
            lines.append("  inputs %s" % ", ".join(proc.input_names()))
        init_map = proc.init_value_map()
        for pname, ty in proc.privates:
            lines.append("  private %s : %s = %s"
                         % (pname, format_type(ty),
                            format_value(init_map[pname])))
        if proc.init_cond != Const(BoolV(True)):
            lines.append("  init %s" % format_term(proc.init_cond))
        lines.append("  nodes %s" % ", ".join(str(n) for n in sorted(proc.nodes)))
        lines.append("  start %d" % proc.initial)
        for e in proc.edges:
            if e.action.steps:
                lines.append("  edge %d -> %d : %s"
                             % (e.src, e.dst, format_action(e.action)))
            else:
                lines.append("  edge %d -> %d" % (e.src, e.dst))
        lines.append("}")
    return "\n".join(lines) + "\n"
