"""Source model for MiniDfy programs.

Parses a MiniDfy source file into an annotated program: an ordered list of
method/lemma records, each carrying the byte spans of its contract clauses
and of every removable annotation (asserts, loop invariants, decreases
clauses, lemma calls, calc statements). Expressions are kept opaque; the
parser only tracks nesting so it can find statement and clause boundaries.

All spans are byte offsets into the UTF-8 encoding of the original text.
The program is immutable after parse; every transformation is expressed as
an EditSet of deletion ranges applied by print_source, which never touches
bytes outside the deletions apart from dropping lines that a deletion left
whitespace-only.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

ASSERT = "assert"
INVARIANT = "invariant"
DECREASES = "decreases"
DECREASES_WILDCARD = "decreases_wildcard"
LEMMA_CALL = "lemma_call"
CALC = "calc"
CALC_STEP = "calc_step"
CALC_HINT = "calc_hint"

ANNOTATION_KINDS = frozenset(
    {ASSERT, INVARIANT, DECREASES, DECREASES_WILDCARD, LEMMA_CALL, CALC, CALC_STEP, CALC_HINT}
)

# Kinds that can appear as whole-annotation removal targets.
TARGET_KINDS = frozenset({ASSERT, INVARIANT, DECREASES, DECREASES_WILDCARD, LEMMA_CALL, CALC})


class Span(NamedTuple):
    start: int
    end: int


class SourceError(Exception):
    """Parse or edit error carrying a 1-based line/column position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{message} (line {line}, col {col})" if line else message)


class InvalidEditError(ValueError):
    """An EditSet referenced bytes no legal deletion may touch."""


@dataclass(frozen=True)
class SubPart:
    """One removable piece of an annotation: a conjunct, calc step, or hint.

    Step parts carry the span of their preceding explicit operator token,
    when present, in operator_span.
    """

    id: str
    span: Span
    operator_span: Optional[Span] = None

    @property
    def role(self) -> str:
        # 'c' conjunct, 's' step, 'h' hint
        return self.id.rsplit(".", 1)[1][0]


@dataclass(frozen=True)
class CalcLine:
    op_span: Optional[Span]
    hint_span: Optional[Span]
    expr_span: Span  # includes the trailing ';'


@dataclass(frozen=True)
class CalcLayout:
    header_op: Optional[str]
    lines: tuple[CalcLine, ...]


@dataclass(frozen=True)
class Annotation:
    """One removable unit. span covers the whole statement or clause,
    including the terminating ';' where the grammar has one."""

    id: str
    kind: str
    span: Span
    expr_span: Optional[Span] = None  # expression region for assert/invariant/decreases
    parts: tuple[SubPart, ...] = ()
    parent: Optional[str] = None
    layout: Optional[CalcLayout] = None  # calc only


@dataclass
class MethodRecord:
    """A method or lemma declaration.

    body_span is the full declaration extent (keyword through the closing
    brace) so header decreases clauses fall inside it. initially_verified
    is set once by oracle preflight; everything else is fixed at parse.
    """

    name: str
    kind: str  # "method" | "lemma"
    contract_spans: tuple[Span, ...]
    body_span: Span
    annotations: tuple[Annotation, ...]
    initially_verified: bool = False


@dataclass(frozen=True)
class RemovalTarget:
    """A unit the whole-annotation pass attempts as one removal. Wild-card
    decreases clauses of a method are grouped into a single target."""

    id: str
    kind: str
    annotations: tuple[Annotation, ...]

    @property
    def spans(self) -> tuple[Span, ...]:
        return tuple(a.span for a in self.annotations)


class AnnotatedProgram:
    """Parse result: original text plus per-method annotation records."""

    def __init__(self, original_text: str, file_name: str, methods: tuple[MethodRecord, ...]):
        self.original_text = original_text
        self.file_name = file_name
        self.methods = methods
        self.data = original_text.encode("utf-8")
        self._method_by_name = {m.name: m for m in methods}
        self._annotation_by_id: dict[str, tuple[MethodRecord, Annotation]] = {}
        self._part_by_id: dict[str, tuple[Annotation, SubPart]] = {}
        self._operator_by_id: dict[str, Span] = {}
        for m in methods:
            for a in m.annotations:
                self._annotation_by_id[a.id] = (m, a)
                for p in a.parts:
                    self._part_by_id[p.id] = (a, p)
                    if p.operator_span is not None:
                        self._operator_by_id[a.id + ".o" + p.id.rsplit(".s", 1)[1]] = p.operator_span
        self._nonws_prefix = _nonws_prefix(self.data)
        self.preflight_done = False

    def method(self, name: str) -> MethodRecord:
        try:
            return self._method_by_name[name]
        except KeyError:
            raise KeyError(f"no such method: {name}") from None

    def annotation(self, annotation_id: str) -> Annotation:
        return self._annotation_by_id[annotation_id][1]

    def method_of(self, annotation_id: str) -> MethodRecord:
        base = annotation_id.split(".", 1)[0]
        return self._annotation_by_id[base][0]

    def lookup_id(self, var_id: str):
        """Resolve an annotation/part/operator id. Returns (role, object)
        where role is 'annotation' | 'part' | 'operator', or None."""
        if var_id in self._annotation_by_id:
            return "annotation", self._annotation_by_id[var_id][1]
        if var_id in self._part_by_id:
            return "part", self._part_by_id[var_id][1]
        if var_id in self._operator_by_id:
            return "operator", self._operator_by_id[var_id]
        return None

    def all_ids(self) -> set[str]:
        ids = set(self._annotation_by_id)
        ids.update(self._part_by_id)
        ids.update(self._operator_by_id)
        return ids

    def slice(self, span: Span) -> str:
        return self.data[span.start : span.end].decode("utf-8")

    def nonws_count(self, start: int, end: int) -> int:
        return self._nonws_prefix[end] - self._nonws_prefix[start]


def _nonws_prefix(data: bytes) -> list[int]:
    ws = b" \t\r\n"
    acc = [0]
    total = 0
    for b in data:
        if b not in ws:
            total += 1
        acc.append(total)
    return acc


@dataclass(frozen=True)
class EditSet:
    """Value object: a set of non-overlapping deletion ranges."""

    deletions: frozenset[Span] = frozenset()

    @classmethod
    def empty(cls) -> "EditSet":
        return cls(frozenset())

    @classmethod
    def from_spans(cls, spans: Iterable[Span]) -> "EditSet":
        spans = frozenset(Span(*s) for s in spans)
        _check_no_overlap(spans)
        return cls(spans)

    def union(self, spans: Iterable[Span]) -> "EditSet":
        return EditSet.from_spans(set(self.deletions) | {Span(*s) for s in spans})

    def sorted(self) -> list[Span]:
        return sorted(self.deletions)

    def __len__(self) -> int:
        return len(self.deletions)


def _check_no_overlap(spans: Iterable[Span]) -> None:
    prev_end = -1
    prev = None
    for s in sorted(spans):
        if s.start < 0 or s.end < s.start:
            raise InvalidEditError(f"malformed range {s}")
        if s.start < prev_end:
            raise InvalidEditError(f"overlapping deletion ranges {prev} and {s}")
        prev_end = s.end
        prev = s


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_MULTI_OPS = (b"<==>", b"==>", b"<==", b"::", b":=", b"=>", b"==", b"!=", b"<=", b">=", b"&&", b"||")
_SINGLE_CHARS = set(b"(){}[];,:<>+-*/%!&|=.")
_CALC_OPS = {b"==", b"==>", b"<==>", b"<=", b"<", b"!="}
_OPEN = {ord("("): ord(")"), ord("["): ord("]"), ord("{"): ord("}")}
_CLOSERS = {ord(")"), ord("]"), ord("}")}

_KEYWORD_OPS = {b"in", b"forall", b"exists", b"then", b"else", b"old", b"fresh"}


class Token(NamedTuple):
    kind: str  # ident | num | str | op | comment
    text: bytes
    start: int
    end: int


def _is_ident_start(b: int) -> bool:
    return b == ord("_") or ord("a") <= b <= ord("z") or ord("A") <= b <= ord("Z")


def _is_ident_char(b: int) -> bool:
    return _is_ident_start(b) or ord("0") <= b <= ord("9") or b == ord("'")


def _line_col(data: bytes, pos: int) -> tuple[int, int]:
    line = data.count(b"\n", 0, pos) + 1
    col = pos - (data.rfind(b"\n", 0, pos) + 1) + 1
    return line, col


def tokenize(data: bytes) -> list[Token]:
    toks: list[Token] = []
    i = 0
    n = len(data)
    while i < n:
        b = data[i]
        if b in b" \t\r\n":
            i += 1
            continue
        if data.startswith(b"//", i):
            j = data.find(b"\n", i)
            j = n if j < 0 else j
            toks.append(Token("comment", data[i:j], i, j))
            i = j
            continue
        if b == ord('"'):
            j = i + 1
            while j < n and data[j] != ord('"'):
                j += 2 if data[j] == ord("\\") else 1
            if j >= n:
                line, col = _line_col(data, i)
                raise SourceError("unterminated string literal", line, col)
            toks.append(Token("str", data[i : j + 1], i, j + 1))
            i = j + 1
            continue
        if _is_ident_start(b):
            j = i + 1
            while j < n and _is_ident_char(data[j]):
                j += 1
            toks.append(Token("ident", data[i:j], i, j))
            i = j
            continue
        if ord("0") <= b <= ord("9"):
            j = i + 1
            while j < n and (ord("0") <= data[j] <= ord("9") or data[j] == ord(".") and j + 1 < n and ord("0") <= data[j + 1] <= ord("9")):
                j += 1
            toks.append(Token("num", data[i:j], i, j))
            i = j
            continue
        if b == ord("'"):
            # char literal: 'x' or escape like '\n'
            j = i + 1
            if j < n and data[j] == ord("\\"):
                j += 1
            j += 1
            if j < n and data[j] == ord("'"):
                toks.append(Token("str", data[i : j + 1], i, j + 1))
                i = j + 1
                continue
            line, col = _line_col(data, i)
            raise SourceError("stray quote", line, col)
        matched = False
        for op in _MULTI_OPS:
            if data.startswith(op, i):
                toks.append(Token("op", op, i, i + len(op)))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if b in _SINGLE_CHARS:
            toks.append(Token("op", data[i : i + 1], i, i + 1))
            i += 1
            continue
        line, col = _line_col(data, i)
        raise SourceError(f"unexpected byte {bytes([b])!r}", line, col)
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_DECL_KEYWORDS = {b"method", b"lemma", b"function"}
_CONTRACT_KEYWORDS = {b"requires", b"ensures", b"decreases"}
_LOOPSPEC_KEYWORDS = {b"invariant", b"decreases"}


@dataclass
class _PendingAnnot:
    kind: str  # annotation kind, or "call" before lemma resolution
    span: Span
    expr_span: Optional[Span] = None
    callee: Optional[str] = None
    conjuncts: tuple[Span, ...] = ()
    layout: Optional[CalcLayout] = None


class _Parser:
    def __init__(self, data: bytes, file_name: str):
        self.data = data
        self.file_name = file_name
        self.toks = [t for t in tokenize(data) if t.kind != "comment"]
        self.pos = 0
        self.hint_depth = 0

    # --- token helpers ----------------------------------------------------

    def _peek(self, offset: int = 0) -> Optional[Token]:
        i = self.pos + offset
        return self.toks[i] if i < len(self.toks) else None

    def _next(self) -> Token:
        t = self._peek()
        if t is None:
            line, col = _line_col(self.data, len(self.data))
            raise SourceError("unexpected end of input", line, col)
        self.pos += 1
        return t

    def _error(self, message: str, tok: Optional[Token] = None):
        at = tok.start if tok else (self.toks[self.pos].start if self.pos < len(self.toks) else len(self.data))
        line, col = _line_col(self.data, at)
        raise SourceError(message, line, col)

    def _expect(self, text: bytes) -> Token:
        t = self._peek()
        if t is None or t.text != text:
            self._error(f"expected {text.decode()!r}", t)
        return self._next()

    def _at(self, text: bytes) -> bool:
        t = self._peek()
        return t is not None and t.text == text

    def _at_keyword(self, words) -> bool:
        t = self._peek()
        return t is not None and t.kind == "ident" and t.text in words

    # --- expression scanning ----------------------------------------------

    def _scan_balanced(self, open_text: bytes) -> Span:
        start_tok = self._expect(open_text)
        close = bytes([_OPEN[open_text[0]]])
        depth = 1
        while depth:
            t = self._next()
            if t.kind == "op":
                if t.text == open_text:
                    depth += 1
                elif t.text == close:
                    depth -= 1
                elif len(t.text) == 1 and t.text[0] in _OPEN:
                    # other bracket kinds nest independently
                    self.pos -= 1
                    self._scan_balanced(t.text)
        return Span(start_tok.start, self.toks[self.pos - 1].end)

    def _scan_expr(self, stop_semicolon: bool, stop_keywords: frozenset[bytes] = frozenset(),
                   stop_assign: bool = False) -> Span:
        """Consume a balanced token run. Stops (without consuming) at a
        top-level ';' (when stop_semicolon), at a top-level keyword from
        stop_keywords, at ':=' (when stop_assign), or at a '{' in statement
        position. A '{' where an operand is expected is a set/map display
        and is consumed as part of the expression."""
        depth = 0
        operand_expected = True
        first = self._peek()
        if first is None:
            self._error("expected expression")
        start = first.start
        last_end = start
        seen = False
        while True:
            t = self._peek()
            if t is None:
                break
            if depth == 0:
                if stop_semicolon and t.text == b";":
                    break
                if stop_assign and t.text == b":=":
                    break
                if t.kind == "ident" and t.text in stop_keywords:
                    break
                if t.kind == "ident" and t.text in _DECL_KEYWORDS:
                    break
                if t.text == b"{" and not operand_expected:
                    break
                if t.text == b"}":
                    break
            self._next()
            seen = True
            last_end = t.end
            if t.kind == "op":
                if len(t.text) == 1 and t.text[0] in _OPEN:
                    depth += 1
                elif len(t.text) == 1 and t.text[0] in _CLOSERS:
                    depth -= 1
                    if depth < 0:
                        self._error("unbalanced bracket", t)
            if t.kind in ("ident", "num", "str"):
                operand_expected = t.text in _KEYWORD_OPS
            elif t.kind == "op" and (len(t.text) == 1 and t.text[0] in _CLOSERS):
                operand_expected = False
            else:
                operand_expected = True
        if not seen:
            self._error("expected expression")
        return Span(start, last_end)

    # --- program ------------------------------------------------------------

    def parse_program(self) -> AnnotatedProgram:
        decls: list[tuple[str, str, Span, tuple[Span, ...], list[_PendingAnnot]]] = []
        names: set[str] = set()
        while self._peek() is not None:
            t = self._peek()
            if t.kind != "ident" or t.text not in _DECL_KEYWORDS:
                self._error("expected method, lemma, or function declaration", t)
            decl = self._parse_decl()
            if decl[1] in names:
                self._error(f"duplicate declaration name {decl[1]!r}")
            names.add(decl[1])
            decls.append(decl)

        lemma_names = {name for kw, name, *_ in decls if kw == "lemma"}
        methods: list[MethodRecord] = []
        for kw, name, extent, contracts, pending in decls:
            if kw == "function":
                continue
            annots: list[Annotation] = []
            index = 0
            for p in pending:
                if p.kind == "call":
                    if p.callee not in lemma_names:
                        continue  # unknown callee: plain statement, kept
                    kind = LEMMA_CALL
                else:
                    kind = p.kind
                aid = f"{name}:{kind}:{index}"
                index += 1
                parts: tuple[SubPart, ...] = ()
                if kind in (ASSERT, INVARIANT) and len(p.conjuncts) >= 2:
                    parts = tuple(
                        SubPart(f"{aid}.c{k}", span) for k, span in enumerate(p.conjuncts)
                    )
                elif kind == CALC and p.layout is not None:
                    parts = _calc_parts(aid, p.layout)
                annots.append(
                    Annotation(
                        id=aid,
                        kind=kind,
                        span=p.span,
                        expr_span=p.expr_span,
                        parts=parts,
                        layout=p.layout,
                    )
                )
            methods.append(
                MethodRecord(
                    name=name,
                    kind=kw,
                    contract_spans=contracts,
                    body_span=extent,
                    annotations=tuple(annots),
                )
            )
        text = self.data.decode("utf-8")
        return AnnotatedProgram(text, self.file_name, tuple(methods))

    def _parse_decl(self):
        kw_tok = self._next()
        kw = kw_tok.text.decode()
        name_tok = self._next()
        if name_tok.kind != "ident":
            self._error("expected declaration name", name_tok)
        name = name_tok.text.decode()
        self._scan_balanced(b"(")
        if kw == "function" and self._at(b":"):
            self._next()
            self._scan_expr(stop_semicolon=False, stop_keywords=frozenset(_CONTRACT_KEYWORDS | {b"returns"}))
        if self._at_keyword({b"returns"}):
            self._next()
            self._scan_balanced(b"(")

        contracts: list[Span] = []
        pending: list[_PendingAnnot] = []
        while self._at_keyword(_CONTRACT_KEYWORDS):
            kw_t = self._next()
            if kw_t.text == b"decreases":
                ann = self._finish_decreases(kw_t)
                if kw != "function":
                    pending.append(ann)
            else:
                expr = self._scan_expr(stop_semicolon=False, stop_keywords=frozenset(_CONTRACT_KEYWORDS))
                contracts.append(Span(kw_t.start, expr.end))

        body_open = self._peek()
        if body_open is None or body_open.text != b"{":
            self._error("expected method body", body_open)
        if kw == "function":
            end = self._scan_balanced(b"{").end
        else:
            end = self._parse_block(pending)
        return kw, name, Span(kw_tok.start, end), tuple(contracts), pending

    def _finish_decreases(self, kw_t: Token) -> _PendingAnnot:
        if self._at(b"*"):
            star = self._next()
            return _PendingAnnot(DECREASES_WILDCARD, Span(kw_t.start, star.end))
        expr = self._scan_expr(
            stop_semicolon=True,
            stop_keywords=frozenset(_CONTRACT_KEYWORDS | _LOOPSPEC_KEYWORDS),
        )
        return _PendingAnnot(DECREASES, Span(kw_t.start, expr.end), expr_span=expr)

    def _parse_block(self, pending: list[_PendingAnnot]) -> int:
        """Parse '{' stmt* '}'. Returns the end offset of the closing brace."""
        self._expect(b"{")
        while True:
            t = self._peek()
            if t is None:
                self._error("unterminated block")
            if t.text == b"}":
                return self._next().end
            self._parse_stmt(pending)

    def _parse_stmt(self, pending: list[_PendingAnnot]) -> None:
        t = self._peek()
        assert t is not None
        if t.kind == "ident":
            word = t.text
            if word == b"assert":
                kw = self._next()
                expr = self._scan_expr(stop_semicolon=True)
                semi = self._expect(b";")
                self._record(
                    pending,
                    _PendingAnnot(
                        ASSERT,
                        Span(kw.start, semi.end),
                        expr_span=expr,
                        conjuncts=split_expression(self.data, expr),
                    ),
                )
                return
            if word == b"var":
                self._next()
                self._next_ident("variable name")
                while self._at(b","):
                    self._next()
                    self._next_ident("variable name")
                if self._at(b":"):
                    self._next()
                    self._scan_expr(stop_semicolon=True, stop_assign=True)
                self._expect(b":=")
                self._scan_expr(stop_semicolon=True)
                self._expect(b";")
                return
            if word == b"if":
                self._next()
                self._scan_expr(stop_semicolon=False)
                self._parse_block(pending)
                if self._at_keyword({b"else"}):
                    self._next()
                    if self._at_keyword({b"if"}):
                        self._parse_stmt(pending)
                    else:
                        self._parse_block(pending)
                return
            if word == b"while":
                self._next()
                self._scan_expr(stop_semicolon=False, stop_keywords=frozenset(_LOOPSPEC_KEYWORDS))
                while self._at_keyword(_LOOPSPEC_KEYWORDS):
                    kw_t = self._next()
                    if kw_t.text == b"decreases":
                        self._record(pending, self._finish_decreases(kw_t))
                    else:
                        expr = self._scan_expr(
                            stop_semicolon=False, stop_keywords=frozenset(_LOOPSPEC_KEYWORDS)
                        )
                        self._record(
                            pending,
                            _PendingAnnot(
                                INVARIANT,
                                Span(kw_t.start, expr.end),
                                expr_span=expr,
                                conjuncts=split_expression(self.data, expr),
                            ),
                        )
                self._parse_block(pending)
                return
            if word == b"match":
                self._next()
                self._scan_expr(stop_semicolon=False)
                self._expect(b"{")
                while not self._at(b"}"):
                    self._expect(b"case")
                    self._scan_pattern()
                    self._expect(b"=>")
                    while True:
                        nxt = self._peek()
                        if nxt is None:
                            self._error("unterminated match")
                        if nxt.text in (b"}", b"case"):
                            break
                        self._parse_stmt(pending)
                self._expect(b"}")
                return
            if word == b"calc":
                self._parse_calc(pending)
                return
            if word == b"return":
                self._next()
                if not self._at(b";"):
                    self._scan_expr(stop_semicolon=True)
                self._expect(b";")
                return
            nxt = self._peek(1)
            if nxt is not None and nxt.text == b"(":
                kw = self._next()
                self._scan_balanced(b"(")
                semi = self._expect(b";")
                self._record(
                    pending,
                    _PendingAnnot("call", Span(kw.start, semi.end), callee=kw.text.decode()),
                )
                return
            # lvalue := expr ;
            self._scan_expr(stop_semicolon=True, stop_assign=True)
            self._expect(b":=")
            self._scan_expr(stop_semicolon=True)
            self._expect(b";")
            return
        self._error("expected statement", t)

    def _next_ident(self, what: str) -> Token:
        t = self._next()
        if t.kind != "ident":
            self._error(f"expected {what}", t)
        return t

    def _scan_pattern(self) -> Span:
        start = self._peek()
        if start is None:
            self._error("expected pattern")
        last = start
        while True:
            t = self._peek()
            if t is None or t.text == b"=>":
                break
            last = self._next()
            if t.text == b"(":
                self.pos -= 1
                s = self._scan_balanced(b"(")
                last = Token("op", b")", s.end - 1, s.end)
        return Span(start.start, last.end)

    def _record(self, pending: list[_PendingAnnot], ann: _PendingAnnot) -> None:
        if self.hint_depth == 0:
            pending.append(ann)

    def _parse_calc(self, pending: list[_PendingAnnot]) -> None:
        kw = self._expect(b"calc")
        header_op = None
        t = self._peek()
        if t is not None and t.kind == "op" and t.text in _CALC_OPS:
            header_op = self._next().text.decode()
        self._expect(b"{")
        lines: list[CalcLine] = []
        while not self._at(b"}"):
            op_span = None
            hint_span = None
            if lines:
                t = self._peek()
                if t is not None and t.kind == "op" and t.text in _CALC_OPS:
                    tok = self._next()
                    op_span = Span(tok.start, tok.end)
                if self._at(b"{") and self._brace_is_hint():
                    self.hint_depth += 1
                    try:
                        open_t = self._expect(b"{")
                        while not self._at(b"}"):
                            self._parse_stmt(pending)
                        close_t = self._expect(b"}")
                    finally:
                        self.hint_depth -= 1
                    hint_span = Span(open_t.start, close_t.end)
            expr = self._scan_expr(stop_semicolon=True)
            semi = self._expect(b";")
            lines.append(CalcLine(op_span, hint_span, Span(expr.start, semi.end)))
        close = self._expect(b"}")
        layout = CalcLayout(header_op, tuple(lines))
        self._record(pending, _PendingAnnot(CALC, Span(kw.start, close.end), layout=layout))

    def _brace_is_hint(self) -> bool:
        """Decide whether a '{' opening a calc line is a hint block or a set
        display starting the expression: after the balanced braces, a hint is
        followed by the start of an expression, a set display by an operator
        or the ';' that ends the line."""
        depth = 0
        i = self.pos
        while i < len(self.toks):
            t = self.toks[i]
            if t.text == b"{":
                depth += 1
            elif t.text == b"}":
                depth -= 1
                if depth == 0:
                    nxt = self.toks[i + 1] if i + 1 < len(self.toks) else None
                    if nxt is None:
                        return False
                    if nxt.kind in ("ident", "num", "str"):
                        # only 'in' may follow a set display; any other word,
                        # number, or string starts the step expression
                        return nxt.text != b"in"
                    return nxt.text in (b"(", b"{", b"!")
            i += 1
        return False


def _calc_parts(aid: str, layout: CalcLayout) -> tuple[SubPart, ...]:
    parts: list[SubPart] = []
    lines = layout.lines
    if len(lines) >= 3:
        for k, line in enumerate(lines[1:-1]):
            parts.append(SubPart(f"{aid}.s{k}", line.expr_span, operator_span=line.op_span))
    hk = 0
    for line in lines[1:]:
        if line.hint_span is not None:
            parts.append(SubPart(f"{aid}.h{hk}", line.hint_span))
            hk += 1
    return tuple(parts)


def parse(text: str, file_name: str = "<memory>") -> AnnotatedProgram:
    """Parse MiniDfy source into an AnnotatedProgram.

    Raises SourceError with a 1-based line/column on malformed input.
    """
    data = text.encode("utf-8")
    return _Parser(data, file_name).parse_program()


# ---------------------------------------------------------------------------
# Conjunct splitting
# ---------------------------------------------------------------------------

_LOW_PRECEDENCE = {b"||", b"==>", b"<==", b"<==>"}


def split_expression(data: bytes, expr: Span) -> tuple[Span, ...]:
    """Spans of the top-level '&&' conjuncts of an expression region.

    Splits only at '&&' outside parentheses, brackets, braces, and
    quantifier bodies; a top-level lower-precedence operator (||, ==>, <==,
    <==>) means the expression is not a top-level conjunction at all.
    Returns a single span covering the expression when there is no split.
    """
    toks = [t for t in tokenize(data[expr.start : expr.end]) if t.kind != "comment"]
    depth = 0
    quant_depth: Optional[int] = None
    cut_offsets: list[tuple[int, int]] = []  # (&& start, && end) relative
    for t in toks:
        if t.kind == "op" and len(t.text) == 1:
            if t.text[0] in _OPEN:
                depth += 1
            elif t.text[0] in _CLOSERS:
                depth -= 1
                if quant_depth is not None and depth < quant_depth:
                    quant_depth = None
        if quant_depth is not None:
            continue
        if t.kind == "ident" and t.text in (b"forall", b"exists"):
            quant_depth = depth
            continue
        if depth == 0 and t.kind == "op":
            if t.text in _LOW_PRECEDENCE:
                return (expr,)
            if t.text == b"&&":
                cut_offsets.append((t.start, t.end))
    if not cut_offsets:
        return (expr,)
    pieces: list[Span] = []
    pos = 0
    rel_end = expr.end - expr.start
    for cs, ce in cut_offsets + [(rel_end, rel_end)]:
        piece = _trim(data, expr.start + pos, expr.start + cs)
        pieces.append(piece)
        pos = ce
    return tuple(pieces)


def _trim(data: bytes, start: int, end: int) -> Span:
    while start < end and data[start] in b" \t\r\n":
        start += 1
    while end > start and data[end - 1] in b" \t\r\n":
        end -= 1
    return Span(start, end)


def split_conjuncts(annotation: Annotation) -> list[SubPart]:
    """The conjunct sub-parts of an assert/invariant. A single-conjunct
    expression yields one part equal to the whole expression."""
    if annotation.kind not in (ASSERT, INVARIANT):
        raise ValueError(f"cannot split {annotation.kind} annotation {annotation.id}")
    if annotation.parts:
        return [p for p in annotation.parts if p.role == "c"]
    assert annotation.expr_span is not None
    return [SubPart(annotation.id + ".c0", annotation.expr_span)]


def recombine(program: AnnotatedProgram, annotation: Annotation, kept: Iterable[SubPart]) -> str:
    """Replacement text for an annotation given the sub-parts to keep.

    For conjunct annotations: keyword + kept conjunct texts joined with
    ' && '. For calcs: the calc statement rebuilt with the kept interior
    steps (with their preceding operators) and kept hints; first and last
    expression lines always remain. Keeping nothing is invalid; delete the
    whole annotation instead.
    """
    kept_ids = {p.id for p in kept}
    if annotation.kind in (ASSERT, INVARIANT):
        parts = split_conjuncts(annotation)
        texts = [program.slice(p.span) for p in parts if p.id in kept_ids]
        if not texts:
            raise InvalidEditError(f"recombine of {annotation.id} would keep no conjuncts")
        keyword = "assert" if annotation.kind == ASSERT else "invariant"
        joined = "invariant " + " && ".join(texts) if keyword == "invariant" else "assert " + " && ".join(texts)
        if annotation.kind == ASSERT:
            joined += ";"
        return joined
    if annotation.kind == CALC:
        layout = annotation.layout
        assert layout is not None
        step_parts = {p.id: p for p in annotation.parts if p.role == "s"}
        hint_ids_kept = kept_ids
        out_lines: list[str] = []
        header = "calc " + layout.header_op + " {" if layout.header_op else "calc {"
        out_lines.append(header)
        n = len(layout.lines)
        for idx, line in enumerate(layout.lines):
            is_first = idx == 0
            is_last = idx == n - 1
            step_id = f"{annotation.id}.s{idx - 1}" if not is_first and not is_last else None
            if step_id is not None and step_id not in kept_ids:
                continue
            pieces: list[str] = []
            if not is_first and line.op_span is not None:
                pieces.append(program.slice(line.op_span))
            if line.hint_span is not None:
                hint_id = _hint_id_for(annotation, line)
                if hint_id is None or hint_id in hint_ids_kept:
                    pieces.append(program.slice(line.hint_span))
            pieces.append(program.slice(line.expr_span))
            out_lines.append("  " + " ".join(pieces))
        out_lines.append("}")
        return "\n".join(out_lines)
    raise ValueError(f"cannot recombine {annotation.kind} annotation {annotation.id}")


def _hint_id_for(annotation: Annotation, line: CalcLine) -> Optional[str]:
    for p in annotation.parts:
        if p.role == "h" and p.span == line.hint_span:
            return p.id
    return None


# ---------------------------------------------------------------------------
# Removal targets
# ---------------------------------------------------------------------------

def removal_targets(method: MethodRecord) -> tuple[RemovalTarget, ...]:
    """Document-ordered whole-annotation targets of a method. All wild-card
    decreases clauses form one grouped target at the first one's position."""
    targets: list[RemovalTarget] = []
    wildcards = [a for a in method.annotations if a.kind == DECREASES_WILDCARD]
    grouped = False
    for a in method.annotations:
        if a.kind == DECREASES_WILDCARD:
            if not grouped:
                targets.append(RemovalTarget(a.id, DECREASES_WILDCARD, tuple(wildcards)))
                grouped = True
            continue
        targets.append(RemovalTarget(a.id, a.kind, (a,)))
    return tuple(targets)


def next_annotation(method: MethodRecord, pos: int) -> tuple[Optional[RemovalTarget], int]:
    """Cursor-style iteration over a method's removal targets. Returns
    (target, pos + 1), or (None, pos) past the end."""
    targets = removal_targets(method)
    if pos < 0:
        raise ValueError("cursor must be non-negative")
    if pos >= len(targets):
        return None, pos
    return targets[pos], pos + 1


def target_removal_spans(target: RemovalTarget) -> tuple[Span, ...]:
    return target.spans


def part_removal_spans(
    program: AnnotatedProgram, part_id: str, removed_parts: frozenset[str] = frozenset()
) -> tuple[Span, ...]:
    """Deletion ranges for removing one sub-part, given the annotation's
    already-removed parts (conjunct separators depend on what else is gone).

    Conjuncts take one adjacent ' && ' separator. Interior calc steps take
    their preceding explicit operator, plus their attached hint when that
    operator is explicit (the calcline grammar puts hints after operators,
    so a kept hint would dangle). Hints are deleted alone.
    """
    base_id, suffix = part_id.rsplit(".", 1)
    found = program.lookup_id(part_id)
    if found is None or found[0] != "part":
        raise KeyError(f"no such sub-part: {part_id}")
    part: SubPart = found[1]
    annotation = program.annotation(base_id)
    if suffix.startswith("c"):
        removed_idx = {int(p.rsplit(".c", 1)[1]) for p in removed_parts if p.startswith(base_id + ".c")}
        removed_idx.add(int(suffix[1:]))
        return conjunct_removal_spans(program, annotation, removed_idx)
    if suffix.startswith("s"):
        spans = [part.span]
        if part.operator_span is not None:
            spans.append(part.operator_span)
            hint = _hint_on_step_line(annotation, part)
            if hint is not None:
                spans.append(hint.span)
        return tuple(sorted(spans))
    if suffix.startswith("h"):
        return (part.span,)
    raise KeyError(f"sub-part {part_id} is not independently removable")


def _hint_on_step_line(annotation: Annotation, step: SubPart) -> Optional[SubPart]:
    layout = annotation.layout
    assert layout is not None
    for line in layout.lines:
        if line.expr_span == step.span and line.hint_span is not None:
            for p in annotation.parts:
                if p.role == "h" and p.span == line.hint_span:
                    return p
    return None


def hint_bundled_with_step(annotation: Annotation, step: SubPart) -> Optional[SubPart]:
    """The hint that removing this step also removes, if any."""
    if step.operator_span is None:
        return None
    return _hint_on_step_line(annotation, step)


def conjunct_removal_spans(
    program: AnnotatedProgram, annotation: Annotation, removed_idx: set[int]
) -> tuple[Span, ...]:
    conjuncts = [p for p in annotation.parts if p.role == "c"]
    if not conjuncts:
        raise InvalidEditError(f"{annotation.id} has no conjunct parts")
    if len(removed_idx) >= len(conjuncts):
        # nothing kept: delete the whole annotation, keyword included
        return (annotation.span,)
    kept = [i for i in range(len(conjuncts)) if i not in removed_idx]
    last_kept = max(kept)
    spans: list[Span] = []
    for i in sorted(removed_idx):
        if i < last_kept:
            spans.append(Span(conjuncts[i].span.start, conjuncts[i + 1].span.start))
        else:
            spans.append(Span(conjuncts[i - 1].span.end, conjuncts[i].span.end))
    return _merge_spans(spans)


def _merge_spans(spans: Iterable[Span]) -> tuple[Span, ...]:
    merged: list[Span] = []
    for s in sorted(spans):
        if merged and s.start <= merged[-1].end:
            merged[-1] = Span(merged[-1].start, max(merged[-1].end, s.end))
        else:
            merged.append(Span(*s))
    return tuple(merged)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

class OffsetMap:
    """Maps byte offsets in the original text to offsets in the edited text."""

    def __init__(self, deletions: list[Span], original_len: int):
        self._starts = [d.start for d in deletions]
        self._removed_before: list[int] = []
        total = 0
        for d in deletions:
            self._removed_before.append(total)
            total += d.end - d.start
        self._total_removed = total
        self._deletions = deletions
        self.original_len = original_len

    def map(self, offset: int) -> int:
        i = bisect.bisect_right(self._starts, offset) - 1
        if i < 0:
            return offset
        d = self._deletions[i]
        removed = self._removed_before[i]
        if offset >= d.end:
            return offset - removed - (d.end - d.start)
        return d.start - removed

    def map_span(self, span: Span) -> Span:
        return Span(self.map(span.start), self.map(span.end))


def _allowed_mask(program: AnnotatedProgram) -> bytearray:
    mask = bytearray(len(program.data))
    for m in program.methods:
        for a in m.annotations:
            for i in range(a.span.start, a.span.end):
                mask[i] = 1
    ws = b" \t\r\n"
    for i, b in enumerate(program.data):
        if b in ws:
            mask[i] = 1
    return mask


def apply_edits(program: AnnotatedProgram, edits: EditSet | Iterable[Span]) -> tuple[str, OffsetMap]:
    """Apply deletions and return (edited text, offset map).

    Validates that every deleted byte lies within some annotation span or is
    whitespace, and that no deletion touches a contract span or splits a
    multi-byte character. A line left whitespace-only by a deletion is
    dropped entirely; kept trailing whitespace before a deleted line tail is
    dropped with it. No other byte changes.
    """
    data = program.data
    n = len(data)
    if isinstance(edits, EditSet):
        spans = edits.sorted()
    else:
        spans = sorted(Span(*s) for s in edits)
    _check_no_overlap(spans)
    allowed = _allowed_mask(program)
    contract_ranges = [s for m in program.methods for s in m.contract_spans]
    for s in spans:
        if s.start < 0 or s.end > n:
            raise InvalidEditError(f"deletion {s} outside the file")
        for boundary in (s.start, s.end):
            if boundary < n and 0x80 <= data[boundary] < 0xC0:
                raise InvalidEditError(f"deletion {s} splits a multi-byte character")
        for i in range(s.start, s.end):
            if not allowed[i]:
                raise InvalidEditError(
                    f"deletion {s} covers bytes outside any annotation span"
                )
        for c in contract_ranges:
            if s.start < c.end and c.start < s.end:
                raise InvalidEditError(f"deletion {s} overlaps contract span {c}")

    deleted = bytearray(n)
    for s in spans:
        for i in range(s.start, s.end):
            deleted[i] = 1

    ws = b" \t\r"
    line_start = 0
    while line_start < n:
        nl = data.find(b"\n", line_start)
        line_end = n if nl < 0 else nl  # exclusive of newline
        has_deletion = any(deleted[i] for i in range(line_start, line_end))
        if has_deletion:
            kept = [i for i in range(line_start, line_end) if not deleted[i]]
            if all(data[i] in ws for i in kept):
                for i in range(line_start, line_end):
                    deleted[i] = 1
                if nl >= 0:
                    deleted[nl] = 1
            else:
                last_solid = max(i for i in kept if data[i] not in ws)
                tail_deleted = any(deleted[i] for i in range(last_solid + 1, line_end))
                if tail_deleted:
                    for i in kept:
                        if i > last_solid:
                            deleted[i] = 1
        line_start = line_end + 1

    final: list[Span] = []
    i = 0
    while i < n:
        if deleted[i]:
            j = i
            while j < n and deleted[j]:
                j += 1
            final.append(Span(i, j))
            i = j
        else:
            i += 1
    out = bytes(data[i] for i in range(n) if not deleted[i])
    return out.decode("utf-8"), OffsetMap(final, n)


def print_source(program: AnnotatedProgram, edits: EditSet | Iterable[Span]) -> str:
    """Render the program with the given deletions applied."""
    return apply_edits(program, edits)[0]
