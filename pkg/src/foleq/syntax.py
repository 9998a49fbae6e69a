"""Lexing, parsing, and tree utilities for first-order-logic formulas.

The surface language is quantified predicate logic without function terms:
an atom is a predicate name applied to variable/constant names
(``Mortal(x)``, ``Between(a, b, c)``) or a bare identifier for a zero-arity
atom.  Connectives are accepted in both Unicode and ASCII spellings, freely
mixed within one string:

    forall  ∀ forall     exists  ∃ exists    not  ¬ ~      and  ∧ &
    or      ∨ |          implies → ->        iff  ↔ <->    xor  ⊕ ^

Precedence-mode parsing resolves unparenthesized mixtures with the usual
convention: negation and quantifiers bind tightest, then ``and``, ``or``,
``implies``, and finally ``iff``/``xor`` on a shared lowest level.
``implies`` is right-associative; the other binary connectives group to the
left.  A quantifier takes a single unary operand, so ``∀x P(x) ∧ Q(x)``
reads as ``(∀x P(x)) ∧ Q(x)``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

# Token kinds.
FORALL = "forall"
EXISTS = "exists"
NOT = "not"
AND = "and"
OR = "or"
IMPLIES = "implies"
IFF = "iff"
XOR = "xor"
LPAREN = "lparen"
RPAREN = "rparen"
COMMA = "comma"
IDENT = "ident"

QUANTIFIERS = (FORALL, EXISTS)
BINARY_OPS = (AND, OR, IMPLIES, IFF, XOR)

# Binary precedence levels, higher binds tighter.  Unary (negation and
# quantifiers) sits above all of these.
_PREC = {IFF: 1, XOR: 1, IMPLIES: 2, OR: 3, AND: 4}
_UNARY_PREC = 5


class ParseError(ValueError):
    """Malformed formula text.  ``position`` is a 0-based character offset."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (offset {position})"
        super().__init__(message)
        self.position = position


class LexError(ParseError):
    """A character that starts no token."""


class CapExceeded(RuntimeError):
    """A configurable search or enumeration limit was exceeded."""


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


_SINGLE_CHAR = {
    "∀": FORALL,
    "∃": EXISTS,
    "¬": NOT,
    "~": NOT,
    "∧": AND,
    "&": AND,
    "∨": OR,
    "|": OR,
    "→": IMPLIES,
    "↔": IFF,
    "⊕": XOR,
    "^": XOR,
    "(": LPAREN,
    ")": RPAREN,
    ",": COMMA,
}
_KEYWORDS = {"forall": FORALL, "exists": EXISTS}
_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


def lex(text: str) -> list[Token]:
    """Tokenize ``text``, accepting Unicode and ASCII spellings together."""
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith("<->", i):
            tokens.append(Token(IFF, "<->", i))
            i += 3
            continue
        if text.startswith("->", i):
            tokens.append(Token(IMPLIES, "->", i))
            i += 2
            continue
        kind = _SINGLE_CHAR.get(ch)
        if kind is not None:
            tokens.append(Token(kind, ch, i))
            i += 1
            continue
        match = _IDENT_RE.match(text, i)
        if match is not None:
            word = match.group()
            tokens.append(Token(_KEYWORDS.get(word, IDENT), word, i))
            i = match.end()
            continue
        raise LexError(f"unexpected character {ch!r}", i)
    return tokens


# --- abstract syntax ---------------------------------------------------------


@dataclass(frozen=True)
class FolExpr:
    """Base class for formula nodes.  Instances are immutable and hashable."""


@dataclass(frozen=True)
class Atom(FolExpr):
    predicate: str
    args: tuple[str, ...] = ()

    def __repr__(self) -> str:
        if not self.args:
            return f"Atom({self.predicate!r})"
        return f"Atom({self.predicate!r}, {self.args!r})"


@dataclass(frozen=True)
class Not(FolExpr):
    body: FolExpr

    def __repr__(self) -> str:
        return f"Not({self.body!r})"


@dataclass(frozen=True)
class Binary(FolExpr):
    op: str
    left: FolExpr
    right: FolExpr

    def __repr__(self) -> str:
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


@dataclass(frozen=True)
class Quantified(FolExpr):
    quantifier: str
    variable: str
    body: FolExpr

    def __repr__(self) -> str:
        return f"Quantified({self.quantifier!r}, {self.variable!r}, {self.body!r})"


def atom_text(predicate: str, args: tuple[str, ...]) -> str:
    if not args:
        return predicate
    return f"{predicate}({', '.join(args)})"


@dataclass(frozen=True)
class AtomicUnit:
    """One distinct atom of a formula.  Two units compare equal exactly when
    their canonical text is equal."""

    predicate: str
    args: tuple[str, ...]

    @property
    def canonical_text(self) -> str:
        return atom_text(self.predicate, self.args)

    def __repr__(self) -> str:
        return f"AtomicUnit({self.canonical_text!r})"


# --- parsing -----------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token], mode: str = "precedence"):
        self.tokens = tokens
        self.pos = 0
        self.mode = mode

    def peek(self) -> Token | None:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return None

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError(f"expected {what}, found end of input")
        if tok.kind != kind:
            raise ParseError(f"expected {what}, found {tok.text!r}", tok.position)
        return self.take()

    def parse(self) -> FolExpr:
        expr = self.expr() if self.mode == "precedence" else self.fp_expr()
        tok = self.peek()
        if tok is not None:
            if tok.kind == RPAREN:
                raise ParseError("unbalanced parentheses", tok.position)
            raise ParseError(f"unexpected token {tok.text!r}", tok.position)
        return expr

    # precedence mode

    def expr(self) -> FolExpr:
        return self.iff_level()

    def iff_level(self) -> FolExpr:
        left = self.implies_level()
        while True:
            tok = self.peek()
            if tok is None or tok.kind not in (IFF, XOR):
                return left
            self.take()
            left = Binary(tok.kind, left, self.implies_level())

    def implies_level(self) -> FolExpr:
        left = self.or_level()
        tok = self.peek()
        if tok is not None and tok.kind == IMPLIES:
            self.take()
            return Binary(IMPLIES, left, self.implies_level())
        return left

    def or_level(self) -> FolExpr:
        left = self.and_level()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != OR:
                return left
            self.take()
            left = Binary(OR, left, self.and_level())

    def and_level(self) -> FolExpr:
        left = self.unary()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != AND:
                return left
            self.take()
            left = Binary(AND, left, self.unary())

    def unary(self) -> FolExpr:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        if tok.kind == NOT:
            self.take()
            return Not(self.unary())
        if tok.kind in QUANTIFIERS:
            self.take()
            var = self.expect(IDENT, "a quantified variable name")
            return Quantified(tok.kind, var.text, self.unary())
        if tok.kind == IDENT:
            return self.atom()
        if tok.kind == LPAREN:
            self.take()
            inner = self.expr()
            self.close_paren(tok)
            return inner
        raise ParseError(f"unexpected token {tok.text!r}", tok.position)

    def atom(self) -> FolExpr:
        name = self.take()
        tok = self.peek()
        if tok is None or tok.kind != LPAREN:
            return Atom(name.text)
        self.take()
        tok = self.peek()
        if tok is not None and tok.kind == RPAREN:
            raise ParseError("empty argument list", tok.position)
        args = [self.expect(IDENT, "an argument name").text]
        while True:
            tok = self.peek()
            if tok is not None and tok.kind == COMMA:
                self.take()
                args.append(self.expect(IDENT, "an argument name").text)
                continue
            self.close_paren(name)
            return Atom(name.text, tuple(args))

    def close_paren(self, opener: Token) -> None:
        tok = self.peek()
        if tok is None:
            raise ParseError("unbalanced parentheses", opener.position)
        if tok.kind != RPAREN:
            raise ParseError(f"expected ')', found {tok.text!r}", tok.position)
        self.take()

    # fully-parenthesized mode: every binary connective sits inside its own
    # parentheses, so at most one connective appears per paren group.

    def fp_expr(self) -> FolExpr:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        if tok.kind == NOT:
            self.take()
            return Not(self.fp_expr())
        if tok.kind in QUANTIFIERS:
            self.take()
            var = self.expect(IDENT, "a quantified variable name")
            return Quantified(tok.kind, var.text, self.fp_expr())
        if tok.kind == IDENT:
            return self.atom()
        if tok.kind == LPAREN:
            self.take()
            first = self.fp_expr()
            nxt = self.peek()
            if nxt is not None and nxt.kind == RPAREN:
                self.take()
                return first
            if nxt is None or nxt.kind not in BINARY_OPS:
                raise ParseError(
                    "expected a binary connective or ')'",
                    None if nxt is None else nxt.position,
                )
            self.take()
            second = self.fp_expr()
            self.close_paren(tok)
            return Binary(nxt.kind, first, second)
        raise ParseError(f"unexpected token {tok.text!r}", tok.position)


def parse(text: str, mode: str = "precedence") -> FolExpr:
    """Parse ``text`` into a formula tree.

    ``mode`` is ``"precedence"`` (default) or ``"fully-parenthesized"``; the
    latter rejects any binary connective that is not wrapped in its own
    parentheses.
    """
    if mode not in ("precedence", "fully-parenthesized"):
        raise ValueError(f"unknown parse mode {mode!r}")
    tokens = lex(text)
    if not tokens:
        raise ParseError("empty formula")
    return _Parser(tokens, mode).parse()


# --- rendering ---------------------------------------------------------------

_UNICODE_SYMBOLS = {NOT: "¬", AND: "∧", OR: "∨", IMPLIES: "→", IFF: "↔", XOR: "⊕"}
_ASCII_SYMBOLS = {NOT: "~", AND: "&", OR: "|", IMPLIES: "->", IFF: "<->", XOR: "^"}
_UNICODE_QUANT = {FORALL: "∀", EXISTS: "∃"}
_ASCII_QUANT = {FORALL: "forall ", EXISTS: "exists "}


def _prec(expr: FolExpr) -> int:
    if isinstance(expr, Binary):
        return _PREC[expr.op]
    return _UNARY_PREC


def render(expr: FolExpr, style: str = "unicode") -> str:
    """Serialize a tree with the minimal parentheses that round-trip through
    :func:`parse` in precedence mode."""
    if style == "unicode":
        sym, quant = _UNICODE_SYMBOLS, _UNICODE_QUANT
    elif style == "ascii":
        sym, quant = _ASCII_SYMBOLS, _ASCII_QUANT
    else:
        raise ValueError(f"unknown render style {style!r}")

    def walk(e: FolExpr) -> str:
        if isinstance(e, Atom):
            return atom_text(e.predicate, e.args)
        if isinstance(e, Not):
            body = walk(e.body)
            if isinstance(e.body, Binary):
                body = f"({body})"
            return sym[NOT] + body
        if isinstance(e, Quantified):
            body = walk(e.body)
            if isinstance(e.body, Binary):
                body = f"({body})"
            return f"{quant[e.quantifier]}{e.variable} {body}"
        assert isinstance(e, Binary)
        p = _PREC[e.op]
        left = walk(e.left)
        # For right-associative implies, an equal-precedence left child needs
        # parentheses; for the left-associative connectives, the right child does.
        if _prec(e.left) < p or (_prec(e.left) == p and e.op == IMPLIES):
            left = f"({left})"
        right = walk(e.right)
        if _prec(e.right) < p or (_prec(e.right) == p and e.op != IMPLIES):
            right = f"({right})"
        return f"{left} {sym[e.op]} {right}"

    return walk(expr)


# --- canonical form ----------------------------------------------------------


def _free_arg_names(expr: FolExpr) -> set[str]:
    free: set[str] = set()

    def walk(e: FolExpr, bound: frozenset[str]) -> None:
        if isinstance(e, Atom):
            free.update(a for a in e.args if a not in bound)
        elif isinstance(e, Not):
            walk(e.body, bound)
        elif isinstance(e, Binary):
            walk(e.left, bound)
            walk(e.right, bound)
        else:
            assert isinstance(e, Quantified)
            walk(e.body, bound | {e.variable})

    walk(expr, frozenset())
    return free


def canonicalize(expr: FolExpr) -> FolExpr:
    """Rename bound variables to v1, v2, ... in order of quantifier
    appearance.  Free names are left alone; fresh names skip any identifier
    that occurs free, so the pass is capture-avoiding and idempotent."""
    free = _free_arg_names(expr)
    counter = [0]

    def fresh() -> str:
        while True:
            counter[0] += 1
            name = f"v{counter[0]}"
            if name not in free:
                return name

    def walk(e: FolExpr, env: dict[str, str]) -> FolExpr:
        if isinstance(e, Atom):
            return Atom(e.predicate, tuple(env.get(a, a) for a in e.args))
        if isinstance(e, Not):
            return Not(walk(e.body, env))
        if isinstance(e, Binary):
            return Binary(e.op, walk(e.left, env), walk(e.right, env))
        assert isinstance(e, Quantified)
        name = fresh()
        inner = dict(env)
        inner[e.variable] = name
        return Quantified(e.quantifier, name, walk(e.body, inner))

    return walk(expr, {})


def atoms_of(expr: FolExpr) -> tuple[AtomicUnit, ...]:
    """Distinct atoms in first-occurrence order (pre-order, left to right).
    The expression should already be canonicalized."""
    seen: dict[str, AtomicUnit] = {}

    def walk(e: FolExpr) -> None:
        if isinstance(e, Atom):
            unit = AtomicUnit(e.predicate, e.args)
            seen.setdefault(unit.canonical_text, unit)
        elif isinstance(e, Not):
            walk(e.body)
        elif isinstance(e, Binary):
            walk(e.left)
            walk(e.right)
        else:
            assert isinstance(e, Quantified)
            walk(e.body)

    walk(expr)
    return tuple(seen.values())


# --- bracketing enumeration --------------------------------------------------


def _split_chain(tokens: list[Token]) -> tuple[list[FolExpr], list[str]]:
    """Split a flat connective chain into parsed operands and operator kinds."""
    parser = _Parser(list(tokens), "precedence")
    operands = [parser.unary()]
    ops: list[str] = []
    while True:
        tok = parser.peek()
        if tok is None:
            return operands, ops
        if tok.kind not in BINARY_OPS:
            raise ParseError(f"expected a binary connective, found {tok.text!r}", tok.position)
        parser.take()
        ops.append(tok.kind)
        operands.append(parser.unary())


def _all_bracketings(operands: list[FolExpr], ops: list[str]) -> list[FolExpr]:
    memo: dict[tuple[int, int], list[FolExpr]] = {}

    def trees(i: int, j: int) -> list[FolExpr]:
        if i == j:
            return [operands[i]]
        key = (i, j)
        cached = memo.get(key)
        if cached is not None:
            return cached
        out: list[FolExpr] = []
        for split in range(i, j):
            for left in trees(i, split):
                for right in trees(split + 1, j):
                    out.append(Binary(ops[split], left, right))
        memo[key] = out
        return out

    return trees(0, len(operands) - 1)


def enumerate_bracketings(
    tokens: list[Token],
    chunk_size: int | None = None,
    max_operators: int = 16,
) -> list[FolExpr]:
    """All binary-tree readings of a flat, unparenthesized connective chain.

    With ``chunk_size=None`` the full Catalan(k) set is produced for k
    operators.  With ``chunk_size=m`` the operand chain is partitioned into
    consecutive chunks of at most m operands; bracketings are enumerated
    within each chunk and the chunk roots are then bracketed over the
    (shorter) bridge chain, which keeps the count far below Catalan(k) once
    k >= m.  Either way the precedence-mode parse is the first element and
    duplicates are removed by structural equality.
    """
    if chunk_size is not None and chunk_size < 2:
        raise ValueError("chunk_size must be at least 2")
    operands, ops = _split_chain(tokens)
    k = len(ops)
    if k > max_operators:
        raise CapExceeded(f"connective chain has {k} operators (cap {max_operators})")
    precedence_tree = _Parser(list(tokens), "precedence").parse()
    if k <= 1:
        return [precedence_tree]

    if chunk_size is None or k < chunk_size:
        enumerated = _all_bracketings(operands, ops)
    else:
        starts = list(range(0, len(operands), chunk_size))
        chunk_lists = []
        for s in starts:
            e = min(s + chunk_size, len(operands))
            chunk_lists.append(_all_bracketings(operands[s:e], ops[s : e - 1]))
        bridge_ops = [ops[min(s + chunk_size, len(operands)) - 1] for s in starts[:-1]]
        # Cartesian product over per-chunk trees, then bracket the roots.
        enumerated = []
        for combo in itertools.product(*chunk_lists):
            enumerated.extend(_all_bracketings(list(combo), bridge_ops))

    result = [precedence_tree]
    seen = {precedence_tree}
    for tree in enumerated:
        if tree not in seen:
            seen.add(tree)
            result.append(tree)
    return result
