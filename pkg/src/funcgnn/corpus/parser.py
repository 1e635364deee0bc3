"""Recursive-descent parser for the mini-language used to write corpus programs.

Grammar (EBNF)::

    program   = function | { statement } ;
    function  = type IDENT "(" [ param { "," param } ] ")" block ;
    param     = type IDENT ;
    type      = ( "int" | "float" | "bool" | "void" ) [ "[" "]" ] ;
    block     = "{" { statement } "}" ;
    statement = [ type ] assign ";"
              | "if" "(" expr ")" block [ "else" ( block | if_stmt ) ]
              | "while" "(" expr ")" block
              | "for" "(" [ [ type ] assign ] ";" expr ";" [ assign ] ")" block
              | "return" [ expr ] ";"
              | block ;
    assign    = lvalue "=" expr ;
    lvalue    = IDENT [ "[" expr "]" ] ;
    expr      = bitor ;
    bitor     = bitxor { "|" bitxor } ;
    bitxor    = bitand { "^" bitand } ;
    bitand    = equality { "&" equality } ;
    equality  = relation { ( "==" | "!=" ) relation } ;
    relation  = additive { ( "<" | "<=" | ">" | ">=" ) additive } ;
    additive  = term { ( "+" | "-" ) term } ;
    term      = unary { ( "*" | "/" | "%" ) unary } ;
    unary     = ( "-" | "!" ) unary | primary ;
    primary   = NUMBER | IDENT [ "[" expr "]" ] | "(" expr ")" ;

Comments start with ``//`` and run to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

KEYWORDS = {"if", "else", "while", "for", "return", "int", "float", "bool", "void"}
TYPES = {"int", "float", "bool", "void"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|[-+*/%<>&|^!=(){}\[\];,])
    """,
    re.VERBOSE,
)


class ParseError(SyntaxError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | kw | op | eof
    text: str
    pos: int
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, text, pos, line, pos - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", pos, line, pos - line_start + 1))
    return tokens


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    text: str


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Index:
    name: str
    index: "Expr"


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int  # source offset of the operator token


Expr = Union[Num, Name, Index, Unary, BinOp]


@dataclass(frozen=True)
class Assign:
    target: Union[Name, Index]
    value: Expr
    line: int = 0


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple


@dataclass(frozen=True)
class For:
    init: Assign | None
    cond: Expr
    update: Assign | None
    body: tuple


@dataclass(frozen=True)
class Return:
    value: Expr | None = None


@dataclass(frozen=True)
class Block:
    body: tuple


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[tuple[str, str], ...]  # (type, name)
    body: tuple
    return_type: str = "void"
    bare: bool = field(default=False, compare=False)


Stmt = Union[Assign, If, While, For, Return, Block]

_BINARY_LEVELS = (
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
)


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, expected: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"expected {expected}, found {found}", t.line, t.col)

    def accept(self, text: str) -> Token | None:
        if self.tok.text == text and self.tok.kind in ("op", "kw"):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            self.error(repr(text))
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error("identifier")
        t = self.tok
        self.i += 1
        return t

    def type_(self) -> str:
        if not (self.tok.kind == "kw" and self.tok.text in TYPES):
            self.error("type")
        name = self.tok.text
        self.i += 1
        if self.tok.text == "[" and self.peek().text == "]":
            self.i += 2
            name += "[]"
        return name

    # program structure

    def program(self) -> Function:
        if self.tok.kind == "kw" and self.tok.text in TYPES and self._looks_like_function():
            fn = self.function()
            if self.tok.kind != "eof":
                self.error("end of input after the function body")
            return fn
        body = []
        while self.tok.kind != "eof":
            body.append(self.statement())
        return Function("main", (), tuple(body), "void", bare=True)

    def _looks_like_function(self) -> bool:
        k = 1
        if self.peek(1).text == "[":
            k = 3
        return self.peek(k).kind == "ident" and self.peek(k + 1).text == "("

    def function(self) -> Function:
        rtype = self.type_()
        name = self.ident().text
        self.expect("(")
        params = []
        if not self.accept(")"):
            while True:
                ptype = self.type_()
                params.append((ptype, self.ident().text))
                if self.accept(")"):
                    break
                self.expect(",")
        return Function(name, tuple(params), self.block(), rtype)

    def block(self) -> tuple:
        self.expect("{")
        body = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                self.error("'}'")
            body.append(self.statement())
        return tuple(body)

    def statement(self):
        t = self.tok
        if t.kind == "kw":
            if t.text == "if":
                return self.if_stmt()
            if t.text == "while":
                self.i += 1
                self.expect("(")
                cond = self.expr()
                self.expect(")")
                return While(cond, self.block())
            if t.text == "for":
                return self.for_stmt()
            if t.text == "return":
                self.i += 1
                value = None if self.tok.text == ";" else self.expr()
                self.expect(";")
                return Return(value)
            if t.text in TYPES:
                self.type_()
                stmt = self.assign()
                self.expect(";")
                return stmt
            self.error("statement")
        if t.text == "{":
            return Block(self.block())
        stmt = self.assign()
        self.expect(";")
        return stmt

    def if_stmt(self) -> If:
        self.expect("if")
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then = self.block()
        orelse: tuple = ()
        if self.accept("else"):
            orelse = (self.if_stmt(),) if self.tok.text == "if" else self.block()
        return If(cond, then, orelse)

    def for_stmt(self) -> For:
        self.expect("for")
        self.expect("(")
        init = None
        if self.tok.text != ";":
            if self.tok.kind == "kw" and self.tok.text in TYPES:
                self.type_()
            init = self.assign()
        self.expect(";")
        cond = self.expr()
        self.expect(";")
        update = None if self.tok.text == ")" else self.assign()
        self.expect(")")
        return For(init, cond, update, self.block())

    def assign(self) -> Assign:
        line = self.tok.line
        name = self.ident().text
        target: Union[Name, Index] = Name(name)
        if self.accept("["):
            target = Index(name, self.expr())
            self.expect("]")
        self.expect("=")
        return Assign(target, self.expr(), line)

    # expressions

    def expr(self, level: int = 0) -> Expr:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            op = self.tok
            self.i += 1
            right = self.expr(level + 1)
            left = BinOp(op.text, left, right, op.pos)
        return left

    def unary(self) -> Expr:
        if self.tok.text in ("-", "!") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            return Unary(op, self.unary())
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(t.text)
        if t.kind == "ident":
            self.i += 1
            if self.accept("["):
                idx = self.expr()
                self.expect("]")
                return Index(t.text, idx)
            return Name(t.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.error("expression")


def parse(source: str) -> Function:
    """Parse one function (or a bare statement list) into an AST."""
    return _Parser(source).program()


def iter_binops(node):
    """Yield every BinOp in ``node`` (statements or expressions), in source order."""
    found: list[BinOp] = []

    def visit(n):
        if isinstance(n, BinOp):
            found.append(n)
            visit(n.left)
            visit(n.right)
        elif isinstance(n, Index):
            visit(n.index)
        elif isinstance(n, Unary):
            visit(n.operand)
        elif isinstance(n, Assign):
            visit(n.target)
            visit(n.value)
        elif isinstance(n, If):
            visit(n.cond)
            for s in n.then + n.orelse:
                visit(s)
        elif isinstance(n, While):
            visit(n.cond)
            for s in n.body:
                visit(s)
        elif isinstance(n, For):
            for part in (n.init, n.cond, n.update):
                if part is not None:
                    visit(part)
            for s in n.body:
                visit(s)
        elif isinstance(n, Return):
            if n.value is not None:
                visit(n.value)
        elif isinstance(n, (Block, Function)):
            for s in n.body:
                visit(s)

    visit(node)
    return sorted(found, key=lambda b: b.pos)
