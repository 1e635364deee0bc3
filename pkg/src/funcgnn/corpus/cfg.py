"""Lower a mini-language AST into a labeled control-flow graph of atomic statements.

Every compound expression is broken into three-address form: an expression
with k binary operators yields k nodes, the innermost operations going into
fresh temporaries ``$t0, $t1, ...`` (left to right) and the outermost one
staying in the statement itself, e.g. ``x = a + b * c`` becomes
``$t0 = b * c`` followed by ``x = a + $t0``.
"""

from __future__ import annotations

from .parser import Assign, BinOp, Block, For, Function, If, Index, Name, Num, Return, Unary, While, parse
from ..graph_core import LabeledCfg


class _Builder:
    def __init__(self) -> None:
        self.labels: list[str] = []
        self.edges: dict[tuple[int, int], None] = {}
        self.temps = 0
        self.preds: list[int] = []

    def emit(self, label: str) -> int:
        nid = len(self.labels)
        self.labels.append(label)
        for p in self.preds:
            self.edges.setdefault((p, nid), None)
        self.preds = [nid]
        return nid

    def link(self, preds: list[int], target: int) -> None:
        for p in preds:
            if p != target:
                self.edges.setdefault((p, target), None)

    # expressions

    def atom(self, e) -> str:
        """Render ``e`` as an operand, spilling any operator into a temporary."""
        if isinstance(e, Num):
            return e.text
        if isinstance(e, Name):
            return e.id
        if isinstance(e, Index):
            return f"{e.name}[{self.simple(e.index)}]"
        if isinstance(e, Unary):
            if e.op == "-" and isinstance(e.operand, Num):
                return "-" + e.operand.text
            inner = self.simple(e.operand)
            return e.op + inner
        return self.spill(self.value(e))

    def simple(self, e) -> str:
        # array indices and unary operands must be a name or a literal
        if isinstance(e, (Num, Name)):
            return self.atom(e)
        if isinstance(e, Unary) and e.op == "-" and isinstance(e.operand, Num):
            return self.atom(e)
        if isinstance(e, BinOp):
            return self.atom(e)
        return self.spill(self.atom(e))

    def spill(self, rvalue: str) -> str:
        name = f"$t{self.temps}"
        self.temps += 1
        self.emit(f"{name} = {rvalue}")
        return name

    def value(self, e) -> str:
        """Render ``e`` as a right-hand side holding at most one operator."""
        if isinstance(e, BinOp):
            left = self.atom(e.left)
            right = self.atom(e.right)
            return f"{left} {e.op} {right}"
        return self.atom(e)

    # statements

    def block(self, stmts) -> None:
        for s in stmts:
            self.stmt(s)

    def stmt(self, s) -> None:
        if isinstance(s, Assign):
            self.assign(s)
        elif isinstance(s, Return):
            self.emit("return" if s.value is None else f"return {self.value(s.value)}")
            self.preds = []
        elif isinstance(s, If):
            cond = self.condition(s.cond)
            self.preds = [cond]
            self.block(s.then)
            then_exits = self.preds
            self.preds = [cond]
            self.block(s.orelse)
            self.preds = list(dict.fromkeys(then_exits + self.preds))
        elif isinstance(s, While):
            header = len(self.labels)
            cond = self.condition(s.cond)
            self.loop_body(s.body, None, header, cond)
        elif isinstance(s, For):
            if s.init is not None:
                self.assign(s.init)
            header = len(self.labels)
            cond = self.condition(s.cond)
            self.loop_body(s.body, s.update, header, cond)
        elif isinstance(s, Block):
            self.block(s.body)
        else:
            raise TypeError(f"unknown statement {s!r}")

    def loop_body(self, body, update, header: int, cond: int) -> None:
        self.preds = [cond]
        self.block(body)
        if update is not None:
            self.assign(update)
        if self.preds == [cond]:
            # empty loop body: keep the back edge off the condition node itself
            self.emit("nop")
        self.link(self.preds, header)
        self.preds = [cond]

    def condition(self, e) -> int:
        return self.emit(f"if {self.value(e)}")

    def assign(self, s: Assign) -> None:
        if isinstance(s.target, Index):
            target = f"{s.target.name}[{self.simple(s.target.index)}]"
        else:
            target = s.target.id
        self.emit(f"{target} = {self.value(s.value)}")


def build_cfg(fn: Function, name: str | None = None) -> LabeledCfg:
    """One node per atomic statement; edges follow execution order.

    Parameters become identity nodes (``a := @parameter0``) at the entry,
    and a bare ``return`` is appended when control can fall off the end.
    """
    b = _Builder()
    for i, (_, pname) in enumerate(fn.params):
        b.emit(f"{pname} := @parameter{i}")
    b.block(fn.body)
    if b.preds or not b.labels:
        b.emit("return")
    return LabeledCfg(tuple(b.labels), tuple(b.edges), name if name is not None else fn.name)


def cfg_from_source(source: str, name: str | None = None) -> LabeledCfg:
    return build_cfg(parse(source), name)
