"""Single-operator substitution mutants."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .parser import parse, iter_binops

SWAPS = {
    "arith": {"+": "-", "-": "+", "*": "/", "/": "*"},
    "relational": {"<": "<=", "<=": "<", ">": ">=", ">=": ">", "==": "!=", "!=": "=="},
    "bitwise": {"&": "|", "|": "&"},
}
KIND_OF = {op: kind for kind, table in SWAPS.items() for op in table}


class MutationError(ValueError):
    pass


@dataclass(frozen=True)
class MiniProgram:
    name: str
    source: str

    def ast(self):
        return parse(self.source)


@dataclass(frozen=True)
class MutationOp:
    kind: str  # arith | relational | bitwise
    site: int  # ordinal of the operator among the program's mutable operators
    seed: int = 0


@dataclass(frozen=True)
class MutationSite:
    site: int
    kind: str
    op: str
    pos: int


def mutable_sites(p: MiniProgram) -> list[MutationSite]:
    sites = []
    for b in iter_binops(p.ast()):
        kind = KIND_OF.get(b.op)
        if kind is not None:
            sites.append(MutationSite(len(sites), kind, b.op, b.pos))
    return sites


def mutate(p: MiniProgram, op: MutationOp, name: str | None = None) -> MiniProgram:
    """Swap exactly one operator token; everything else in the source is kept verbatim."""
    sites = mutable_sites(p)
    listing = ", ".join(f"{s.site}:{s.kind}({s.op})" for s in sites) or "none"
    if not sites:
        raise MutationError(f"{p.name}: program has no mutable operator")
    if not 0 <= op.site < len(sites) or sites[op.site].kind != op.kind:
        raise MutationError(f"{p.name}: no {op.kind} operator at site {op.site}; mutable sites: {listing}")
    s = sites[op.site]
    new_op = SWAPS[s.kind][s.op]
    source = p.source[: s.pos] + new_op + p.source[s.pos + len(s.op):]
    return MiniProgram(name or f"{p.name}_{op.kind}{op.site}", source)


def choose_mutations(p: MiniProgram, count: int, seed: int) -> list[MutationOp]:
    """Pick ``count`` sites uniformly at random, distinct while enough sites exist."""
    sites = mutable_sites(p)
    if count and not sites:
        raise MutationError(f"{p.name}: program has no mutable operator")
    rng = np.random.default_rng(seed)
    picks: list[int] = []
    while len(picks) < count:
        need = min(count - len(picks), len(sites))
        picks.extend(int(i) for i in rng.choice(len(sites), size=need, replace=False))
    return [MutationOp(sites[i].kind, i, seed) for i in picks]


def load_programs(directory: str | Path) -> list[MiniProgram]:
    """Read every ``*.mini`` file (one function each), sorted by file name."""
    paths = sorted(Path(directory).glob("*.mini"))
    if not paths:
        raise FileNotFoundError(f"no .mini files in {directory}")
    return [MiniProgram(path.stem, path.read_text(encoding="utf-8")) for path in paths]
