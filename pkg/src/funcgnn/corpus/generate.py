"""All-ordered-pairs corpus generation with ground-truth GED labels."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..ged import DEFAULT_BUDGET, DEFAULT_EXACT_LIMIT, UNIT_COSTS, EditCostModel, GedBudgetExhausted, ground_truth_ged
from ..graph_core import GraphPairRecord, LabeledCfg, check_cfg
from .cfg import build_cfg
from .mutate import MiniProgram, MutationError, choose_mutations, mutate
from .parser import ParseError

log = logging.getLogger(__name__)


class CorpusError(RuntimeError):
    pass


@dataclass(frozen=True)
class CorpusGraph:
    name: str
    program: MiniProgram
    cfg: LabeledCfg
    parent: str  # name of the base program (itself for originals)


def program_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def build_graphs(programs: Sequence[MiniProgram], mutants_per_program: int, seed: int = 0) -> list[CorpusGraph]:
    """Parse every program, add its mutants, and build all CFGs (originals first within each group)."""
    if mutants_per_program < 0:
        raise ValueError("mutants_per_program must be >= 0")
    out = []
    for i, p in enumerate(programs):
        try:
            base = CorpusGraph(p.name, p, check_cfg(build_cfg(p.ast(), p.name)), p.name)
        except ParseError as exc:
            raise CorpusError(f"{p.name}: {exc}") from exc
        out.append(base)
        try:
            ops = choose_mutations(p, mutants_per_program, program_seed(seed, i))
            for j, op in enumerate(ops, start=1):
                m = mutate(p, op, name=f"{p.name}_m{j}")
                out.append(CorpusGraph(m.name, m, check_cfg(build_cfg(m.ast(), m.name)), p.name))
        except (MutationError, ParseError) as exc:
            raise CorpusError(f"mutation of {p.name} failed: {exc}") from exc
    return out


def _label_chunk(args):
    graphs, pairs, costs, limit, budget = args
    out = []
    for i, j in pairs:
        try:
            res = ground_truth_ged(graphs[i], graphs[j], costs, limit, budget)
        except GedBudgetExhausted as exc:
            raise CorpusError(f"exact GED budget exhausted for ({graphs[i].name}, {graphs[j].name}): {exc}") from exc
        out.append((i, j, res.distance, res.provenance))
    return out


def label_pairs(
    graphs: Sequence[LabeledCfg],
    costs: EditCostModel = UNIT_COSTS,
    exact_node_limit: int = DEFAULT_EXACT_LIMIT,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
) -> list[GraphPairRecord]:
    """Label all M^2 ordered pairs, canonical (i, j) order.

    Every GED algorithm here is symmetric, so each unordered pair is computed
    once and emitted in both orders.
    """
    m = len(graphs)
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    if workers <= 1:
        results = _label_chunk((graphs, pairs, costs, exact_node_limit, budget))
    else:
        chunks = [pairs[k::workers * 4] for k in range(workers * 4)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_label_chunk, [(graphs, c, costs, exact_node_limit, budget) for c in chunks])
            results = [r for part in parts for r in part]
    table = {}
    for i, j, d, prov in results:
        table[i, j] = table[j, i] = (d, prov)
    records = []
    for i in range(m):
        for j in range(m):
            d, prov = table[i, j]
            records.append(GraphPairRecord(graphs[i], graphs[j], d, prov))
    return records


def generate_corpus(
    programs: Sequence[MiniProgram],
    mutants_per_program: int = 4,
    costs: EditCostModel = UNIT_COSTS,
    exact_node_limit: int = DEFAULT_EXACT_LIMIT,
    seed: int = 0,
    workers: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> list[GraphPairRecord]:
    graphs = build_graphs(programs, mutants_per_program, seed)
    log.info("built %d graphs from %d programs", len(graphs), len(programs))
    return label_pairs([g.cfg for g in graphs], costs, exact_node_limit, budget, workers)
