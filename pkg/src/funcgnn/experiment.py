"""Shared pieces of the desk-scale experiment: the seeded corpus and the runtime comparison."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

from .corpus import builtin_programs, generate_corpus
from .ged import DEFAULT_BUDGET, DEFAULT_EXACT_LIMIT
from .graph_core import GraphPairRecord
from .train import evaluate_methods

DESK_PROGRAMS = 20
DESK_MUTANTS = 4


def desk_corpus(seed: int = 0, programs: int = DESK_PROGRAMS, mutants: int = DESK_MUTANTS) -> list[GraphPairRecord]:
    """First ``programs`` builtins with ``mutants`` mutants each, all ordered pairs labeled."""
    return generate_corpus(builtin_programs()[:programs], mutants, seed=seed)


@dataclass(frozen=True)
class RuntimeComparison:
    pairs: int
    exact_pairs: int
    seconds: dict[str, float]

    @property
    def lsap_over_funcgnn(self) -> float:
        return self.seconds["lsap"] / self.seconds["funcgnn"]

    @property
    def exact_over_funcgnn(self) -> float:
        """Exact on the small-pair subset against funcGNN on the whole set."""
        return self.seconds["exact"] / self.seconds["funcgnn"]

    @property
    def exact_over_funcgnn_same_pairs(self) -> float:
        return self.seconds["exact"] / self.seconds["funcgnn_small"]

    def to_json(self) -> dict:
        return {
            "pairs": self.pairs,
            "exact_pairs": self.exact_pairs,
            "seconds": self.seconds,
            "lsap_over_funcgnn": self.lsap_over_funcgnn,
            "exact_over_funcgnn": self.exact_over_funcgnn,
            "exact_over_funcgnn_same_pairs": self.exact_over_funcgnn_same_pairs,
        }


def compare_runtimes(
    records: Sequence[GraphPairRecord],
    model,
    repeat: int = 3,
    exact_node_limit: int = DEFAULT_EXACT_LIMIT,
    budget: int = DEFAULT_BUDGET,
) -> RuntimeComparison:
    """Best-of-``repeat`` serial wall time per method.

    Each timed pass is a full ``evaluate_methods`` call, so normalization and
    MSE are included. Repeats are interleaved across methods so slow drift in
    machine load hits every method alike.
    """
    small = [r for r in records if max(len(r.graph_1), len(r.graph_2)) <= exact_node_limit]
    plan = [("funcgnn", records, "funcgnn"), ("funcgnn_small", small, "funcgnn"), ("lsap", records, "lsap"), ("exact", small, "exact")]
    best = {name: float("inf") for name, _, _ in plan}
    for _ in range(repeat):
        for name, subset, method in plan:
            if not subset:
                best[name] = 0.0
                continue
            t0 = time.perf_counter()
            evaluate_methods(subset, model, [method], 1, exact_node_limit=exact_node_limit, budget=budget)
            best[name] = min(best[name], time.perf_counter() - t0)
    return RuntimeComparison(len(records), len(small), best)
