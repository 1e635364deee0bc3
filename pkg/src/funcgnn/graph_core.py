"""Labeled control-flow graphs, the label vocabulary, and the pair-dataset JSON format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PROVENANCES = ("exact", "lsap", "hed")


class DatasetError(ValueError):
    """Raised when a pair-dataset file cannot be read or fails validation."""


@dataclass(frozen=True)
class LabeledCfg:
    """Directed graph whose nodes ``0..N-1`` carry one statement label each."""

    labels: tuple[str, ...]
    edges: tuple[tuple[int, int], ...] = ()
    name: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "edges", tuple((int(s), int(d)) for s, d in self.edges))
        object.__setattr__(self, "_hash", hash((self.labels, self.edges, self.name)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def nodes(self) -> range:
        return range(len(self.labels))

    def successors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.labels]
        for s, d in self.edges:
            out[s].append(d)
        return out

    def predecessors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.labels]
        for s, d in self.edges:
            out[d].append(s)
        return out

    def adjacency(self) -> np.ndarray:
        a = np.zeros((len(self.labels), len(self.labels)), dtype=np.int8)
        for s, d in self.edges:
            a[s, d] = 1
        return a

    def permuted(self, perm: Sequence[int]) -> "LabeledCfg":
        """Relabel node ``i`` as ``perm[i]``; the graph stays isomorphic."""
        labels = [""] * len(self.labels)
        for old, new in enumerate(perm):
            labels[new] = self.labels[old]
        edges = [(perm[s], perm[d]) for s, d in self.edges]
        return LabeledCfg(tuple(labels), tuple(edges), self.name)

    def to_json(self) -> dict:
        obj: dict = {}
        if self.name is not None:
            obj["name"] = self.name
        obj["labels"] = list(self.labels)
        obj["edges"] = [[s, d] for s, d in self.edges]
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "LabeledCfg":
        if not isinstance(obj, dict) or "labels" not in obj or "edges" not in obj:
            raise DatasetError("graph object needs 'labels' and 'edges'")
        labels = obj["labels"]
        edges = obj["edges"]
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise DatasetError("'labels' must be a list of strings")
        if not isinstance(edges, list) or not all(
            isinstance(e, list) and len(e) == 2 and all(isinstance(i, int) and not isinstance(i, bool) for i in e)
            for e in edges
        ):
            raise DatasetError("'edges' must be a list of [src, dst] integer pairs")
        name = obj.get("name")
        return cls(tuple(labels), tuple((s, d) for s, d in edges), name)


def validate_cfg(g: LabeledCfg) -> list[str]:
    """Return every invariant violation of ``g``; an empty list means the graph is valid."""
    problems = []
    n = len(g.labels)
    if n == 0:
        problems.append("graph has no nodes")
    for i, label in enumerate(g.labels):
        if not label:
            problems.append(f"empty label at node {i}")
    seen = set()
    for s, d in g.edges:
        if not (0 <= s < n and 0 <= d < n):
            problems.append(f"dangling edge ({s},{d})")
        if s == d:
            problems.append(f"self-loop at node {s}")
        if (s, d) in seen:
            problems.append(f"duplicate edge ({s},{d})")
        seen.add((s, d))
    return problems


def check_cfg(g: LabeledCfg) -> LabeledCfg:
    problems = validate_cfg(g)
    if problems:
        raise ValueError("invalid CFG: " + "; ".join(problems))
    return g


@dataclass(frozen=True)
class LabelVocabulary:
    """Dense label index with a trailing UNK slot."""

    labels: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(self.labels))
        index = {lab: i for i, lab in enumerate(self.labels)}
        if len(index) != len(self.labels):
            raise ValueError("vocabulary labels must be distinct")
        object.__setattr__(self, "_index", index)

    @property
    def unk_index(self) -> int:
        return len(self.labels)

    @property
    def size(self) -> int:
        return len(self.labels) + 1

    def __len__(self) -> int:
        return self.size

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        return self._index.get(label, self.unk_index)

    def indices(self, g: LabeledCfg) -> np.ndarray:
        get, unk = self._index.get, len(self.labels)
        return np.array([get(x, unk) for x in g.labels], dtype=np.int64)


def build_vocabulary(corpus: Iterable[LabeledCfg]) -> LabelVocabulary:
    seen: dict[str, None] = {}
    empty = True
    for g in corpus:
        empty = False
        for label in g.labels:
            seen.setdefault(label, None)
    if empty:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    return LabelVocabulary(tuple(seen))


def one_hot(label: str, vocab: LabelVocabulary) -> np.ndarray:
    v = np.zeros(vocab.size)
    v[vocab.index(label)] = 1.0
    return v


def normalized_similarity(ged: float, n1: int, n2: int) -> float:
    if ged < 0:
        raise ValueError(f"GED must be non-negative, got {ged}")
    if n1 < 1 or n2 < 1:
        raise ValueError("graph sizes must be positive")
    return math.exp(-2.0 * ged / (n1 + n2))


@dataclass(frozen=True)
class GraphPairRecord:
    graph_1: LabeledCfg
    graph_2: LabeledCfg
    ged: float
    provenance: str = "exact"
    similarity: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        if not (self.ged >= 0) or math.isinf(self.ged):
            raise ValueError(f"ged must be a finite non-negative number, got {self.ged}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        expected = normalized_similarity(self.ged, len(self.graph_1), len(self.graph_2))
        if math.isnan(self.similarity):
            object.__setattr__(self, "similarity", expected)
        elif abs(self.similarity - expected) > 1e-12:
            raise ValueError(f"similarity {self.similarity} disagrees with exp(-2*ged/(n1+n2)) = {expected}")

    def to_json(self) -> dict:
        return {
            "graph_1": self.graph_1.to_json(),
            "graph_2": self.graph_2.to_json(),
            "ged": self.ged,
            "similarity": self.similarity,
            "provenance": self.provenance,
        }


def _record_from_json(obj, i: int) -> GraphPairRecord:
    if not isinstance(obj, dict):
        raise DatasetError(f"record {i}: expected an object")
    for key in ("graph_1", "graph_2", "ged"):
        if key not in obj:
            raise DatasetError(f"record {i}: missing field {key!r}")
    ged = obj["ged"]
    if isinstance(ged, bool) or not isinstance(ged, (int, float)):
        raise DatasetError(f"record {i}: 'ged' must be a number")
    if ged < 0:
        raise DatasetError(f"record {i}: 'ged' must be non-negative, got {ged}")
    try:
        g1 = LabeledCfg.from_json(obj["graph_1"])
        g2 = LabeledCfg.from_json(obj["graph_2"])
    except DatasetError as exc:
        raise DatasetError(f"record {i}: {exc}") from None
    for key, g in (("graph_1", g1), ("graph_2", g2)):
        problems = validate_cfg(g)
        if problems:
            raise DatasetError(f"record {i}: {key} invalid: " + "; ".join(problems))
    try:
        return GraphPairRecord(
            g1,
            g2,
            ged,
            obj.get("provenance", "exact"),
            obj.get("similarity", float("nan")),
        )
    except ValueError as exc:
        raise DatasetError(f"record {i}: {exc}") from None


def records_to_json(records: Sequence[GraphPairRecord]) -> str:
    return json.dumps([r.to_json() for r in records], ensure_ascii=False)


def write_pair_dataset(records: Sequence[GraphPairRecord], path: str | Path) -> None:
    Path(path).write_text(records_to_json(records), encoding="utf-8")


def read_pair_dataset(path: str | Path) -> list[GraphPairRecord]:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise DatasetError(f"{path}: no records")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed JSON: {exc}") from None
    if not isinstance(data, list):
        raise DatasetError(f"{path}: top level must be a JSON array of records")
    if not data:
        raise DatasetError(f"{path}: no records")
    return [_record_from_json(obj, i) for i, obj in enumerate(data)]


def read_graph(path: str | Path) -> LabeledCfg:
    """Load one graph object (``{"labels": ..., "edges": ...}``) from a JSON file."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed JSON: {exc}") from None
    g = LabeledCfg.from_json(obj)
    problems = validate_cfg(g)
    if problems:
        raise DatasetError(f"{path}: " + "; ".join(problems))
    return g
