"""Independent reference implementations used only by the test-suite."""

from __future__ import annotations

import itertools

import numpy as np

from funcgnn.graph_core import LabeledCfg


def _all_node_maps(n1: int, n2: int) -> np.ndarray:
    """Every injective partial map g1 -> g2, as rows; -1 marks a deleted node."""
    rows = []
    for k in range(min(n1, n2) + 1):
        for kept in itertools.combinations(range(n1), k):
            for images in itertools.permutations(range(n2), k):
                row = [-1] * n1
                for u, v in zip(kept, images):
                    row[u] = v
                rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(-1, n1)


def brute_force_ged(g1: LabeledCfg, g2: LabeledCfg, costs=None) -> float:
    """Minimum edit-path cost by enumerating every node map (unmapped g2 nodes are inserted)."""
    if costs is None:
        node_ins = node_del = node_sub = edge_ins = edge_del = 1.0
    else:
        node_ins, node_del, node_sub = costs.node_insert, costs.node_delete, costs.node_substitute
        edge_ins, edge_del = costs.edge_insert, costs.edge_delete
    n1, n2 = len(g1), len(g2)
    maps = _all_node_maps(n1, n2)
    mapped = maps >= 0
    n_mapped = mapped.sum(axis=1)

    lab2 = np.array(list(g2.labels) + [""], dtype=object)
    lab1 = np.array(g1.labels, dtype=object)
    differ = (lab2[np.where(mapped, maps, n2)] != lab1[None, :]) & mapped
    node_cost = (
        (n1 - n_mapped) * node_del + (n2 - n_mapped) * node_ins + differ.sum(axis=1) * node_sub
    )

    # pad g2's adjacency so that "deleted" (index n2) never carries an edge
    a2 = np.zeros((n2 + 1, n2 + 1), dtype=np.int64)
    for s, d in g2.edges:
        a2[s, d] = 1
    idx = np.where(mapped, maps, n2)
    kept = np.zeros(len(maps), dtype=np.int64)
    for s, d in g1.edges:
        kept += a2[idx[:, s], idx[:, d]]
    edge_cost = (len(g1.edges) - kept) * edge_del + (len(g2.edges) - kept) * edge_ins
    return float((node_cost + edge_cost).min())


def random_graph(rng: np.random.Generator, max_nodes: int = 6, alphabet: str = "abc", p_edge: float = 0.3) -> LabeledCfg:
    n = int(rng.integers(1, max_nodes + 1))
    labels = tuple(str(rng.choice(list(alphabet))) for _ in range(n))
    edges = [(s, d) for s in range(n) for d in range(n) if s != d and rng.random() < p_edge]
    return LabeledCfg(labels, tuple(edges))


def finite_difference(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. every entry of ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        hi = f()
        x[i] = old - eps
        lo = f()
        x[i] = old
        grad[i] = (hi - lo) / (2 * eps)
    return grad


# central differences with eps = 1e-5 carry ~1e-11 absolute noise, so a 1e-4
# relative comparison is only meaningful for entries at least this large
FD_RESOLVABLE = 1e-7


def gradient_errors(analytic: np.ndarray, numeric: np.ndarray) -> tuple[float, float]:
    """(worst elementwise relative error over resolvable entries, norm-wise relative error over all entries)."""
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    big = scale >= FD_RESOLVABLE
    elementwise = float((diff[big] / scale[big]).max()) if big.any() else 0.0
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    normwise = float(np.linalg.norm(analytic - numeric) / denom) if denom > 0 else 0.0
    return elementwise, normwise
