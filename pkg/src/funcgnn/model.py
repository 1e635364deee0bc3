"""funcGNN: GraphSAGE node embeddings, attention pooling, NTN comparison and a histogram side channel."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .graph_core import LabeledCfg, LabelVocabulary

CHECKPOINT_FORMAT = "funcgnn-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    sage_dims: tuple[int, ...] = (64, 64, 32)
    ntn_slices: int = 16
    histogram_bins: int = 16
    fc_dims: tuple[int, ...] = (32, 16, 8, 1)
    seed: int = 0
    # GraphSAGE depth is fixed at three unless this is set
    allow_any_depth: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "sage_dims", tuple(int(d) for d in self.sage_dims))
        object.__setattr__(self, "fc_dims", tuple(int(d) for d in self.fc_dims))
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        if len(self.sage_dims) != 3 and not self.allow_any_depth:
            raise ValueError("sage_dims must have 3 layers (set allow_any_depth to override)")
        if not self.sage_dims or min(self.sage_dims) < 1:
            raise ValueError("sage_dims must be positive widths")
        if self.ntn_slices < 1 or self.histogram_bins < 1:
            raise ValueError("ntn_slices and histogram_bins must be >= 1")
        if not self.fc_dims or self.fc_dims[-1] != 1 or min(self.fc_dims) < 1:
            raise ValueError("fc_dims must be positive and end with width 1")

    @property
    def embedding_dim(self) -> int:
        return self.sage_dims[-1]

    def to_json(self) -> dict:
        d = asdict(self)
        d["sage_dims"] = list(self.sage_dims)
        d["fc_dims"] = list(self.fc_dims)
        return d


@dataclass
class ModelParams:
    """Named learnable tensors.

    ``sage_{t}`` is (d_in, d_out); ``attention`` is (F, F); ``ntn_w`` keeps the k
    bilinear (F, F) slices side by side as (F, F*k); ``ntn_v`` is (k, 2F) and
    ``ntn_b`` (1, k); ``fc_w{i}``/``fc_b{i}`` are the dense head.
    """

    tensors: dict[str, Tensor] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def items(self):
        return self.tensors.items()

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def copy(self) -> "ModelParams":
        return ModelParams({k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.tensors.items()})

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.tensors.items()}


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def init_params(config: ModelConfig) -> ModelParams:
    rng = np.random.default_rng(config.seed)
    t: dict[str, np.ndarray] = {}
    d_in = config.vocab_size
    for i, d_out in enumerate(config.sage_dims):
        t[f"sage_{i}"] = _glorot(rng, d_in, d_out)
        d_in = d_out
    f, k = config.embedding_dim, config.ntn_slices
    t["attention"] = _glorot(rng, f, f)
    t["ntn_w"] = _glorot(rng, f, f, (f, f * k))
    t["ntn_v"] = _glorot(rng, 2 * f, k, (k, 2 * f))
    t["ntn_b"] = np.zeros((1, k))
    d_in = k + config.histogram_bins
    for i, d_out in enumerate(config.fc_dims):
        t[f"fc_w{i}"] = _glorot(rng, d_in, d_out)
        t[f"fc_b{i}"] = np.zeros((1, d_out))
        d_in = d_out
    return ModelParams({k: Tensor(v, requires_grad=True) for k, v in t.items()})


# --- graph structure ---------------------------------------------------------


def _mean_entries(g: LabeledCfg) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(g)
    links = set(g.edges)
    links.update((d, s) for s, d in g.edges)
    links.update((v, v) for v in range(n))
    rc = np.array(sorted(links), dtype=np.int64).reshape(-1, 2)
    rows, cols = rc[:, 0], rc[:, 1]
    size = np.bincount(rows, minlength=n)
    return rows, cols, 1.0 / size[rows]


def mean_aggregation_matrix(g: LabeledCfg) -> sp.csr_matrix:
    """Row v averages v itself with every predecessor and successor of v."""
    rows, cols, vals = _mean_entries(g)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(g), len(g)))


class GraphTable:
    """Label indices and aggregation entries for a list of graphs, built once and sliced per batch."""

    def __init__(self, graphs: Sequence[LabeledCfg], vocab: LabelVocabulary):
        self.graphs = list(graphs)
        self.vocab = vocab
        self.sizes = np.array([len(g) for g in self.graphs], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)
        self.owner = np.repeat(np.arange(len(self.graphs)), self.sizes)
        total = int(self.offsets[-1])
        get, unk = vocab._index.get, vocab.unk_index
        self.indices = np.array([get(x, unk) for g in self.graphs for x in g.labels], dtype=np.int64)
        edges = np.array(
            [(s + off, d + off) for g, off in zip(self.graphs, self.offsets.tolist()) for s, d in g.edges], dtype=np.int64
        ).reshape(-1, 2)
        loops = np.arange(total, dtype=np.int64)
        src = np.concatenate([loops, edges[:, 0], edges[:, 1]])
        dst = np.concatenate([loops, edges[:, 1], edges[:, 0]])
        code = np.unique(src * max(total, 1) + dst)
        self.rows, self.cols = code // max(total, 1), code % max(total, 1)
        self.vals = 1.0 / np.bincount(self.rows, minlength=total)[self.rows]

    def __len__(self) -> int:
        return len(self.graphs)

    def batch(self, ids: Sequence[int]):
        ids = np.asarray(ids, dtype=np.int64)
        if len(ids) == len(self.graphs) and np.array_equal(ids, np.arange(len(ids))):
            idx, rows, cols, vals = self.indices, self.rows, self.cols, self.vals
        else:
            if len(np.unique(ids)) != len(ids) or not np.all(np.diff(ids) > 0):
                raise ValueError("batch ids must be strictly increasing")
            wanted = np.zeros(len(self.graphs), dtype=bool)
            wanted[ids] = True
            node_mask = wanted[self.owner]
            remap = np.cumsum(node_mask) - 1
            keep = node_mask[self.rows]
            idx = self.indices[node_mask]
            rows, cols, vals = remap[self.rows[keep]], remap[self.cols[keep]], self.vals[keep]
        sizes = self.sizes[ids]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        total = int(offsets[-1])
        agg = sp.csr_matrix((vals, (rows, cols)), shape=(total, total))
        owner = np.repeat(np.arange(len(ids)), sizes)
        pool = sp.csr_matrix((np.ones(total), np.arange(total), offsets), shape=(len(ids), total))
        mean_pool = sp.csr_matrix((1.0 / sizes[owner], np.arange(total), offsets), shape=(len(ids), total))
        return _Batch(idx, agg, pool, mean_pool, offsets)


@dataclass
class _Batch:
    idx: np.ndarray
    agg: sp.csr_matrix
    pool: sp.csr_matrix
    mean_pool: sp.csr_matrix
    offsets: np.ndarray


@dataclass
class GraphEncoding:
    node_matrix: np.ndarray  # U, (N, F)
    context: np.ndarray  # c, (F,)
    attention: np.ndarray  # a, (N,)
    embedding: np.ndarray  # h, (F,)


# --- model pieces ------------------------------------------------------------


def sage_layer(h_prev: Tensor, g: LabeledCfg | sp.spmatrix, weight: Tensor) -> Tensor:
    """relu(mean({h_v} U {h_u : u in N(v)}) . W) for every node v."""
    agg = mean_aggregation_matrix(g) if isinstance(g, LabeledCfg) else g
    if h_prev.shape[0] != agg.shape[0]:
        raise ad.ShapeError(f"sage_layer: {h_prev.shape[0]} embedding rows for a {agg.shape[0]}-node graph")
    if weight.shape[1] < weight.shape[0]:
        # same product, aggregating the narrower matrix
        return ad.relu(ad.const_matmul(agg, ad.matmul(h_prev, weight)))
    return ad.relu(ad.matmul(ad.const_matmul(agg, h_prev), weight))


def _node_embeddings(batch: _Batch, params: ModelParams, depth: int) -> Tensor:
    # one-hot inputs: O . W_0 is a row gather from W_0
    h = ad.relu(ad.const_matmul(batch.agg, ad.gather_rows(params["sage_0"], batch.idx)))
    for t in range(1, depth):
        h = sage_layer(h, batch.agg, params[f"sage_{t}"])
    return h


def _attention_pool(u: Tensor, batch: _Batch, params: ModelParams):
    mean = ad.const_matmul(batch.mean_pool, u)
    context = ad.relu(ad.matmul(mean, params["attention"]))
    per_node = ad.const_matmul(batch.pool.T.tocsr(), context)
    weights = ad.relu(ad.row_dot(u, per_node))
    h = ad.const_matmul(batch.pool, ad.scale_rows(u, weights))
    return context, weights, h


def encode_batch(table: GraphTable, ids: Sequence[int], params: ModelParams, config: ModelConfig):
    batch = table.batch(ids)
    u = _node_embeddings(batch, params, len(config.sage_dims))
    context, weights, h = _attention_pool(u, batch, params)
    return batch, u, context, weights, h


def encode_graph(g: LabeledCfg, vocab: LabelVocabulary, params: ModelParams, config: ModelConfig) -> GraphEncoding:
    table = GraphTable([g], vocab)
    _, u, c, a, h = encode_batch(table, [0], params, config)
    return GraphEncoding(u.data.copy(), c.data[0].copy(), a.data[:, 0].copy(), h.data[0].copy())


def _ntn(h1: Tensor, h2: Tensor, params: ModelParams, slices: int) -> Tensor:
    bil = ad.bilinear(h1, params["ntn_w"], h2, slices)
    lin = ad.matmul(ad.concat_cols([h1, h2]), ad.transpose(params["ntn_v"]))
    return ad.relu(ad.add_row(ad.add(bil, lin), params["ntn_b"]))


def _ntn_pairs(h: Tensor, left: np.ndarray, right: np.ndarray, params: ModelParams, slices: int) -> Tensor:
    # _ntn on gathered rows, with every per-graph product computed once
    f = h.shape[1]
    v = params["ntn_v"]
    bil = ad.pair_bilinear(h, params["ntn_w"], h, left, right, slices)
    lin_l = ad.matmul(h, ad.transpose(ad.slice_cols(v, 0, f)))
    lin_r = ad.matmul(h, ad.transpose(ad.slice_cols(v, f, 2 * f)))
    lin = ad.add(ad.gather_rows(lin_l, left), ad.gather_rows(lin_r, right))
    return ad.relu(ad.add_row(ad.add(bil, lin), params["ntn_b"]))


def ntn_compare(h_i, h_j, params: ModelParams) -> np.ndarray:
    slices = params["ntn_b"].shape[1]
    out = _ntn(Tensor(np.asarray(h_i)), Tensor(np.asarray(h_j)), params, slices)
    return out.data[0].copy()


def _similarity_bins(z: np.ndarray, bins: int) -> np.ndarray:
    """Bin index of sigmoid(z) for every entry; ``z`` is scratch and gets overwritten."""
    # sigmoid(z) = (1 + tanh(z / 2)) / 2, which cannot overflow; in-place ops avoid large temporaries
    np.multiply(z, 0.5, out=z)
    np.tanh(z, out=z)
    z += 1.0
    z *= 0.5 * bins
    out = z.astype(np.int64)
    np.minimum(out, bins - 1, out=out)
    return out


def node_similarity_histogram(u_i: np.ndarray, u_j: np.ndarray, bins: int) -> np.ndarray:
    """Normalized histogram of sigmoid(<u, v>) over all node pairs, smaller graph zero-padded.

    Padded rows have zero embeddings, so each padded entry is sigmoid(0) = 0.5;
    they are counted directly instead of being materialized.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    u_i = np.asarray(u_i, dtype=np.float64)
    u_j = np.asarray(u_j, dtype=np.float64)
    n = max(u_i.shape[0], u_j.shape[0])
    z = u_i @ u_j.T
    counts = np.bincount(_similarity_bins(z, bins).ravel(), minlength=bins).astype(np.float64)
    counts[min(int(0.5 * bins), bins - 1)] += n * n - z.size
    return counts / (n * n)


def _pair_histograms(u: np.ndarray, offsets: np.ndarray, left: np.ndarray, right: np.ndarray, bins: int) -> np.ndarray:
    """Histogram for every (left[r], right[r]) graph pair; one matmul per distinct left graph."""
    counts = np.empty((len(left), bins))
    sizes = np.diff(offsets)
    count = len(sizes)
    owner = np.repeat(np.arange(count), sizes)
    order = np.argsort(left, kind="stable")
    starts = np.flatnonzero(np.r_[True, left[order][1:] != left[order][:-1]])
    for a, b in zip(starts, np.r_[starts[1:], len(order)]):
        rows = order[a:b]
        i = left[rows[0]]
        js = right[rows]
        wanted = np.zeros(count, dtype=bool)
        wanted[js] = True
        cols = np.flatnonzero(wanted[owner])
        code = _similarity_bins(u[offsets[i]:offsets[i + 1]] @ u[cols].T, bins)
        code += owner[cols] * bins
        counts[rows] = np.bincount(code.ravel(), minlength=count * bins).reshape(count, bins)[js]
    n = np.maximum(sizes[left], sizes[right])
    counts[:, min(int(0.5 * bins), bins - 1)] += n * n - sizes[left] * sizes[right]
    return counts / (n * n)[:, None]


def _head(z: Tensor, params: ModelParams, layers: int) -> Tensor:
    for i in range(layers):
        z = ad.add_row(ad.matmul(z, params[f"fc_w{i}"]), params[f"fc_b{i}"])
        z = ad.relu(z) if i < layers - 1 else ad.sigmoid(z)
    return z


def forward_pairs(
    table: GraphTable,
    pairs: np.ndarray,
    params: ModelParams,
    config: ModelConfig,
    histograms: np.ndarray | None = None,
) -> Tensor:
    """Predicted similarity for each row (i, j) of ``pairs`` (indices into ``table``), shape (B, 1).

    Each distinct graph is encoded once. The histogram features are computed
    off-tape behind a stop-gradient; ``histograms`` overrides them when given.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    ids, inverse = np.unique(pairs.ravel(), return_inverse=True)
    inverse = inverse.reshape(-1, 2)
    batch, u, _, _, h = encode_batch(table, ids, params, config)
    ntn = _ntn_pairs(h, inverse[:, 0], inverse[:, 1], params, config.ntn_slices)
    if histograms is None:
        frozen = ad.stop_gradient(u)
        histograms = _pair_histograms(frozen.data, batch.offsets, inverse[:, 0], inverse[:, 1], config.histogram_bins)
    z = ad.concat_cols([ntn, Tensor(histograms)])
    return _head(z, params, len(config.fc_dims))


def pair_histograms(table: GraphTable, pairs: np.ndarray, params: ModelParams, config: ModelConfig) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    ids, inverse = np.unique(pairs.ravel(), return_inverse=True)
    inverse = inverse.reshape(-1, 2)
    batch, u, _, _, _ = encode_batch(table, ids, params, config)
    return _pair_histograms(u.data, batch.offsets, inverse[:, 0], inverse[:, 1], config.histogram_bins)


def predict_pairs(
    table: GraphTable, pairs: np.ndarray, params: ModelParams, config: ModelConfig, chunk: int = 4096
) -> np.ndarray:
    """Inference without a tape, chunked over pairs."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.empty(len(pairs))
    for start in range(0, len(pairs), chunk):
        part = pairs[start:start + chunk]
        out[start:start + len(part)] = forward_pairs(table, part, params, config).data[:, 0]
    return out


def forward(
    g1: LabeledCfg, g2: LabeledCfg, vocab: LabelVocabulary, params: ModelParams, config: ModelConfig
) -> float:
    table = GraphTable([g1, g2], vocab)
    return float(forward_pairs(table, np.array([[0, 1]]), params, config).data[0, 0])


# --- checkpoints -------------------------------------------------------------


def save_checkpoint(path: str | Path, config: ModelConfig, vocab: LabelVocabulary, params: ModelParams) -> None:
    obj = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config.to_json(),
        "vocabulary": list(vocab.labels),
        "params": {
            name: {"shape": list(t.shape), "data": t.data.ravel().tolist()} for name, t in params.items()
        },
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ModelConfig, LabelVocabulary, ModelParams]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint: {exc}") from None
    if not isinstance(obj, dict) or obj.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a funcGNN checkpoint")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {obj.get('version')} != supported {CHECKPOINT_VERSION}")
    try:
        config = ModelConfig(**obj["config"])
        vocab = LabelVocabulary(tuple(obj["vocabulary"]))
        tensors = {
            name: Tensor(np.array(p["data"], dtype=np.float64).reshape(p["shape"]), requires_grad=True)
            for name, p in obj["params"].items()
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint: {exc}") from None
    if vocab.size != config.vocab_size:
        raise CheckpointError(f"{path}: vocabulary size {vocab.size} != config vocab_size {config.vocab_size}")
    expected = init_params(config)
    for name, t in expected.items():
        if name not in tensors or tensors[name].shape != t.shape:
            raise CheckpointError(f"{path}: parameter {name} missing or mis-shaped")
    return config, vocab, ModelParams(tensors)
