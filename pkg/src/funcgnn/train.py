"""Training loop, dataset split, and the method-comparison harness."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .ged import DEFAULT_BUDGET, DEFAULT_EXACT_LIMIT, METHODS, UNIT_COSTS, EditCostModel, GedBudgetExhausted
from .graph_core import GraphPairRecord, LabeledCfg, LabelVocabulary, build_vocabulary, normalized_similarity
from .model import (
    GraphTable,
    ModelConfig,
    ModelParams,
    forward,
    forward_pairs,
    init_params,
    predict_pairs,
    save_checkpoint,
)

log = logging.getLogger(__name__)

CLASSICAL = ("exact", "lsap", "hed")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # adam | sgd
    split_ratio: float = 0.8
    seed: int = 0
    patience: int = 20  # epochs without test-MSE improvement before stopping; 0 disables
    checkpoint_path: str | None = None

    def __post_init__(self) -> None:
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must be in (0, 1)")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def split_dataset(records: Sequence, ratio: float = 0.8, seed: int = 0) -> tuple[list, list]:
    if not records:
        raise ValueError("cannot split an empty dataset")
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(records))
    cut = int(math.floor(ratio * len(records)))
    return [records[i] for i in order[:cut]], [records[i] for i in order[cut:]]


def mse(preds: Sequence[float], targets: Sequence[float]) -> float:
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("mse of an empty set")
    return float(np.mean((p - t) ** 2))


class Adam:
    def __init__(self, params: ModelParams, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for k, p in self.params.items():
            g = p.grad
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            p.data -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


class SGD:
    def __init__(self, params: ModelParams, lr: float = 1e-2):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        for _, p in self.params.items():
            p.data -= self.lr * p.grad


class PairSet:
    """Records flattened into a graph table plus an (n, 2) index array and targets."""

    def __init__(self, records: Sequence[GraphPairRecord], vocab: LabelVocabulary, graphs: dict | None = None):
        self.records = list(records)
        index: dict[LabeledCfg, int] = {} if graphs is None else graphs
        # records usually share graph objects, so dedupe by identity before structural hashing
        by_id: dict[int, int] = {}
        objs = [g for r in self.records for g in (r.graph_1, r.graph_2)]
        for g in objs:
            if id(g) not in by_id:
                by_id[id(g)] = index.setdefault(g, len(index))
        pairs = [by_id[id(g)] for g in objs]
        self.graph_index = index
        self.table = GraphTable(list(index), vocab)
        self.pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        self.targets = np.array([r.similarity for r in self.records], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class TrainResult:
    config: ModelConfig
    vocab: LabelVocabulary
    params: ModelParams
    curves: list[tuple[int, float, float]]  # (epoch, train_mse, test_mse); epoch 0 is before training
    best_epoch: int
    elapsed: float

    def write_curves(self, path: str | Path) -> None:
        write_loss_csv(self.curves, path)


def write_loss_csv(curves, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_mse", "test_mse"])
        for epoch, tr, te in curves:
            w.writerow([epoch, repr(tr), repr(te)])


def train(
    train_set: Sequence[GraphPairRecord],
    test_set: Sequence[GraphPairRecord],
    model_config: ModelConfig | None = None,
    train_config: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Mini-batch MSE training; returns the parameters with the best test MSE.

    The vocabulary comes from training graphs only. Test targets are never
    used for gradients, only to record the per-epoch curve and pick the
    best epoch / stop early.
    """
    if not train_set:
        raise ValueError("empty training set")
    t0 = time.perf_counter()
    vocab = build_vocabulary(g for r in train_set for g in (r.graph_1, r.graph_2))
    if model_config is None:
        model_config = ModelConfig(vocab.size, seed=train_config.seed)
    else:
        model_config = replace(model_config, vocab_size=vocab.size)
    params = init_params(model_config)
    tr = PairSet(train_set, vocab)
    te = PairSet(test_set, vocab) if test_set else None
    opt = Adam(params, train_config.learning_rate) if train_config.optimizer == "adam" else SGD(params, train_config.learning_rate)
    rng = np.random.default_rng(train_config.seed)

    def evaluate(p: ModelParams) -> tuple[float, float]:
        a = mse(predict_pairs(tr.table, tr.pairs, p, model_config), tr.targets)
        b = mse(predict_pairs(te.table, te.pairs, p, model_config), te.targets) if te else float("nan")
        return a, b

    train_mse, test_mse = evaluate(params)
    curves = [(0, train_mse, test_mse)]
    best = (test_mse if te else train_mse, 0, params.copy())
    if train_config.checkpoint_path:
        save_checkpoint(train_config.checkpoint_path, model_config, vocab, params)
    stale = 0
    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(len(tr))
        for b, start in enumerate(range(0, len(order), train_config.batch_size)):
            sel = order[start:start + train_config.batch_size]
            params.zero_grad()
            try:
                with ad.Tape():
                    pred = forward_pairs(tr.table, tr.pairs[sel], params, model_config)
                    loss = ad.mse(pred, tr.targets[sel])
            except ad.NonFiniteError as exc:
                raise TrainingError(f"non-finite value at epoch {epoch}, batch {b}, pairs {tr.pairs[sel].tolist()}: {exc}") from exc
            if not math.isfinite(loss.item()):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            ad.backward(loss)
            opt.step()
        train_mse, test_mse = evaluate(params)
        curves.append((epoch, train_mse, test_mse))
        log.info("epoch %d train %.6f test %.6f", epoch, train_mse, test_mse)
        score = test_mse if te else train_mse
        if score < best[0]:
            best = (score, epoch, params.copy())
            stale = 0
            if train_config.checkpoint_path:
                save_checkpoint(train_config.checkpoint_path, model_config, vocab, params)
        else:
            stale += 1
            if train_config.patience and stale >= train_config.patience:
                break
    return TrainResult(model_config, vocab, best[2], curves, best[1], time.perf_counter() - t0)


# --- evaluation -----------------------------------------------------------------


@dataclass
class MethodRow:
    name: str
    mse: float
    wall_time: float
    parallelism: int
    pairs: int
    excluded: int = 0


@dataclass
class EvalReport:
    rows: list[MethodRow]
    predictions: dict[str, list[float | None]]
    targets: list[float]
    curves: list[tuple[int, float, float]] = field(default_factory=list)

    def row(self, name: str) -> MethodRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_json(self, include_timing: bool = True) -> dict:
        rows = []
        for r in self.rows:
            d = asdict(r)
            if not include_timing:
                d.pop("wall_time")
            rows.append(d)
        return {
            "rows": rows,
            "targets": self.targets,
            "predictions": self.predictions,
            "curves": [list(c) for c in self.curves],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1), encoding="utf-8")

    def table(self) -> str:
        header = ("Method", "MSE (1e-3)", "Time (s)", "#Parallel", "Pairs", "Excluded")
        lines = [header]
        for r in self.rows:
            lines.append((r.name, f"{r.mse * 1e3:.2f}", f"{r.wall_time:.3f}", str(r.parallelism), str(r.pairs), str(r.excluded)))
        widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
        out = []
        for k, line in enumerate(lines):
            out.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(line, widths))))
            if k == 0:
                out.append("  ".join("-" * w for w in widths))
        return "\n".join(out)


def _classical_chunk(args):
    method, pairs, costs, limit, budget = args
    fn = METHODS[method]
    out = []
    for g1, g2 in pairs:
        if method == "exact":
            if max(len(g1), len(g2)) > limit:
                out.append(None)
                continue
            try:
                d = fn(g1, g2, costs, budget).distance
            except GedBudgetExhausted:
                out.append(None)
                continue
        else:
            d = fn(g1, g2, costs).distance
        out.append(normalized_similarity(d, len(g1), len(g2)))
    return out


def classical_similarities(
    method: str,
    records: Sequence[GraphPairRecord],
    costs: EditCostModel = UNIT_COSTS,
    workers: int = 1,
    exact_node_limit: int = DEFAULT_EXACT_LIMIT,
    budget: int = DEFAULT_BUDGET,
) -> list[float | None]:
    pairs = [(r.graph_1, r.graph_2) for r in records]
    if workers <= 1:
        return _classical_chunk((method, pairs, costs, exact_node_limit, budget))
    n_chunks = workers * 4
    chunks = [pairs[k::n_chunks] for k in range(n_chunks)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_classical_chunk, [(method, c, costs, exact_node_limit, budget) for c in chunks]))
    out: list[float | None] = [None] * len(pairs)
    for k, part in enumerate(parts):
        out[k::n_chunks] = part
    return out


def funcgnn_similarities(
    records: Sequence[GraphPairRecord], config: ModelConfig, vocab: LabelVocabulary, params: ModelParams
) -> np.ndarray:
    ps = PairSet(records, vocab)
    return predict_pairs(ps.table, ps.pairs, params, config)


def evaluate_methods(
    test_set: Sequence[GraphPairRecord],
    model: tuple[ModelConfig, LabelVocabulary, ModelParams] | None = None,
    methods: Sequence[str] = ("funcgnn", "lsap", "hed"),
    workers: int = 1,
    costs: EditCostModel = UNIT_COSTS,
    exact_node_limit: int = DEFAULT_EXACT_LIMIT,
    budget: int = DEFAULT_BUDGET,
) -> EvalReport:
    """Score every method against the ground-truth similarities, timing each full pass.

    ``exact`` skips pairs larger than ``exact_node_limit`` and pairs whose
    budget runs out; those count as excluded and are left out of its MSE.
    funcGNN always runs serially.
    """
    if not test_set:
        raise ValueError("empty evaluation set")
    targets = np.array([r.similarity for r in test_set])
    rows, preds = [], {}
    for method in methods:
        t0 = time.perf_counter()
        if method == "funcgnn":
            if model is None:
                raise ValueError("funcgnn evaluation needs a trained model")
            sims = funcgnn_similarities(test_set, *model).tolist()
            par = 1
        elif method in CLASSICAL:
            sims = classical_similarities(method, test_set, costs, workers, exact_node_limit, budget)
            par = workers
        else:
            raise ValueError(f"unknown method {method!r}")
        elapsed = time.perf_counter() - t0
        keep = [i for i, s in enumerate(sims) if s is not None]
        err = mse([sims[i] for i in keep], targets[keep]) if keep else float("nan")
        rows.append(MethodRow(method, err, elapsed, par, len(keep), len(sims) - len(keep)))
        preds[method] = sims
    return EvalReport(rows, preds, targets.tolist())


@dataclass(frozen=True)
class CaseStudy:
    name_1: str | None
    name_2: str | None
    ground_truth: float
    prediction: float
    error: float


def case_study(record: GraphPairRecord, model: tuple[ModelConfig, LabelVocabulary, ModelParams]) -> CaseStudy:
    config, vocab, params = model
    pred = forward(record.graph_1, record.graph_2, vocab, params, config)
    return CaseStudy(record.graph_1.name, record.graph_2.name, record.similarity, pred, abs(pred - record.similarity))
