"""A small reverse-mode autodiff engine over dense float64 matrices.

Operations run eagerly on numpy arrays. While a :class:`Tape` is active,
every op that touches a tracked tensor appends a node holding its inputs and
a backward rule; :func:`backward` replays the tape in reverse. Outside a tape
the same functions are plain numeric code, which is what inference uses.
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

_ACTIVE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("active_tape", default=None)


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"Tensor: expected at most 2 dimensions, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def tracked(self) -> bool:
        return self.requires_grad or self._tape is not None

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor of shape {self.shape} is not a scalar")
        return float(self.data[0, 0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    op: str = ""


@dataclass
class Tape:
    nodes: list[_Node] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.reset(self._token)


def _result(name: str, data: np.ndarray, inputs: Sequence[Tensor], rule) -> Tensor:
    # a finite sum implies finite entries; only a non-finite sum needs the elementwise check
    if not np.isfinite(data.sum()) and not np.isfinite(data).all():
        raise NonFiniteError(f"{name}: produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = False
    out.grad = None
    out._tape = None
    tape = _ACTIVE.get()
    if tape is not None and any(t.tracked for t in inputs):
        out._tape = tape
        tape.nodes.append(_Node(out, tuple(inputs), rule, name))
    return out


def _need(name: str, cond: bool, *tensors) -> None:
    if not cond:
        shapes = " x ".join(str(getattr(t, "shape", None)) for t in tensors)
        raise ShapeError(f"{name}: incompatible shapes {shapes}")


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf with ``requires_grad``."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if loss.requires_grad:
        loss.grad += 1.0
        return
    if loss._tape is None:
        raise ValueError("backward: loss was not recorded on a tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in reversed(loss._tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.backward(g)):
            if gi is None:
                continue
            if inp.requires_grad:
                inp.grad += gi
            elif inp._tape is not None:
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi


# --- primitives -------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _need("matmul", a.shape[1] == b.shape[0], a, b)
    return _result("matmul", a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    _need("add", a.shape == b.shape, a, b)
    return _result("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _need("sub", a.shape == b.shape, a, b)
    return _result("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul_elem(a: Tensor, b: Tensor) -> Tensor:
    _need("mul_elem", a.shape == b.shape, a, b)
    return _result("mul_elem", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def transpose(a: Tensor) -> Tensor:
    return _result("transpose", a.data.T.copy(), (a,), lambda g: (g.T,))


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    _need("concat_rows", len({p.shape[1] for p in parts}) == 1, *parts)
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def rule(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _result("concat_rows", np.vstack([p.data for p in parts]), tuple(parts), rule)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    _need("concat_cols", len({p.shape[0] for p in parts}) == 1, *parts)
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def rule(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _result("concat_cols", np.hstack([p.data for p in parts]), tuple(parts), rule)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    _need("slice_cols", 0 <= start <= stop <= a.shape[1], a)

    def rule(g):
        out = np.zeros_like(a.data)
        out[:, start:stop] = g
        return (out,)

    return _result("slice_cols", a.data[:, start:stop].copy(), (a,), rule)


def mean_rows(a: Tensor) -> Tensor:
    """Column-wise mean over rows: (N, F) -> (1, F)."""
    n = a.shape[0]
    _need("mean_rows", n > 0, a)
    return _result("mean_rows", a.data.mean(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g / n, n, axis=0),))


def inner_product(a: Tensor, b: Tensor) -> Tensor:
    """Sum of elementwise products, as a (1, 1) tensor."""
    _need("inner_product", a.shape == b.shape, a, b)
    value = np.array([[np.sum(a.data * b.data)]])
    return _result("inner_product", value, (a, b), lambda g: (g[0, 0] * b.data, g[0, 0] * a.data))


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row inner products: (N, F), (N, F) -> (N, 1)."""
    _need("row_dot", a.shape == b.shape, a, b)
    value = np.einsum("ij,ij->i", a.data, b.data)[:, None]
    return _result("row_dot", value, (a, b), lambda g: (g * b.data, g * a.data))


def scale_rows(a: Tensor, s: Tensor) -> Tensor:
    """Multiply row i of ``a`` (N, F) by ``s[i]`` (N, 1)."""
    _need("scale_rows", s.shape == (a.shape[0], 1), a, s)
    return _result(
        "scale_rows",
        a.data * s.data,
        (a, s),
        lambda g: (g * s.data, np.einsum("ij,ij->i", g, a.data)[:, None]),
    )


def add_row(a: Tensor, row: Tensor) -> Tensor:
    """Add a (1, F) bias row to every row of ``a``."""
    _need("add_row", row.shape == (1, a.shape[1]), a, row)
    return _result("add_row", a.data + row.data, (a, row), lambda g: (g, g.sum(axis=0, keepdims=True)))


def relu(x: Tensor) -> Tensor:
    return _result("relu", np.maximum(x.data, 0.0), (x,), lambda g: (g * (x.data > 0),))


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so neither branch can overflow
    z = x.data
    ez = np.exp(-np.abs(z))
    y = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return _result("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def const_matmul(c, x: Tensor) -> Tensor:
    """Left-multiply by a constant (dense or sparse) matrix; no gradient flows into ``c``."""
    _need("const_matmul", c.shape[1] == x.shape[0], c, x)
    out = c @ x.data
    if sp.issparse(out):
        out = out.toarray()
    return _result("const_matmul", np.asarray(out), (x,), lambda g: (np.asarray(c.T @ g),))


def gather_rows(a: Tensor, index) -> Tensor:
    idx = np.asarray(index, dtype=np.int64)
    _need("gather_rows", idx.size == 0 or (idx.min() >= 0 and idx.max() < a.shape[0]), a)

    def rule(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _result("gather_rows", a.data[idx], (a,), rule)


def bilinear(x: Tensor, w: Tensor, y: Tensor, slices: int) -> Tensor:
    """Row-wise bilinear forms: out[b, s] = x[b] . W_s . y[b].

    ``w`` stores the ``slices`` (F, F) matrices side by side as an (F, F*slices) matrix.
    """
    f = x.shape[1]
    _need("bilinear", x.shape == y.shape and w.shape == (f, f * slices), x, w, y)
    t = (x.data @ w.data).reshape(x.shape[0], slices, f)
    out = (t @ y.data[:, :, None])[:, :, 0]

    def rule(g):
        dt = (g[:, :, None] * y.data[:, None, :]).reshape(x.shape[0], slices * f)
        return dt @ w.data.T, x.data.T @ dt, np.einsum("bs,bsf->bf", g, t)

    return _result("bilinear", out, (x, w, y), rule)


def pair_bilinear(x: Tensor, w: Tensor, y: Tensor, left, right, slices: int) -> Tensor:
    """Bilinear forms over indexed row pairs: out[p, s] = x[left[p]] . W_s . y[right[p]].

    Equal to ``bilinear(gather_rows(x, left), w, gather_rows(y, right))`` but
    multiplies each row of ``x`` by ``w`` once, however many pairs use it.
    """
    f = x.shape[1]
    li = np.asarray(left, dtype=np.int64)
    ri = np.asarray(right, dtype=np.int64)
    _need("pair_bilinear", y.shape[1] == f and w.shape == (f, f * slices) and li.shape == ri.shape, x, w, y)
    # all forms at once: m[i * slices + s, j] = x[i] . W_s . y[j]
    t = (x.data @ w.data).reshape(x.shape[0] * slices, f)
    m = t @ y.data.T
    flat = (li[:, None] * slices + np.arange(slices)[None, :])
    out = m[flat, ri[:, None]]

    def rule(g):
        dm = np.zeros_like(m)
        np.add.at(dm, (flat, np.broadcast_to(ri[:, None], flat.shape)), g)
        dt = (dm @ y.data).reshape(x.shape[0], slices * f)
        return dt @ w.data.T, x.data.T @ dt, dm.T @ t

    return _result("pair_bilinear", out, (x, w, y), rule)


def mse(pred: Tensor, target) -> Tensor:
    tgt = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    diff = pred.data - tgt
    n = diff.size
    _need("mse", n > 0, pred)
    value = np.array([[np.mean(diff * diff)]])
    return _result("mse", value, (pred,), lambda g: (g[0, 0] * 2.0 * diff / n,))


def total(a: Tensor) -> Tensor:
    return _result("total", np.array([[a.data.sum()]]), (a,), lambda g: (np.full_like(a.data, g[0, 0]),))


def stop_gradient(x: Tensor) -> Tensor:
    """Identity forward; the backward rule sends exactly zero gradient to ``x``."""
    return _result("stop_gradient", x.data.copy(), (x,), lambda g: (np.zeros_like(x.data),))
