"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

The tape is rebuilt per forward pass (define-by-run). Ops append a record in
execution order, which is already a topological order, so the backward pass is
a single reverse sweep that visits each record exactly once. Passing
``tape=None`` runs the forward computation without recording (eval mode).
"""
from __future__ import annotations

import numpy as np
from scipy import sparse as sp

from .rng import SeededRng


class ShapeError(ValueError):
    pass


class Tensor:
    """Immutable-by-convention dense array of float64 values."""

    __slots__ = ("data", "grad", "name")

    def __init__(self, data, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape})"


class Tape:
    """Ordered record of executed ops, each with a backward rule."""

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __len__(self) -> int:
        return len(self._records)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward) -> None:
        self._records.append((out, inputs, backward))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(input) into ``.grad`` of every recorded tensor."""
        if loss.size != 1:
            raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
        for out, inputs, _ in self._records:
            out.grad = None
            for t in inputs:
                t.grad = None
        loss.grad = np.ones_like(loss.data)
        for out, inputs, backward in reversed(self._records):
            if out.grad is None:
                continue  # op output never reached the loss
            grads = backward(out.grad)
            for t, g in zip(inputs, grads):
                if g is None:
                    continue
                t.grad = g if t.grad is None else t.grad + g


def _record(tape, out, inputs, backward):
    if tape is not None:
        tape.record(out, inputs, backward)
    return out


def matmul(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes incompatible: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)

    def backward(gout):
        return (gout @ b.data.T, a.data.T @ gout)

    return _record(tape, out, (a, b), backward)


def add(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    if a.shape == b.shape:
        out = Tensor(a.data + b.data)

        def backward(gout):
            return (gout, gout)

    elif a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        # row-wise bias add
        out = Tensor(a.data + b.data[None, :])

        def backward(gout):
            return (gout, gout.sum(axis=0))

    else:
        raise ShapeError(f"add shapes incompatible: {a.shape} + {b.shape}")
    return _record(tape, out, (a, b), backward)


def scale(a: Tensor, s: float, tape: Tape | None = None) -> Tensor:
    s = float(s)
    out = Tensor(a.data * s)

    def backward(gout):
        return (gout * s,)

    return _record(tape, out, (a,), backward)


def mul(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul shapes incompatible: {a.shape} * {b.shape}")
    out = Tensor(a.data * b.data)

    def backward(gout):
        return (gout * b.data, gout * a.data)

    return _record(tape, out, (a, b), backward)


def relu(a: Tensor, tape: Tape | None = None) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))
    mask = a.data > 0.0

    def backward(gout):
        return (gout * mask,)

    return _record(tape, out, (a,), backward)


def tanh(a: Tensor, tape: Tape | None = None) -> Tensor:
    out = Tensor(np.tanh(a.data))

    def backward(gout):
        return (gout * (1.0 - out.data * out.data),)

    return _record(tape, out, (a,), backward)


def dropout(a: Tensor, p: float, rng: SeededRng, training: bool,
            tape: Tape | None = None) -> Tensor:
    """Inverted dropout: zero entries with prob p and scale survivors by 1/(1-p).

    Eval mode is the identity and draws nothing from ``rng``.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    keep = rng.random(a.shape) >= p
    factor = keep / (1.0 - p)
    out = Tensor(a.data * factor)

    def backward(gout):
        return (gout * factor,)

    return _record(tape, out, (a,), backward)


def log_softmax(a: Tensor, tape: Tape | None = None) -> Tensor:
    """Row-wise log-softmax of a 2-D tensor, computed stably."""
    if a.data.ndim != 2:
        raise ShapeError(f"log_softmax expects a 2-D tensor, got shape {a.shape}")
    z = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = Tensor(z - lse)

    def backward(gout):
        softmax = np.exp(out.data)
        return (gout - softmax * gout.sum(axis=1, keepdims=True),)

    return _record(tape, out, (a,), backward)


def nll_loss(logp: Tensor, classes: np.ndarray, tape: Tape | None = None,
             rows: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood of integer class ids under row log-probs.

    ``rows`` restricts the mean to a subset of rows (classes then align with
    that subset); by default every row contributes.
    """
    classes = np.asarray(classes)
    rows = np.arange(logp.shape[0]) if rows is None else np.asarray(rows)
    if logp.data.ndim != 2 or classes.ndim != 1 or classes.shape[0] != rows.shape[0]:
        raise ShapeError(f"nll_loss shapes incompatible: {logp.shape} vs {classes.shape}")
    if classes.min() < 0 or classes.max() >= logp.shape[1]:
        raise ValueError(f"class id out of range [0, {logp.shape[1]})")
    n = rows.shape[0]
    out = Tensor(-logp.data[rows, classes].mean())

    def backward(gout):
        g = np.zeros_like(logp.data)
        g[rows, classes] = -1.0 / n
        return (g * gout,)

    return _record(tape, out, (logp,), backward)


def mse(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mse shapes incompatible: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    out = Tensor(np.mean(diff * diff))
    n = a.size

    def backward(gout):
        g = (2.0 / n) * diff * gout
        return (g, -g)

    return _record(tape, out, (a, b), backward)


def concat_cols(tensors: list[Tensor], tape: Tape | None = None) -> Tensor:
    """Concatenate 2-D tensors along columns (per-row feature concat)."""
    if not tensors:
        raise ShapeError("concat_cols requires at least one tensor")
    rows = tensors[0].shape[0]
    for t in tensors:
        if t.data.ndim != 2 or t.shape[0] != rows:
            raise ShapeError(
                f"concat_cols row mismatch: {[t.shape for t in tensors]}")
    out = Tensor(np.hstack([t.data for t in tensors]))
    widths = [t.shape[1] for t in tensors]
    edges = np.cumsum([0] + widths)

    def backward(gout):
        return tuple(gout[:, edges[i]:edges[i + 1]] for i in range(len(widths)))

    return _record(tape, out, tuple(tensors), backward)


def spmm(matrix: sp.csr_matrix, a: Tensor, tape: Tape | None = None) -> Tensor:
    """Constant sparse matrix times dense tensor; gradient flows to the tensor."""
    if a.data.ndim != 2 or matrix.shape[1] != a.shape[0]:
        raise ShapeError(f"spmm shapes incompatible: {matrix.shape} @ {a.shape}")
    out = Tensor(matrix @ a.data)
    mt = matrix.T.tocsr()

    def backward(gout):
        return (mt @ gout,)

    return _record(tape, out, (a,), backward)


def scale_rows(a: Tensor, coeffs: np.ndarray, tape: Tape | None = None) -> Tensor:
    """Multiply row i of a 2-D tensor by the constant scalar coeffs[i]."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if a.data.ndim != 2 or coeffs.ndim != 1 or coeffs.shape[0] != a.shape[0]:
        raise ShapeError(f"scale_rows shapes incompatible: {a.shape} rows vs {coeffs.shape}")
    col = coeffs[:, None]
    out = Tensor(a.data * col)

    def backward(gout):
        return (gout * col,)

    return _record(tape, out, (a,), backward)


def tsum(a: Tensor, tape: Tape | None = None) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    out = Tensor(a.data.sum())

    def backward(gout):
        return (np.full_like(a.data, float(gout)),)

    return _record(tape, out, (a,), backward)


def mean_all(a: Tensor, tape: Tape | None = None) -> Tensor:
    return scale(tsum(a, tape), 1.0 / a.size, tape)
