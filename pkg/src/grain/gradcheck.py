"""Finite-difference validation of every registered backward rule."""
from __future__ import annotations

import numpy as np

from .rng import SeededRng
from .tensor import (Tape, Tensor, ShapeError, add, concat_cols, dropout,
                     log_softmax, matmul, mse, mul, nll_loss, relu, scale,
                     scale_rows, spmm, tanh, tsum)
from scipy import sparse as sp


def grad_check(f, x: Tensor, eps: float) -> float:
    """Max relative error between tape gradients and central differences.

    ``f(tensor, tape)`` must return a scalar tensor. The relative error at each
    coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    tape = Tape()
    y = f(x, tape)
    if y.size != 1:
        raise ShapeError(f"grad_check requires a scalar-valued function, got shape {y.shape}")
    tape.backward(y)
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)

    worst = 0.0
    flat = x.data.reshape(-1)
    an_flat = analytic.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x, None).item()
        flat[i] = orig - eps
        lo = f(x, None).item()
        flat[i] = orig
        numeric = (hi - lo) / (2.0 * eps)
        err = abs(an_flat[i] - numeric) / max(1.0, abs(an_flat[i]), abs(numeric))
        worst = max(worst, err)
    return worst


def _scalarize(out: Tensor, probe: Tensor, tape) -> Tensor:
    return tsum(mul(out, probe, tape), tape)


def _away_from_zero(rng: SeededRng, shape, margin=0.1):
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return sign * rng.uniform(margin, 1.0, shape)


def _case_matmul(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    b = Tensor(rng.normal(size=(4, 2)))
    probe = Tensor(rng.normal(size=(3, 2)))
    return lambda t, tape: _scalarize(matmul(t, b, tape), probe, tape), x


def _case_add(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    b = Tensor(rng.normal(size=(3, 4)))
    probe = Tensor(rng.normal(size=(3, 4)))
    return lambda t, tape: _scalarize(add(t, b, tape), probe, tape), x


def _case_add_bias(rng):
    a = Tensor(rng.normal(size=(3, 4)))
    probe = Tensor(rng.normal(size=(3, 4)))
    x = Tensor(rng.normal(size=(4,)))
    return lambda t, tape: _scalarize(add(a, t, tape), probe, tape), x


def _case_scale(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    probe = Tensor(rng.normal(size=(3, 4)))
    s = float(rng.uniform(-2.0, 2.0))
    return lambda t, tape: _scalarize(scale(t, s, tape), probe, tape), x


def _case_mul(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    b = Tensor(rng.normal(size=(3, 4)))
    probe = Tensor(rng.normal(size=(3, 4)))
    return lambda t, tape: _scalarize(mul(t, b, tape), probe, tape), x


def _case_relu(rng):
    # keep entries away from the kink so central differences stay valid
    x = Tensor(_away_from_zero(rng, (3, 4)))
    probe = Tensor(rng.normal(size=(3, 4)))
    return lambda t, tape: _scalarize(relu(t, tape), probe, tape), x


def _case_tanh(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    probe = Tensor(rng.normal(size=(3, 4)))
    return lambda t, tape: _scalarize(tanh(t, tape), probe, tape), x


def _case_dropout(rng):
    x = Tensor(rng.normal(size=(4, 5)))
    probe = Tensor(rng.normal(size=(4, 5)))
    mask_seed = int(rng.integers(0, 2**31))

    def f(t, tape):
        # fresh rng per call freezes the mask, making f deterministic
        return _scalarize(dropout(t, 0.4, SeededRng(mask_seed), True, tape), probe, tape)

    return f, x


def _case_log_softmax(rng):
    x = Tensor(rng.normal(size=(3, 5)))
    probe = Tensor(rng.normal(size=(3, 5)))
    return lambda t, tape: _scalarize(log_softmax(t, tape), probe, tape), x


def _case_log_softmax_saturated(rng):
    data = rng.normal(size=(3, 5))
    data[np.arange(3), rng.integers(0, 5, 3)] += 20.0
    x = Tensor(data)
    probe = Tensor(rng.normal(size=(3, 5)))
    return lambda t, tape: _scalarize(log_softmax(t, tape), probe, tape), x


def _case_nll_loss(rng):
    x = Tensor(rng.normal(size=(4, 3)))
    classes = rng.integers(0, 3, 4)
    return lambda t, tape: nll_loss(log_softmax(t, tape), classes, tape), x


def _case_mse(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    target = Tensor(rng.normal(size=(3, 4)))
    return lambda t, tape: mse(t, target, tape), x


def _case_concat(rng):
    x = Tensor(rng.normal(size=(3, 2)))
    other = Tensor(rng.normal(size=(3, 3)))
    probe = Tensor(rng.normal(size=(3, 5)))
    return lambda t, tape: _scalarize(concat_cols([t, other], tape), probe, tape), x


def _case_spmm(rng):
    n = 5
    dense = (rng.random((n, n)) < 0.4) * rng.normal(size=(n, n))
    matrix = sp.csr_matrix(dense)
    x = Tensor(rng.normal(size=(n, 3)))
    probe = Tensor(rng.normal(size=(n, 3)))
    return lambda t, tape: _scalarize(spmm(matrix, t, tape), probe, tape), x


def _case_scale_rows(rng):
    x = Tensor(rng.normal(size=(4, 3)))
    coeffs = rng.normal(size=4)
    probe = Tensor(rng.normal(size=(4, 3)))
    return lambda t, tape: _scalarize(scale_rows(t, coeffs, tape), probe, tape), x


def _case_tsum(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    return lambda t, tape: tsum(t, tape), x


OP_CASES = {
    "matmul": _case_matmul,
    "add": _case_add,
    "add_bias": _case_add_bias,
    "scale": _case_scale,
    "mul": _case_mul,
    "relu": _case_relu,
    "tanh": _case_tanh,
    "dropout": _case_dropout,
    "log_softmax": _case_log_softmax,
    "log_softmax_saturated": _case_log_softmax_saturated,
    "nll_loss": _case_nll_loss,
    "mse": _case_mse,
    "concat_cols": _case_concat,
    "spmm": _case_spmm,
    "scale_rows": _case_scale_rows,
    "tsum": _case_tsum,
}

# saturated log-softmax tolerates 1e-3; everything else must meet 1e-4
TOLERANCES = {name: 1e-3 if name == "log_softmax_saturated" else 1e-4
              for name in OP_CASES}


def run_suite(instances: int = 50, seed: int = 0, eps: float = 1e-5) -> dict[str, float]:
    """Gradient-check every op on random instances; returns max error per op."""
    results = {}
    for name, case in OP_CASES.items():
        rng = SeededRng(seed).fork(name)
        worst = 0.0
        for _ in range(instances):
            f, x = case(rng)
            worst = max(worst, grad_check(f, x, eps))
        results[name] = worst
    return results
