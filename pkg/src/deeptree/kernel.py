"""Dense float64 linear algebra and activation primitives.

All randomness in the package flows through numpy's PCG64 bit generator,
so a fixed seed reproduces the same stream everywhere.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
from scipy.special import expit, logsumexp

Array = np.ndarray


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator (PCG64) for the given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def affine(W: Array, x: Array, U: Array, h: Array, b: Array) -> Array:
    """Compute ``W @ x + U @ h + b``, validating shapes first."""
    if W.ndim != 2 or U.ndim != 2:
        raise ValueError("W and U must be matrices")
    if W.shape[1] != x.shape[0]:
        raise ValueError(f"W has {W.shape[1]} columns but x has dimension {x.shape[0]}")
    if U.shape[1] != h.shape[0]:
        raise ValueError(f"U has {U.shape[1]} columns but h has dimension {h.shape[0]}")
    if not (W.shape[0] == U.shape[0] == b.shape[0]):
        raise ValueError(f"row counts differ: W {W.shape[0]}, U {U.shape[0]}, b {b.shape[0]}")
    return W @ x + U @ h + b


def sigmoid(v: Array) -> Array:
    return expit(v)


def dsigmoid_from_output(y: Array) -> Array:
    """Sigmoid derivative expressed through the sigmoid output."""
    return y * (1.0 - y)


def tanh(v: Array) -> Array:
    return np.tanh(v)


def dtanh_from_output(y: Array) -> Array:
    return 1.0 - y * y


def softmax(v: Array) -> Array:
    """Stable softmax (max-subtracted)."""
    shifted = v - np.max(v)
    e = np.exp(shifted)
    return e / e.sum()


def log_softmax(v: Array) -> Array:
    """Fused log(softmax(v)); stays finite for inputs up to ~1e3 in magnitude."""
    return v - logsumexp(v)


def glorot_init(rows: int, cols: int, rng: np.random.Generator) -> Array:
    """Uniform matrix in +-sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be positive")
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def finite_diff_grad(f: Callable[[Array], float], p: Array, step: float = 1e-5) -> Array:
    """Central-difference gradient of a scalar function, coordinate by coordinate.

    ``f`` is re-evaluated at ``p +- step * e_i`` for every coordinate, so this
    is strictly an oracle for small problems, not a training tool.
    """
    p = np.array(p, dtype=np.float64)
    grad = np.empty_like(p)
    flat = p.ravel()
    out = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f(p)
        flat[i] = orig - step
        lo = f(p)
        flat[i] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"function value not finite near coordinate {i}")
        out[i] = (hi - lo) / (2.0 * step)
    return grad
