"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tape` records primitive operations while active (used as a
context manager); :meth:`Tape.backward` replays the records in reverse and
accumulates exact analytic gradients.  Outside any tape the same ops run as
plain numpy computations, which keeps evaluation paths identical between
training and the equivalence checks.

A tape is single-owner while recording; tapes for disjoint computations may
be evaluated concurrently, and parameter tensors may be read concurrently
between optimiser steps.  All math is double precision.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError, ShapeError

_ACTIVE_TAPE: "Tape | None" = None


class Tensor:
    """A dense array plus optional gradient bookkeeping.

    ``grad`` is populated by :meth:`Tape.backward` for tensors created with
    ``requires_grad=True`` (parameters).
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def param(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def const(data) -> Tensor:
    return Tensor(data, requires_grad=False)


class Tape:
    """Ordered record of primitive ops; records are topologically sorted by
    construction, so backward visits each node exactly once."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a tape is already recording")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc) -> None:
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None

    def _record(self, out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> None:
        self.nodes.append((out, inputs, backward_fn))

    def backward(self, loss: Tensor, params: list[Tensor] | None = None) -> dict[int, np.ndarray]:
        """Accumulate d(loss)/d(tensor) for every recorded tensor.

        Sets ``p.grad`` on every tensor in ``params`` (zeros if the loss
        does not depend on it) and returns the full ``id(tensor) -> grad``
        map.  The walk is sequential and deterministic.
        """
        if loss.data.shape != ():
            raise ShapeError(f"loss must be scalar, got shape {loss.data.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        for out, inputs, backward_fn in reversed(self.nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for t, gi in zip(inputs, backward_fn(g)):
                if gi is None:
                    continue
                acc = grads.get(id(t))
                grads[id(t)] = gi if acc is None else acc + gi
        if params is not None:
            for p in params:
                g = grads.get(id(p))
                p.grad = np.zeros_like(p.data) if g is None else np.reshape(g, p.data.shape)
        return grads


def _wants_grad(*tensors: Tensor) -> bool:
    return _ACTIVE_TAPE is not None and any(t.requires_grad for t in tensors)


def _emit(out_data, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    if _wants_grad(*inputs):
        out = Tensor(out_data, requires_grad=True)
        _ACTIVE_TAPE._record(out, inputs, backward_fn)
        return out
    return Tensor(out_data)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _binary_data(a: Tensor, b: Tensor, fn):
    try:
        return fn(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}") from exc


# ----------------------------------------------------------------------
# primitive operations
# ----------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = _binary_data(a, b, np.add)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit(out, (a, b), backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = _binary_data(a, b, np.subtract)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _emit(out, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = _binary_data(a, b, np.multiply)
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        return _unbroadcast(g * b_data, a.shape), _unbroadcast(g * a_data, b.shape)

    return _emit(out, (a, b), backward_fn)


def neg(a: Tensor) -> Tensor:
    return _emit(-a.data, (a,), lambda g: (-g,))


def scale(a: Tensor, k: float) -> Tensor:
    """Multiply by a python constant."""
    return _emit(a.data * k, (a,), lambda g: (g * k,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul needs (m,k) @ (k,n), got {a.shape} @ {b.shape}")
    out = a.data @ b.data
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        return g @ b_data.T, a_data.T @ g

    return _emit(out, (a, b), backward_fn)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")
    return _emit(a.data.T, (a,), lambda g: (g.T,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.clip(x, 0, None))),
                   np.exp(np.clip(x, None, 0)) / (1.0 + np.exp(np.clip(x, None, 0))))

    def backward_fn(g):
        return (g * out * (1.0 - out),)

    return _emit(out, (a,), backward_fn)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward_fn(g):
        return (g * (1.0 - out * out),)

    return _emit(out, (a,), backward_fn)


def log_sigmoid(a: Tensor) -> Tensor:
    """Numerically stable log(sigmoid(x)) = -softplus(-x)."""
    x = a.data
    out = -np.logaddexp(0.0, -x)

    def backward_fn(g):
        # d/dx log sigmoid(x) = sigmoid(-x)
        sneg = np.where(x >= 0, np.exp(-np.clip(x, 0, None)) / (1.0 + np.exp(-np.clip(x, 0, None))),
                        1.0 / (1.0 + np.exp(np.clip(x, None, 0))))
        return (g * sneg,)

    return _emit(out, (a,), backward_fn)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; the subgradient routes to the argmax branch and
    ties break toward the first argument."""
    out = _binary_data(a, b, np.maximum)
    take_a = a.data >= b.data

    def backward_fn(g):
        ga = np.where(take_a, g, 0.0)
        gb = np.where(take_a, 0.0, g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _emit(out, (a, b), backward_fn)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    sizes = [t.data.shape[axis] for t in tensors]

    def backward_fn(g):
        pieces = np.split(g, np.cumsum(sizes)[:-1], axis=axis)
        return tuple(pieces)

    return _emit(out, tuple(tensors), backward_fn)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of ``table`` (V, d) for an integer id array; the result
    has shape ``ids.shape + (d,)``.  Backward scatter-adds into the table."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeError(f"embedding table must be 2-d, got shape {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"ids out of range for table with {table.shape[0]} rows")
    out = table.data[ids]

    def backward_fn(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _emit(out, (table,), backward_fn)


def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under a softmax
    over the last axis of ``logits`` (N, V).  Returns a scalar."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(
            f"expected logits (N, V) with targets (N,), got {logits.shape} and {targets.shape}")
    x = logits.data
    m = x.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(x - m).sum(axis=1))
    n = x.shape[0]
    losses = lse - x[np.arange(n), targets]
    out = losses.mean()
    softmax = np.exp(x - lse[:, None])

    def backward_fn(g):
        gl = softmax.copy()
        gl[np.arange(n), targets] -= 1.0
        return (gl * (float(g) / n),)

    return _emit(out, (logits,), backward_fn)


def total(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    shape = a.shape

    def backward_fn(g):
        return (np.broadcast_to(np.asarray(g), shape).astype(np.float64, copy=True),)

    return _emit(a.data.sum(), (a,), backward_fn)


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    return scale(total(a), 1.0 / n)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Train-time inverted dropout: zero with probability ``rate`` and scale
    survivors by 1/(1-rate).  Identity when ``rate`` is zero."""
    if rate <= 0.0:
        return a
    if rate >= 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, const(mask))


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> Tensor | None:
    """Sample a reusable inverted-scaling mask (for variational dropout)."""
    if rate <= 0.0:
        return None
    if rate >= 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    return const((rng.random(shape) >= rate) / (1.0 - rate))


# ----------------------------------------------------------------------
# optimisers
# ----------------------------------------------------------------------

def global_grad_norm(params: list[Tensor]) -> float:
    sq = 0.0
    for p in params:
        if p.grad is not None:
            sq += float((p.grad * p.grad).sum())
    return math.sqrt(sq)


def _check_and_clip(params: list[Tensor], clip: float | None) -> None:
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        if not np.all(np.isfinite(p.grad)):
            raise NumericalError("non-finite gradient encountered")
    if clip is not None and clip > 0:
        norm = global_grad_norm(params)
        if norm > clip:
            factor = clip / norm
            for p in params:
                p.grad = p.grad * factor


def sgd(params: list[Tensor], lr: float, clip: float | None = None) -> None:
    """One step of gradient descent with optional global-norm clipping."""
    _check_and_clip(params, clip)
    for p in params:
        p.data -= lr * p.grad


class Adam:
    """Adam with bias correction, optional global-norm clipping, and L2
    regularisation added to the gradient before the moment updates."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, clip: float | None = None, l2: float = 0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip = clip
        self.l2 = l2
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}
        self._t = 0

    def step(self, params: list[Tensor]) -> None:
        _check_and_clip(params, self.clip)
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        for p in params:
            g = p.grad
            if self.l2:
                g = g + self.l2 * p.data
            m = self._m.get(id(p))
            v = self._v.get(id(p))
            if m is None:
                m = np.zeros_like(p.data)
                v = np.zeros_like(p.data)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * (g * g)
            self._m[id(p)] = m
            self._v[id(p)] = v
            m_hat = m / (1 - b1 ** self._t)
            v_hat = v / (1 - b2 ** self._t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam(params: list[Tensor], lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
         eps: float = 1e-8, clip: float | None = None, l2: float = 0.0,
         state: Adam | None = None) -> Adam:
    """Functional wrapper over :class:`Adam`: performs one step and returns
    the (possibly new) optimiser state for subsequent calls."""
    if state is None:
        state = Adam(lr=lr, beta1=beta1, beta2=beta2, eps=eps, clip=clip, l2=l2)
    state.step(params)
    return state
