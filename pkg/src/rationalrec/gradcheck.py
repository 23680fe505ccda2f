"""Finite-difference verification of the reverse-mode gradients.

Every check builds some scalar loss twice: once through a recording tape
(analytic gradients) and once per perturbed parameter entry via central
differences with step ``h``.  The reported error for a gradient entry pair
``(a, b)`` is ``|a - b| / max(1, |a|, |b|)``, i.e. relative for large
gradients and absolute near zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import cells
from .autodiff import Tape, Tensor

DEFAULT_H = 1e-5
DEFAULT_TOL = 1e-4


@dataclass
class GradCheckResult:
    name: str
    max_rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol

    def format(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<28s} max rel err {self.max_rel_err:.3e}  [{status}]"


def finite_difference_grads(loss_fn: Callable[[], Tensor], params: list[Tensor],
                            h: float = DEFAULT_H) -> list[np.ndarray]:
    """Central-difference gradients of ``loss_fn()`` w.r.t. every entry of
    every parameter.  ``loss_fn`` must not record (it is called outside any
    tape)."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = float(loss_fn().data)
            flat[k] = orig - h
            down = float(loss_fn().data)
            flat[k] = orig
            gflat[k] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def compare_grads(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    worst = 0.0
    for a, b in zip(analytic, numeric):
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        worst = max(worst, float((np.abs(a - b) / denom).max()))
    return worst


def check_loss_fn(name: str, loss_fn: Callable[[], Tensor], params: list[Tensor],
                  h: float = DEFAULT_H, tol: float = DEFAULT_TOL) -> GradCheckResult:
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss, params)
    analytic = [p.grad for p in params]
    numeric = finite_difference_grads(loss_fn, params, h=h)
    return GradCheckResult(name=name, max_rel_err=compare_grads(analytic, numeric), tol=tol)


def _primitive_cases(rng: np.random.Generator):
    """One named scalar-loss builder per differentiable primitive."""
    a = ad.param(rng.normal(size=(4, 5)))
    b = ad.param(rng.normal(size=(4, 5)))
    m1 = ad.param(rng.normal(size=(4, 5)))
    m2 = ad.param(rng.normal(size=(5, 3)))
    emb = ad.param(rng.normal(size=(7, 3)))
    ids = rng.integers(0, 7, size=6)
    logits = ad.param(rng.normal(size=(6, 5)))
    targets = rng.integers(0, 5, size=6)
    # keep maximum away from exact ties, where the subgradient choice makes
    # the finite difference one-sided
    b_gap = ad.param(b.data + np.sign(b.data - a.data + 0.5) * 0.3)
    concat_weights = ad.const(rng.normal(size=(8, 5)))

    cases = [
        ("add", lambda: ad.total(ad.add(a, b)), [a, b]),
        ("sub", lambda: ad.total(ad.sub(a, b)), [a, b]),
        ("mul", lambda: ad.total(ad.mul(a, b)), [a, b]),
        ("neg", lambda: ad.total(ad.neg(a)), [a]),
        ("scale", lambda: ad.total(ad.scale(a, 2.5)), [a]),
        ("matmul", lambda: ad.total(ad.matmul(m1, m2)), [m1, m2]),
        ("transpose", lambda: ad.total(ad.mul(ad.transpose(m1), ad.const(np.ones((5, 4))))), [m1]),
        ("sigmoid", lambda: ad.total(ad.sigmoid(a)), [a]),
        ("tanh", lambda: ad.total(ad.tanh(a)), [a]),
        ("log_sigmoid", lambda: ad.total(ad.log_sigmoid(a)), [a]),
        ("maximum", lambda: ad.total(ad.maximum(a, b_gap)), [a, b_gap]),
        ("concat", lambda: ad.total(ad.mul(ad.concat([a, b], axis=0), concat_weights)), [a, b]),
        ("embedding_lookup", lambda: ad.total(ad.embedding_lookup(emb, ids)), [emb]),
        ("softmax_cross_entropy", lambda: ad.softmax_cross_entropy(logits, targets), [logits]),
        ("mean", lambda: ad.mean(ad.mul(a, a)), [a]),
    ]
    return cases


def check_primitives(seed: int = 0, h: float = DEFAULT_H,
                     tol: float = DEFAULT_TOL) -> list[GradCheckResult]:
    """Gradient-check every primitive op against central differences."""
    rng = np.random.default_rng(seed)
    return [check_loss_fn(name, fn, params, h=h, tol=tol)
            for name, fn, params in _primitive_cases(rng)]


def check_rrnn_f_lm_step(seed: int = 0, hidden: int = 4, length: int = 6,
                         vocab: int = 5, h: float = DEFAULT_H,
                         tol: float = DEFAULT_TOL) -> GradCheckResult:
    """Gradient-check one full language-model step of the interpolating
    cell: embed, unroll, project through the tied embedding, average the
    per-position cross entropies."""
    rng = np.random.default_rng(seed)
    p = cells.init_cell_params("rrnn_f", hidden=hidden, vocab_size=vocab, rng=rng,
                               output_gate=True)
    x = rng.integers(0, vocab, size=length + 1)
    inputs, targets = x[:-1], x[1:]

    def loss_fn() -> Tensor:
        states = cells.unroll("rrnn_f", p, inputs)
        losses = None
        for t, st in enumerate(states):
            logits = ad.matmul(st.h, ad.transpose(p.embedding))
            ce = ad.softmax_cross_entropy(logits, targets[t:t + 1])
            losses = ce if losses is None else ad.add(losses, ce)
        return ad.scale(losses, 1.0 / len(states))

    return check_loss_fn("rrnn_f_lm_step", loss_fn, p.parameters(), h=h, tol=tol)


def run_all(seed: int = 0, h: float = DEFAULT_H, tol: float = DEFAULT_TOL
            ) -> list[GradCheckResult]:
    results = check_primitives(seed=seed, h=h, tol=tol)
    results.append(check_rrnn_f_lm_step(seed=seed, h=h, tol=tol))
    return results
