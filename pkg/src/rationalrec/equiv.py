"""Certify that unrolled cell states equal automaton Forward scores.

For each output dimension ``i`` of a cell, the per-symbol gate readouts are
evaluated into weight tables, the matching automaton family is built, and
the unrolled hidden value after every prefix is compared against the
automaton's prefix score.  A report aggregates the worst absolute
difference; checks over independent parameter draws are pure and may run
concurrently.

Default tolerances: 1e-6 for real-semiring cells whose update regroups a
sum-product differently from the arc-by-arc Forward accumulation, 1e-9 for
the max-plus, two-token-window and affine-switched cells whose operations
match the Forward sweeps term for term.

The two-token window is certified for exactly the window size two; the
two-consecutive-token gate of typed gated variants has the same structure,
so no separate construction is provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import construct
from .autodiff import Tensor, const
from .cells import (
    CellParams,
    final_weights,
    forget_gate,
    content_term,
    initial_state,
    lambda_gate,
    maxplus_gates,
    qrnn2_gates,
    rcnn_content,
    unroll,
)
from .construct import WeightTables
from .errors import VocabTooLarge
from .semiring import MAXPLUS, REAL
from .wfsa import Wfsa

VOCAB_CAP = 64

TOLERANCES = {
    "example1": 1e-6,
    "rrnn_b": 1e-6,
    "rrnn_c": 1e-6,
    "rrnn_f": 1e-6,
    "rcnn": 1e-6,
    "rrnn_b_maxplus": 1e-9,
    "qrnn2": 1e-9,
    "isan": 1e-9,
}


@dataclass
class EquivReport:
    """Outcome of one equivalence check.  ``passed`` holds exactly when
    ``max_abs_diff <= tol``; ``worst_case`` localises the largest gap as
    ``(string, dim, prefix_length)``."""

    cell: str
    dims: int
    num_strings: int
    tol: float
    max_abs_diff: float
    passed: bool
    worst_case: tuple[tuple[int, ...], int, int] | None

    def format(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [
            f"cell           : {self.cell}",
            f"dims checked   : {self.dims}",
            f"strings checked: {self.num_strings}",
            f"tolerance      : {self.tol:g}",
            f"max |diff|     : {self.max_abs_diff:.3e}",
            f"status         : {status}",
        ]
        if self.worst_case is not None:
            x, dim, t = self.worst_case
            lines.append(f"worst case     : string={list(x)} dim={dim} prefix={t}")
        return "\n".join(lines)


def sample_strings(rng: np.random.Generator, vocab_size: int, count: int,
                   max_len: int) -> list[tuple[int, ...]]:
    """Deterministic string sample: the empty string, a single symbol, an
    all-same-symbol string and a random string at the maximum length, then
    uniform random strings of random lengths."""
    out: list[tuple[int, ...]] = [()]
    out.append((int(rng.integers(vocab_size)),))
    out.append((int(rng.integers(vocab_size)),) * max_len)
    out.append(tuple(int(v) for v in rng.integers(vocab_size, size=max_len)))
    while len(out) < count:
        n = int(rng.integers(1, max_len + 1))
        out.append(tuple(int(v) for v in rng.integers(vocab_size, size=n)))
    return out[:count]


def _embedded(p: CellParams, sym: int) -> Tensor:
    return const(p.embedding.data[sym][None, :])


def tables_from_cell(kind: str, p: CellParams, vocab_size: int | None = None
                     ) -> list[WeightTables]:
    """Evaluate the cell's gate readouts on every vocabulary symbol and
    slice them into one scalar table set per output dimension.

    The evaluation goes through the very same gate functions the step
    functions use, so tables and cell unrolls see identical floats.
    """
    if vocab_size is None:
        vocab_size = p.vocab_size
    if vocab_size > VOCAB_CAP:
        raise VocabTooLarge(f"vocabulary of {vocab_size} exceeds the table cap of {VOCAB_CAP}")
    d = p.hidden

    if kind in ("example1", "rrnn_b", "rrnn_b_maxplus"):
        mu = np.zeros((vocab_size, d))
        phi = np.zeros((vocab_size, d))
        for sym in range(vocab_size):
            v = _embedded(p, sym)
            if kind == "rrnn_b_maxplus":
                f, u = maxplus_gates(p, v)
            else:
                f = forget_gate(p, 0, v)
                u = content_term(p, 0, v, f)
            mu[sym] = u.data[0]
            phi[sym] = f.data[0]
        return [WeightTables(alphabet_size=vocab_size, mu=[mu[:, i]], phi=[phi[:, i]])
                for i in range(d)]

    if kind in ("rrnn_c", "rrnn_f"):
        mu = np.zeros((2, vocab_size, d))
        phi = np.zeros((2, vocab_size, d))
        for sym in range(vocab_size):
            v = _embedded(p, sym)
            for j in range(2):
                f = forget_gate(p, j, v)
                u = content_term(p, j, v, f)
                mu[j, sym] = u.data[0]
                phi[j, sym] = f.data[0]
        if kind == "rrnn_c":
            return [WeightTables(alphabet_size=vocab_size,
                                 mu=[mu[0, :, i], mu[1, :, i]],
                                 phi=[phi[0, :, i], phi[1, :, i]])
                    for i in range(d)]
        p1, p2, r = final_weights(p)
        return [WeightTables(alphabet_size=vocab_size,
                             mu=[mu[0, :, i], mu[1, :, i]],
                             phi=[phi[0, :, i], phi[1, :, i]],
                             gamma=float(r.data[i]),
                             rho=[float(p1.data[i]), float(p2.data[i])])
                for i in range(d)]

    if kind == "qrnn2":
        mu = np.zeros((vocab_size, vocab_size, d))
        phi = np.zeros((vocab_size, vocab_size, d))
        mu_pad = np.zeros((vocab_size, d))
        zero_prev = const(np.zeros((1, p.embed_dim)))
        for cur in range(vocab_size):
            v = _embedded(p, cur)
            _, u0 = qrnn2_gates(p, zero_prev, v)
            mu_pad[cur] = u0.data[0]
            for prev in range(vocab_size):
                f, u = qrnn2_gates(p, _embedded(p, prev), v)
                mu[prev, cur] = u.data[0]
                phi[prev, cur] = f.data[0]
        return [WeightTables(alphabet_size=vocab_size,
                             mu_matrix=mu[:, :, i], phi_matrix=phi[:, :, i],
                             mu_pad=mu_pad[:, i])
                for i in range(d)]

    if kind == "rcnn":
        n = p.ngram
        mu = np.zeros((n, vocab_size, d))
        phi = np.zeros((vocab_size, d))
        for sym in range(vocab_size):
            v = _embedded(p, sym)
            lam = lambda_gate(p, v)
            phi[sym] = lam.data[0]
            for j in range(n):
                mu[j, sym] = rcnn_content(p, j, v, lam).data[0]
        return [WeightTables(alphabet_size=vocab_size,
                             mu=[mu[j, :, i] for j in range(n)], phi=[phi[:, i]])
                for i in range(d)]

    if kind == "isan":
        mu_matrix = np.stack([p.w_sym[sym].data for sym in range(vocab_size)])
        eta = np.stack([p.b_sym[sym].data for sym in range(vocab_size)])
        tables = WeightTables(alphabet_size=vocab_size, mu_matrix=mu_matrix, eta=eta)
        return [tables for _ in range(d)]

    raise ValueError(f"no table extraction for cell kind {kind!r}")


def build_automata(kind: str, p: CellParams, vocab_size: int | None = None,
                   tables: list[WeightTables] | None = None) -> list[Wfsa]:
    """Build the per-dimension automata matching a cell's parameters."""
    if tables is None:
        tables = tables_from_cell(kind, p, vocab_size)
    s = MAXPLUS if kind == "rrnn_b_maxplus" else REAL
    if kind in ("example1", "rrnn_b", "rrnn_b_maxplus"):
        return [construct.build_b(t, s) for t in tables]
    if kind == "rrnn_c":
        return [construct.build_c(t, s) for t in tables]
    if kind == "rrnn_f":
        return [construct.build_f(t, s) for t in tables]
    if kind == "qrnn2":
        return [construct.build_qrnn2(t, s) for t in tables]
    if kind == "rcnn":
        return [construct.build_rcnn_ngram(t, s) for t in tables]
    if kind == "isan":
        return [construct.build_isan(t, s, output_dim=i) for i, t in enumerate(tables)]
    raise ValueError(f"no automaton family for cell kind {kind!r}")


def _diff(a: float, b: float) -> float:
    if a == b:  # covers -inf == -inf, where subtraction would give nan
        return 0.0
    return abs(a - b)


def check_equivalence(kind: str, p: CellParams, vocab_size: int | None = None,
                      strings: list[tuple[int, ...]] | None = None,
                      tol: float | None = None, rng: np.random.Generator | None = None,
                      num_strings: int = 50, max_len: int = 10,
                      automata: list[Wfsa] | None = None) -> EquivReport:
    """Compare every prefix of every sampled string, in every dimension,
    between the unrolled cell and the per-dimension automata.

    A mismatch beyond ``tol`` yields ``passed=False`` rather than an
    exception.  Pass ``automata`` to check against externally built (for
    example deliberately perturbed) machines.
    """
    if vocab_size is None:
        vocab_size = p.vocab_size
    if tol is None:
        tol = TOLERANCES[kind]
    if strings is None:
        if rng is None:
            rng = np.random.default_rng(0)
        strings = sample_strings(rng, vocab_size, num_strings, max_len)
    if automata is None:
        automata = build_automata(kind, p, vocab_size)
    d = p.hidden

    worst = 0.0
    worst_case = None
    init = initial_state(p, 1)
    for i, automaton in enumerate(automata):
        gap = _diff(float(init.c_out.data[0, i]), automaton.forward(()))
        if gap > worst:
            worst, worst_case = gap, ((), i, 0)
    for x in strings:
        if not x:
            continue
        states = unroll(kind, p, np.asarray(x, dtype=np.int64))
        for i, automaton in enumerate(automata):
            for t, score in enumerate(automaton.forward_prefixes(x), start=1):
                gap = _diff(float(states[t - 1].c_out.data[0, i]), score)
                if gap > worst:
                    worst, worst_case = gap, (tuple(x), i, t)
    passed = worst <= tol and math.isfinite(worst)
    return EquivReport(cell=kind, dims=d, num_strings=len(strings), tol=tol,
                       max_abs_diff=worst, passed=passed, worst_case=worst_case)


def check_F_dp(p: CellParams, vocab_size: int | None = None,
               strings: list[tuple[int, ...]] | None = None, tol: float = 1e-9,
               rng: np.random.Generator | None = None, num_strings: int = 50,
               max_len: int = 10) -> EquivReport:
    """Cross-check the interpolating family two ways: a hand-written
    per-state dynamic program against the generic epsilon-aware Forward on
    the built four-state automaton.

    The DP tracks the total score landing in each state just after each
    symbol; the shortcut state is refreshed from the start state's constant
    score after initialisation and after every symbol.
    """
    if vocab_size is None:
        vocab_size = p.vocab_size
    if strings is None:
        if rng is None:
            rng = np.random.default_rng(0)
        strings = sample_strings(rng, vocab_size, num_strings, max_len)
    tables = tables_from_cell("rrnn_f", p, vocab_size)
    automata = build_automata("rrnn_f", p, vocab_size, tables=tables)

    worst = 0.0
    worst_case = None
    for x in strings:
        for i, (t_i, automaton) in enumerate(zip(tables, automata)):
            mu1, mu2 = t_i.mu
            phi1, phi2 = t_i.phi
            gamma = t_i.gamma
            rho1, rho2 = t_i.rho
            z0, z1, z2 = 1.0, 0.0, 0.0
            z3 = z0 * gamma
            dp_scores = []
            for sym in x:
                z1, z2 = (z1 * phi1[sym] + z0 * mu1[sym],
                          z2 * phi2[sym] + (z1 + z3) * mu2[sym])
                z0 = 1.0
                z3 = z0 * gamma
                dp_scores.append(rho1 * z1 + rho2 * z2)
            fwd_scores = automaton.forward_prefixes(x)
            for t, (a, b) in enumerate(zip(dp_scores, fwd_scores), start=1):
                gap = _diff(a, b)
                if gap > worst:
                    worst, worst_case = gap, (tuple(x), i, t)
    passed = worst <= tol and math.isfinite(worst)
    return EquivReport(cell="rrnn_f(dp)", dims=p.hidden, num_strings=len(strings),
                       tol=tol, max_abs_diff=worst, passed=passed, worst_case=worst_case)
