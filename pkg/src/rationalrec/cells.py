"""Recurrent cells whose hidden updates mirror weighted-automaton scoring.

Every cell exposes a pure single-step function plus a sequence
:func:`unroll`.  Tensors are two-dimensional ``(batch, dim)`` throughout;
biases are one-dimensional and broadcast.  Real-valued cells start from a
zero state so that the hidden value after ``t`` steps equals the automaton
score of the length-``t`` prefix; the max-plus cell starts from -inf for
the same reason.

Cell kinds (config key ``cell``):

* ``example1``        gated elementwise recurrence with biased, optionally
                      squashed content term.
* ``rrnn_b``          unigram cell: content is an unbiased linear map scaled
                      by (1 - forget).
* ``rrnn_b_maxplus``  unigram cell under max-plus: log-sigmoid forget added
                      to the state, running max against the content.
* ``rrnn_c``          bigram cell with two gated stages.
* ``rrnn_f``          unigram+bigram interpolation with learned,
                      input-independent final weights and a shortcut gate.
* ``qrnn2``           two-token window: gates read the previous token too.
* ``rcnn``            n-stage chain with one shared decay gate.
* ``isan``            input-switched affine updates, no nonlinearity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import (
    Tensor,
    add,
    const,
    embedding_lookup,
    log_sigmoid,
    matmul,
    maximum,
    mul,
    param,
    sigmoid,
    sub,
    tanh,
    transpose,
)
from .errors import NotRational, ShapeError, UnknownSymbol

CELL_KINDS = (
    "example1",
    "rrnn_b",
    "rrnn_b_maxplus",
    "rrnn_c",
    "rrnn_f",
    "qrnn2",
    "rcnn",
    "isan",
)

MAXPLUS_CELLS = ("rrnn_b_maxplus",)

_ONE = const(1.0)


@dataclass
class CellParams:
    """Learned tensors for one cell instance.

    The per-level lists hold one entry for single-stage cells, two for the
    bigram variants, and ``ngram`` content entries for the chain cell.
    """

    kind: str
    hidden: int
    vocab_size: int
    embed_dim: int
    embedding: Tensor | None = None
    w_f: list[Tensor] = field(default_factory=list)
    b_f: list[Tensor] = field(default_factory=list)
    w_u: list[Tensor] = field(default_factory=list)
    b_u: list[Tensor] = field(default_factory=list)
    v_f: Tensor | None = None  # previous-token weights (two-token window)
    v_u: Tensor | None = None
    b_p: list[Tensor] = field(default_factory=list)  # final-weight logits
    b_r: Tensor | None = None  # shortcut-weight logits
    w_o: Tensor | None = None
    b_o: Tensor | None = None
    w_lam: Tensor | None = None
    b_lam: Tensor | None = None
    lam_mode: str = "input"  # "constant" | "input"
    w_sym: list[Tensor] = field(default_factory=list)  # per-symbol matrices
    b_sym: list[Tensor] = field(default_factory=list)
    ngram: int = 2
    g_kind: str = "identity"  # content nonlinearity for example1/qrnn2/rcnn
    output_gate: bool = False

    def parameters(self) -> list[Tensor]:
        out: list[Tensor] = []
        if self.embedding is not None:
            out.append(self.embedding)
        for group in (self.w_f, self.b_f, self.w_u, self.b_u, self.b_p,
                      self.w_sym, self.b_sym):
            out.extend(group)
        for t in (self.v_f, self.v_u, self.b_r, self.w_o, self.b_o,
                  self.w_lam, self.b_lam):
            if t is not None:
                out.append(t)
        return out


@dataclass
class CellState:
    """Hidden state after ``t`` steps: the carried per-level vectors ``c``,
    the output-facing hidden ``c_out`` and the (optionally gated) output
    ``h``."""

    c: tuple[Tensor, ...]
    c_out: Tensor
    h: Tensor
    t: int


def _levels(kind: str, ngram: int) -> int:
    if kind in ("rrnn_c", "rrnn_f"):
        return 2
    if kind == "rcnn":
        return ngram
    return 1


def initial_state(p: CellParams, batch: int = 1) -> CellState:
    """Zero state: literal zeros for real cells, -inf for max-plus."""
    fill = -np.inf if p.kind in MAXPLUS_CELLS else 0.0
    z = const(np.full((batch, p.hidden), fill))
    levels = _levels(p.kind, p.ngram)
    return CellState(c=tuple(z for _ in range(levels)), c_out=z,
                     h=const(np.zeros((batch, p.hidden))), t=0)


def init_cell_params(kind: str, hidden: int, vocab_size: int, rng: np.random.Generator,
                     embed_dim: int | None = None, output_gate: bool = False,
                     ngram: int = 2, lam_mode: str = "input",
                     g: str = "identity", embedding: bool = True) -> CellParams:
    """Randomly initialised parameters for the given cell kind."""
    if kind not in CELL_KINDS:
        raise ValueError(f"unknown cell kind {kind!r}")
    if lam_mode not in ("constant", "input"):
        raise NotRational(
            f"lambda mode {lam_mode!r} depends on the previous state; only "
            "'constant' and 'input' keep the recurrence rational")
    d = hidden
    e = embed_dim if embed_dim is not None else hidden

    def w(rows, cols):
        return param(rng.normal(0.0, 1.0 / np.sqrt(cols), size=(rows, cols)))

    def b(rows):
        return param(np.zeros(rows))

    p = CellParams(kind=kind, hidden=d, vocab_size=vocab_size, embed_dim=e,
                   ngram=ngram, lam_mode=lam_mode, g_kind=g, output_gate=output_gate)
    if embedding and kind != "isan":
        p.embedding = param(rng.normal(0.0, 0.1, size=(vocab_size, e)))

    if kind in ("example1", "rrnn_b", "rrnn_b_maxplus", "qrnn2"):
        p.w_f = [w(d, e)]
        p.b_f = [param(rng.normal(0.0, 0.5, size=d))]
        p.w_u = [w(d, e)]
        if kind in ("example1", "qrnn2"):
            p.b_u = [b(d)]
        if kind == "qrnn2":
            p.v_f = w(d, e)
            p.v_u = w(d, e)
    elif kind in ("rrnn_c", "rrnn_f"):
        p.w_f = [w(d, e), w(d, e)]
        p.b_f = [param(rng.normal(0.0, 0.5, size=d)) for _ in range(2)]
        p.w_u = [w(d, e), w(d, e)]
        if kind == "rrnn_f":
            p.b_p = [param(rng.normal(0.0, 0.5, size=d)) for _ in range(2)]
            p.b_r = param(rng.normal(0.0, 0.5, size=d))
    elif kind == "rcnn":
        if ngram < 1:
            raise ValueError(f"ngram must be >= 1, got {ngram}")
        p.w_u = [w(d, e) for _ in range(ngram)]
        p.b_u = [b(d) for _ in range(ngram)]
        p.b_lam = param(rng.normal(0.0, 0.5, size=d))
        if lam_mode == "input":
            p.w_lam = w(d, e)
    elif kind == "isan":
        p.w_sym = [param(rng.normal(0.0, 0.5 / np.sqrt(d), size=(d, d)))
                   for _ in range(vocab_size)]
        p.b_sym = [param(rng.normal(0.0, 0.5, size=d)) for _ in range(vocab_size)]
        p.embedding = None

    if output_gate:
        if kind == "isan":
            raise ValueError("the affine-switched cell has no output gate")
        p.w_o = w(d, e)
        p.b_o = b(d)
    return p


# ----------------------------------------------------------------------
# gate evaluations (shared between the step functions and the table
# extraction in the equivalence checker, so both see identical floats)
# ----------------------------------------------------------------------

def _affine(w: Tensor, b: Tensor | None, v: Tensor) -> Tensor:
    out = matmul(v, transpose(w))
    return add(out, b) if b is not None else out


def _squash(kind: str, x: Tensor) -> Tensor:
    return tanh(x) if kind == "tanh" else x


def forget_gate(p: CellParams, level: int, v_t: Tensor) -> Tensor:
    return sigmoid(_affine(p.w_f[level], p.b_f[level], v_t))


def content_term(p: CellParams, level: int, v_t: Tensor, f_t: Tensor) -> Tensor:
    """Input representation scaled by (1 - forget); biased and optionally
    squashed only for the ``example1``-style parameterisation."""
    if p.kind == "example1":
        raw = _squash(p.g_kind, _affine(p.w_u[level], p.b_u[level], v_t))
    else:
        raw = matmul(v_t, transpose(p.w_u[level]))
    return mul(sub(_ONE, f_t), raw)


def maxplus_gates(p: CellParams, v_t: Tensor) -> tuple[Tensor, Tensor]:
    f = log_sigmoid(_affine(p.w_f[0], p.b_f[0], v_t))
    u = matmul(v_t, transpose(p.w_u[0]))
    return f, u


def qrnn2_gates(p: CellParams, v_prev: Tensor, v_t: Tensor) -> tuple[Tensor, Tensor]:
    f = sigmoid(add(_affine(p.w_f[0], p.b_f[0], v_t), matmul(v_prev, transpose(p.v_f))))
    raw = add(_affine(p.w_u[0], p.b_u[0], v_t), matmul(v_prev, transpose(p.v_u)))
    u = mul(sub(_ONE, f), _squash(p.g_kind, raw))
    return f, u


def lambda_gate(p: CellParams, v_t: Tensor) -> Tensor:
    if p.lam_mode == "constant":
        return sigmoid(p.b_lam)
    if p.lam_mode == "input":
        return sigmoid(_affine(p.w_lam, p.b_lam, v_t))
    raise NotRational(f"lambda mode {p.lam_mode!r} is outside the rational class")


def rcnn_content(p: CellParams, level: int, v_t: Tensor, lam: Tensor) -> Tensor:
    raw = _squash(p.g_kind, _affine(p.w_u[level], p.b_u[level], v_t))
    return mul(sub(_ONE, lam), raw)


def final_weights(p: CellParams) -> tuple[Tensor, Tensor, Tensor]:
    """Sigmoid-squashed final-state and shortcut weights of the
    interpolating cell; all are input-independent."""
    return sigmoid(p.b_p[0]), sigmoid(p.b_p[1]), sigmoid(p.b_r)


def _output(p: CellParams, v_t: Tensor, c: Tensor) -> Tensor:
    if not p.output_gate:
        return c
    if p.kind in MAXPLUS_CELLS:
        o = log_sigmoid(_affine(p.w_o, p.b_o, v_t))
        return tanh(add(o, c))
    o = sigmoid(_affine(p.w_o, p.b_o, v_t))
    return tanh(mul(o, c))


# ----------------------------------------------------------------------
# step functions
# ----------------------------------------------------------------------

def example1_step(p: CellParams, s: CellState, v_t: Tensor) -> CellState:
    """Gated sum of the previous state and the new input:
    c = f * c_prev + (1 - f) * g(W v + b)."""
    f = forget_gate(p, 0, v_t)
    u = content_term(p, 0, v_t, f)
    c = add(mul(f, s.c[0]), u)
    return CellState(c=(c,), c_out=c, h=_output(p, v_t, c), t=s.t + 1)


def rrnn_b_step(p: CellParams, s: CellState, v_t: Tensor) -> CellState:
    """Unigram cell: like ``example1`` but the content term is an unbiased
    linear map of the input."""
    return example1_step(p, s, v_t)


def rrnn_b_maxplus_step(p: CellParams, s: CellState, v_t: Tensor) -> CellState:
    """Max-plus unigram cell: c = max(f + c_prev, u) with log-sigmoid f.
    The content term carries no gate scaling; the carrier has no negation
    to express (1 - f)."""
    f, u = maxplus_gates(p, v_t)
    c = maximum(add(f, s.c[0]), u)
    return CellState(c=(c,), c_out=c, h=_output(p, v_t, c), t=s.t + 1)


def rrnn_c_step(p: CellParams, s: CellState, v_t: Tensor) -> CellState:
    """Bigram cell: the second stage accumulates the previous first-stage
    value times the new content."""
    f1 = forget_gate(p, 0, v_t)
    u1 = content_term(p, 0, v_t, f1)
    f2 = forget_gate(p, 1, v_t)
    u2 = content_term(p, 1, v_t, f2)
    c1 = add(mul(f1, s.c[0]), u1)
    c2 = add(mul(f2, s.c[1]), mul(s.c[0], u2))
    return CellState(c=(c1, c2), c_out=c2, h=_output(p, v_t, c2), t=s.t + 1)


def rrnn_f_step(p: CellParams, s: CellState, v_t: Tensor) -> CellState:
    """Unigram+bigram interpolation.  The shortcut weight r joins the
    first-stage carry in the second-stage content, and the two stages are
    mixed by input-independent weights p1, p2."""
    f1 = forget_gate(p, 0, v_t)
    u1 = content_term(p, 0, v_t, f1)
    f2 = forget_gate(p, 1, v_t)
    u2 = content_term(p, 1, v_t, f2)
    p1, p2, r = final_weights(p)
    c1 = add(mul(f1, s.c[0]), u1)
    c2 = add(mul(f2, s.c[1]), mul(add(s.c[0], r), u2))
    c = add(mul(p1, c1), mul(p2, c2))
    return CellState(c=(c1, c2), c_out=c, h=_output(p, v_t, c), t=s.t + 1)


def qrnn2_step(p: CellParams, s: CellState, v_prev: Tensor, v_t: Tensor) -> CellState:
    """Two-token window cell; the caller supplies the previous embedding
    (a zero vector at the first step)."""
    f, u = qrnn2_gates(p, v_prev, v_t)
    c = add(mul(f, s.c[0]), u)
    return CellState(c=(c,), c_out=c, h=_output(p, v_t, c), t=s.t + 1)


def rcnn_step(p: CellParams, s: CellState, v_t: Tensor, n: int | None = None) -> CellState:
    """Chain cell: every stage decays by the shared lambda gate and stage j
    feeds on the previous value of stage j-1."""
    if n is not None and n != p.ngram:
        raise ShapeError(f"step called with n={n} but parameters have ngram={p.ngram}")
    lam = lambda_gate(p, v_t)
    new = []
    for j in range(p.ngram):
        u_j = rcnn_content(p, j, v_t, lam)
        if j == 0:
            new.append(add(mul(s.c[0], lam), u_j))
        else:
            new.append(add(mul(s.c[j], lam), mul(s.c[j - 1], u_j)))
    c_out = new[-1]
    return CellState(c=tuple(new), c_out=c_out, h=_output(p, v_t, c_out), t=s.t + 1)


def isan_step(p: CellParams, s: CellState, x_t: int) -> CellState:
    """Input-switched affine update c = W[x] c_prev + b[x]; the whole batch
    shares the symbol."""
    x_t = int(x_t)
    if not (0 <= x_t < p.vocab_size):
        raise UnknownSymbol(f"symbol {x_t} out of range for vocabulary of {p.vocab_size}")
    c = add(matmul(s.c[0], transpose(p.w_sym[x_t])), p.b_sym[x_t])
    return CellState(c=(c,), c_out=c, h=c, t=s.t + 1)


# ----------------------------------------------------------------------
# unrolling
# ----------------------------------------------------------------------

def _masked(s: CellState, rec_mask: Tensor | None) -> CellState:
    if rec_mask is None:
        return s
    return replace(s, c=tuple(mul(ci, rec_mask) for ci in s.c))


def unroll_vectors(p: CellParams, vs: list[Tensor], state: CellState | None = None,
                   v_prev: Tensor | None = None,
                   rec_mask: Tensor | None = None) -> list[CellState]:
    """Apply the cell along a sequence of already-embedded inputs.

    ``state`` threads a carried-in state across truncation boundaries;
    ``v_prev`` seeds the two-token window (zeros by default); ``rec_mask``
    applies one shared dropout mask to the carried state at every step.
    """
    if p.kind == "isan":
        raise ShapeError("the affine-switched cell consumes symbols, not vectors")
    if state is None:
        batch = vs[0].shape[0] if vs else 1
        state = initial_state(p, batch)
    out = []
    for v_t in vs:
        s_in = _masked(state, rec_mask)
        if p.kind == "qrnn2":
            if v_prev is None:
                v_prev = const(np.zeros(v_t.shape))
            state = qrnn2_step(p, s_in, v_prev, v_t)
            v_prev = v_t
        elif p.kind == "example1":
            state = example1_step(p, s_in, v_t)
        elif p.kind == "rrnn_b":
            state = rrnn_b_step(p, s_in, v_t)
        elif p.kind == "rrnn_b_maxplus":
            state = rrnn_b_maxplus_step(p, s_in, v_t)
        elif p.kind == "rrnn_c":
            state = rrnn_c_step(p, s_in, v_t)
        elif p.kind == "rrnn_f":
            state = rrnn_f_step(p, s_in, v_t)
        elif p.kind == "rcnn":
            state = rcnn_step(p, s_in, v_t)
        else:
            raise ValueError(f"unknown cell kind {p.kind!r}")
        out.append(state)
    return out


def unroll(kind: str, p: CellParams, x, state: CellState | None = None,
           v_prev: Tensor | None = None) -> list[CellState]:
    """Run the cell over a symbol sequence from the zero state (or a
    carried-in ``state``), returning every intermediate state.

    ``x`` is an integer array of shape ``(T,)`` for a single sequence or
    ``(T, B)`` for a batch.  The affine-switched cell accepts only single
    sequences because its parameters are selected per symbol.
    """
    if kind != p.kind:
        raise ValueError(f"parameters are for {p.kind!r}, not {kind!r}")
    x = np.asarray(x, dtype=np.int64)
    if x.ndim == 1:
        ids = x[:, None]  # (T, 1)
    elif x.ndim == 2:
        ids = x
    else:
        raise ShapeError(f"symbol input must be 1-d or 2-d, got shape {x.shape}")
    T, batch = ids.shape

    if kind == "isan":
        if batch != 1:
            raise ShapeError("the affine-switched cell supports batch size 1 only")
        if state is None:
            state = initial_state(p, 1)
        out = []
        for t in range(T):
            state = isan_step(p, state, ids[t, 0])
            out.append(state)
        return out

    vs = [embedding_lookup(p.embedding, ids[t]) for t in range(T)]
    return unroll_vectors(p, vs, state=state, v_prev=v_prev)
