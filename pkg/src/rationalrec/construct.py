"""Builders for the automaton families that mirror the recurrent cells.

Every family is wired from dense per-symbol weight tables over an
enumerated alphabet; the result always passes :meth:`Wfsa.validate` and
re-reading its arcs reproduces the tables exactly.

Families
--------
* ``B``      two states; one weighted symbol arc start -> final plus decaying
             self-loop: a soft unigram pattern.
* ``C``      three states; two weighted arcs are needed to accept: a soft,
             possibly nonconsecutive bigram pattern.
* ``F``      four states; both a unigram and a bigram final state, plus an
             epsilon shortcut that skips the first bigram symbol.
* ``qrnn2``  2|alphabet|+1 states tracking the previous symbol, matching a
             two-token convolution window.
* ``rcnn``   n+1 states chaining n weighted arcs with one shared decay.
* ``isan``   2d states encoding a d-dimensional input-switched affine map;
             one automaton per output dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingWeight, TableShape
from .semiring import SemiringDescriptor
from .wfsa import EPSILON, Wfsa


@dataclass
class WeightTables:
    """Dense weight tables, one scalar per symbol (or per symbol pair).

    ``mu``/``phi`` are lists of per-symbol vectors of length
    ``alphabet_size``.  ``gamma`` is the input-independent epsilon weight
    and ``rho`` the list of final weights (families with several final
    states).  ``mu_matrix``/``phi_matrix`` hold (prev, cur) symbol-pair
    tables for ``qrnn2`` or per-symbol d x d affine matrices for ``isan``;
    ``eta`` holds the per-symbol affine offsets.  ``mu_pad`` is the
    symbol-pair table evaluated against the zero padding used at the first
    step of a two-token window; omit it for the literal construction whose
    first-prefix score is the additive identity.
    """

    alphabet_size: int
    mu: list[np.ndarray] = field(default_factory=list)
    phi: list[np.ndarray] = field(default_factory=list)
    gamma: float | None = None
    rho: list[float] = field(default_factory=list)
    mu_matrix: np.ndarray | None = None
    phi_matrix: np.ndarray | None = None
    mu_pad: np.ndarray | None = None
    eta: np.ndarray | None = None

    def __post_init__(self):
        self.mu = [np.asarray(t, dtype=np.float64) for t in self.mu]
        self.phi = [np.asarray(t, dtype=np.float64) for t in self.phi]
        self.rho = [float(r) for r in self.rho]
        for name in ("mu_matrix", "phi_matrix", "mu_pad", "eta"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.asarray(v, dtype=np.float64))

    def to_json_dict(self) -> dict:
        out: dict = {"alphabet_size": self.alphabet_size}
        if self.mu:
            out["mu"] = [t.tolist() for t in self.mu]
        if self.phi:
            out["phi"] = [t.tolist() for t in self.phi]
        if self.gamma is not None:
            out["gamma"] = self.gamma
        if self.rho:
            out["rho"] = self.rho
        for name in ("mu_matrix", "phi_matrix", "mu_pad", "eta"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v.tolist()
        return out

    @classmethod
    def from_json_dict(cls, d: dict) -> "WeightTables":
        return cls(
            alphabet_size=int(d["alphabet_size"]),
            mu=[np.asarray(t) for t in d.get("mu", [])],
            phi=[np.asarray(t) for t in d.get("phi", [])],
            gamma=d.get("gamma"),
            rho=list(d.get("rho", [])),
            mu_matrix=d.get("mu_matrix"),
            phi_matrix=d.get("phi_matrix"),
            mu_pad=d.get("mu_pad"),
            eta=d.get("eta"),
        )


def _check_tables(name: str, tables: list[np.ndarray], expect: int, alphabet_size: int):
    if len(tables) != expect:
        raise TableShape(f"expected {expect} {name} table(s), got {len(tables)}")
    for i, t in enumerate(tables):
        if t.shape != (alphabet_size,):
            raise TableShape(f"{name}[{i}] has shape {t.shape}, expected ({alphabet_size},)")


def build_b(t: WeightTables, s: SemiringDescriptor) -> Wfsa:
    """Two-state soft-unigram automaton.

    State 0 starts with weight one and self-loops with weight one on every
    symbol; the arc 0 -> 1 consumes ``alpha`` with weight ``mu[0][alpha]``
    and state 1 self-loops with ``phi[0][alpha]`` and finishes with weight
    one.  The empty string scores the additive identity.
    """
    V = t.alphabet_size
    _check_tables("mu", t.mu, 1, V)
    _check_tables("phi", t.phi, 1, V)
    a = Wfsa(s, num_states=2, alphabet_size=V)
    a.set_initial(0, s.one)
    a.set_final(1, s.one)
    for sym in range(V):
        a.add_arc(0, 0, sym, s.one)
        a.add_arc(0, 1, sym, t.mu[0][sym])
        a.add_arc(1, 1, sym, t.phi[0][sym])
    return a.validate()


def build_c(t: WeightTables, s: SemiringDescriptor) -> Wfsa:
    """Three-state soft-bigram automaton: two weighted arcs reach the final
    state, with per-stage decays ``phi[0]`` and ``phi[1]``."""
    V = t.alphabet_size
    _check_tables("mu", t.mu, 2, V)
    _check_tables("phi", t.phi, 2, V)
    a = Wfsa(s, num_states=3, alphabet_size=V)
    a.set_initial(0, s.one)
    a.set_final(2, s.one)
    for sym in range(V):
        a.add_arc(0, 0, sym, s.one)
        a.add_arc(0, 1, sym, t.mu[0][sym])
        a.add_arc(1, 1, sym, t.phi[0][sym])
        a.add_arc(1, 2, sym, t.mu[1][sym])
        a.add_arc(2, 2, sym, t.phi[1][sym])
    return a.validate()


def build_f(t: WeightTables, s: SemiringDescriptor) -> Wfsa:
    """Four-state automaton interpolating unigram and bigram patterns.

    On top of the three-state wiring, state 1 becomes a second final state
    (weights ``rho[0]`` on state 1 and ``rho[1]`` on state 2), and an
    epsilon arc 0 -> 3 with the constant, input-independent weight ``gamma``
    opens a shortcut 3 -> 2 via ``mu[1]`` that skips the first bigram
    symbol.
    """
    V = t.alphabet_size
    _check_tables("mu", t.mu, 2, V)
    _check_tables("phi", t.phi, 2, V)
    if t.gamma is None:
        raise MissingWeight("family F requires the epsilon weight gamma")
    if len(t.rho) != 2:
        raise TableShape(f"family F requires 2 final weights, got {len(t.rho)}")
    a = Wfsa(s, num_states=4, alphabet_size=V)
    a.set_initial(0, s.one)
    a.set_final(1, t.rho[0])
    a.set_final(2, t.rho[1])
    a.add_arc(0, 3, EPSILON, t.gamma)
    for sym in range(V):
        a.add_arc(0, 0, sym, s.one)
        a.add_arc(0, 1, sym, t.mu[0][sym])
        a.add_arc(1, 1, sym, t.phi[0][sym])
        a.add_arc(1, 2, sym, t.mu[1][sym])
        a.add_arc(2, 2, sym, t.phi[1][sym])
        a.add_arc(3, 2, sym, t.mu[1][sym])
    return a.validate()


def build_qrnn2(t: WeightTables, s: SemiringDescriptor) -> Wfsa:
    """Automaton for a two-token convolution window, 2|alphabet|+1 states.

    State 0 is initial; the middle layer ``p_alpha = 1 + alpha`` remembers
    the previous symbol with weight-one arcs; the final layer
    ``q_alpha = 1 + |alphabet| + alpha`` carries the scores.  Content
    weights ``mu_matrix[prev, cur]`` move p -> q and decay weights
    ``phi_matrix[prev, cur]`` move q -> q.  When ``mu_pad`` is given, start
    arcs 0 -> q_cur consume the first symbol with the zero-padding content
    weight, matching a window whose leading token is padding; without it
    the first prefix scores the additive identity.
    """
    V = t.alphabet_size
    for name in ("mu_matrix", "phi_matrix"):
        m = getattr(t, name)
        if m is None or m.shape != (V, V):
            got = None if m is None else m.shape
            raise TableShape(f"{name} must have shape ({V}, {V}), got {got}")
    if t.mu_pad is not None and t.mu_pad.shape != (V,):
        raise TableShape(f"mu_pad must have shape ({V},), got {t.mu_pad.shape}")
    a = Wfsa(s, num_states=2 * V + 1, alphabet_size=V)

    def p(sym):
        return 1 + sym

    def q(sym):
        return 1 + V + sym

    a.set_initial(0, s.one)
    for cur in range(V):
        a.set_final(q(cur), s.one)
        a.add_arc(0, p(cur), cur, s.one)
        if t.mu_pad is not None:
            a.add_arc(0, q(cur), cur, t.mu_pad[cur])
        for prev in range(V):
            a.add_arc(p(prev), p(cur), cur, s.one)
            a.add_arc(p(prev), q(cur), cur, t.mu_matrix[prev, cur])
            a.add_arc(q(prev), q(cur), cur, t.phi_matrix[prev, cur])
    return a.validate()


def build_rcnn_ngram(t: WeightTables, s: SemiringDescriptor, n: int | None = None) -> Wfsa:
    """Chain automaton with ``n+1`` states: n weighted stage arcs
    ``mu[j-1]`` and one decay table ``phi[0]`` shared by all self-loops past
    the start.  ``n = 1`` is structurally the two-state unigram family."""
    V = t.alphabet_size
    if n is None:
        n = len(t.mu)
    if n < 1:
        raise TableShape(f"n must be >= 1, got {n}")
    _check_tables("mu", t.mu, n, V)
    _check_tables("phi", t.phi, 1, V)
    a = Wfsa(s, num_states=n + 1, alphabet_size=V)
    a.set_initial(0, s.one)
    a.set_final(n, s.one)
    for sym in range(V):
        a.add_arc(0, 0, sym, s.one)
        for j in range(1, n + 1):
            a.add_arc(j, j, sym, t.phi[0][sym])
            a.add_arc(j - 1, j, sym, t.mu[j - 1][sym])
    return a.validate()


def build_isan(t: WeightTables, s: SemiringDescriptor, output_dim: int) -> Wfsa:
    """Automaton recovering dimension ``output_dim`` of a d-dimensional
    input-switched affine recurrence, with 2d states.

    States ``0 .. d-1`` carry the recurrence values; states ``d .. 2d-1``
    are all initial with weight one and self-loop on every symbol.  Arc
    ``d+j -> j`` injects the offset ``eta[alpha, j]`` and arc ``j -> i``
    applies the matrix entry ``mu_matrix[alpha, i, j]``.  Only state
    ``output_dim`` is final.
    """
    V = t.alphabet_size
    if t.mu_matrix is None or t.mu_matrix.ndim != 3:
        raise TableShape("isan requires a per-symbol stack of square matrices")
    Vm, d, d2 = t.mu_matrix.shape
    if Vm != V or d != d2:
        raise TableShape(f"mu_matrix must have shape ({V}, d, d), got {t.mu_matrix.shape}")
    if t.eta is None or t.eta.shape != (V, d):
        got = None if t.eta is None else t.eta.shape
        raise TableShape(f"eta must have shape ({V}, {d}), got {got}")
    if not (0 <= output_dim < d):
        raise TableShape(f"output_dim {output_dim} out of range for dimension {d}")
    a = Wfsa(s, num_states=2 * d, alphabet_size=V)
    for j in range(d):
        a.set_initial(d + j, s.one)
    a.set_final(output_dim, s.one)
    for sym in range(V):
        for j in range(d):
            a.add_arc(d + j, d + j, sym, s.one)
            a.add_arc(d + j, j, sym, t.eta[sym, j])
            for i in range(d):
                a.add_arc(j, i, sym, t.mu_matrix[sym, i, j])
    return a.validate()


FAMILIES = {
    "B": build_b,
    "C": build_c,
    "F": build_f,
    "qrnn2": build_qrnn2,
    "rcnn": build_rcnn_ngram,
    "isan": build_isan,
}
