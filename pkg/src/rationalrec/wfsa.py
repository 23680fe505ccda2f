"""Weighted finite-state automata with a semiring-generic Forward algorithm.

An automaton stores sparse transition weights keyed by
``(src_state, dst_state, symbol)``; symbols are integer ids in
``0 .. alphabet_size-1`` and ``EPSILON`` marks transitions that consume no
input.  Any weight not stored explicitly is the semiring's additive
identity, so automata never need to list zero arcs.

The epsilon subgraph must be acyclic.  Scoring propagates epsilon arcs in
one topological sweep after initialisation and again after every consumed
symbol, which is exact for acyclic epsilon graphs.  Epsilon weights combine
with path weights through ordinary semiring multiplication in both
semirings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    EpsilonCycle,
    IndexOutOfBounds,
    InvalidPath,
    OracleTooLarge,
    ParseError,
    UnknownSymbol,
)
from .semiring import SemiringDescriptor, from_name

EPSILON = -1

# Limits for the brute-force oracle.
_ORACLE_MAX_STATES = 8
_ORACLE_MAX_WORK = 10
_ORACLE_STEP_BUDGET = 2_000_000


@dataclass(frozen=True)
class Path:
    """An ordered sequence of transitions ``(src, dst, symbol_or_epsilon)``."""

    transitions: tuple[tuple[int, int, int], ...]

    def check_adjacent(self) -> None:
        if not self.transitions:
            raise InvalidPath("path must contain at least one transition")
        for (_, dst, _), (src, _, _) in zip(self.transitions, self.transitions[1:]):
            if dst != src:
                raise InvalidPath(f"transition into state {dst} followed by one out of state {src}")


class Wfsa:
    """A weighted automaton over a fixed semiring.

    Build it by ``add_arc`` / ``set_initial`` / ``set_final`` calls, then
    call :meth:`validate`.  Validation freezes the automaton; all scoring
    operations are read-only afterwards and safe to run concurrently.
    """

    def __init__(self, semiring: SemiringDescriptor, num_states: int, alphabet_size: int):
        if num_states <= 0:
            raise IndexOutOfBounds(f"num_states must be positive, got {num_states}")
        if alphabet_size <= 0:
            raise IndexOutOfBounds(f"alphabet_size must be positive, got {alphabet_size}")
        self.semiring = semiring
        self.num_states = num_states
        self.alphabet_size = alphabet_size
        self.transitions: dict[tuple[int, int, int], float] = {}
        self.initial: dict[int, float] = {}
        self.final: dict[int, float] = {}
        self._validated = False
        self._arcs_by_symbol: list[list[tuple[int, int, float]]] | None = None
        self._eps_arcs_topo: list[tuple[int, int, float]] | None = None

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    def _mutable(self) -> None:
        if self._validated:
            raise RuntimeError("automaton is frozen after validation")

    def add_arc(self, src: int, dst: int, symbol: int, weight: float) -> None:
        """Set tau(src, dst, symbol).  A weight equal to the semiring zero
        is dropped, matching the convention that unlisted arcs weigh zero."""
        self._mutable()
        if weight == self.semiring.zero:
            self.transitions.pop((src, dst, symbol), None)
        else:
            self.transitions[(src, dst, symbol)] = float(weight)

    def set_initial(self, state: int, weight: float) -> None:
        self._mutable()
        if weight == self.semiring.zero:
            self.initial.pop(state, None)
        else:
            self.initial[state] = float(weight)

    def set_final(self, state: int, weight: float) -> None:
        self._mutable()
        if weight == self.semiring.zero:
            self.final.pop(state, None)
        else:
            self.final[state] = float(weight)

    # ------------------------------------------------------------------
    # lookups
    # ------------------------------------------------------------------

    def weight(self, src: int, dst: int, symbol: int) -> float:
        return self.transitions.get((src, dst, symbol), self.semiring.zero)

    def initial_weight(self, state: int) -> float:
        return self.initial.get(state, self.semiring.zero)

    def final_weight(self, state: int) -> float:
        return self.final.get(state, self.semiring.zero)

    def num_arcs(self) -> int:
        return len(self.transitions)

    def arcs(self) -> Iterable[tuple[int, int, int, float]]:
        for (src, dst, sym), w in sorted(self.transitions.items()):
            yield src, dst, sym, w

    # ------------------------------------------------------------------
    # validation
    # ------------------------------------------------------------------

    def validate(self) -> "Wfsa":
        """Check index bounds, weight membership and epsilon acyclicity.

        Also builds the per-symbol arc index and the topologically sorted
        epsilon arc list used by the Forward sweeps.  Idempotent.
        """
        if self._validated:
            return self
        s = self.semiring
        for state, w in list(self.initial.items()) + list(self.final.items()):
            self._check_state(state)
            s.check_member(w)
        eps_arcs = []
        for (src, dst, sym), w in self.transitions.items():
            self._check_state(src)
            self._check_state(dst)
            if sym != EPSILON and not (0 <= sym < self.alphabet_size):
                raise IndexOutOfBounds(
                    f"symbol {sym} out of range for alphabet of size {self.alphabet_size}")
            s.check_member(w)
            if sym == EPSILON:
                eps_arcs.append((src, dst, w))

        self._eps_arcs_topo = self._sort_eps_arcs(eps_arcs)
        by_symbol: list[list[tuple[int, int, float]]] = [[] for _ in range(self.alphabet_size)]
        for (src, dst, sym), w in sorted(self.transitions.items()):
            if sym != EPSILON:
                by_symbol[sym].append((src, dst, w))
        self._arcs_by_symbol = by_symbol
        self._validated = True
        return self

    def _check_state(self, q: int) -> None:
        if not (0 <= q < self.num_states):
            raise IndexOutOfBounds(f"state {q} out of range for {self.num_states} states")

    def _sort_eps_arcs(self, eps_arcs: list[tuple[int, int, float]]) -> list[tuple[int, int, float]]:
        """Topologically order epsilon arcs by source state (Kahn)."""
        if not eps_arcs:
            return []
        nodes = sorted({q for a in eps_arcs for q in a[:2]})
        succ: dict[int, list[int]] = {q: [] for q in nodes}
        indeg = {q: 0 for q in nodes}
        for src, dst, _ in eps_arcs:
            succ[src].append(dst)
            indeg[dst] += 1
        ready = sorted(q for q in nodes if indeg[q] == 0)
        order: dict[int, int] = {}
        while ready:
            q = ready.pop(0)
            order[q] = len(order)
            for r in sorted(succ[q]):
                indeg[r] -= 1
                if indeg[r] == 0:
                    ready.append(r)
            ready.sort()
        if len(order) != len(nodes):
            cyclic = sorted(set(nodes) - set(order))
            raise EpsilonCycle(f"epsilon-transition cycle through states {cyclic}")
        return sorted(eps_arcs, key=lambda a: (order[a[0]], a[1]))

    # ------------------------------------------------------------------
    # scoring
    # ------------------------------------------------------------------

    def _check_input(self, x: Sequence[int]) -> None:
        for sym in x:
            if not (0 <= sym < self.alphabet_size):
                raise UnknownSymbol(
                    f"symbol {sym} out of range for alphabet of size {self.alphabet_size}")

    def _eps_sweep(self, omega: list[float], stats: dict | None = None) -> None:
        zero = self.semiring.zero
        plus = self.semiring.plus
        times = self.semiring.times
        arcs = self._eps_arcs_topo
        if stats is not None:
            stats["arc_visits"] += len(arcs)
        for src, dst, w in arcs:
            v = omega[src]
            if v != zero:
                omega[dst] = plus(omega[dst], times(v, w))

    def _start_omega(self, stats: dict | None = None) -> list[float]:
        omega = [self.semiring.zero] * self.num_states
        for q, w in self.initial.items():
            omega[q] = w
        self._eps_sweep(omega, stats)
        return omega

    def _advance(self, omega: list[float], sym: int, stats: dict | None = None) -> list[float]:
        zero = self.semiring.zero
        plus = self.semiring.plus
        times = self.semiring.times
        arcs = self._arcs_by_symbol[sym]
        if stats is not None:
            stats["arc_visits"] += len(arcs)
        new = [zero] * self.num_states
        for src, dst, w in arcs:
            v = omega[src]
            if v != zero:
                new[dst] = plus(new[dst], times(v, w))
        self._eps_sweep(new, stats)
        return new

    def _finish(self, omega: list[float]) -> float:
        s = self.semiring
        acc = s.zero
        for q, w in sorted(self.final.items()):
            acc = s.plus(acc, s.times(omega[q], w))
        return acc

    def forward(self, x: Sequence[int], stats: dict | None = None) -> float:
        """Total score of all paths deriving ``x``, in time O(|x| * arcs).

        Pass a ``stats`` dict to receive an ``arc_visits`` counter.
        """
        self.validate()
        self._check_input(x)
        if stats is not None:
            stats.setdefault("arc_visits", 0)
        omega = self._start_omega(stats)
        for sym in x:
            omega = self._advance(omega, sym, stats)
        return self._finish(omega)

    def forward_prefixes(self, x: Sequence[int]) -> list[float]:
        """Scores of every nonempty prefix of ``x``, computed in one pass.

        Element ``t`` (0-based) equals ``forward(x[:t+1])`` exactly: both run
        the same sweep, so no floating-point divergence is possible.
        """
        self.validate()
        self._check_input(x)
        omega = self._start_omega()
        out = []
        for sym in x:
            omega = self._advance(omega, sym)
            out.append(self._finish(omega))
        return out

    def path_score(self, path: Path) -> float:
        """Initial weight, times each transition weight, times final weight."""
        self.validate()
        path.check_adjacent()
        s = self.semiring
        first_src = path.transitions[0][0]
        acc = s.times(self.initial_weight(first_src), self.semiring.one)
        for src, dst, sym in path.transitions:
            acc = s.times(acc, self.weight(src, dst, sym))
        return s.times(acc, self.final_weight(path.transitions[-1][1]))

    # ------------------------------------------------------------------
    # serialisation
    # ------------------------------------------------------------------

    def to_text(self) -> str:
        """Serialise to the line-oriented text format (see ``from_text``)."""
        lines = [f"WFSA {self.num_states} {self.alphabet_size} {self.semiring.kind}"]
        for q, w in sorted(self.initial.items()):
            lines.append(f"I {q} {w!r}")
        for q, w in sorted(self.final.items()):
            lines.append(f"F {q} {w!r}")
        for src, dst, sym, w in self.arcs():
            tok = "eps" if sym == EPSILON else str(sym)
            lines.append(f"T {src} {dst} {tok} {w!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Wfsa":
        """Parse the text format.

        One item per line: a header ``WFSA <num_states> <alphabet_size>
        <semiring>``, then ``I <state> <weight>``, ``F <state> <weight>``
        and ``T <src> <dst> <symbol|eps> <weight>`` lines in any order.
        Symbols are decimal ids, a single lowercase letter (``a`` = 0), or
        the literal ``eps``; ``-inf`` is a legal maxplus weight.  Blank
        lines and ``#`` comments are ignored.
        """
        automaton: Wfsa | None = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if automaton is None:
                if fields[0] != "WFSA" or len(fields) != 4:
                    raise ParseError("expected header 'WFSA <states> <alphabet> <semiring>'", lineno)
                try:
                    num_states, alphabet_size = int(fields[1]), int(fields[2])
                    automaton = cls(from_name(fields[3]), num_states, alphabet_size)
                except (ValueError, IndexOutOfBounds) as exc:
                    raise ParseError(str(exc), lineno) from None
                continue
            kind = fields[0]
            try:
                if kind == "I" and len(fields) == 3:
                    automaton.set_initial(int(fields[1]), _parse_weight(fields[2]))
                elif kind == "F" and len(fields) == 3:
                    automaton.set_final(int(fields[1]), _parse_weight(fields[2]))
                elif kind == "T" and len(fields) == 5:
                    sym = _parse_symbol(fields[3])
                    automaton.add_arc(int(fields[1]), int(fields[2]), sym, _parse_weight(fields[4]))
                else:
                    raise ParseError(f"malformed line {line!r}", lineno)
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
        if automaton is None:
            raise ParseError("empty automaton description", 1)
        try:
            return automaton.validate()
        except Exception as exc:  # attach no line: the defect is global
            raise ParseError(str(exc)) from exc

    def to_dot(self) -> str:
        """Render as GraphViz DOT: double circles for final states, point
        stubs feeding initial states, ``symbol/weight`` arc labels."""
        lines = ["digraph wfsa {", "  rankdir=LR;", "  node [shape=circle];"]
        for q in range(self.num_states):
            if q in self.final:
                lines.append(f'  q{q} [shape=doublecircle, label="q{q}/{self.final[q]:g}"];')
            else:
                lines.append(f"  q{q};")
        for i, (q, w) in enumerate(sorted(self.initial.items())):
            lines.append(f"  start{i} [shape=point];")
            lines.append(f'  start{i} -> q{q} [label="{w:g}"];')
        for src, dst, sym, w in self.arcs():
            tok = "eps" if sym == EPSILON else str(sym)
            lines.append(f'  q{src} -> q{dst} [label="{tok}/{w:g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    # ------------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        """Structural equality: same semiring, bounds and weight maps."""
        if not isinstance(other, Wfsa):
            return NotImplemented
        return (
            self.semiring == other.semiring
            and self.num_states == other.num_states
            and self.alphabet_size == other.alphabet_size
            and self.transitions == other.transitions
            and self.initial == other.initial
            and self.final == other.final
        )

    __hash__ = None  # mutable until validated

    def __repr__(self) -> str:
        return (f"Wfsa(kind={self.semiring.kind}, states={self.num_states}, "
                f"alphabet={self.alphabet_size}, arcs={len(self.transitions)})")


def _parse_weight(tok: str) -> float:
    w = float(tok)  # accepts '-inf'
    return w


def _parse_symbol(tok: str) -> int:
    if tok == "eps":
        return EPSILON
    if len(tok) == 1 and tok.isalpha() and tok.islower():
        return ord(tok) - ord("a")
    return int(tok)


def validate(a: Wfsa) -> Wfsa:
    return a.validate()


def forward(a: Wfsa, x: Sequence[int]) -> float:
    return a.forward(x)


def forward_prefixes(a: Wfsa, x: Sequence[int]) -> list[float]:
    return a.forward_prefixes(x)


def path_score(a: Wfsa, p: Path) -> float:
    return a.path_score(p)


def string_score_bruteforce(a: Wfsa, x: Sequence[int], max_eps: int) -> float:
    """Sum path scores over explicitly enumerated paths deriving ``x``.

    This is the independent oracle for :meth:`Wfsa.forward`.  It touches the
    raw transition map only, never the Forward machinery.  ``max_eps`` caps
    the number of *consecutive* epsilon arcs a path may take, so with an
    acyclic epsilon graph any ``max_eps >= num_states`` enumerates every
    path exactly.  Guarded against blowup: requires ``num_states <= 8`` and
    ``len(x) + max_eps <= 10``, and aborts if the search exceeds an internal
    step budget.
    """
    if a.num_states > _ORACLE_MAX_STATES or len(x) + max_eps > _ORACLE_MAX_WORK:
        raise OracleTooLarge(
            f"oracle limits exceeded: states={a.num_states}, |x|+max_eps={len(x) + max_eps}")
    s = a.semiring
    out_arcs: dict[int, list[tuple[int, int, float]]] = {}
    for (src, dst, sym), w in sorted(a.transitions.items()):
        out_arcs.setdefault(src, []).append((dst, sym, w))
    n = len(x)
    total = s.zero
    budget = _ORACLE_STEP_BUDGET

    def explore(q: int, i: int, eps_run: int, acc: float) -> None:
        nonlocal total, budget
        budget -= 1
        if budget < 0:
            raise OracleTooLarge("path enumeration exceeded its step budget")
        if i == n:
            fw = a.final.get(q)
            if fw is not None:
                total = s.plus(total, s.times(acc, fw))
        for dst, sym, w in out_arcs.get(q, ()):
            if sym == EPSILON:
                if eps_run < max_eps:
                    explore(dst, i, eps_run + 1, s.times(acc, w))
            elif i < n and sym == x[i]:
                explore(dst, i + 1, 0, s.times(acc, w))

    for q, w in sorted(a.initial.items()):
        explore(q, 0, 0, w)
    return total
