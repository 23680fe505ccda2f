"""Shared generators for randomized automaton and table tests."""

import numpy as np
import pytest

from rationalrec.semiring import MAXPLUS, REAL
from rationalrec.wfsa import EPSILON, Wfsa


def random_wfsa(rng, semiring, max_states=4, max_symbols=3, arc_prob=0.35,
                eps_prob=0.25, allow_eps=True):
    """A small random automaton; epsilon arcs only run from lower to higher
    state index, so the epsilon subgraph is a DAG by construction."""
    n = int(rng.integers(2, max_states + 1))
    v = int(rng.integers(1, max_symbols + 1))
    a = Wfsa(semiring, num_states=n, alphabet_size=v)

    def weight():
        if semiring is MAXPLUS:
            return float(rng.uniform(-2.0, 2.0))
        return float(rng.uniform(-1.0, 1.0))

    for src in range(n):
        for dst in range(n):
            for sym in range(v):
                if rng.random() < arc_prob:
                    a.add_arc(src, dst, sym, weight())
            if allow_eps and src < dst and rng.random() < eps_prob:
                a.add_arc(src, dst, EPSILON, weight())
    a.set_initial(0, semiring.one)
    for q in range(1, n):
        if rng.random() < 0.4:
            a.set_initial(q, weight())
    a.set_final(n - 1, semiring.one)
    for q in range(n - 1):
        if rng.random() < 0.4:
            a.set_final(q, weight())
    return a.validate()


def random_string(rng, alphabet_size, max_len=6):
    length = int(rng.integers(0, max_len + 1))
    return [int(s) for s in rng.integers(alphabet_size, size=length)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
