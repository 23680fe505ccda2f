import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rationalrec.errors import ConfigError, NonMemberElement
from rationalrec.semiring import MAXPLUS, NEG_INF, REAL, from_name

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
maxplus_members = finite | st.just(NEG_INF)


def test_real_ops_definitional():
    assert REAL.plus(2.0, 3.0) == 5.0
    assert REAL.times(2.0, 3.0) == 6.0


def test_maxplus_ops():
    assert MAXPLUS.plus(2.0, 3.0) == 3.0
    assert MAXPLUS.times(2.0, 3.0) == 5.0
    assert MAXPLUS.plus(NEG_INF, 7.0) == 7.0
    assert MAXPLUS.times(NEG_INF, 3.0) == NEG_INF


def test_identities():
    for s in (REAL, MAXPLUS):
        for a in (-3.5, 0.0, 2.25):
            assert s.plus(s.zero, a) == a
            assert s.times(s.one, a) == a
            assert s.times(s.zero, a) == s.zero


def test_nan_rejected():
    for s in (REAL, MAXPLUS):
        with pytest.raises(NonMemberElement):
            s.plus(float("nan"), 1.0)
        with pytest.raises(NonMemberElement):
            s.times(1.0, float("nan"))


def test_real_rejects_infinities():
    with pytest.raises(NonMemberElement):
        REAL.plus(float("inf"), 1.0)
    with pytest.raises(NonMemberElement):
        REAL.times(NEG_INF, 1.0)


def test_maxplus_rejects_positive_infinity():
    with pytest.raises(NonMemberElement):
        MAXPLUS.plus(float("inf"), 1.0)


def test_from_name():
    assert from_name("real") is REAL
    assert from_name("maxplus") is MAXPLUS
    with pytest.raises(ConfigError):
        from_name("tropical-min")


@given(finite, finite, finite)
def test_real_laws(a, b, c):
    tol = 1e-9

    def close(x, y):
        return abs(x - y) <= tol * max(1.0, abs(x), abs(y))

    assert close(REAL.plus(REAL.plus(a, b), c), REAL.plus(a, REAL.plus(b, c)))
    assert close(REAL.times(REAL.times(a, b), c), REAL.times(a, REAL.times(b, c)))
    assert REAL.plus(a, b) == REAL.plus(b, a)
    assert close(REAL.times(a, REAL.plus(b, c)),
                 REAL.plus(REAL.times(a, b), REAL.times(a, c)))
    assert close(REAL.times(REAL.plus(a, b), c),
                 REAL.plus(REAL.times(a, c), REAL.times(b, c)))


@given(maxplus_members, maxplus_members, maxplus_members)
def test_maxplus_laws_exact(a, b, c):
    assert MAXPLUS.plus(MAXPLUS.plus(a, b), c) == MAXPLUS.plus(a, MAXPLUS.plus(b, c))
    assert MAXPLUS.times(MAXPLUS.times(a, b), c) == MAXPLUS.times(a, MAXPLUS.times(b, c))
    assert MAXPLUS.plus(a, b) == MAXPLUS.plus(b, a)
    assert MAXPLUS.times(a, MAXPLUS.plus(b, c)) == \
        MAXPLUS.plus(MAXPLUS.times(a, b), MAXPLUS.times(a, c))


def test_sum_prod_fold():
    assert REAL.sum([1.0, 2.0, 3.0]) == 6.0
    assert REAL.prod([2.0, 3.0]) == 6.0
    assert MAXPLUS.sum([]) == NEG_INF
    assert MAXPLUS.prod([]) == 0.0
    assert MAXPLUS.sum([1.0, 5.0, -2.0]) == 5.0
    assert MAXPLUS.prod([1.0, 5.0]) == 6.0


def test_descriptor_is_hashable_value():
    assert REAL == from_name("real")
    assert len({REAL, MAXPLUS, from_name("real")}) == 2


def test_bulk_identity_samples():
    rng = np.random.default_rng(0)
    for s in (REAL, MAXPLUS):
        xs = rng.uniform(-50, 50, size=500)
        for a in xs:
            assert s.plus(s.zero, float(a)) == a
            assert s.times(s.one, float(a)) == a
            assert s.times(s.zero, float(a)) == s.zero
    assert math.isinf(MAXPLUS.zero)
