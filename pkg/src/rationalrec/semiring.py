"""Scalar semiring algebra underlying automata scoring and the recurrent cells.

Two instances are supported, both over double-precision floats:

* ``real``     -- plus-times over finite doubles, identities 0 and 1.
* ``maxplus``  -- max as addition and + as multiplication over
  R union {-inf}, identities -inf and 0.

The additive identity of ``maxplus`` is the IEEE -inf value, which absorbs
correctly under + without drift.  Descriptors are plain values so the
semiring can be selected from configuration at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import ConfigError, NonMemberElement

NEG_INF = float("-inf")


@dataclass(frozen=True)
class SemiringDescriptor:
    """Value-level description of a semiring: kind tag plus its identities.

    Instances are immutable and the operations are pure, so descriptors are
    safe to share across threads.
    """

    kind: str  # "real" | "maxplus"
    zero: float
    one: float

    def is_member(self, a: float) -> bool:
        """Whether ``a`` belongs to the carrier set."""
        if math.isnan(a):
            return False
        if self.kind == "real":
            return math.isfinite(a)
        return math.isfinite(a) or a == NEG_INF

    def check_member(self, a: float) -> float:
        if not self.is_member(a):
            raise NonMemberElement(f"{a!r} is not in the {self.kind} carrier")
        return a

    def plus(self, a: float, b: float) -> float:
        """Semiring addition: a+b (real) or max(a, b) (maxplus)."""
        self.check_member(a)
        self.check_member(b)
        if self.kind == "real":
            return a + b
        return a if a >= b else b

    def times(self, a: float, b: float) -> float:
        """Semiring multiplication: a*b (real) or a+b (maxplus)."""
        self.check_member(a)
        self.check_member(b)
        if self.kind == "real":
            return a * b
        return a + b  # -inf absorbs under IEEE addition

    def sum(self, values: Iterable[float]) -> float:
        acc = self.zero
        for v in values:
            acc = self.plus(acc, v)
        return acc

    def prod(self, values: Iterable[float]) -> float:
        acc = self.one
        for v in values:
            acc = self.times(acc, v)
        return acc


REAL = SemiringDescriptor(kind="real", zero=0.0, one=1.0)
MAXPLUS = SemiringDescriptor(kind="maxplus", zero=NEG_INF, one=0.0)

_BY_NAME = {"real": REAL, "maxplus": MAXPLUS}


def from_name(name: str) -> SemiringDescriptor:
    """Resolve the config key ``semiring = "real" | "maxplus"``."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ConfigError(f"unknown semiring {name!r}; expected one of {sorted(_BY_NAME)}") from None


def plus(s: SemiringDescriptor, a: float, b: float) -> float:
    return s.plus(a, b)


def times(s: SemiringDescriptor, a: float, b: float) -> float:
    return s.times(a, b)
