"""Semiring-generic weighted automata, the recurrent cells they induce,
machine-checked equivalence between the two, and a desk-scale training
harness with a minimal reverse-mode autodiff engine."""

__version__ = "0.1.0"

from .semiring import MAXPLUS, REAL, SemiringDescriptor
from .wfsa import EPSILON, Path, Wfsa

__all__ = [
    "MAXPLUS",
    "REAL",
    "SemiringDescriptor",
    "EPSILON",
    "Path",
    "Wfsa",
    "__version__",
]
