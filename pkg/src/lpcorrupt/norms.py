"""p-norm parameter type and numerically careful norm/distance evaluation.

``p`` ranges over the closed extended interval [0, inf]. Values below 1 are
not norms in the mathematical sense but are accepted as parameters: p=0 is the
ratio-of-changed-components pseudo-distance and 0<p<1 uses the same power
formula as true norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["PNorm", "lp_norm", "lp_distance"]


@dataclass(frozen=True, order=False)
class PNorm:
    """A p-norm parameter: zero, a finite positive real, or infinity."""

    value: float

    def __post_init__(self) -> None:
        v = float(self.value)
        if math.isnan(v) or v < 0:
            raise ValueError(f"p must be a nonnegative extended real, got {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def is_zero(self) -> bool:
        return self.value == 0.0

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.value)

    @property
    def is_finite(self) -> bool:
        return not self.is_zero and not self.is_inf

    @classmethod
    def parse(cls, text: str) -> "PNorm":
        t = text.strip().lower()
        if t in ("inf", "infinity", "linf"):
            return cls(math.inf)
        try:
            return cls(float(t))
        except ValueError:
            raise ValueError(f"cannot parse p-norm value {text!r}") from None

    def __str__(self) -> str:
        if self.is_inf:
            return "inf"
        if self.value == int(self.value):
            return str(int(self.value))
        return repr(self.value)

    @property
    def label(self) -> str:
        """Corruption label used in error tables and output layouts, e.g. 'L0.5', 'Linf'."""
        return f"L{self}"


def lp_norm(vec: np.ndarray, p: PNorm) -> float:
    """p-norm of a vector, max-scaled so large/small p neither overflow nor underflow.

    p=0 returns the fraction of nonzero components (ratio convention).
    """
    v = np.abs(np.asarray(vec, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("empty vector")
    if p.is_zero:
        return float(np.count_nonzero(v)) / v.size
    if p.is_inf:
        return float(v.max())
    m = float(v.max())
    if m == 0.0:
        return 0.0
    return m * float(np.sum((v / m) ** p.value) ** (1.0 / p.value))


def lp_distance(a: np.ndarray, b: np.ndarray, p: PNorm) -> float:
    """p-norm distance between two equal-length vectors.

    For p=0 the result is the fraction of differing components, matching the
    ratio convention used for L0 corruption budgets.
    """
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.shape != bv.shape:
        raise ValueError(f"length mismatch: {av.size} vs {bv.size}")
    return lp_norm(av - bv, p)
