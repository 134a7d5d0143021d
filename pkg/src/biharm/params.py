"""Problem configuration shared by every computation."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParams


def sobolev_exponent(n: int) -> float:
    """Threshold exponent (n+4)/(n-4) below which no positive entire solution exists."""
    if n <= 4:
        raise InvalidParams(f"dimension must exceed 4, got n={n}")
    return (n + 4.0) / (n - 4.0)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension n and exponent p for Delta^2 phi = phi^p.

    Requires n >= 5 and p strictly above the Sobolev exponent (n+4)/(n-4).
    The scaling exponent m = 4/(p-1) is always derived from p, never stored.
    """

    n: int
    p: float

    def __post_init__(self):
        if not isinstance(self.n, int):
            raise InvalidParams(f"n must be an integer, got {self.n!r}")
        if self.n < 5:
            raise InvalidParams(f"n >= 5 required, got n={self.n}")
        if not math.isfinite(self.p):
            raise InvalidParams(f"p must be finite, got p={self.p}")
        if self.p <= sobolev_exponent(self.n):
            raise InvalidParams(
                f"p={self.p} is not supercritical: need p > (n+4)/(n-4) = "
                f"{sobolev_exponent(self.n):.6g} for n={self.n}"
            )

    @property
    def m(self) -> float:
        """Decay exponent m = 4/(p-1) of the singular solution."""
        return 4.0 / (self.p - 1.0)
