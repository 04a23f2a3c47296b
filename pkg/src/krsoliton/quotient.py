"""Kähler potentials of the symplectic quotients of C^(m+n) by the weight (1, -1) circle action.

Points are described by the norm aggregates ``A = 1 + |u|^2`` and ``B = |xi|^2``;
every potential here depends only on those and on the momentum level ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidGeometryError

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class QuotientPoint:
    A: float
    B: float
    a: float

    def __post_init__(self):
        _check(self.a, self.A, self.B)

    @classmethod
    def from_norms(cls, u_norm2: float, xi_norm2: float, a: float) -> "QuotientPoint":
        return cls(1.0 + u_norm2, xi_norm2, a)


def _check(a: float, A: float, B: float) -> None:
    if not (A > 0 and math.isfinite(A)):
        raise InvalidGeometryError(f"A must be positive, got {A}")
    if not (B >= 0 and math.isfinite(B)):
        raise InvalidGeometryError(f"B must be nonnegative, got {B}")
    if not math.isfinite(a):
        raise InvalidGeometryError("a must be finite")
    if B == 0 and a < 0:
        raise InvalidGeometryError("with B = 0 the momentum only takes positive values")


def upstairs_potential(A, B, r1):
    """``phi = e^r1 A + e^-r1 B`` and its momentum ``e^r1 A - e^-r1 B``."""
    if np.any(np.asarray(A) <= 0) or np.any(np.asarray(B) < 0):
        raise InvalidGeometryError("need A > 0 and B >= 0")
    up, down = np.exp(r1) * A, np.exp(-np.asarray(r1)) * B
    return up + down, up - down


def _critical_x(a: float, A: float, B: float) -> float:
    """Positive root ``x = e^r1`` of ``A x^2 - a x - B = 0``."""
    S = math.sqrt(a * a + 4 * A * B)
    if a >= 0:
        return (a + S) / (2 * A)
    return 2 * B / (S - a)


def legendre_numeric(A: float, B: float, a: float) -> float:
    """Legendre transform ``phi(r1*) - a r1*`` at the critical point of ``phi - a r1``.

    The quadratic root seeds a few Newton steps on ``dphi/dr1 = a`` in ``r1``.
    """
    _check(a, A, B)
    if B == 0 and a == 0:
        return 0.0
    r = math.log(_critical_x(a, A, B))
    for _ in range(4):
        eu, ed = math.exp(r) * A, math.exp(-r) * B
        g = eu - ed - a
        step = g / (eu + ed)
        r -= step
        if abs(step) <= 1e-16 * max(1.0, abs(r)):
            break
    return math.exp(r) * A + math.exp(-r) * B - a * r


def phi_a_closed(a: float, A: float, B: float) -> float:
    """``a log A + S - a log(a + S) + a log 2`` with ``S = sqrt(a^2 + 4AB)``.

    For ``a < 0`` the logarithm uses ``a + S = 4AB / (S - a)`` to avoid cancellation.
    """
    _check(a, A, B)
    if a == 0:
        return 2.0 * math.sqrt(A * B)
    S = math.sqrt(a * a + 4 * A * B)
    log_aS = math.log(a + S) if a > 0 else math.log(4 * A * B) - math.log(S - a)
    return a * math.log(A) + S - a * log_aS + a * LOG2


def phi0_closed(A_u: float, A_v: float, zeta_sq: float) -> float:
    """Cone potential ``2 sqrt(A_u A_v |zeta|^2)``."""
    if A_u < 1 or A_v < 1 or zeta_sq < 0:
        raise InvalidGeometryError("need A_u >= 1, A_v >= 1 and |zeta|^2 >= 0")
    return 2.0 * math.sqrt(A_u * A_v * zeta_sq)


def degeneration_sweep(A_u: float, A_v: float, zeta_sq: float,
                       levels=(1.0, 0.1, 0.01)) -> list[float]:
    """``|Phi_a - Phi_0|`` along ``a -> 0`` with ``B = A_v |zeta|^2``."""
    target = phi0_closed(A_u, A_v, zeta_sq)
    return [abs(phi_a_closed(a, A_u, A_v * zeta_sq) - target) for a in levels]


@dataclass(frozen=True)
class ChartPair:
    """A point of ``C^(m+n)`` seen in both quotient charts.

    ``(A, B)`` use ``u = x_i/x_1, xi = x_1 y``; ``(A_mirror, B_mirror)`` use
    ``v = y_a/y_1, eta = y_1 x``.  ``log_x1y1`` is ``log |x_1 y_1|^2``.
    """

    a: float
    A: float
    B: float
    A_mirror: float
    B_mirror: float
    log_x1: float
    log_x1y1: float
    norm2: float


def chart_pair(x, y) -> ChartPair:
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x[0] == 0 or y[0] == 0:
        raise InvalidGeometryError("both charts need x_1 != 0 and y_1 != 0")
    nx, ny = float(np.sum(np.abs(x) ** 2)), float(np.sum(np.abs(y) ** 2))
    x1, y1 = abs(x[0]) ** 2, abs(y[0]) ** 2
    return ChartPair(a=nx - ny, A=nx / x1, B=x1 * ny, A_mirror=ny / y1, B_mirror=y1 * nx,
                     log_x1=math.log(x1), log_x1y1=math.log(x1 * y1), norm2=nx + ny)
