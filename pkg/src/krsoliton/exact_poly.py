"""Exact rational polynomials for the source polynomial ``h`` and its derivatives.

Coefficients are :class:`fractions.Fraction`, stored lowest power first with
trailing zeros trimmed, so the zero polynomial is the empty tuple.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence, Union

from .errors import InvalidGeometryError

Rational = Fraction
RationalLike = Union[int, Fraction, str]


def as_rational(x: RationalLike | float) -> Fraction:
    """Coerce ``x`` to a Fraction; floats are taken at their exact binary value."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational number")
    return Fraction(x)


def _trim(coeffs: Iterable[Fraction]) -> tuple[Fraction, ...]:
    out = [as_rational(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class RationalPoly:
    coefficients: tuple[Fraction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _trim(self.coefficients))

    @classmethod
    def monomial(cls, power: int, c: RationalLike = 1) -> "RationalPoly":
        return cls((Fraction(0),) * power + (as_rational(c),))

    @property
    def degree(self) -> int:
        """Degree of the polynomial; -1 for the zero polynomial."""
        return len(self.coefficients) - 1

    def is_zero(self) -> bool:
        return not self.coefficients

    def __getitem__(self, power: int) -> Fraction:
        if power < 0:
            raise IndexError("negative power")
        if power >= len(self.coefficients):
            return Fraction(0)
        return self.coefficients[power]

    def __add__(self, other: "RationalPoly") -> "RationalPoly":
        m = max(len(self.coefficients), len(other.coefficients))
        return RationalPoly(tuple(self[i] + other[i] for i in range(m)))

    def __neg__(self) -> "RationalPoly":
        return RationalPoly(tuple(-c for c in self.coefficients))

    def __sub__(self, other: "RationalPoly") -> "RationalPoly":
        return self + (-other)

    def __mul__(self, other: Union["RationalPoly", RationalLike]) -> "RationalPoly":
        if not isinstance(other, RationalPoly):
            c = as_rational(other)
            return RationalPoly(tuple(c * a for a in self.coefficients))
        if self.is_zero() or other.is_zero():
            return RationalPoly()
        out = [Fraction(0)] * (len(self.coefficients) + len(other.coefficients) - 1)
        for i, a in enumerate(self.coefficients):
            if a == 0:
                continue
            for j, b in enumerate(other.coefficients):
                out[i + j] += a * b
        return RationalPoly(tuple(out))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "RationalPoly":
        out = RationalPoly((Fraction(1),))
        for _ in range(k):
            out = out * self
        return out

    def derivative(self) -> "RationalPoly":
        return RationalPoly(tuple(i * c for i, c in enumerate(self.coefficients) if i))

    def __call__(self, x: RationalLike) -> Fraction:
        return eval_exact(self, as_rational(x))

    def shift(self, c: RationalLike) -> "RationalPoly":
        """Return the polynomial ``y -> p(c + y)`` (exact Taylor shift)."""
        c = as_rational(c)
        out = [Fraction(0)] * len(self.coefficients)
        for i, a in enumerate(self.coefficients):
            if a == 0:
                continue
            cp = Fraction(1)
            # a * (c + y)^i = a * sum_j binom(i, j) c^(i-j) y^j
            for j in range(i, -1, -1):
                out[j] += a * comb(i, j) * cp
                cp *= c
        return RationalPoly(tuple(out))

    def to_floats(self) -> list[float]:
        return [float(c) for c in self.coefficients]

    def __repr__(self) -> str:
        if self.is_zero():
            return "RationalPoly(0)"
        terms = []
        for i, c in enumerate(self.coefficients):
            if c:
                terms.append(f"{c}" if i == 0 else f"{c}*x^{i}")
        return "RationalPoly(" + " + ".join(terms) + ")"


def derivative_table(p: RationalPoly) -> tuple[RationalPoly, ...]:
    """``[p, p', ..., p^(deg)]``; the zero polynomial and constants give ``[p]``."""
    table = [p]
    while table[-1].degree > 0:
        table.append(table[-1].derivative())
    return tuple(table)


def eval_exact(p: RationalPoly, x: RationalLike) -> Fraction:
    x = as_rational(x)
    acc = Fraction(0)
    for c in reversed(p.coefficients):
        acc = acc * x + c
    return acc


@dataclass(frozen=True)
class Geometry:
    """Base dimension ``d``, bundle rank ``n``, Einstein constant ``tau`` and twist ``eps``.

    ``lam = tau - n*eps`` is the soliton constant, derived exactly.
    """

    d: int
    n: int
    tau: Fraction
    eps: Fraction
    lam: Fraction = field(init=False)

    def __post_init__(self):
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 0:
            raise InvalidGeometryError(f"d must be a nonnegative integer, got {self.d!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise InvalidGeometryError(f"n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "n", int(self.n))
        try:
            tau = as_rational(self.tau)
            eps = as_rational(self.eps)
        except (TypeError, ValueError) as exc:
            raise InvalidGeometryError(str(exc)) from None
        if eps < 0:
            raise InvalidGeometryError(f"eps must be >= 0, got {eps}")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "lam", tau - self.n * eps)

    @property
    def degree(self) -> int:
        return self.d + self.n

    def rescaled(self, kappa: RationalLike) -> "Geometry":
        """Geometry after ``omega_M -> kappa * omega_M``."""
        kappa = as_rational(kappa)
        return Geometry(self.d, self.n, self.tau / kappa, self.eps / kappa)

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "tau": str(self.tau), "eps": str(self.eps),
                "lambda": str(self.lam)}


def build_h(geom: Geometry) -> RationalPoly:
    """Expand ``tau (1+eps x)^d x^n - n (1+eps x)^(d+1) x^(n-1)`` exactly."""
    d, n, tau, eps = geom.d, geom.n, geom.tau, geom.eps
    coeffs = [Fraction(0)] * (d + n + 1)
    for j in range(d + 1):
        coeffs[j + n] += tau * comb(d, j) * eps**j
    for j in range(d + 2):
        coeffs[j + n - 1] -= n * comb(d + 1, j) * eps**j
    return RationalPoly(tuple(coeffs))


def derivatives_at(table: Sequence[RationalPoly], x: RationalLike) -> tuple[Fraction, ...]:
    """Exact values ``p^(k)(x)`` for every entry of a derivative table."""
    x = as_rational(x)
    return tuple(eval_exact(p, x) for p in table)
