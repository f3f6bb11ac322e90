"""Exact coefficients: Gaussian rationals times monomials in formal parameters.

Everything the engine computes has coefficients in Q(i), optionally
multiplied by commuting formal parameters such as ``mu`` (ILW) or ``q``
(Toda).  Rationals are ``gmpy2.mpq`` which are always kept in lowest terms
with a positive denominator.
"""

from __future__ import annotations

import threading
from fractions import Fraction
from typing import Iterable, Mapping

from gmpy2 import mpq

from .errors import ParseError, UndeclaredParameter

__all__ = [
    "GaussianRational",
    "Scalar",
    "ScalarSum",
    "ZERO",
    "ONE",
    "I",
    "as_rational",
    "declare_parameters",
    "declared_parameters",
    "check_parameter",
    "param_mul",
    "format_rational",
    "format_params",
]

_RATIONAL_TYPES = (int, Fraction, type(mpq(0)))


def as_rational(x) -> mpq:
    """Coerce int, Fraction, mpq or a ``"a/b"`` string to ``mpq``."""
    if isinstance(x, str):
        try:
            return mpq(x.strip())
        except ValueError as exc:
            raise ParseError(f"not a rational: {x!r}") from exc
    if isinstance(x, float):
        raise TypeError("floats are not exact; pass a Fraction or a string")
    return mpq(x)


class GaussianRational:
    """``re + im*i`` with exact rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = as_rational(re)
        self.im = as_rational(im)

    @classmethod
    def _raw(cls, re: mpq, im: mpq) -> "GaussianRational":
        obj = object.__new__(cls)
        obj.re = re
        obj.im = im
        return obj

    @classmethod
    def coerce(cls, x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, complex):
            raise TypeError("complex floats are not exact")
        return cls._raw(as_rational(x), mpq(0))

    def __add__(self, other):
        if not isinstance(other, GaussianRational):
            if not isinstance(other, _RATIONAL_TYPES):
                return NotImplemented
            return GaussianRational._raw(self.re + other, self.im)
        return GaussianRational._raw(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational._raw(-self.re, -self.im)

    def __sub__(self, other):
        if not isinstance(other, GaussianRational):
            if not isinstance(other, _RATIONAL_TYPES):
                return NotImplemented
            return GaussianRational._raw(self.re - other, self.im)
        return GaussianRational._raw(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, GaussianRational):
            if not isinstance(other, _RATIONAL_TYPES):
                return NotImplemented
            return GaussianRational._raw(self.re * other, self.im * other)
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b and not d:
            return GaussianRational._raw(a * c, b)
        return GaussianRational._raw(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def conjugate(self) -> "GaussianRational":
        return GaussianRational._raw(self.re, -self.im)

    def norm(self) -> mpq:
        return self.re * self.re + self.im * self.im

    def __truediv__(self, other):
        if not isinstance(other, GaussianRational):
            if not isinstance(other, _RATIONAL_TYPES):
                return NotImplemented
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return GaussianRational._raw(self.re / other, self.im / other)
        n = other.norm()
        if not n:
            raise ZeroDivisionError("division by zero")
        return (self * other.conjugate()) / n

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return ONE / (self ** (-k))
        result, base = ONE, self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, _RATIONAL_TYPES):
            return not self.im and self.re == other
        return NotImplemented

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    @property
    def is_real(self) -> bool:
        return not self.im

    def __repr__(self):
        return f"GaussianRational({format_rational(self.re)!r}, {format_rational(self.im)!r})"

    def __str__(self):
        return format_gaussian(self)


ZERO = GaussianRational._raw(mpq(0), mpq(0))
ONE = GaussianRational._raw(mpq(1), mpq(0))
I = GaussianRational._raw(mpq(0), mpq(1))


def format_rational(q) -> str:
    q = mpq(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _format_imag(q) -> str:
    if q == 1:
        return "i"
    if q == -1:
        return "-i"
    return f"{format_rational(q)}*i"


def format_gaussian(z: GaussianRational) -> str:
    if not z.im:
        return format_rational(z.re)
    if not z.re:
        return _format_imag(z.im)
    sign = "+" if z.im > 0 else "-"
    return f"{format_rational(z.re)} {sign} {_format_imag(abs(z.im))}"


# --- formal parameters -------------------------------------------------------

_PARAM_LOCK = threading.Lock()
_DECLARED: set[str] = set()
_RESERVED = {"i", "u", "v", "eps", "hbar"}


def declare_parameters(*names: str) -> None:
    """Register formal parameter names for this session."""
    with _PARAM_LOCK:
        for name in names:
            if not name.isidentifier() or name in _RESERVED:
                raise ValueError(f"invalid parameter name {name!r}")
            _DECLARED.add(name)


def declared_parameters() -> frozenset[str]:
    with _PARAM_LOCK:
        return frozenset(_DECLARED)


def check_parameter(name: str) -> None:
    if name not in _DECLARED:
        raise UndeclaredParameter(
            f"formal parameter {name!r} has not been declared "
            f"(declared: {sorted(_DECLARED) or 'none'})"
        )


ParamMono = tuple  # tuple[tuple[str, int], ...], sorted by name, exponents > 0


def make_params(exps: Mapping[str, int] | Iterable[tuple[str, int]]) -> ParamMono:
    items = exps.items() if isinstance(exps, Mapping) else exps
    merged: dict[str, int] = {}
    for name, k in items:
        if k < 0:
            raise ValueError("parameter exponents must be non-negative")
        merged[name] = merged.get(name, 0) + k
    return tuple(sorted((n, k) for n, k in merged.items() if k))


def param_mul(a: ParamMono, b: ParamMono) -> ParamMono:
    if not a:
        return b
    if not b:
        return a
    merged = dict(a)
    for name, k in b:
        merged[name] = merged.get(name, 0) + k
    return tuple(sorted(merged.items()))


def format_params(p: ParamMono) -> list[str]:
    return [name if k == 1 else f"{name}^{k}" for name, k in p]


class Scalar:
    """A Gaussian rational times one monomial in formal parameters."""

    __slots__ = ("coeff", "params")

    def __init__(self, coeff=1, params: Mapping[str, int] | ParamMono = ()):
        self.coeff = GaussianRational.coerce(coeff)
        self.params = make_params(params)
        for name, _ in self.params:
            check_parameter(name)

    def __mul__(self, other):
        if not isinstance(other, Scalar):
            other = Scalar(other)
        out = object.__new__(Scalar)
        out.coeff = self.coeff * other.coeff
        out.params = param_mul(self.params, other.params)
        return out

    __rmul__ = __mul__

    def __add__(self, other):
        return ScalarSum.of(self) + ScalarSum.of(other)

    __radd__ = __add__

    def __neg__(self):
        return Scalar(-self.coeff, self.params)

    def __eq__(self, other):
        if isinstance(other, ScalarSum):
            return ScalarSum.of(self) == other
        if not isinstance(other, Scalar):
            try:
                other = Scalar(other)
            except TypeError:
                return NotImplemented
        if not self.coeff and not other.coeff:
            return True
        return self.coeff == other.coeff and self.params == other.params

    def __hash__(self):
        return hash((self.coeff, self.params)) if self.coeff else 0

    def __repr__(self):
        return f"Scalar({str(self)!r})"

    def __str__(self):
        return format_scalar(self.coeff, self.params)

    @classmethod
    def parse(cls, text: str) -> "Scalar":
        total = ScalarSum.parse(text)
        if len(total.terms) > 1:
            raise ParseError(f"{text!r} is a sum, not a single scalar")
        if not total.terms:
            return cls(0)
        (params, coeff), = total.terms.items()
        return cls(coeff, params)


def format_scalar(coeff: GaussianRational, params: ParamMono) -> str:
    c = format_gaussian(coeff)
    if coeff.re and coeff.im and params:
        c = f"({c})"
    return "*".join([c] + format_params(params))


class ScalarSum:
    """A polynomial in the formal parameters with Q(i) coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[ParamMono, GaussianRational] | None = None):
        self.terms = {p: GaussianRational.coerce(c) for p, c in (terms or {}).items() if c}

    @classmethod
    def of(cls, x) -> "ScalarSum":
        if isinstance(x, ScalarSum):
            return x
        if not isinstance(x, Scalar):
            x = Scalar(x)
        return cls({x.params: x.coeff})

    def __add__(self, other):
        other = ScalarSum.of(other)
        out = dict(self.terms)
        for p, c in other.terms.items():
            s = out.get(p, ZERO) + c
            if s:
                out[p] = s
            else:
                out.pop(p, None)
        return ScalarSum(out)

    __radd__ = __add__

    def __neg__(self):
        return ScalarSum({p: -c for p, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-ScalarSum.of(other))

    def __mul__(self, other):
        other = ScalarSum.of(other)
        out: dict = {}
        for p1, c1 in self.terms.items():
            for p2, c2 in other.terms.items():
                p = param_mul(p1, p2)
                out[p] = out.get(p, ZERO) + c1 * c2
        return ScalarSum(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        try:
            other = ScalarSum.of(other)
        except TypeError:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def __str__(self):
        if not self.terms:
            return "0"
        return " + ".join(format_scalar(c, p) for p, c in sorted(self.terms.items()))

    def __repr__(self):
        return f"ScalarSum({str(self)!r})"

    @classmethod
    def parse(cls, text: str) -> "ScalarSum":
        from .serialize import parse_qdp

        poly = parse_qdp(text)
        out: dict = {}
        for (e, h, mono, params), c in poly.terms.items():
            if e or h or mono:
                raise ParseError(f"{text!r} contains eps, hbar or jet variables")
            out[params] = c
        return cls(out)
