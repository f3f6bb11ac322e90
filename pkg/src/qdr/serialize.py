"""Canonical text form and structured (JSON-ready) form of polynomials.

Text grammar (whitespace is insignificant)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" INT)?
    atom   := INT | "i" | "eps" | "hbar" | PARAM
            | SYM "[" FIELD "," INT "]" | SYM | "(" expr ")"
    SYM    := "u" | "v"          FIELD := INT | declared alias (e.g. omega)

A bare ``u`` means ``u[1,0]``.  Division is only allowed by a nonzero
numeric constant.  The printer emits every term as
``(coeff)*eps^a*hbar^b*params*u[f,j]^k...`` with terms sorted by
(hbar power, eps power, descending u-degree, monomial, params).
"""

from __future__ import annotations

import re
from typing import Mapping

from gmpy2 import mpq

from .errors import ParseError
from .jets import UNBOUNDED, QDiffPoly, TruncationSpec
from .scalars import (
    GaussianRational,
    I,
    check_parameter,
    format_gaussian,
    format_params,
    format_rational,
)

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def term_sort_key(key) -> tuple:
    e, h, mono, params = key
    return (h, e, -len(mono), mono, params)


def format_mono(mono, symbol: str = "u") -> str:
    parts = []
    i = 0
    while i < len(mono):
        var = mono[i]
        k = 1
        while i + k < len(mono) and mono[i + k] == var:
            k += 1
        s = f"{symbol}[{var[0]},{var[1]}]"
        parts.append(s if k == 1 else f"{s}^{k}")
        i += k
    return "*".join(parts) if parts else "1"


def format_term(key, coeff: GaussianRational, symbol: str = "u") -> str:
    e, h, mono, params = key
    factors = [f"({format_gaussian(coeff)})"]
    if e:
        factors.append("eps" if e == 1 else f"eps^{e}")
    if h:
        factors.append("hbar" if h == 1 else f"hbar^{h}")
    factors.extend(format_params(params))
    if mono:
        factors.append(format_mono(mono, symbol))
    return "*".join(factors)


def format_qdp(f: QDiffPoly, symbol: str = "u") -> str:
    if not f.terms:
        return "0"
    return " + ".join(format_term(k, f.terms[k], symbol) for k in sorted(f.terms, key=term_sort_key))


class _Parser:
    def __init__(self, text: str, nfields: int, trunc: TruncationSpec, aliases: Mapping[str, int]):
        self.text = text
        self.nfields = nfields
        self.trunc = trunc
        self.aliases = dict(aliases)
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text: str) -> list[tuple[str, str]]:
        out = []
        for num, name, sym in _TOKEN.findall(text):
            if num:
                out.append(("num", num))
            elif name:
                out.append(("name", name))
            elif sym.strip():
                out.append(("sym", sym))
        return out

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else ("end", "")

    def take(self, kind=None, value=None):
        tok = self.peek()
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            raise ParseError(f"expected {want!r} but found {tok[1] or 'end of input'!r} in {self.text!r}")
        self.pos += 1
        return tok

    def const(self, c) -> QDiffPoly:
        return QDiffPoly.constant(c, self.nfields, self.trunc)

    def parse(self) -> QDiffPoly:
        if not self.tokens:
            raise ParseError("empty expression")
        result = self.expr()
        if self.peek()[0] != "end":
            raise ParseError(f"unexpected {self.peek()[1]!r} in {self.text!r}")
        return result

    def expr(self) -> QDiffPoly:
        result = self.term()
        while self.peek() in (("sym", "+"), ("sym", "-")):
            op = self.take()[1]
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self) -> QDiffPoly:
        result = self.unary()
        while self.peek() in (("sym", "*"), ("sym", "/")):
            op = self.take()[1]
            rhs = self.unary()
            if op == "*":
                result = result * rhs
            else:
                result = result / self._numeric(rhs)
        return result

    def _numeric(self, p: QDiffPoly) -> GaussianRational:
        if len(p.terms) != 1:
            if not p.terms:
                raise ParseError("division by zero")
            raise ParseError("can only divide by a numeric constant")
        (key, c), = p.terms.items()
        if key != (0, 0, (), ()):
            raise ParseError("can only divide by a numeric constant")
        return c

    def unary(self) -> QDiffPoly:
        if self.peek() == ("sym", "-"):
            self.take()
            return -self.unary()
        if self.peek() == ("sym", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> QDiffPoly:
        base = self.atom()
        if self.peek() == ("sym", "^"):
            self.take()
            k = int(self.take("num")[1])
            return base**k
        return base

    def atom(self) -> QDiffPoly:
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return self.const(mpq(int(val)))
        if kind == "sym" and val == "(":
            self.take()
            inner = self.expr()
            self.take("sym", ")")
            return inner
        if kind != "name":
            raise ParseError(f"unexpected {val or 'end of input'!r} in {self.text!r}")
        self.take()
        if val == "i":
            return self.const(I)
        if val == "eps":
            return QDiffPoly.eps(1, self.nfields, self.trunc)
        if val == "hbar":
            return QDiffPoly.hbar(1, self.nfields, self.trunc)
        if val in ("u", "v"):
            if self.peek() != ("sym", "["):
                return QDiffPoly.u(1, 0, self.nfields, self.trunc)
            self.take()
            fld_tok = self.take()
            if fld_tok[0] == "num":
                fld = int(fld_tok[1])
            elif fld_tok[1] in self.aliases:
                fld = self.aliases[fld_tok[1]]
            else:
                raise ParseError(f"unknown field {fld_tok[1]!r}")
            if not 1 <= fld <= self.nfields:
                raise ParseError(f"field {fld} outside 1..{self.nfields}")
            self.take("sym", ",")
            jet = int(self.take("num")[1])
            self.take("sym", "]")
            return QDiffPoly.u(fld, jet, self.nfields, self.trunc)
        check_parameter(val)
        return QDiffPoly.param(val, 1, self.nfields, self.trunc)


def parse_qdp(
    text: str,
    nfields: int = 1,
    trunc: TruncationSpec = UNBOUNDED,
    aliases: Mapping[str, int] | None = None,
) -> QDiffPoly:
    """Parse the canonical text grammar into a :class:`QDiffPoly`."""
    return _Parser(text, nfields, trunc, aliases or {}).parse()


# --- structured form -----------------------------------------------------------


def _trunc_to_dict(t: TruncationSpec) -> dict:
    return {"E": t.E, "H": t.H, "U": t.U}


def to_structured(f: QDiffPoly, setup: dict | None = None) -> dict:
    """JSON-ready mapping ``{setup, truncation, terms}``."""
    terms = []
    for key in sorted(f.terms, key=term_sort_key):
        e, h, mono, params = key
        c = f.terms[key]
        terms.append(
            {
                "eps": e,
                "hbar": h,
                "params": {name: k for name, k in params},
                "monomial": [[fld, j] for fld, j in mono],
                "coeff": {"re": format_rational(c.re), "im": format_rational(c.im)},
            }
        )
    return {
        "setup": dict(setup) if setup else {"nfields": f.nfields},
        "truncation": _trunc_to_dict(f.trunc),
        "terms": terms,
    }


def from_structured(data: dict) -> QDiffPoly:
    try:
        nfields = int(data.get("setup", {}).get("nfields", 1))
        tr = data.get("truncation") or {}
        trunc = TruncationSpec(tr.get("E"), tr.get("H"), tr.get("U"))
        terms = {}
        for t in data["terms"]:
            key = (
                int(t["eps"]),
                int(t["hbar"]),
                tuple((int(fld), int(j)) for fld, j in t["monomial"]),
                tuple(sorted((str(n), int(k)) for n, k in t.get("params", {}).items())),
            )
            c = GaussianRational(t["coeff"]["re"], t["coeff"].get("im", "0"))
            terms[key] = terms.get(key, GaussianRational()) + c
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed structured polynomial: {exc}") from exc
    return QDiffPoly(terms, trunc, nfields)


__all__ = [
    "format_qdp",
    "format_term",
    "format_mono",
    "parse_qdp",
    "to_structured",
    "from_structured",
    "term_sort_key",
]
