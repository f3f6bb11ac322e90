"""Quantum differential polynomials and the calculus acting on them.

A :class:`QDiffPoly` is a sparse map

    (eps_pow, hbar_pow, monomial, params) -> GaussianRational

where ``monomial`` is a sorted tuple of ``(field, jet)`` pairs with
repetition (``u^1_0 u^1_0 u^1_2`` is ``((1, 0), (1, 0), (1, 2))``) and
``params`` is a sorted tuple of ``(name, exponent)`` pairs.

Power series are made finite by a :class:`TruncationSpec`.  The bound ``U``
limits the filtration ``u_degree + hbar_pow``; the commutator lowers the
u-degree by two per extra power of hbar, so a pure u-degree cut would not be
closed under the recursion while this combined one is.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping


from .errors import IncompatibleSetup, NotExact, WeightOneObstruction
from .scalars import (
    ONE,
    ZERO,
    GaussianRational,
    Scalar,
    ScalarSum,
    check_parameter,
    make_params,
    param_mul,
)

Mono = tuple  # tuple[tuple[int, int], ...]
Key = tuple  # (eps, hbar, Mono, ParamMono)


def _min(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _shift(a: int | None, by: int) -> int | None:
    return None if a is None else a + by


@dataclass(frozen=True)
class TruncationSpec:
    """Bounds on eps power ``E``, hbar power ``H`` and ``u_degree + hbar`` ``U``.

    ``None`` means unbounded.
    """

    E: int | None = None
    H: int | None = None
    U: int | None = None

    def __post_init__(self):
        for name in ("E", "H", "U"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"truncation {name} must be non-negative, got {v}")

    def allows(self, eps: int, hbar: int, udeg: int) -> bool:
        return (
            (self.E is None or eps <= self.E)
            and (self.H is None or hbar <= self.H)
            and (self.U is None or udeg + hbar <= self.U)
        )

    def common(self, other: "TruncationSpec") -> "TruncationSpec":
        if self == other:
            return self
        return TruncationSpec(_min(self.E, other.E), _min(self.H, other.H), _min(self.U, other.U))

    def shifted(self, dE: int = 0, dH: int = 0, dU: int = 0) -> "TruncationSpec":
        def clamp(v):
            return None if v is None else max(v, 0)

        return TruncationSpec(clamp(_shift(self.E, dE)), clamp(_shift(self.H, dH)), clamp(_shift(self.U, dU)))

    def as_dict(self) -> dict:
        return {"E": self.E, "H": self.H, "U": self.U}


UNBOUNDED = TruncationSpec()


def differential_degree(eps: int, hbar: int, mono: Mono) -> int:
    """Differential degree of a term: jets count +1, eps -1, hbar -2.

    Every degree check in the package goes through this function.
    """
    return sum(j for _, j in mono) - eps - 2 * hbar


def dilaton_weight(eps: int, hbar: int, mono: Mono) -> int:
    return eps + 2 * hbar + len(mono)


def _coerce_coeff(c) -> tuple[GaussianRational, tuple]:
    if isinstance(c, Scalar):
        return c.coeff, c.params
    return GaussianRational.coerce(c), ()


class QDiffPoly:
    """Immutable sparse quantum differential polynomial."""

    __slots__ = ("terms", "trunc", "nfields")

    def __init__(self, terms: Mapping[Key, object] | None = None, trunc: TruncationSpec = UNBOUNDED, nfields: int = 1):
        clean: dict[Key, GaussianRational] = {}
        for key, c in (terms or {}).items():
            e, h, mono, params = key
            c = GaussianRational.coerce(c)
            if not c or not trunc.allows(e, h, len(mono)):
                continue
            mono = tuple(sorted(mono))
            for f, _ in mono:
                if not 1 <= f <= nfields:
                    raise IncompatibleSetup(f"field index {f} outside 1..{nfields}")
            params = make_params(params)
            for name, _ in params:
                check_parameter(name)
            k = (e, h, mono, params)
            s = clean.get(k, ZERO) + c
            if s:
                clean[k] = s
            else:
                clean.pop(k, None)
        self.terms = clean
        self.trunc = trunc
        self.nfields = nfields

    @classmethod
    def _raw(cls, terms: dict, trunc: TruncationSpec, nfields: int) -> "QDiffPoly":
        obj = object.__new__(cls)
        obj.terms = terms
        obj.trunc = trunc
        obj.nfields = nfields
        return obj

    # --- constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, nfields: int = 1, trunc: TruncationSpec = UNBOUNDED) -> "QDiffPoly":
        return cls._raw({}, trunc, nfields)

    @classmethod
    def constant(cls, c=1, nfields: int = 1, trunc: TruncationSpec = UNBOUNDED) -> "QDiffPoly":
        coeff, params = _coerce_coeff(c)
        return cls({(0, 0, (), params): coeff}, trunc, nfields)

    @classmethod
    def u(cls, field: int = 1, jet: int = 0, nfields: int = 1, trunc: TruncationSpec = UNBOUNDED) -> "QDiffPoly":
        if jet < 0:
            raise ValueError("jet index must be non-negative")
        return cls({(0, 0, ((field, jet),), ()): ONE}, trunc, nfields)

    @classmethod
    def eps(cls, power: int = 1, nfields: int = 1, trunc: TruncationSpec = UNBOUNDED) -> "QDiffPoly":
        return cls({(power, 0, (), ()): ONE}, trunc, nfields)

    @classmethod
    def hbar(cls, power: int = 1, nfields: int = 1, trunc: TruncationSpec = UNBOUNDED) -> "QDiffPoly":
        return cls({(0, power, (), ()): ONE}, trunc, nfields)

    @classmethod
    def param(cls, name: str, power: int = 1, nfields: int = 1, trunc: TruncationSpec = UNBOUNDED) -> "QDiffPoly":
        return cls({(0, 0, (), ((name, power),)): ONE}, trunc, nfields)

    def like(self, terms: dict, trunc: TruncationSpec | None = None) -> "QDiffPoly":
        """Wrap already-clean ``terms`` with this polynomial's setup."""
        return QDiffPoly._raw(terms, self.trunc if trunc is None else trunc, self.nfields)

    # --- protocol -------------------------------------------------------------

    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, QDiffPoly):
            return self.terms == other.terms
        if isinstance(other, (int, GaussianRational)) or hasattr(other, "denominator"):
            return self.terms == QDiffPoly.constant(other, self.nfields).terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        from .serialize import format_qdp

        return f"QDiffPoly({format_qdp(self)!r})"

    def __str__(self):
        from .serialize import format_qdp

        return format_qdp(self)

    def _lift(self, other) -> "QDiffPoly":
        if isinstance(other, QDiffPoly):
            return other
        if isinstance(other, ScalarSum):
            return QDiffPoly({(0, 0, (), p): c for p, c in other.terms.items()}, self.trunc, self.nfields)
        return QDiffPoly.constant(other, self.nfields, self.trunc)

    def __add__(self, other):
        return qdp_add(self, self._lift(other))

    def __radd__(self, other):
        return qdp_add(self._lift(other), self)

    def __sub__(self, other):
        return qdp_add(self, -self._lift(other))

    def __rsub__(self, other):
        return qdp_add(self._lift(other), -self)

    def __neg__(self):
        return self.like({k: -c for k, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, QDiffPoly):
            return qdp_mul(self, other)
        if isinstance(other, (Scalar, ScalarSum)):
            return qdp_mul(self, self._lift(other))
        return self.scale(other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        c = GaussianRational.coerce(other)
        return self.scale(ONE / c)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        result = QDiffPoly.constant(1, self.nfields, self.trunc)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def scale(self, c) -> "QDiffPoly":
        c = GaussianRational.coerce(c)
        if not c:
            return self.like({})
        if c == ONE:
            return self
        return self.like({k: v * c for k, v in self.terms.items()})

    # --- views ----------------------------------------------------------------

    def filter(self, pred: Callable[[int, int, Mono, tuple], bool]) -> "QDiffPoly":
        return self.like({k: c for k, c in self.terms.items() if pred(*k)})

    def hbar_part(self, k: int) -> "QDiffPoly":
        """Coefficient of hbar^k (hbar removed)."""
        return self.like({(e, 0, m, p): c for (e, h, m, p), c in self.terms.items() if h == k})

    def eps_part(self, k: int) -> "QDiffPoly":
        """Coefficient of eps^k (eps removed)."""
        return self.like({(0, h, m, p): c for (e, h, m, p), c in self.terms.items() if e == k})

    def u_free_part(self) -> "QDiffPoly":
        return self.filter(lambda e, h, m, p: not m)

    def max_jet(self) -> int:
        return max((j for (_, _, m, _) in self.terms for _, j in m), default=-1)

    def min_hbar(self) -> int:
        return min((h for (_, h, _, _) in self.terms), default=0)


def _check_fields(a: QDiffPoly, b: QDiffPoly) -> None:
    if a.nfields != b.nfields:
        raise IncompatibleSetup(f"field counts differ: {a.nfields} vs {b.nfields}")


def truncate(f: QDiffPoly, trunc: TruncationSpec) -> QDiffPoly:
    """Restrict ``f`` to ``trunc`` (intersected with its own truncation)."""
    t = f.trunc.common(trunc)
    return f.like({k: c for k, c in f.terms.items() if t.allows(k[0], k[1], len(k[2]))}, t)


def qdp_add(a: QDiffPoly, b: QDiffPoly) -> QDiffPoly:
    _check_fields(a, b)
    t = a.trunc.common(b.trunc)
    allows = t.allows
    out = {k: c for k, c in a.terms.items() if allows(k[0], k[1], len(k[2]))}
    for k, c in b.terms.items():
        if not allows(k[0], k[1], len(k[2])):
            continue
        s = out.get(k)
        if s is None:
            out[k] = c
        else:
            s = s + c
            if s:
                out[k] = s
            else:
                del out[k]
    return QDiffPoly._raw(out, t, a.nfields)


def qdp_sum(polys: Iterable[QDiffPoly], like: QDiffPoly) -> QDiffPoly:
    """Sum many polynomials into one dict without intermediate objects."""
    t = like.trunc
    out: dict = {}
    for p in polys:
        _check_fields(like, p)
        t = t.common(p.trunc)
        for k, c in p.terms.items():
            s = out.get(k)
            out[k] = c if s is None else s + c
    allows = t.allows
    return QDiffPoly._raw(
        {k: c for k, c in out.items() if c and allows(k[0], k[1], len(k[2]))}, t, like.nfields
    )


def qdp_mul(a: QDiffPoly, b: QDiffPoly) -> QDiffPoly:
    _check_fields(a, b)
    t = a.trunc.common(b.trunc)
    E, H, U = t.E, t.H, t.U
    out: dict = {}
    for (e1, h1, m1, p1), c1 in a.terms.items():
        for (e2, h2, m2, p2), c2 in b.terms.items():
            e = e1 + e2
            h = h1 + h2
            if E is not None and e > E:
                continue
            if H is not None and h > H:
                continue
            if U is not None and len(m1) + len(m2) + h > U:
                continue
            m = m1 + m2 if not m1 or not m2 or m1[-1] <= m2[0] else tuple(sorted(m1 + m2))
            k = (e, h, m, param_mul(p1, p2))
            c = c1 * c2
            s = out.get(k)
            out[k] = c if s is None else s + c
    return QDiffPoly._raw({k: c for k, c in out.items() if c}, t, a.nfields)


# --- calculus -----------------------------------------------------------------


@lru_cache(maxsize=None)
def _dx_mono(mono: Mono) -> tuple[tuple[Mono, int], ...]:
    """d/dx of a monomial as ``((monomial, multiplicity), ...)``."""
    out = []
    seen = set()
    for idx, (f, j) in enumerate(mono):
        if (f, j) in seen:
            continue
        seen.add((f, j))
        mult = mono.count((f, j))
        new = list(mono)
        new[idx] = (f, j + 1)
        out.append((tuple(sorted(new)), mult))
    return tuple(out)


def d_x(f: QDiffPoly) -> QDiffPoly:
    """Total x-derivative (Leibniz rule on jet variables)."""
    out: dict = {}
    for (e, h, m, p), c in f.terms.items():
        for m2, mult in _dx_mono(m):
            k = (e, h, m2, p)
            v = c * mult
            s = out.get(k)
            out[k] = v if s is None else s + v
    return f.like({k: c for k, c in out.items() if c})


def d_x_power(f: QDiffPoly, k: int) -> QDiffPoly:
    for _ in range(k):
        f = d_x(f)
    return f


def partial(f: QDiffPoly, field: int, jet: int) -> QDiffPoly:
    """Partial derivative with respect to ``u^field_jet``."""
    if jet < 0:
        raise ValueError("jet index must be non-negative")
    var = (field, jet)
    out: dict = {}
    for (e, h, m, p), c in f.terms.items():
        mult = m.count(var)
        if not mult:
            continue
        idx = m.index(var)
        k = (e, h, m[:idx] + m[idx + 1:], p)
        out[k] = out.get(k, ZERO) + c * mult
    return f.like({k: c for k, c in out.items() if c}, f.trunc.shifted(dU=-1))


def variables(f: QDiffPoly) -> set[tuple[int, int]]:
    return {v for (_, _, m, _) in f.terms for v in m}


def variational_derivative(f: QDiffPoly, field: int) -> QDiffPoly:
    """Euler operator: sum over k of (-d/dx)^k of the partial wrt ``u^field_k``."""
    top = max((j for (fld, j) in variables(f) if fld == field), default=-1)
    result = QDiffPoly.zero(f.nfields, f.trunc.shifted(dU=-1))
    # Horner: P_0 - d(P_1 - d(P_2 - ...))
    for k in range(top, -1, -1):
        result = partial(f, field, k) - d_x(result)
    return result


def dilaton_D(f: QDiffPoly) -> QDiffPoly:
    """Grading operator eps d/deps + 2 hbar d/dhbar + sum u_s d/du_s."""
    return f.like({k: c * dilaton_weight(k[0], k[1], k[2]) for k, c in f.terms.items() if dilaton_weight(k[0], k[1], k[2])})


def invert_D_minus_1(f: QDiffPoly) -> QDiffPoly:
    """Solve ``(D - 1) h = f`` term by term."""
    out = {}
    for k, c in f.terms.items():
        w = dilaton_weight(k[0], k[1], k[2])
        if w == 1:
            from .serialize import format_term

            raise WeightOneObstruction(
                f"term {format_term(k, c)} has dilaton weight 1 and lies in the kernel of D - 1"
            )
        out[k] = c / (w - 1)
    return f.like(out)


def _jet_order_key(mono: Mono) -> tuple:
    return tuple(sorted(((j, fld) for fld, j in mono), reverse=True))


def antiderivative(f: QDiffPoly) -> QDiffPoly:
    """Return ``h`` with ``d_x(h) == f`` and no u-free terms.

    d/dx is triangular on monomials ordered by their (jet, field) factors in
    descending order: the leading monomial of ``d_x(m)`` raises the top factor
    of ``m``.  Each graded component is therefore solved by back-substitution
    from its leading term.  A leading term that is not of that shape leaves a
    residual and raises :class:`NotExact`.
    """
    components: dict[tuple, dict[Mono, GaussianRational]] = {}
    for (e, h, m, p), c in f.terms.items():
        if not m:
            raise NotExact("u-free terms are never total derivatives")
        grade = (e, h, p, len(m), sum(j for _, j in m))
        components.setdefault(grade, {})[m] = c
    out: dict = {}
    for (e, h, p, _, _), work in components.items():
        while work:
            lead = max(work, key=_jet_order_key)
            c = work[lead]
            order = _jet_order_key(lead)
            t, fld = order[0]
            if t == 0 or (len(order) > 1 and order[1] > (t - 1, fld)):
                raise NotExact(_not_exact_message(f, lead))
            cand = list(lead)
            cand[cand.index((fld, t))] = (fld, t - 1)
            cand = tuple(sorted(cand))
            mult = cand.count((fld, t - 1))
            coeff = c / mult
            out[(e, h, cand, p)] = out.get((e, h, cand, p), ZERO) + coeff
            for m2, k in _dx_mono(cand):
                s = work.get(m2, ZERO) - coeff * k
                if s:
                    work[m2] = s
                else:
                    work.pop(m2, None)
    return f.like({k: c for k, c in out.items() if c})


def _not_exact_message(f: QDiffPoly, lead: Mono) -> str:
    from .serialize import format_mono

    return f"not a total x-derivative: residual monomial {format_mono(lead)} cannot be integrated"


def functional_equal(a, b) -> bool:
    """Equality of local functionals: all variational derivatives of a - b vanish."""
    a = a.density if isinstance(a, LocalFunctional) else a
    b = b.density if isinstance(b, LocalFunctional) else b
    diff = a - b
    return all(variational_derivative(diff, alpha).is_zero() for alpha in range(1, diff.nfields + 1))


def substitute(f: QDiffPoly, rules: Mapping[int, QDiffPoly], trunc: TruncationSpec | None = None) -> QDiffPoly:
    """Replace each ``u^alpha_s`` by ``d_x^s(rules[alpha])`` and expand.

    Fields without a rule are kept.  The result has the common truncation of
    ``f``, the rule images and ``trunc``.
    """
    t = f.trunc
    for img in rules.values():
        _check_fields(f, img)
        t = t.common(img.trunc)
    if trunc is not None:
        t = t.common(trunc)
    jets: dict[tuple[int, int], QDiffPoly] = {}

    def image(var):
        if var not in jets:
            fld, j = var
            if fld not in rules:
                jets[var] = QDiffPoly.u(fld, j, f.nfields, t)
            elif j == 0:
                jets[var] = truncate(rules[fld], t)
            else:
                jets[var] = d_x(image((fld, j - 1)))
        return jets[var]

    pieces = []
    for (e, h, m, p), c in f.terms.items():
        term = QDiffPoly._raw({(e, h, (), p): c}, t, f.nfields)
        if not t.allows(e, h, 0):
            continue
        for var in m:
            term = qdp_mul(term, image(var))
            if term.is_zero():
                break
        pieces.append(term)
    return qdp_sum(pieces, QDiffPoly.zero(f.nfields, t))


def specialize(f: QDiffPoly, name: str, value) -> QDiffPoly:
    """Substitute a rational (or Gaussian) value for a formal parameter."""
    value = GaussianRational.coerce(value)
    out: dict = {}
    for (e, h, m, p), c in f.terms.items():
        d = dict(p)
        k = d.pop(name, 0)
        if k:
            c = c * value**k
            if not c:
                continue
        key = (e, h, m, tuple(sorted(d.items())))
        out[key] = out.get(key, ZERO) + c
    return f.like({k: c for k, c in out.items() if c})


@dataclass(frozen=True, eq=False)
class LocalFunctional:
    """A density modulo constants and total x-derivatives."""

    density: QDiffPoly

    def __eq__(self, other):
        if isinstance(other, LocalFunctional):
            return functional_equal(self.density, other.density)
        if isinstance(other, QDiffPoly):
            return functional_equal(self.density, other)
        if other == 0:
            return functional_equal(self.density, QDiffPoly.zero(self.density.nfields))
        return NotImplemented

    __hash__ = None

    def __add__(self, other):
        return LocalFunctional(self.density + _dens(other))

    def __sub__(self, other):
        return LocalFunctional(self.density - _dens(other))

    def __neg__(self):
        return LocalFunctional(-self.density)

    def __mul__(self, c):
        return LocalFunctional(self.density * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"LocalFunctional({str(self.density)!r})"

    def variational_derivative(self, field: int) -> QDiffPoly:
        return variational_derivative(self.density, field)


def _dens(x):
    return x.density if isinstance(x, LocalFunctional) else x
