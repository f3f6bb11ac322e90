"""Built-in seed Hamiltonians G_{1,1}, the dispersionless KdV oracle and
the Toda Miura change of variables."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable

from gmpy2 import mpq

from .bracket import Metric
from .errors import OddLambdaResidue, TruncationError
from .hierarchy import HierarchySetup
from .jets import (
    LocalFunctional,
    QDiffPoly,
    TruncationSpec,
    qdp_mul,
    qdp_sum,
    substitute,
    truncate,
)
from .powersums import bernoulli, bernoulli_abs, inverse_series, s_series
from .scalars import ONE, GaussianRational, declare_parameters

__all__ = [
    "SeedSpec",
    "SEEDS",
    "seed_kdv",
    "seed_ilw",
    "seed_toda",
    "get_seed",
    "dispersionless_kdv_oracle",
    "toda_miura_substitute",
    "toda_miura_forward",
    "TODA_ALIASES",
]

I = GaussianRational(0, 1)
TODA_ALIASES = {"omega": 2}


def _seed_trunc(trunc: TruncationSpec) -> TruncationSpec:
    return trunc if trunc.U is None else trunc.shifted(dU=1)


def _E(trunc: TruncationSpec) -> int:
    if trunc.E is None:
        raise TruncationError("seeds need a finite eps truncation E")
    return trunc.E


def _term(c, eps=0, hbar=0, mono=(), params=(), nfields=1, trunc=None) -> QDiffPoly:
    return QDiffPoly({(eps, hbar, tuple(mono), tuple(params)): c}, trunc, nfields)


def _kdv_density(trunc: TruncationSpec) -> QDiffPoly:
    u0 = (1, 0)
    return qdp_sum(
        [
            _term(mpq(1, 6), mono=(u0, u0, u0), trunc=trunc),
            _term(mpq(1, 24), eps=2, mono=(u0, (1, 2)), trunc=trunc),
            _term(GaussianRational(0, mpq(-1, 24)), hbar=1, mono=(u0,), trunc=trunc),
        ],
        QDiffPoly.zero(1, trunc),
    )


def seed_kdv(trunc: TruncationSpec) -> HierarchySetup:
    """Quantum KdV: G_1 = u^3/6 + eps^2/24 u u_2 - i hbar/24 u."""
    st = _seed_trunc(trunc)
    return HierarchySetup(
        name="kdv",
        nfields=1,
        eta=Metric.identity(1),
        seed=LocalFunctional(_kdv_density(st)),
        trunc=trunc,
        builder=seed_kdv,
        i_pattern=True,
    )


def _ilw_density(trunc: TruncationSpec) -> QDiffPoly:
    E = _E(trunc)
    u0 = (1, 0)
    pieces = [
        _term(mpq(1, 6), mono=(u0, u0, u0), trunc=trunc),
        _term(GaussianRational(0, mpq(-1, 24)), hbar=1, mono=(u0,), trunc=trunc),
    ]
    g = 1
    while 2 * g - 2 <= E:
        c = bernoulli_abs(g) / (2 * factorial(2 * g))
        mu = (("mu", g - 1),) if g > 1 else ()
        if 2 * g <= E:
            pieces.append(_term(c, eps=2 * g, mono=(u0, (1, 2 * g)), params=mu, trunc=trunc))
        pieces.append(
            _term(GaussianRational(0, -c), eps=2 * g - 2, hbar=1, mono=(u0, (1, 2 * g)), params=(("mu", g),), trunc=trunc)
        )
        g += 1
    return qdp_sum(pieces, QDiffPoly.zero(1, trunc))


def seed_ilw(trunc: TruncationSpec) -> HierarchySetup:
    """Quantum ILW seed with Bernoulli coefficients and formal parameter mu."""
    declare_parameters("mu")
    st = _seed_trunc(trunc)
    return HierarchySetup(
        name="ilw",
        nfields=1,
        eta=Metric.identity(1),
        seed=LocalFunctional(_ilw_density(st)),
        trunc=trunc,
        params=("mu",),
        builder=seed_ilw,
        i_pattern=True,
    )


def _operator_series(coeffs: dict, field: int, trunc: TruncationSpec, nfields: int = 2) -> QDiffPoly:
    """sum_k coeffs[k] eps^k u^field_k, i.e. an even or odd series in eps d_x."""
    terms = {}
    for k, c in coeffs.items():
        if c and (trunc.E is None or k <= trunc.E):
            terms[(k, 0, ((field, k),), ())] = c
    return QDiffPoly(terms, trunc, nfields)


def _s_coeffs(E: int) -> dict:
    s = s_series(E // 2)
    return {2 * i: c for i, c in enumerate(s)}


def _s_inverse_coeffs(E: int) -> dict:
    inv = inverse_series(s_series(E // 2))
    return {2 * i: c for i, c in enumerate(inv)}


def _exp_shift_coeffs(E: int, sign: int) -> dict:
    """Coefficients of exp(sign * z / 2)."""
    return {k: mpq(sign**k, 2**k * factorial(k)) for k in range(E + 1)}


def _cosh_half_coeffs(E: int) -> dict:
    """Coefficients of (e^{z/2} + e^{-z/2}) / 2."""
    return {k: mpq(1, 2**k * factorial(k)) for k in range(0, E + 1, 2)}


def _exp_poly(x: QDiffPoly, max_degree: int) -> QDiffPoly:
    """exp(x) for x without constant term, up to x^max_degree."""
    one = QDiffPoly.constant(1, x.nfields, x.trunc)
    total, power = one, one
    for k in range(1, max_degree + 1):
        power = qdp_mul(power, x).scale(mpq(1, k))
        if power.is_zero():
            break
        total = total + power
    return total


def _toda_density(trunc: TruncationSpec) -> QDiffPoly:
    E = _E(trunc)
    if trunc.U is None:
        raise TruncationError("the Toda seed needs a finite U truncation (exp(S(eps d_x) u^omega) is a power series)")
    n = 2
    u1, uw = (1, 0), (2, 0)
    q = (("q", 1),)
    pieces = [_term(mpq(1, 2), mono=(u1, u1, uw), nfields=n, trunc=trunc)]
    g = 1
    while 2 * g - 2 <= E:
        c = bernoulli(2 * g) / factorial(2 * g)
        if 2 * g <= E:
            pieces.append(_term(c, eps=2 * g, mono=(u1, (1, 2 * g)), nfields=n, trunc=trunc))
        pieces.append(_term(GaussianRational(0, c), eps=2 * g - 2, hbar=1, mono=((2, 2 * g), u1), nfields=n, trunc=trunc))
        g += 1
    pieces.append(_term(GaussianRational(0, mpq(-1, 12)), hbar=1, mono=(u1,), nfields=n, trunc=trunc))
    # q ((cosh(eps d/2) u^w - 2) exp(S(eps d) u^w) + u^w)
    cosh_w = _operator_series(_cosh_half_coeffs(E), 2, trunc)
    s_w = _operator_series(_s_coeffs(E), 2, trunc)
    expo = _exp_poly(s_w, trunc.U)
    q_part = qdp_mul(cosh_w - 2, expo) + QDiffPoly.u(2, 0, n, trunc)
    pieces.append(q_part * QDiffPoly({(0, 0, (), q): ONE}, trunc, n))
    return qdp_sum(pieces, QDiffPoly.zero(n, trunc))


def seed_toda(trunc: TruncationSpec) -> HierarchySetup:
    """GW theory of CP^1: fields (1, omega) with the antidiagonal pairing."""
    if trunc.U is None:
        raise TruncationError("the Toda seed needs a finite U truncation")
    declare_parameters("q")
    st = _seed_trunc(trunc)
    return HierarchySetup(
        name="toda",
        nfields=2,
        eta=Metric(((0, 1), (1, 0))),
        seed=LocalFunctional(_toda_density(st)),
        trunc=trunc,
        aliases=dict(TODA_ALIASES),
        params=("q",),
        builder=seed_toda,
    )


@dataclass(frozen=True)
class SeedSpec:
    name: str
    parameters: tuple
    builder: Callable[[TruncationSpec], HierarchySetup]


SEEDS = {
    "kdv": SeedSpec("kdv", (), seed_kdv),
    "ilw": SeedSpec("ilw", ("mu",), seed_ilw),
    "toda": SeedSpec("toda", ("q",), seed_toda),
}


def get_seed(name: str) -> SeedSpec:
    try:
        return SEEDS[name]
    except KeyError:
        raise KeyError(f"unknown cohft {name!r}; choose from {sorted(SEEDS)}") from None


# --- dispersionless quantum KdV ----------------------------------------------------


def dispersionless_kdv_oracle(d_max: int, H: int) -> dict[int, QDiffPoly]:
    """Coefficients of y^d, d = -1..d_max, of the closed generating series

        G(y) = exp(y S(lambda y d_x / sqrt(i)) u) / (y^2 S(sqrt(i) lambda y)) - 1/y^2

    with lambda^2 = hbar.  Both S-series are expanded in powers of
    ``sqrt(i) lambda``; a surviving odd power raises OddLambdaResidue.
    """
    trunc = TruncationSpec(0, H, None)
    top = d_max + 2  # y-degree needed inside the bracket
    s_all = _full_s_series(top)
    # z^m with z = sqrt(i) lambda y contributes (i hbar)^(m/2) y^m; odd m is not representable
    a_series = inverse_series(s_all)
    for m, c in enumerate(a_series):
        if m % 2 and c:
            raise OddLambdaResidue(f"odd power lambda^{m} in 1/S")
    for m, c in enumerate(s_all):
        if m % 2 and c:
            raise OddLambdaResidue(f"odd power lambda^{m} in S")
    i_hbar = GaussianRational(0, 1)
    minus_i_hbar = GaussianRational(0, -1)
    # X(y) = y S(lambda y d_x / sqrt(i)) u = sum_k s_k (-i hbar)^k y^(2k+1) u_{2k}
    x_coeffs: dict[int, QDiffPoly] = {}
    for m, c in enumerate(s_all):
        if m % 2 or not c or m + 1 > top or m // 2 > H:
            continue
        k = m // 2
        x_coeffs[m + 1] = QDiffPoly({(0, k, ((1, 2 * k),), ()): c * minus_i_hbar**k}, trunc, 1)
    # exp(X) as a series in y
    zero = QDiffPoly.zero(1, trunc)
    exp_series = [QDiffPoly.constant(1, 1, trunc)] + [zero] * top
    power = [QDiffPoly.constant(1, 1, trunc)] + [zero] * top
    for r in range(1, top + 1):
        new = [zero] * (top + 1)
        for a, pa in enumerate(power):
            if pa.is_zero():
                continue
            for b, xb in x_coeffs.items():
                if a + b <= top:
                    new[a + b] = new[a + b] + qdp_mul(pa, xb)
        power = [p.scale(mpq(1, r)) for p in new]
        exp_series = [e + p for e, p in zip(exp_series, power)]
    # multiply by 1/S(sqrt(i) lambda y) = sum_k a_{2k} (i hbar)^k y^(2k)
    out: dict[int, QDiffPoly] = {}
    for d in range(-1, d_max + 1):
        n = d + 2
        total = zero
        for m in range(0, n + 1, 2):
            k = m // 2
            if k > H or not a_series[m]:
                continue
            coeff = a_series[m] * i_hbar**k
            total = total + qdp_mul(QDiffPoly({(0, k, (), ()): coeff}, trunc, 1), exp_series[n - m])
        if n == 0:
            total = total - 1
        out[d] = total
    return out


def _full_s_series(n: int) -> list:
    """All coefficients (odd ones included) of S(z) through z^n."""
    even = s_series(n // 2 + 1)
    return [even[m // 2] if m % 2 == 0 else mpq(0) for m in range(n + 1)]


# --- Toda Miura map -------------------------------------------------------------------


def toda_miura_forward(f: QDiffPoly, trunc: TruncationSpec) -> QDiffPoly:
    """Substitute v^1 = e^{eps d_x / 2} u^1, v^2 = S(eps d_x) u^omega into ``f`` (in v)."""
    E = _E(trunc)
    rules = {
        1: _operator_series(_exp_shift_coeffs(E, 1), 1, trunc),
        2: _operator_series(_s_coeffs(E), 2, trunc),
    }
    return substitute(truncate(f, trunc), rules, trunc)


def toda_miura_substitute(f: QDiffPoly, trunc: TruncationSpec) -> QDiffPoly:
    """Rewrite ``f`` (in u) in the Miura variables v.

    Uses u^1 = e^{-eps d_x / 2} v^1 and u^omega = S(eps d_x)^{-1} v^2, both
    expanded through eps^E.
    """
    E = _E(trunc)
    rules = {
        1: _operator_series(_exp_shift_coeffs(E, -1), 1, trunc),
        2: _operator_series(_s_inverse_coeffs(E), 2, trunc),
    }
    return substitute(truncate(f, trunc), rules, trunc)

