"""Normal-ordering quantum commutator of a density with a local functional.

For a density ``f`` and functional ``g``::

    [f, g] = sum_{n>=1} (-i)^(n-1) hbar^n / n!
             * d^n f / du^{a_1}_{s_1}..du^{a_n}_{s_n}
             * (-1)^(r_1+..+r_n) * prod_k eta^{a_k b_k}
             * sum_j C_j^{s_1+r_1+1, .., s_n+r_n+1} d_x^j d^n g / du^{b_1}_{r_1}..du^{b_n}_{r_n}

The sums over ordered index tuples are folded into sums over multisets:
the summand is invariant under permuting the pairs (s_k, r_k) together.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from math import factorial, prod

from gmpy2 import mpq

from .errors import IncompatibleSetup, NotDivisible
from .jets import (
    LocalFunctional,
    QDiffPoly,
    TruncationSpec,
    d_x,
    qdp_mul,
    qdp_sum,
    variational_derivative,
)
from .powersums import c_coeffs
from .scalars import GaussianRational

__all__ = [
    "Metric",
    "commutator_density_functional",
    "commutator_functionals",
    "divide_by_hbar",
    "classical_bracket",
    "reliable_truncation",
]

_MINUS_I = GaussianRational(0, -1)


@dataclass(frozen=True)
class Metric:
    """Symmetric nondegenerate pairing ``eta^{ab}`` (indices from 1)."""

    eta: tuple[tuple, ...]

    def __post_init__(self):
        rows = tuple(tuple(mpq(x) for x in row) for row in self.eta)
        object.__setattr__(self, "eta", rows)
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("metric must be square")
        if any(rows[a][b] != rows[b][a] for a in range(n) for b in range(n)):
            raise ValueError("metric must be symmetric")
        if _det(rows) == 0:
            raise ValueError("metric must be nondegenerate")

    @classmethod
    def identity(cls, n: int = 1) -> "Metric":
        return cls(tuple(tuple(1 if a == b else 0 for b in range(n)) for a in range(n)))

    @property
    def n(self) -> int:
        return len(self.eta)

    def upper(self, a: int, b: int) -> mpq:
        return self.eta[a - 1][b - 1]

    def lower(self, a: int, b: int) -> mpq:
        return self.inverse()[a - 1][b - 1]

    def inverse(self) -> tuple[tuple, ...]:
        return _inverse(self.eta)


def _det(m) -> mpq:
    n = len(m)
    if n == 1:
        return m[0][0]
    return sum((-1) ** c * m[0][c] * _det([row[:c] + row[c + 1:] for row in m[1:]]) for c in range(n))


def _inverse(m):
    n = len(m)
    aug = [list(row) + [mpq(1 if i == j else 0) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                fac = aug[r][col]
                aug[r] = [x - fac * y for x, y in zip(aug[r], aug[col])]
    return tuple(tuple(row[n:]) for row in aug)


def reliable_truncation(tf: TruncationSpec, tg: TruncationSpec) -> TruncationSpec:
    """Truncation up to which ``[f, g]`` is fully determined by f and g.

    Each hbar^n term needs at least n+1 u-factors from g and n from f, so the
    output is exact one hbar order (and one filtration step on the f side)
    beyond the inputs.
    """

    def mn(*xs):
        xs = [x for x in xs if x is not None]
        return min(xs) if xs else None

    E = mn(tf.E, tg.E)
    H = None if tf.H is None or tg.H is None else min(tf.H, tg.H) + 1
    U = mn(None if tf.U is None else tf.U + 1, tg.U)
    return TruncationSpec(E, H, U)


def _derivative_table(f: QDiffPoly, n: int, prev: dict | None, trunc: TruncationSpec) -> dict:
    """Map sorted variable multisets S (|S| = n) to d^S f, plus 1/prod(m!) weight.

    Built from the (n-1)-table by differentiating only by variables >= max(S)
    so every multiset is produced once.
    """
    if prev is None:
        prev = {(): f}
    out = {}
    for S, g in prev.items():
        last = S[-1] if S else None
        cache: dict = {}
        for (e, h, m, p), c in g.terms.items():
            for idx, var in enumerate(m):
                if last is not None and var < last:
                    continue
                if idx and m[idx - 1] == var:
                    continue
                mult = m.count(var)
                k = (e, h, m[:idx] + m[idx + 1:], p)
                bucket = cache.setdefault(var, {})
                bucket[k] = bucket.get(k, GaussianRational()) + c * mult
        for var, terms in cache.items():
            terms = {k: c for k, c in terms.items() if c}
            if terms:
                out[S + (var,)] = QDiffPoly._raw(terms, trunc, f.nfields)
    return out


def _multiset_weight(S) -> int:
    w = 1
    i = 0
    while i < len(S):
        k = 1
        while i + k < len(S) and S[i + k] == S[i]:
            k += 1
        w *= factorial(k)
        i += k
    return w


def _distinct_orderings(R) -> list[tuple]:
    return sorted(set(permutations(R)))


def commutator_density_functional(
    f: QDiffPoly,
    g,
    eta: Metric,
    trunc: TruncationSpec | None = None,
) -> QDiffPoly:
    """Density ``[f, g_bar]`` of the quantum commutator with a local functional.

    ``trunc`` defaults to :func:`reliable_truncation` of the inputs.
    """
    g = g.density if isinstance(g, LocalFunctional) else g
    if f.nfields != g.nfields or f.nfields != eta.n:
        raise IncompatibleSetup("density, functional and metric disagree on the number of fields")
    out_t = trunc if trunc is not None else reliable_truncation(f.trunc, g.trunc)
    nf = f.nfields
    pieces: list[QDiffPoly] = []

    f_min_h, g_min_h = f.min_hbar(), g.min_hbar()
    f_tab = g_tab = None
    n = 0
    while True:
        n += 1
        if out_t.H is not None and f_min_h + g_min_h + n > out_t.H:
            break
        f_tab = _derivative_table(f, n, f_tab, out_t)
        g_tab = _derivative_table(g, n, g_tab, out_t)
        if not f_tab or not g_tab:
            break
        # drop R whose derivative is u-free: d_x^j (j >= 1) of a constant vanishes
        g_items = [(R, gR) for R, gR in g_tab.items() if any(m for (_, _, m, _) in gR.terms)]
        if not g_items:
            continue
        # room left for the factors' own hbar powers
        h_room = None if out_t.H is None else out_t.H - n
        dx_cache: dict = {}

        def dx_pow(R, gR, j):
            lst = dx_cache.setdefault(R, [gR])
            while len(lst) <= j:
                lst.append(d_x(lst[-1]))
            return lst[j]

        prefactor = _MINUS_I ** (n - 1)
        op_cache: dict = {}
        for S, fS in f_tab.items():
            if h_room is not None and fS.min_hbar() + g_min_h > h_room:
                continue
            s_jets = tuple(j for _, j in S)
            s_fields = tuple(fld for fld, _ in S)
            combo: dict[int, list] = {}
            for R, gR in g_items:
                if h_room is not None and fS.min_hbar() + gR.min_hbar() > h_room:
                    continue
                key = (S, R)
                ops = op_cache.get(key)
                if ops is None:
                    ops = {}
                    for rho in _distinct_orderings(R):
                        eta_prod = prod(eta.upper(a, b) for a, (b, _) in zip(s_fields, rho))
                        if not eta_prod:
                            continue
                        r_sum = sum(r for _, r in rho)
                        sign = -1 if r_sum % 2 else 1
                        cc = c_coeffs([s + r + 1 for s, (_, r) in zip(s_jets, rho)])
                        for j, c in cc.coeffs.items():
                            ops[j] = ops.get(j, 0) + sign * eta_prod * c
                    ops = {j: c for j, c in ops.items() if c}
                    op_cache[key] = ops
                for j, c in ops.items():
                    combo.setdefault(j, []).append((c, R, gR))
            if not combo:
                continue
            q_terms = []
            for j, lst in combo.items():
                for c, R, gR in lst:
                    q_terms.append(dx_pow(R, gR, j).scale(c))
            Q = qdp_sum(q_terms, QDiffPoly.zero(nf, out_t))
            if Q.is_zero():
                continue
            scale = prefactor / _multiset_weight(S)
            hb = QDiffPoly._raw({(0, n, (), ()): scale}, out_t, nf)
            pieces.append(qdp_mul(qdp_mul(hb, fS), Q))
    result = qdp_sum(pieces, QDiffPoly.zero(nf, out_t))
    return result


def divide_by_hbar(f: QDiffPoly) -> QDiffPoly:
    """Lower every hbar power by one (and the filtration bounds with it)."""
    out = {}
    for (e, h, m, p), c in f.terms.items():
        if h == 0:
            from .serialize import format_term

            raise NotDivisible(f"term {format_term((e, h, m, p), c)} has no factor of hbar")
        out[(e, h - 1, m, p)] = c
    return f.like(out, f.trunc.shifted(dH=-1, dU=-1))


def commutator_functionals(f, g, eta: Metric, trunc: TruncationSpec | None = None) -> LocalFunctional:
    """``[f_bar, g_bar]`` as a local functional."""
    fd = f.density if isinstance(f, LocalFunctional) else f
    return LocalFunctional(commutator_density_functional(fd, g, eta, trunc))


def classical_bracket(f, g, eta: Metric) -> LocalFunctional:
    """Hydrodynamic Poisson bracket: integral of dF/du^a eta^{ab} d_x dG/du^b."""
    fd = f.density if isinstance(f, LocalFunctional) else f
    gd = g.density if isinstance(g, LocalFunctional) else g
    n = fd.nfields
    vf = [variational_derivative(fd, a) for a in range(1, n + 1)]
    vg = [d_x(variational_derivative(gd, b)) for b in range(1, n + 1)]
    pieces = []
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            e = eta.upper(a, b)
            if e:
                pieces.append(qdp_mul(vf[a - 1], vg[b - 1]).scale(e))
    like = QDiffPoly.zero(n, fd.trunc.common(gd.trunc))
    return LocalFunctional(qdp_sum(pieces, like))

