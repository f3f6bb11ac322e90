"""Reconstruction of all Hamiltonian densities from the seed G_{1,1}.

Forward pass: ``d_x (D - 1) G_{a,p+1} = (1/hbar) [G_{a,p}, G_{1,1}]`` gives
each density up to an additive constant.  Backward pass: the string equation
``dG_{a,d+1}/du^1 = G_{a,d}`` fixes the constants from the top down.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

from .bracket import Metric, commutator_density_functional, divide_by_hbar
from .errors import NotExact, QDRError
from .jets import (
    LocalFunctional,
    QDiffPoly,
    TruncationSpec,
    antiderivative,
    d_x,
    dilaton_weight,
    invert_D_minus_1,
    differential_degree,
    partial,
    truncate,
    variational_derivative,
)
from .serialize import format_qdp, to_structured

log = logging.getLogger(__name__)

__all__ = [
    "HierarchySetup",
    "HierarchyTable",
    "CheckResult",
    "Report",
    "recursion_step",
    "build_hierarchy",
    "verify_commutativity",
    "verify_string",
    "verify_second_recursion",
    "verify_eps_parity",
    "verify_degree",
    "verify_i_pattern",
    "verify_all",
    "flow_equation",
]


@dataclass
class HierarchySetup:
    """Everything the recursion needs.

    ``seed`` carries one extra ``U`` filtration level beyond ``trunc`` when
    ``trunc.U`` is finite: the hbar^1 part of a commutator pairs a degree-k
    density term with quadratic seed terms, and the higher hbar^n parts reach
    one level further into the seed.
    """

    name: str
    nfields: int
    eta: Metric
    seed: LocalFunctional
    trunc: TruncationSpec
    unit_field: int = 1
    aliases: dict = field(default_factory=dict)
    params: tuple = ()
    builder: Callable[[TruncationSpec], "HierarchySetup"] | None = None
    i_pattern: bool = False

    def __post_init__(self):
        if not 1 <= self.unit_field <= self.nfields:
            raise ValueError("unit field outside the field range")
        if self.eta.n != self.nfields:
            raise ValueError("metric size does not match the field count")

    def initial_density(self, alpha: int) -> QDiffPoly:
        """G_{alpha,-1} = eta_{alpha mu} u^mu."""
        out = QDiffPoly.zero(self.nfields, self.trunc)
        for mu in range(1, self.nfields + 1):
            c = self.eta.lower(alpha, mu)
            if c:
                out = out + QDiffPoly.u(mu, 0, self.nfields, self.trunc).scale(c)
        return out

    def describe(self) -> dict:
        return {
            "cohft": self.name,
            "nfields": self.nfields,
            "unit_field": self.unit_field,
            "eta": [[str(x) for x in row] for row in self.eta.eta],
            "params": list(self.params),
        }


@dataclass
class HierarchyTable:
    densities: dict  # (alpha, d) -> QDiffPoly
    const_fixed: dict  # (alpha, d) -> bool
    d_max: int

    def __getitem__(self, key) -> QDiffPoly:
        return self.densities[key]

    def functional(self, alpha: int, d: int) -> LocalFunctional:
        return LocalFunctional(self.densities[(alpha, d)])

    def keys(self):
        return sorted(self.densities)


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: QDiffPoly | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        out = {"name": self.name, "passed": self.passed}
        if self.residual is not None:
            out["residual"] = to_structured(self.residual)["terms"]
        if self.detail:
            out["detail"] = self.detail
        return out

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        tail = ""
        if not self.passed and self.residual is not None:
            tail = f"  residual: {format_qdp(self.residual)}"
        elif self.detail:
            tail = f"  {self.detail}"
        return f"{status} {self.name}{tail}"


@dataclass
class Report:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def extend(self, other: "Report") -> "Report":
        self.checks.extend(other.checks)
        return self

    def as_dict(self, setup: HierarchySetup | None = None) -> dict:
        out = {"passed": self.passed, "checks": [c.as_dict() for c in self.checks]}
        if setup is not None:
            out["setup"] = setup.describe()
            out["truncation"] = setup.trunc.as_dict()
        return out

    def text(self) -> str:
        lines = [c.line() for c in self.checks]
        lines.append(f"{sum(c.passed for c in self.checks)}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def recursion_step(setup: HierarchySetup, g_prev: QDiffPoly) -> QDiffPoly:
    """Next density (up to its constant) from the previous one."""
    bracket = commutator_density_functional(g_prev, setup.seed, setup.eta)
    rhs = divide_by_hbar(bracket)
    return truncate(invert_D_minus_1(antiderivative(rhs)), setup.trunc)


def _build(setup: HierarchySetup, d_max: int) -> HierarchyTable:
    densities: dict = {}
    fixed: dict = {}
    for alpha in range(1, setup.nfields + 1):
        g = setup.initial_density(alpha)
        densities[(alpha, -1)] = g
        for d in range(0, d_max + 2):
            g = recursion_step(setup, g)
            densities[(alpha, d)] = g
            log.debug("built G_{%d,%d}: %d terms", alpha, d, len(g))
        for d in range(d_max, -2, -1):
            below = densities[(alpha, d)]
            above = densities[(alpha, d + 1)]
            const = partial(above, setup.unit_field, 0).u_free_part()
            non_const = below.filter(lambda e, h, m, p: bool(m))
            densities[(alpha, d)] = truncate(non_const + const, setup.trunc)
            fixed[(alpha, d)] = True
        fixed[(alpha, d_max + 1)] = False
    return HierarchyTable(densities, fixed, d_max)


def build_hierarchy(setup: HierarchySetup, d_max: int) -> HierarchyTable:
    """All densities G_{a,d} for d = -1..d_max with constants fixed.

    ``G_{a,d_max+1}`` is kept with ``const_fixed`` False.  A NotExact failure
    is retried once at a larger truncation before being reported.
    """
    if d_max < 0:
        raise ValueError("d_max must be >= 0")
    try:
        return _build(setup, d_max)
    except NotExact as first:
        if setup.builder is None:
            raise
        bigger = setup.trunc.shifted(dE=2, dH=1, dU=1)
        log.warning("recursion not exact at %s, retrying at %s", setup.trunc, bigger)
        try:
            table = _build(setup.builder(bigger), d_max)
        except NotExact as second:
            raise NotExact(
                f"recursion is not exact at truncation {setup.trunc} nor at {bigger}: {second}; "
                "the seed is probably inconsistent"
            ) from first
        table.densities = {k: truncate(v, setup.trunc) for k, v in table.densities.items()}
        return table


def _label(alpha: int, d: int, setup: HierarchySetup) -> str:
    return f"G[{alpha},{d}]" if setup.nfields > 1 else f"G[{d}]"


def verify_commutativity(table: HierarchyTable, setup: HierarchySetup, p_max: int) -> Report:
    """[G_{a,p}, G_{b,q}] = 0 as local functionals for all p, q <= p_max."""
    report = Report()
    keys = [(a, p) for a in range(1, setup.nfields + 1) for p in range(-1, p_max + 1)]
    for i, (a, p) in enumerate(keys):
        for b, q in keys[i:]:
            f, g = table[(a, p)], table[(b, q)]
            out_t = f.trunc.common(g.trunc)
            res = commutator_density_functional(f, g, setup.eta, out_t)
            residuals = [variational_derivative(res, al) for al in range(1, setup.nfields + 1)]
            ok = all(r.is_zero() for r in residuals)
            name = f"commute {_label(a, p, setup)} {_label(b, q, setup)}"
            report.checks.append(CheckResult(name, ok, None if ok else res))
    return report


def verify_string(table: HierarchyTable, setup: HierarchySetup) -> Report:
    report = Report()
    for (a, d), ok_fixed in sorted(table.const_fixed.items()):
        if not ok_fixed or (a, d + 1) not in table.densities:
            continue
        lhs = partial(table[(a, d + 1)], setup.unit_field, 0)
        res = lhs - table[(a, d)]
        name = f"string d{_label(a, d + 1, setup)}/du{setup.unit_field} = {_label(a, d, setup)}"
        report.checks.append(CheckResult(name, res.is_zero(), res))
    return report


def verify_second_recursion(table: HierarchyTable, setup: HierarchySetup) -> Report:
    """d_x dG_{a,p+1}/du^b = (1/hbar)[G_{a,p}, G_{b,0}] for every built pair."""
    report = Report()
    for (a, p) in table.keys():
        if (a, p + 1) not in table.densities:
            continue
        for b in range(1, setup.nfields + 1):
            lhs = d_x(partial(table[(a, p + 1)], b, 0))
            rhs = divide_by_hbar(commutator_density_functional(table[(a, p)], table[(b, 0)], setup.eta))
            res = lhs - rhs
            name = f"recursion d_x d{_label(a, p + 1, setup)}/du{b} = [{_label(a, p, setup)}, {_label(b, 0, setup)}]/hbar"
            report.checks.append(CheckResult(name, res.is_zero(), res))
    return report


def verify_eps_parity(table: HierarchyTable, setup: HierarchySetup) -> Report:
    report = Report()
    for key in table.keys():
        bad = table[key].filter(lambda e, h, m, p: e % 2 == 1)
        report.checks.append(CheckResult(f"eps-parity {_label(*key, setup)}", bad.is_zero(), bad))
    return report


def verify_degree(table: HierarchyTable, setup: HierarchySetup) -> Report:
    report = Report()
    for key in table.keys():
        bad = table[key].filter(lambda e, h, m, p: differential_degree(e, h, m) > 0)
        report.checks.append(CheckResult(f"degree<=0 {_label(*key, setup)}", bad.is_zero(), bad))
    return report


def verify_i_pattern(table: HierarchyTable, setup: HierarchySetup) -> Report:
    """Coefficient of hbar^m lies in i^m Q (checked for the scalar seeds)."""
    report = Report()
    for key in table.keys():
        def bad_term(e, h, m, p, poly=table[key]):
            c = poly.terms[(e, h, m, p)]
            return bool(c.im) if h % 2 == 0 else bool(c.re)

        bad = table[key].filter(bad_term)
        report.checks.append(CheckResult(f"i-pattern {_label(*key, setup)}", bad.is_zero(), bad))
    return report


def verify_all(table: HierarchyTable, setup: HierarchySetup, p_max: int) -> Report:
    report = Report()
    report.extend(verify_commutativity(table, setup, p_max))
    report.extend(verify_string(table, setup))
    report.extend(verify_second_recursion(table, setup))
    report.extend(verify_eps_parity(table, setup))
    report.extend(verify_degree(table, setup))
    if setup.i_pattern:
        report.extend(verify_i_pattern(table, setup))
    return report


def flow_equation(table: HierarchyTable, setup: HierarchySetup, field: int, beta: int, q: int) -> QDiffPoly:
    """Right-hand side (1/hbar)[u^field, G_{beta,q}] of the quantum flow."""
    if (beta, q) not in table.densities:
        raise QDRError(f"G_{{{beta},{q}}} is not in the table")
    u = QDiffPoly.u(field, 0, setup.nfields, table[(beta, q)].trunc)
    return divide_by_hbar(commutator_density_functional(u, table[(beta, q)], setup.eta))


def weight_profile(f: QDiffPoly) -> dict:
    """Number of terms per dilaton weight (diagnostics)."""
    out: dict = {}
    for e, h, m, _ in f.terms:
        w = dilaton_weight(e, h, m)
        out[w] = out.get(w, 0) + 1
    return out

