"""Command-line front end.

Usage examples::

    qdr hamiltonian --cohft kdv --d 2 --eps 6 --hbar 2
    qdr verify --cohft ilw --p-max 2 --eps 4 --hbar 2 --output structured
    qdr flow --cohft kdv --d 1 --field 1
    qdr bracket --cohft kdv --f "u^2/2" --g "u^3/6"
    qdr coeffs --a 1,2
    qdr dispersionless-check --d 6 --hbar 3
    qdr miura --cohft toda --eps 4 --hbar 1 --udeg 3 --expr "u[omega,2]"

Polynomials are read and written in the grammar of :mod:`qdr.serialize`.
Structured output is JSON: every polynomial is an object
``{setup, truncation, terms: [{eps, hbar, params, monomial, coeff}]}`` with
``monomial`` a list of ``[field, jet]`` pairs (repeated for powers) and
``coeff`` holding exact ``re``/``im`` strings such as ``"-1/24"``.

Exit codes: 0 all checks pass, 1 a verification failed, 2 usage or
configuration error, 3 engine error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field

from .bracket import classical_bracket, commutator_density_functional
from .errors import (
    IncompatibleSetup,
    ParseError,
    QDRError,
    TruncationError,
    UndeclaredParameter,
)
from .hierarchy import CheckResult, Report, build_hierarchy, flow_equation, verify_all
from .jets import LocalFunctional, QDiffPoly, TruncationSpec, specialize, truncate
from .powersums import c_coeffs, power_sum_poly
from .scalars import as_rational, declare_parameters, format_rational
from .seeds import (
    SEEDS,
    dispersionless_kdv_oracle,
    toda_miura_forward,
    toda_miura_substitute,
)
from .serialize import format_qdp, parse_qdp, to_structured

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ENGINE = 0, 1, 2, 3

log = logging.getLogger("qdr")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    cohft: str = "kdv"
    d_max: int = 2
    p_max: int = 2
    trunc: TruncationSpec = field(default_factory=lambda: TruncationSpec(4, 2))
    output: str = "text"
    params: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d_max < 0 and self.command != "flow":
            raise UsageError("--d must be >= 0")
        if self.p_max < -1:
            raise UsageError("--p-max must be >= -1")


# --- helpers -------------------------------------------------------------------


def _parse_param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise UsageError(f"--param expects NAME=VALUE, got {text!r}")
    name, value = (s.strip() for s in text.split("=", 1))
    if value == "keep":
        return name, None
    try:
        return name, as_rational(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise UsageError(f"bad value for parameter {name!r}: {value!r}") from exc


def _setup(config: RunConfig):
    entry = SEEDS[config.cohft]
    trunc = config.trunc
    if config.cohft == "toda" and trunc.U is None:
        trunc = TruncationSpec(trunc.E, trunc.H, 4)
    setup = entry.builder(trunc)
    for name in config.params:
        if name not in entry.parameters:
            raise UsageError(f"cohft {config.cohft!r} has no parameter {name!r}; known: {list(entry.parameters)}")
    seed_text = config.options.get("seed")
    if seed_text:
        dens = parse_qdp(seed_text, setup.nfields, setup.seed.density.trunc, setup.aliases)
        setup.seed = LocalFunctional(dens)
        setup.builder = None
    dens = setup.seed.density
    for name, value in config.params.items():
        if value is not None:
            dens = specialize(dens, name, value)
    setup.seed = LocalFunctional(dens)
    return setup


def _structured(f: QDiffPoly, setup=None, **extra) -> dict:
    out = to_structured(f, setup.describe() if setup is not None else None)
    out.update(extra)
    return out


def _emit(text: str, stream) -> None:
    stream.write(text)
    if not text.endswith("\n"):
        stream.write("\n")


def _label(alpha: int, d: int, nfields: int) -> str:
    return f"G[{alpha},{d}]" if nfields > 1 else f"G[{d}]"


def _render_densities(config, setup, items, stream, symbol="u"):
    """items: list of (alpha, d, poly)."""
    if config.output == "structured":
        docs = [_structured(p, setup, alpha=a, d=d) for a, d, p in items]
        payload = docs[0] if len(docs) == 1 else {"densities": docs}
        _emit(json.dumps(payload, indent=2, sort_keys=True), stream)
        return
    for a, d, p in items:
        _emit(f"{_label(a, d, setup.nfields)} = {format_qdp(p, symbol)}", stream)


def _render_report(config, setup, report: Report, stream) -> int:
    if config.output == "structured":
        _emit(json.dumps(report.as_dict(setup), indent=2, sort_keys=True), stream)
    else:
        _emit(report.text(), stream)
    return EXIT_OK if report.passed else EXIT_FAIL


def _specialize_table(config, table):
    for name, value in config.params.items():
        if value is not None:
            table.densities = {k: specialize(v, name, value) for k, v in table.densities.items()}
    return table


# --- commands --------------------------------------------------------------------


def cmd_hamiltonian(config: RunConfig, stream) -> int:
    setup = _setup(config)
    table = _specialize_table(config, build_hierarchy(setup, config.d_max))
    alphas = [config.options["alpha"]] if config.options.get("alpha") else range(1, setup.nfields + 1)
    if config.options.get("only"):
        ds = [config.d_max]
    else:
        ds = range(-1, config.d_max + 1)
    items = [(a, d, table[(a, d)]) for a in alphas for d in ds]
    _render_densities(config, setup, items, stream)
    return EXIT_OK


def cmd_verify(config: RunConfig, stream) -> int:
    setup = _setup(config)
    d_max = max(config.d_max, config.p_max, 0)
    table = build_hierarchy(setup, d_max)
    report = verify_all(table, setup, config.p_max)
    return _render_report(config, setup, report, stream)


def cmd_flow(config: RunConfig, stream) -> int:
    setup = _setup(config)
    q = config.d_max
    table = _specialize_table(config, build_hierarchy(setup, max(q, 0)))
    fld = config.options.get("field") or 1
    beta = config.options.get("alpha") or 1
    if not 1 <= fld <= setup.nfields or not 1 <= beta <= setup.nfields:
        raise UsageError(f"field indices must lie in 1..{setup.nfields}")
    rhs = flow_equation(table, setup, fld, beta, q)
    if config.output == "structured":
        _emit(json.dumps(_structured(rhs, setup, field=fld, alpha=beta, d=q), indent=2, sort_keys=True), stream)
    else:
        _emit(f"du[{fld}]/dt[{beta},{q}] = {format_qdp(rhs)}", stream)
    return EXIT_OK


def cmd_bracket(config: RunConfig, stream) -> int:
    setup = _setup(config)
    f_text, g_text = config.options.get("f"), config.options.get("g")
    if not f_text or not g_text:
        raise UsageError("bracket needs --f and --g")
    t = config.trunc if setup.trunc.U is None else setup.trunc
    f = parse_qdp(f_text, setup.nfields, t, setup.aliases)
    g = parse_qdp(g_text, setup.nfields, t, setup.aliases)
    if config.options.get("classical"):
        res = classical_bracket(f, g, setup.eta).density
        label = "{f, g}"
    else:
        res = commutator_density_functional(f, g, setup.eta, t)
        label = "[f, g]"
    if config.output == "structured":
        _emit(json.dumps(_structured(res, setup), indent=2, sort_keys=True), stream)
    else:
        _emit(f"{label} = {format_qdp(res)}", stream)
    return EXIT_OK


def cmd_coeffs(config: RunConfig, stream) -> int:
    raw = config.options.get("a")
    if not raw:
        raise UsageError("coeffs needs --a, e.g. --a 1,2")
    try:
        exps = [int(x) for x in raw.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad exponent list {raw!r}") from exc
    if not exps or any(x < 1 for x in exps):
        raise UsageError("--a needs integers >= 1")
    cc = c_coeffs(exps)
    poly = power_sum_poly(exps)
    if config.output == "structured":
        payload = {
            "a": exps,
            "C": {str(j): format_rational(c) for j, c in sorted(cc.coeffs.items())},
            "Ctilde": [format_rational(c) for c in poly.coeffs],
        }
        _emit(json.dumps(payload, indent=2, sort_keys=True), stream)
    else:
        for j, c in sorted(cc.coeffs.items()):
            _emit(f"C[{j}] = {format_rational(c)}", stream)
        terms = [f"({format_rational(c)})*N^{j}" for j, c in enumerate(poly.coeffs) if c]
        _emit("Ctilde(N) = " + (" + ".join(terms) if terms else "0"), stream)
    return EXIT_OK


def cmd_dispersionless_check(config: RunConfig, stream) -> int:
    if config.cohft != "kdv":
        raise UsageError("dispersionless-check is only defined for --cohft kdv")
    H = config.trunc.H if config.trunc.H is not None else 2
    E = config.trunc.E or 0
    setup = SEEDS["kdv"].builder(TruncationSpec(E, H))
    table = build_hierarchy(setup, config.d_max)
    oracle = dispersionless_kdv_oracle(config.d_max, H)
    flat = TruncationSpec(0, H)
    report = Report()
    for d in range(-1, config.d_max + 1):
        res = truncate(table[(1, d)], flat) - oracle[d]
        report.checks.append(CheckResult(f"dispersionless G[{d}] at eps=0", res.is_zero(), res))
    return _render_report(config, setup, report, stream)


def cmd_miura(config: RunConfig, stream) -> int:
    if config.cohft != "toda":
        raise UsageError("miura is only defined for --cohft toda")
    setup = _setup(config)
    inverse = bool(config.options.get("inverse"))
    op = toda_miura_forward if inverse else toda_miura_substitute
    t = setup.trunc
    expr = config.options.get("expr")
    if expr:
        f = parse_qdp(expr, setup.nfields, t, setup.aliases)
        res = op(f, t)
        sym = "u" if inverse else "v"
        if config.output == "structured":
            _emit(json.dumps(_structured(res, setup, variables=sym), indent=2, sort_keys=True), stream)
        else:
            _emit(format_qdp(res, sym), stream)
        return EXIT_OK
    table = _specialize_table(config, build_hierarchy(setup, config.d_max))
    items = [(a, d, op(table[(a, d)], t)) for a in range(1, setup.nfields + 1) for d in range(-1, config.d_max + 1)]
    _render_densities(config, setup, items, stream, symbol="u" if inverse else "v")
    return EXIT_OK


COMMANDS = {
    "hamiltonian": cmd_hamiltonian,
    "verify": cmd_verify,
    "flow": cmd_flow,
    "bracket": cmd_bracket,
    "coeffs": cmd_coeffs,
    "dispersionless-check": cmd_dispersionless_check,
    "miura": cmd_miura,
}


# --- argument parsing -------------------------------------------------------------


def _nonneg_or_none(text: str):
    if text.lower() in ("none", "inf", "unbounded"):
        return None
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cohft", choices=sorted(SEEDS), default="kdv")
    common.add_argument("--d", type=int, default=2, help="top descendant index d_max (flow: q)")
    common.add_argument("--p-max", type=int, default=2)
    common.add_argument("--eps", type=_nonneg_or_none, default=4, help="eps truncation E")
    common.add_argument("--hbar", type=_nonneg_or_none, default=2, help="hbar truncation H")
    common.add_argument("--udeg", type=_nonneg_or_none, default=None, help="bound on u-degree + hbar power")
    common.add_argument("--output", choices=("text", "structured"), default="text")
    common.add_argument("--param", action="append", default=[], metavar="NAME=VALUE", help="VALUE is a rational or 'keep'")
    common.add_argument("--seed", help="override the seed density G_{1,1}")
    common.add_argument("--alpha", type=int, help="restrict to one primary field index")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qdr", description="Quantum double ramification hierarchy engine.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("hamiltonian", parents=[common], help="print the densities G_{a,d}")
    p.add_argument("--only", action="store_true", help="print only d = --d")
    sub.add_parser("verify", parents=[common], help="run all hierarchy checks")
    p = sub.add_parser("flow", parents=[common], help="right-hand side of a quantum flow")
    p.add_argument("--field", type=int, default=1)
    p = sub.add_parser("bracket", parents=[common], help="commutator of a density with a functional")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--classical", action="store_true", help="hydrodynamic Poisson bracket instead")
    p = sub.add_parser("coeffs", parents=[common], help="delta_+ product coefficients C_j^{a}")
    p.add_argument("--a", required=True, help="comma separated exponents >= 1")
    sub.add_parser("dispersionless-check", parents=[common], help="closed formula vs recursion at eps = 0")
    p = sub.add_parser("miura", parents=[common], help="Toda Miura change of variables")
    p.add_argument("--expr", help="polynomial in u to rewrite (default: the built densities)")
    p.add_argument("--inverse", action="store_true", help="rewrite a polynomial in v back in u")
    return parser


def _config(ns: argparse.Namespace) -> RunConfig:
    params = dict(_parse_param(p) for p in ns.param)
    known = {"command", "cohft", "d", "p_max", "eps", "hbar", "udeg", "output", "param", "verbose"}
    options = {k: v for k, v in vars(ns).items() if k not in known}
    for name, v in (("--eps", ns.eps), ("--hbar", ns.hbar), ("--udeg", ns.udeg)):
        if v is not None and v < 0:
            raise UsageError(f"{name} must be non-negative")
    return RunConfig(
        command=ns.command,
        cohft=ns.cohft,
        d_max=ns.d,
        p_max=ns.p_max,
        trunc=TruncationSpec(ns.eps, ns.hbar, ns.udeg),
        output=ns.output,
        params=params,
        options=options,
    )


def main(argv: list[str] | None = None, stream=None, err=None) -> int:
    stream = stream or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _config(ns)
        for name in SEEDS[config.cohft].parameters:
            declare_parameters(name)
        return COMMANDS[config.command](config, stream)
    except (UsageError, ParseError, UndeclaredParameter, IncompatibleSetup, TruncationError) as exc:
        err.write(f"qdr: error: {exc}\n")
        return EXIT_USAGE
    except QDRError as exc:
        err.write(f"qdr: engine error: {type(exc).__name__}: {exc}\n")
        return EXIT_ENGINE
    except (ArithmeticError, ValueError) as exc:
        err.write(f"qdr: engine error: {type(exc).__name__}: {exc}\n")
        return EXIT_ENGINE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
