import pytest

from qdr.errors import NotExact, QDRError
from qdr.hierarchy import (
    build_hierarchy,
    flow_equation,
    recursion_step,
    verify_all,
    verify_commutativity,
    verify_degree,
    verify_eps_parity,
    verify_i_pattern,
    verify_second_recursion,
    verify_string,
)
from qdr.jets import LocalFunctional, QDiffPoly, TruncationSpec, functional_equal, truncate
from qdr.seeds import seed_kdv
from qdr.serialize import parse_qdp as P

from test_bracket import KDV_G0, KDV_G1, KDV_G2


def constant_free(f):
    return f.filter(lambda e, h, m, p: bool(m))


@pytest.fixture(scope="module")
def kdv():
    setup = seed_kdv(TruncationSpec(6, 2))
    return setup, build_hierarchy(setup, 2)


def test_recursion_steps():
    setup = seed_kdv(TruncationSpec(6, 2))
    g0 = recursion_step(setup, P("u", trunc=setup.trunc))
    assert g0 == P("u^2/2 + eps^2/24*u[1,2]")
    g1 = recursion_step(setup, truncate(KDV_G0, setup.trunc))
    assert g1 == constant_free(KDV_G1)
    g2 = recursion_step(setup, truncate(KDV_G1, setup.trunc))
    assert g2 == constant_free(KDV_G2)


def test_table(kdv):
    setup, table = kdv
    assert table[(1, -1)] == P("u")
    assert table[(1, 0)] == KDV_G0
    assert table[(1, 1)] == KDV_G1
    assert table[(1, 2)] == KDV_G2
    assert all(table.const_fixed[(1, d)] for d in range(-1, 3))
    assert table.const_fixed[(1, 3)] is False
    assert table.keys()[0] == (1, -1)


def test_classical_limit_of_table(kdv):
    setup, table = kdv
    g1 = truncate(table[(1, 1)], TruncationSpec(6, 0))
    assert functional_equal(g1, P("u^3/6 + eps^2/24*u*u[1,2]"))


def test_reports_pass(kdv):
    setup, table = kdv
    for check in (verify_string, verify_second_recursion, verify_eps_parity, verify_degree, verify_i_pattern):
        report = check(table, setup)
        assert report.passed and report.checks, check.__name__
    report = verify_commutativity(table, setup, 2)
    assert report.passed
    assert len(report.checks) == 10


def test_casimir_pairs_vanish(kdv):
    setup, table = kdv
    from qdr.bracket import commutator_density_functional

    for d in range(-1, 3):
        res = commutator_density_functional(table[(1, -1)], table[(1, d)], setup.eta, setup.trunc)
        assert functional_equal(res, QDiffPoly.zero())
        res = commutator_density_functional(table[(1, d)], table[(1, -1)], setup.eta, setup.trunc)
        assert functional_equal(res, QDiffPoly.zero())


def corrupted_setup(trunc):
    setup = seed_kdv(trunc)
    dens = P("u^3/5 + eps^2/24*u*u[1,2] - i*hbar/24*u", trunc=setup.seed.density.trunc)
    setup.seed = LocalFunctional(dens)
    setup.builder = None
    return setup


def test_corrupted_seed_is_detected():
    setup = corrupted_setup(TruncationSpec(6, 3))
    table = build_hierarchy(setup, 3)
    report = verify_all(table, setup, 3)
    assert not report.passed
    failed = {c.name for c in report.failures}
    assert any(name.startswith("string") for name in failed)
    # [G_0, G_2] itself is not required to fail, but the report must show residuals
    assert all(c.residual is not None and not c.residual.is_zero() for c in report.failures)


def test_not_exact_seed_fails_after_retry():
    setup = seed_kdv(TruncationSpec(2, 1))
    setup.seed = LocalFunctional(P("u^3/6 + u*u[1,1]^2", trunc=setup.seed.density.trunc))

    def builder(t):
        s = seed_kdv(t)
        s.seed = LocalFunctional(P("u^3/6 + u*u[1,1]^2", trunc=s.seed.density.trunc))
        s.builder = None
        return s

    setup.builder = builder
    with pytest.raises(NotExact, match="nor at"):
        build_hierarchy(setup, 1)


def test_flows(kdv):
    setup, table = kdv
    assert flow_equation(table, setup, 1, 1, 0) == P("u[1,1]")
    assert flow_equation(table, setup, 1, 1, -1).is_zero()
    rhs = flow_equation(table, setup, 1, 1, 1)
    assert truncate(rhs, TruncationSpec(6, 0)) == P("u*u[1,1] + eps^2/12*u[1,3]")
    with pytest.raises(QDRError):
        flow_equation(table, setup, 1, 1, 9)


def test_report_rendering(kdv):
    setup, table = kdv
    report = verify_all(table, setup, 1)
    text = report.text()
    assert text.splitlines()[-1].endswith("checks passed")
    doc = report.as_dict(setup)
    assert doc["passed"] is True
    assert doc["truncation"] == {"E": 6, "H": 2, "U": None}


def test_negative_d_max_rejected():
    with pytest.raises(ValueError):
        build_hierarchy(seed_kdv(TruncationSpec(2, 1)), -1)


@pytest.mark.parametrize(
    "builder, trunc, d_max",
    [(seed_kdv, TruncationSpec(8, 3), 4), ("ilw", TruncationSpec(6, 2), 3), ("toda", TruncationSpec(2, 1, 5), 2)],
)
def test_higher_orders_verify(builder, trunc, d_max):
    from qdr.seeds import SEEDS

    setup = SEEDS[builder].builder(trunc) if isinstance(builder, str) else builder(trunc)
    table = build_hierarchy(setup, d_max)
    report = verify_all(table, setup, d_max)
    assert report.passed, report.text()


def test_retry_recovers_from_tight_truncation():
    # the builder hook is used only on NotExact; a consistent seed never needs it
    calls = []

    def builder(t):
        calls.append(t)
        return seed_kdv(t)

    setup = seed_kdv(TruncationSpec(4, 1))
    setup.builder = builder
    build_hierarchy(setup, 2)
    assert calls == []
