import pytest

from qdr.errors import TruncationError
from qdr.hierarchy import build_hierarchy, verify_degree, verify_eps_parity
from qdr.jets import QDiffPoly, TruncationSpec, partial, specialize, truncate
from qdr.seeds import (
    SEEDS,
    TODA_ALIASES,
    dispersionless_kdv_oracle,
    get_seed,
    seed_ilw,
    seed_kdv,
    seed_toda,
    toda_miura_forward,
    toda_miura_substitute,
)
from qdr.serialize import parse_qdp as P


def T2(text, trunc=TruncationSpec()):
    return P(text, nfields=2, trunc=trunc, aliases=TODA_ALIASES)


def test_kdv_seed():
    s = seed_kdv(TruncationSpec(4, 2))
    assert s.seed.density == P("u^3/6 + eps^2/24*u*u[1,2] - i*hbar/24*u")
    assert s.seed.density.hbar_part(0) == P("u^3/6 + eps^2/24*u*u[1,2]")
    assert seed_kdv(TruncationSpec(0, 1)).seed.density == P("u^3/6 - i*hbar/24*u")


def test_ilw_seed():
    s = seed_ilw(TruncationSpec(2, 1))
    expected = P("u^3/6 + eps^2/24*u*u[1,2] - i*hbar/24*u - i*hbar*mu/24*u*u[1,2] - i*hbar*eps^2*mu^2/1440*u*u[1,4]")
    assert s.seed.density == expected
    assert s.seed.density.filter(lambda e, h, m, p: e == 0 and h == 1) == P("-i*hbar/24*u - i*hbar*mu/24*u*u[1,2]")


@pytest.mark.parametrize("E", [0, 2, 4, 6])
def test_ilw_at_mu_zero_is_kdv(E):
    t = TruncationSpec(E, 2)
    assert specialize(seed_ilw(t).seed.density, "mu", 0) == seed_kdv(t).seed.density


def test_toda_seed_hbar_linear_sector():
    s = seed_toda(TruncationSpec(4, 2, 4))
    lin = s.seed.density.filter(lambda e, h, m, p: h == 1)
    assert lin == T2(
        "-i*hbar/12*u[1,0] + i*hbar/12*u[omega,2]*u[1,0]"
        " - i*hbar*eps^2/720*u[omega,4]*u[1,0] + i*hbar*eps^4/30240*u[omega,6]*u[1,0]"
    )


def test_toda_q_sector_low_order():
    s = seed_toda(TruncationSpec(0, 0, 1))
    q_part = s.seed.density.filter(lambda e, h, m, p: bool(p))
    assert q_part == T2("-2*q")


def test_toda_q_sector_cubic():
    # (w - 2) e^w + w = -2 + 0*w + 0*w^2 + w^3/6 + ...; the seed keeps one level above U
    s = seed_toda(TruncationSpec(0, 0, 2))
    assert s.seed.density.filter(lambda e, h, m, p: bool(p)) == T2("-2*q + q*u[omega,0]^3/6")


def test_toda_requires_finite_u():
    with pytest.raises(TruncationError):
        seed_toda(TruncationSpec(4, 2))


def test_toda_metric_and_fields():
    s = seed_toda(TruncationSpec(2, 1, 3))
    assert s.nfields == 2 and s.aliases == {"omega": 2}
    assert s.eta.upper(1, 2) == 1 and s.eta.upper(1, 1) == 0 and s.eta.upper(2, 2) == 0


def test_registry():
    assert set(SEEDS) == {"kdv", "ilw", "toda"}
    assert get_seed("ilw").parameters == ("mu",)
    with pytest.raises(KeyError):
        get_seed("nope")


@pytest.mark.parametrize("name", ["kdv", "ilw", "toda"])
def test_seed_parity_and_degree(name):
    setup = SEEDS[name].builder(TruncationSpec(4, 2, 4))
    from qdr.hierarchy import HierarchyTable

    table = HierarchyTable({(1, 1): setup.seed.density}, {(1, 1): True}, 1)
    assert verify_eps_parity(table, setup).passed
    assert verify_degree(table, setup).passed


def test_oracle_examples():
    o = dispersionless_kdv_oracle(2, 2)
    assert o[-1] == P("u")
    assert o[0].hbar_part(0) == P("u^2/2")
    assert o[1].filter(lambda e, h, m, p: h == 1) == P("-i*hbar/24*(u + u[1,2])")


def test_oracle_string_equation():
    o = dispersionless_kdv_oracle(6, 3)
    assert partial(o[-1], 1, 0) == QDiffPoly.constant(1, 1, o[-1].trunc)
    for d in range(0, 7):
        assert partial(o[d], 1, 0) == o[d - 1]


@pytest.mark.parametrize("H", [0, 1, 2])
def test_oracle_matches_recursion(H):
    table = build_hierarchy(seed_kdv(TruncationSpec(2, H)), 4)
    o = dispersionless_kdv_oracle(4, H)
    for d in range(-1, 5):
        assert truncate(table[(1, d)], TruncationSpec(0, H)) == o[d]


def test_classical_dispersionless_densities():
    from math import factorial

    o = dispersionless_kdv_oracle(5, 0)
    for d in range(-1, 6):
        assert o[d] == P(f"u^{d + 2}") / factorial(d + 2)


def test_miura_examples():
    t = TruncationSpec(4, 0, 3)
    assert toda_miura_substitute(T2("u[1,0]", t), t) == T2(
        "u[1,0] - eps/2*u[1,1] + eps^2/8*u[1,2] - eps^3/48*u[1,3] + eps^4/384*u[1,4]", t
    )
    assert toda_miura_substitute(T2("u[omega,0]", t), t) == T2("u[2,0] - eps^2/24*u[2,2] + 7*eps^4/5760*u[2,4]", t)
    t0 = TruncationSpec(0, 2, 4)
    f = seed_toda(t0).seed.density
    assert toda_miura_substitute(truncate(f, t0), t0) == truncate(f, t0)


def test_miura_round_trip():
    t = TruncationSpec(4, 2, 4)
    f = truncate(seed_toda(t).seed.density, t)
    assert toda_miura_forward(toda_miura_substitute(f, t), t) == f
    assert toda_miura_substitute(toda_miura_forward(f, t), t) == f


def test_miura_forward_coefficients():
    t = TruncationSpec(2, 0, 2)
    assert toda_miura_forward(T2("u[omega,0]", t), t) == T2("u[2,0] + eps^2/24*u[2,2]", t)
    assert toda_miura_forward(T2("u[1,0]", t), t) == T2("u[1,0] + eps/2*u[1,1] + eps^2/8*u[1,2]", t)
