import random
import threading

import pytest
import sympy as sp
from gmpy2 import mpq
from hypothesis import given, strategies as st

from nilmap import PolyMap, Polynomial, formal_inverse, jbar_series_check, preservation_check
from nilmap.families import (
    DependentFamilySpec,
    EssenFamilySpec,
    build_dependent_H,
    build_essen_H,
    build_essen_inverse,
    cegmh_nilpotent_part,
    random_dim4_spec,
    random_essen_spec,
    build_dim4_H,
)
from nilmap.inversion import InversionCancelled, InversionError, NotNilpotentError
from nilmap.polycore import get_engine, set_engine

from conftest import from_sympy, symbols

U = Polynomial.univariate


def F_of(H: PolyMap, lam) -> PolyMap:
    return PolyMap.scaled_identity(lam, H.nvars) + H


def test_triangular_inverse_against_sympy():
    a, b, c = symbols(3)
    H = PolyMap([from_sympy(e, 3) for e in (b**2 - c, c**3, sp.Integer(2))])
    F = F_of(H, 1)
    u = sp.symbols("u1:4")
    # back-substitute x3, x2, x1 from u = F(x)
    x3 = u[2] - 2
    x2 = u[1] - x3**3
    x1 = u[0] - x2**2 + x3
    G = formal_inverse(F, 1).G
    assert G == PolyMap([from_sympy(e.subs(dict(zip(u, (a, b, c)))), 3) for e in (x1, x2, x3)])


def test_bundle_relations():
    H = build_essen_H(EssenFamilySpec(4, U([0, 1, 0, 1]), U([0, 1])))
    lam = mpq(-2)
    bundle = formal_inverse(F_of(H, lam), lam)
    X = PolyMap.identity(4)
    assert bundle.G.compose(bundle.F).is_identity()
    assert bundle.F.compose(bundle.G).is_identity()
    assert bundle.G == (X + bundle.H_tilde).scale(1 / lam)
    # (X + H/lam)^{-1} == X + H_bar
    assert (X + bundle.H_bar).compose(X + bundle.H.scale(1 / lam)).is_identity()
    assert bundle.certificate.nilpotent


def test_cegmh_part_inverse():
    H = cegmh_nilpotent_part()
    bundle = formal_inverse(F_of(H, -1), -1)
    assert bundle.G.compose(bundle.F).is_identity()


def test_translation_handled():
    spec = DependentFamilySpec.from_values(U([1, 0, 1]), [(1, 1, 3, -2)], 2)
    F = F_of(build_dependent_H(spec), 3)
    G = formal_inverse(F, 3).G
    assert F.compose(G).is_identity() and G.compose(F).is_identity()


def test_not_nilpotent_rejected():
    F = PolyMap([Polynomial.parse("x1 + x1^2", 2), Polynomial.parse("x2", 2)])
    with pytest.raises(NotNilpotentError):
        formal_inverse(F, 1)


def test_lambda_zero_rejected():
    with pytest.raises(ValueError):
        formal_inverse(PolyMap.identity(2), 0)


def test_iteration_budget():
    H = build_essen_H(EssenFamilySpec(5, U([0, 1, 0, 0, 1]), U([0, 0, 1])))
    with pytest.raises(InversionError):
        formal_inverse(F_of(H, 1), 1, max_iter=2)


def test_cancellation():
    ev = threading.Event()
    ev.set()
    H = build_essen_H(EssenFamilySpec(4, U([0, 1, 0, 1]), U([0, 1])))
    with pytest.raises(InversionCancelled):
        formal_inverse(F_of(H, 1), 1, cancel=ev)


def test_engines_agree_on_inverse():
    spec = random_essen_spec(random.Random(4), 4, g_degree=1)
    F = F_of(build_essen_H(spec), spec.lam)
    prev = get_engine()
    try:
        set_engine("python")
        slow = formal_inverse(F, spec.lam).G
    finally:
        set_engine(prev)
    assert formal_inverse(F, spec.lam).G == slow == build_essen_inverse(spec, cross_check=False)


def test_preservation_and_series():
    rng = random.Random(21)
    for spec in [random_essen_spec(rng, 4, g_degree=1), random_dim4_spec(rng, f_degree=2)]:
        H = build_essen_H(spec) if isinstance(spec, EssenFamilySpec) else build_dim4_H(spec)
        F = F_of(H, spec.lam)
        rec = preservation_check(F, spec.lam)
        assert rec.nilpotent and rec.independent and rec.witness is None
        assert jbar_series_check(F, rec.bundle)


def test_preservation_dependent_has_witness():
    spec = DependentFamilySpec.from_values(U([0, 0, 1]), [(1, 2)], 2)
    rec = preservation_check(F_of(build_dependent_H(spec), 2), 2)
    assert rec.nilpotent and not rec.independent


@st.composite
def triangular_maps(draw):
    # H_i depends on x_{i+1}..x_n only, so JH is strictly upper triangular
    n = draw(st.integers(2, 3))
    comps = []
    for i in range(n):
        terms = {}
        for _ in range(draw(st.integers(0, 3))):
            e = [0] * n
            for j in range(i + 1, n):
                e[j] = draw(st.integers(0, 2))
            terms[tuple(e)] = mpq(draw(st.integers(-3, 3)), draw(st.integers(1, 3)))
        comps.append(Polynomial(terms, n))
    lam = mpq(draw(st.sampled_from([1, -1, 2, -3])), draw(st.integers(1, 2)))
    return PolyMap(comps), lam


@given(triangular_maps())
def test_inverse_is_two_sided(case):
    H, lam = case
    F = F_of(H, lam)
    bundle = formal_inverse(F, lam)
    assert F.compose(bundle.G).is_identity()
    assert bundle.G.compose(F).is_identity()
    assert preservation_check(F, lam, bundle=bundle).nilpotent
