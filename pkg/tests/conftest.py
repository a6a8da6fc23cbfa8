import random
from pathlib import Path

import pytest
import sympy as sp
from gmpy2 import mpq
from hypothesis import settings, strategies as st

from nilmap import PolyMap, Polynomial
from nilmap.polycore import get_engine, set_engine

DATA = Path(__file__).parent / "data"

settings.register_profile("nilmap", max_examples=40, deadline=None)
settings.load_profile("nilmap")


def symbols(n):
    return sp.symbols(f"x1:{n + 1}")


def to_sympy(p: Polynomial):
    xs = symbols(p.nvars)
    return sp.Add(*[
        sp.Rational(int(c.numerator), int(c.denominator)) * sp.Mul(*[x**k for x, k in zip(xs, e)])
        for e, c in p.items()
    ])


def from_sympy(expr, n: int) -> Polynomial:
    xs = symbols(n)
    poly = sp.Poly(sp.expand(expr), *xs)
    return Polynomial({e: mpq(int(c.p), int(c.q)) for e, c in poly.terms() if c != 0}, n)


def rand_poly(rng: random.Random, n: int, max_deg: int = 3, max_terms: int = 5, max_coef: int = 5) -> Polynomial:
    terms = {}
    for _ in range(rng.randint(0, max_terms)):
        e = [0] * n
        for _ in range(rng.randint(0, max_deg)):
            e[rng.randrange(n)] += 1
        terms[tuple(e)] = mpq(rng.randint(-max_coef, max_coef), rng.randint(1, 3))
    return Polynomial(terms, n)


rationals = st.builds(lambda p, q: mpq(p, q), st.integers(-6, 6), st.integers(1, 4))


@st.composite
def exponents(draw, n: int, max_deg: int):
    e, room = [], max_deg
    for _ in range(n):
        k = draw(st.integers(0, room))
        e.append(k)
        room -= k
    return tuple(draw(st.permutations(e)))


def polynomials(n: int, max_deg: int = 3, max_terms: int = 5):
    exps = exponents(n, max_deg)
    return st.dictionaries(exps, rationals, max_size=max_terms).map(lambda d: Polynomial(d, n))


def polymaps(n: int, max_deg: int = 2, max_terms: int = 3):
    return st.lists(polynomials(n, max_deg, max_terms), min_size=n, max_size=n).map(PolyMap)


@pytest.fixture
def python_engine():
    prev = get_engine()
    set_engine("python")
    yield
    set_engine(prev)
