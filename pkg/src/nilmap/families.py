"""Constructors for the nilpotent-Jacobian map families and their inverses.

Every family is described by a frozen, validated spec dataclass. Builders
return :class:`~nilmap.polycore.PolyMap` objects; closed-form inverses are
checked by exact composition and against :func:`nilmap.inversion.formal_inverse`.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from gmpy2 import mpq

from .polycore import PolyMap, Polynomial, to_rational

log = logging.getLogger(__name__)

__all__ = [
    "FamilySpecError",
    "InverseMismatchError",
    "PairCoeffs",
    "DependentFamilySpec",
    "HurwitzFieldSpec",
    "Density",
    "EssenFamilySpec",
    "Dim4FamilySpec",
    "CegmhSpec",
    "ParsedSpec",
    "build_dependent_H",
    "build_hurwitz_F",
    "alpha_bound",
    "build_density",
    "build_essen_H",
    "build_essen_inverse",
    "essen_sum_identity_check",
    "build_dim4_H",
    "build_dim4_inverse",
    "dim4_phi_identity_check",
    "build_dependent_inverse",
    "dependent_inverse_closed_form",
    "cegmh_field",
    "cegmh_nilpotent_part",
    "parse_family_spec",
    "random_dependent_spec",
    "random_essen_spec",
    "random_dim4_spec",
]


class FamilySpecError(ValueError):
    """A family parameter bundle violates its stated restrictions."""


class InverseMismatchError(ArithmeticError):
    """A closed-form inverse disagrees with the verified formal inverse."""


def _as_poly(value, nvars: int) -> Polynomial:
    if isinstance(value, Polynomial):
        if value.nvars != nvars:
            raise FamilySpecError(f"expected a polynomial in {nvars} variables, got {value.nvars}")
        return value
    return Polynomial.constant(value, nvars)


def _as_univariate(value) -> Polynomial:
    if isinstance(value, Polynomial):
        if value.nvars != 1:
            raise FamilySpecError("expected a univariate polynomial")
        return value
    return Polynomial.univariate(value)


def _odd_negative(f: Polynomial) -> bool:
    """``f = sum_{i=0}^{s} A_{2i+1} T^{2i+1}`` with every ``A_{2i+1} < 0``."""
    d = f.degree()
    if d < 1 or d % 2 == 0:
        return False
    for k in range(d + 1):
        c = f.coeff((k,))
        if k % 2 == 0 and c:
            return False
        if k % 2 == 1 and not c < 0:
            return False
    return True


def _even_positive(R: Polynomial) -> bool:
    """``R = sum_{l=1}^{k} d_{2l} t^{2l}`` with every ``d_{2l} > 0``."""
    d = R.degree()
    if d < 2 or d % 2:
        return False
    for k in range(d + 1):
        c = R.coeff((k,))
        if (k % 2 == 1 or k == 0) and c:
            return False
        if k % 2 == 0 and k > 0 and not c > 0:
            return False
    return True


# ---------------------------------------------------------------------------
# dependent rows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairCoeffs:
    """Coefficients of one coordinate pair ``(x_{2j-1}, x_{2j})``."""

    a_odd: Polynomial
    a_even: Polynomial
    b_odd: Polynomial
    b_even: Polynomial


@dataclass(frozen=True)
class DependentFamilySpec:
    """``H_{2j-1} = a_{2j} f(s_j) + b_{2j-1}``, ``H_{2j} = -a_{2j-1} f(s_j) + b_{2j}``.

    Here ``s_j = a_{2j-1} x_{2j-1} + a_{2j} x_{2j}`` and the pair-``j``
    coefficients may depend only on ``x_1 .. x_{2j-2}``.
    """

    n: int
    f: Polynomial
    pairs: tuple[PairCoeffs, ...]

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise FamilySpecError(f"n must be even and positive, got {self.n}")
        object.__setattr__(self, "f", _as_univariate(self.f))
        if len(self.pairs) != self.n // 2:
            raise FamilySpecError(f"need {self.n // 2} coefficient pairs, got {len(self.pairs)}")
        fixed = []
        for j, pc in enumerate(self.pairs):
            if not isinstance(pc, PairCoeffs):
                pc = PairCoeffs(*pc) if not isinstance(pc, Mapping) else PairCoeffs(**pc)
            pc = PairCoeffs(*(_as_poly(v, self.n) for v in (pc.a_odd, pc.a_even, pc.b_odd, pc.b_even)))
            allowed = set(range(2 * j))
            for name in ("a_odd", "a_even", "b_odd", "b_even"):
                extra = getattr(pc, name).variables() - allowed
                if extra:
                    raise FamilySpecError(
                        f"pair {j + 1}: {name} may only use x1..x{2 * j}, "
                        f"found x{min(extra) + 1}"
                    )
            fixed.append(pc)
        object.__setattr__(self, "pairs", tuple(fixed))

    @classmethod
    def from_values(cls, f, pairs: Sequence[Sequence], n: int | None = None) -> "DependentFamilySpec":
        """Convenience: ``pairs`` as ``(a_odd, a_even[, b_odd, b_even])`` tuples."""
        n = 2 * len(pairs) if n is None else n
        built = []
        for p in pairs:
            p = list(p) + [0] * (4 - len(p))
            built.append(PairCoeffs(*(_as_poly(v, n) for v in p)))
        return cls(n, _as_univariate(f), tuple(built))


def build_dependent_H(spec: DependentFamilySpec) -> PolyMap:
    n = spec.n
    comps = []
    for j, pc in enumerate(spec.pairs):
        x_odd, x_even = Polynomial.var(2 * j, n), Polynomial.var(2 * j + 1, n)
        s = pc.a_odd * x_odd + pc.a_even * x_even
        fs = spec.f.compose([s])
        comps.append(pc.a_even * fs + pc.b_odd)
        comps.append(-(pc.a_odd * fs) + pc.b_even)
    return PolyMap(comps)


def dependent_inverse_closed_form(spec: DependentFamilySpec, lam) -> PolyMap:
    """Closed-form candidate inverse of ``lam X + H`` with ``gamma = 1/lam``.

    Component ``2j-1`` is ``gamma x - gamma a_{2j} f(gamma s_j) - b_{2j-1}``
    with the coefficients evaluated at the same variables as ``x``.
    Only exact when the coefficients are constant and ``b`` vanishes (or
    ``lam == 1``); callers must verify by composition.
    """
    lam = to_rational(lam)
    if not lam:
        raise FamilySpecError("lambda must be nonzero")
    gamma = 1 / lam
    n = spec.n
    comps = []
    for j, pc in enumerate(spec.pairs):
        x_odd, x_even = Polynomial.var(2 * j, n), Polynomial.var(2 * j + 1, n)
        fs = spec.f.compose([(pc.a_odd * x_odd + pc.a_even * x_even).scale(gamma)])
        comps.append(x_odd.scale(gamma) - (pc.a_even * fs).scale(gamma) - pc.b_odd)
        comps.append(x_even.scale(gamma) + (pc.a_odd * fs).scale(gamma) - pc.b_even)
    return PolyMap(comps)


def build_dependent_inverse(spec: DependentFamilySpec, lam, *, return_source: bool = False,
                            formal: PolyMap | None = None):
    """Polynomial inverse of ``lam X + H`` for the dependent-rows family.

    The closed form is tried first and kept only if it composes
    to the identity on both sides; otherwise the formal inverse is used
    (``formal`` when given, already verified). With ``return_source`` the
    result is ``(G, "closed_form" | "formal")``.
    """
    from .inversion import compose_maps, formal_inverse

    lam = to_rational(lam)
    if not lam:
        raise FamilySpecError("lambda must be nonzero")
    H = build_dependent_H(spec)
    F = PolyMap.scaled_identity(lam, spec.n) + H
    G = dependent_inverse_closed_form(spec, lam)
    if compose_maps(F, G).is_identity() and compose_maps(G, F).is_identity():
        source = "closed_form"
    else:
        log.info("dependent-family closed form fails composition; using formal inverse")
        G = formal if formal is not None else formal_inverse(F, lam).G
        source = "formal"
    return (G, source) if return_source else G


# ---------------------------------------------------------------------------
# almost Hurwitz fields and densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HurwitzFieldSpec:
    """Parameters of the ``(n+1)``-dimensional almost Hurwitz field.

    ``base`` must have all ``b_i == 0`` and an odd ``f`` whose coefficients
    are all negative; ``R`` is an even polynomial ``sum d_{2l} t^{2l}`` with
    every ``d_{2l} > 0``.
    """

    base: DependentFamilySpec
    lam: Any
    R: Polynomial

    def __post_init__(self):
        lam = to_rational(self.lam)
        if not lam < 0:
            raise FamilySpecError(f"lambda must be negative, got {lam}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "R", _as_univariate(self.R))
        for j, pc in enumerate(self.base.pairs):
            if pc.b_odd or pc.b_even:
                raise FamilySpecError(f"pair {j + 1}: b coefficients must vanish for the Hurwitz field")
        if not _odd_negative(self.base.f):
            raise FamilySpecError("f must be odd with every coefficient A_{2i+1} < 0")
        if not _even_positive(self.R):
            raise FamilySpecError("R must be sum_{l=1}^k d_{2l} t^{2l} with every d_{2l} > 0")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def k(self) -> int:
        """Number of terms of ``R``."""
        return self.R.degree() // 2

    @property
    def s(self) -> int:
        return (self.base.f.degree() - 1) // 2

    @property
    def A1(self) -> mpq:
        return self.base.f.coeff((1,))

    @classmethod
    def simple(cls, n: int, lam, A1, a: Sequence, R_coeffs: Sequence, signs: Sequence[int] | None = None):
        """Constant-coefficient instance with ``f = A1 t`` and ``a_{2j-1} = ±a_{2j} = a[j]``.

        ``R_coeffs`` lists ``d_2, d_4, ...``.
        """
        signs = signs or [1] * (n // 2)
        pairs = [(aj, sg * to_rational(aj)) for aj, sg in zip(a, signs, strict=True)]
        base = DependentFamilySpec.from_values(Polynomial.univariate([0, A1]), pairs, n)
        R = Polynomial({(2 * (l + 1),): d for l, d in enumerate(R_coeffs)}, 1)
        return cls(base, lam, R)


def build_hurwitz_F(spec: HurwitzFieldSpec) -> PolyMap:
    """Rotation in each pair plus ``R(x_{n+1}) (lam x + H(x), 0)``; last entry ``-x_{n+1} R``."""
    n = spec.n
    m = n + 1
    H = build_dependent_H(spec.base)
    last = Polynomial.var(n, m)
    Rx = spec.R.compose([last])
    comps = []
    for i in range(n):
        rot = -Polynomial.var(i + 1, m) if i % 2 == 0 else Polynomial.var(i - 1, m)
        lin = Polynomial.var(i, m).scale(spec.lam) + H[i].embed(m)
        comps.append(rot + Rx * lin)
    comps.append(-(last * Rx))
    return PolyMap(comps)


def alpha_bound(spec: HurwitzFieldSpec) -> mpq:
    """Lower bound on the density exponent for the constant-coefficient case.

    Requires constant ``a_{2j-1} = ±a_{2j}``, ``f = A1 t`` and
    ``a_{2j-1}^2 < lam / A1``; returns
    ``max{2, (3 - n lam)/2, max_j (2k + 1 - n lam) / (2 (a_{2j-1}^2 A1 - lam))}``.
    """
    f = spec.base.f
    if f.degree() != 1 or f.coeff((0,)):
        raise FamilySpecError("alpha_bound needs f = A1 t (A_{2i+1} = 0 for i >= 1)")
    A1, lam, n, k = spec.A1, spec.lam, spec.n, spec.k
    terms = [mpq(2), (3 - n * lam) / 2]
    for j, pc in enumerate(spec.base.pairs):
        if not (pc.a_odd.is_constant() and pc.a_even.is_constant()):
            raise FamilySpecError(f"pair {j + 1}: alpha_bound needs constant a coefficients")
        a_odd, a_even = pc.a_odd.constant_term(), pc.a_even.constant_term()
        if a_odd != a_even and a_odd != -a_even:
            raise FamilySpecError(f"pair {j + 1}: need a_{2 * j + 1} = ±a_{2 * j + 2}")
        if not a_odd * a_odd < lam / A1:
            raise FamilySpecError(
                f"pair {j + 1}: a_{2 * j + 1}^2 = {a_odd * a_odd} must be < lambda/A1 = {lam / A1}"
            )
        terms.append((2 * k + 1 - n * lam) / (2 * (a_odd * a_odd * A1 - lam)))
    return max(terms)


@dataclass(frozen=True)
class Density:
    """``rho = 1 / P^alpha`` with ``P`` positive definite and ``P(0) = 0``.

    ``P`` must be a sum of even pure powers with positive coefficients
    covering every variable. ``alpha`` only has to be positive here;
    integrability (``alpha > 2``) is reported by
    :func:`nilmap.dynamics.integrability_check`.
    """

    P: Polynomial
    alpha: Any

    def __post_init__(self):
        alpha = to_rational(self.alpha)
        if not alpha > 0:
            raise FamilySpecError("density exponent must be positive")
        object.__setattr__(self, "alpha", alpha)
        covered = set()
        for e, c in self.P.items():
            nz = [i for i, k in enumerate(e) if k]
            if len(nz) != 1 or e[nz[0]] % 2 or not c > 0:
                raise FamilySpecError("P must be a positive combination of even pure powers")
            covered.add(nz[0])
        if covered != set(range(self.P.nvars)):
            raise FamilySpecError("P must involve every variable to be positive off the origin")


def build_density(spec: HurwitzFieldSpec, alpha, *, check_bound: bool = True) -> Density:
    """``P = x_1^2 + ... + x_n^2 + R(x_{n+1})``; ``alpha`` must beat :func:`alpha_bound`
    unless ``check_bound`` is off (used to exhibit failures below the bound)."""
    alpha = to_rational(alpha)
    bound = alpha_bound(spec)
    if check_bound and not alpha > bound:
        raise FamilySpecError(f"alpha = {alpha} must exceed the bound {bound}")
    m = spec.n + 1
    P = spec.R.compose([Polynomial.var(spec.n, m)])
    for i in range(spec.n):
        P = P + Polynomial.var(i, m) ** 2
    return Density(P, alpha)


# ---------------------------------------------------------------------------
# van den Essen type maps (independent rows)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EssenFamilySpec:
    n: int
    a: Polynomial
    g: Polynomial
    lam: Any = 1

    def __post_init__(self):
        if self.n < 4:
            raise FamilySpecError("n must be at least 4")
        a, g = _as_univariate(self.a), _as_univariate(self.g)
        if a.degree() != self.n - 1:
            raise FamilySpecError(f"deg a must be n - 1 = {self.n - 1}, got {a.degree()}")
        if g.degree() < 1:
            raise FamilySpecError("g must have degree at least 1")
        if g.coeff((0,)):
            raise FamilySpecError("g(0) must be 0")
        lam = to_rational(self.lam)
        if not lam:
            raise FamilySpecError("lambda must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "lam", lam)


def _derivative(p: Polynomial, k: int) -> Polynomial:
    for _ in range(k):
        p = p.partial(0)
    return p


def build_essen_H(spec: EssenFamilySpec) -> PolyMap:
    n = spec.n
    x = [Polynomial.var(i, n) for i in range(n)]
    s = x[1] - spec.a.compose([x[0]])
    gs = spec.g.compose([s])
    comps = [gs]
    gpow = gs
    for i in range(2, n + 1):
        coef = mpq((-1) ** i, math.factorial(i - 1))
        term = _derivative(spec.a, i - 1).compose([x[0]]) * gpow
        h = term.scale(coef)
        comps.append(x[i] + h if i < n else h)
        gpow = gpow * gs
    return PolyMap(comps)


def _essen_invariant(spec: EssenFamilySpec) -> Polynomial:
    """``sum_{i=2}^n (-1)^i u_i / lam^{i-1} - a(u_1 / lam)`` in the ``u`` variables."""
    n, lam = spec.n, spec.lam
    u = [Polynomial.var(i, n) for i in range(n)]
    total = -spec.a.compose([u[0].scale(1 / lam)])
    for i in range(2, n + 1):
        total = total + u[i - 1].scale(mpq((-1) ** i) / lam ** (i - 1))
    return total


def essen_sum_identity_check(spec: EssenFamilySpec) -> bool:
    """Exact check that the invariant, pulled back along ``lam X + H``, is ``x_2 - a(x_1)``."""
    n = spec.n
    F = PolyMap.scaled_identity(spec.lam, n) + build_essen_H(spec)
    lhs = _essen_invariant(spec).compose(F.components)
    x = [Polynomial.var(i, n) for i in range(n)]
    return lhs == x[1] - spec.a.compose([x[0]])


def _essen_back_substitution(spec: EssenFamilySpec) -> PolyMap:
    n, lam = spec.n, spec.lam
    gamma = 1 / lam
    u = [Polynomial.var(i, n) for i in range(n)]
    inv = _essen_invariant(spec)
    psi = spec.g.compose([inv])
    x1 = (u[0] - psi).scale(gamma)
    ax1 = spec.a.compose([x1])
    xs = [x1, ax1 + inv]
    # u_k = lam x_k + x_{k+1} + c_k(x_1) psi^{k-1} for 2 <= k <= n-1
    psi_pow = psi
    for k in range(2, n):
        coef = mpq((-1) ** k, math.factorial(k - 1))
        ck = _derivative(spec.a, k - 1).compose([x1]).scale(coef)
        xs.append(u[k - 1] - xs[k - 1].scale(lam) - ck * psi_pow)
        psi_pow = psi_pow * psi
    return PolyMap(xs)


def _verify_closed_form(name: str, F: PolyMap, G: PolyMap, lam, cross_check: bool, formal) -> None:
    # equality with a verified formal inverse already proves G; otherwise compose
    from .inversion import compose_maps, formal_inverse

    if formal is None and cross_check:
        formal = formal_inverse(F, lam).G
    if formal is not None:
        if formal != G:
            raise InverseMismatchError(f"{name} back-substitution differs from the formal inverse")
    elif not (compose_maps(G, F).is_identity() and compose_maps(F, G).is_identity()):
        raise InverseMismatchError(f"{name} back-substitution does not invert lam X + H")


def build_essen_inverse(spec: EssenFamilySpec, *, cross_check: bool = True, formal: PolyMap | None = None) -> PolyMap:
    """Inverse of ``lam X + H`` via the invariant and ordered back-substitution.

    ``x_1 = (u_1 - Psi(u)) / lam``, ``x_2`` from the invariant, then each
    ``x_{k+1}`` from the ``u_k`` equation. With ``cross_check`` the result
    must equal the formal inverse exactly. Passing an already verified
    ``formal`` inverse skips recomputing it; with neither, the result is
    checked by composing on both sides.
    """
    G = _essen_back_substitution(spec)
    F = PolyMap.scaled_identity(spec.lam, spec.n) + build_essen_H(spec)
    _verify_closed_form("Essen", F, G, spec.lam, cross_check, formal)
    return G


# ---------------------------------------------------------------------------
# four-dimensional family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dim4FamilySpec:
    """``t = lam (y + b1 x + v1 alpha_p x^2)`` and ``H(x, y, z, w)`` built from ``f(t)``.

    ``alpha_p`` is the map parameter (distinct from the density exponent).
    """

    f: Polynomial
    b1: Any
    v1: Any
    alpha_p: Any
    lam: Any

    def __post_init__(self):
        object.__setattr__(self, "f", _as_univariate(self.f))
        for name in ("b1", "v1", "alpha_p", "lam"):
            object.__setattr__(self, name, to_rational(getattr(self, name)))
        if not self.v1 * self.alpha_p:
            raise FamilySpecError("v1 * alpha_p must be nonzero")
        if not self.lam:
            raise FamilySpecError("lambda must be nonzero")


def _dim4_t(spec: Dim4FamilySpec) -> Polynomial:
    x, y = Polynomial.var(0, 4), Polynomial.var(1, 4)
    return (y + x.scale(spec.b1) + (x * x).scale(spec.v1 * spec.alpha_p)).scale(spec.lam)


def build_dim4_H(spec: Dim4FamilySpec) -> PolyMap:
    x, _, z, w = (Polynomial.var(i, 4) for i in range(4))
    lam, b1, v1, al = spec.lam, spec.b1, spec.v1, spec.alpha_p
    ft = spec.f.compose([_dim4_t(spec)])
    slope = x.scale(2 * v1 * al) + b1  # b1 + 2 v1 alpha x
    # second entry uses v1*alpha*x^2 so that Phi = u2 - u4/lam reproduces t
    h2 = slope * ft + (x.scale(b1) + (x * x).scale(v1 * al)).scale(lam) - z.scale(v1) + w
    return PolyMap([
        -ft,
        h2,
        -(ft * ft).scale(al),
        (slope * ft).scale(lam) - z.scale(lam * v1),
    ])


def dim4_phi_identity_check(spec: Dim4FamilySpec) -> bool:
    """``u_2 - u_4 / lam == t`` with ``u = lam X + H`` (exact)."""
    F = PolyMap.scaled_identity(spec.lam, 4) + build_dim4_H(spec)
    return F[1] - F[3].scale(1 / spec.lam) == _dim4_t(spec)


def build_dim4_inverse(spec: Dim4FamilySpec, *, cross_check: bool = True, formal: PolyMap | None = None) -> PolyMap:
    """Back-substitution from ``Phi = u_2 - u_4 / lam`` (which equals ``t``).

    Verification follows :func:`build_essen_inverse`.
    """
    lam, b1, v1, al = spec.lam, spec.b1, spec.v1, spec.alpha_p
    gamma = 1 / lam
    u1, u2, u3, u4 = (Polynomial.var(i, 4) for i in range(4))
    phi = u2 - u4.scale(gamma)
    fphi = spec.f.compose([phi])
    x = (u1 + fphi).scale(gamma)
    z = (u3 + (fphi * fphi).scale(al)).scale(gamma)
    y = phi.scale(gamma) - x.scale(b1) - (x * x).scale(v1 * al)
    w = u4.scale(gamma) - (x.scale(2 * v1 * al) + b1) * fphi + z.scale(v1)
    G = PolyMap([x, y, z, w])
    F = PolyMap.scaled_identity(lam, 4) + build_dim4_H(spec)
    _verify_closed_form("Dim4", F, G, lam, cross_check, formal)
    return G


# ---------------------------------------------------------------------------
# Markus-Yamabe counterexample
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CegmhSpec:
    n: int = 3

    def __post_init__(self):
        if self.n < 3:
            raise FamilySpecError("the counterexample needs dimension at least 3")


def cegmh_nilpotent_part(n: int = 3) -> PolyMap:
    """``(x3 (x1 + x2 x3)^2, -(x1 + x2 x3)^2, 0, ..., 0)``."""
    if n < 3:
        raise FamilySpecError("the counterexample needs dimension at least 3")
    x = [Polynomial.var(i, n) for i in range(n)]
    s2 = (x[0] + x[1] * x[2]) ** 2
    return PolyMap([x[2] * s2, -s2] + [Polynomial.zero(n)] * (n - 2))


def cegmh_field(n: int = 3) -> PolyMap:
    """``-X`` plus the nilpotent part: Hurwitz everywhere, yet unbounded orbits exist."""
    return cegmh_nilpotent_part(n) - PolyMap.identity(n)


# ---------------------------------------------------------------------------
# JSON family specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParsedSpec:
    family: str
    spec: Any
    lam: mpq | None = None
    raw: Mapping = field(default_factory=dict, compare=False, repr=False)

    def nilpotent_part(self) -> PolyMap:
        """The map with nilpotent Jacobian for this family (for cegmh, the nilpotent part)."""
        if self.family in ("dependent",):
            return build_dependent_H(self.spec)
        if self.family == "hurwitz":
            return build_dependent_H(self.spec.base)
        if self.family == "essen":
            return build_essen_H(self.spec)
        if self.family == "dim4":
            return build_dim4_H(self.spec)
        if self.family == "cegmh":
            return cegmh_nilpotent_part(self.spec.n)
        raise FamilySpecError(f"unknown family {self.family!r}")


def _poly_field(value, nvars: int) -> Polynomial:
    if isinstance(value, str):
        names = ["t"] if nvars == 1 else None
        try:
            return Polynomial.parse(value, nvars, names)
        except ValueError:
            if nvars == 1:
                return Polynomial.parse(value, 1, ["x1"])
            raise
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return Polynomial.constant(value, nvars)
    if isinstance(value, list):
        if not value:
            return Polynomial.zero(nvars)
        return Polynomial.from_json(value, nvars)
    raise FamilySpecError(f"cannot read polynomial from {value!r}")


def _rational_field(obj: Mapping, key: str, default=None):
    if key not in obj:
        if default is None:
            raise FamilySpecError(f"missing field {key!r}")
        return to_rational(default)
    v = obj[key]
    if isinstance(v, float):
        raise FamilySpecError(f"{key!r} must be an integer or a 'p/q' string, not a float")
    return to_rational(v)


def parse_family_spec(obj: Mapping) -> ParsedSpec:
    """Read the ``{"family": ..., ...}`` document into a typed spec.

    Polynomials may be given as term lists (``[{"coef": "3/2", "exp": [2]}]``)
    or as text (univariate text uses ``t``).
    """
    if not isinstance(obj, Mapping):
        raise FamilySpecError("spec document must be a JSON object")
    family = obj.get("family")
    try:
        lam = _rational_field(obj, "lambda") if "lambda" in obj else None
        if family == "dependent":
            n = int(obj["n"])
            spec = DependentFamilySpec(n, _poly_field(obj["f"], 1), _read_pairs(obj, n))
        elif family == "hurwitz":
            n = int(obj["n"])
            base = DependentFamilySpec(n, _poly_field(obj["f"], 1), _read_pairs(obj, n))
            R = _read_R(obj["R"])
            if lam is None:
                raise FamilySpecError("hurwitz spec needs 'lambda'")
            spec = HurwitzFieldSpec(base, lam, R)
        elif family == "essen":
            n = int(obj["n"])
            spec = EssenFamilySpec(n, _poly_field(obj["a"], 1), _poly_field(obj["g"], 1), lam if lam is not None else 1)
        elif family == "dim4":
            spec = Dim4FamilySpec(
                _poly_field(obj["f"], 1),
                _rational_field(obj, "b1", 0),
                _rational_field(obj, "v1"),
                _rational_field(obj, "alpha_p"),
                lam if lam is not None else 1,
            )
        elif family == "cegmh":
            spec = CegmhSpec(int(obj.get("n", 3)))
        else:
            raise FamilySpecError(f"unknown family {family!r}")
    except KeyError as exc:
        raise FamilySpecError(f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FamilySpecError):
            raise
        raise FamilySpecError(str(exc)) from exc
    return ParsedSpec(family, spec, lam, obj)


def _read_pairs(obj: Mapping, n: int) -> tuple[PairCoeffs, ...]:
    pairs = obj.get("pairs")
    if not isinstance(pairs, list):
        raise FamilySpecError("'pairs' must be a list")
    out = []
    for p in pairs:
        out.append(PairCoeffs(
            _poly_field(p.get("a_odd", 0), n),
            _poly_field(p.get("a_even", 0), n),
            _poly_field(p.get("b_odd", 0), n),
            _poly_field(p.get("b_even", 0), n),
        ))
    return tuple(out)


def _read_R(obj) -> Polynomial:
    if isinstance(obj, Mapping) and "d" in obj:
        return Polynomial({(int(k),): to_rational(v) for k, v in obj["d"]}, 1)
    return _poly_field(obj, 1)


def family_spec_to_json(parsed: ParsedSpec) -> dict:
    """Inverse of :func:`parse_family_spec` (term-list form)."""
    fam, spec = parsed.family, parsed.spec
    out: dict = {"family": fam}
    if parsed.lam is not None:
        out["lambda"] = str(parsed.lam)

    def pairs(base: DependentFamilySpec):
        return [
            {"a_odd": p.a_odd.to_json(), "a_even": p.a_even.to_json(),
             "b_odd": p.b_odd.to_json(), "b_even": p.b_even.to_json()}
            for p in base.pairs
        ]

    if fam == "dependent":
        out.update(n=spec.n, f=spec.f.to_json(), pairs=pairs(spec))
    elif fam == "hurwitz":
        out.update(
            n=spec.n, f=spec.base.f.to_json(), pairs=pairs(spec.base),
            R={"d": [[str(e[0]), str(c)] for e, c in sorted(spec.R.items())]},
        )
        out["lambda"] = str(spec.lam)
    elif fam == "essen":
        out.update(n=spec.n, a=spec.a.to_json(), g=spec.g.to_json())
        out["lambda"] = str(spec.lam)
    elif fam == "dim4":
        out.update(f=spec.f.to_json(), b1=str(spec.b1), v1=str(spec.v1), alpha_p=str(spec.alpha_p))
        out["lambda"] = str(spec.lam)
    elif fam == "cegmh":
        out["n"] = spec.n
    return out


# ---------------------------------------------------------------------------
# randomized draws
# ---------------------------------------------------------------------------


def _rand_rational(rng: random.Random, max_coef: int, nonzero: bool = False) -> mpq:
    while True:
        v = mpq(rng.randint(-max_coef, max_coef), rng.randint(1, 2))
        if v or not nonzero:
            return v


def _rand_poly(rng: random.Random, nvars: int, allowed: int, max_degree: int, max_coef: int, max_terms: int = 3) -> Polynomial:
    """Random polynomial in the first ``allowed`` variables of an ``nvars``-ring."""
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        exp = [0] * nvars
        if allowed:
            for _ in range(rng.randint(0, max_degree)):
                exp[rng.randrange(allowed)] += 1
        terms[tuple(exp)] = _rand_rational(rng, max_coef)
    return Polynomial(terms, nvars)


def _rand_univariate(rng: random.Random, degree: int, max_coef: int, zero_constant: bool = False) -> Polynomial:
    coeffs = [_rand_rational(rng, max_coef) for _ in range(degree)]
    coeffs.append(_rand_rational(rng, max_coef, nonzero=True))
    if zero_constant:
        coeffs[0] = 0
    return Polynomial.univariate(coeffs)


def random_dependent_spec(rng: random.Random, n: int, max_degree: int = 5, max_coef: int = 4,
                          f_degree: int | None = None, b_degree: int | None = None) -> DependentFamilySpec:
    """Random draw with ``deg H <= max_degree``.

    A pair coefficient of degree ``d`` gives ``H`` degree ``d + deg f * (d + 1)``,
    so the coefficient degree cap follows from the chosen ``deg f``.
    """
    fd = f_degree if f_degree is not None else rng.randint(1, 3)
    f = _rand_univariate(rng, fd, max_coef)
    coef_degree = max(0, (max_degree - fd) // (fd + 1))
    pairs = []
    for j in range(n // 2):
        if j == 0:
            vals = [Polynomial.constant(_rand_rational(rng, max_coef, nonzero=True), n) for _ in range(2)]
            vals += [Polynomial.constant(_rand_rational(rng, max_coef), n) for _ in range(2)]
        else:
            vals = [_rand_poly(rng, n, 2 * j, coef_degree, max_coef) for _ in range(2)]
            bd = max_degree if b_degree is None else b_degree
            vals += [_rand_poly(rng, n, 2 * j, bd, max_coef) for _ in range(2)]
        pairs.append(PairCoeffs(*vals))
    return DependentFamilySpec(n, f, tuple(pairs))


def random_essen_spec(rng: random.Random, n: int, max_coef: int = 4, g_degree: int | None = None,
                      lam=None) -> EssenFamilySpec:
    a = _rand_univariate(rng, n - 1, max_coef)
    g = _rand_univariate(rng, g_degree if g_degree is not None else rng.randint(1, 2), max_coef, zero_constant=True)
    if lam is None:
        lam = _rand_rational(rng, max_coef, nonzero=True)
    return EssenFamilySpec(n, a, g, lam)


def random_dim4_spec(rng: random.Random, max_coef: int = 4, f_degree: int | None = None, lam=None) -> Dim4FamilySpec:
    f = _rand_univariate(rng, f_degree if f_degree is not None else rng.randint(1, 3), max_coef)
    if lam is None:
        lam = _rand_rational(rng, max_coef, nonzero=True)
    return Dim4FamilySpec(
        f,
        _rand_rational(rng, max_coef),
        _rand_rational(rng, max_coef, nonzero=True),
        _rand_rational(rng, max_coef, nonzero=True),
        lam,
    )
