"""Formal inversion of ``F = lam X + H`` with nilpotent ``JH``.

The inverse is built degree by degree from the fixed-point equation
``G = lam^{-1} (X - H(G))``. The affine part of ``F`` is split off first, so
with ``F(x) = c + L x + Q(x)`` (``Q`` of order two) the iterate
``G_m = trunc_m(L^{-1} (X - Q(G_{m-1})))`` agrees with the true inverse up to
degree ``m``. Once a new degree contributes nothing the candidate is checked
by exact composition; success certifies a polynomial inverse.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from gmpy2 import mpq

from .jacobian import (
    NilpotencyCertificate,
    PolyMatrix,
    is_nilpotent,
    jacobian_of,
    mat_mul,
    rows_dependent_over_R,
)
from .polycore import PolyMap, Polynomial, to_rational

__all__ = [
    "InversionError",
    "NotNilpotentError",
    "InversionCancelled",
    "InverseBundle",
    "PreservationRecord",
    "compose_maps",
    "formal_inverse",
    "jbar_series_check",
    "preservation_check",
]

DEFAULT_MAX_ITER = 64


class InversionError(ArithmeticError):
    """No verified polynomial inverse was reached within the iteration budget."""


class NotNilpotentError(InversionError):
    """``F - lam X`` does not have a nilpotent Jacobian."""


class InversionCancelled(RuntimeError):
    pass


def compose_maps(A: PolyMap, B: PolyMap) -> PolyMap:
    """``A ∘ B``."""
    return A.compose(B)


@dataclass(frozen=True)
class InverseBundle:
    """Verified inverse ``G`` of ``F = lam X + H`` and its normalisations.

    ``H_bar`` satisfies ``(X + H/lam)^{-1} = X + H_bar``; ``H_tilde`` satisfies
    ``G = (X + H_tilde) / lam``.
    """

    F: PolyMap
    G: PolyMap
    lam: mpq
    H_bar: PolyMap
    H_tilde: PolyMap
    iterations_used: int
    certificate: NilpotencyCertificate | None = None

    @property
    def H(self) -> PolyMap:
        return self.F - PolyMap.scaled_identity(self.lam, self.F.nvars)

    def to_json(self) -> dict:
        out = {
            "lambda": str(self.lam),
            "n": self.F.nvars,
            "F": self.F.to_json(),
            "G": self.G.to_json(),
            "H_bar": self.H_bar.to_json(),
            "H_tilde": self.H_tilde.to_json(),
            "iterations_used": self.iterations_used,
            "F_of_G_is_identity": True,
            "G_of_F_is_identity": True,
        }
        if self.certificate is not None:
            out["JH_nilpotent"] = self.certificate.nilpotent
            out["JH_nilpotency_index"] = self.certificate.index
        return out


def _rational_inverse(L: list[list[mpq]]) -> list[list[mpq]]:
    n = len(L)
    A = [list(row) + [mpq(int(i == j)) for j in range(n)] for i, row in enumerate(L)]
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c]), None)
        if piv is None:
            raise InversionError("linear part of F is singular")
        A[c], A[piv] = A[piv], A[c]
        p = A[c][c]
        A[c] = [v / p for v in A[c]]
        for r in range(n):
            if r != c and A[r][c]:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [row[n:] for row in A]


def _apply_matrix(M: list[list[mpq]], polys: Sequence[Polynomial]) -> list[Polynomial]:
    nv = polys[0].nvars
    out = []
    for row in M:
        acc = Polynomial.zero(nv)
        for coef, p in zip(row, polys):
            if coef and p:
                acc = acc + p.scale(coef)
        out.append(acc)
    return out


def _probe_identity(F: PolyMap, G: PolyMap, rng: random.Random, trials: int = 2) -> bool:
    n = F.nvars
    for _ in range(trials):
        pt = [mpq(rng.randint(-7, 7), rng.randint(1, 3)) for _ in range(n)]
        if F.eval_exact(G.eval_exact(pt)) != pt:
            return False
    return True


class _Series:
    """Power series known through its homogeneous parts, computed on demand.

    ``order`` is a lower bound for the degree of the first nonzero part.
    """

    __slots__ = ("order", "parts", "nvars")

    def __init__(self, order: int, nvars: int):
        self.order = order
        self.nvars = nvars
        self.parts: dict[int, Polynomial] = {}

    def part(self, d: int) -> Polynomial:
        if d < self.order:
            return Polynomial.zero(self.nvars)
        p = self.parts.get(d)
        if p is None:
            p = self.parts[d] = self._compute(d)
        return p

    def _compute(self, d: int) -> Polynomial:
        raise KeyError(f"degree {d} part is not available yet")


class _Const(_Series):
    def __init__(self, c, nvars: int):
        super().__init__(0, nvars)
        self.parts[0] = Polynomial.constant(c, nvars)

    def _compute(self, d: int) -> Polynomial:
        return Polynomial.zero(self.nvars)


class _Scaled(_Series):
    def __init__(self, c: mpq, inner: _Series):
        super().__init__(inner.order, inner.nvars)
        self.c, self.inner = c, inner

    def _compute(self, d: int) -> Polynomial:
        return self.inner.part(d).scale(self.c)


class _Sum(_Series):
    def __init__(self, terms: list[_Series], nvars: int):
        super().__init__(min(t.order for t in terms), nvars)
        self.terms = terms

    def _compute(self, d: int) -> Polynomial:
        acc = Polynomial.zero(self.nvars)
        for t in self.terms:
            if t.order <= d:
                acc = acc + t.part(d)
        return acc


class _Product(_Series):
    def __init__(self, a: _Series, b: _Series):
        super().__init__(a.order + b.order, a.nvars)
        self.a, self.b = a, b

    def _compute(self, d: int) -> Polynomial:
        a, b = self.a, self.b
        acc = []
        for j in range(a.order, d - b.order + 1):
            pa = a.part(j)
            if pa:
                pb = b.part(d - j)
                if pb:
                    acc.append((pa, pb))
        if not acc:
            return Polynomial.zero(self.nvars)
        return Polynomial.dot([x for x, _ in acc], [y for _, y in acc])


def _series_compose(p: Polynomial, leaves: list[_Series], powers: list[list[_Series]] | None = None) -> _Series:
    """``p(leaves)`` as a lazy series, arranged as a multivariate Horner scheme.

    ``powers`` caches ``leaf^k`` and may be shared between calls on the same leaves.
    """
    nv = leaves[0].nvars
    if powers is None:
        powers = [[leaf] for leaf in leaves]

    def power(i: int, k: int) -> _Series:
        cache = powers[i]
        while len(cache) < k:
            cache.append(_Product(cache[-1], leaves[i]))
        return cache[k - 1]

    def rec(terms: list, i: int) -> _Series:
        if i == len(leaves):
            return _Const(terms[0][1], nv)
        groups: dict[int, list] = {}
        for e, c in terms:
            groups.setdefault(e[i], []).append((e, c))
        out = []
        for k in sorted(groups):
            inner = rec(groups[k], i + 1)
            if k == 0:
                out.append(inner)
            elif isinstance(inner, _Const):
                out.append(_Scaled(inner.parts[0].constant_term(), power(i, k)))
            else:
                out.append(_Product(power(i, k), inner))
        return out[0] if len(out) == 1 else _Sum(out, nv)

    if not p:
        return _Const(0, nv)
    return rec(list(p.items()), 0)


def formal_inverse(F: PolyMap, lam, max_iter: int = DEFAULT_MAX_ITER, *, cancel=None,
                   check_nilpotent: bool = True) -> InverseBundle:
    """Polynomial inverse of ``F = lam X + H`` by graded fixed-point iteration.

    After removing ``F(0)`` and splitting ``F = L + Q`` with ``Q`` of order
    two, step ``m`` fixes the degree-``m`` part of ``G`` from
    ``G_m = -L^{-1} [Q(G)]_m``; each homogeneous part of ``Q(G)`` is computed
    once. A step that adds nothing triggers the exact composition check.

    ``max_iter`` bounds the number of degree steps. ``cancel`` is any object
    with ``is_set()``; it is polled between steps. Raises
    :class:`NotNilpotentError` when ``JH`` is not nilpotent and
    :class:`InversionError` when no verified inverse appears in time.
    """
    lam = to_rational(lam)
    if not lam:
        raise ValueError("lambda must be nonzero")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    n = F.nvars
    X = PolyMap.identity(n)
    H = F - PolyMap.scaled_identity(lam, n)
    cert = None
    if check_nilpotent:
        cert = is_nilpotent(jacobian_of(H))
        if not cert.nilpotent:
            raise NotNilpotentError("JH is not nilpotent; F is not of the form lam X + H with nilpotent JH")

    shift = [c.constant_term() for c in F]
    Ft = PolyMap(c - s for c, s in zip(F, shift))
    L = [[Ft[i].coeff(tuple(int(k == j) for k in range(n))) for j in range(n)] for i in range(n)]
    Linv = _rational_inverse(L)
    lin = _apply_matrix(L, X.components)
    Q = PolyMap(c - l for c, l in zip(Ft, lin))

    leaves = [_Series(1, n) for _ in range(n)]
    for leaf, g1 in zip(leaves, _apply_matrix(Linv, X.components)):
        leaf.parts[1] = g1
    powers = [[leaf] for leaf in leaves]
    QG = [_series_compose(q, leaves, powers) for q in Q]

    rng = random.Random(0)
    found = None
    for m in range(2, max_iter + 2):
        if cancel is not None and cancel.is_set():
            raise InversionCancelled("formal inversion cancelled")
        qm = [-node.part(m) for node in QG]
        gm = _apply_matrix(Linv, qm)
        for leaf, g in zip(leaves, gm):
            leaf.parts[m] = g
        if all(not g for g in gm):
            cand = PolyMap(_sum_parts(leaf, m) for leaf in leaves)
            if _probe_identity(Ft, cand, rng) and cand.compose(Ft).is_identity():
                found = (cand, m - 1)
                break
    if found is None:
        raise InversionError(f"no polynomial inverse within {max_iter} degree steps")

    Gt, iterations = found
    if not Ft.compose(Gt).is_identity():
        raise InversionError("composition check failed for the formal inverse")
    if any(shift):
        # G(u) = Gt(u - c) with c = F(0); then F(G(u)) = Ft(Gt(u - c)) + c = u
        # and G(F(x)) = Gt(Ft(x)) = x, so both checks above carry over exactly
        back = PolyMap(x - s for x, s in zip(X.components, shift))
        Ginv = Gt.compose(back)
    else:
        Ginv = Gt
    H_tilde = Ginv.scale(lam) - X
    H_bar = Ginv.compose(PolyMap.scaled_identity(lam, n)) - X
    return InverseBundle(F, Ginv, lam, H_bar, H_tilde, iterations, cert)


def _sum_parts(leaf: _Series, upto: int) -> Polynomial:
    acc = Polynomial.zero(leaf.nvars)
    for d in range(1, upto + 1):
        acc = acc + leaf.parts[d]
    return acc


def jbar_series_check(F: PolyMap, bundle: InverseBundle) -> bool:
    """Exact test of ``J H_bar == sum_{i=1}^{d} (-1)^i N(G)^i``.

    Works in the unit normalisation ``X + H/lam`` with inverse ``G = X + H_bar``
    and ``N = J(H/lam)``; ``d`` is the nilpotency index of ``N`` minus one.
    """
    if F != bundle.F:
        raise ValueError("bundle was computed for a different map")
    n, lam = F.nvars, bundle.lam
    X = PolyMap.identity(n)
    N = jacobian_of(bundle.H.scale(1 / lam))
    cert = is_nilpotent(N)
    if not cert.nilpotent:
        return False
    d = cert.index - 1
    G_unit = X + bundle.H_bar
    NG = N.compose(G_unit)
    rhs = PolyMatrix.zeros(n, n)
    power = PolyMatrix.identity(n, n)
    for i in range(1, d + 1):
        power = mat_mul(power, NG)
        rhs = rhs + (power if i % 2 == 0 else -power)
    return jacobian_of(bundle.H_bar) == rhs


@dataclass(frozen=True)
class PreservationRecord:
    nilpotent: bool
    independent: bool
    witness: list | None
    bundle: InverseBundle

    def to_json(self) -> dict:
        return {
            "nilpotent": self.nilpotent,
            "independent": self.independent,
            "witness": None if self.witness is None else [str(v) for v in self.witness],
        }


def preservation_check(F: PolyMap, lam, *, bundle: InverseBundle | None = None, **kwargs) -> PreservationRecord:
    """Nilpotency and row independence of ``J H_tilde`` for ``F^{-1} = (X + H_tilde)/lam``."""
    if bundle is None:
        bundle = formal_inverse(F, lam, **kwargs)
    J = jacobian_of(bundle.H_tilde)
    cert = is_nilpotent(J)
    witness = rows_dependent_over_R(J)
    return PreservationRecord(cert.nilpotent, witness is None, witness, bundle)
