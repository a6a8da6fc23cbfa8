"""Polynomial matrices, exact nilpotency certificates and row dependence over Q."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from gmpy2 import mpq

from .polycore import PolyMap, Polynomial, to_rational

__all__ = [
    "PolyMatrix",
    "NilpotencyCertificate",
    "jacobian_of",
    "mat_mul",
    "mat_pow",
    "char_poly",
    "is_nilpotent",
    "rows_dependent_over_R",
    "nullspace",
]


class PolyMatrix:
    """Square ``n x n`` matrix of polynomials sharing one ring."""

    __slots__ = ("rows", "n", "nvars")

    def __init__(self, rows: Sequence[Sequence[Polynomial]]):
        rows = tuple(tuple(r) for r in rows)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("PolyMatrix must be square and nonempty")
        nvars = rows[0][0].nvars
        if any(p.nvars != nvars for r in rows for p in r):
            raise ValueError("all entries must share the same number of variables")
        self.rows = rows
        self.n = n
        self.nvars = nvars

    @classmethod
    def identity(cls, n: int, nvars: int) -> "PolyMatrix":
        one, zero = Polynomial.constant(1, nvars), Polynomial.zero(nvars)
        return cls([[one if i == j else zero for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, n: int, nvars: int) -> "PolyMatrix":
        zero = Polynomial.zero(nvars)
        return cls([[zero] * n for _ in range(n)])

    @classmethod
    def from_rational(cls, rows: Sequence[Sequence], nvars: int) -> "PolyMatrix":
        return cls([[Polynomial.constant(v, nvars) for v in r] for r in rows])

    def __getitem__(self, ij: tuple[int, int]) -> Polynomial:
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyMatrix) and self.rows == other.rows

    def __hash__(self) -> int:
        return hash(self.rows)

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        self._check(other)
        return PolyMatrix([[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)])

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        self._check(other)
        return PolyMatrix([[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)])

    def __neg__(self) -> "PolyMatrix":
        return PolyMatrix([[-a for a in r] for r in self.rows])

    def scale(self, c) -> "PolyMatrix":
        return PolyMatrix([[a.scale(c) for a in r] for r in self.rows])

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        return mat_mul(self, other)

    def _check(self, other: "PolyMatrix") -> None:
        if self.n != other.n or self.nvars != other.nvars:
            raise ValueError(
                f"dimension mismatch: {self.n}x{self.n}/{self.nvars} vs {other.n}x{other.n}/{other.nvars}"
            )

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix(list(zip(*self.rows)))

    def trace(self) -> Polynomial:
        total = Polynomial.zero(self.nvars)
        for i in range(self.n):
            total = total + self.rows[i][i]
        return total

    def is_zero(self) -> bool:
        return all(p.is_zero() for r in self.rows for p in r)

    def compose(self, inner: PolyMap) -> "PolyMatrix":
        """Substitute the map ``inner`` into every entry (``N(G)`` in the text)."""
        subs = list(inner.components)
        return PolyMatrix([[p.compose(subs) for p in r] for r in self.rows])

    def eval_float(self, point: Sequence[float]) -> list[list[float]]:
        return [[p.eval_float(point) for p in r] for r in self.rows]

    def to_json(self) -> list[list[list[dict]]]:
        return [[p.to_json() for p in r] for r in self.rows]

    @classmethod
    def from_json(cls, data, nvars: int) -> "PolyMatrix":
        return cls([[Polynomial.from_json(p, nvars) for p in r] for r in data])

    def __repr__(self) -> str:
        return "PolyMatrix(" + repr([[p.to_text() for p in r] for r in self.rows]) + ")"


def jacobian_of(F: PolyMap) -> PolyMatrix:
    """Entry ``(i, j)`` is the exact partial derivative of ``F_i`` in ``x_j``."""
    return PolyMatrix([[c.partial(j) for j in range(F.nvars)] for c in F])


def mat_mul(A: PolyMatrix, B: PolyMatrix) -> PolyMatrix:
    A._check(B)
    n = A.n
    cols = [[B.rows[k][j] for k in range(n)] for j in range(n)]
    return PolyMatrix([[Polynomial.dot(row, col) for col in cols] for row in A.rows])


def mat_pow(A: PolyMatrix, k: int) -> PolyMatrix:
    if k < 0:
        raise ValueError("matrix power must be nonnegative")
    result = PolyMatrix.identity(A.n, A.nvars)
    for _ in range(k):
        result = mat_mul(result, A)
        if result.is_zero():
            break
    return result


def char_poly(M: PolyMatrix) -> list[Polynomial]:
    """Coefficients ``c_0 .. c_n`` of ``det(t I - M)`` (Faddeev-LeVerrier).

    The divisions by ``k`` are exact over the rationals.
    """
    n, nv = M.n, M.nvars
    coeffs = [Polynomial.zero(nv)] * (n + 1)
    coeffs[n] = Polynomial.constant(1, nv)
    identity = PolyMatrix.identity(n, nv)
    # M_1 = I ; c_{n-k} = -tr(M M_k) / k ; M_{k+1} = M M_k + c_{n-k} I
    Mk = identity
    for k in range(1, n + 1):
        if k < n:
            AM = mat_mul(M, Mk)
            coeffs[n - k] = AM.trace() / (-k)
            Mk = AM + _scalar_identity(identity, coeffs[n - k])
        else:
            lhs = [a for row in M.rows for a in row]
            rhs = [Mk.rows[j][i] for i in range(n) for j in range(n)]
            coeffs[0] = Polynomial.dot(lhs, rhs) / (-n)
    return coeffs


def _scalar_identity(identity: PolyMatrix, p: Polynomial) -> PolyMatrix:
    zero = Polynomial.zero(identity.nvars)
    n = identity.n
    return PolyMatrix([[p if i == j else zero for j in range(n)] for i in range(n)])


@dataclass(frozen=True)
class NilpotencyCertificate:
    nilpotent: bool
    index: int | None
    char_poly_coeffs: tuple[Polynomial, ...]

    def to_json(self) -> dict:
        return {
            "nilpotent": self.nilpotent,
            "index": self.index,
            "char_poly": [p.to_text() for p in self.char_poly_coeffs],
        }


def is_nilpotent(M: PolyMatrix) -> NilpotencyCertificate:
    """Certify nilpotency from the characteristic polynomial and exact powers.

    The index is the least ``k`` with ``M^k == 0`` (at most ``n`` by
    Cayley-Hamilton). The two routes are cross-checked.
    """
    coeffs = tuple(char_poly(M))
    nil = all(c.is_zero() for c in coeffs[:-1])
    index = None
    if nil:
        P = PolyMatrix.identity(M.n, M.nvars)
        for k in range(1, M.n + 1):
            P = mat_mul(P, M)
            if P.is_zero():
                index = k
                break
        if index is None:
            raise ArithmeticError("characteristic polynomial is t^n but M^n != 0")
    return NilpotencyCertificate(nil, index, coeffs)


def nullspace(rows: Sequence[Sequence], ncols: int) -> list[list[mpq]]:
    """Basis of ``{c : A c = 0}`` for a rational matrix ``A`` given by rows.

    Rows are scaled to integers and reduced with fraction-free (Bareiss)
    elimination; back substitution is done in exact rationals.
    """
    work = []
    seen = set()
    for r in rows:
        q = [to_rational(v) for v in r]
        if len(q) != ncols:
            raise ValueError("row length mismatch")
        if not any(q):
            continue
        den = 1
        for v in q:
            den = den * v.denominator // _gcd(den, v.denominator)
        ints = [int(v * den) for v in q]
        g = 0
        for v in ints:
            g = _gcd(g, v)
        ints = tuple(v // g for v in ints)
        first = next(v for v in ints if v)
        if first < 0:
            ints = tuple(-v for v in ints)
        if ints not in seen:
            seen.add(ints)
            work.append(list(ints))

    # Bareiss: entries stay integral, each division is exact
    pivots: list[int] = []
    prev = 1
    r = 0
    m = len(work)
    for c in range(ncols):
        if r >= m:
            break
        piv = next((i for i in range(r, m) if work[i][c] != 0), None)
        if piv is None:
            continue
        work[r], work[piv] = work[piv], work[r]
        p = work[r][c]
        for i in range(r + 1, m):
            wi = work[i]
            f = wi[c]
            wr = work[r]
            for j in range(c + 1, ncols):
                wi[j] = (p * wi[j] - f * wr[j]) // prev
            wi[c] = 0
            # entries left of c are already zero
        prev = p
        pivots.append(c)
        r += 1

    echelon = work[: len(pivots)]
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        sol = [mpq(0)] * ncols
        sol[fcol] = mpq(1)
        for ri in range(len(pivots) - 1, -1, -1):
            pc = pivots[ri]
            row = echelon[ri]
            s = mpq(0)
            for j in range(pc + 1, ncols):
                if row[j] and sol[j]:
                    s += row[j] * sol[j]
            sol[pc] = -s / row[pc]
        basis.append(sol)
    return basis


def _gcd(a: int, b: int) -> int:
    a, b = abs(int(a)), abs(int(b))
    while b:
        a, b = b, a % b
    return a


def rows_dependent_over_R(M: PolyMatrix) -> list[mpq] | None:
    """Nonzero rational ``c`` with ``c^T M == 0`` identically, or ``None``.

    Each column ``j`` and monomial ``m`` contribute the linear condition
    ``sum_i c_i coeff(M_ij, m) = 0``. The coefficient matrix is rational,
    so a real dependence exists iff a rational one does. The result is
    normalised so its first nonzero entry is 1.
    """
    n = M.n
    equations = []
    for j in range(n):
        monos: dict[tuple, list] = {}
        for i in range(n):
            for e, c in M.rows[i][j].items():
                monos.setdefault(e, [mpq(0)] * n)[i] = c
        equations.extend(monos.values())
    basis = nullspace(equations, n)
    if not basis:
        return None
    vec = basis[0]
    lead = next(v for v in vec if v)
    return [v / lead for v in vec]


def left_combination(c: Sequence, M: PolyMatrix) -> list[Polynomial]:
    """The row ``c^T M`` as a list of polynomials."""
    out = []
    for j in range(M.n):
        acc = Polynomial.zero(M.nvars)
        for i in range(M.n):
            ci = to_rational(c[i])
            if ci:
                acc = acc + M.rows[i][j].scale(ci)
        out.append(acc)
    return out
