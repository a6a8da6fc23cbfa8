"""Eigenvalues of small dense real matrices.

Balancing, Householder reduction to upper Hessenberg form, then complex
single-shift QR with Wilkinson shifts and deflation. Plain Python lists and
complex numbers are used throughout; for the ``n <= 16`` matrices met here
that is faster than array overhead.
"""

from __future__ import annotations

import cmath
import math
from typing import Sequence

__all__ = ["EigenConvergenceError", "balance", "hessenberg", "eigenvalues"]

_EPS = 2.220446049250313e-16


class EigenConvergenceError(ArithmeticError):
    pass


def _as_lists(M) -> list[list[float]]:
    rows = [[float(v) for v in row] for row in M]
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError("matrix must be square and nonempty")
    for r in rows:
        for v in r:
            if not math.isfinite(v):
                raise ValueError("matrix has non-finite entries")
    return rows


def balance(A: list[list[float]]) -> list[list[float]]:
    """Diagonal similarity by powers of two that evens out row/column norms."""
    n = len(A)
    A = [list(r) for r in A]
    radix = 2.0
    done = False
    while not done:
        done = True
        for i in range(n):
            c = sum(abs(A[j][i]) for j in range(n) if j != i)
            r = sum(abs(A[i][j]) for j in range(n) if j != i)
            if c == 0.0 or r == 0.0:
                continue
            g, f, s = r / radix, 1.0, c + r
            while c < g:
                f *= radix
                c *= radix * radix
            g = r * radix
            while c > g:
                f /= radix
                c /= radix * radix
            if (c + r) / f < 0.95 * s:
                done = False
                for j in range(n):
                    A[i][j] /= f
                for j in range(n):
                    A[j][i] *= f
    return A


def hessenberg(A: list[list[float]]) -> list[list[float]]:
    """Upper Hessenberg matrix similar to ``A`` (Householder reflections)."""
    n = len(A)
    H = [list(r) for r in A]
    for k in range(n - 2):
        x = [H[i][k] for i in range(k + 1, n)]
        alpha = math.sqrt(sum(v * v for v in x))
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = list(x)
        v[0] -= alpha
        vnorm2 = sum(t * t for t in v)
        if vnorm2 == 0.0:
            continue
        # H <- P H P with P = I - 2 v v^T / (v^T v) acting on rows/cols k+1..n-1
        for j in range(n):
            s = sum(v[i] * H[k + 1 + i][j] for i in range(len(v)))
            f = 2.0 * s / vnorm2
            for i in range(len(v)):
                H[k + 1 + i][j] -= f * v[i]
        for i in range(n):
            s = sum(H[i][k + 1 + j] * v[j] for j in range(len(v)))
            f = 2.0 * s / vnorm2
            for j in range(len(v)):
                H[i][k + 1 + j] -= f * v[j]
        for i in range(k + 2, n):
            H[i][k] = 0.0
    return H


def _wilkinson(a: complex, b: complex, c: complex, d: complex) -> complex:
    # eigenvalue of [[a, b], [c, d]] closer to d
    half = (a - d) / 2
    disc = cmath.sqrt(half * half + b * c)
    m1 = d + half + disc
    m2 = d + half - disc
    return m1 if abs(m1 - d) <= abs(m2 - d) else m2


def eigenvalues(M: Sequence[Sequence[float]], *, max_sweeps: int | None = None) -> list[complex]:
    """All eigenvalues of a real square matrix, in deflation order.

    Raises :class:`EigenConvergenceError` after ``100 n`` QR sweeps.
    """
    A = _as_lists(M)
    n = len(A)
    if n == 1:
        return [complex(A[0][0])]
    H = [[complex(v) for v in row] for row in hessenberg(balance(A))]
    scale = max(abs(v) for row in H for v in row) or 1.0
    limit = max_sweeps if max_sweeps is not None else 100 * n
    out: list[complex] = []
    hi = n - 1
    its = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            out.append(H[0][0])
            break
        lo = hi
        while lo > 0:
            s = abs(H[lo - 1][lo - 1]) + abs(H[lo][lo])
            if s == 0.0:
                s = scale
            if abs(H[lo][lo - 1]) <= _EPS * s:
                H[lo][lo - 1] = 0j
                break
            lo -= 1
        if lo == hi:
            out.append(H[hi][hi])
            hi -= 1
            its = 0
            continue
        total += 1
        its += 1
        if total > limit:
            raise EigenConvergenceError(f"QR iteration did not converge in {limit} sweeps")
        if its % 11 == 0:
            mu = H[hi][hi] + abs(H[hi][hi - 1]) * 0.75
        else:
            mu = _wilkinson(H[hi - 1][hi - 1], H[hi - 1][hi], H[hi][hi - 1], H[hi][hi])
        _qr_sweep(H, lo, hi, mu)
    return out


def _qr_sweep(H: list[list[complex]], lo: int, hi: int, mu: complex) -> None:
    """One shifted QR step ``H - mu I = QR, H <- RQ + mu I`` on ``H[lo:hi+1]``."""
    for k in range(lo, hi + 1):
        H[k][k] -= mu
    rots = []
    for k in range(lo, hi):
        x, y = H[k][k], H[k + 1][k]
        ax = abs(x)
        r = math.hypot(ax, abs(y))
        if r == 0.0:
            c, s = 1.0, 0j
        elif ax == 0.0:
            c, s = 0.0, complex(1.0)
            s = y.conjugate() / abs(y)
        else:
            ph = x / ax
            c = ax / r
            s = ph * y.conjugate() / r
        rots.append((c, s))
        rk, rk1 = H[k], H[k + 1]
        for j in range(k, hi + 1):
            a, b = rk[j], rk1[j]
            rk[j] = c * a + s * b
            rk1[j] = -s.conjugate() * a + c * b
    for idx, k in enumerate(range(lo, hi)):
        c, s = rots[idx]
        top = min(k + 2, hi)
        for i in range(lo, top + 1):
            row = H[i]
            a, b = row[k], row[k + 1]
            row[k] = c * a + s.conjugate() * b
            row[k + 1] = -s * a + c * b
    for k in range(lo, hi + 1):
        H[k][k] += mu
