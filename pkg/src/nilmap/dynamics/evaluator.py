"""Float evaluation of exact polynomial maps over batches of points."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..jacobian import jacobian_of
from ..polycore import PolyMap, Polynomial


class CompiledPolys:
    """A list of polynomials sharing one monomial table.

    ``values = monomials(X) @ coef`` where every distinct exponent vector is
    evaluated once per point from a table of variable powers.
    """

    def __init__(self, polys: Sequence[Polynomial], nvars: int):
        index: dict[tuple[int, ...], int] = {}
        for p in polys:
            if p.nvars != nvars:
                raise ValueError("all polynomials must share nvars")
            for e in p.terms:
                index.setdefault(e, len(index))
        self.nvars = nvars
        self.nout = len(polys)
        if not index:
            index[(0,) * nvars] = 0
        self.exps = np.array(list(index), dtype=np.intp).reshape(len(index), nvars)
        self.coef = np.zeros((len(index), len(polys)))
        for j, p in enumerate(polys):
            for e, c in p.items():
                self.coef[index[e], j] = float(c)
        self.maxdeg = int(self.exps.max()) if self.exps.size else 0
        self._used = [i for i in range(nvars) if self.exps[:, i].any()]

    def monomials(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        B = X.shape[0]
        mono = np.ones((B, self.exps.shape[0]))
        for i in self._used:
            powers = np.ones((B, self.maxdeg + 1))
            for k in range(1, self.maxdeg + 1):
                powers[:, k] = powers[:, k - 1] * X[:, i]
            mono *= powers[:, self.exps[:, i]]
        return mono

    def __call__(self, X: np.ndarray) -> np.ndarray:
        """Values at a batch ``X`` of shape ``(B, nvars)``; result ``(B, nout)``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.nvars:
            raise ValueError(f"expected points of shape (B, {self.nvars})")
        return self.monomials(X) @ self.coef


class CompiledMap:
    """``F`` and ``JF`` ready for repeated float evaluation."""

    def __init__(self, F: PolyMap):
        self.F = F
        self.n = F.nvars
        self.field = CompiledPolys(list(F.components), self.n)
        J = jacobian_of(F)
        self.jac = CompiledPolys([p for row in J.rows for p in row], self.n)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.field(X)

    def jacobian(self, X: np.ndarray) -> np.ndarray:
        """Jacobians at a batch of points, shape ``(B, n, n)``."""
        vals = self.jac(X)
        return vals.reshape(-1, self.n, self.n)


def compile_map(F: PolyMap) -> CompiledMap:
    return CompiledMap(F)


def jacobian_at(F: PolyMap | CompiledMap, point: Sequence[float]) -> np.ndarray:
    """Float Jacobian of ``F`` at one point."""
    cm = F if isinstance(F, CompiledMap) else CompiledMap(F)
    x = np.asarray(point, dtype=float).reshape(1, -1)
    if x.shape[1] != cm.n:
        raise ValueError(f"point has length {x.shape[1]}, expected {cm.n}")
    return cm.jacobian(x)[0]
