"""Sampled checks of the almost-Hurwitz property and of density positivity.

Off-plane samples are drawn uniformly from ``[-B, B]^d``; the exceptional
hyperplane ``{x_d = 0}`` is probed with exact on-plane points obtained by
setting the last coordinate to ``0.0``. Every sample owns a generator seeded
by ``(rng_seed, index)``, so a report does not depend on batching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from ..families import Density
from ..polycore import PolyMap, Polynomial, to_rational
from .eigen import eigenvalues
from .evaluator import CompiledMap, CompiledPolys

__all__ = [
    "ScanConfig",
    "ScanReport",
    "sample_points",
    "hurwitz_scan",
    "divergence_numerator",
    "density_scan",
    "integrability_check",
    "restrict_to_plane",
]

ON_PLANE_RE_TOL = 1e-9
ON_PLANE_S_TOL = 1e-12


@dataclass(frozen=True)
class ScanConfig:
    num_samples: int = 10_000
    box_halfwidth: float = 2.0
    plane_exclusion: float = 0.0
    rng_seed: int = 42
    margin_bins: int = 8

    def __post_init__(self):
        if not isinstance(self.num_samples, int) or self.num_samples < 1:
            raise ValueError("num_samples must be a positive integer")
        if not (self.box_halfwidth > 0 and math.isfinite(self.box_halfwidth)):
            raise ValueError("box_halfwidth must be positive")
        if not self.plane_exclusion >= 0:
            raise ValueError("plane_exclusion must be nonnegative")
        if self.plane_exclusion >= self.box_halfwidth:
            raise ValueError("plane_exclusion must be smaller than box_halfwidth")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")
        if self.margin_bins < 1:
            raise ValueError("margin_bins must be positive")

    def to_json(self) -> dict:
        return {
            "num_samples": self.num_samples,
            "box_halfwidth": self.box_halfwidth,
            "plane_exclusion": self.plane_exclusion,
            "rng_seed": int(self.rng_seed),
        }


@dataclass
class ScanReport:
    """Outcome of a sampled scan.

    For ``kind == "hurwitz"`` the extremes are eigenvalue real parts; for
    ``kind == "density"`` they are values of the divergence numerator ``S``.
    ``violations`` lists the off-plane failures only.
    """

    kind: str
    num_samples: int
    violations: list[list[float]] = field(default_factory=list)
    on_plane_violations: list[list[float]] = field(default_factory=list)
    num_on_plane: int = 0
    max_real_part_off_plane: float | None = None
    max_abs_real_part_on_plane: float | None = None
    min_value_off_plane: float | None = None
    max_abs_value_on_plane: float | None = None
    margins: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations and not self.on_plane_violations

    def to_json(self) -> dict:
        out = {"kind": self.kind, "num_samples": self.num_samples, "num_on_plane": self.num_on_plane}
        if self.kind == "hurwitz":
            out["max_real_part_off_plane"] = self.max_real_part_off_plane
            out["max_abs_real_part_on_plane"] = self.max_abs_real_part_on_plane
        else:
            out["min_value_off_plane"] = self.min_value_off_plane
            out["max_abs_value_on_plane"] = self.max_abs_value_on_plane
        out["violations"] = self.violations
        out["on_plane_violations"] = self.on_plane_violations
        out["margins"] = self.margins
        out["passed"] = self.passed
        out["config"] = self.config
        return out


def sample_points(dim: int, cfg: ScanConfig, *, min_plane_distance: float | None = None,
                  start: int = 0, count: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Uniform samples in the box, one generator per index.

    Samples whose last coordinate is below the exclusion radius are drawn
    again from the same generator. Returns ``(points, on_plane_mask)``; a
    point lands on the plane only if its last coordinate is exactly zero.
    """
    delta = cfg.plane_exclusion if min_plane_distance is None else min_plane_distance
    B = cfg.box_halfwidth
    count = cfg.num_samples if count is None else count
    pts = np.empty((count, dim))
    for k in range(count):
        rng = np.random.default_rng([int(cfg.rng_seed), start + k])
        x = rng.uniform(-B, B, dim)
        while delta > 0 and 0.0 < abs(x[-1]) < delta:
            x = rng.uniform(-B, B, dim)
        pts[k] = x
    return pts, pts[:, -1] == 0.0


def _max_real_parts(J: np.ndarray) -> np.ndarray:
    return np.array([max(ev.real for ev in eigenvalues(M)) for M in J])


def _max_abs_real_parts(J: np.ndarray) -> np.ndarray:
    return np.array([max(abs(ev.real) for ev in eigenvalues(M)) for M in J])


def _margins(levels: np.ndarray, values: np.ndarray, bins: int, B: float, reduce) -> list[dict]:
    edges = np.linspace(0.0, B, bins + 1)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (levels >= lo) & (levels < hi) if hi < B else (levels >= lo) & (levels <= hi)
        if sel.any():
            out.append({"abs_last_lo": float(lo), "abs_last_hi": float(hi), "count": int(sel.sum()),
                        "extreme": float(reduce(values[sel]))})
    return out


def hurwitz_scan(F: PolyMap | CompiledMap, cfg: ScanConfig, *, plane: bool = True,
                 on_plane_tol: float = ON_PLANE_RE_TOL) -> ScanReport:
    """Eigenvalue real parts of ``JF`` on sampled points.

    Off-plane samples need every real part ``< 0``. With ``plane`` the
    same samples with ``x_d := 0`` are checked for ``|Re| <= on_plane_tol``.
    With ``plane=False`` there is no exceptional set (e.g. a field that is
    Hurwitz everywhere) and all samples count as off-plane.
    """
    cm = F if isinstance(F, CompiledMap) else CompiledMap(F)
    d = cm.n
    pts, on = sample_points(d, cfg)
    if not plane:
        on = np.zeros(len(pts), dtype=bool)
    off_pts = pts[~on]
    re_off = _max_real_parts(cm.jacobian(off_pts)) if len(off_pts) else np.empty(0)
    bad = re_off >= 0
    report = ScanReport("hurwitz", cfg.num_samples, config=cfg.to_json())
    report.violations = [list(map(float, p)) for p in off_pts[bad]]
    report.max_real_part_off_plane = float(re_off.max()) if len(re_off) else None
    if plane:
        plane_pts = pts.copy()
        plane_pts[:, -1] = 0.0
        re_on = _max_abs_real_parts(cm.jacobian(plane_pts))
        report.num_on_plane = len(plane_pts)
        report.max_abs_real_part_on_plane = float(re_on.max())
        report.on_plane_violations = [list(map(float, p)) for p in plane_pts[re_on > on_plane_tol]]
        report.margins = _margins(np.abs(off_pts[:, -1]), re_off, cfg.margin_bins, cfg.box_halfwidth, np.max)
    return report


def divergence_numerator(F: PolyMap, rho: Density) -> Polynomial:
    """``S`` with ``div(rho F) = P^{-(alpha+1)} S`` for ``rho = P^{-alpha}``.

    ``S = P div F - alpha grad P . F``, exact in the rationals.
    """
    P, alpha = rho.P, to_rational(rho.alpha)
    if P.nvars != F.nvars:
        raise ValueError("density and field live in different dimensions")
    div = Polynomial.zero(F.nvars)
    flow = Polynomial.zero(F.nvars)
    for i, Fi in enumerate(F):
        div = div + Fi.partial(i)
        flow = flow + P.partial(i) * Fi
    return P * div - flow.scale(alpha)


def density_scan(S: Polynomial, cfg: ScanConfig, *, plane: bool = True,
                 on_plane_tol: float = ON_PLANE_S_TOL) -> ScanReport:
    """Sign of ``S`` on sampled points: ``S > 0`` off the plane, ``S ~ 0`` on it.

    The on-plane test is relative: ``|S| <= on_plane_tol * sum |terms|``.
    """
    d = S.nvars
    value = CompiledPolys([S], d)
    absval = CompiledPolys([Polynomial._raw({e: abs(c) for e, c in S.items()}, d)], d)
    pts, on = sample_points(d, cfg)
    if not plane:
        on = np.zeros(len(pts), dtype=bool)
    off_pts = pts[~on]
    vals = value(off_pts)[:, 0] if len(off_pts) else np.empty(0)
    report = ScanReport("density", cfg.num_samples, config=cfg.to_json())
    report.violations = [list(map(float, p)) for p in off_pts[~(vals > 0)]]
    report.min_value_off_plane = float(vals.min()) if len(vals) else None
    if plane:
        plane_pts = pts.copy()
        plane_pts[:, -1] = 0.0
        v_on = np.abs(value(plane_pts)[:, 0])
        scale = absval(plane_pts)[:, 0]
        report.num_on_plane = len(plane_pts)
        report.max_abs_value_on_plane = float(v_on.max())
        report.on_plane_violations = [list(map(float, p)) for p in plane_pts[v_on > on_plane_tol * scale]]
        report.margins = _margins(np.abs(off_pts[:, -1]), vals, cfg.margin_bins, cfg.box_halfwidth, np.min)
    return report


def integrability_check(rho: Density) -> bool:
    """The ``alpha > 2`` criterion for integrability of ``rho`` away from the origin."""
    return to_rational(rho.alpha) > 2


def restrict_to_plane(S: Polynomial) -> Polynomial:
    """``S`` with the last variable set to zero (still in ``S.nvars`` variables)."""
    return S.restrict(S.nvars - 1, 0)

