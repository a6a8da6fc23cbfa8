"""Trajectory experiments: attraction off the plane, rotation on it, and the
exact residual of exponential candidate solutions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from gmpy2 import mpq

from ..polycore import PolyMap, to_rational
from .evaluator import CompiledMap
from .ode import CONVERGED, DIVERGED, MAX_TIME, IntegratorConfig, Trajectory, integrate_ensemble
from .scans import ScanConfig, sample_points

__all__ = [
    "RotationCheck",
    "AttractorSummary",
    "attractor_experiment",
    "plane_rotation_check",
    "exponential_solution_residual",
]


@dataclass
class RotationCheck:
    pair: int
    start: list[float]
    max_relative_drift: float
    max_abs_last: float
    passed: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class AttractorSummary:
    num_traj: int
    num_converged: int = 0
    num_max_time: int = 0
    num_diverged: int = 0
    max_final_norm: float | None = None
    starts: list[list[float]] = field(default_factory=list)
    final_norms: list[float] = field(default_factory=list)
    outcomes: list[str] = field(default_factory=list)
    rotation: list[RotationCheck] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)

    @property
    def fraction_converged(self) -> float | None:
        return self.num_converged / self.num_traj if self.num_traj else None

    @property
    def rotation_passed(self) -> bool:
        return all(r.passed for r in self.rotation)

    @property
    def passed(self) -> bool:
        return self.num_converged == self.num_traj and self.rotation_passed

    def to_json(self) -> dict:
        return {
            "num_traj": self.num_traj,
            "num_converged": self.num_converged,
            "num_max_time": self.num_max_time,
            "num_diverged": self.num_diverged,
            "fraction_converged": self.fraction_converged,
            "max_final_norm": self.max_final_norm,
            "starts": self.starts,
            "final_norms": self.final_norms,
            "outcomes": self.outcomes,
            "rotation": [r.to_json() for r in self.rotation],
            "rotation_passed": self.rotation_passed,
            "passed": self.passed,
            "config": self.config,
        }


def plane_rotation_check(F: PolyMap | CompiledMap, *, t_max: float = 100.0, tol: float = 1e-6,
                         atol: float = 1e-9, rtol: float = 1e-9, cancel=None) -> list[RotationCheck]:
    """Start at ``e_{2j-1}`` for every rotation pair and integrate on ``[0, t_max]``.

    On the plane the field is an exact rotation, so ``|x|`` must stay put
    (relative drift ``<= tol``) and the last coordinate must stay exactly 0.
    """
    cm = F if isinstance(F, CompiledMap) else CompiledMap(F)
    d = cm.n
    starts = []
    for j in range((d - 1) // 2):
        x0 = [0.0] * d
        x0[2 * j] = 1.0
        starts.append(x0)
    if not starts:
        return []
    cfg = IntegratorConfig(t_max=t_max, atol=atol, rtol=rtol, converge_norm=0.0, diverge_norm=np.inf)
    out = []
    for j, (x0, traj) in enumerate(zip(starts, integrate_ensemble(cm, starts, cfg, cancel=cancel))):
        X = np.array(traj.states)
        norms = np.linalg.norm(X, axis=1)
        drift = float(np.max(np.abs(norms / norms[0] - 1.0)))
        last = float(np.max(np.abs(X[:, -1])))
        out.append(RotationCheck(j + 1, x0, drift, last, drift <= tol and last == 0.0))
    return out


def attractor_experiment(F: PolyMap | CompiledMap, num_traj: int, cfg: ScanConfig | None = None, *,
                         t_max: float = 500.0, min_plane_distance: float = 0.05,
                         atol: float = 1e-9, rtol: float = 1e-9, rotation: bool = True,
                         rotation_t_max: float = 100.0, keep_trajectories: bool = False,
                         cancel=None) -> AttractorSummary:
    """Integrate ``num_traj`` seeded starts with ``|x_last| >= min_plane_distance``.

    Starts are drawn like scan samples, from ``[-B, B]^d`` with the seed of
    ``cfg``. The summary also carries the on-plane rotation check. With
    ``keep_trajectories`` every accepted step is recorded and kept.
    """
    if num_traj < 0:
        raise ValueError("num_traj must be nonnegative")
    cfg = cfg or ScanConfig()
    meta = cfg.to_json()
    meta.update(num_samples=num_traj, t_max=t_max, min_plane_distance=min_plane_distance, atol=atol, rtol=rtol)
    summary = AttractorSummary(num_traj, config=meta)
    if num_traj == 0:
        return summary
    cm = F if isinstance(F, CompiledMap) else CompiledMap(F)
    starts, _ = sample_points(cm.n, cfg, min_plane_distance=min_plane_distance, count=num_traj)
    icfg = IntegratorConfig(t_max=t_max, atol=atol, rtol=rtol, record=keep_trajectories)
    trajs = integrate_ensemble(cm, starts, icfg, cancel=cancel)
    summary.starts = [list(map(float, s)) for s in starts]
    summary.final_norms = [t.final_norm for t in trajs]
    summary.outcomes = [t.terminated for t in trajs]
    summary.num_converged = summary.outcomes.count(CONVERGED)
    summary.num_max_time = summary.outcomes.count(MAX_TIME)
    summary.num_diverged = summary.outcomes.count(DIVERGED)
    summary.max_final_norm = max(summary.final_norms)
    if keep_trajectories:
        summary.trajectories = trajs
    if rotation:
        summary.rotation = plane_rotation_check(cm, t_max=rotation_t_max, atol=atol, rtol=rtol, cancel=cancel)
    return summary


def exponential_solution_residual(F: PolyMap, coeffs: Sequence, rates: Sequence[int]) -> list[dict[int, mpq]]:
    """Residual of ``x_i(t) = c_i e^{r_i t}`` in ``x' = F(x)``, exactly.

    With ``E = e^t`` every component of ``x' - F(x)`` becomes a Laurent
    polynomial in ``E``; it is returned as ``{power: coefficient}`` with zero
    coefficients dropped. The candidate is a solution iff every dict is empty.
    """
    n = F.nvars
    if len(coeffs) != n or len(rates) != n:
        raise ValueError("need one coefficient and one rate per coordinate")
    c = [to_rational(v) for v in coeffs]
    r = [int(v) for v in rates]
    out = []
    for i, Fi in enumerate(F):
        res: dict[int, mpq] = {}
        if c[i] and r[i]:
            res[r[i]] = c[i] * r[i]
        for e, a in Fi.items():
            val = mpq(a)
            for cj, k in zip(c, e):
                if k:
                    val *= cj ** k
            if val:
                p = sum(k * rj for k, rj in zip(e, r))
                res[p] = res.get(p, mpq(0)) - val
        out.append({p: v for p, v in sorted(res.items()) if v})
    return out

