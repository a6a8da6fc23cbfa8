"""Dormand-Prince 5(4) integration of ``x' = F(x)`` for polynomial fields.

``integrate_ensemble`` advances a batch of initial conditions at once, each
row with its own step size and acceptance decisions, so a single trajectory
and the same trajectory inside a batch follow identical step sequences.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..polycore import PolyMap
from .evaluator import CompiledMap

__all__ = [
    "StepSizeUnderflow",
    "IntegrationCancelled",
    "Trajectory",
    "IntegratorConfig",
    "integrate",
    "integrate_ensemble",
    "dopri5_step",
    "fixed_step_solve",
]

# Butcher tableau (Hairer, Norsett & Wanner)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4

CONVERGED = "converged"
MAX_TIME = "max_time"
DIVERGED = "diverged"


class StepSizeUnderflow(ArithmeticError):
    pass


class IntegrationCancelled(RuntimeError):
    pass


@dataclass
class IntegratorConfig:
    t_max: float = 500.0
    atol: float = 1e-9
    rtol: float = 1e-9
    converge_norm: float = 1e-6
    diverge_norm: float = 1e6
    max_steps: int = 2_000_000
    record: bool = True

    def __post_init__(self):
        if not (self.atol > 0 and self.rtol > 0):
            raise ValueError("tolerances must be positive")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")


@dataclass
class Trajectory:
    times: list[float]
    states: list[list[float]]
    terminated: str
    final_norm: float
    steps_accepted: int = 0
    steps_rejected: int = 0

    @property
    def final_state(self) -> list[float]:
        return self.states[-1]

    @property
    def t_final(self) -> float:
        return self.times[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = len(self.states[0])
        w.writerow(["t"] + [f"x{i + 1}" for i in range(d)])
        for t, x in zip(self.times, self.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "terminated": self.terminated,
            "final_norm": self.final_norm,
            "t_final": self.t_final,
            "final_state": list(self.final_state),
            "steps_accepted": self.steps_accepted,
            "steps_rejected": self.steps_rejected,
        }


def _as_rhs(F) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(F, CompiledMap):
        return F
    if isinstance(F, PolyMap):
        return CompiledMap(F)
    return F


def dopri5_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h, k1: np.ndarray | None = None):
    """One Dormand-Prince step for a batch ``y`` (shape ``(B, d)``).

    ``h`` is a scalar or a length-``B`` array. Returns ``(y5, err, k7)``
    where ``err`` is the embedded 5(4) difference and ``k7 = f(y5)``.
    """
    h = np.asarray(h, dtype=float)
    hc = h.reshape(-1, 1) if h.ndim else h
    ks = [f(y) if k1 is None else k1]
    for s in range(1, 7):
        acc = y.copy()
        for j, a in enumerate(A[s]):
            if a:
                acc += hc * a * ks[j]
        ks.append(f(acc))
    y5 = acc  # stage 7 is evaluated at the fifth-order solution (FSAL)
    err = hc * sum(e * k for e, k in zip(E, ks) if e)
    return y5, err, ks[6]


def _initial_step(f, y0: np.ndarray, f0: np.ndarray, atol: float, rtol: float) -> np.ndarray:
    # Hairer's starting-step heuristic, per row
    sc = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / sc) ** 2, axis=1))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2, axis=1))
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    y1 = y0 + h0[:, None] * f0
    f1 = f(y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2, axis=1)) / h0
    dm = np.maximum(d1, d2)
    h1 = np.where(dm <= 1e-15, np.maximum(1e-6, h0 * 1e-3), (0.01 / np.maximum(dm, 1e-300)) ** 0.2)
    return np.minimum(100 * h0, h1)


def integrate_ensemble(F, x0s: Sequence[Sequence[float]], cfg: IntegratorConfig | None = None,
                       *, cancel=None) -> list[Trajectory]:
    """Integrate every row of ``x0s`` with independent adaptive steps."""
    cfg = cfg or IntegratorConfig()
    f = _as_rhs(F)
    Y = np.array(x0s, dtype=float)
    if Y.ndim != 2 or Y.shape[0] == 0:
        return []
    if not np.all(np.isfinite(Y)):
        raise ValueError("initial conditions must be finite")
    B, d = Y.shape
    T = np.zeros(B)
    status = [None] * B
    times = [[0.0] for _ in range(B)]
    states = [[list(map(float, Y[i]))] for i in range(B)]
    acc_n = np.zeros(B, dtype=int)
    rej_n = np.zeros(B, dtype=int)

    def classify(i: int) -> str | None:
        nrm = float(np.linalg.norm(Y[i]))
        if nrm < cfg.converge_norm:
            return CONVERGED
        if nrm > cfg.diverge_norm or not math.isfinite(nrm):
            return DIVERGED
        if T[i] >= cfg.t_max:
            return MAX_TIME
        return None

    for i in range(B):
        status[i] = classify(i)
    active = np.array([s is None for s in status])
    K1 = np.zeros_like(Y)
    H = np.zeros(B)
    if active.any():
        idx = np.flatnonzero(active)
        K1[idx] = f(Y[idx])
        H[idx] = _initial_step(f, Y[idx], K1[idx], cfg.atol, cfg.rtol)

    steps = 0
    while active.any():
        if cancel is not None and cancel.is_set():
            raise IntegrationCancelled("integration cancelled")
        steps += 1
        if steps > cfg.max_steps:
            raise RuntimeError("integration exceeded max_steps")
        idx = np.flatnonzero(active)
        y, h, t = Y[idx], np.minimum(H[idx], cfg.t_max - T[idx]), T[idx]
        if np.any(h <= 16 * np.finfo(float).eps * np.maximum(np.abs(t), 1.0)):
            raise StepSizeUnderflow(f"step size underflow at t = {float(t.min()):.6g}")
        y5, err, k7 = dopri5_step(f, y, h, K1[idx])
        sc = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y5))
        with np.errstate(over="ignore", invalid="ignore"):
            en = np.sqrt(np.mean((err / sc) ** 2, axis=1))
        en = np.where(np.isfinite(en), en, np.inf)
        ok = en <= 1.0
        fac = np.where(en == 0, 5.0, 0.9 * np.maximum(en, 1e-300) ** -0.2)
        fac = np.clip(fac, 0.2, 5.0)
        fac = np.where(ok, fac, np.minimum(fac, 1.0))
        H[idx] = h * fac
        acc = idx[ok]
        if acc.size:
            hk, tk = h[ok], t[ok]
            Y[acc] = y5[ok]
            K1[acc] = k7[ok]
            T[acc] = np.where(hk < cfg.t_max - tk, tk + hk, cfg.t_max)
            acc_n[acc] += 1
            if cfg.record:
                for i in acc:
                    times[i].append(float(T[i]))
                    states[i].append(list(map(float, Y[i])))
            norms = np.linalg.norm(Y[acc], axis=1)
            done = (norms < cfg.converge_norm) | (norms > cfg.diverge_norm) | ~np.isfinite(norms) | (T[acc] >= cfg.t_max)
            for i in acc[done]:
                status[i] = classify(i)
                active[i] = False
        rej_n[idx[~ok]] += 1

    out = []
    for i in range(B):
        if not cfg.record and acc_n[i]:
            times[i].append(float(T[i]))
            states[i].append(list(map(float, Y[i])))
        out.append(Trajectory(times[i], states[i], status[i], float(np.linalg.norm(Y[i])),
                              int(acc_n[i]), int(rej_n[i])))
    return out


def integrate(F, x0: Sequence[float], t_max: float = 500.0, atol: float = 1e-9, rtol: float = 1e-9,
              **kwargs) -> Trajectory:
    """Adaptive Dormand-Prince trajectory of ``x' = F(x)`` from ``x0``.

    Stops early with ``converged`` when ``|x| < 1e-6`` or ``diverged`` when
    ``|x| > 1e6``; otherwise ``max_time`` at ``t_max``.
    """
    cfg = IntegratorConfig(t_max=t_max, atol=atol, rtol=rtol, **kwargs)
    return integrate_ensemble(F, [list(x0)], cfg)[0]


def fixed_step_solve(F, x0: Sequence[float], t_end: float, nsteps: int) -> np.ndarray:
    """Fifth-order solution after ``nsteps`` equal steps (for order checks)."""
    f = _as_rhs(F)
    y = np.array([x0], dtype=float)
    h = t_end / nsteps
    k1 = None
    for _ in range(nsteps):
        y, _, k1 = dopri5_step(f, y, h, k1)
    return y[0]
