"""Unconstrained COBYLA: linear interpolation over a simplex plus a shrinking trust region.

Follows Powell's scheme without the constraint machinery. The model is the
linear interpolant through the ``n + 1`` simplex vertices; each iteration
either takes a trust-region step of length ``rho`` down the model gradient or,
when the simplex has degenerated, a geometry step that restores its volume.
``rho`` is halved once steps stop paying off, until it reaches ``rho_end``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

# acceptability constants of Powell's 1994 scheme
ALPHA = 0.25  # min vertex-to-face distance, in units of rho
BETA = 2.1  # max edge length, in units of rho
GAMMA = 0.5  # geometry step length, in units of rho
DELTA = 1.1  # edge length beyond which a vertex is preferred for replacement


class OptimizationError(RuntimeError):
    """Objective returned a non-finite value."""


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    nfev: int
    history: list[float] = field(default_factory=list)
    rho: float = 0.0
    message: str = ""


class _Simplex:
    def __init__(self, fun, max_evals):
        self.fun = fun
        self.max_evals = max_evals
        self.V: list[np.ndarray] = []
        self.F: list[float] = []
        self.nfev = 0
        self.best_f = np.inf
        self.best_x: np.ndarray | None = None
        self.history: list[float] = []

    @property
    def exhausted(self) -> bool:
        return self.nfev >= self.max_evals

    def evaluate(self, x: np.ndarray) -> float:
        f = float(self.fun(x))
        self.nfev += 1
        if not np.isfinite(f):
            raise OptimizationError(f"objective returned {f} at evaluation {self.nfev} (x={x!r})")
        if f < self.best_f:
            self.best_f, self.best_x = f, x.copy()
        self.history.append(self.best_f)
        return f


def minimize_cobyla(
    fun: Callable[[np.ndarray], float],
    x0,
    rho_begin: float = 0.5,
    rho_end: float = 1e-4,
    max_evals: int = 1000,
) -> OptimizeResult:
    """Minimize ``fun`` from ``x0``; one history entry (best so far) per evaluation."""
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1).copy()
    n = x0.size
    if max_evals < 1:
        raise ValueError("max_evals must be >= 1")
    if not 0 < rho_end <= rho_begin:
        raise ValueError("need 0 < rho_end <= rho_begin")
    s = _Simplex(fun, max_evals)
    rho = rho_begin

    def result(msg: str) -> OptimizeResult:
        return OptimizeResult(s.best_x.copy(), s.best_f, s.nfev, s.history, rho, msg)

    s.V.append(x0)
    s.F.append(s.evaluate(x0))
    for j in range(n):
        if s.exhausted:
            return result("evaluation budget exhausted while building the simplex")
        v = x0.copy()
        v[j] += rho
        s.V.append(v)
        s.F.append(s.evaluate(v))
    if n == 0:
        return result("no free variables")

    geometry_next = False
    while not s.exhausted:
        V = np.asarray(s.V)
        F = np.asarray(s.F)
        b = int(np.argmin(F))
        others = [j for j in range(n + 1) if j != b]
        D = V[others] - V[b]
        try:
            Dinv = np.linalg.inv(D)
        except np.linalg.LinAlgError:
            Dinv = np.linalg.pinv(D)
        g = Dinv @ (F[others] - F[b])

        edge = np.linalg.norm(D, axis=1)
        col = np.linalg.norm(Dinv, axis=0)
        face_dist = np.where(col > 0, 1.0 / np.where(col > 0, col, 1.0), 0.0)
        acceptable = bool(np.all(edge <= BETA * rho) and np.all(face_dist >= ALPHA * rho))

        if geometry_next and not acceptable:
            geometry_next = False
            k = int(np.argmax(edge)) if np.any(edge > BETA * rho) else int(np.argmin(face_dist))
            normal = Dinv[:, k]
            nn = np.linalg.norm(normal)
            direction = normal / nn if nn > 0 else np.eye(n)[k]
            if g @ direction > 0:
                direction = -direction
            x_new = V[b] + GAMMA * rho * direction
            s.V[others[k]] = x_new
            s.F[others[k]] = s.evaluate(x_new)
            continue
        geometry_next = False

        gnorm = np.linalg.norm(g)
        if gnorm == 0.0:
            if not acceptable:
                geometry_next = True
                continue
            if rho <= rho_end:
                return result("trust radius reached rho_end")
            rho = _shrink(rho, rho_end)
            continue

        d = -rho * g / gnorm
        predicted = rho * gnorm
        x_new = V[b] + d
        f_new = s.evaluate(x_new)
        ratio = (F[b] - f_new) / predicted

        # coordinates of d in the simplex edge basis; replacing vertex k scales volume by |c_k|
        c = Dinv.T @ d
        vol = np.append(np.abs(c), abs(1.0 - c.sum()))
        cand = others + [b]
        dist = np.linalg.norm(V[cand] - (x_new if f_new < F[b] else V[b]), axis=1)
        weight = np.maximum(1.0, (dist / (DELTA * rho)) ** 2)
        score = vol * weight
        if f_new >= F[b]:
            score[-1] = 0.0  # keep the incumbent unless the trial beats it
        k = int(np.argmax(score))
        if f_new < F[b] or score[k] > 1.0:
            s.V[cand[k]] = x_new
            s.F[cand[k]] = f_new

        if ratio < 0.1:
            if not acceptable:
                geometry_next = True
                continue
            if rho <= rho_end:
                return result("trust radius reached rho_end")
            rho = _shrink(rho, rho_end)
            log.debug("rho -> %g after %d evaluations (best %g)", rho, s.nfev, s.best_f)
    return result("evaluation budget exhausted")


def _shrink(rho: float, rho_end: float) -> float:
    rho = 0.5 * rho
    return rho_end if rho <= 1.5 * rho_end else rho
