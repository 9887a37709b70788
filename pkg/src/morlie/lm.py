"""Levenberg-Marquardt for sums of block norms.

The objective is ``w * sum_b |r_b(x)|`` with residual blocks r_b (e.g. one
3-vector per particle), which is the particle-averaged cloud distance when
w = 1/N.  Each damping level tries the steps (H + lam D) dx = -g for a
Newton-type and a reweighted least-squares curvature model H (Marquardt
scaling D = diag(H)) and keeps the better one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class LMConfig:
    max_iters: int = 50
    grad_tol: float = 1e-10
    damping_init: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 10.0
    rel_tol: float = 1e-9
    max_damping: float = 1e12


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    converged: bool
    iterations: int
    history: list = field(default_factory=list)


def block_cost(r: np.ndarray, w: float) -> float:
    return float(w * np.linalg.norm(r, axis=-1).sum())


def _model(r: np.ndarray, jac: np.ndarray, w: float):
    """Gradient and two curvature models of w * sum_b |r_b| (r: (B, d), jac: (B, d, p)).

    h_newton is the first-order part of the exact Hessian,
    sum_b s_b J_b^T (I - rhat_b rhat_b^T) J_b with s_b = w / |r_b|; it is exact
    for affine residuals but degenerate along the direction to a zero-residual
    solution. h_irls = sum_b s_b J_b^T J_b is the iteratively reweighted
    least-squares model, which solves zero-residual affine problems in one step.
    """
    n = np.linalg.norm(r, axis=-1)
    floor = 1e-300 + 1e-14 * n.max(initial=0.0)
    n = np.maximum(n, floor)
    rhat = r / n[:, None]
    rj = np.einsum("bd,bdp->bp", rhat, jac)
    g = w * rj.sum(axis=0)
    s = w / n
    h_irls = np.einsum("b,bdp,bdq->pq", s, jac, jac)
    h_newton = h_irls - np.einsum("b,bp,bq->pq", s, rj, rj)
    return g, h_newton, h_irls


def _solve(h, lam, g):
    d = np.diag(h).copy()
    d = np.maximum(d, 1e-12 * d.max(initial=0.0) + 1e-300)
    try:
        return np.linalg.solve(h + lam * np.diag(d), -g)
    except np.linalg.LinAlgError:
        return None


def lm_minimize(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    weight: float,
    cfg: LMConfig = LMConfig(),
    retract: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    abs_tol: float = 0.0,
) -> LMResult:
    """Minimize weight * sum_b |residual(x)_b| by Levenberg-Marquardt.

    `residual(x)` returns (B, d) blocks and `jacobian(x)` their derivative
    (B, d, p) with respect to the update direction used by `retract`
    (plain addition when omitted). Costs in the returned history are the
    accepted iterates and never increase.
    """
    retract = retract or (lambda x, d: x + d)
    x = np.asarray(x0, dtype=float)
    r = residual(x)
    cost = block_cost(r, weight)
    history = [cost]
    if not np.isfinite(cost):
        raise ValueError("lm_minimize: non-finite initial cost")
    if cost <= abs_tol:
        return LMResult(x, cost, True, 0, history)
    lam = cfg.damping_init
    converged = False
    it = 0
    jac = jacobian(x)
    while it < cfg.max_iters:
        it += 1
        g, h_newton, h_irls = _model(r, jac, weight)
        if np.linalg.norm(g) <= cfg.grad_tol:
            converged = True
            break
        accepted = False
        while lam <= cfg.max_damping:
            best = None
            for h in (h_newton, h_irls):
                step = _solve(h, lam, g)
                if step is None:
                    continue
                with np.errstate(over="ignore", invalid="ignore"):
                    x_try = retract(x, step)
                    r_try = residual(x_try)
                    c_try = block_cost(r_try, weight)
                if np.isfinite(c_try) and (best is None or c_try < best[2]):
                    best = (x_try, r_try, c_try)
            if best is not None and best[2] < cost:
                x_new, r_new, cost_new = best
                accepted = True
                break
            lam *= cfg.damping_up
        if not accepted:
            # no descent at any damping: stationary to working precision
            converged = True
            break
        rel = (cost - cost_new) / max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / cfg.damping_down, 1e-15)
        if cost <= abs_tol or rel <= cfg.rel_tol:
            converged = True
            break
        jac = jacobian(x)
    return LMResult(x, cost, converged, it, history)
