"""
Augmented Lagrangian Solver Module
Inner loop of the coordinate descent: slack variables eliminated in closed
form, BFGS on the reduced Lagrangian, projected dual ascent, and the
inner-loop convergence monitor.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import line_search

from qcqp_assembly import QcqpProblem
from scenario import ScenarioConfig

logger = logging.getLogger(__name__)

VIOLATION_TOL = 1e-8
STEP_TOL = 1e-10
CAUCHY_TOL = 1e-6
MAX_ADAPTIVE_RHO = 1e6


def _hinge(x_r: np.ndarray, lam: np.ndarray, rho: float, prob: QcqpProblem) -> np.ndarray:
    """[lambda_i / rho + c_i(x) - r_i]^+."""
    return np.maximum(lam / rho + prob.residuals(x_r), 0.0)


def reduced_lagrangian(x_r: np.ndarray, lam: np.ndarray, rho: float, prob: QcqpProblem) -> float:
    """
    Augmented Lagrangian with the slacks minimised out.

    x^T P_0 x + q_0^T x - sum lambda_i^2 / (2 rho) + (rho / 2) sum ([lambda_i / rho + c_i - r_i]^+)^2
    """
    h = _hinge(x_r, lam, rho, prob)
    return float(prob.quadratic_objective(x_r) - np.sum(lam ** 2) / (2.0 * rho) + 0.5 * rho * np.sum(h ** 2))


def full_lagrangian(x_r: np.ndarray, slack: np.ndarray, lam: np.ndarray, rho: float, prob: QcqpProblem) -> float:
    """Augmented Lagrangian with explicit slacks phi_i >= 0."""
    g = prob.residuals(x_r) + slack
    return float(prob.quadratic_objective(x_r) + lam @ g + 0.5 * rho * np.sum(g ** 2))


def slack_update(x_r: np.ndarray, lam: np.ndarray, rho: float, prob: QcqpProblem) -> np.ndarray:
    """phi_i = max(-lambda_i / rho - c_i(x) + r_i, 0)."""
    return np.maximum(-lam / rho - prob.residuals(x_r), 0.0)


def gradient(x_r: np.ndarray, lam: np.ndarray, rho: float, prob: QcqpProblem) -> np.ndarray:
    """2 P_0 x + q_0 + rho sum_i h_i (2 P_i x + q_i), h_i the hinge of constraint i."""
    h = _hinge(x_r, lam, rho, prob)
    return prob.objective_gradient(x_r) + prob.weighted_constraint_gradient(x_r, rho * h)


def dual_update(x_r_new: np.ndarray, lam: np.ndarray, rho: float, prob: QcqpProblem) -> np.ndarray:
    """lambda_i <- [lambda_i + rho (c_i(x) - r_i)]^+."""
    return np.maximum(lam + rho * prob.residuals(x_r_new), 0.0)


def max_violation(x_r: np.ndarray, prob: QcqpProblem) -> float:
    """max_i [c_i(x) - r_i]^+ / s_i, s_i the row scale (PAPR rows relative to their cap)."""
    return float(max(0.0, np.max(prob.scaled_residuals(x_r))))


@dataclass
class BfgsResult:
    """Outcome of one quasi-Newton minimisation."""

    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    status: str


def _backtrack(f, x, fx, g, direction, shrink=0.5, c1=1e-4, max_steps=60):
    slope = float(g @ direction)
    alpha = 1.0
    for _ in range(max_steps):
        candidate = f(x + alpha * direction)
        if candidate <= fx + c1 * alpha * slope:
            return alpha, candidate
        alpha *= shrink
    return None, None


def bfgs_minimize(f: Callable[[np.ndarray], float], grad: Callable[[np.ndarray], np.ndarray],
                  x_init: np.ndarray, max_iters: int = 50, tol: float = 1e-8) -> BfgsResult:
    """
    BFGS with a strong-Wolfe line search and an identity-initialised inverse Hessian.

    The inverse-Hessian update is skipped whenever the curvature pair has
    s^T y <= 0, which happens across kinks of the hinge penalty.

    Args:
        f: Objective
        grad: Gradient of f
        x_init: Starting point
        max_iters: Iteration budget
        tol: Gradient-norm stopping tolerance

    Returns:
        BfgsResult with status 'converged', 'iteration_budget' or 'line_search_failed'
    """
    x = np.array(x_init, dtype=float)
    fx = f(x)
    g = grad(x)
    if not np.isfinite(fx):
        raise ValueError("Objective is not finite at the starting point")
    n = x.size
    H = np.eye(n)
    old_fx = fx + np.linalg.norm(g) / 2.0
    gnorm = float(np.linalg.norm(g))
    if gnorm <= tol:
        return BfgsResult(x=x, fun=fx, grad_norm=gnorm, iterations=0, status='converged')

    status = 'iteration_budget'
    iterations = 0
    for iterations in range(1, max_iters + 1):
        direction = -H @ g
        if g @ direction >= 0:
            # lost descent after skipped updates; restart from steepest descent
            H = np.eye(n)
            direction = -g
        try:
            alpha, _, _, f_new, _, _ = line_search(f, grad, x, direction, gfk=g,
                                                   old_fval=fx, old_old_fval=old_fx)
        except (FloatingPointError, ValueError):
            alpha, f_new = None, None
        if alpha is None or f_new is None or not np.isfinite(f_new):
            alpha, f_new = _backtrack(f, x, fx, g, direction)
            if alpha is None:
                status = 'line_search_failed'
                logger.debug(f"BFGS line search failed at iteration {iterations}, |g|={gnorm:.3e}")
                iterations -= 1
                break
        x_new = x + alpha * direction
        g_new = grad(x_new)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho_k = 1.0 / sy
            Hy = H @ y
            H += (rho_k ** 2 * (sy + y @ Hy)) * np.outer(s, s) - rho_k * (np.outer(Hy, s) + np.outer(s, Hy))
        old_fx, fx = fx, f_new
        x, g = x_new, g_new
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            status = 'converged'
            break
    return BfgsResult(x=x, fun=float(fx), grad_norm=gnorm, iterations=iterations, status=status)


@dataclass
class InnerTrace:
    """Per-iteration record of the inner loop."""

    objective: List[float] = field(default_factory=list)
    max_violation: List[float] = field(default_factory=list)
    dual_norm: List[float] = field(default_factory=list)
    step_norm: List[float] = field(default_factory=list)
    constraint_values: List[np.ndarray] = field(default_factory=list)

    def __len__(self):
        return len(self.objective)

    def record(self, objective: float, violation: float, dual_norm: float, step: float,
               values: np.ndarray):
        self.objective.append(objective)
        self.max_violation.append(violation)
        self.dual_norm.append(dual_norm)
        self.step_norm.append(step)
        self.constraint_values.append(values)

    def is_cauchy(self, tail_fraction: float = 0.25, tol: float = CAUCHY_TOL) -> bool:
        """Successive constraint values over the final iterations differ by less than tol."""
        count = len(self.constraint_values)
        if count < 2:
            return True
        start = max(0, count - max(2, int(math.ceil(tail_fraction * count))))
        tail = np.array(self.constraint_values[start:])
        return bool(np.max(np.abs(np.diff(tail, axis=0))) < tol)

    def rows(self):
        for n in range(len(self)):
            yield (n + 1, self.objective[n], self.max_violation[n], self.dual_norm[n], self.step_norm[n])


@dataclass
class InnerResult:
    """Primal/dual output of one inner solve."""

    x_r: np.ndarray
    lam: np.ndarray
    trace: InnerTrace
    status: str
    rho: float
    bfgs_failures: int = 0


def inner_solve(prob: QcqpProblem, x_init: np.ndarray, cfg: ScenarioConfig,
                lam_init: Optional[np.ndarray] = None) -> InnerResult:
    """
    Alternate BFGS on the reduced Lagrangian with dual ascent.

    Args:
        prob: Assembled QCQP
        x_init: Real starting point (phi of the current waveform)
        cfg: Scenario (rho, inner_iters, bfgs_iters, bfgs_tol, adaptive_rho)
        lam_init: Initial multipliers (zeros by default)

    Returns:
        InnerResult; status 'converged' when the violation and step tolerances
        are met and the constraint sequence passes the Cauchy monitor,
        'bfgs_failure' when the last minimisation failed on an infeasible
        point, 'iteration_budget' otherwise
    """
    x_r = np.array(x_init, dtype=float)
    lam = np.zeros(prob.m) if lam_init is None else np.array(lam_init, dtype=float)
    rho = float(cfg.rho)
    trace = InnerTrace()
    status = 'iteration_budget'
    failures = 0
    last_failed = False
    previous_violation = max_violation(x_r, prob)

    for n in range(1, cfg.inner_iters + 1):
        def f(z, lam=lam, rho=rho):
            return reduced_lagrangian(z, lam, rho, prob)

        def g(z, lam=lam, rho=rho):
            return gradient(z, lam, rho, prob)

        result = bfgs_minimize(f, g, x_r, max_iters=cfg.bfgs_iters, tol=cfg.bfgs_tol)
        last_failed = result.status == 'line_search_failed'
        if last_failed:
            failures += 1
            logger.warning(f"Inner iteration {n}: BFGS line search failed (|g|={result.grad_norm:.3e})")
        step = float(np.linalg.norm(result.x - x_r))
        x_r = result.x
        lam = dual_update(x_r, lam, rho, prob)
        violation = max_violation(x_r, prob)
        trace.record(prob.objective(x_r), violation, float(np.linalg.norm(lam)), step,
                     prob.constraint_values(x_r))

        if violation < VIOLATION_TOL and step < STEP_TOL:
            status = 'converged' if trace.is_cauchy() else 'iteration_budget'
            break
        if cfg.adaptive_rho and violation > 0.25 * previous_violation and rho < MAX_ADAPTIVE_RHO:
            rho = min(rho * 10.0, MAX_ADAPTIVE_RHO)
            logger.debug(f"Inner iteration {n}: penalty raised to rho={rho:g}")
        previous_violation = violation

    if status != 'converged' and last_failed and trace.max_violation[-1] > cfg.feasibility_tol:
        status = 'bfgs_failure'
    logger.debug(f"Inner solve finished after {len(trace)} iterations: status={status}, "
                 f"violation={trace.max_violation[-1]:.3e}")
    return InnerResult(x_r=x_r, lam=lam, trace=trace, status=status, rho=rho, bfgs_failures=failures)
