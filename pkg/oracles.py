"""
Reference Oracles Module
Slow, explicit re-implementations used by the test suite to cross-check the
solver path. Nothing here imports the numerical modules it checks; only the
scenario and problem containers are shared.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg

from qcqp_assembly import QcqpProblem
from scenario import ScenarioConfig

logger = logging.getLogger(__name__)

MAX_ORACLE_DIM = 64


class OracleError(ValueError):
    """Raised when an oracle precondition does not hold."""


def relative_error(a: float, b: float) -> float:
    """|a - b| / (1 + |b|)."""
    return float(abs(a - b) / (1.0 + abs(b)))


@dataclass(frozen=True)
class OracleReport:
    """Comparison of one main-path quantity against its oracle."""

    quantity: str
    main_value: float
    oracle_value: float
    relative_error: float
    tolerance: float
    passed: bool

    def __str__(self):
        mark = '✓' if self.passed else '✗'
        return (f"{mark} {self.quantity}: main={self.main_value:.12g} oracle={self.oracle_value:.12g} "
                f"rel.err={self.relative_error:.3e} (tol {self.tolerance:.1e})")


def compare(quantity: str, main_value: float, oracle_value: float, tolerance: float) -> OracleReport:
    err = relative_error(main_value, oracle_value)
    return OracleReport(quantity=quantity, main_value=float(main_value), oracle_value=float(oracle_value),
                        relative_error=err, tolerance=tolerance, passed=bool(err <= tolerance))


# ---------------------------------------------------------------------------
# Entrywise formulas
# ---------------------------------------------------------------------------

def brute_force_mui(H: np.ndarray, X: np.ndarray, S: np.ndarray) -> float:
    """Sum of |[HX - S]_{p,l}|^2 with explicit loops."""
    P, N = H.shape
    L = X.shape[1]
    total = 0.0
    for p in range(P):
        for l in range(L):
            received = 0j
            for n in range(N):
                received += H[p, n] * X[n, l]
            total += abs(received - S[p, l]) ** 2
    return total


def brute_force_sum_rate(H: np.ndarray, X: np.ndarray, S_eff: np.ndarray, sigma_c2: float) -> float:
    """Per-user averages over samples, summed log2(1 + signal / (interference + noise))."""
    P, L = S_eff.shape
    rate = 0.0
    for p in range(P):
        signal = 0.0
        interference = 0.0
        for l in range(L):
            received = sum(H[p, n] * X[n, l] for n in range(H.shape[1]))
            signal += abs(S_eff[p, l]) ** 2
            interference += abs(received - S_eff[p, l]) ** 2
        rate += np.log2(1.0 + (signal / L) / (interference / L + sigma_c2))
    return float(rate)


def explicit_response(theta_rad: float, cfg: ScenarioConfig) -> np.ndarray:
    """Pi(theta) built entry by entry: [Pi]_{r,t} = exp(j 2 pi (d_R r + d_T t) sin theta)."""
    Pi = np.empty((cfg.n_rx, cfg.n_tx), dtype=complex)
    s = np.sin(theta_rad)
    for r in range(cfg.n_rx):
        for t in range(cfg.n_tx):
            phase = 2.0 * np.pi * (cfg.rx_spacing_wavelengths * r + cfg.tx_spacing_wavelengths * t) * s
            Pi[r, t] = np.exp(1j * phase)
    return Pi


def explicit_lift(Pi: np.ndarray, L: int) -> np.ndarray:
    """Block-diagonal matrix with L copies of Pi, filled block by block."""
    n_r, n_t = Pi.shape
    lifted = np.zeros((n_r * L, n_t * L), dtype=complex)
    for l in range(L):
        lifted[l * n_r:(l + 1) * n_r, l * n_t:(l + 1) * n_t] = Pi
    return lifted


def brute_force_interference(x: np.ndarray, q: int, cfg: ScenarioConfig) -> np.ndarray:
    """T_{2,q} as an entrywise sum of rank-one terms plus sigma_r^2 I."""
    L = cfg.n_samples
    sources = []
    for k, angle in enumerate(cfg.target_angles):
        if k != q:
            sources.append((cfg.target_powers[k], angle))
    sources += list(zip(cfg.interferer_powers, cfg.interferer_angles))
    size = cfg.n_rx * L
    t2 = np.zeros((size, size), dtype=complex)
    for power, angle in sources:
        v = explicit_lift(explicit_response(np.deg2rad(angle), cfg), L) @ x
        for a in range(size):
            for b in range(size):
                t2[a, b] += power * v[a] * np.conj(v[b])
    for a in range(size):
        t2[a, a] += cfg.radar_noise_power
    return t2


def per_sample_sinr(x: np.ndarray, U: np.ndarray, q: int, cfg: ScenarioConfig) -> float:
    """
    Coherent space-time SINR of target q from explicit matrices.

    Args:
        x: Vectorised waveform
        U: Stacked combiner of target q (length N_R L)
        q: Target index
        cfg: Scenario
    """
    L = cfg.n_samples
    signal = 0.0
    interference = 0.0
    for k, angle in enumerate(cfg.target_angles):
        echo = explicit_lift(explicit_response(np.deg2rad(angle), cfg), L) @ x
        power = cfg.target_powers[k] * abs(np.conj(U) @ echo) ** 2
        if k == q:
            signal = power
        else:
            interference += power
    for power, angle in zip(cfg.interferer_powers, cfg.interferer_angles):
        echo = explicit_lift(explicit_response(np.deg2rad(angle), cfg), L) @ x
        interference += power * abs(np.conj(U) @ echo) ** 2
    noise = cfg.radar_noise_power * float(np.sum(np.abs(U) ** 2))
    return float(signal / (interference + noise))


# ---------------------------------------------------------------------------
# Augmented Lagrangian pieces, one constraint at a time
# ---------------------------------------------------------------------------

def _constraint_value(c, x_r: np.ndarray) -> float:
    return float(x_r @ c.P @ x_r + c.q @ x_r)


def _objective(prob: QcqpProblem, x_r: np.ndarray) -> float:
    return float(x_r @ prob.P0 @ x_r + prob.q0 @ x_r + prob.objective_constant)


def two_step_lagrangian(x_r: np.ndarray, lam: np.ndarray, rho: float, prob: QcqpProblem) -> float:
    """Compute the slacks first, then evaluate the Lagrangian with explicit slacks."""
    value = float(x_r @ prob.P0 @ x_r + prob.q0 @ x_r)
    for i, c in enumerate(prob.constraints):
        g = _constraint_value(c, x_r) - c.r
        slack = max(-lam[i] / rho - g, 0.0)
        value += lam[i] * (g + slack) + 0.5 * rho * (g + slack) ** 2
    return value


def dual_step(x_r: np.ndarray, lam: np.ndarray, rho: float, prob: QcqpProblem) -> np.ndarray:
    """Projected multiplier ascent, one constraint at a time."""
    out = np.empty(len(lam))
    for i, c in enumerate(prob.constraints):
        out[i] = max(lam[i] + rho * (_constraint_value(c, x_r) - c.r), 0.0)
    return out


def finite_difference_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences along every coordinate."""
    grad = np.empty(x.size)
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h
        grad[k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# Reference solvers
# ---------------------------------------------------------------------------

def generalized_eig_quotient(t1: np.ndarray, t2: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Largest generalized eigenpair of (t1, t2).

    Returns:
        (maximum of w^H t1 w / w^H t2 w, maximising direction)

    Raises:
        OracleError: if t2 is not Hermitian positive definite or too large
    """
    t1 = np.asarray(t1, dtype=complex)
    t2 = np.asarray(t2, dtype=complex)
    if t2.shape[0] > MAX_ORACLE_DIM:
        raise OracleError(f"Matrix dimension {t2.shape[0]} exceeds the oracle limit of {MAX_ORACLE_DIM}")
    if not np.allclose(t2, t2.conj().T):
        raise OracleError("t2 is not Hermitian")
    if np.min(np.linalg.eigvalsh(t2)) <= 0:
        raise OracleError("t2 is not positive definite")
    values, vectors = scipy.linalg.eigh(t1, t2)
    return float(values[-1]), vectors[:, -1]


def _split_constraints(prob: QcqpProblem):
    similarity, caps, penalised = None, [], []
    n = prob.n_complex
    for c in prob.constraints:
        if c.kind == 'similarity':
            similarity = c
        elif c.kind == 'papr':
            index = int(np.argmax(np.diag(c.P)[:n]))
            caps.append((index, c.r))
        elif c.kind == 'sinr':
            penalised.append(c)
    return similarity, caps, penalised


def _project_cap(y: np.ndarray, centre: np.ndarray, cos_min: float) -> np.ndarray:
    """Nearest unit vector to y with centre^T x >= cos_min (centre unit norm)."""
    norm = np.linalg.norm(y)
    if norm == 0:
        return centre.copy()
    z = y / norm
    if centre @ z >= cos_min:
        return z
    ortho = z - (centre @ z) * centre
    o_norm = np.linalg.norm(ortho)
    if o_norm < 1e-15:
        # y antipodal to the centre; every boundary point is equally near
        ortho = np.zeros_like(centre)
        ortho[np.argmin(np.abs(centre))] = 1.0
        ortho -= (centre @ ortho) * centre
        o_norm = np.linalg.norm(ortho)
    return cos_min * centre + np.sqrt(max(0.0, 1.0 - cos_min ** 2)) * ortho / o_norm


def _clip_samples(x: np.ndarray, caps, n: int) -> np.ndarray:
    out = x.copy()
    for p, cap in caps:
        power = out[p] ** 2 + out[p + n] ** 2
        if power > cap:
            scale = np.sqrt(cap / power)
            out[p] *= scale
            out[p + n] *= scale
    return out


def _feasible_point(y, centre, cos_min, caps, n, rounds: int = 200):
    x = _project_cap(y, centre, cos_min)
    for _ in range(rounds):
        if all(x[p] ** 2 + x[p + n] ** 2 <= cap * (1 + 1e-12) for p, cap in caps):
            break
        x = _project_cap(_clip_samples(x, caps, n), centre, cos_min)
    return x


def projected_gradient_restarts(prob: QcqpProblem, restarts: int, steps: int,
                                rng: np.random.Generator, penalty: float = 1e4,
                                tol: float = 1e-6) -> Tuple[Optional[np.ndarray], float]:
    """
    Projected gradient descent with random restarts.

    The unit sphere, the similarity ball and the per-sample caps are handled
    by alternating projections (sphere intersected with the ball is a
    spherical cap with a closed-form projection); SINR rows enter through a
    quadratic penalty. Restart starting points are drawn sequentially from
    rng, so a larger restart count examines a superset of starts.

    Args:
        prob: Assembled problem
        restarts: Number of random starting points
        steps: Gradient steps per restart
        rng: Random generator
        penalty: Weight of the squared SINR violations
        tol: Residual tolerance for a point to count as feasible

    Returns:
        (best feasible real point, its objective), or (None, inf) when no
        feasible point was found
    """
    n = prob.n_complex
    if prob.n_real > MAX_ORACLE_DIM:
        raise OracleError(f"Problem has {prob.n_real} real variables; the oracle limit is {MAX_ORACLE_DIM}")
    similarity, caps, penalised = _split_constraints(prob)
    centre = -0.5 * similarity.q
    if not np.isclose(np.linalg.norm(centre), 1.0, atol=1e-9):
        raise OracleError("The similarity centre must have unit norm")
    eps_sq = similarity.r + centre @ centre
    cos_min = 1.0 - eps_sq / 2.0

    def violations(x):
        return [_constraint_value(c, x) - c.r for c in penalised]

    def penalised_objective(x):
        return _objective(prob, x) + penalty * sum(max(g, 0.0) ** 2 for g in violations(x))

    def penalised_gradient(x):
        grad = 2.0 * prob.P0 @ x + prob.q0
        for c, g in zip(penalised, violations(x)):
            if g > 0:
                grad += 2.0 * penalty * g * (2.0 * c.P @ x + c.q)
        return grad

    def is_feasible(x):
        if abs(x @ x - 1.0) > tol or x @ x - 2.0 * centre @ x + centre @ centre > eps_sq + tol:
            return False
        if any(x[p] ** 2 + x[p + n] ** 2 > cap + tol for p, cap in caps):
            return False
        return all(g <= tol for g in violations(x))

    # unconstrained minimiser of the objective (P0 positive definite)
    unconstrained = np.linalg.solve(2.0 * prob.P0, -prob.q0)
    if is_feasible(unconstrained):
        return unconstrained, _objective(prob, unconstrained)

    base_step = 0.5 / np.linalg.norm(prob.P0, 2)
    best_x, best_value = None, np.inf
    for _ in range(restarts):
        x = _feasible_point(rng.standard_normal(prob.n_real), centre, cos_min, caps, n)
        value = penalised_objective(x)
        for _ in range(steps):
            step = base_step
            grad = penalised_gradient(x)
            while step > 1e-12:
                candidate = _feasible_point(x - step * grad, centre, cos_min, caps, n)
                candidate_value = penalised_objective(candidate)
                if candidate_value < value:
                    break
                step *= 0.5
            else:
                break
            moved = np.linalg.norm(candidate - x)
            x, value = candidate, candidate_value
            if moved < 1e-13:
                break
        if is_feasible(x):
            objective = _objective(prob, x)
            if objective < best_value:
                best_x, best_value = x, objective
    if best_x is None:
        logger.warning(f"Projected gradient oracle found no feasible point in {restarts} restarts")
    return best_x, float(best_value)


def quadratic_forms(prob: QcqpProblem, x_r: np.ndarray) -> List[float]:
    """Constraint values from the materialised (P_i, q_i) triples."""
    return [_constraint_value(c, x_r) for c in prob.constraints]
