"""
QCQP Assembly Module
Complex-to-real operators and assembly of the real-valued quadratic program
solved by the waveform block: objective ||x - x_comm||^2 subject to the unit
norm, similarity, per-sample PAPR and per-target SINR constraints.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from beamformer import BeamformerBank
from scenario import ScenarioConfig
from array_model import scene_responses

logger = logging.getLogger(__name__)

# Fixed ordering of the constraint family.
KIND_NORM_UPPER = 'norm_upper'
KIND_NORM_LOWER = 'norm_lower'
KIND_SIMILARITY = 'similarity'
KIND_PAPR = 'papr'
KIND_SINR = 'sinr'


def constraint_kinds(n_complex: int, n_targets: int) -> List[str]:
    """Constraint family of every row, canonical order."""
    return ([KIND_NORM_UPPER, KIND_NORM_LOWER, KIND_SIMILARITY]
            + [KIND_PAPR] * n_complex + [KIND_SINR] * n_targets)


def phi_vec(x: np.ndarray) -> np.ndarray:
    """[Re(x); Im(x)]."""
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag]).astype(float)


def phi_mat(A: np.ndarray) -> np.ndarray:
    """[[Re A, -Im A], [Im A, Re A]]."""
    A = np.asarray(A)
    return np.block([[A.real, -A.imag], [A.imag, A.real]]).astype(float)


@dataclass(frozen=True)
class SinrConstraintData:
    """S_{1,q}, S_{2,q} (waveform-domain SINR matrices for a fixed combiner) and ||u_q||^2."""

    s1: np.ndarray
    s2: np.ndarray
    u_norm_sq: float

    def quotient(self, x: np.ndarray, noise_power: float) -> float:
        """x^H S_1 x / (x^H S_2 x + noise ||u||^2)."""
        num = np.real(np.vdot(x, self.s1 @ x))
        den = np.real(np.vdot(x, self.s2 @ x)) + noise_power * self.u_norm_sq
        return float(num / den)


@dataclass(frozen=True)
class QuadraticConstraint:
    """One materialised constraint x_r^T P x_r + q^T x_r <= r."""

    P: np.ndarray
    q: np.ndarray
    r: float
    kind: str


def _adjoint_lift(matrix: np.ndarray, u: np.ndarray, L: int) -> np.ndarray:
    # (I_L kron Pi)^H u = vec(Pi^H U), U = unvec(u) with N_R rows
    U = u.reshape((matrix.shape[0], L), order='F')
    return (matrix.conj().T @ U).reshape(-1, order='F')


def sinr_constraint_data(u_q: np.ndarray, q: int, cfg: ScenarioConfig) -> SinrConstraintData:
    """
    Swap the roles of x and u: build S_{1,q} and S_{2,q} for a fixed combiner.

    Args:
        u_q: Combiner of target q, length N_R L
        q: Target index
        cfg: Scenario

    Returns:
        SinrConstraintData with x^H S_1 x = s_q |u^H (I kron Pi_q) x|^2
    """
    targets, interferers = scene_responses(cfg)
    L = cfg.n_samples
    w = _adjoint_lift(targets[q].matrix, u_q, L)
    s1 = cfg.target_powers[q] * np.outer(w, w.conj())
    s2 = np.zeros_like(s1)
    for other, resp in enumerate(targets):
        if other != q:
            w_other = _adjoint_lift(resp.matrix, u_q, L)
            s2 += cfg.target_powers[other] * np.outer(w_other, w_other.conj())
    for i, resp in enumerate(interferers):
        w_int = _adjoint_lift(resp.matrix, u_q, L)
        s2 += cfg.interferer_powers[i] * np.outer(w_int, w_int.conj())
    return SinrConstraintData(s1=s1, s2=s2, u_norm_sq=float(np.real(np.vdot(u_q, u_q))))


@dataclass(frozen=True)
class QcqpProblem:
    """
    Real QCQP min x^T P_0 x + q_0^T x s.t. x^T P_i x + q_i^T x <= r_i.

    The PAPR selector constraints are kept implicit (|x_p|^2 = x_p^2 + x_{p+n}^2);
    all other constraints are stored densely in canonical order
    [norm_upper, norm_lower, similarity, sinr_1..sinr_Q].
    """

    P0: np.ndarray
    q0: np.ndarray
    objective_constant: float
    dense_P: np.ndarray
    dense_q: np.ndarray
    dense_r: np.ndarray
    papr_rhs: float
    n_complex: int
    n_targets: int

    @property
    def n_real(self) -> int:
        return 2 * self.n_complex

    @property
    def m(self) -> int:
        return self.n_complex + self.n_targets + 3

    @property
    def dims(self) -> Tuple[int, int]:
        return self.n_real, self.m

    @property
    def kinds(self) -> List[str]:
        return constraint_kinds(self.n_complex, self.n_targets)

    def _dense_slots(self) -> np.ndarray:
        n = self.n_complex
        return np.concatenate([np.arange(3), np.arange(n + 3, n + 3 + self.n_targets)])

    @property
    def rhs(self) -> np.ndarray:
        r = np.full(self.m, self.papr_rhs)
        r[self._dense_slots()] = self.dense_r
        return r

    def quadratic_objective(self, x_r: np.ndarray) -> float:
        """x^T P_0 x + q_0^T x (no constant)."""
        return float(x_r @ (self.P0 @ x_r) + self.q0 @ x_r)

    def objective(self, x_r: np.ndarray) -> float:
        """||x - x_comm||^2 evaluated in the real domain."""
        return self.quadratic_objective(x_r) + self.objective_constant

    def objective_gradient(self, x_r: np.ndarray) -> np.ndarray:
        return 2.0 * (self.P0 @ x_r) + self.q0

    def constraint_values(self, x_r: np.ndarray) -> np.ndarray:
        """c_i(x) = x^T P_i x + q_i^T x for every constraint, canonical order."""
        n = self.n_complex
        values = np.empty(self.m)
        products = self.dense_P @ x_r
        values[self._dense_slots()] = products @ x_r + self.dense_q @ x_r
        values[3:n + 3] = x_r[:n] ** 2 + x_r[n:] ** 2
        return values

    def residuals(self, x_r: np.ndarray) -> np.ndarray:
        """c_i(x) - r_i; feasible iff all <= 0."""
        return self.constraint_values(x_r) - self.rhs

    @property
    def row_scales(self) -> np.ndarray:
        """Magnitude each residual is measured against: the per-sample cap for PAPR rows, 1 elsewhere."""
        scales = np.ones(self.m)
        scales[3:self.n_complex + 3] = min(1.0, self.papr_rhs)
        return scales

    def scaled_residuals(self, x_r: np.ndarray) -> np.ndarray:
        """Residuals divided by row_scales, so PAPR rows read as relative overshoot."""
        return self.residuals(x_r) / self.row_scales

    def weighted_constraint_gradient(self, x_r: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """sum_i w_i (2 P_i x + q_i)."""
        n = self.n_complex
        dense_w = weights[self._dense_slots()]
        combined = np.tensordot(dense_w, self.dense_P, axes=1)
        grad = 2.0 * (combined @ x_r) + dense_w @ self.dense_q
        papr_w = weights[3:n + 3]
        grad[:n] += 2.0 * papr_w * x_r[:n]
        grad[n:] += 2.0 * papr_w * x_r[n:]
        return grad

    @property
    def constraints(self) -> List[QuadraticConstraint]:
        """Materialise every (P_i, q_i, r_i) densely; debugging and oracles only."""
        n = self.n_complex
        result = []
        kinds = self.kinds
        slots = list(self._dense_slots())
        for i in range(self.m):
            if i in slots:
                k = slots.index(i)
                result.append(QuadraticConstraint(self.dense_P[k], self.dense_q[k], float(self.dense_r[k]), kinds[i]))
            else:
                p = i - 3
                P = np.zeros((2 * n, 2 * n))
                P[p, p] = 1.0
                P[p + n, p + n] = 1.0
                result.append(QuadraticConstraint(P, np.zeros(2 * n), self.papr_rhs, kinds[i]))
        return result


def assemble(x_comm: np.ndarray, x0: np.ndarray, beamformers: BeamformerBank,
             cfg: ScenarioConfig) -> QcqpProblem:
    """
    Assemble the QCQP for the current beamformers.

    Args:
        x_comm: Zero-forcing reference (vectorised, complex)
        x0: Reference chirp (vectorised, complex)
        beamformers: Current combiners, one per target
        cfg: Scenario

    Returns:
        QcqpProblem with m = N_T L + Q + 3 constraints
    """
    x_comm = np.asarray(x_comm, dtype=complex).ravel()
    x0 = np.asarray(x0, dtype=complex).ravel()
    n = cfg.n_vars
    if x_comm.size != n or x0.size != n:
        raise ValueError(f"dimension mismatch: expected waveforms of length {n}, "
                         f"got x_comm={x_comm.size}, x0={x0.size}")
    if beamformers.vectors.shape != (cfg.n_targets, cfg.n_rx * cfg.n_samples):
        raise ValueError(f"dimension mismatch: beamformer bank shape {beamformers.vectors.shape}, "
                         f"expected {(cfg.n_targets, cfg.n_rx * cfg.n_samples)}")

    identity = np.eye(2 * n)
    zeros = np.zeros(2 * n)
    dense_P = [identity, -identity, identity]
    dense_q = [zeros, zeros, -2.0 * phi_vec(x0)]
    # ||x - x0||^2 <= eps^2  <=>  ||x||^2 - 2 Re(x0^H x) <= eps^2 - ||x0||^2
    dense_r = [1.0, -1.0, cfg.epsilon ** 2 - float(np.vdot(x0, x0).real)]

    floors = cfg.sinr_floors_linear
    for q in range(cfg.n_targets):
        data = sinr_constraint_data(beamformers.for_target(q), q, cfg)
        dense_P.append(phi_mat(floors[q] * data.s2 - data.s1))
        dense_q.append(zeros)
        dense_r.append(-floors[q] * cfg.radar_noise_power * data.u_norm_sq)

    return QcqpProblem(
        P0=identity,
        q0=-2.0 * phi_vec(x_comm),
        objective_constant=float(np.vdot(x_comm, x_comm).real),
        dense_P=np.stack(dense_P),
        dense_q=np.stack(dense_q),
        dense_r=np.asarray(dense_r, dtype=float),
        papr_rhs=cfg.eta_linear / n,
        n_complex=n,
        n_targets=cfg.n_targets,
    )


def dump_problem(prob: QcqpProblem, out_dir: Union[str, Path]) -> Path:
    """
    Write the assembled problem for cross-implementation diffing.

    Layout: qcqp.npz holds P0 (2n x 2n), q0 (2n), P (m x 2n x 2n), q (m x 2n),
    r (m); constraints.csv lists index, kind, r, trace(P), ||q|| per constraint.

    Returns:
        Path of the npz file
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    constraints = prob.constraints
    npz_path = out_dir / 'qcqp.npz'
    np.savez_compressed(
        npz_path,
        P0=prob.P0, q0=prob.q0,
        P=np.stack([c.P for c in constraints]),
        q=np.stack([c.q for c in constraints]),
        r=np.array([c.r for c in constraints]),
    )
    with open(out_dir / 'constraints.csv', 'w', newline='') as handle:
        handle.write('# index: constraint position i (1-based); kind: constraint family; '
                     'r: right-hand side; trace_P: trace of P_i; q_norm: ||q_i||\n')
        writer = csv.writer(handle)
        writer.writerow(['index', 'kind', 'r', 'trace_P', 'q_norm'])
        for i, c in enumerate(constraints, 1):
            writer.writerow([i, c.kind, repr(c.r), repr(float(np.trace(c.P))), repr(float(np.linalg.norm(c.q)))])
    logger.info(f"Dumped QCQP with m={prob.m}, n_real={prob.n_real} to {out_dir}")
    return npz_path
