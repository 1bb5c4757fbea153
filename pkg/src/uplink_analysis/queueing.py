"""Discrete-time Geo/PH/1 device buffer solved as a quasi-birth-death chain."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NumericalError

LOG = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
BALANCE_TOL = 1e-8


@dataclass(frozen=True)
class PhService:
    """Round-robin service: one attempt every ``N_d`` slots, success w.p. ``S_p``."""

    beta: np.ndarray
    S: np.ndarray
    s: np.ndarray
    S_p: float

    @property
    def order(self) -> int:
        return self.S.shape[0]

    def mean(self) -> float:
        size = self.order
        return float(self.beta @ linalg.solve(np.eye(size) - self.S, np.ones(size)))


def build_ph_service(N_d: int, S_p: float) -> PhService:
    if N_d < 1:
        raise ValueError("N_d must be >= 1")
    if not 0.0 <= S_p <= 1.0:
        raise ValueError("S_p must be in [0, 1]")
    beta = np.zeros(N_d)
    beta[0] = 1.0
    S = np.eye(N_d, k=1)
    S[-1, 0] += 1.0 - S_p
    s = np.zeros(N_d)
    s[-1] = S_p
    return PhService(beta=beta, S=S, s=s, S_p=S_p)


@dataclass(frozen=True)
class QbdBlocks:
    alpha: float
    service: PhService
    B: float
    C: np.ndarray
    E: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray


def build_qbd_blocks(service: PhService, alpha: float) -> QbdBlocks:
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    beta, S, s = service.beta, service.S, service.s
    s_beta = np.outer(s, beta)
    return QbdBlocks(
        alpha=alpha,
        service=service,
        B=1.0 - alpha,
        C=alpha * beta,
        E=(1.0 - alpha) * s,
        A0=alpha * S,
        A1=alpha * s_beta + (1.0 - alpha) * S,
        A2=(1.0 - alpha) * s_beta,
    )


def is_stable(alpha: float, N_d: int, S_p: float) -> bool:
    """True when packets leave faster than they arrive."""
    return alpha < S_p / N_d


def _residual(R: np.ndarray, blocks: QbdBlocks) -> float:
    return float(np.max(np.abs(R - (blocks.A0 + R @ blocks.A1 + R @ R @ blocks.A2))))


def rate_matrix(blocks: QbdBlocks) -> np.ndarray:
    """Minimal solution of R = A0 + R A1 + R^2 A2 for the rank-one A2 of this chain."""
    service = blocks.service
    if not is_stable(blocks.alpha, service.order, service.S_p):
        raise ValueError("rate matrix requested for an unstable queue")
    size = service.order
    inner = np.eye(size) - blocks.A1 - blocks.alpha * np.outer(service.S @ np.ones(size), service.beta)
    try:
        # R inner = A0  <=>  inner^T R^T = A0^T
        R = linalg.solve(inner.T, blocks.A0.T).T
    except linalg.LinAlgError as exc:
        raise NumericalError(f"rate matrix inner system is singular: {exc}") from exc
    residual = _residual(R, blocks)
    LOG.debug("Rate matrix residual %.3g (N_d=%d)", residual, size)
    if not residual < RESIDUAL_TOL:
        raise NumericalError("rate matrix fails the quadratic residual check", estimated_error=residual)
    return R


def iterate_rate_matrix(blocks: QbdBlocks, tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Successive substitution from R = 0; slow but independent of the closed form."""
    R = np.zeros_like(blocks.A0)
    for _ in range(max_iter):
        nxt = blocks.A0 + R @ blocks.A1 + R @ R @ blocks.A2
        if np.max(np.abs(nxt - R)) < tol:
            return nxt
        R = nxt
    raise NumericalError("rate matrix iteration did not converge", estimated_error=float(np.max(np.abs(nxt - R))))


@dataclass(frozen=True)
class SteadyState:
    pi0: float
    pi1: np.ndarray
    R: np.ndarray
    blocks: QbdBlocks

    def level(self, q: int) -> np.ndarray:
        if q < 1:
            raise ValueError("q must be >= 1")
        return self.pi1 @ np.linalg.matrix_power(self.R, q - 1)

    def total_mass(self) -> float:
        size = self.R.shape[0]
        return self.pi0 + float(self.pi1 @ linalg.solve(np.eye(size) - self.R, np.ones(size)))


def balance_residual(ss: SteadyState, floor: float = 1e-12, max_levels: int = 50_000) -> float:
    """Largest violation of pi P = pi on the chain truncated where levels fall below ``floor``."""
    b = ss.blocks
    levels = [ss.pi1]
    while np.sum(levels[-1]) >= floor and len(levels) < max_levels:
        levels.append(levels[-1] @ ss.R)
    if len(levels) == max_levels:
        LOG.debug("Balance check truncated at %d levels", max_levels)
    levels.append(levels[-1] @ ss.R)
    worst = abs(ss.pi0 * b.B + float(levels[0] @ b.E) - ss.pi0)
    first = ss.pi0 * b.C + levels[0] @ b.A1 + levels[1] @ b.A2 - levels[0]
    worst = max(worst, float(np.max(np.abs(first))))
    for q in range(1, len(levels) - 1):
        row = levels[q - 1] @ b.A0 + levels[q] @ b.A1 + levels[q + 1] @ b.A2 - levels[q]
        worst = max(worst, float(np.max(np.abs(row))))
    return worst


def steady_state(blocks: QbdBlocks, R: np.ndarray, verify: bool = True) -> SteadyState:
    service = blocks.service
    if not is_stable(blocks.alpha, service.order, service.S_p):
        raise ValueError("steady state requested for an unstable queue")
    size = service.order
    eye = np.eye(size)
    try:
        M = linalg.inv(eye - blocks.A1 - R @ blocks.A2)
        tail = linalg.solve(eye - R, np.ones(size))
    except linalg.LinAlgError as exc:
        raise NumericalError(f"boundary system is singular: {exc}") from exc
    entry = blocks.alpha * service.beta @ M
    pi0 = 1.0 / (1.0 + float(entry @ tail))
    ss = SteadyState(pi0=pi0, pi1=pi0 * entry, R=R, blocks=blocks)
    if verify:
        mass = ss.total_mass()
        if abs(mass - 1.0) > RESIDUAL_TOL:
            raise NumericalError("steady state does not normalize", estimated_error=abs(mass - 1.0))
        residual = balance_residual(ss)
        if residual > BALANCE_TOL:
            raise NumericalError("steady state fails global balance", estimated_error=residual)
    return ss


def mean_queue_and_delay(ss: SteadyState, alpha: float) -> tuple[float, float]:
    """Mean packets in the buffer and mean sojourn in slots (Little's law)."""
    size = ss.R.shape[0]
    eye = np.eye(size)
    once = linalg.solve(eye - ss.R, np.ones(size))
    q_len = float(ss.pi1 @ linalg.solve(eye - ss.R, once))
    return q_len, q_len / alpha


@dataclass(slots=True)
class QueueMetrics:
    N_d: int
    alpha: float
    S_p: float
    stable: bool
    Q_L: float
    Q_W: float
    pi0: float


def solve_queue(N_d: int, alpha: float, S_p: float, verify: bool = True) -> QueueMetrics:
    """Mean queue length and delay, or an ``unstable`` record with infinite means."""
    if not math.isfinite(alpha) or alpha <= 0:
        raise ValueError("alpha must be > 0")
    if alpha >= 1:
        raise ValueError("alpha must be < 1")
    if not is_stable(alpha, N_d, S_p):
        LOG.debug("Unstable queue: alpha=%.4g N_d=%d S_p=%.4g", alpha, N_d, S_p)
        return QueueMetrics(N_d, alpha, S_p, False, math.inf, math.inf, 0.0)
    blocks = build_qbd_blocks(build_ph_service(N_d, S_p), alpha)
    ss = steady_state(blocks, rate_matrix(blocks), verify=verify)
    q_len, q_wait = mean_queue_and_delay(ss, alpha)
    return QueueMetrics(N_d, alpha, S_p, True, q_len, q_wait, ss.pi0)
