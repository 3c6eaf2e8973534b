"""
Numerical construction and solution of the harmonic-balance system M A = B.

Each column of M is obtained by probing the pseudo-commutator with a unit
density matrix, so the assembly works for any number of levels and any
truncation order without symbolic algebra.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, get_lapack_funcs, lu_factor, lu_solve

from .config import settings
from .errors import SingularSystemError, StructuralError
from .system import (
    DensityHarmonics,
    HamiltonianDecomposition,
    SolveDiagnostics,
    SystemSpec,
    build_hamiltonian,
    harmonic_orders,
    harmonic_slot,
    unflatten,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """The full (2K+1)N^2 square system; ``b`` is the null vector for closed specs."""

    m: np.ndarray
    b: np.ndarray
    n_levels: int
    order: int

    @property
    def block(self) -> int:
        return 2 * self.order + 1

    @property
    def size(self) -> int:
        return self.m.shape[0]


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """M' A' = B' after the trace constraints replace the (N, N, k) unknowns."""

    m_prime: np.ndarray
    b_prime: np.ndarray
    n_levels: int
    order: int

    @property
    def size(self) -> int:
        return self.m_prime.shape[0]


def probe_matrices(
    hamiltonian: HamiltonianDecomposition, i: int, j: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pseudo-commutator of each Hamiltonian harmonic with the (i, j) unit matrix.

    Returns:
        (Q0, Q+, Q-) where Q0 = H0 L - L H0^dagger and Q+- = H+- L - L H+-.
    """
    n = hamiltonian.n_levels
    if not (1 <= i <= n and 1 <= j <= n):
        raise StructuralError(f"probe element ({i}, {j}) outside 1..{n}")
    unit = np.zeros((n, n), dtype=complex)
    unit[i - 1, j - 1] = 1.0

    q0 = hamiltonian.h0 @ unit - unit @ hamiltonian.h0.conj().T
    q_plus = hamiltonian.h_plus @ unit - unit @ hamiltonian.h_plus
    q_minus = hamiltonian.h_minus @ unit - unit @ hamiltonian.h_minus
    return q0, q_plus, q_minus


def assemble_m(spec: SystemSpec, order: int) -> LinearSystem:
    """Assemble M column by column; column v holds the equations for A = e_v."""
    if order < 1:
        raise StructuralError(f"harmonic order must be >= 1, got {order}")

    hamiltonian = build_hamiltonian(spec)
    n = spec.n_levels
    block = 2 * order + 1
    size = block * n * n
    m = np.zeros((size, size), dtype=complex)

    # Row offsets of every (x, y) block, row-major like the A vector
    row_base = np.arange(n * n) * block
    sources = spec.source_matrix()
    delta = spec.beat_frequency

    for i in range(n):
        for j in range(n):
            q0, q_plus, q_minus = probe_matrices(hamiltonian, i + 1, j + 1)
            q0 = -1j * q0.ravel()
            q_plus = -1j * q_plus.ravel()
            q_minus = -1j * q_minus.ravel()
            targets = np.flatnonzero(sources[:, i]) if i == j else ()

            for k in harmonic_orders(order):
                col = (i * n + j) * block + harmonic_slot(k)
                m[row_base + harmonic_slot(k), col] += q0
                # rho^k feeds harmonic k+1 through H+ and k-1 through H-
                if k + 1 <= order:
                    m[row_base + harmonic_slot(k + 1), col] += q_plus
                if k - 1 >= -order:
                    m[row_base + harmonic_slot(k - 1), col] += q_minus
                m[col, col] -= 1j * k * delta
                for to in targets:
                    m[(to * n + to) * block + harmonic_slot(k), col] += sources[to, i]

    logger.debug("assembled M of size %d for N=%d, K=%d", size, n, order)
    return LinearSystem(m=m, b=np.zeros(size, dtype=complex), n_levels=n, order=order)


def reduce(system: LinearSystem) -> ReducedSystem:
    """Eliminate the (N, N, k) unknowns with the closed-system trace constraints."""
    n, block = system.n_levels, system.block
    keep = system.size - block
    last = (n * n - 1) * block  # first column of the (N, N) block

    m_prime = system.m[:keep, :keep].copy()
    last_columns = system.m[:keep, last:last + block]
    for i in range(n - 1):
        base = (i * n + i) * block
        m_prime[:, base:base + block] -= last_columns

    b_prime = system.b[:keep] - system.m[:keep, last]
    return ReducedSystem(m_prime=m_prime, b_prime=b_prime, n_levels=n, order=system.order)


def _factorize(m_prime: np.ndarray) -> Tuple[Tuple[np.ndarray, np.ndarray], float]:
    """LU factors of M' and the LAPACK 1-norm condition estimate."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(m_prime)
    anorm = np.linalg.norm(m_prime, 1)
    if anorm == 0.0 or not np.all(np.isfinite(lu)):
        return (lu, piv), float("inf")
    gecon = get_lapack_funcs("gecon", (lu,))
    rcond, _ = gecon(lu, anorm, norm="1")
    condition = float("inf") if rcond <= 0 or not np.isfinite(rcond) else 1.0 / rcond
    return (lu, piv), condition


def _reconstruct(a_prime: np.ndarray, n: int, order: int) -> np.ndarray:
    """Append the (N, N, k) unknowns from the trace constraints."""
    block = 2 * order + 1
    a = np.concatenate([a_prime, np.zeros(block, dtype=complex)])
    diagonal = np.array([(i * n + i) * block for i in range(n - 1)])
    last = (n * n - 1) * block
    for slot in range(block):
        a[last + slot] = (1.0 if slot == 0 else 0.0) - a[diagonal + slot].sum()
    return a


def solve_linear_system(
    system: LinearSystem, *, condition_threshold: Optional[float] = None
) -> DensityHarmonics:
    """Reduce, factorize and solve an assembled system, whichever builder produced it.

    Raises:
        SingularSystemError: if the condition estimate of M' exceeds the threshold.
    """
    threshold = settings.condition_threshold if condition_threshold is None else condition_threshold
    reduced = reduce(system)
    factors, condition = _factorize(reduced.m_prime)
    logger.debug("reduced system %d x %d, condition %.3e", reduced.size, reduced.size, condition)
    if not condition <= threshold:
        raise SingularSystemError(
            f"reduced system is singular or ill-conditioned: condition {condition:.3e} "
            f"exceeds {threshold:.1e} (missing source channels make the system open)",
            condition=condition,
            threshold=threshold,
        )

    a_prime = lu_solve(factors, reduced.b_prime)
    a = _reconstruct(a_prime, system.n_levels, system.order)
    scale = np.linalg.norm(system.m, np.inf) * np.linalg.norm(a, np.inf)
    residual = float(np.linalg.norm(system.m @ a, np.inf) / scale) if scale > 0 else 0.0

    diagnostics = SolveDiagnostics(residual=residual, condition=condition, size=reduced.size)
    return unflatten(a, system.n_levels, system.order, diagnostics=diagnostics)


def solve(
    spec: SystemSpec, order: int, *, condition_threshold: Optional[float] = None
) -> DensityHarmonics:
    """Pseudo-steady-state harmonics of ``spec`` truncated at ``order``."""
    if not spec.is_closed():
        logger.warning(
            "spec is not closed (closure defects %s); the trace reduction assumes it is",
            np.array2string(spec.closure_defects(), precision=3),
        )
    return solve_linear_system(assemble_m(spec, order), condition_threshold=condition_threshold)
