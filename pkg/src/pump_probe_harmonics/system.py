"""
System description and harmonic bookkeeping.

Levels and A-vector positions are 1-based at the public boundary, the way the
density-matrix equations are usually written down. Arrays are 0-based inside.
All quantities are in rad/s with hbar = 1, and stored Hamiltonian entries
already absorb the hbar/2 prefactor of the rotating-frame Hamiltonian.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import SpecValidationError, StructuralError


class HarmonicTag(Enum):
    """How a coupling enters the rotating-frame Hamiltonian."""

    STATIC = "static"  # pump: time independent, contributes to H0
    BEAT = "beat"  # probe: carries exp(+i delta t) at (i, j)


@dataclass(frozen=True)
class Coupling:
    """A drive of Rabi frequency ``rabi_frequency`` between two levels."""

    level_i: int
    level_j: int
    rabi_frequency: float
    tag: HarmonicTag = HarmonicTag.STATIC


@dataclass(frozen=True)
class SourceChannel:
    """Population influx ``rate * rho[from, from]`` into ``rho[to, to]``."""

    from_level: int
    to_level: int
    rate: float


@dataclass(frozen=True)
class SystemSpec:
    """Full physical description of an N-level pump-probe system.

    Args:
        n_levels: Number of levels N (at least 2).
        diagonal_terms: Per-level complex entries such as ``-2*Delta - 1j*Gamma``.
            The Hamiltonian diagonal is half of these.
        couplings: Pump (static) and probe (beat) couplings.
        source_channels: Population transfer feeding the diagonal.
        beat_frequency: Probe minus pump detuning difference, delta.
        excited_levels: Levels whose detunings move with the Doppler shift.
    """

    n_levels: int
    diagonal_terms: Tuple[complex, ...]
    couplings: Tuple[Coupling, ...] = ()
    source_channels: Tuple[SourceChannel, ...] = ()
    beat_frequency: float = 0.0
    excited_levels: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "diagonal_terms", tuple(complex(d) for d in self.diagonal_terms))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "source_channels", tuple(self.source_channels))
        object.__setattr__(self, "beat_frequency", float(self.beat_frequency))
        object.__setattr__(self, "excited_levels", tuple(int(e) for e in self.excited_levels))
        self.validate()

    def validate(self) -> None:
        """Check the structural and physical invariants of the spec."""
        n = self.n_levels
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise SpecValidationError(f"n_levels must be an integer >= 2, got {n!r}")
        if len(self.diagonal_terms) != n:
            raise StructuralError(
                f"diagonal_terms has {len(self.diagonal_terms)} entries for {n} levels"
            )
        for level, term in enumerate(self.diagonal_terms, start=1):
            if not (math.isfinite(term.real) and math.isfinite(term.imag)):
                raise SpecValidationError(f"diagonal term of level {level} is not finite: {term}")
            if term.imag > 0:
                raise SpecValidationError(
                    f"diagonal term of level {level} has positive imaginary part {term.imag:g} (gain)"
                )

        for index, coupling in enumerate(self.couplings, start=1):
            label = f"coupling #{index} ({coupling.level_i}, {coupling.level_j})"
            self._check_level(coupling.level_i, label)
            self._check_level(coupling.level_j, label)
            if coupling.level_i == coupling.level_j:
                raise SpecValidationError(f"{label} couples a level to itself")
            if not isinstance(coupling.tag, HarmonicTag):
                raise StructuralError(f"{label} has unknown harmonic tag {coupling.tag!r}")
            if not math.isfinite(coupling.rabi_frequency):
                raise SpecValidationError(f"{label} has non-finite Rabi frequency")

        for index, channel in enumerate(self.source_channels, start=1):
            label = f"source channel #{index} ({channel.from_level} -> {channel.to_level})"
            self._check_level(channel.from_level, label)
            self._check_level(channel.to_level, label)
            if channel.from_level == channel.to_level:
                raise SpecValidationError(f"{label} feeds a level into itself")
            if not math.isfinite(channel.rate) or channel.rate < 0:
                raise SpecValidationError(f"{label} has invalid rate {channel.rate!r}")

        if not math.isfinite(self.beat_frequency):
            raise SpecValidationError("beat_frequency is not finite")
        for level in self.excited_levels:
            self._check_level(level, "excited_levels")

    def _check_level(self, level: int, label: str) -> None:
        if not isinstance(level, (int, np.integer)) or not 1 <= level <= self.n_levels:
            raise StructuralError(f"{label}: level {level!r} outside 1..{self.n_levels}")

    def source_matrix(self) -> np.ndarray:
        """Real N x N matrix W with W[to, from] summing the channel rates (0-based)."""
        w = np.zeros((self.n_levels, self.n_levels))
        for channel in self.source_channels:
            w[channel.to_level - 1, channel.from_level - 1] += channel.rate
        return w

    def closure_defects(self) -> np.ndarray:
        """Per level, source outflow minus the population decay encoded on the diagonal."""
        outflow = self.source_matrix().sum(axis=0)
        decay = -np.array([d.imag for d in self.diagonal_terms])
        return outflow - decay

    def is_closed(self, rtol: float = 1e-9) -> bool:
        """True when every level's decay is fully returned by source channels."""
        scale = max(1.0, max(abs(d.imag) for d in self.diagonal_terms))
        return bool(np.all(np.abs(self.closure_defects()) <= rtol * scale))

    def with_beat_frequency(self, beat_frequency: float) -> "SystemSpec":
        return dataclasses.replace(self, beat_frequency=beat_frequency)

    def doppler_shifted(self, shift: float) -> "SystemSpec":
        """Shift the excited-level frame energies by ``-shift`` (shift = k·v)."""
        if shift == 0.0 or not self.excited_levels:
            return self
        terms = list(self.diagonal_terms)
        for level in self.excited_levels:
            terms[level - 1] = terms[level - 1] - 2.0 * shift
        return dataclasses.replace(self, diagonal_terms=tuple(terms))

    def scaled_couplings(self, factor: float, tag: Optional[HarmonicTag] = None) -> "SystemSpec":
        """Multiply Rabi frequencies by ``factor``, optionally only for one tag."""
        couplings = tuple(
            dataclasses.replace(c, rabi_frequency=c.rabi_frequency * factor)
            if tag is None or c.tag is tag
            else c
            for c in self.couplings
        )
        return dataclasses.replace(self, couplings=couplings)


@dataclass(frozen=True, eq=False)
class HamiltonianDecomposition:
    """H(t) = h0 + h_plus exp(i delta t) + h_minus exp(-i delta t)."""

    h0: np.ndarray
    h_plus: np.ndarray
    h_minus: np.ndarray

    def __post_init__(self) -> None:
        for name in ("h0", "h_plus", "h_minus"):
            matrix = np.array(getattr(self, name), dtype=complex)
            matrix.setflags(write=False)
            object.__setattr__(self, name, matrix)

    @property
    def n_levels(self) -> int:
        return self.h0.shape[0]

    def at(self, t: float, beat_frequency: float) -> np.ndarray:
        phase = np.exp(1j * beat_frequency * t)
        return self.h0 + self.h_plus * phase + self.h_minus * np.conj(phase)

    def norm_inf(self) -> float:
        """Upper bound of the infinity norm of H(t) over all t."""
        rows = np.abs(self.h0) + np.abs(self.h_plus) + np.abs(self.h_minus)
        return float(rows.sum(axis=1).max())


def build_hamiltonian(spec: SystemSpec) -> HamiltonianDecomposition:
    """Build the harmonic decomposition of the rotating-frame Hamiltonian."""
    n = spec.n_levels
    h0 = np.diag(np.asarray(spec.diagonal_terms, dtype=complex) / 2.0)
    h_plus = np.zeros((n, n), dtype=complex)

    for coupling in spec.couplings:
        i, j = coupling.level_i - 1, coupling.level_j - 1
        half = coupling.rabi_frequency / 2.0
        if coupling.tag is HarmonicTag.STATIC:
            h0[i, j] += half
            h0[j, i] += half
        else:
            h_plus[i, j] += half

    return HamiltonianDecomposition(h0=h0, h_plus=h_plus, h_minus=h_plus.conj().T)


def harmonic_slot(k: int) -> int:
    """Position of harmonic k inside a (2K+1) block: 0, +1, -1, +2, -2, ..."""
    if k == 0:
        return 0
    return 2 * k - 1 if k > 0 else -2 * k


def harmonic_from_slot(slot: int) -> int:
    if slot == 0:
        return 0
    return (slot + 1) // 2 if slot % 2 else -(slot // 2)


def harmonic_orders(order: int) -> Tuple[int, ...]:
    """All harmonics of order K in block order."""
    return tuple(harmonic_from_slot(s) for s in range(2 * order + 1))


@dataclass(frozen=True)
class HarmonicIndex:
    """Harmonic k of an expansion truncated at order K."""

    k: int
    order: int

    def __post_init__(self) -> None:
        if self.order < 0 or abs(self.k) > self.order:
            raise StructuralError(f"harmonic {self.k} outside -{self.order}..{self.order}")

    @property
    def slot(self) -> int:
        return harmonic_slot(self.k)


def vec_index(
    i: int, j: int, k: Union[int, HarmonicIndex], n_levels: int, order: int
) -> int:
    """1-based A-vector position of the unknown rho^k_{ij}."""
    k_value = k.k if isinstance(k, HarmonicIndex) else int(k)
    if not (1 <= i <= n_levels and 1 <= j <= n_levels):
        raise StructuralError(f"element ({i}, {j}) outside 1..{n_levels}")
    if abs(k_value) > order:
        raise StructuralError(f"harmonic {k_value} outside -{order}..{order}")
    block = 2 * order + 1
    return ((i - 1) * n_levels + (j - 1)) * block + harmonic_slot(k_value) + 1


def vec_unindex(position: int, n_levels: int, order: int) -> Tuple[int, int, int]:
    """Inverse of :func:`vec_index`, returning (i, j, k)."""
    block = 2 * order + 1
    if not 1 <= position <= block * n_levels * n_levels:
        raise StructuralError(
            f"position {position} outside 1..{block * n_levels * n_levels}"
        )
    pair, slot = divmod(position - 1, block)
    i, j = divmod(pair, n_levels)
    return i + 1, j + 1, harmonic_from_slot(slot)


@dataclass(frozen=True)
class SolveDiagnostics:
    """Quality metrics attached to a numerically solved set of harmonics."""

    residual: float
    condition: float
    size: int


@dataclass(frozen=True, eq=False)
class DensityHarmonics:
    """Harmonics rho^k, k = -K..K, stored as a (2K+1, N, N) array in block order."""

    order: int
    matrices: np.ndarray
    diagnostics: Optional[SolveDiagnostics] = field(default=None)

    def __post_init__(self) -> None:
        matrices = np.array(self.matrices, dtype=complex)
        if matrices.ndim != 3 or matrices.shape[0] != 2 * self.order + 1:
            raise StructuralError(
                f"expected {2 * self.order + 1} harmonic matrices, got shape {matrices.shape}"
            )
        if matrices.shape[1] != matrices.shape[2]:
            raise StructuralError(f"harmonic matrices are not square: {matrices.shape}")
        matrices.setflags(write=False)
        object.__setattr__(self, "matrices", matrices)

    @property
    def n_levels(self) -> int:
        return self.matrices.shape[1]

    def __getitem__(self, k: Union[int, HarmonicIndex]) -> np.ndarray:
        k_value = k.k if isinstance(k, HarmonicIndex) else int(k)
        if abs(k_value) > self.order:
            raise StructuralError(f"harmonic {k_value} outside -{self.order}..{self.order}")
        return self.matrices[harmonic_slot(k_value)]

    def __iter__(self) -> Iterator[int]:
        return iter(harmonic_orders(self.order))

    def element(self, i: int, j: int, k: int) -> complex:
        """1-based access to rho^k_{ij}."""
        return complex(self[k][i - 1, j - 1])

    @property
    def populations(self) -> np.ndarray:
        return self[0].diagonal().real.copy()

    def trace_error(self) -> float:
        errors = [abs(np.trace(self[0]) - 1.0)]
        errors.extend(abs(np.trace(self[k])) for k in self if k != 0)
        return float(max(errors))

    def hermiticity_error(self) -> float:
        return float(
            max(np.abs(self[-k] - self[k].conj().T).max() for k in self)
        )


def flatten(rho: DensityHarmonics) -> np.ndarray:
    """A vector of length (2K+1)N^2 in :func:`vec_index` order."""
    return rho.matrices.transpose(1, 2, 0).reshape(-1).copy()


def unflatten(
    a_vector: Sequence[complex], n_levels: int, order: int,
    diagnostics: Optional[SolveDiagnostics] = None,
) -> DensityHarmonics:
    a = np.asarray(a_vector, dtype=complex)
    expected = (2 * order + 1) * n_levels * n_levels
    if a.shape != (expected,):
        raise StructuralError(f"A vector has shape {a.shape}, expected ({expected},)")
    matrices = a.reshape(n_levels, n_levels, 2 * order + 1).transpose(2, 0, 1)
    return DensityHarmonics(order=order, matrices=matrices, diagnostics=diagnostics)


@dataclass(frozen=True)
class CoherencePair:
    """A probe-driven coherence rho_{row, col} and its weight in the susceptibility."""

    row: int
    col: int
    weight: float = 1.0
