#!/usr/bin/env python3
"""
Ready-made system builders and sweepable model presets.

The builder functions return a single SystemSpec. The preset classes wrap a
builder together with everything a detuning sweep needs: how the swept
detuning maps onto the beat frequency, which coherences the probe drives and
the probe Rabi frequency that normalizes the susceptibility.
"""

import math
from abc import ABC, abstractmethod
from typing import ClassVar, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, InstanceOf, PrivateAttr

from .dipole_table import DipoleTable, Sublevel
from .errors import StructuralError
from .system import (
    CoherencePair,
    Coupling,
    HarmonicTag,
    SourceChannel,
    SystemSpec,
)

TWO_PI = 2.0 * math.pi

# Rb-87 D1 constants
RB87_D1_GAMMA = TWO_PI * 5.746e6
RB87_GROUND_HYPERFINE = TWO_PI * 6.834682611e9
RB87_EXCITED_HYPERFINE = TWO_PI * 814.5e6
RB87_GROUND_RELAXATION = TWO_PI * 1e6

RB87_D1_SUBLEVELS: Tuple[Sublevel, ...] = (
    tuple(Sublevel("g", 1, m) for m in (-1, 0, 1))
    + tuple(Sublevel("g", 2, m) for m in (-2, -1, 0, 1, 2))
    + tuple(Sublevel("e", 1, m) for m in (-1, 0, 1))
    + tuple(Sublevel("e", 2, m) for m in (-2, -1, 0, 1, 2))
)


def two_level(
    gamma: float,
    gamma_op: float,
    pump_rabi: float,
    probe_rabi: float,
    pump_detuning: float,
    beat_frequency: float,
) -> SystemSpec:
    """Two-level atom with optical pumping, pump and probe on the same transition."""
    return SystemSpec(
        n_levels=2,
        diagonal_terms=(-1j * gamma_op, -2.0 * pump_detuning - 1j * gamma),
        couplings=(
            Coupling(1, 2, pump_rabi, HarmonicTag.STATIC),
            Coupling(1, 2, probe_rabi, HarmonicTag.BEAT),
        ),
        source_channels=(SourceChannel(2, 1, gamma), SourceChannel(1, 2, gamma_op)),
        beat_frequency=beat_frequency,
        excited_levels=(2,),
    )


def lambda_three_level(
    gamma: float,
    gamma_g: float,
    pump_rabi: float,
    probe_rabi: float,
    hyperfine_splitting: float,
    pump_detuning: float,
    beat_frequency: float,
) -> SystemSpec:
    """Lambda system: the pump drives 1-3 and 2-3, the probe drives 2-3.

    ``pump_detuning`` is measured on the 2-3 transition; on 1-3 the pump sees
    ``pump_detuning - hyperfine_splitting``.
    """
    return SystemSpec(
        n_levels=3,
        diagonal_terms=(
            -2.0 * hyperfine_splitting - 1j * gamma_g,
            -1j * gamma_g,
            -2.0 * pump_detuning - 1j * gamma,
        ),
        couplings=(
            Coupling(1, 3, pump_rabi, HarmonicTag.STATIC),
            Coupling(2, 3, pump_rabi, HarmonicTag.STATIC),
            Coupling(2, 3, probe_rabi, HarmonicTag.BEAT),
        ),
        source_channels=(
            SourceChannel(2, 1, gamma_g),
            SourceChannel(1, 2, gamma_g),
            SourceChannel(3, 1, gamma / 2),
            SourceChannel(3, 2, gamma / 2),
        ),
        beat_frequency=beat_frequency,
        excited_levels=(3,),
    )


def four_level(
    gamma: float,
    gamma_g: float,
    pump_rabi: float,
    probe_rabi: float,
    hyperfine_splitting: float,
    excited_splitting: float,
    pump_detuning: float,
    beat_frequency: float,
) -> SystemSpec:
    """Lambda system with a second excited level ``excited_splitting`` above level 3."""
    return SystemSpec(
        n_levels=4,
        diagonal_terms=(
            -2.0 * hyperfine_splitting - 1j * gamma_g,
            -1j * gamma_g,
            -2.0 * pump_detuning - 1j * gamma,
            -2.0 * pump_detuning + 2.0 * excited_splitting - 1j * gamma,
        ),
        couplings=(
            Coupling(1, 3, pump_rabi, HarmonicTag.STATIC),
            Coupling(1, 4, pump_rabi, HarmonicTag.STATIC),
            Coupling(2, 3, pump_rabi, HarmonicTag.STATIC),
            Coupling(2, 4, pump_rabi, HarmonicTag.STATIC),
            Coupling(2, 3, probe_rabi, HarmonicTag.BEAT),
            Coupling(2, 4, probe_rabi, HarmonicTag.BEAT),
        ),
        source_channels=(
            SourceChannel(2, 1, gamma_g),
            SourceChannel(1, 2, gamma_g),
            SourceChannel(3, 1, gamma / 2),
            SourceChannel(3, 2, gamma / 2),
            SourceChannel(4, 1, gamma / 2),
            SourceChannel(4, 2, gamma / 2),
        ),
        beat_frequency=beat_frequency,
        excited_levels=(3, 4),
    )


def rb87_level_index(sublevel: Sublevel) -> int:
    """1-based position of a sublevel in the 16-level Rb-87 D1 model."""
    return RB87_D1_SUBLEVELS.index(sublevel) + 1


def _rb87_probe_transitions(table: DipoleTable, probe_polarization: Tuple[float, float]):
    """(ground, excited, signed weight) for every probe-driven F=2 sigma transition."""
    for entry in table:
        if entry.ground.f != 2 or abs(entry.polarization) != 1 or entry.element == 0:
            continue
        sign = probe_polarization[0] if entry.polarization > 0 else probe_polarization[1]
        if sign:
            yield entry.ground, entry.excited, sign * entry.element


def rb87_d1_sixteen_level(
    pump_detuning: float,
    pump_rabi_scale: float,
    probe_rabi_scale: float,
    dipole_table: Optional[DipoleTable] = None,
    *,
    two_photon_detuning: float = 0.0,
    gamma: float = RB87_D1_GAMMA,
    ground_relaxation: float = RB87_GROUND_RELAXATION,
    relaxation_topology: str = "all",
    ground_hyperfine: float = RB87_GROUND_HYPERFINE,
    excited_hyperfine: float = RB87_EXCITED_HYPERFINE,
    pump_polarization: Tuple[float, float] = (-1.0, 1.0),
    probe_polarization: Tuple[float, float] = (1.0, 1.0),
) -> SystemSpec:
    """16-level Rb-87 D1 model for self-pumped Raman gain.

    Levels 1-3 are 5S1/2 F=1, 4-8 F=2, 9-11 are 5P1/2 F'=1 and 12-16 F'=2.
    The pump is ``pump_detuning`` above the F=2 -> F'=2 resonance and drives
    every sigma transition from both ground manifolds. The probe drives the
    F=2 sigma transitions, and ``two_photon_detuning`` = 0 puts it exactly one
    ground hyperfine splitting below the pump. Rabi frequencies are the
    relative dipole elements times ``scale * gamma``. Polarizations give the
    (sigma+, sigma-) weights; the default cross-linear pair is x for the pump
    and y for the probe.

    Args:
        relaxation_topology: ``"all"`` relaxes every F=1/F=2 sublevel pair at
            ``ground_relaxation``, ``"matched"`` only pairs with equal mF.
    """
    table = dipole_table or DipoleTable.bundled()
    ground = [s for s in RB87_D1_SUBLEVELS if s.manifold == "g"]
    excited = [s for s in RB87_D1_SUBLEVELS if s.manifold == "e"]
    table.validate(ground, excited)
    if relaxation_topology not in ("all", "matched"):
        raise StructuralError(f"unknown relaxation topology {relaxation_topology!r}")

    couplings: List[Coupling] = []
    pump_scale = pump_rabi_scale * gamma
    for entry in table:
        if abs(entry.polarization) != 1 or entry.element == 0:
            continue
        sign = pump_polarization[0] if entry.polarization > 0 else pump_polarization[1]
        rabi = pump_scale * sign * entry.element
        if rabi:
            couplings.append(
                Coupling(rb87_level_index(entry.ground), rb87_level_index(entry.excited), rabi)
            )
    probe_scale = probe_rabi_scale * gamma
    for g, e, weight in _rb87_probe_transitions(table, probe_polarization):
        if probe_scale:
            couplings.append(
                Coupling(rb87_level_index(g), rb87_level_index(e), probe_scale * weight, HarmonicTag.BEAT)
            )

    sources: List[SourceChannel] = []
    for e in excited:
        for g, ratio in table.normalized_branching(e).items():
            sources.append(SourceChannel(rb87_level_index(e), rb87_level_index(g), gamma * ratio))

    ground_decay = {s: 0.0 for s in ground}
    for g1 in (s for s in ground if s.f == 1):
        for g2 in (s for s in ground if s.f == 2):
            if relaxation_topology == "matched" and g1.m != g2.m:
                continue
            for a, b in ((g1, g2), (g2, g1)):
                sources.append(SourceChannel(rb87_level_index(a), rb87_level_index(b), ground_relaxation))
                ground_decay[a] += ground_relaxation

    # Frame energies relative to F=2, excited states rotating with the pump
    diagonal: List[complex] = []
    for s in RB87_D1_SUBLEVELS:
        if s.manifold == "g":
            energy = -ground_hyperfine if s.f == 1 else 0.0
            diagonal.append(2.0 * energy - 1j * ground_decay[s])
        else:
            energy = -pump_detuning - (excited_hyperfine if s.f == 1 else 0.0)
            diagonal.append(2.0 * energy - 1j * gamma)

    return SystemSpec(
        n_levels=len(RB87_D1_SUBLEVELS),
        diagonal_terms=tuple(diagonal),
        couplings=tuple(couplings),
        source_channels=tuple(sources),
        beat_frequency=-ground_hyperfine + two_photon_detuning,
        excited_levels=tuple(rb87_level_index(e) for e in excited),
    )


class ModelPreset(BaseModel, ABC):
    """
    Abstract base class for sweepable models.

    A preset maps the swept detuning (rad/s) onto a SystemSpec and describes
    how the probe susceptibility is read from the solution. All frequencies
    are stored in rad/s.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    preset: ClassVar[str]
    sweep_label: ClassVar[str] = "probe detuning"

    @abstractmethod
    def build(self, detuning: float) -> SystemSpec:
        """
        Build the system at one point of the sweep.

        Args:
            detuning: Swept detuning in rad/s

        Returns:
            The SystemSpec with the matching beat frequency
        """

    @abstractmethod
    def coherence_pairs(self) -> List[CoherencePair]:
        """Probe-driven coherences (excited row, ground column) with their weights."""

    @abstractmethod
    def pump_coherence_pairs(self) -> List[CoherencePair]:
        """Pump-driven coherences, read from the zero-order harmonic."""

    @property
    @abstractmethod
    def probe_rabi_frequency(self) -> float:
        """Probe Rabi frequency normalizing the susceptibility (rad/s)."""

    @property
    @abstractmethod
    def pump_rabi_frequency(self) -> float:
        """Pump Rabi frequency normalizing the pump susceptibility (rad/s)."""

    @property
    @abstractmethod
    def linewidth(self) -> float:
        """Natural linewidth entering the susceptibility prefactor (rad/s)."""


class TwoLevelModel(ModelPreset):
    preset: ClassVar[str] = "two_level"

    gamma: float = Field(gt=0)
    gamma_op: float = Field(default=0.0, ge=0)
    pump_rabi: float
    probe_rabi: float
    pump_detuning: float = 0.0

    def build(self, detuning: float) -> SystemSpec:
        return two_level(
            self.gamma, self.gamma_op, self.pump_rabi, self.probe_rabi,
            self.pump_detuning, detuning - self.pump_detuning,
        )

    def coherence_pairs(self) -> List[CoherencePair]:
        return [CoherencePair(2, 1)]

    def pump_coherence_pairs(self) -> List[CoherencePair]:
        return [CoherencePair(2, 1)]

    @property
    def probe_rabi_frequency(self) -> float:
        return self.probe_rabi

    @property
    def pump_rabi_frequency(self) -> float:
        return self.pump_rabi

    @property
    def linewidth(self) -> float:
        return self.gamma


class LambdaModel(ModelPreset):
    preset: ClassVar[str] = "lambda_three_level"

    gamma: float = Field(gt=0)
    gamma_g: float = Field(default=0.0, ge=0)
    pump_rabi: float
    probe_rabi: float
    hyperfine_splitting: float
    pump_detuning: float = 0.0

    def build(self, detuning: float) -> SystemSpec:
        return lambda_three_level(
            self.gamma, self.gamma_g, self.pump_rabi, self.probe_rabi,
            self.hyperfine_splitting, self.pump_detuning, detuning - self.pump_detuning,
        )

    def coherence_pairs(self) -> List[CoherencePair]:
        return [CoherencePair(3, 2)]

    def pump_coherence_pairs(self) -> List[CoherencePair]:
        return [CoherencePair(3, 2)]

    @property
    def probe_rabi_frequency(self) -> float:
        return self.probe_rabi

    @property
    def pump_rabi_frequency(self) -> float:
        return self.pump_rabi

    @property
    def linewidth(self) -> float:
        return self.gamma


class FourLevelModel(LambdaModel):
    preset: ClassVar[str] = "four_level"

    excited_splitting: float

    def build(self, detuning: float) -> SystemSpec:
        return four_level(
            self.gamma, self.gamma_g, self.pump_rabi, self.probe_rabi,
            self.hyperfine_splitting, self.excited_splitting,
            self.pump_detuning, detuning - self.pump_detuning,
        )

    def coherence_pairs(self) -> List[CoherencePair]:
        return [CoherencePair(3, 2), CoherencePair(4, 2)]

    def pump_coherence_pairs(self) -> List[CoherencePair]:
        return [CoherencePair(3, 2), CoherencePair(4, 2)]


class Rb87D1Model(ModelPreset):
    """16-level model swept in two-photon detuning."""

    preset: ClassVar[str] = "rb87_d1"
    sweep_label: ClassVar[str] = "two-photon detuning"

    pump_detuning: float
    pump_rabi_scale: float = Field(ge=0)
    probe_rabi_scale: float = Field(gt=0)
    gamma: float = Field(default=RB87_D1_GAMMA, gt=0)
    ground_relaxation: float = Field(default=RB87_GROUND_RELAXATION, ge=0)
    relaxation_topology: Literal["all", "matched"] = "all"
    ground_hyperfine: float = RB87_GROUND_HYPERFINE
    excited_hyperfine: float = RB87_EXCITED_HYPERFINE
    pump_polarization: Tuple[float, float] = (-1.0, 1.0)
    probe_polarization: Tuple[float, float] = (1.0, 1.0)
    dipole_table_path: Optional[str] = None

    _dipole_table: Optional[DipoleTable] = PrivateAttr(default=None)

    def _table(self) -> DipoleTable:
        # Read once per model; every sweep point shares the same table.
        if self._dipole_table is None:
            if self.dipole_table_path:
                self._dipole_table = DipoleTable.from_file(self.dipole_table_path)
            else:
                self._dipole_table = DipoleTable.bundled()
        return self._dipole_table

    def build(self, detuning: float) -> SystemSpec:
        return rb87_d1_sixteen_level(
            self.pump_detuning, self.pump_rabi_scale, self.probe_rabi_scale, self._table(),
            two_photon_detuning=detuning,
            gamma=self.gamma,
            ground_relaxation=self.ground_relaxation,
            relaxation_topology=self.relaxation_topology,
            ground_hyperfine=self.ground_hyperfine,
            excited_hyperfine=self.excited_hyperfine,
            pump_polarization=self.pump_polarization,
            probe_polarization=self.probe_polarization,
        )

    def coherence_pairs(self) -> List[CoherencePair]:
        return [
            CoherencePair(rb87_level_index(e), rb87_level_index(g), weight)
            for g, e, weight in _rb87_probe_transitions(self._table(), self.probe_polarization)
        ]

    def pump_coherence_pairs(self) -> List[CoherencePair]:
        table = self._table()
        pairs = []
        for entry in table:
            if abs(entry.polarization) != 1 or entry.element == 0:
                continue
            sign = self.pump_polarization[0] if entry.polarization > 0 else self.pump_polarization[1]
            if sign:
                pairs.append(CoherencePair(
                    rb87_level_index(entry.excited), rb87_level_index(entry.ground), sign * entry.element
                ))
        return pairs

    @property
    def probe_rabi_frequency(self) -> float:
        return self.probe_rabi_scale * self.gamma

    @property
    def pump_rabi_frequency(self) -> float:
        return self.pump_rabi_scale * self.gamma

    @property
    def linewidth(self) -> float:
        return self.gamma


class ExplicitModel(ModelPreset):
    """A user-supplied SystemSpec swept directly in beat frequency."""

    preset: ClassVar[str] = "explicit"
    sweep_label: ClassVar[str] = "beat frequency"

    spec: InstanceOf[SystemSpec]
    probe_pairs: Tuple[CoherencePair, ...]
    pump_pairs: Tuple[CoherencePair, ...] = ()
    probe_rabi: float = Field(gt=0)
    pump_rabi: float = 0.0
    gamma: float = Field(gt=0)

    def build(self, detuning: float) -> SystemSpec:
        return self.spec.with_beat_frequency(detuning)

    def coherence_pairs(self) -> List[CoherencePair]:
        return list(self.probe_pairs)

    def pump_coherence_pairs(self) -> List[CoherencePair]:
        return list(self.pump_pairs)

    @property
    def probe_rabi_frequency(self) -> float:
        return self.probe_rabi

    @property
    def pump_rabi_frequency(self) -> float:
        return self.pump_rabi

    @property
    def linewidth(self) -> float:
        return self.gamma


PRESETS = {cls.preset: cls for cls in (TwoLevelModel, LambdaModel, FourLevelModel, Rb87D1Model)}


def default_coherence_pairs(spec: SystemSpec, tag: HarmonicTag = HarmonicTag.BEAT) -> List[CoherencePair]:
    """One unit-weight pair (j, i) per coupling (i, j) with the given tag."""
    seen: List[CoherencePair] = []
    for coupling in spec.couplings:
        if coupling.tag is tag:
            pair = CoherencePair(coupling.level_j, coupling.level_i)
            if pair not in seen:
                seen.append(pair)
    return seen
