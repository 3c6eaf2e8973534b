"""
Relative dipole matrix elements for hyperfine Zeeman transitions.

The table is data, not derived: each row gives the signed relative element
and the branching ratio of one ground/excited sublevel pair. See
docs/DIPOLE_TABLE_FORMAT.md for the file format.
"""

import csv
import io
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from .errors import DipoleTableError

BUNDLED_RB87_D1 = "rb87_d1_dipoles.txt"
BRANCHING_TOLERANCE = 1e-4

_LABEL = re.compile(r"^(?P<manifold>[ge])(?P<f>\d+):(?P<m>[+-]?\d+)$")


@dataclass(frozen=True, order=True)
class Sublevel:
    """A Zeeman sublevel |F, mF> of the ground (``g``) or excited (``e``) manifold."""

    manifold: str
    f: int
    m: int

    @classmethod
    def parse(cls, label: str) -> "Sublevel":
        match = _LABEL.match(label.strip())
        if not match:
            raise DipoleTableError(f"malformed sublevel label {label!r}")
        sublevel = cls(match["manifold"], int(match["f"]), int(match["m"]))
        if abs(sublevel.m) > sublevel.f:
            raise DipoleTableError(f"sublevel {label!r} has |mF| > F")
        return sublevel

    @property
    def label(self) -> str:
        return f"{self.manifold}{self.f}:{self.m:+d}"

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class DipoleEntry:
    ground: Sublevel
    excited: Sublevel
    element: float
    branching_ratio: float

    @property
    def polarization(self) -> int:
        """mF' - mF: +1 for sigma+, -1 for sigma-, 0 for pi absorption."""
        return self.excited.m - self.ground.m


class DipoleTable:
    """Lookup of dipole entries keyed by (ground, excited) sublevels."""

    def __init__(self, entries: Iterable[DipoleEntry], source: str = "<memory>"):
        self.source = source
        self._entries: Dict[Tuple[Sublevel, Sublevel], DipoleEntry] = {}
        for entry in entries:
            key = (entry.ground, entry.excited)
            if key in self._entries:
                raise DipoleTableError(f"{source}: duplicate transition {entry.ground} -> {entry.excited}")
            self._entries[key] = entry

    @classmethod
    def from_text(cls, text: str, source: str = "<text>") -> "DipoleTable":
        entries = []
        lines = (line for line in io.StringIO(text) if line.strip() and not line.lstrip().startswith("#"))
        for row_number, row in enumerate(csv.reader(lines), start=1):
            if len(row) != 4:
                raise DipoleTableError(f"{source}: data row {row_number} has {len(row)} columns, expected 4")
            ground, excited = Sublevel.parse(row[0]), Sublevel.parse(row[1])
            if ground.manifold != "g" or excited.manifold != "e":
                raise DipoleTableError(f"{source}: row {row_number} must list ground then excited")
            try:
                element, ratio = float(row[2]), float(row[3])
            except ValueError as e:
                raise DipoleTableError(f"{source}: row {row_number} {ground} -> {excited}: {e}") from e
            if ratio < 0:
                raise DipoleTableError(f"{source}: negative branching ratio for {ground} -> {excited}")
            entries.append(DipoleEntry(ground, excited, element, ratio))
        return cls(entries, source=source)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "DipoleTable":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise DipoleTableError(f"cannot read dipole table {path}: {e}") from e
        return cls.from_text(text, source=str(path))

    @classmethod
    def bundled(cls, name: str = BUNDLED_RB87_D1) -> "DipoleTable":
        text = resources.files(__package__).joinpath("data").joinpath(name).read_text(encoding="utf-8")
        return cls.from_text(text, source=name)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.values())

    def entry(self, ground: Sublevel, excited: Sublevel) -> DipoleEntry:
        try:
            return self._entries[(ground, excited)]
        except KeyError:
            raise DipoleTableError(
                f"{self.source}: missing dipole entry for transition {ground} -> {excited}"
            ) from None

    def validate(self, ground: Sequence[Sublevel], excited: Sequence[Sublevel]) -> None:
        """Require every |dm| <= 1 transition and unit branching per excited sublevel."""
        for e in excited:
            for g in ground:
                if abs(e.m - g.m) <= 1:
                    self.entry(g, e)
            total = sum(entry.branching_ratio for entry in self.decays_from(e))
            if abs(total - 1.0) > BRANCHING_TOLERANCE:
                raise DipoleTableError(
                    f"{self.source}: branching ratios of {e} sum to {total:.6f}, expected 1"
                )

    def decays_from(self, excited: Sublevel) -> List[DipoleEntry]:
        return [entry for (_, e), entry in self._entries.items() if e == excited]

    def normalized_branching(self, excited: Sublevel) -> Dict[Sublevel, float]:
        """Branching ratios of ``excited`` rescaled to sum exactly to 1."""
        decays = self.decays_from(excited)
        total = sum(entry.branching_ratio for entry in decays)
        if total <= 0:
            raise DipoleTableError(f"{self.source}: excited sublevel {excited} has no decay channels")
        return {entry.ground: entry.branching_ratio / total for entry in decays if entry.branching_ratio > 0}
