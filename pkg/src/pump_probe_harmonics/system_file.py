"""
TOML system files: parsing, validation and dumping.

Frequencies must carry a unit suffix, ``_hz`` (cycles per second, converted
with 2*pi) or ``_rad_per_s``. Levels are 1-based. The schema is documented in
docs/SYSTEM_FILE_FORMAT.md.
"""

import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigFileError, PumpProbeError
from .models import PRESETS, ExplicitModel, ModelPreset, default_coherence_pairs
from .spectroscopy import ATOMIC_MASS_UNIT, MediumParams
from .system import CoherencePair, Coupling, HarmonicTag, SourceChannel, SystemSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

HZ = "_hz"
RAD_PER_S = "_rad_per_s"
TWO_PI = 2.0 * math.pi

# Keys that hold angular frequencies and therefore need a unit suffix
FREQUENCY_NAMES = {
    "gamma", "gamma_op", "gamma_g", "pump_rabi", "probe_rabi", "pump_detuning",
    "hyperfine_splitting", "excited_splitting", "ground_relaxation", "ground_hyperfine",
    "excited_hyperfine", "detuning", "linewidth", "rabi", "rate", "start", "stop",
    "beat_frequency",
}

_TOML_POSITION = re.compile(r"\s*\(at (?:line (\d+), column (\d+)|end of document)\)")


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    start: float
    stop: float
    points: int = Field(default=201, ge=2)
    orders: Optional[int] = Field(default=None, ge=1)
    velocity_groups: int = Field(default=1, ge=1)
    jobs: Optional[int] = Field(default=None, ge=1)
    cell_length_m: Optional[float] = Field(default=None, gt=0)


class SolveSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    detuning: Optional[float] = None
    orders: Optional[int] = Field(default=None, ge=1)


class LevelEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    detuning: float = 0.0
    linewidth: float = Field(default=0.0, ge=0)


class CouplingEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    levels: Tuple[int, int]
    rabi: float
    tag: HarmonicTag = HarmonicTag.STATIC


class SourceEntry(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    from_level: int = Field(alias="from")
    to_level: int = Field(alias="to")
    rate: float = Field(ge=0)


class PairEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    row: int
    col: int
    weight: float = 1.0


class SystemSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_levels: int = Field(ge=2)
    beat_frequency: float = 0.0
    excited_levels: List[int] = Field(default_factory=list)
    probe_rabi: Optional[float] = Field(default=None, gt=0)
    pump_rabi: float = Field(default=0.0, ge=0)
    gamma: Optional[float] = Field(default=None, gt=0)
    levels: List[LevelEntry]
    couplings: List[CouplingEntry] = Field(default_factory=list)
    sources: List[SourceEntry] = Field(default_factory=list)
    probe_pairs: List[PairEntry] = Field(default_factory=list)
    pump_pairs: List[PairEntry] = Field(default_factory=list)


class MediumSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    number_density_per_m3: Optional[float] = None
    saturation_intensity_w_per_m2: Optional[float] = None
    gamma: Optional[float] = None
    wavelength_m: Optional[float] = Field(default=None, gt=0)
    wavevector_rad_per_m: Optional[float] = Field(default=None, gt=0)
    mass_amu: Optional[float] = Field(default=None, gt=0)
    mass_kg: Optional[float] = Field(default=None, gt=0)
    temperature_k: Optional[float] = None


@dataclass
class SystemFile:
    """A parsed system file: the model plus its sweep, solve and medium settings."""

    model: ModelPreset
    sweep: SweepSection
    solve: SolveSection = field(default_factory=SolveSection)
    medium: MediumParams = field(default_factory=MediumParams)
    path: Optional[str] = None

    @property
    def solve_detuning(self) -> float:
        """Detuning used by the single-point solve, in rad/s."""
        if self.solve.detuning is not None:
            return self.solve.detuning
        if isinstance(self.model, ExplicitModel):
            return self.model.spec.beat_frequency
        return 0.0

    def build(self, detuning: Optional[float] = None) -> SystemSpec:
        return self.model.build(self.solve_detuning if detuning is None else detuning)


class _Locator:
    """Finds the source line of a key so schema errors can point at it."""

    def __init__(self, text: str, path: Optional[str]):
        self.lines = text.splitlines()
        self.path = path

    def line_of(self, key: str, section: str = "") -> Optional[int]:
        pattern = re.compile(rf"^\s*\"?{re.escape(key)}\"?\s*=")
        header = re.compile(rf"^\s*\[\[?\s*{re.escape(section)}[\].]") if section else None
        in_section = header is None
        for number, line in enumerate(self.lines, start=1):
            if header is not None and line.lstrip().startswith("["):
                in_section = bool(header.match(line))
            if in_section and pattern.match(line):
                return number
        return None

    def error(self, message: str, field_path: str, key: Optional[str] = None) -> ConfigFileError:
        section = re.split(r"[.\[]", field_path, maxsplit=1)[0]
        line = self.line_of(key, section) if key else None
        return ConfigFileError(message, path=self.path, line=line, field=field_path)


def _convert_units(table: Dict[str, Any], section: str, locator: _Locator) -> Tuple[Dict[str, Any], Dict[str, str]]:
    """Strip unit suffixes, converting Hz to rad/s. Returns (values, name -> original key)."""
    values: Dict[str, Any] = {}
    spelled: Dict[str, str] = {}
    for key, value in table.items():
        if key.endswith(HZ) and key[: -len(HZ)] in FREQUENCY_NAMES:
            name, factor = key[: -len(HZ)], TWO_PI
        elif key.endswith(RAD_PER_S) and key[: -len(RAD_PER_S)] in FREQUENCY_NAMES:
            name, factor = key[: -len(RAD_PER_S)], 1.0
        elif key in FREQUENCY_NAMES:
            raise locator.error(
                f"frequency key {key!r} needs a unit suffix ({key}_hz or {key}_rad_per_s)",
                f"{section}.{key}", key,
            )
        else:
            values[key] = value
            spelled[key] = key
            continue
        if name in values:
            raise locator.error(f"{name!r} is given twice with different units", f"{section}.{key}", key)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise locator.error(f"expected a number, got {value!r}", f"{section}.{key}", key)
        values[name] = float(value) * factor
        spelled[name] = key
    return values, spelled


def _validate(schema, values: Dict[str, Any], spelled: Dict[str, str], section: str, locator: _Locator):
    try:
        return schema.model_validate(values)
    except ValidationError as e:
        first = e.errors()[0]
        loc = [str(part) for part in first["loc"]]
        key = spelled.get(loc[0], loc[0]) if loc else None
        field_path = ".".join([section, key] + loc[1:]) if key else section
        raise locator.error(first["msg"], field_path, key) from None


def _convert_entries(entries: Any, section: str, locator: _Locator) -> List[Dict[str, Any]]:
    if not isinstance(entries, list):
        raise locator.error("expected an array of tables", section)
    converted = []
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise locator.error("expected a table", f"{section}[{index}]")
        values, _ = _convert_units(entry, f"{section}[{index}]", locator)
        converted.append(values)
    return converted


def _parse_system(table: Dict[str, Any], locator: _Locator) -> ExplicitModel:
    table = dict(table)
    nested = {
        name: _convert_entries(table.pop(name), f"system.{name}", locator)
        for name in ("levels", "couplings", "sources", "probe_pairs", "pump_pairs")
        if name in table
    }
    values, spelled = _convert_units(table, "system", locator)
    values.update(nested)
    section = _validate(SystemSection, values, spelled, "system", locator)

    if len(section.levels) != section.n_levels:
        raise locator.error(
            f"{len(section.levels)} [[system.levels]] entries for n_levels = {section.n_levels}",
            "system.levels", "n_levels",
        )
    try:
        spec = SystemSpec(
            n_levels=section.n_levels,
            diagonal_terms=tuple(-2.0 * level.detuning - 1j * level.linewidth for level in section.levels),
            couplings=tuple(Coupling(c.levels[0], c.levels[1], c.rabi, c.tag) for c in section.couplings),
            source_channels=tuple(SourceChannel(s.from_level, s.to_level, s.rate) for s in section.sources),
            beat_frequency=section.beat_frequency,
            excited_levels=tuple(section.excited_levels),
        )
    except PumpProbeError as e:
        raise locator.error(str(e), "system") from e

    probe_pairs = [CoherencePair(p.row, p.col, p.weight) for p in section.probe_pairs]
    probe_pairs = probe_pairs or default_coherence_pairs(spec)
    beat_rabi = max((abs(c.rabi_frequency) for c in spec.couplings if c.tag is HarmonicTag.BEAT), default=0.0)
    probe_rabi = section.probe_rabi or beat_rabi
    if not probe_pairs or probe_rabi <= 0:
        raise locator.error(
            "no probe coherence: add beat couplings or set probe_pairs and probe_rabi_hz",
            "system.probe_pairs",
        )
    gamma = section.gamma or max(level.linewidth for level in section.levels)
    if gamma <= 0:
        raise locator.error("set gamma_hz: no level has a linewidth to normalize chi with", "system.gamma")

    return ExplicitModel(
        spec=spec,
        probe_pairs=tuple(probe_pairs),
        pump_pairs=tuple(CoherencePair(p.row, p.col, p.weight) for p in section.pump_pairs),
        probe_rabi=probe_rabi,
        pump_rabi=section.pump_rabi,
        gamma=gamma,
    )


def _parse_model(table: Dict[str, Any], locator: _Locator) -> ModelPreset:
    table = dict(table)
    preset = table.pop("preset", None)
    if preset not in PRESETS:
        raise locator.error(
            f"unknown preset {preset!r}; expected one of {', '.join(sorted(PRESETS))}",
            "model.preset", "preset",
        )
    values, spelled = _convert_units(table, "model", locator)
    return _validate(PRESETS[preset], values, spelled, "model", locator)


def _parse_medium(table: Dict[str, Any], model: ModelPreset, locator: _Locator) -> MediumParams:
    values, spelled = _convert_units(table, "medium", locator)
    section = _validate(MediumSection, values, spelled, "medium", locator)
    for first, second in (("wavelength_m", "wavevector_rad_per_m"), ("mass_amu", "mass_kg")):
        if getattr(section, first) is not None and getattr(section, second) is not None:
            raise locator.error(f"give either {first} or {second}, not both", f"medium.{second}", second)

    params: Dict[str, float] = {"gamma": section.gamma or model.linewidth}
    if section.number_density_per_m3 is not None:
        params["number_density"] = section.number_density_per_m3
    if section.saturation_intensity_w_per_m2 is not None:
        params["saturation_intensity"] = section.saturation_intensity_w_per_m2
    if section.wavelength_m is not None:
        params["wavevector"] = TWO_PI / section.wavelength_m
    if section.wavevector_rad_per_m is not None:
        params["wavevector"] = section.wavevector_rad_per_m
    if section.mass_amu is not None:
        params["mass"] = section.mass_amu * ATOMIC_MASS_UNIT
    if section.mass_kg is not None:
        params["mass"] = section.mass_kg
    if section.temperature_k is not None:
        params["temperature"] = section.temperature_k
    try:
        return MediumParams(**params)
    except ValidationError as e:
        first_error = e.errors()[0]
        name = ".".join(str(part) for part in first_error["loc"])
        raise locator.error(first_error["msg"], f"medium.{name}") from None


def loads(text: str, path: Optional[str] = None) -> SystemFile:
    """Parse system-file text; ``path`` only labels error messages."""
    locator = _Locator(text, path)
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line, column = getattr(e, "lineno", None), getattr(e, "colno", None)
        if line is None:
            match = _TOML_POSITION.search(str(e))
            if match and match.group(1):
                line, column = int(match.group(1)), int(match.group(2))
        message = getattr(e, "msg", None) or _TOML_POSITION.sub("", str(e))
        raise ConfigFileError(f"invalid TOML: {message}", path=path, line=line, column=column) from None

    unknown = set(document) - {"model", "system", "sweep", "solve", "medium"}
    if unknown:
        name = sorted(unknown)[0]
        raise locator.error(f"unknown table [{name}]", name, name)
    if ("model" in document) == ("system" in document):
        raise ConfigFileError("exactly one of [model] or [system] is required", path=path)

    if "model" in document:
        model = _parse_model(document["model"], locator)
    else:
        model = _parse_system(document["system"], locator)

    if "sweep" in document:
        values, spelled = _convert_units(document["sweep"], "sweep", locator)
        sweep = _validate(SweepSection, values, spelled, "sweep", locator)
        if sweep.stop <= sweep.start:
            raise locator.error("stop must be greater than start", "sweep.stop")
    else:
        sweep = SweepSection(start=-TWO_PI * 1e8, stop=TWO_PI * 1e8)

    values, spelled = _convert_units(document.get("solve", {}), "solve", locator)
    solve = _validate(SolveSection, values, spelled, "solve", locator)
    medium = _parse_medium(document.get("medium", {}), model, locator)
    return SystemFile(model=model, sweep=sweep, solve=solve, medium=medium, path=path)


def load(path: Union[str, Path]) -> SystemFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigFileError(f"cannot read system file: {e}", path=str(path)) from e
    return loads(text, path=str(path))


def _with_units(values: Dict[str, Any]) -> Dict[str, Any]:
    """Attach the rad/s suffix to frequency keys and drop unset values."""
    out: Dict[str, Any] = {}
    for name, value in values.items():
        if value is None:
            continue
        if isinstance(value, tuple):
            value = list(value)
        out[f"{name}{RAD_PER_S}" if name in FREQUENCY_NAMES else name] = value
    return out


def _dump_system(model: ExplicitModel) -> Dict[str, Any]:
    spec = model.spec
    table: Dict[str, Any] = _with_units({
        "n_levels": spec.n_levels,
        "beat_frequency": spec.beat_frequency,
        "excited_levels": list(spec.excited_levels),
        "probe_rabi": model.probe_rabi,
        "pump_rabi": model.pump_rabi,
        "gamma": model.gamma,
    })
    table["levels"] = [
        _with_units({"detuning": -d.real / 2.0, "linewidth": -d.imag}) for d in spec.diagonal_terms
    ]
    if spec.couplings:
        table["couplings"] = [
            _with_units({"levels": [c.level_i, c.level_j], "rabi": c.rabi_frequency, "tag": c.tag.value})
            for c in spec.couplings
        ]
    if spec.source_channels:
        table["sources"] = [
            _with_units({"from": s.from_level, "to": s.to_level, "rate": s.rate})
            for s in spec.source_channels
        ]
    table["probe_pairs"] = [{"row": p.row, "col": p.col, "weight": p.weight} for p in model.probe_pairs]
    if model.pump_pairs:
        table["pump_pairs"] = [{"row": p.row, "col": p.col, "weight": p.weight} for p in model.pump_pairs]
    return table


def dumps(system_file: SystemFile) -> str:
    """Serialize to TOML in rad/s so that re-parsing reproduces the same floats."""
    document: Dict[str, Any] = {}
    if isinstance(system_file.model, ExplicitModel):
        document["system"] = _dump_system(system_file.model)
    else:
        model = {"preset": system_file.model.preset}
        model.update(_with_units(system_file.model.model_dump()))
        document["model"] = model

    document["sweep"] = _with_units(system_file.sweep.model_dump())
    solve = _with_units(system_file.solve.model_dump())
    if solve:
        document["solve"] = solve

    medium = system_file.medium
    document["medium"] = {
        "number_density_per_m3": medium.number_density,
        "saturation_intensity_w_per_m2": medium.saturation_intensity,
        f"gamma{RAD_PER_S}": medium.gamma,
        "wavevector_rad_per_m": medium.wavevector,
        "mass_kg": medium.mass,
        "temperature_k": medium.temperature,
    }
    return tomli_w.dumps(document)


def dump(system_file: SystemFile, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.write_text(dumps(system_file), encoding="utf-8")
    except OSError as e:
        raise ConfigFileError(f"cannot write system file: {e}", path=str(path)) from e
