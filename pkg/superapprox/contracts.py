"""Strongly typed input contracts for superapprox experiments."""

from __future__ import annotations

import json
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic import ValidationError as PydanticValidationError

from .approxsub import SubsetView, resolve_subset
from .errors import ConfigurationError, ValidationError
from .groupgen import PRESETS, GeneratorSet, Quotient
from .modring import Modulus, RationalMatrix
from .padic import AnalyticMap
from .spectral import DEFAULT_SEED
from .treereg import LeafSet


class Command(str, Enum):
    SURVEY = "survey"
    GAP = "gap"
    QUOTIENT = "quotient"
    REGULARIZE = "regularize"
    TRIPLING = "tripling"
    BOUNDEDGEN = "boundedgen"
    COMMFILL = "commfill"
    HENSEL = "hensel"
    SUMSET = "sumset"
    EQUIDIST = "equidist"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


REQUIRED_FIELDS: dict[Command, tuple[str, ...]] = {
    Command.SURVEY: ("gens", "moduli"),
    Command.GAP: ("gens", "modulus"),
    Command.QUOTIENT: ("gens", "modulus"),
    Command.REGULARIZE: ("leaves", "epsilon"),
    Command.TRIPLING: ("gens", "modulus", "delta", "walk_length"),
    Command.BOUNDEDGEN: ("gens", "modulus", "level"),
    Command.COMMFILL: ("gens", "modulus"),
    Command.HENSEL: ("map", "point", "target", "l", "precision"),
    Command.SUMSET: ("map", "l", "precision"),
    Command.EQUIDIST: ("gens", "modulus", "walk_length"),
}


def parse_rational(text: Union[str, int, float, Fraction], field_name: str) -> Fraction:
    """Parse ``"a/b"`` (or an integer or decimal literal) into an exact Fraction."""
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"Field '{field_name}' must be a rational 'a/b', got {text!r}") from exc


def parse_moduli(text: Union[str, list[Any]]) -> list[Modulus]:
    """Parse ``"3,5,7,3^2"`` or a list into moduli, preserving order."""
    items = text.split(",") if isinstance(text, str) else list(text)
    moduli = [Modulus.parse(str(item)) for item in items if str(item).strip()]
    if not moduli:
        raise ValidationError("at least one modulus is required")
    return moduli


def _read_document(path: Path) -> Any:
    if not path.exists():
        raise ValidationError(f"Input file not found: {path}")
    with path.open("r", encoding="utf-8") as handle:
        if path.suffix == ".json":
            try:
                return json.load(handle)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"Malformed JSON in {path}: {exc}") from exc
        try:
            return yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ValidationError(f"Malformed YAML in {path}: {exc}") from exc


def load_generator_set(source: Union[str, Path]) -> GeneratorSet:
    """
    Load Ω from a preset name or a JSON/YAML document.

    The document holds ``q0``, ``matrices`` (integer numerators) and optional
    ``denominator_exponents``. The result is symmetrized.
    """
    if isinstance(source, str) and source in PRESETS:
        return PRESETS[source]()
    payload = _read_document(Path(source))
    if not isinstance(payload, dict):
        raise ValidationError("Generator payload must be a mapping.")
    matrices = payload.get("matrices")
    if not isinstance(matrices, list) or not matrices:
        raise ValidationError("Field 'matrices' must be a nonempty list of square matrices.")
    q0 = int(payload.get("q0", 1))
    exponents = payload.get("denominator_exponents", [0] * len(matrices))
    if not isinstance(exponents, list) or len(exponents) != len(matrices):
        raise ValidationError("Field 'denominator_exponents' must match 'matrices' in length.")
    try:
        generators = [
            RationalMatrix.from_rows(rows, int(e), q0) for rows, e in zip(matrices, exponents)
        ]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"Matrix entries must be integers: {exc}") from exc
    dimension = payload.get("dimension")
    if dimension is not None and any(m.size != int(dimension) for m in generators):
        raise ValidationError(f"Every matrix must be {dimension} x {dimension}.")
    return GeneratorSet.symmetric(generators)


def load_leaf_set(path: Path) -> LeafSet:
    if not path.exists():
        raise ValidationError(f"Leaf set file not found: {path}")
    return LeafSet.from_text(path.read_text(encoding="utf-8"))


def load_analytic_map(path: Path) -> AnalyticMap:
    payload = _read_document(path)
    if not isinstance(payload, dict):
        raise ValidationError("Map payload must be a mapping.")
    return AnalyticMap.from_payload(payload)


def load_subset(path: Path, G: Quotient) -> SubsetView:
    """Resolve a subset document (positions, matrices or generator flags) against ``G``."""
    payload = _read_document(path)
    if isinstance(payload, list):
        payload = {"positions": payload}
    if not isinstance(payload, dict):
        raise ValidationError("Subset payload must be a mapping or a list of positions.")
    return resolve_subset(
        G,
        positions=payload.get("positions"),
        matrices=payload.get("matrices"),
        include_generators=bool(payload.get("include_generators", False)),
        include_identity=bool(payload.get("include_identity", False)),
    )


class ExperimentConfig(BaseModel):
    """One experiment: a command plus its inputs and numeric parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Command
    gens: Optional[str] = None
    subset: Optional[Path] = None
    leaves: Optional[Path] = None
    map: Optional[Path] = None
    moduli: list[str] = Field(default_factory=list)
    modulus: Optional[str] = None
    epsilon: Optional[str] = None
    delta: Optional[str] = None
    walk_length: Optional[int] = None
    C: Optional[int] = None
    level: Optional[int] = None
    l: Optional[int] = None
    precision: Optional[int] = None
    point: list[int] = Field(default_factory=list)
    target: list[int] = Field(default_factory=list)
    k0: int = 0
    block: bool = False
    functions: int = 100
    method: str = "fft"
    seed: int = DEFAULT_SEED
    jobs: int = 1
    max_order: Optional[int] = None
    out: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV
    reuse_cache: bool = False
    timings: bool = True

    @field_validator("moduli", mode="before")
    @classmethod
    def _split_moduli(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        if isinstance(value, list):
            return [str(item) for item in value]
        return value

    @field_validator("modulus", "epsilon", "delta", mode="before")
    @classmethod
    def _stringify(cls, value: Any) -> Any:
        return None if value is None else str(value)

    @field_validator("point", "target", mode="before")
    @classmethod
    def _split_vector(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [int(item) for item in value.split(",") if item.strip()]
        return value

    def parsed_moduli(self) -> list[Modulus]:
        return parse_moduli(self.moduli)

    def parsed_modulus(self) -> Modulus:
        if self.modulus is None:
            raise ConfigurationError("Field 'modulus' is required.")
        return Modulus.parse(self.modulus)

    def epsilon_value(self) -> Fraction:
        if self.epsilon is None:
            raise ConfigurationError("Field 'epsilon' is required.")
        return parse_rational(self.epsilon, "epsilon")

    def delta_value(self) -> Fraction:
        if self.delta is None:
            raise ConfigurationError("Field 'delta' is required.")
        return parse_rational(self.delta, "delta")

    def validate_for_command(self) -> ExperimentConfig:
        """Check the fields the command needs before any computation starts."""
        for name in REQUIRED_FIELDS[self.command]:
            value = getattr(self, name)
            if value is None or value == []:
                raise ConfigurationError(
                    f"Command '{self.command.value}' requires --{name.replace('_', '-')}."
                )
        try:
            if self.moduli:
                self.parsed_moduli()
            if self.modulus is not None:
                self.parsed_modulus()
        except ValidationError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.epsilon is not None and not 0 < self.epsilon_value() <= 1:
            raise ConfigurationError("Field 'epsilon' must lie in (0, 1].")
        if self.delta is not None and self.delta_value() <= 0:
            raise ConfigurationError("Field 'delta' must be positive.")
        lower_bounds = {
            "walk_length": 0,
            "C": 1,
            "level": 0,
            "l": 0,
            "precision": 1,
            "k0": 0,
            "functions": 1,
            "jobs": 1,
            "max_order": 1,
        }
        for name, bound in lower_bounds.items():
            value = getattr(self, name)
            if value is not None and value < bound:
                raise ConfigurationError(f"Field '{name}' must be at least {bound}, got {value}.")
        if self.method not in ("fft", "sorted"):
            raise ConfigurationError(f"Field 'method' must be 'fft' or 'sorted', got {self.method!r}.")
        return self


def build_config(payload: dict[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping into an :class:`ExperimentConfig`."""
    try:
        config = ExperimentConfig.model_validate(payload)
    except PydanticValidationError as exc:
        raise ConfigurationError(f"Invalid experiment configuration: {exc}") from exc
    return config.validate_for_command()


def load_experiment_config(path: Path) -> ExperimentConfig:
    """Load and validate an experiment YAML (or JSON) from path."""
    try:
        payload = _read_document(path) or {}
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc
    if not isinstance(payload, dict):
        raise ConfigurationError("Experiment payload must be a mapping.")
    return build_config(payload)
