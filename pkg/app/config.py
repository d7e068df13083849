"""Run configuration: INI file sections validated into pydantic models.

[energy]    dimension, g.family, g.coefficients, h.family, h.coefficients
[boundary]  kind, content.form, content.c0, content.c1, content.floor
[solver]    tolerances and limits of the integrations
[sweep]     phi0 grid for the bifurcation and equilibrium curves
[output]    directory, svg

See README.md for the full grammar.
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, PositiveFloat, PositiveInt, ValidationError, field_validator, model_validator

from utils.cavity_solver import AffineContent, ConstantContent, SolverTolerances, StressFree, WithContent
from utils.errors import ConfigError, DomainError
from utils.stored_energy import FAMILIES, TERM_KINDS, ScalarModel, StoredEnergy, Term

ENV_OUTPUT_DIR = "CAVITATION_OUTPUT_DIR"
ENV_THREADS = "CAVITATION_THREADS"
ENV_LOG_LEVEL = "CAVITATION_LOG_LEVEL"

SINGLE_COEFFICIENT = ("quadratic", "log_entropy")


class TermSpec(BaseModel):
    kind: Literal["power", "inverse_power", "quadratic", "log_entropy"]
    coefficient: float
    exponent: float = 0.0
    shift: float = Field(default=0.0, ge=0.0)


class ModelSpec(BaseModel):
    family: Literal["power_sum", "inverse_power_sum", "log_entropy", "quadratic", "custom"]
    rows: List[TermSpec]

    @field_validator("rows")
    @classmethod
    def _non_empty(cls, rows):
        if not rows:
            raise ValueError("coefficient list is empty")
        return rows

    def build(self) -> ScalarModel:
        terms = tuple(Term(r.kind, r.coefficient, r.exponent, r.shift) for r in self.rows)
        return ScalarModel(self.family, terms)


class EnergySpec(BaseModel):
    dimension: int = Field(ge=2)
    g: ModelSpec
    h: ModelSpec

    def build(self) -> StoredEnergy:
        try:
            return StoredEnergy(self.g.build(), self.h.build(), self.dimension)
        except DomainError as exc:
            raise ConfigError(f"[energy] {exc}") from exc


class BoundarySpec(BaseModel):
    kind: Literal["stress_free", "with_content"] = "stress_free"
    form: Literal["constant", "affine"] = "constant"
    c0: float = 0.0
    c1: float = 0.0
    floor: PositiveFloat = 1e-12

    @model_validator(mode="after")
    def _content_positive_at_zero(self):
        if self.kind != "with_content":
            return self
        if not np.isfinite(self.c0):
            raise ValueError("content.c0 must be finite so that G is continuous at phi0 = 0")
        if self.form == "constant" and not self.c0 > 0.0:
            raise ValueError(f"constant content needs content.c0 > 0, got {self.c0}")
        return self

    def build(self):
        if self.kind == "stress_free":
            return StressFree()
        if self.form == "constant":
            return WithContent(ConstantContent(self.c0, self.floor))
        return WithContent(AffineContent(self.c0, self.c1, self.floor))


class SolverSettings(BaseModel):
    rel_tol: PositiveFloat = 1e-10
    abs_tol: PositiveFloat = 1e-12
    s0_factor: PositiveFloat = 1e-3
    eps_q: PositiveFloat = 1e-8
    eps_ab: PositiveFloat = 1e-10
    sonic_switch: PositiveFloat = 1e-2
    gap_switch: PositiveFloat = 1e-2
    bracket_tol: PositiveFloat = 1e-5
    xi_max: PositiveFloat = 1e4
    f_tol: PositiveFloat = 1e-10
    max_steps: PositiveInt = 200_000

    def tolerances(self) -> SolverTolerances:
        return SolverTolerances(**self.model_dump())


class SweepSpec(BaseModel):
    phi0_min: PositiveFloat = 0.05
    phi0_max: PositiveFloat = 2.7
    count: PositiveInt = 20
    spacing: Literal["linear", "log"] = "linear"
    rescaling_tau: PositiveFloat = 2.0
    rescaling_grid: List[PositiveFloat] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])

    @model_validator(mode="after")
    def _ordered(self):
        if self.phi0_min > self.phi0_max:
            raise ValueError(f"phi0_min {self.phi0_min} exceeds phi0_max {self.phi0_max}")
        return self

    def grid(self) -> List[float]:
        if self.count == 1:
            return [float(self.phi0_min)]
        if self.spacing == "log":
            return [float(x) for x in np.geomspace(self.phi0_min, self.phi0_max, self.count)]
        return [float(x) for x in np.linspace(self.phi0_min, self.phi0_max, self.count)]


class OutputSpec(BaseModel):
    directory: str = "output"
    svg: bool = True


class RunConfig(BaseModel):
    energy: EnergySpec
    boundary: BoundarySpec = Field(default_factory=BoundarySpec)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)


def parse_rows(family: str, text: str) -> List[dict]:
    """Coefficient rows: ';' between rows, ',' between fields."""
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    rows = []
    for raw in (r.strip() for r in text.split(";")):
        if not raw:
            continue
        if family == "custom":
            kind, sep, rest = raw.partition(":")
            if not sep:
                raise ConfigError(f"custom row {raw!r} needs the form 'kind: coefficient, exponent, shift'")
            kind = kind.strip()
            if kind not in TERM_KINDS:
                raise ConfigError(f"unknown term kind {kind!r} in row {raw!r}")
        else:
            kind = {
                "power_sum": "power",
                "inverse_power_sum": "inverse_power",
                "quadratic": "quadratic",
                "log_entropy": "log_entropy",
            }[family]
            rest = raw
        try:
            values = [float(x) for x in rest.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"non-numeric entry in row {raw!r}") from exc
        limit = 1 if kind in SINGLE_COEFFICIENT else 3
        if not 1 <= len(values) <= limit:
            raise ConfigError(f"row {raw!r} takes 1 to {limit} numbers for {kind}, got {len(values)}")
        row = dict(zip(("coefficient", "exponent", "shift"), values))
        row["kind"] = kind
        rows.append(row)
    return rows


def _section(parser: configparser.ConfigParser, name: str) -> dict:
    return dict(parser.items(name)) if parser.has_section(name) else {}


def _model_section(energy: dict, which: str) -> dict:
    family = energy.get(f"{which}.family")
    if family is None:
        raise ConfigError(f"[energy] is missing {which}.family")
    return {"family": family, "rows": parse_rows(family, energy.get(f"{which}.coefficients", ""))}


def _split_floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if not parser.has_section("energy"):
        raise ConfigError(f"{source}: missing [energy] section")

    energy = _section(parser, "energy")
    data: dict = {
        "energy": {
            "dimension": energy.get("dimension", "3"),
            "g": _model_section(energy, "g"),
            "h": _model_section(energy, "h"),
        }
    }
    boundary = _section(parser, "boundary")
    if boundary:
        data["boundary"] = {k.removeprefix("content."): v for k, v in boundary.items()}
    if parser.has_section("solver"):
        data["solver"] = _section(parser, "solver")
    sweep = _section(parser, "sweep")
    if sweep:
        if "rescaling_grid" in sweep:
            try:
                sweep["rescaling_grid"] = _split_floats(sweep["rescaling_grid"])
            except ValueError as exc:
                raise ConfigError(f"{source}: [sweep] rescaling_grid is not a list of numbers") from exc
        data["sweep"] = sweep
    output = _section(parser, "output")
    if output:
        data["output"] = output
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: Optional[Path]) -> RunConfig:
    if path is None:
        raise ConfigError("no configuration file given (use --config)")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def env_output_dir(default: str) -> str:
    return os.getenv(ENV_OUTPUT_DIR) or default


def env_threads(default: int = 1) -> int:
    raw = os.getenv(ENV_THREADS)
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"{ENV_THREADS}={raw!r} is not an integer") from exc


def env_log_level(default: str = "INFO") -> str:
    return (os.getenv(ENV_LOG_LEVEL) or default).upper()
