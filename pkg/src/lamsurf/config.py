"""Scenario configuration: strict YAML schema validated with pydantic."""
from __future__ import annotations

import os
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

COMMANDS = ("verify", "flow", "spectrum", "stability", "curve", "growth", "variation")
THREADS_ENV = "LAMSURF_THREADS"


class ConfigError(ValueError):
    """Unparseable or invalid scenario configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RangeConfig(_Strict):
    """Inclusive arithmetic range ``start, start+step, ..., stop``."""

    start: float
    stop: float
    step: float = Field(gt=0)

    @model_validator(mode="after")
    def _order(self):
        if self.stop < self.start:
            raise ValueError("stop must not be below start")
        if (self.stop - self.start) / self.step > 100000:
            raise ValueError("range has more than 100000 points")
        return self


class SurfaceConfig(_Strict):
    family: Literal["sphere", "cylinder", "polygon", "ellipse", "curve_file", "curve_product"] = "sphere"
    n: int = Field(2, ge=1, le=6)
    k: Optional[int] = Field(None, ge=0)
    r: Optional[float] = Field(None, ge=0, le=100)
    a: Optional[float] = Field(None, gt=0, le=100)
    b: Optional[float] = Field(None, gt=0, le=100)
    vertices: int = Field(256, ge=8, le=100000)
    estimator: Optional[Literal["angle", "spectral"]] = None
    path: Optional[str] = None
    flat_dim: int = Field(1, ge=1, le=4)
    lam: Optional[float] = None

    @model_validator(mode="after")
    def _required(self):
        fam = self.family
        if fam in ("sphere", "cylinder", "polygon") and self.r is None:
            raise ValueError(f"{fam} needs r")
        if fam == "cylinder":
            if self.k is None:
                raise ValueError("cylinder needs k")
            if self.k > self.n:
                raise ValueError("cylinder needs k <= n")
        if fam in ("sphere", "polygon") and not self.r > 0:
            raise ValueError("r must be positive")
        if fam == "ellipse" and (self.a is None or self.b is None):
            raise ValueError("ellipse needs a and b")
        if fam in ("curve_file", "curve_product") and self.path is None:
            raise ValueError(f"{fam} needs path")
        return self


class FlowConfig(_Strict):
    T: float = Field(0.1, gt=0, le=100)
    dt: float = Field(1e-4, gt=0, le=1)
    amplitude: float = Field(0.05, ge=0, le=0.5)
    radius: float = Field(1.0, gt=0, le=100)
    vertices: int = Field(128, ge=8, le=100000)
    direction: Tuple[float, float] = (1.0, 0.0)
    check_every: int = Field(100, ge=0)
    cfl: float = Field(0.4, gt=0, le=0.5)


class SweepConfig(_Strict):
    n: List[int] = Field(default_factory=lambda: [2], min_length=1)
    r: RangeConfig = RangeConfig(start=1.0, stop=2.0, step=0.05)
    certify: bool = True

    @model_validator(mode="after")
    def _dims(self):
        if any(v < 1 or v > 6 for v in self.n):
            raise ValueError("sweep dimensions must lie in 1..6")
        if self.r.start <= 0:
            raise ValueError("sweep radii must be positive")
        return self


class CurveConfig(_Strict):
    lam: float = -0.5
    fold: int = Field(2, ge=2, le=12)
    bracket: Optional[Tuple[float, float]] = None
    search: Optional[RangeConfig] = None
    samples: int = Field(512, ge=16, le=65536)
    circle: bool = True
    shooting_tol: float = Field(1e-13, gt=0, le=1e-6)

    @model_validator(mode="after")
    def _bracket(self):
        if self.bracket is not None and not 0 < self.bracket[0] < self.bracket[1]:
            raise ValueError("bracket must satisfy 0 < lo < hi")
        if self.search is not None and self.search.start <= 0:
            raise ValueError("search radii must be positive")
        return self


class GrowthConfig(_Strict):
    radii: Optional[List[float]] = None
    expected: Optional[float] = None


class SpectrumConfig(_Strict):
    k_max: int = Field(6, ge=0, le=200)


class VariationConfig(_Strict):
    eps: float = Field(1e-4, gt=0, le=0.1)
    battery: int = Field(10, ge=1, le=100)


class Scenario(_Strict):
    command: Optional[Literal[COMMANDS]] = None
    surface: SurfaceConfig = SurfaceConfig(family="sphere", n=2, r=2 ** 0.5)
    resolution: int = Field(32, ge=8, le=512)
    tol: Optional[float] = Field(None, gt=0, lt=1)
    seed: int = Field(0, ge=0)
    output: Optional[str] = None
    flow: FlowConfig = FlowConfig()
    sweep: Optional[SweepConfig] = None
    curve: CurveConfig = CurveConfig()
    growth: GrowthConfig = GrowthConfig()
    spectrum: SpectrumConfig = SpectrumConfig()
    variation: VariationConfig = VariationConfig()


def _format_errors(exc: ValidationError, source: str) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{source}: {loc}: {err['msg']}")
    return "\n".join(lines)


def parse_scenario(text: str, source: str = "<config>") -> Scenario:
    """Parse YAML text into a :class:`Scenario`.  Raises ConfigError with line or key diagnostics."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: {getattr(exc, 'problem', None) or exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, source)) from None


def load_scenario(path) -> Tuple[Scenario, str]:
    """Read and validate a config file.  Returns the scenario and the raw text (for hashing)."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    scen = parse_scenario(text, str(path))
    ref = scen.surface.path
    if ref is not None:
        target = Path(ref) if Path(ref).is_absolute() else p.parent / ref
        if not target.exists():
            raise ConfigError(f"{path}: surface.path: file {ref!r} not found")
        surf = scen.surface.model_copy(update={"path": str(target)})
        scen = scen.model_copy(update={"surface": surf})
    return scen, text


def apply_overrides(scen: Scenario, **updates) -> Scenario:
    """Copy with CLI overrides applied and re-validated."""
    data = scen.model_dump()
    for key, val in updates.items():
        if val is not None:
            data[key] = val
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, "<command line>")) from None


def thread_count() -> Optional[int]:
    """Worker count from the environment, or None for the default."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if val < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return val
