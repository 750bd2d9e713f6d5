"""Experiment configuration: TOML loader with schema validation and a stable digest.

Sections mirror the pipeline stages. Unknown keys are rejected so typos surface as
configuration errors instead of silently falling back to defaults.
"""

from __future__ import annotations

import hashlib
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

Pair = tuple[float, float]
Box = tuple[float, float, float, float]


class ConfigError(ValueError):
    """Configuration file is unreadable or violates the schema."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SegmentConfig(_Section):
    start: Pair
    end: Pair
    loss_db: float = Field(6.0, ge=0)


class ScenarioConfig(_Section):
    name: str = "scenario"
    bounds: Box
    reflectors: list[SegmentConfig] = []
    obstacles: list[SegmentConfig] = []
    tx: Pair
    rx: Pair
    carrier_ghz: float = Field(60.0, gt=0)
    max_order: int = Field(1, ge=0, le=2)
    min_gain_db: float = -120.0


class ArrayConfig(_Section):
    elements: int = Field(16, ge=1)
    spacing: float = Field(0.5, gt=0)
    boresight: Optional[float] = None  # default: facing the peer node


class ArraysConfig(_Section):
    tx: ArrayConfig = ArrayConfig()
    rx: ArrayConfig = ArrayConfig()
    eve: ArrayConfig = ArrayConfig()


class CodebookConfig(_Section):
    tx_beams: int = Field(17, ge=1)
    rx_beams: int = Field(17, ge=1)
    span_deg: float = Field(90.0, gt=0, le=180)
    eve_beams: int = Field(33, ge=1)
    eve_span_deg: float = Field(180.0, gt=0, le=180)
    backoff_step_db: float = Field(1.0, gt=0)
    max_backoff_db: float = Field(15.0, ge=0)
    acp_margin_db: float = 10.0


class LinkConfig(_Section):
    tx_power_dbm: float = 10.0
    noise_dbm: float = -71.0
    decode_snr_db: float = 0.0


class SelectionConfig(_Section):
    k_max: int = Field(8, ge=1)
    min_sep_deg: float = Field(15.0, ge=0)
    max_iter: int = Field(100, ge=1)


class EnsembleConfig(_Section):
    gain_sigma_db: float = Field(2.0, ge=0)
    angle_sigma_deg: float = Field(1.0, ge=0)
    random_phase: bool = True
    samples_per_location: int = Field(200, ge=1)


class AttackerConfig(_Section):
    model: Literal["quasi_omni", "directional"] = "directional"


class EveGridConfig(_Section):
    spacing: float = Field(gt=0)
    region: Optional[Box] = None
    exclusion_radius: float = Field(0.1, ge=0)


class SchemesConfig(_Section):
    random_hop_paths: int = Field(3, ge=1)
    measured: Optional[list[int]] = None  # grid indices used to fit the LP; default all


class SecrecyConfig(_Section):
    leakage_trials: int = Field(1000, ge=1)
    rate_step: float = Field(0.01, gt=0)


class ColludingConfig(_Section):
    q_max: int = Field(6, ge=1)
    exhaustive_limit: int = Field(12, ge=1)
    sampled_subsets: int = Field(500, ge=1)


class CodingConfig(_Section):
    bits_per_path: int = Field(2, ge=1, le=10)
    message_bits: int = Field(2, ge=0)
    intercept_snr_db: Optional[float] = None  # default: Eve matches Bob's SNR on the pair


class AllocateConfig(_Section):
    csl: list[list[float]]

    @model_validator(mode="after")
    def _rectangular(self):
        if not self.csl or len({len(r) for r in self.csl}) != 1 or not self.csl[0]:
            raise ValueError("csl must be a non-empty rectangular matrix")
        return self


class ExperimentConfig(_Section):
    scenario: ScenarioConfig
    eve_grid: EveGridConfig
    arrays: ArraysConfig = ArraysConfig()
    codebook: CodebookConfig = CodebookConfig()
    link: LinkConfig = LinkConfig()
    selection: SelectionConfig = SelectionConfig()
    ensemble: EnsembleConfig = EnsembleConfig()
    attacker: AttackerConfig = AttackerConfig()
    schemes: SchemesConfig = SchemesConfig()
    secrecy: SecrecyConfig = SecrecyConfig()
    colluding: ColludingConfig = ColludingConfig()
    coding: CodingConfig = CodingConfig()
    allocate: Optional[AllocateConfig] = None
    seed: Optional[int] = Field(None, ge=0)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, ignoring the root seed."""
        data = self.model_dump(mode="json", exclude={"seed"})
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_updates(self, **sections) -> "ExperimentConfig":
        """Copy with whole fields or `section={key: value}` overrides, revalidated."""
        data = self.model_dump()
        for key, value in sections.items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return ExperimentConfig.model_validate(data)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)


def reference_config_path() -> Path:
    return Path(str(resources.files("beamsec") / "configs" / "reference.toml"))


def reference_config() -> ExperimentConfig:
    """The bundled 3-reflector reference room."""
    return load_config(reference_config_path())
