"""Run configuration: one JSON file, one frozen section per pipeline stage.

Values are resolved as defaults < JSON file < command-line flags. Each section
that draws random numbers carries its own seed, so changing one stage's seed
never perturbs another stage.
"""

import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

from ..domain.capture import AdcConfig, MeasurementPathConfig, design_butterworth
from ..domain.converter import DacConfig, MismatchProfile, draw_mismatch
from ..domain.errors import ConfigurationError
from ..domain.regression import TrainConfig

logger = logging.getLogger(__name__)

OUTPUT_ENV = "DACLIN_OUT"
DEFAULT_OUTPUT_DIR = "daclin-out"

DEFAULT_SWEEP_CENTERS_HZ = tuple(float(f) * 1e9 for f in range(1, 20, 2))
#: Per-tone levels of the sweep: -6 and -12 dBFS total amplitude.
DEFAULT_SWEEP_TONE_DBFS = (-12.0, -18.0)


@dataclass(frozen=True)
class DacSection:
    bits: int = 10
    unit_current: float = 1.0
    seg_bits: int = 4
    sample_rate: float = 40.96e9
    sigma_u: float = 0.005
    seed: int = 42
    #: Zero mismatch regardless of sigma_u.
    ideal: bool = False

    def dac_config(self) -> DacConfig:
        return DacConfig(
            bits=self.bits,
            unit_current=self.unit_current,
            seg_bits=self.seg_bits,
            sample_rate=self.sample_rate,
        )

    def mismatch(self) -> MismatchProfile:
        cfg = self.dac_config()
        if self.ideal:
            return MismatchProfile.zeros(cfg)
        return draw_mismatch(cfg, self.sigma_u, self.seed)


@dataclass(frozen=True)
class PathSection:
    filter_order: int = 2
    cutoff_hz: float = 20e9
    align_delay: bool = True


@dataclass(frozen=True)
class AdcSection:
    bits: int = 10
    noise_rms_lsb: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class IdentSection:
    n_samples: int = 65536
    freq_hz: float = 100e6
    amplitude_dbfs: float = -0.5
    warmup: int = 64
    averages: int = 1
    per_code_mean: bool = False


@dataclass(frozen=True)
class TrainSection:
    hidden: int = 271
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 256
    epochs: int = 500
    seed: int = 0
    poly_degree: int = 15

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            hidden=self.hidden,
        )


@dataclass(frozen=True)
class EvalSection:
    n_samples: int = 65536
    center_hz: float = 3.15e9
    spacing_hz: float = 100e6
    tone_dbfs: float = -12.0
    window: str = "rectangular"
    dem_seed: int = 7
    sweep_centers_hz: Tuple[float, ...] = DEFAULT_SWEEP_CENTERS_HZ
    sweep_tone_dbfs: Tuple[float, ...] = DEFAULT_SWEEP_TONE_DBFS


SECTIONS = {
    "dac": DacSection,
    "path": PathSection,
    "adc": AdcSection,
    "ident": IdentSection,
    "train": TrainSection,
    "eval": EvalSection,
}


@dataclass(frozen=True)
class RunConfig:
    dac: DacSection = field(default_factory=DacSection)
    path: PathSection = field(default_factory=PathSection)
    adc: AdcSection = field(default_factory=AdcSection)
    ident: IdentSection = field(default_factory=IdentSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    #: Not part of the echo or the digest: moving the output leaves results unchanged.
    out_dir: str = DEFAULT_OUTPUT_DIR

    def dac_config(self) -> DacConfig:
        return self.dac.dac_config()

    def path_config(self) -> MeasurementPathConfig:
        return MeasurementPathConfig(
            filter_order=self.path.filter_order,
            cutoff_hz=self.path.cutoff_hz,
            sample_rate=self.dac.sample_rate,
            align_delay=self.path.align_delay,
        )

    def adc_config(self) -> AdcConfig:
        return AdcConfig.for_dac(self.dac_config(), bits=self.adc.bits, noise_rms_lsb=self.adc.noise_rms_lsb)

    def validate(self) -> "RunConfig":
        """Build every domain config once so inconsistencies surface before any work."""
        self.dac_config()
        design_butterworth(self.path_config())
        self.adc_config()
        self.train.train_config()
        if self.dac.sigma_u < 0:
            raise ConfigurationError(f"sigma_u must be non-negative, got {self.dac.sigma_u}")
        if self.ident.averages < 1:
            raise ConfigurationError(f"ident.averages must be >= 1, got {self.ident.averages}")
        if self.eval.window not in ("rectangular", "hann"):
            raise ConfigurationError(f"Unknown window '{self.eval.window}'")
        if not self.eval.sweep_centers_hz or not self.eval.sweep_tone_dbfs:
            raise ConfigurationError("The sweep needs at least one center frequency and one tone level")
        return self

    def to_dict(self):
        echo = {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}
        for key in ("sweep_centers_hz", "sweep_tone_dbfs"):
            echo["eval"][key] = list(echo["eval"][key])
        return echo

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def provenance(self):
        return {"config": self.to_dict(), "config_digest": self.digest()}


def _section_from_dict(name, data):
    section_type = SECTIONS[name]
    if not isinstance(data, dict):
        raise ConfigurationError(f"Section '{name}' must be a JSON object")
    known = {item.name for item in dataclasses.fields(section_type)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"Unknown keys in section '{name}': {', '.join(unknown)}")
    values = dict(data)
    for key in ("sweep_centers_hz", "sweep_tone_dbfs"):
        if key in values:
            values[key] = tuple(float(item) for item in values[key])
    return section_type(**values)


def config_from_dict(data, out_dir: Optional[str] = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("Configuration must be a JSON object")
    unknown = sorted(set(data) - set(SECTIONS) - {"out_dir"})
    if unknown:
        raise ConfigurationError(f"Unknown configuration sections: {', '.join(unknown)}")
    sections = {name: _section_from_dict(name, data[name]) for name in SECTIONS if name in data}
    resolved_out = out_dir or data.get("out_dir") or default_output_dir()
    return RunConfig(out_dir=resolved_out, **sections)


def load_config(filename: Optional[str]) -> RunConfig:
    if not filename:
        return RunConfig(out_dir=default_output_dir())
    try:
        with open(filename, "r", encoding="utf-8") as file:
            data = json.load(file)
    except json.JSONDecodeError as error:
        raise ConfigurationError(f"Configuration {filename} is not valid JSON: {error}") from error
    except OSError as error:
        raise ConfigurationError(f"Cannot read configuration {filename}: {error}") from error
    logger.debug("Loaded configuration from %s", filename)
    return config_from_dict(data)


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT_DIR


def with_overrides(config: RunConfig, seed=None, ideal=False, avg=None, out_dir=None) -> RunConfig:
    """Apply command-line flags on top of a loaded configuration."""
    dac = config.dac
    if seed is not None:
        dac = dataclasses.replace(dac, seed=seed)
    if ideal:
        dac = dataclasses.replace(dac, ideal=True)
    ident = config.ident
    if avg is not None:
        ident = dataclasses.replace(ident, averages=avg)
    return dataclasses.replace(
        config,
        dac=dac,
        ident=ident,
        out_dir=out_dir or config.out_dir,
    )
