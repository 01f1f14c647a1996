"""DAC-to-ADC measurement path and identification datasets.

The path is a Butterworth lowpass, realized as a cascade of second-order
sections, followed by a mid-tread ADC whose full scale is aligned with the DAC
full scale. A capture pairs every DAC input code x_n with the ADC output y_n
normalized to [-1, 1].
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy import signal

from .converter import DacConfig, DemState, MismatchProfile, convert
from .errors import ArgumentError, ConfigurationError, DesignError

logger = logging.getLogger(__name__)

#: Samples dropped from the start of every capture. The default path has its
#: poles at a radius of about 0.95, so a transient shrinks by roughly 30 dB
#: over 64 samples; capture also starts the filter in the steady state of the
#: first sample, which leaves only the small transient of a slow stimulus.
WARMUP_SAMPLES = 64

#: Relative tolerance for "the same" sample rate or full scale across sections.
_MATCH_TOLERANCE = 1e-9


@dataclass(frozen=True)
class MeasurementPathConfig:
    filter_order: int = 2
    cutoff_hz: float = 20e9
    sample_rate: float = 40.96e9
    #: Sample the ADC at n + tau, tau being the filter's DC group delay, so the
    #: pairs (x_n, y_n) refer to the same instant.
    align_delay: bool = True

    def __post_init__(self):
        if self.filter_order not in (1, 2, 3, 4):
            raise ConfigurationError(f"Filter order must be 1..4, got {self.filter_order}")
        if not self.sample_rate > 0:
            raise ConfigurationError(f"Sample rate must be positive, got {self.sample_rate}")


@dataclass(frozen=True, eq=False)
class BiquadChain:
    """Second-order sections in scipy layout: rows of (b0, b1, b2, 1, a1, a2)."""

    sections: np.ndarray
    sample_rate: float

    def __post_init__(self):
        sections = np.array(self.sections, dtype=float)
        sections.flags.writeable = False
        object.__setattr__(self, "sections", sections)

    def __len__(self):
        return self.sections.shape[0]

    def dc_gain(self):
        numerators = self.sections[:, :3].sum(axis=1)
        denominators = self.sections[:, 3:].sum(axis=1)
        return float(np.prod(numerators / denominators))

    def frequency_response(self, freqs_hz):
        freqs_hz = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
        _freqs, response = signal.sosfreqz(np.array(self.sections), worN=freqs_hz, fs=self.sample_rate)
        return response

    def gain_db(self, freq_hz):
        return float(20.0 * np.log10(np.abs(self.frequency_response(freq_hz)[0])))


@dataclass(frozen=True)
class AdcConfig:
    full_scale: float
    bits: int = 10
    noise_rms_lsb: float = 0.0

    def __post_init__(self):
        if self.bits < 2:
            raise ConfigurationError(f"ADC needs at least 2 bits, got {self.bits}")
        if not self.full_scale > 0:
            raise ConfigurationError(f"ADC full scale must be positive, got {self.full_scale}")
        if self.noise_rms_lsb < 0:
            raise ConfigurationError(f"ADC noise must be non-negative, got {self.noise_rms_lsb}")

    @classmethod
    def for_dac(cls, dac: DacConfig, bits: int = 10, noise_rms_lsb: float = 0.0):
        return cls(full_scale=dac.full_scale, bits=bits, noise_rms_lsb=noise_rms_lsb)

    @property
    def lsb(self):
        return 2.0 * self.full_scale / (1 << self.bits)

    @property
    def lsb_normalized(self):
        return 2.0 / (1 << self.bits)

    @property
    def code_limits(self):
        half = 1 << (self.bits - 1)
        return -half, half - 1


@dataclass(frozen=True, eq=False)
class Dataset:
    """Input-output pairs for identification of the static characteristic."""

    x: np.ndarray
    y: np.ndarray
    bits: int
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.x, dtype=np.int64)
        y = np.array(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ArgumentError("Dataset inputs and outputs must be vectors of equal length")
        if x.size == 0:
            raise ArgumentError("Dataset is empty")
        if x.min() < 0 or x.max() >= (1 << self.bits):
            raise ArgumentError(f"Dataset codes fall outside the {self.bits}-bit range")
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > 1.0:
            raise ArgumentError("Dataset outputs must be finite and normalized to [-1, 1]")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def __len__(self):
        return self.x.size

    def distinct_codes(self):
        return int(np.unique(self.x).size)


def design_butterworth(cfg: MeasurementPathConfig) -> BiquadChain:
    """Digital Butterworth lowpass by prewarped bilinear transform.

    Prewarping at the cutoff puts the -3 dB point exactly at ``cutoff_hz``.
    """
    nyquist = cfg.sample_rate / 2.0
    if not 0 < cfg.cutoff_hz < nyquist:
        raise DesignError(f"Cutoff {cfg.cutoff_hz} Hz must lie inside (0, {nyquist}) Hz")
    sections = signal.butter(cfg.filter_order, cfg.cutoff_hz, btype="low", fs=cfg.sample_rate, output="sos")
    chain = BiquadChain(sections, cfg.sample_rate)
    # Renormalize the first numerator so the cascade passes DC with gain 1.
    sections = np.array(chain.sections)
    sections[0, :3] /= chain.dc_gain()
    return BiquadChain(sections, cfg.sample_rate)


def filter_apply(chain: BiquadChain, waveform) -> np.ndarray:
    """Causal filtering from zero initial state."""
    # sosfilt refuses read-only coefficient buffers.
    return signal.sosfilt(np.array(chain.sections), np.asarray(waveform, dtype=float))


def filter_settled(chain: BiquadChain, waveform) -> np.ndarray:
    """Causal filtering that starts in the steady state of the first sample.

    A constant record passes unchanged from its first sample on.
    """
    waveform = np.asarray(waveform, dtype=float)
    if waveform.size == 0:
        return waveform.copy()
    sections = np.array(chain.sections)
    initial = signal.sosfilt_zi(sections) * waveform[0]
    filtered, _final = signal.sosfilt(sections, waveform, zi=initial)
    return filtered


def filter_periodic(chain: BiquadChain, waveform) -> np.ndarray:
    """Steady-state response to a periodically repeated record.

    The record is filtered twice in a row and the second pass is kept, so a
    coherent record stays coherent and no start-up transient leaks into its
    spectrum.
    """
    waveform = np.asarray(waveform, dtype=float)
    return filter_apply(chain, np.concatenate((waveform, waveform)))[waveform.size:]


def group_delay_samples(chain: BiquadChain) -> float:
    """Group delay of the cascade at DC, in samples."""
    total = 0.0
    for section in chain.sections:
        b = np.trim_zeros(section[:3], "b")
        a = np.trim_zeros(section[3:], "b")
        _w, delay = signal.group_delay((b, a), w=[0.0])
        total += float(delay[0])
    return total


def adc_quantize(waveform, cfg: AdcConfig, seed: Optional[int] = None) -> np.ndarray:
    """Mid-tread quantization clamped at the rails, rescaled to [-1, 1]."""
    samples = np.asarray(waveform, dtype=float)
    if cfg.noise_rms_lsb > 0:
        rng = np.random.default_rng(seed)
        samples = samples + rng.normal(0.0, cfg.noise_rms_lsb * cfg.lsb, samples.shape)
    low, high = cfg.code_limits
    codes = np.clip(np.round(samples / cfg.lsb), low, high)
    return codes * cfg.lsb / cfg.full_scale


def _check_consistent(dac: DacConfig, path: MeasurementPathConfig, adc: AdcConfig):
    if not math.isclose(dac.sample_rate, path.sample_rate, rel_tol=_MATCH_TOLERANCE):
        raise ConfigurationError(
            f"DAC samples at {dac.sample_rate} Hz but the measurement path at {path.sample_rate} Hz"
        )
    if not math.isclose(dac.full_scale, adc.full_scale, rel_tol=_MATCH_TOLERANCE):
        raise ConfigurationError(
            f"ADC full scale {adc.full_scale} does not match the DAC full scale {dac.full_scale}"
        )


def _aligned(filtered, delay):
    """Sample the filtered record at n + delay, dropping samples past its end."""
    if delay <= 0:
        return filtered
    count = filtered.size - int(math.ceil(delay))
    positions = np.arange(count) + delay
    return np.interp(positions, np.arange(filtered.size), filtered)


def capture(codes, dac: DacConfig, mismatch: MismatchProfile, path: MeasurementPathConfig,
            adc: AdcConfig, dem: Optional[DemState] = None, noise_seed: int = 0,
            warmup: int = WARMUP_SAMPLES, repeats: int = 1,
            description: Optional[Mapping] = None) -> Dataset:
    """Run codes through DAC, path and ADC and pair inputs with outputs.

    ``repeats`` > 1 captures the record again with noise seeds
    ``noise_seed + i`` (and fresh DEM draws) and concatenates the pairs.
    """
    _check_consistent(dac, path, adc)
    if repeats < 1:
        raise ArgumentError(f"repeats must be >= 1, got {repeats}")
    codes = dac.check_codes(codes)
    chain = design_butterworth(path)
    delay = group_delay_samples(chain) if path.align_delay else 0.0

    xs, ys = [], []
    for index in range(repeats):
        filtered = filter_settled(chain, convert(codes, dac, mismatch, dem))
        aligned = _aligned(filtered, delay)
        if aligned.size <= warmup:
            raise ArgumentError(
                f"Record of {codes.size} samples is too short for {warmup} warm-up samples"
            )
        y = adc_quantize(aligned, adc, noise_seed + index)
        xs.append(codes[warmup:aligned.size])
        ys.append(y[warmup:])

    metadata = {
        "stimulus": dict(description or {}),
        "dac": asdict(dac),
        "mismatch": {"sigma_u": mismatch.sigma_u, "seed": mismatch.seed},
        "dem": {"enabled": bool(dem is not None and dem.enabled), "seed": None if dem is None else dem.seed},
        "path": asdict(path),
        "adc": asdict(adc),
        "noise_seed": noise_seed,
        "warmup": warmup,
        "repeats": repeats,
        "delay_samples": delay,
    }
    logger.debug("Captured %d pairs with %.3f samples of path delay.", sum(x.size for x in xs), delay)
    return Dataset(np.concatenate(xs), np.concatenate(ys), bits=dac.bits, metadata=metadata)


def average_per_code(dataset: Dataset) -> Dataset:
    """One row per distinct code carrying the mean of its outputs."""
    codes, inverse, counts = np.unique(dataset.x, return_inverse=True, return_counts=True)
    sums = np.zeros(codes.size)
    np.add.at(sums, inverse, dataset.y)
    metadata = dict(dataset.metadata)
    metadata["averaged_per_code"] = True
    return Dataset(codes, sums / counts, bits=dataset.bits, metadata=metadata)
