"""Coherently sampled DAC code stimuli.

Every tone is snapped to an odd DFT bin of the record, so an integer number of
periods fits the record and a rectangular-window FFT reads each tone and each
intermodulation product from a single bin.

dBFS is referenced to a sine whose amplitude is half the code span,
(2^M - 1) / 2 codes around mid-scale.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import ArgumentError

logger = logging.getLogger(__name__)

IDENT_FREQUENCY_HZ = 100e6
IDENT_AMPLITUDE_DBFS = -0.5

#: Relative tolerance used to recognise a bin ratio that is an integer up to
#: floating point rounding, e.g. 100e6 * 65536 / 40.96e9.
_INTEGER_SNAP = 1e-9


@dataclass(frozen=True)
class ToneSpec:
    freq_hz: float
    amplitude_dbfs: float = -12.0
    phase_rad: float = 0.0

    def __post_init__(self):
        if self.amplitude_dbfs > 0:
            raise ArgumentError(f"Tone amplitude must be <= 0 dBFS, got {self.amplitude_dbfs}")

    @property
    def amplitude_ratio(self):
        """Linear amplitude relative to full scale; 0 for -inf dBFS."""
        if math.isinf(self.amplitude_dbfs):
            return 0.0
        return 10.0 ** (self.amplitude_dbfs / 20.0)


@dataclass(frozen=True)
class PlannedTone:
    spec: ToneSpec
    bin: int
    freq_hz: float


@dataclass(frozen=True)
class StimulusPlan:
    n_samples: int
    sample_rate: float
    tones: Tuple[PlannedTone, ...]
    dc_offset_code: float = None

    @property
    def bins(self):
        return tuple(tone.bin for tone in self.tones)

    @property
    def bin_spacing_hz(self):
        return self.sample_rate / self.n_samples

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "sample_rate": self.sample_rate,
            "dc_offset_code": self.dc_offset_code,
            "tones": [
                {
                    "requested_hz": tone.spec.freq_hz,
                    "freq_hz": tone.freq_hz,
                    "bin": tone.bin,
                    "amplitude_dbfs": None if math.isinf(tone.spec.amplitude_dbfs) else tone.spec.amplitude_dbfs,
                    "phase_rad": tone.spec.phase_rad,
                }
                for tone in self.tones
            ],
        }


@dataclass(frozen=True, eq=False)
class CodeSequence:
    codes: np.ndarray
    clipped_samples: int = 0
    plan: StimulusPlan = None
    description: dict = field(default_factory=dict)

    def __len__(self):
        return self.codes.size


def _check_record_length(n_samples):
    if n_samples < 4 or n_samples & (n_samples - 1):
        raise ArgumentError(f"Record length must be a power of two >= 4, got {n_samples}")


def coherent_bin(freq_hz: float, sample_rate: float, n_samples: int) -> int:
    """Nearest odd bin to ``freq_hz``; a tie between two odd bins goes up."""
    if not 0 < freq_hz < sample_rate / 2:
        raise ArgumentError(
            f"Tone frequency {freq_hz} Hz is outside (0, {sample_rate / 2}) Hz"
        )
    ratio = freq_hz * n_samples / sample_rate
    nearest = round(ratio)
    if abs(ratio - nearest) <= _INTEGER_SNAP * max(1.0, abs(ratio)):
        ratio = float(nearest)
    k = 2 * math.floor(ratio / 2.0) + 1
    highest_odd = n_samples // 2 - 1
    if highest_odd % 2 == 0:
        highest_odd -= 1
    return int(min(max(k, 1), highest_odd))


def plan_tones(tones, sample_rate: float, n_samples: int, dc_offset_code: float = None) -> StimulusPlan:
    _check_record_length(n_samples)
    planned = []
    for tone in tones:
        k = coherent_bin(tone.freq_hz, sample_rate, n_samples)
        planned.append(PlannedTone(spec=tone, bin=k, freq_hz=k * sample_rate / n_samples))
    bins = [tone.bin for tone in planned]
    if len(set(bins)) != len(bins):
        raise ArgumentError(f"Tones snap to colliding bins {bins}; increase the record length")
    return StimulusPlan(
        n_samples=n_samples,
        sample_rate=sample_rate,
        tones=tuple(planned),
        dc_offset_code=dc_offset_code,
    )


def two_tone_plan(center_hz: float, spacing_hz: float, tone_dbfs: float,
                  sample_rate: float, n_samples: int) -> StimulusPlan:
    return plan_tones(
        (
            ToneSpec(center_hz - spacing_hz / 2.0, tone_dbfs),
            ToneSpec(center_hz + spacing_hz / 2.0, tone_dbfs),
        ),
        sample_rate,
        n_samples,
    )


def tone_waveform(plan: StimulusPlan, full_scale: float) -> np.ndarray:
    """Unquantized sum of the planned tones, zero-mean, in the units of ``full_scale``."""
    n = np.arange(plan.n_samples)
    signal = np.zeros(plan.n_samples)
    for tone in plan.tones:
        amplitude = full_scale * tone.spec.amplitude_ratio
        if amplitude:
            # Integer bin arithmetic modulo N keeps the phase exact over long records.
            signal += amplitude * np.sin(2.0 * np.pi * ((tone.bin * n) % plan.n_samples) / plan.n_samples
                                         + tone.spec.phase_rad)
    return signal


def gen_codes(plan: StimulusPlan, bits: int) -> CodeSequence:
    if not plan.tones:
        raise ArgumentError("A stimulus needs at least one tone")
    max_code = (1 << bits) - 1
    half_span = max_code / 2.0
    mid = half_span if plan.dc_offset_code is None else float(plan.dc_offset_code)

    total_ratio = sum(tone.spec.amplitude_ratio for tone in plan.tones)
    if total_ratio > 1.0:
        logger.warning("Tone amplitudes add up to %.3f of full scale; peaks will clip.", total_ratio)

    levels = np.round(mid + tone_waveform(plan, half_span))
    clipped = int(np.count_nonzero((levels < 0) | (levels > max_code)))
    if clipped:
        logger.warning("%d of %d stimulus samples clipped to the code range.", clipped, plan.n_samples)
    codes = np.clip(levels, 0, max_code).astype(np.int64)
    return CodeSequence(codes=codes, clipped_samples=clipped, plan=plan, description=plan.to_dict())


def ident_stimulus(sample_rate: float, n_samples: int, bits: int,
                   amplitude_dbfs: float = IDENT_AMPLITUDE_DBFS,
                   freq_hz: float = IDENT_FREQUENCY_HZ) -> CodeSequence:
    """Single low-frequency tone for identification of the static characteristic.

    The default -0.5 dBFS covers nearly the whole code range; -6 dBFS
    reproduces the reduced-coverage mode, where codes outside the swing are
    never observed.
    """
    plan = plan_tones((ToneSpec(freq_hz, amplitude_dbfs, 0.0),), sample_rate, n_samples)
    return gen_codes(plan, bits)


def random_codes(n_samples: int, bits: int, seed: int) -> CodeSequence:
    """Uniformly distributed random codes, the stimulus of background schemes."""
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 1 << bits, size=n_samples, dtype=np.int64)
    return CodeSequence(codes=codes, description={"kind": "uniform-random", "seed": seed, "n_samples": n_samples})


def coverage(codes, bits: int):
    """Distinct codes seen, and the codes never seen, by a stimulus."""
    seen = np.zeros(1 << bits, dtype=bool)
    seen[np.asarray(codes, dtype=np.int64)] = True
    return int(np.count_nonzero(seen)), np.flatnonzero(~seen)
