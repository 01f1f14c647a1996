"""Single-sided power spectra and two-tone intermodulation metrics.

Power is expressed in dBFS, 0 dBFS being a sine of the full-scale amplitude.
Intermodulation levels are in dBc relative to the mean power of the two tones.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import signal

from .errors import AmbiguityError, ArgumentError
from .stimulus import StimulusPlan

logger = logging.getLogger(__name__)

FLOOR_DBFS = -300.0
WINDOWS = ("rectangular", "hann")
IM_ORDERS = (3, 5, 7)
#: Products and harmonics up to this order are excluded from the noise floor.
NOISE_EXCLUSION_ORDER = 9

_FLOOR_RATIO = 10.0 ** (FLOOR_DBFS / 10.0)


@dataclass(frozen=True, eq=False)
class Spectrum:
    n_samples: int
    sample_rate: float
    power_dbfs: np.ndarray
    window: str = "rectangular"
    #: Power per bin relative to a full-scale sine, before the floor clamp.
    power_ratio: np.ndarray = None

    def __post_init__(self):
        power = np.array(self.power_dbfs, dtype=float)
        if power.size != self.n_samples // 2 + 1:
            raise ArgumentError(f"Spectrum of {self.n_samples} samples needs {self.n_samples // 2 + 1} bins")
        power.flags.writeable = False
        object.__setattr__(self, "power_dbfs", power)
        if self.power_ratio is not None:
            ratio = np.array(self.power_ratio, dtype=float)
            ratio.flags.writeable = False
            object.__setattr__(self, "power_ratio", ratio)

    @property
    def bin_spacing_hz(self):
        return self.sample_rate / self.n_samples

    @property
    def freqs_hz(self):
        return np.arange(self.power_dbfs.size) * self.bin_spacing_hz

    def bin_of(self, freq_hz: float) -> int:
        return int(round(freq_hz / self.bin_spacing_hz))


@dataclass(frozen=True)
class ImReport:
    tone_bins: Tuple[int, ...]
    tone_power_dbfs: Tuple[float, ...]
    mean_tone_dbfs: float
    im3_dbc: Optional[float]
    im5_dbc: Optional[float]
    im7_dbc: Optional[float]
    sfdr_dbc: float
    spur_bin: int
    noise_floor_dbfs_per_bin: float
    product_bins: Dict[str, Tuple[int, ...]] = field(default_factory=dict)

    def im_dbc(self, order: int):
        return {3: self.im3_dbc, 5: self.im5_dbc, 7: self.im7_dbc}[order]

    @property
    def largest_im_dbc(self):
        levels = [level for level in (self.im3_dbc, self.im5_dbc, self.im7_dbc) if level is not None]
        return max(levels) if levels else None

    def to_dict(self):
        return {
            "reference": "dBc relative to the mean tone power",
            "tone_bins": list(self.tone_bins),
            "tone_power_dbfs": list(self.tone_power_dbfs),
            "mean_tone_dbfs": self.mean_tone_dbfs,
            "im3_dbc": self.im3_dbc,
            "im5_dbc": self.im5_dbc,
            "im7_dbc": self.im7_dbc,
            "sfdr_dbc": self.sfdr_dbc,
            "spur_bin": self.spur_bin,
            "noise_floor_dbfs_per_bin": self.noise_floor_dbfs_per_bin,
            "product_bins": {name: list(bins) for name, bins in self.product_bins.items()},
        }


def _check_length(n_samples):
    if n_samples < 4 or n_samples & (n_samples - 1):
        raise ArgumentError(f"Spectrum length must be a power of two >= 4, got {n_samples}")


def _window(name, n_samples):
    if name == "rectangular":
        return np.ones(n_samples)
    if name == "hann":
        return signal.get_window("hann", n_samples, fftbins=True)
    raise ArgumentError(f"Unknown window '{name}', expected one of {WINDOWS}")


def to_dbfs(ratio):
    return 10.0 * np.log10(np.maximum(ratio, _FLOOR_RATIO))


def power_spectrum(waveform, sample_rate: float, window: str = "rectangular",
                   full_scale: float = 1.0) -> Spectrum:
    """Coherent-gain corrected single-sided power spectrum of ``waveform``.

    A sine of amplitude ``full_scale`` centred on a bin reads 0 dBFS there.
    With the rectangular window the bin powers add up to the mean square of
    the waveform.
    """
    waveform = np.asarray(waveform, dtype=float)
    n_samples = waveform.size
    _check_length(n_samples)
    weights = _window(window, n_samples)
    spectrum = np.fft.rfft(waveform * weights) / (n_samples * weights.mean())
    power = np.abs(spectrum) ** 2
    power[1:-1] *= 2.0
    ratio = power / (full_scale * full_scale / 2.0)
    return Spectrum(
        n_samples=n_samples,
        sample_rate=float(sample_rate),
        power_dbfs=to_dbfs(ratio),
        window=window,
        power_ratio=ratio,
    )


def fold(k: int, n_samples: int) -> int:
    """Alias of bin ``k`` inside [0, N/2]."""
    k = abs(int(k)) % n_samples
    return n_samples - k if k > n_samples // 2 else k


def _check_pair(k1, k2, order):
    if k1 == k2:
        raise ArgumentError("Intermodulation needs two distinct tone bins")
    if order < 3 or order % 2 == 0:
        raise ArgumentError(f"Intermodulation order must be odd and >= 3, got {order}")


def im_bins(k1: int, k2: int, order: int, n_samples: int):
    """All bins |a*k1 +- b*k2| with a + b = order, a, b >= 1, folded into [0, N/2]."""
    _check_pair(k1, k2, order)
    bins = set()
    for a in range(1, order):
        b = order - a
        bins.add(fold(a * k1 + b * k2, n_samples))
        bins.add(fold(a * k1 - b * k2, n_samples))
    return sorted(bins)


def close_in_bins(k1: int, k2: int, order: int, n_samples: int):
    """The product pair next to the tones, e.g. 2k1 - k2 and 2k2 - k1 for order 3.

    Unfolded bins, so a product outside (0, N/2) can be recognised as out of band.
    """
    _check_pair(k1, k2, order)
    a = (order + 1) // 2
    b = (order - 1) // 2
    return a * k1 - b * k2, a * k2 - b * k1


def harmonic_bins(k: int, order: int, n_samples: int):
    return sorted({fold(m * k, n_samples) for m in range(2, order + 1)})


def _excluded_from_floor(k1, k2, n_samples):
    excluded = {0, k1, k2}
    for order in range(3, NOISE_EXCLUSION_ORDER + 1, 2):
        excluded.update(im_bins(k1, k2, order, n_samples))
    excluded.update(harmonic_bins(k1, NOISE_EXCLUSION_ORDER, n_samples))
    excluded.update(harmonic_bins(k2, NOISE_EXCLUSION_ORDER, n_samples))
    for order in range(2, NOISE_EXCLUSION_ORDER + 1, 2):
        # Even-order products, e.g. k2 - k1 and k1 + k2.
        for a in range(1, order):
            excluded.add(fold(a * k1 + (order - a) * k2, n_samples))
            excluded.add(fold(a * k1 - (order - a) * k2, n_samples))
    return excluded


def measure(spectrum: Spectrum, plan: StimulusPlan) -> ImReport:
    """Tone powers, IM3/IM5/IM7, SFDR and noise floor of a two-tone spectrum."""
    if len(plan.tones) != 2:
        raise ArgumentError(f"Intermodulation needs a two-tone plan, got {len(plan.tones)} tones")
    if plan.n_samples != spectrum.n_samples or not np.isclose(plan.sample_rate, spectrum.sample_rate):
        raise ArgumentError("Stimulus plan is not coherent with the spectrum grid")
    n_samples = spectrum.n_samples
    nyquist = n_samples // 2
    k1, k2 = plan.bins
    tone_bins = {k1, k2}

    collisions = sorted(
        {k for order in IM_ORDERS for k in im_bins(k1, k2, order, n_samples) if k in tone_bins}
    )
    if collisions:
        raise AmbiguityError(f"Tone bins {collisions} coincide with intermodulation products", bins=collisions)

    power = spectrum.power_dbfs
    tone_power = (float(power[k1]), float(power[k2]))
    ratios = 10.0 ** (np.array(tone_power) / 10.0)
    mean_tone = float(10.0 * np.log10(ratios.mean()))

    levels = {}
    product_bins = {}
    for order in IM_ORDERS:
        pair = [k for k in close_in_bins(k1, k2, order, n_samples) if 0 < k < nyquist]
        product_bins[f"im{order}"] = tuple(pair)
        product_bins[f"im{order}_all"] = tuple(im_bins(k1, k2, order, n_samples))
        levels[order] = float(max(power[pair]) - mean_tone) if pair else None

    spur_mask = np.ones(power.size, dtype=bool)
    spur_mask[[0, k1, k2]] = False
    spur_bin = int(np.flatnonzero(spur_mask)[np.argmax(power[spur_mask])])
    sfdr = mean_tone - float(power[spur_bin])

    floor_mask = np.ones(power.size, dtype=bool)
    floor_mask[sorted(_excluded_from_floor(k1, k2, n_samples))] = False
    noise_floor = float(np.median(power[floor_mask]))

    return ImReport(
        tone_bins=(k1, k2),
        tone_power_dbfs=tone_power,
        mean_tone_dbfs=mean_tone,
        im3_dbc=levels[3],
        im5_dbc=levels[5],
        im7_dbc=levels[7],
        sfdr_dbc=sfdr,
        spur_bin=spur_bin,
        noise_floor_dbfs_per_bin=noise_floor,
        product_bins=product_bins,
    )
