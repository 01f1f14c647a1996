"""Pre-distortion lookup tables.

A transfer estimate is tabulated over every code, a least-squares line is
fitted to it, and the LUT sends each code x to the code whose estimated output
lies closest to the line at x. Applying the LUT before the DAC makes the
cascade follow the line.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .converter import DacConfig, MismatchProfile, transfer_table
from .errors import ArgumentError, CodeRangeError, ConfigurationError, DegenerateEstimateError
from .regression import PolyModel, model_eval

logger = logging.getLogger(__name__)

SOURCES = ("mlp", "poly", "oracle")

#: Upper bound on targets x candidates compared at once by build_lut.
_ARGMIN_CHUNK_ELEMENTS = 1 << 22


def _code_bits(count):
    bits = int(count).bit_length() - 1
    if count < 4 or count != 1 << bits:
        raise ArgumentError(f"Table length must be a power of two >= 4, got {count}")
    return bits


@dataclass(frozen=True, eq=False)
class TransferEstimate:
    values: np.ndarray
    source: str

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise ArgumentError("Transfer estimate contains non-finite values")
        if self.source not in SOURCES:
            raise ArgumentError(f"Unknown estimate source '{self.source}'")
        _code_bits(values.size)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def bits(self):
        return _code_bits(self.values.size)


@dataclass(frozen=True)
class LinearTarget:
    gain: float
    offset: float
    residual_rms: float = 0.0

    def __call__(self, codes):
        return self.gain * np.asarray(codes, dtype=float) + self.offset


@dataclass(frozen=True, eq=False)
class Lut:
    entries: np.ndarray
    bits: int

    def __post_init__(self):
        entries = np.array(self.entries)
        if entries.ndim != 1 or entries.size != 1 << self.bits:
            raise ArgumentError(f"A {self.bits}-bit LUT needs {1 << self.bits} entries, got {entries.size}")
        if not np.issubdtype(entries.dtype, np.integer) and not np.array_equal(entries, np.round(entries)):
            raise ArgumentError("LUT entries must be integers")
        entries = entries.astype(np.int64)
        if entries.min() < 0 or entries.max() >= 1 << self.bits:
            raise CodeRangeError(f"LUT entries fall outside the {self.bits}-bit code range")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return self.entries.size

    @classmethod
    def identity(cls, bits: int):
        return cls(np.arange(1 << bits), bits)

    def deviation_count(self):
        """Entries that differ from the identity map."""
        return int(np.count_nonzero(self.entries != np.arange(self.entries.size)))

    def missing_codes(self):
        """Codes never produced by the LUT."""
        produced = np.zeros(self.entries.size, dtype=bool)
        produced[self.entries] = True
        return np.flatnonzero(~produced)

    def to_dict(self):
        return {"bits": self.bits, "entries": self.entries.tolist()}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(entries=data["entries"], bits=int(data["bits"]))
        except (KeyError, TypeError) as error:
            raise ConfigurationError(f"Malformed LUT file: {error}") from error


def tabulate(model) -> TransferEstimate:
    """Evaluate a fitted model on every code of its input range."""
    norm = model.norm
    if norm is None:
        raise ArgumentError("Model carries no input normalization")
    codes = np.arange(1 << norm.bits)
    source = "poly" if isinstance(model, PolyModel) else "mlp"
    return TransferEstimate(values=model_eval(model, codes), source=source)


def oracle_estimate(cfg: DacConfig, mm: MismatchProfile) -> TransferEstimate:
    """The exact transfer table, normalized by the full-scale amplitude."""
    return TransferEstimate(values=transfer_table(cfg, mm).normalized(cfg.full_scale), source="oracle")


def fit_linear_target(est: TransferEstimate) -> LinearTarget:
    codes = np.arange(est.values.size, dtype=float)
    values = est.values
    centered = values - values.mean()
    if not np.any(centered):
        raise DegenerateEstimateError("Transfer estimate is constant; no line can be inverted")
    code_centered = codes - codes.mean()
    gain = float(code_centered @ centered / (code_centered @ code_centered))
    offset = float(values.mean() - gain * codes.mean())
    residuals = values - (gain * codes + offset)
    if gain <= 0:
        logger.warning("Fitted line has non-positive gain %.3e; the estimate is not increasing on average.", gain)
    return LinearTarget(gain=gain, offset=offset, residual_rms=float(np.sqrt(np.mean(residuals * residuals))))


def build_lut(est: TransferEstimate, target: LinearTarget) -> Lut:
    """entries[x] = argmin over x~ of |est[x~] - line(x)|, ties to the smaller x~."""
    values = est.values
    targets = target(np.arange(values.size))
    entries = np.empty(values.size, dtype=np.int64)
    chunk = max(1, _ARGMIN_CHUNK_ELEMENTS // values.size)
    for start in range(0, values.size, chunk):
        distances = np.abs(values[np.newaxis, :] - targets[start:start + chunk, np.newaxis])
        # argmin returns the first minimum, which is the smaller code.
        entries[start:start + chunk] = np.argmin(distances, axis=1)
    lut = Lut(entries, est.bits)
    logger.debug("Built %d-bit LUT from %s estimate: %d entries differ from identity.",
                 est.bits, est.source, lut.deviation_count())
    return lut


def apply_lut(lut: Lut, codes) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size and (codes.min() < 0 or codes.max() >= len(lut)):
        raise CodeRangeError(f"Codes outside the {lut.bits}-bit range of the LUT")
    return lut.entries[codes]


def lut_from_estimate(est: TransferEstimate) -> Lut:
    return build_lut(est, fit_linear_target(est))


def oracle_lut(cfg: DacConfig, mm: MismatchProfile) -> Lut:
    """The best static pre-distortion achievable at code granularity."""
    return lut_from_estimate(oracle_estimate(cfg, mm))


def agreement(lut: Lut, reference: Lut, tolerance: int = 1) -> float:
    """Share of entries within ``tolerance`` codes of ``reference``."""
    if lut.bits != reference.bits:
        raise ArgumentError(f"Cannot compare a {lut.bits}-bit LUT with a {reference.bits}-bit LUT")
    return float(np.mean(np.abs(lut.entries - reference.entries) <= tolerance))
