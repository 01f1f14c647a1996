"""Static behavioral model of a segmented current-steering DAC.

An M-bit code is split into S thermometer-decoded MSBs, which switch 2^S - 1
interchangeable unit cells of weight 2^(M-S), and M - S binary-weighted LSB
drivers of weight 2^m. Every driver steers its current to one of the two
output rails, so its contribution to I_out = I_p - I_n is +w or -w. Current
source mismatch scales each weight by (1 + delta).

Currents are in units of the unit current I_u. With zero mismatch the output
for code x is I_u * (2x - (2^M - 1)), so the ideal step between codes is
2 * I_u and the full-scale amplitude is (2^M - 1) * I_u.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ArgumentError, CodeRangeError, ConfigurationError

logger = logging.getLogger(__name__)

#: A DAC code is a plain integer in [0, 2^M - 1]. Bit m set means b_m = +1.
DacCode = int

#: Upper bound on rows x unit cells held in memory at once by the DEM path.
_DEM_CHUNK_ELEMENTS = 1 << 22

#: Largest unit-cell count randomized by sorting a key per cell and sample.
_DEM_SORTED_CELLS = 255


def _readonly(values, dtype=float):
    array = np.array(values, dtype=dtype)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class DacConfig:
    bits: int = 10
    unit_current: float = 1.0
    seg_bits: int = 4
    sample_rate: float = 40.96e9

    def __post_init__(self):
        if not 2 <= self.bits <= 16:
            raise ConfigurationError(f"DAC resolution must be 2..16 bits, got {self.bits}")
        if not 0 <= self.seg_bits <= self.bits:
            raise ConfigurationError(
                f"Thermometer segment must be 0..{self.bits} bits, got {self.seg_bits}"
            )
        if not self.unit_current > 0:
            raise ConfigurationError(f"Unit current must be positive, got {self.unit_current}")
        if not self.sample_rate > 0:
            raise ConfigurationError(f"Sample rate must be positive, got {self.sample_rate}")

    @property
    def code_count(self):
        return 1 << self.bits

    @property
    def max_code(self):
        return self.code_count - 1

    @property
    def mid_code(self):
        """Centre of the code range, (2^M - 1) / 2. Not an integer."""
        return self.max_code / 2.0

    @property
    def unit_cell_count(self):
        return (1 << self.seg_bits) - 1

    @property
    def binary_count(self):
        return self.bits - self.seg_bits

    @property
    def unit_weight(self):
        return 1 << self.binary_count

    @property
    def binary_weights(self):
        return np.array([1 << m for m in range(self.binary_count)], dtype=float)

    @property
    def full_scale(self):
        """Peak differential output current, (2^M - 1) * I_u."""
        return self.max_code * self.unit_current

    @property
    def sample_period(self):
        return 1.0 / self.sample_rate

    def check_codes(self, codes):
        codes = np.asarray(codes)
        if codes.size and (codes.min() < 0 or codes.max() > self.max_code):
            bad = codes[(codes < 0) | (codes > self.max_code)]
            raise CodeRangeError(
                f"Code {int(bad[0])} is outside [0, {self.max_code}] for a {self.bits}-bit DAC"
            )
        return codes.astype(np.int64)


@dataclass(frozen=True, eq=False)
class MismatchProfile:
    """Fractional errors of every current source.

    ``binary_deltas[m]`` belongs to the binary driver of weight 2^m,
    ``unit_deltas[t]`` to thermometer unit cell t in its fixed switching order.
    """

    binary_deltas: np.ndarray
    unit_deltas: np.ndarray
    sigma_u: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "binary_deltas", _readonly(self.binary_deltas))
        object.__setattr__(self, "unit_deltas", _readonly(self.unit_deltas))
        for name in ("binary_deltas", "unit_deltas"):
            values = getattr(self, name)
            if values.ndim != 1:
                raise ConfigurationError(f"{name} must be a vector")
            if not np.all(np.isfinite(values)):
                raise ConfigurationError(f"{name} contains non-finite values")
            # A source with delta <= -1 would carry zero or negative current.
            if values.size and np.max(np.abs(values)) >= 1.0:
                raise ConfigurationError(f"{name} has |delta| >= 1")

    @classmethod
    def zeros(cls, cfg: DacConfig):
        return cls(np.zeros(cfg.binary_count), np.zeros(cfg.unit_cell_count))

    @classmethod
    def uniform(cls, cfg: DacConfig, delta: float):
        """Every source off by the same fraction: a pure gain error."""
        return cls(
            np.full(cfg.binary_count, float(delta)),
            np.full(cfg.unit_cell_count, float(delta)),
        )

    def check(self, cfg: DacConfig):
        if self.binary_deltas.size != cfg.binary_count or self.unit_deltas.size != cfg.unit_cell_count:
            raise ConfigurationError(
                "Mismatch profile has {} binary and {} unit deltas, the DAC needs {} and {}".format(
                    self.binary_deltas.size,
                    self.unit_deltas.size,
                    cfg.binary_count,
                    cfg.unit_cell_count,
                )
            )
        return self

    def is_ideal(self):
        return not np.any(self.binary_deltas) and not np.any(self.unit_deltas)

    def to_dict(self):
        return {
            "sigma_u": float(self.sigma_u),
            "seed": self.seed,
            "binary_deltas": [float(value) for value in self.binary_deltas],
            "unit_deltas": [float(value) for value in self.unit_deltas],
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                binary_deltas=np.asarray(data["binary_deltas"], dtype=float),
                unit_deltas=np.asarray(data["unit_deltas"], dtype=float),
                sigma_u=float(data.get("sigma_u", 0.0)),
                seed=data.get("seed"),
            )
        except (KeyError, TypeError) as error:
            raise ConfigurationError(f"Malformed mismatch profile: {error}") from error


@dataclass(frozen=True, eq=False)
class TransferCharacteristic:
    """``outputs[x]`` is the static differential output current for code x."""

    outputs: np.ndarray
    unit_current: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "outputs", _readonly(self.outputs))

    def __len__(self):
        return self.outputs.size

    @property
    def steps(self):
        return np.diff(self.outputs)

    def normalized(self, full_scale):
        return self.outputs / full_scale


@dataclass
class DemState:
    """Randomizer of the thermometer unit cells.

    Owned by one caller at a time: every converted sample advances ``rng``.
    """

    enabled: bool = False
    seed: Optional[int] = None
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)

    @classmethod
    def disabled(cls):
        return cls(enabled=False, seed=0)

    @classmethod
    def seeded(cls, seed: int, enabled: bool = True):
        return cls(enabled=enabled, seed=seed)


@dataclass(frozen=True, eq=False)
class LinearityReport:
    """End-point referenced static linearity, in LSB of the average step."""

    inl: np.ndarray
    dnl: np.ndarray
    lsb: float
    max_jump_code: int
    max_jump_lsb: float

    @property
    def peak_inl(self):
        return float(np.max(np.abs(self.inl)))

    @property
    def peak_dnl(self):
        return float(np.max(np.abs(self.dnl)))


def decompose(code: DacCode, cfg: DacConfig) -> Tuple[int, np.ndarray]:
    """Split a code into its thermometer count and binary sign vector.

    ``binary_bits[m]`` is +1 when bit m of the code is set, -1 otherwise.
    """
    code = int(cfg.check_codes([code])[0])
    thermometer_count = code >> cfg.binary_count
    binary_bits = np.array(
        [1 if (code >> m) & 1 else -1 for m in range(cfg.binary_count)],
        dtype=np.int8,
    )
    return thermometer_count, binary_bits


def recompose(thermometer_count: int, binary_bits, cfg: DacConfig) -> DacCode:
    if not 0 <= thermometer_count <= cfg.unit_cell_count:
        raise CodeRangeError(f"Thermometer count {thermometer_count} outside [0, {cfg.unit_cell_count}]")
    lower = sum(1 << m for m, bit in enumerate(binary_bits) if bit > 0)
    return (int(thermometer_count) << cfg.binary_count) | lower


def _binary_part(codes, cfg, mm):
    # Elementwise accumulation keeps the summation order independent of the
    # number of codes, so one code and a whole record give identical floats.
    total = np.zeros(codes.shape, dtype=float)
    for m, weight in enumerate(cfg.binary_weights):
        signs = ((codes >> m) & 1) * 2 - 1
        total += weight * (1.0 + mm.binary_deltas[m]) * signs
    return total


def _unit_prefix(mm):
    return np.concatenate(([0.0], np.cumsum(1.0 + mm.unit_deltas)))


def _outputs(codes, cfg, mm):
    mm.check(cfg)
    codes = cfg.check_codes(codes)
    prefix = _unit_prefix(mm)
    counts = codes >> cfg.binary_count
    enabled = prefix[counts]
    units = cfg.unit_weight * (2.0 * enabled - prefix[-1])
    return cfg.unit_current * (_binary_part(codes, cfg, mm) + units)


def static_output(code: DacCode, cfg: DacConfig, mm: MismatchProfile) -> float:
    return float(_outputs(np.array([code]), cfg, mm)[0])


def transfer_table(cfg: DacConfig, mm: MismatchProfile) -> TransferCharacteristic:
    codes = np.arange(cfg.code_count, dtype=np.int64)
    return TransferCharacteristic(_outputs(codes, cfg, mm), unit_current=cfg.unit_current)


def ideal_table(cfg: DacConfig) -> TransferCharacteristic:
    return transfer_table(cfg, MismatchProfile.zeros(cfg))


def draw_mismatch(cfg: DacConfig, sigma_u: float, seed: int) -> MismatchProfile:
    """Random profile built from unit elements of relative spread ``sigma_u``.

    A binary driver of weight 2^m combines 2^m unit elements, so its relative
    error has standard deviation sigma_u / sqrt(2^m).
    """
    if sigma_u < 0:
        raise ArgumentError(f"sigma_u must be non-negative, got {sigma_u}")
    rng = np.random.default_rng(seed)
    unit_deltas = rng.normal(0.0, sigma_u, cfg.unit_cell_count)
    binary_sigmas = sigma_u / np.sqrt(cfg.binary_weights)
    binary_deltas = rng.normal(0.0, 1.0, cfg.binary_count) * binary_sigmas
    return MismatchProfile(
        binary_deltas=binary_deltas,
        unit_deltas=unit_deltas,
        sigma_u=float(sigma_u),
        seed=seed,
    )


def _random_subsets_sorted(counts, cell_currents, rng):
    """Sum of the first count cells of a fresh random order, whole chunks at a time."""
    cells = cell_currents.size
    enabled = np.empty(counts.shape, dtype=float)
    chunk = max(1, _DEM_CHUNK_ELEMENTS // cells)
    for start in range(0, counts.size, chunk):
        stop = min(start + chunk, counts.size)
        order = np.argsort(rng.random((stop - start, cells)), axis=1)
        shuffled = np.cumsum(cell_currents[order], axis=1)
        shuffled = np.concatenate((np.zeros((stop - start, 1)), shuffled), axis=1)
        enabled[start:stop] = shuffled[np.arange(stop - start), counts[start:stop]]
    return enabled


def _random_subsets_drawn(counts, cell_currents, total, rng):
    """Per-sample draw of the smaller of the enabled and disabled sets.

    Costs min(count, cells - count) draws per sample instead of a sort over
    every cell.
    """
    cells = cell_currents.size
    enabled = np.empty(counts.shape, dtype=float)
    for index, count in enumerate(counts.tolist()):
        drawn = min(count, cells - count)
        picked = 0.0
        if drawn:
            picked = cell_currents[rng.choice(cells, drawn, replace=False, shuffle=False)].sum()
        enabled[index] = picked if drawn == count else total - picked
    return enabled


def convert(codes, cfg: DacConfig, mm: MismatchProfile, dem: Optional[DemState] = None) -> np.ndarray:
    """Output current waveform for a code stream.

    With DEM enabled, each sample switches on a fresh uniformly random subset
    of ``thermometer_count`` unit cells; the binary part is unaffected.
    """
    codes = cfg.check_codes(codes)
    if dem is None or not dem.enabled or cfg.unit_cell_count <= 1:
        return _outputs(codes, cfg, mm)

    mm.check(cfg)
    cell_currents = 1.0 + mm.unit_deltas
    total = _unit_prefix(mm)[-1]
    counts = codes >> cfg.binary_count
    if cfg.unit_cell_count <= _DEM_SORTED_CELLS:
        enabled = _random_subsets_sorted(counts, cell_currents, dem.rng)
    else:
        enabled = _random_subsets_drawn(counts, cell_currents, total, dem.rng)

    units = cfg.unit_weight * (2.0 * enabled - total)
    return cfg.unit_current * (_binary_part(codes, cfg, mm) + units)


def static_linearity(table: TransferCharacteristic) -> LinearityReport:
    outputs = table.outputs
    if outputs.size < 2:
        raise ArgumentError("A transfer characteristic needs at least two codes")
    lsb = (outputs[-1] - outputs[0]) / (outputs.size - 1)
    if lsb == 0:
        raise ArgumentError("Transfer characteristic has zero end-point span")
    steps = np.diff(outputs)
    dnl = steps / lsb - 1.0
    inl = (outputs - (outputs[0] + lsb * np.arange(outputs.size))) / lsb
    jump = int(np.argmax(np.abs(dnl)))
    return LinearityReport(
        inl=_readonly(inl),
        dnl=_readonly(dnl),
        lsb=float(lsb),
        max_jump_code=jump,
        max_jump_lsb=float(steps[jump] / lsb),
    )
