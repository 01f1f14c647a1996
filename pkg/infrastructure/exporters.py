import contextlib
import csv
import json
import os
import tempfile

from ..domain.capture import Dataset
from ..domain.converter import MismatchProfile
from ..domain.errors import ConfigurationError
from ..domain.predistortion import Lut
from ..domain.regression import model_from_dict

#: Float format of CSV cells; 17 significant digits round-trip a double exactly.
FLOAT_FORMAT = "%.17g"

SWEEP_COLUMNS = [
    "tone_dbfs",
    "center_hz",
    "im3_dbc",
    "im5_dbc",
    "im7_dbc",
    "sfdr_dbc",
    "noise_floor_dbfs_per_bin",
    "delta_im3_db",
    "delta_im5_db",
    "delta_im7_db",
]


def _number(value):
    if value is None:
        return ""
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return FLOAT_FORMAT % float(value)


@contextlib.contextmanager
def atomic_open(filename, newline=None):
    """Write to a temporary file next to ``filename`` and move it in place on success."""
    directory = os.path.dirname(os.path.abspath(filename))
    os.makedirs(directory, exist_ok=True)
    handle, temp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline=newline) as file:
            yield file
        os.replace(temp_path, filename)
    except BaseException:
        with contextlib.suppress(OSError):
            os.remove(temp_path)
        raise


def dump_json(payload):
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


class JsonWriter:
    def write(self, filename, payload):
        with atomic_open(filename) as file:
            file.write(dump_json(payload))


class _CsvWriter:
    header = ()

    def rows(self, payload):
        raise NotImplementedError

    def write(self, filename, payload):
        with atomic_open(filename, newline="") as file:
            writer = csv.writer(file, delimiter=",", lineterminator="\n")
            writer.writerow(self.header)
            writer.writerows(self.rows(payload))


class TransferCsvWriter(_CsvWriter):
    header = ("code", "current")

    def rows(self, table):
        for code, current in enumerate(table.outputs):
            yield code, _number(current)


class StimulusCsvWriter(_CsvWriter):
    header = ("n", "code")

    def rows(self, sequence):
        for n, code in enumerate(sequence.codes):
            yield n, int(code)


class LossCsvWriter(_CsvWriter):
    header = ("epoch", "loss")

    def rows(self, history):
        for epoch, loss in enumerate(history):
            yield epoch, _number(loss)


class LutCsvWriter(_CsvWriter):
    header = ("code", "predistorted_code")

    def rows(self, lut):
        for code, entry in enumerate(lut.entries):
            yield code, int(entry)


class SpectrumCsvWriter(_CsvWriter):
    header = ("freq_hz", "power_dbfs")

    def rows(self, spectrum):
        for freq, power in zip(spectrum.freqs_hz, spectrum.power_dbfs):
            yield _number(freq), _number(power)


class SweepCsvWriter(_CsvWriter):
    """One row per (tone level, center frequency) of a single scenario.

    The ``delta_*`` columns are the improvement over the baseline scenario at
    the same point, positive when the scenario lowers the product.
    """

    header = tuple(SWEEP_COLUMNS)

    def rows(self, points):
        for point in points:
            yield [_number(point.get(column)) for column in SWEEP_COLUMNS]


class DatasetCsvWriter(_CsvWriter):
    """``n,x,y`` rows plus a ``<name>.meta.json`` sidecar holding the metadata."""

    header = ("n", "x", "y")

    def rows(self, dataset):
        for n, (x, y) in enumerate(zip(dataset.x, dataset.y)):
            yield n, int(x), _number(y)

    def write(self, filename, dataset):
        super().write(filename, dataset)
        JsonWriter().write(metadata_path(filename), {"bits": dataset.bits, "metadata": dataset.metadata})


def metadata_path(filename):
    return os.path.splitext(filename)[0] + ".meta.json"


def read_json(filename):
    try:
        with open(filename, "r", encoding="utf-8") as file:
            return json.load(file)
    except json.JSONDecodeError as error:
        raise ConfigurationError(f"{filename} is not valid JSON: {error}") from error


def read_model(filename):
    return model_from_dict(read_json(filename))


def read_mismatch(filename) -> MismatchProfile:
    return MismatchProfile.from_dict(read_json(filename))


def read_lut(filename) -> Lut:
    """LUT from its JSON form, or from the ``code,predistorted_code`` CSV."""
    if not filename.lower().endswith(".csv"):
        return Lut.from_dict(read_json(filename))
    with open(filename, "r", newline="", encoding="utf-8") as file:
        reader = csv.DictReader(file)
        if reader.fieldnames != ["code", "predistorted_code"]:
            raise ConfigurationError(f"{filename} is not a LUT CSV file")
        rows = sorted((int(row["code"]), int(row["predistorted_code"])) for row in reader)
    entries = [entry for _code, entry in rows]
    if [code for code, _entry in rows] != list(range(len(rows))):
        raise ConfigurationError(f"{filename} does not list every code exactly once")
    bits = max(len(entries), 1).bit_length() - 1
    return Lut(entries, bits)


def read_dataset(filename) -> Dataset:
    sidecar = read_json(metadata_path(filename))
    xs, ys = [], []
    with open(filename, "r", newline="", encoding="utf-8") as file:
        for row in csv.DictReader(file):
            xs.append(int(row["x"]))
            ys.append(float(row["y"]))
    return Dataset(xs, ys, bits=int(sidecar["bits"]), metadata=sidecar["metadata"])
