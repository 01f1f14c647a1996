from .exporters import (
    DatasetCsvWriter,
    JsonWriter,
    LossCsvWriter,
    LutCsvWriter,
    SpectrumCsvWriter,
    StimulusCsvWriter,
    SweepCsvWriter,
    TransferCsvWriter,
    atomic_open,
    read_dataset,
    read_json,
    read_lut,
    read_mismatch,
    read_model,
)

__all__ = [
    "DatasetCsvWriter",
    "JsonWriter",
    "LossCsvWriter",
    "LutCsvWriter",
    "SpectrumCsvWriter",
    "StimulusCsvWriter",
    "SweepCsvWriter",
    "TransferCsvWriter",
    "atomic_open",
    "read_dataset",
    "read_json",
    "read_lut",
    "read_mismatch",
    "read_model",
]
