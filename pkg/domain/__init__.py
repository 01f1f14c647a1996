from .capture import AdcConfig, BiquadChain, Dataset, MeasurementPathConfig
from .converter import DacConfig, DemState, LinearityReport, MismatchProfile, TransferCharacteristic
from .errors import (
    AmbiguityError,
    ArgumentError,
    CodeRangeError,
    ConfigurationError,
    DacLinError,
    DegenerateEstimateError,
    DesignError,
    FittingError,
    NumericalError,
    TrainingError,
)
from .predistortion import LinearTarget, Lut, TransferEstimate
from .regression import FitReport, MlpParams, NormalizationMap, PolyModel, TrainConfig, TrainingResult
from .spectrum import ImReport, Spectrum
from .stimulus import CodeSequence, StimulusPlan, ToneSpec

__all__ = [
    "AdcConfig",
    "AmbiguityError",
    "ArgumentError",
    "BiquadChain",
    "CodeRangeError",
    "CodeSequence",
    "ConfigurationError",
    "DacConfig",
    "DacLinError",
    "Dataset",
    "DegenerateEstimateError",
    "DemState",
    "DesignError",
    "FitReport",
    "FittingError",
    "ImReport",
    "LinearTarget",
    "LinearityReport",
    "Lut",
    "MeasurementPathConfig",
    "MismatchProfile",
    "MlpParams",
    "NormalizationMap",
    "NumericalError",
    "PolyModel",
    "Spectrum",
    "StimulusPlan",
    "ToneSpec",
    "TrainConfig",
    "TrainingError",
    "TrainingResult",
    "TransferCharacteristic",
    "TransferEstimate",
]
