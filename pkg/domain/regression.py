"""Identification of the memoryless transfer estimate F(x; theta).

Two regressors share one input normalization, code -> [-1, 1]:

- a single-hidden-layer ReLU perceptron, y = w1 . max(0, w0 x + b0) + b1,
  trained on the mean squared error with Adam;
- a polynomial baseline fitted by least squares on a Vandermonde matrix,
  solved through a QR factorization.

Outputs are in the normalized ADC units of the capture, so no output scaling
is applied.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P
from scipy.linalg import solve_triangular

from .errors import ArgumentError, ConfigurationError, FittingError, TrainingError

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN = 271
DEFAULT_POLY_DEGREE = 15

#: Rows per chunk when evaluating a network on a long record.
_EVAL_CHUNK = 8192
#: A diagonal entry of R this far below the largest marks a rank-deficient fit.
_RANK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class NormalizationMap:
    """code -> (code - (2^M - 1)/2) / ((2^M - 1)/2)."""

    bits: int

    @property
    def center(self):
        return ((1 << self.bits) - 1) / 2.0

    @property
    def scale(self):
        return self.center

    def __call__(self, codes):
        return (np.asarray(codes, dtype=float) - self.center) / self.scale

    def to_dict(self):
        return {"bits": self.bits, "center": self.center, "scale": self.scale, "output": "adc-normalized"}

    @classmethod
    def from_dict(cls, data):
        return cls(bits=int(data["bits"]))


def _vector(values, name):
    array = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(array)):
        raise ArgumentError(f"{name} contains non-finite values")
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class MlpParams:
    w0: np.ndarray
    b0: np.ndarray
    w1: np.ndarray
    b1: float
    norm: Optional[NormalizationMap] = None

    def __post_init__(self):
        for name in ("w0", "b0", "w1"):
            object.__setattr__(self, name, _vector(getattr(self, name), name))
        object.__setattr__(self, "b1", float(self.b1))
        if not math.isfinite(self.b1):
            raise ArgumentError("b1 is not finite")
        if self.w0.size < 1 or not self.w0.size == self.b0.size == self.w1.size:
            raise ArgumentError("w0, b0 and w1 must share one hidden width >= 1")

    @property
    def H(self):
        return self.w0.size

    @classmethod
    def zeros(cls, hidden: int, norm: Optional[NormalizationMap] = None):
        return cls(np.zeros(hidden), np.zeros(hidden), np.zeros(hidden), 0.0, norm)

    @classmethod
    def initialize(cls, hidden: int, rng: np.random.Generator, norm: Optional[NormalizationMap] = None):
        """Glorot-uniform weights, zero biases."""
        limit = math.sqrt(6.0 / (1 + hidden))
        w0 = rng.uniform(-limit, limit, hidden)
        w1 = rng.uniform(-limit, limit, hidden)
        return cls(w0, np.zeros(hidden), w1, 0.0, norm)

    def as_vector(self):
        return np.concatenate((self.w0, self.b0, self.w1, [self.b1]))

    @classmethod
    def from_vector(cls, vector, hidden: int, norm: Optional[NormalizationMap] = None):
        vector = np.asarray(vector, dtype=float)
        return cls(
            vector[:hidden],
            vector[hidden:2 * hidden],
            vector[2 * hidden:3 * hidden],
            vector[3 * hidden],
            norm,
        )

    def to_dict(self):
        return {
            "type": "mlp",
            "H": self.H,
            "w0": self.w0.tolist(),
            "b0": self.b0.tolist(),
            "w1": self.w1.tolist(),
            "b1": self.b1,
            "norm": None if self.norm is None else self.norm.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class PolyModel:
    """Polynomial in the normalized input, coefficients in ascending power."""

    coeffs: np.ndarray
    norm: NormalizationMap

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _vector(self.coeffs, "coeffs"))
        if self.coeffs.size < 1:
            raise ArgumentError("A polynomial needs at least one coefficient")

    @property
    def degree(self):
        return self.coeffs.size - 1

    def code_coefficients(self):
        """Coefficients of the same polynomial written in raw code units."""
        in_codes = Polynomial(self.coeffs)(Polynomial([-self.norm.center / self.norm.scale, 1.0 / self.norm.scale]))
        coefficients = np.zeros(self.coeffs.size)
        coefficients[:in_codes.coef.size] = in_codes.coef
        return coefficients

    def to_dict(self):
        return {
            "type": "poly",
            "degree": self.degree,
            "coeffs": self.coeffs.tolist(),
            "norm": self.norm.to_dict(),
        }


Model = Union[MlpParams, PolyModel]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 256
    epochs: int = 500
    seed: int = 0
    hidden: int = DEFAULT_HIDDEN

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigurationError(f"Learning rate must be positive, got {self.lr}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError(f"Adam betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if self.batch_size < 1 or self.epochs < 1 or self.hidden < 1:
            raise ConfigurationError("batch_size, epochs and hidden must all be >= 1")


@dataclass(frozen=True, eq=False)
class Batch:
    """Normalized inputs and their targets."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float).reshape(-1)
        targets = np.array(self.targets, dtype=float).reshape(-1)
        if inputs.shape != targets.shape:
            raise ArgumentError("Batch inputs and targets differ in length")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return self.inputs.size

    @classmethod
    def from_dataset(cls, dataset):
        return cls(NormalizationMap(dataset.bits)(dataset.x), dataset.y)


@dataclass(frozen=True)
class TrainingResult:
    params: MlpParams
    #: Entry 0 is the loss at initialization, entry e the mean mini-batch loss of epoch e.
    loss_history: Tuple[float, ...]

    @property
    def initial_loss(self):
        return self.loss_history[0]

    @property
    def final_loss(self):
        return self.loss_history[-1]


@dataclass(frozen=True)
class FitReport:
    mse: float
    distinct_codes: int
    max_abs_residual: float
    max_residual_code: int

    def to_dict(self):
        return {
            "mse": self.mse,
            "distinct_codes": self.distinct_codes,
            "max_abs_residual": self.max_abs_residual,
            "max_residual_code": self.max_residual_code,
        }


def relu(values):
    return np.maximum(0.0, values)


def mlp_forward(x, params: MlpParams):
    """Network output for normalized input(s) ``x``."""
    scalar = np.ndim(x) == 0
    inputs = np.atleast_1d(np.asarray(x, dtype=float))
    outputs = np.empty(inputs.size)
    for start in range(0, inputs.size, _EVAL_CHUNK):
        chunk = inputs[start:start + _EVAL_CHUNK]
        hidden = relu(np.multiply.outer(chunk, params.w0) + params.b0)
        outputs[start:start + _EVAL_CHUNK] = hidden @ params.w1 + params.b1
    return float(outputs[0]) if scalar else outputs


def _predict_normalized(model: Model, inputs):
    if isinstance(model, PolyModel):
        return P.polyval(inputs, model.coeffs)
    return mlp_forward(inputs, model)


def model_eval(model: Model, code):
    """F(code; theta) in normalized output units, for one code or an array."""
    norm = model.norm
    if norm is None:
        raise ArgumentError("Model carries no input normalization")
    scalar = np.ndim(code) == 0
    values = _predict_normalized(model, norm(np.atleast_1d(code)))
    return float(values[0]) if scalar else np.asarray(values)


def _as_batch(data):
    if isinstance(data, Batch):
        return data
    return Batch.from_dataset(data)


def mse_loss(model: Model, data) -> float:
    """Mean squared residual over a Dataset or a Batch of normalized inputs."""
    batch = _as_batch(data)
    if len(batch) == 0:
        raise ArgumentError("Cannot compute a loss over an empty dataset")
    residuals = _predict_normalized(model, batch.inputs) - batch.targets
    return float(np.mean(residuals * residuals))


def mlp_gradient(params: MlpParams, batch: Batch) -> MlpParams:
    """Exact gradient of the batch MSE. The ReLU subgradient at 0 is 0."""
    if len(batch) == 0:
        raise ArgumentError("Cannot differentiate over an empty batch")
    inputs = batch.inputs
    pre = np.multiply.outer(inputs, params.w0) + params.b0
    active = pre > 0
    hidden = np.where(active, pre, 0.0)
    residuals = hidden @ params.w1 + params.b1 - batch.targets
    weights = 2.0 * residuals / inputs.size
    grad_hidden = np.multiply.outer(weights, params.w1) * active
    return MlpParams(
        w0=inputs @ grad_hidden,
        b0=grad_hidden.sum(axis=0),
        w1=weights @ hidden,
        b1=float(weights.sum()),
    )


class AdamState:
    """Bias-corrected first and second moment estimates over a flat vector."""

    def __init__(self, size: int, cfg: TrainConfig):
        self.cfg = cfg
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, vector, gradient):
        cfg = self.cfg
        self.t += 1
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * gradient
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * gradient * gradient
        m_hat = self.m / (1.0 - cfg.beta1 ** self.t)
        v_hat = self.v / (1.0 - cfg.beta2 ** self.t)
        return vector - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def train_mlp(dataset, cfg: TrainConfig) -> TrainingResult:
    """Fit the perceptron with shuffled mini-batch Adam.

    One seeded generator draws the initial weights and then every epoch's
    permutation, so equal data and config give bitwise equal results.
    Duplicating every row leaves the loss surface unchanged but doubles the
    number of mini-batches, and therefore Adam steps, per epoch.
    """
    batch = _as_batch(dataset)
    count = len(batch)
    if count < cfg.batch_size:
        raise ArgumentError(f"Dataset has {count} rows, fewer than the batch size {cfg.batch_size}")
    norm = NormalizationMap(dataset.bits) if hasattr(dataset, "bits") else None

    rng = np.random.default_rng(cfg.seed)
    params = MlpParams.initialize(cfg.hidden, rng)
    vector = params.as_vector()
    adam = AdamState(vector.size, cfg)
    history: List[float] = [mse_loss(params, batch)]

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(count)
        weighted_loss = 0.0
        for start in range(0, count, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            mini = Batch(batch.inputs[rows], batch.targets[rows])
            params = MlpParams.from_vector(vector, cfg.hidden)
            residuals = mlp_forward(mini.inputs, params) - mini.targets
            weighted_loss += float(np.sum(residuals * residuals))
            gradient = mlp_gradient(params, mini).as_vector()
            vector = adam.step(vector, gradient)
            if not np.all(np.isfinite(vector)):
                raise TrainingError(f"Training diverged at epoch {epoch}: non-finite weights", epoch=epoch)
        loss = weighted_loss / count
        if not math.isfinite(loss):
            raise TrainingError(f"Training diverged at epoch {epoch}: loss is {loss}", epoch=epoch)
        history.append(loss)
        if epoch % 50 == 0:
            logger.debug("Epoch %d: training loss %.3e", epoch, loss)

    params = MlpParams.from_vector(vector, cfg.hidden, norm)
    logger.info("Trained %d hidden units for %d epochs: loss %.3e -> %.3e",
                cfg.hidden, cfg.epochs, history[0], history[-1])
    return TrainingResult(params=params, loss_history=tuple(history))


def vandermonde(inputs, degree: int):
    return P.polyvander(np.asarray(inputs, dtype=float), degree)


def fit_polynomial(dataset, degree: int = DEFAULT_POLY_DEGREE) -> PolyModel:
    """Least-squares polynomial on the normalized codes, solved by QR."""
    if degree < 0:
        raise ArgumentError(f"Polynomial degree must be >= 0, got {degree}")
    norm = NormalizationMap(dataset.bits)
    inputs = norm(dataset.x)
    if np.unique(inputs).size < degree + 1:
        raise FittingError(
            f"Degree {degree} needs {degree + 1} distinct codes, the dataset has {np.unique(inputs).size}"
        )
    q, r = np.linalg.qr(vandermonde(inputs, degree))
    diagonal = np.abs(np.diag(r))
    if diagonal.min() <= _RANK_TOLERANCE * diagonal.max():
        raise FittingError(f"Vandermonde matrix of degree {degree} is rank deficient")
    coeffs = solve_triangular(r, q.T @ dataset.y)
    return PolyModel(coeffs=coeffs, norm=norm)


def model_from_dict(data) -> Model:
    try:
        kind = data["type"]
        norm = None if data.get("norm") is None else NormalizationMap.from_dict(data["norm"])
        if kind == "mlp":
            return MlpParams(data["w0"], data["b0"], data["w1"], data["b1"], norm)
        if kind == "poly":
            model = PolyModel(coeffs=data["coeffs"], norm=norm)
            if model.degree != int(data.get("degree", model.degree)):
                raise ConfigurationError("Polynomial degree does not match its coefficient count")
            return model
    except (KeyError, TypeError, ValueError) as error:
        if isinstance(error, ConfigurationError):
            raise
        raise ConfigurationError(f"Malformed model file: {error}") from error
    raise ConfigurationError(f"Unknown model type '{kind}'")


def fit_report(model: Model, dataset) -> FitReport:
    residuals = model_eval(model, dataset.x) - dataset.y
    worst = int(np.argmax(np.abs(residuals)))
    return FitReport(
        mse=float(np.mean(residuals * residuals)),
        distinct_codes=dataset.distinct_codes(),
        max_abs_residual=float(abs(residuals[worst])),
        max_residual_code=int(dataset.x[worst]),
    )
