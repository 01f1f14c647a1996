import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..domain.capture import Dataset, average_per_code, capture, design_butterworth, filter_periodic
from ..domain.converter import DemState, LinearityReport, MismatchProfile, TransferCharacteristic, convert, static_linearity, transfer_table
from ..domain.errors import ConfigurationError, DacLinError
from ..domain.predistortion import LinearTarget, Lut, TransferEstimate, apply_lut, build_lut, fit_linear_target, oracle_lut, tabulate
from ..domain.regression import FitReport, fit_polynomial, fit_report, train_mlp
from ..domain.spectrum import IM_ORDERS, ImReport, Spectrum, measure, power_spectrum
from ..domain.stimulus import CodeSequence, StimulusPlan, coverage, gen_codes, ident_stimulus, two_tone_plan
from .config import RunConfig

logger = logging.getLogger(__name__)

MODEL_KINDS = ("mlp", "poly")
SCENARIOS = ("baseline", "dem", "poly_dpd", "nn_dpd", "oracle_dpd")


@dataclass(frozen=True)
class ExportResult:
    ok: bool
    filename: Optional[str]
    message: str


@dataclass(frozen=True)
class SimulationResult:
    mismatch: MismatchProfile
    table: TransferCharacteristic
    linearity: LinearityReport


@dataclass(frozen=True)
class IdentificationResult:
    kind: str
    model: object
    dataset: Dataset
    report: FitReport
    stimulus: CodeSequence
    uncovered_codes: Tuple[int, ...] = ()
    loss_history: Tuple[float, ...] = ()

    def summary(self):
        summary = self.report.to_dict()
        summary["model"] = self.kind
        summary["uncovered_codes"] = list(self.uncovered_codes)
        if self.loss_history:
            summary["initial_loss"] = self.loss_history[0]
            summary["final_loss"] = self.loss_history[-1]
        return summary


@dataclass(frozen=True)
class LutResult:
    estimate: TransferEstimate
    target: LinearTarget
    lut: Lut

    @property
    def identity_deviations(self):
        return self.lut.deviation_count()

    def summary(self):
        return {
            "source": self.estimate.source,
            "gain": self.target.gain,
            "offset": self.target.offset,
            "residual_rms": self.target.residual_rms,
            "identity_deviations": self.identity_deviations,
        }


@dataclass(frozen=True)
class EvaluationResult:
    plan: StimulusPlan
    spectrum: Spectrum
    report: ImReport
    clipped_samples: int = 0


@dataclass
class ComparisonReport:
    """Sweep results per scenario and tone level, in center-frequency order."""

    centers_hz: Tuple[float, ...]
    tone_levels_dbfs: Tuple[float, ...]
    points: Dict[str, Dict[float, List[ImReport]]] = field(default_factory=dict)

    def add(self, scenario: str, tone_dbfs: float, report: ImReport):
        self.points.setdefault(scenario, {}).setdefault(tone_dbfs, []).append(report)

    def improvement(self, scenario: str, tone_dbfs: float, index: int, order: int):
        """Baseline IM level minus scenario IM level, in dB; positive is better."""
        baseline = self.points["baseline"][tone_dbfs][index].im_dbc(order)
        level = self.points[scenario][tone_dbfs][index].im_dbc(order)
        if baseline is None or level is None:
            return None
        return baseline - level

    def rows(self, scenario: str):
        rows = []
        for tone_dbfs, reports in self.points.get(scenario, {}).items():
            for index, report in enumerate(reports):
                row = {
                    "tone_dbfs": tone_dbfs,
                    "center_hz": self.centers_hz[index],
                    "sfdr_dbc": report.sfdr_dbc,
                    "noise_floor_dbfs_per_bin": report.noise_floor_dbfs_per_bin,
                }
                for order in IM_ORDERS:
                    row[f"im{order}_dbc"] = report.im_dbc(order)
                    if "baseline" in self.points and len(self.points["baseline"].get(tone_dbfs, ())) > index:
                        row[f"delta_im{order}_db"] = self.improvement(scenario, tone_dbfs, index, order)
                rows.append(row)
        return rows

    def to_dict(self):
        return {
            "note": "Simulation of static mismatch only; without dynamic error models "
                    "the improvement does not roll off with frequency as measured hardware does.",
            "centers_hz": list(self.centers_hz),
            "tone_levels_dbfs": list(self.tone_levels_dbfs),
            "scenarios": {scenario: self.rows(scenario) for scenario in self.points},
        }


class LinearizationService:
    """Pipeline steps of the simulator with the writers injected as ports."""

    def __init__(self, config: RunConfig, json_writer=None, transfer_writer=None,
                 dataset_writer=None, loss_writer=None, lut_writer=None,
                 spectrum_writer=None, stimulus_writer=None, sweep_writer=None):
        self.config = config.validate()
        self.json_writer = json_writer
        self.transfer_writer = transfer_writer
        self.dataset_writer = dataset_writer
        self.loss_writer = loss_writer
        self.lut_writer = lut_writer
        self.spectrum_writer = spectrum_writer
        self.stimulus_writer = stimulus_writer
        self.sweep_writer = sweep_writer
        self._mismatch = None

    @property
    def mismatch(self) -> MismatchProfile:
        if self._mismatch is None:
            self._mismatch = self.config.dac.mismatch()
        return self._mismatch

    # Pipeline steps

    def simulate(self) -> SimulationResult:
        dac = self.config.dac_config()
        table = transfer_table(dac, self.mismatch.check(dac))
        linearity = static_linearity(table)
        logger.info(
            "Simulated %d-bit DAC: peak INL %.3f LSB, peak DNL %.3f LSB, largest step at code %d.",
            dac.bits, linearity.peak_inl, linearity.peak_dnl, linearity.max_jump_code,
        )
        return SimulationResult(mismatch=self.mismatch, table=table, linearity=linearity)

    def capture_identification(self) -> Tuple[CodeSequence, Dataset, np.ndarray]:
        cfg = self.config
        dac = cfg.dac_config()
        ident = cfg.ident
        stimulus = ident_stimulus(dac.sample_rate, ident.n_samples, dac.bits, ident.amplitude_dbfs, ident.freq_hz)
        distinct, unseen = coverage(stimulus.codes, dac.bits)
        if unseen.size:
            logger.warning(
                "Identification stimulus exercises %d of %d codes; %d codes between %d and %d rely on extrapolation.",
                distinct, dac.code_count, unseen.size, int(unseen[0]), int(unseen[-1]),
            )
        dataset = capture(
            stimulus.codes, dac, self.mismatch, cfg.path_config(), cfg.adc_config(),
            noise_seed=cfg.adc.seed, warmup=ident.warmup, repeats=ident.averages,
            description=stimulus.description,
        )
        if ident.per_code_mean or ident.averages > 1:
            dataset = average_per_code(dataset)
        return stimulus, dataset, unseen

    def identify(self, kind: str = "mlp") -> IdentificationResult:
        if kind not in MODEL_KINDS:
            raise ConfigurationError(f"Unknown model '{kind}', expected one of {MODEL_KINDS}")
        stimulus, dataset, unseen = self.capture_identification()
        history = ()
        if kind == "mlp":
            training = train_mlp(dataset, self.config.train.train_config())
            model, history = training.params, training.loss_history
        else:
            model = fit_polynomial(dataset, self.config.train.poly_degree)
        report = fit_report(model, dataset)
        logger.info(
            "Identified %s model on %d distinct codes: MSE %.3e, worst residual %.3e at code %d.",
            kind, report.distinct_codes, report.mse, report.max_abs_residual, report.max_residual_code,
        )
        return IdentificationResult(
            kind=kind,
            model=model,
            dataset=dataset,
            report=report,
            stimulus=stimulus,
            uncovered_codes=tuple(int(code) for code in unseen),
            loss_history=tuple(history),
        )

    def build_lut(self, model) -> LutResult:
        estimate = tabulate(model)
        if estimate.bits != self.config.dac.bits:
            raise ConfigurationError(
                f"Model covers {estimate.bits}-bit codes but the DAC has {self.config.dac.bits} bits"
            )
        target = fit_linear_target(estimate)
        lut = build_lut(estimate, target)
        logger.info("LUT built from %s model: %d entries differ from identity.", estimate.source, lut.deviation_count())
        return LutResult(estimate=estimate, target=target, lut=lut)

    def oracle_lut(self) -> Lut:
        return oracle_lut(self.config.dac_config(), self.mismatch)

    def evaluate(self, lut: Optional[Lut] = None, dem: bool = False, center_hz: Optional[float] = None,
                 tone_dbfs: Optional[float] = None) -> EvaluationResult:
        """Two tones through the optional LUT, the DAC and the measurement path."""
        cfg = self.config
        dac = cfg.dac_config()
        if lut is not None and lut.bits != dac.bits:
            raise ConfigurationError(f"LUT has {lut.bits} bits but the DAC has {dac.bits}")
        plan = two_tone_plan(
            cfg.eval.center_hz if center_hz is None else center_hz,
            cfg.eval.spacing_hz,
            cfg.eval.tone_dbfs if tone_dbfs is None else tone_dbfs,
            dac.sample_rate,
            cfg.eval.n_samples,
        )
        sequence = gen_codes(plan, dac.bits)
        codes = sequence.codes if lut is None else apply_lut(lut, sequence.codes)
        randomizer = DemState.seeded(cfg.eval.dem_seed) if dem else None
        waveform = convert(codes, dac, self.mismatch, randomizer)
        filtered = filter_periodic(design_butterworth(cfg.path_config()), waveform)
        spectrum = power_spectrum(filtered, dac.sample_rate, cfg.eval.window, dac.full_scale)
        report = measure(spectrum, plan)
        return EvaluationResult(plan=plan, spectrum=spectrum, report=report, clipped_samples=sequence.clipped_samples)

    def scenario_luts(self, nn_lut: Lut, poly_lut: Lut) -> Dict[str, Tuple[Optional[Lut], bool]]:
        return {
            "baseline": (None, False),
            "dem": (None, True),
            "poly_dpd": (poly_lut, False),
            "nn_dpd": (nn_lut, False),
            "oracle_dpd": (self.oracle_lut(), False),
        }

    def sweep(self, nn_lut: Lut, poly_lut: Lut, manifest_filename: Optional[str] = None) -> ComparisonReport:
        """Every scenario at every center frequency and tone level.

        All scenarios share the mismatch profile and the stimuli. If a point
        fails, the points finished so far go to ``manifest_filename`` before
        the error propagates.
        """
        cfg = self.config.eval
        report = ComparisonReport(centers_hz=tuple(cfg.sweep_centers_hz), tone_levels_dbfs=tuple(cfg.sweep_tone_dbfs))
        scenarios = self.scenario_luts(nn_lut, poly_lut)
        current = None
        try:
            for scenario in SCENARIOS:
                lut, dem = scenarios[scenario]
                for tone_dbfs in cfg.sweep_tone_dbfs:
                    for center_hz in cfg.sweep_centers_hz:
                        current = {"scenario": scenario, "tone_dbfs": tone_dbfs, "center_hz": center_hz}
                        result = self.evaluate(lut=lut, dem=dem, center_hz=center_hz, tone_dbfs=tone_dbfs)
                        report.add(scenario, tone_dbfs, result.report)
                logger.info("Sweep scenario %s done.", scenario)
        except DacLinError as error:
            logger.error("Sweep failed at %s: %s", current, error)
            if manifest_filename:
                partial = report.to_dict()
                partial.update({"complete": False, "failed_at": current, "error": str(error)})
                self.export_json(partial, manifest_filename, "Partial sweep manifest")
            raise
        self._check_oracle(report)
        return report

    def _check_oracle(self, report: ComparisonReport):
        for tone_dbfs in report.tone_levels_dbfs:
            for index, center_hz in enumerate(report.centers_hz):
                oracle = report.improvement("oracle_dpd", tone_dbfs, index, 3)
                nn = report.improvement("nn_dpd", tone_dbfs, index, 3)
                if oracle is not None and nn is not None and oracle < nn:
                    logger.warning(
                        "NN pre-distortion beats the oracle LUT on IM3 at %.3g Hz, %.1f dBFS (%.2f vs %.2f dB).",
                        center_hz, tone_dbfs, nn, oracle,
                    )

    # Exports

    def with_provenance(self, payload):
        document = dict(payload)
        document.update(self.config.provenance())
        return document

    def export_json(self, payload, filename: str, label: str) -> ExportResult:
        return self._write(self.json_writer, self.with_provenance(payload), filename, label)

    def export_config(self, filename: str) -> ExportResult:
        return self.export_json({}, filename, "Configuration echo")

    def export_mismatch(self, mismatch: MismatchProfile, filename: str) -> ExportResult:
        return self.export_json(mismatch.to_dict(), filename, "Mismatch profile")

    def export_transfer(self, table: TransferCharacteristic, filename: str) -> ExportResult:
        return self._write(self.transfer_writer, table, filename, "Transfer characteristic")

    def export_dataset(self, dataset: Dataset, filename: str) -> ExportResult:
        return self._write(self.dataset_writer, dataset, filename, "Identification dataset")

    def export_model(self, model, filename: str) -> ExportResult:
        return self.export_json(model.to_dict(), filename, "Model")

    def export_loss(self, history, filename: str) -> ExportResult:
        return self._write(self.loss_writer, history, filename, "Loss history")

    def export_lut(self, lut: Lut, filename: str) -> ExportResult:
        if filename.lower().endswith(".csv"):
            return self._write(self.lut_writer, lut, filename, "LUT")
        return self.export_json(lut.to_dict(), filename, "LUT")

    def export_spectrum(self, spectrum: Spectrum, filename: str) -> ExportResult:
        return self._write(self.spectrum_writer, spectrum, filename, "Spectrum")

    def export_stimulus(self, sequence: CodeSequence, filename: str) -> ExportResult:
        return self._write(self.stimulus_writer, sequence, filename, "Stimulus")

    def export_sweep(self, report: ComparisonReport, directory: str) -> List[ExportResult]:
        results = [self.export_json(report.to_dict(), os.path.join(directory, "sweep.json"), "Sweep report")]
        for scenario in report.points:
            filename = os.path.join(directory, f"sweep_{scenario}.csv")
            results.append(self._write(self.sweep_writer, report.rows(scenario), filename, f"Sweep {scenario}"))
        return results

    def _write(self, writer, payload, filename: str, label: str) -> ExportResult:
        if writer is None:
            return ExportResult(False, filename, f"{label} writer is not configured.")
        try:
            writer.write(filename, payload)
            logger.info("%s exported to %s", label, filename)
            return ExportResult(True, filename, f"{label} exported to {filename}.")
        except Exception as e:
            logger.error("Failed to export %s to %s: %s", label, filename, e)
            return ExportResult(False, filename, f"Failed to export {label.lower()}: {e}")
