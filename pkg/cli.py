"""Command line front end.

::

    daclin simulate --seed 42
    daclin identify --model mlp
    daclin build-lut --model mlp
    daclin evaluate --lut daclin-out/lut_mlp.json
    daclin sweep

Every command reads the same JSON configuration (``--config``), writes into
``--out`` (default ``$DACLIN_OUT`` or ``./daclin-out``) and echoes the
effective configuration with its digest into every JSON artifact.

Exit codes: 0 success, 1 a file could not be written, 2 configuration error,
3 numerical failure.
"""

import argparse
import logging
import os
import sys

from . import __version__
from .application.config import load_config, with_overrides
from .application.services import MODEL_KINDS, LinearizationService
from .domain.errors import ConfigurationError, NumericalError
from .infrastructure.exporters import (
    DatasetCsvWriter,
    JsonWriter,
    LossCsvWriter,
    LutCsvWriter,
    SpectrumCsvWriter,
    StimulusCsvWriter,
    SweepCsvWriter,
    TransferCsvWriter,
    read_lut,
    read_model,
)
from .visualization import Visualizer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_service(config) -> LinearizationService:
    return LinearizationService(
        config,
        json_writer=JsonWriter(),
        transfer_writer=TransferCsvWriter(),
        dataset_writer=DatasetCsvWriter(),
        loss_writer=LossCsvWriter(),
        lut_writer=LutCsvWriter(),
        spectrum_writer=SpectrumCsvWriter(),
        stimulus_writer=StimulusCsvWriter(),
        sweep_writer=SweepCsvWriter(),
    )


def _out(config, name):
    return os.path.join(config.out_dir, name)


def _status(results):
    failed = [result for result in results if not result.ok]
    for result in failed:
        print(result.message, file=sys.stderr)
    return EXIT_IO if failed else EXIT_OK


def _format_db(value):
    return "n/a" if value is None else f"{value:.2f}"


def cmd_simulate(service, args):
    config = service.config
    result = service.simulate()
    results = [
        service.export_config(_out(config, "config.json")),
        service.export_mismatch(result.mismatch, _out(config, "mismatch.json")),
        service.export_transfer(result.table, _out(config, "transfer.csv")),
    ]
    if args.plot:
        Visualizer().plot_transfer(result.table, result.linearity, _out(config, "transfer.png"))
    print(f"codes: {len(result.table)}")
    print(f"peak INL: {result.linearity.peak_inl:.4f} LSB")
    print(f"peak DNL: {result.linearity.peak_dnl:.4f} LSB")
    print(f"largest step: {result.linearity.max_jump_lsb:.4f} LSB after code {result.linearity.max_jump_code}")
    return _status(results)


def cmd_identify(service, args):
    config = service.config
    result = service.identify(args.model)
    results = [
        service.export_config(_out(config, "config.json")),
        service.export_model(result.model, _out(config, f"model_{args.model}.json")),
        service.export_json(result.summary(), _out(config, f"fit_report_{args.model}.json"), "Fit report"),
    ]
    if result.loss_history:
        results.append(service.export_loss(result.loss_history, _out(config, f"loss_{args.model}.csv")))
    if args.save_dataset:
        results.append(service.export_dataset(result.dataset, _out(config, "ident_dataset.csv")))
        results.append(service.export_stimulus(result.stimulus, _out(config, "ident_stimulus.csv")))
    report = result.report
    print(f"model: {args.model}")
    print(f"final MSE: {report.mse:.6e}")
    print(f"distinct codes: {report.distinct_codes}")
    print(f"max residual: {report.max_abs_residual:.6e} at code {report.max_residual_code}")
    if result.uncovered_codes:
        print(f"uncovered codes: {len(result.uncovered_codes)} (LUT entries there follow extrapolation)")
    return _status(results)


def _model_file(config, args):
    return args.model_file or _out(config, f"model_{args.model}.json")


def cmd_build_lut(service, args):
    config = service.config
    model = read_model(_model_file(config, args))
    result = service.build_lut(model)
    results = [
        service.export_lut(result.lut, _out(config, f"lut_{args.model}.json")),
        service.export_lut(result.lut, _out(config, f"lut_{args.model}.csv")),
        service.export_json(result.summary(), _out(config, f"lut_{args.model}_summary.json"), "LUT summary"),
    ]
    if args.plot:
        Visualizer().plot_lut_deviation(result.lut, _out(config, f"lut_{args.model}.png"),
                                        reference=service.oracle_lut())
    print(f"identity deviations: {result.identity_deviations}")
    return _status(results)


def _print_report(label, report):
    print(
        f"{label}: IM3 {_format_db(report.im3_dbc)} dBc, IM5 {_format_db(report.im5_dbc)} dBc, "
        f"IM7 {_format_db(report.im7_dbc)} dBc, SFDR {report.sfdr_dbc:.2f} dB, "
        f"noise floor {report.noise_floor_dbfs_per_bin:.2f} dBFS/bin"
    )


def cmd_evaluate(service, args):
    config = service.config
    lut = read_lut(args.lut) if args.lut else None
    tag = ("lut" if lut is not None else "baseline") + ("_dem" if args.dem else "")
    result = service.evaluate(lut=lut, dem=args.dem)
    results = [
        service.export_spectrum(result.spectrum, _out(config, f"spectrum_{tag}.csv")),
        service.export_json(result.report.to_dict(), _out(config, f"im_report_{tag}.json"), "IM report"),
    ]
    if args.plot:
        Visualizer().plot_spectrum(result.spectrum, _out(config, f"spectrum_{tag}.png"), report=result.report)
    _print_report(tag, result.report)
    if lut is not None or args.dem:
        baseline = service.evaluate().report
        _print_report("baseline", baseline)
        for order in (3, 5, 7):
            before, after = baseline.im_dbc(order), result.report.im_dbc(order)
            if before is not None and after is not None:
                print(f"IM{order} improvement: {before - after:.2f} dB")
    return _status(results)


def _sweep_luts(service, args):
    config = service.config
    if args.lut:
        nn_lut = read_lut(args.lut)
    else:
        nn_lut = service.build_lut(service.identify("mlp").model).lut
    if args.poly_lut:
        poly_lut = read_lut(args.poly_lut)
    else:
        poly_lut = service.build_lut(service.identify("poly").model).lut
    for lut in (nn_lut, poly_lut):
        if lut.bits != config.dac.bits:
            raise ConfigurationError(f"LUT has {lut.bits} bits but the DAC has {config.dac.bits}")
    return nn_lut, poly_lut


def cmd_sweep(service, args):
    config = service.config
    nn_lut, poly_lut = _sweep_luts(service, args)
    report = service.sweep(nn_lut, poly_lut, manifest_filename=_out(config, "sweep_partial.json"))
    results = service.export_sweep(report, config.out_dir)
    for scenario in report.points:
        if scenario == "baseline":
            continue
        for row in report.rows(scenario):
            print(
                f"{scenario:>10} {row['tone_dbfs']:6.1f} dBFS {row['center_hz'] / 1e9:5.2f} GHz: "
                f"dIM3 {_format_db(row.get('delta_im3_db'))} dB, "
                f"dIM5 {_format_db(row.get('delta_im5_db'))} dB, "
                f"dIM7 {_format_db(row.get('delta_im7_db'))} dB"
            )
    return _status(results)


COMMANDS = {
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "build-lut": cmd_build_lut,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file.")
    common.add_argument("--seed", type=int, help="Mismatch seed, overrides dac.seed.")
    common.add_argument("--model", choices=MODEL_KINDS, default="mlp", help="Regressor to identify or load.")
    common.add_argument("--model-file", help="Model JSON for build-lut (default: <out>/model_<model>.json).")
    common.add_argument("--lut", help="LUT file (JSON or CSV) applied before the DAC.")
    common.add_argument("--poly-lut", help="Polynomial LUT for the sweep; identified when omitted.")
    common.add_argument("--dem", action="store_true", help="Randomize the thermometer unit cells.")
    common.add_argument("--ideal", action="store_true", help="Zero mismatch reference.")
    common.add_argument("--avg", type=int, help="Identification captures averaged per code.")
    common.add_argument("--out", help="Output directory (default: $DACLIN_OUT or ./daclin-out).")
    common.add_argument("--save-dataset", action="store_true", help="Also write the identification dataset.")
    common.add_argument("--plot", action="store_true", help="Render PNG charts next to the exports.")
    common.add_argument("--print-config", action="store_true", help="Print the effective configuration and exit.")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(
        prog="daclin",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        subparsers.add_parser(name, parents=[common])
    return parser


def configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args)
    try:
        config = with_overrides(load_config(args.config), seed=args.seed, ideal=args.ideal,
                                avg=args.avg, out_dir=args.out)
        if args.print_config:
            print(config.validate().to_json())
            return EXIT_OK
        service = build_service(config)
        return COMMANDS[args.command](service, args)
    except ConfigurationError as error:
        logger.error("Configuration error: %s", error)
        print(f"error: {error}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as error:
        logger.error("Numerical failure: %s", error)
        print(f"error: {error}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as error:
        logger.error("I/O failure: %s", error)
        print(f"error: {error}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
