"""Command-line entry point: `nsi3d design|rates|run|bench|metrics`."""

from __future__ import annotations

import argparse
import csv
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from dotenv import load_dotenv
from pydantic import ValidationError

from nsi3d import __version__
from nsi3d.exceptions import EXIT_CONFIG_ERROR, EXIT_OK, ConfigurationError, Nsi3dError
from nsi3d.export.volume_dump import read_volume
from nsi3d.logging_config import configure_logging, get_logger
from nsi3d.presets import PRESETS, resolve_config
from nsi3d.runner import ScenarioResult, ScenarioRunner
from nsi3d.schemas.experiment import ExperimentConfig, read_config_data
from nsi3d.settings import RunSettings
from nsi3d.telemetry import setup_telemetry, shutdown_telemetry

logger = get_logger("nsi3d.cli")

APERTURE_CHOICES = ("circular", "spiral", "spiral_no_reuse", "rectangular", "all")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(PRESETS), help="scale preset (default desk)")
    common.add_argument("--config", type=Path, help="JSON config layered over the preset")
    common.add_argument("--output", type=Path, help="output directory")
    common.add_argument("--workers", type=int, help="worker threads (default: all cores)")
    common.add_argument("--aperture", choices=APERTURE_CHOICES)
    common.add_argument("--dc", type=float, help="DC offset of the NSI windows")
    common.add_argument("--zm-sign", type=int, choices=(1, -1), dest="zm_sign",
                        help="sign of the zero-mean window on the outer region")
    common.add_argument("--compound", choices=("coherent", "incoherent"))
    common.add_argument("--seed", type=int)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsi3d",
        description="Volumetric null subtraction imaging workbench for a multiplexed matrix array.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _common_options()
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("design", parents=[common], help="export aperture masks and apodizations")
    sub.add_parser("rates", parents=[common], help="export event counts and volume rates")

    run = sub.add_parser("run", parents=[common], help="simulate, reconstruct and measure")
    run.add_argument("--scenario", choices=("points", "cyst", "beampattern"))
    run.add_argument("--dump-rf", action="store_true", dest="dump_rf",
                     help="also write the simulated RF data")

    bench = sub.add_parser("bench", parents=[common], help="time DAS against NSI")
    bench.add_argument("--repeats", type=int, default=3)

    met = sub.add_parser("metrics", parents=[common], help="recompute metrics from dumped volumes")
    met.add_argument("volumes", nargs="+", type=Path, help="volume header files (.json)")
    met.add_argument("--cyst-center", type=float, nargs=3, metavar=("X", "Y", "Z"),
                     dest="cyst_center", help="cyst centre in mm")
    met.add_argument("--cyst-diameter", type=float, dest="cyst_diameter", help="in mm")
    return parser


def config_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested config values for the flags that were given."""
    overrides: dict[str, Any] = {}

    def put(section: str | None, key: str, value: Any) -> None:
        if value is None:
            return
        target = overrides if section is None else overrides.setdefault(section, {})
        target[key] = value

    put(None, "preset", args.preset)
    put(None, "seed", args.seed)
    put(None, "output_dir", str(args.output) if args.output else None)
    put(None, "scenario", getattr(args, "scenario", None))
    put("aperture", "kind", args.aperture)
    put("aperture", "dc", args.dc)
    put("aperture", "zm_outer_sign", args.zm_sign)
    put("imaging", "compound", args.compound)
    put("phantom", "cyst_center_mm", getattr(args, "cyst_center", None))
    put("phantom", "cyst_diameter_mm", getattr(args, "cyst_diameter", None))
    return overrides


def resolve(args: argparse.Namespace) -> ExperimentConfig:
    file_data = read_config_data(args.config) if args.config else None
    return resolve_config(args.preset, file_data, config_overrides(args))


def _print_summary(result: ScenarioResult) -> None:
    print(f"# {result.name} run_id={result.run_id} output={result.output_dir}")
    if not result.summary:
        return
    writer = csv.DictWriter(sys.stdout, fieldnames=list(result.summary[0]), lineterminator="\n")
    writer.writeheader()
    for row in result.summary:
        writer.writerow({k: f"{v:.6g}" if isinstance(v, float) else v for k, v in row.items()})


def dispatch(args: argparse.Namespace, settings: RunSettings) -> ScenarioResult:
    config = resolve(args)
    runner = ScenarioRunner(config, settings, dump_rf=getattr(args, "dump_rf", False))
    if args.command == "design":
        return runner.export_design()
    if args.command == "rates":
        return runner.export_rates()
    if args.command == "run":
        return runner.run()
    if args.command == "bench":
        result, _ = runner.bench(repeats=args.repeats)
        return result
    volumes = [read_volume(path)[0] for path in args.volumes]
    return runner.measure_volumes(volumes, [path.stem for path in args.volumes])


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    configure_logging()
    args = build_parser().parse_args(argv)

    settings = RunSettings.from_env()
    if args.workers is not None:
        if args.workers < 1:
            print("config: --workers must be at least 1", file=sys.stderr)
            return EXIT_CONFIG_ERROR
        settings.workers = args.workers
    setup_telemetry(otlp_endpoint=settings.otlp_endpoint, service_version=__version__)

    try:
        result = dispatch(args, settings)
    except ValidationError as exc:
        logger.error("Invalid configuration", extra={"errors": exc.error_count()})
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except ConfigurationError as exc:
        logger.error("Invalid configuration", extra={"module": exc.module})
        print(exc.qualified(), file=sys.stderr)
        return exc.exit_code
    except Nsi3dError as exc:
        logger.exception("Command failed", extra={"module": exc.module})
        print(exc.qualified(), file=sys.stderr)
        return exc.exit_code
    finally:
        shutdown_telemetry()

    _print_summary(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
