"""Command line entry point of sciml-priors."""
import argparse
import logging
import pathlib
import sys
from typing import Optional, Sequence

from sciml_priors.cli import __version__
from sciml_priors.components.experiments.runner import (
    RunSettings,
    cmd_eval,
    cmd_gen_data,
    cmd_reproduce,
    cmd_train,
)
from sciml_priors.configuration.presets import (
    Baseline,
    ExperimentPreset,
    available_presets,
    load_preset,
    load_preset_file,
)
from sciml_priors.configuration.settings import OUTPUT_ROOT, THREADS, set_verbose
from sciml_priors.utilities.exceptions import SciMLError, UsageError

logger = logging.getLogger(__name__)

TESTS_PATH = pathlib.Path(__file__).resolve().parents[3] / "tests"


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    source = parent.add_mutually_exclusive_group()
    source.add_argument("--preset", help=f"Shipped preset: {', '.join(available_presets())}")
    source.add_argument("--config", type=pathlib.Path, help="Echoed config.yaml of a past run")
    parent.add_argument("--seed", type=int, default=0, help="Master seed (default 0)")
    parent.add_argument(
        "--out", type=pathlib.Path, default=OUTPUT_ROOT, help="Output root of run directories"
    )
    parent.add_argument("--epochs", type=int, help="Override training.epochs")
    parent.add_argument("--dt", type=float, help="Override the integrator step data.dt")
    parent.add_argument("--omega", type=float, help="Override the binding strength model.omega")
    parent.add_argument("--noise-sigma", type=float, help="Override data.noise_sigma")
    parent.add_argument(
        "--baseline", choices=[baseline.value for baseline in Baseline], help="Override baseline"
    )
    parent.add_argument(
        "--threads", type=int, default=THREADS, help="Worker cap for data generation"
    )
    parent.add_argument("--verbose", action="store_true", help="Debug logging")
    return parent


def build_parser() -> argparse.ArgumentParser:
    """The argument parser with one sub-command per stage."""
    parser = argparse.ArgumentParser(
        prog="sciml-priors",
        description="Train and evaluate structure-preserving surrogate models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    commands.add_parser("gen-data", parents=[common], help="Generate a preset's dataset")
    train = commands.add_parser("train", parents=[common], help="Train the preset's model")
    train.add_argument("--dataset", type=pathlib.Path, help="Dataset file written by gen-data")
    evaluate = commands.add_parser("eval", parents=[common], help="Evaluate a checkpoint")
    evaluate.add_argument("--checkpoint", type=pathlib.Path, required=True)
    evaluate.add_argument("--horizon", type=float, help="Override evaluation.horizon")
    commands.add_parser(
        "reproduce", parents=[common], help="gen-data, train, eval and baseline comparison"
    )
    selftest = commands.add_parser("selftest", help="Run the invariant test suites")
    selftest.add_argument("--run-slow", action="store_true", help="Include acceptance runs")
    selftest.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def resolve_preset(args: argparse.Namespace) -> ExperimentPreset:
    """
    The preset named by --preset or read from --config, with the override flags applied.

    Raises:
        UsageError: Neither or an unknown preset was given, or an override is invalid.
    """
    if args.config is not None:
        try:
            preset = load_preset_file(args.config)
        except FileNotFoundError as error:
            raise UsageError(str(error)) from error
    elif args.preset is not None:
        preset = load_preset(args.preset)
    else:
        raise UsageError("One of --preset or --config is required")
    return preset.with_overrides(
        epochs=args.epochs,
        dt=args.dt,
        omega=args.omega,
        noise_sigma=args.noise_sigma,
        baseline=args.baseline,
        horizon=getattr(args, "horizon", None),
    )


def run_selftest(run_slow: bool) -> int:
    """Runs the pytest suite next to the package; the slow acceptance runs only on request."""
    try:
        import pytest  # pylint: disable=import-outside-toplevel
    except ImportError as error:
        raise UsageError("selftest needs pytest installed") from error
    if not TESTS_PATH.is_dir():
        raise UsageError(f"Test suite not found at {TESTS_PATH}")
    arguments = [str(TESTS_PATH), "-q"]
    if run_slow:
        arguments.append("--run-slow")
    return int(pytest.main(arguments))


def dispatch(args: argparse.Namespace) -> None:
    """Runs the selected command and prints the path of its main artifact."""
    preset = resolve_preset(args)
    if args.threads < 1:
        raise UsageError(f"--threads must be at least 1, got {args.threads}")
    settings = RunSettings(output_root=args.out, seed=args.seed, threads=args.threads)
    if args.command == "gen-data":
        print(cmd_gen_data(preset, settings))
    elif args.command == "train":
        print(cmd_train(preset, settings, args.dataset))
    elif args.command == "eval":
        result = cmd_eval(preset, settings, args.checkpoint)
        for name, value in sorted(result.metrics.items()):
            print(f"{name}: {value:.6g}")
    else:
        print(cmd_reproduce(preset, settings))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the console script.

    Returns:
        0 on success, otherwise the exit code of the failure: 2 usage, 3 validation,
        4 a failed reproduction stage, 1 anything else.
    """
    args = build_parser().parse_args(argv)
    set_verbose(args.verbose)
    try:
        if args.command == "selftest":
            return run_selftest(args.run_slow)
        dispatch(args)
    except SciMLError as error:
        logger.error("%s", error.message)
        print(f"error: {error.message}", file=sys.stderr)
        return error.exit_code
    except OSError as error:
        logger.error("I/O failure: %s", error)
        print(f"error: {error}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
