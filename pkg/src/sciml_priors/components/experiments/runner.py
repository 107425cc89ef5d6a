"""
Commands behind the command line: gen-data, train, eval and reproduce.

Every command creates its own run directory below the output root, echoes the resolved preset
into it as config.yaml and moves the `latest` pointer once its artifacts are complete.
"""
import logging
import pathlib
from dataclasses import dataclass
from typing import Optional

from sciml_priors.components.experiments.evaluation import (
    Evaluation,
    evaluate_classical,
    evaluate_model,
)
from sciml_priors.components.store.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from sciml_priors.components.train.datasets import (
    PairDataset,
    make_hamiltonian_dataset,
    make_roenet_dataset,
    make_vortex_dataset,
)
from sciml_priors.components.train.models import (
    build_surrogate,
    surrogate_from_hyperparameters,
)
from sciml_priors.components.train.trainer import TrainResult, train_model, write_metrics_csv
from sciml_priors.configuration.presets import (
    FAMILY_DATA,
    Baseline,
    DataKind,
    ExperimentPreset,
    ModelFamily,
    dump_preset,
)
from sciml_priors.configuration.settings import CONFIG_ECHO_NAME, THREADS, VERSION
from sciml_priors.utilities.exceptions import (
    SciMLError,
    StageError,
    TrainingDivergedError,
    ValidationError,
)
from sciml_priors.utilities.helperfunctions import (
    config_hash,
    create_run_directory,
    update_latest_pointer,
    write_csv,
)

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.bin"
CHECKPOINT_FILE = "checkpoint.bin"
DIVERGED_CHECKPOINT_FILE = "checkpoint.last-good.bin"
METRICS_FILE = "metrics.csv"
REPORT_FILE = "report.csv"
REPORT_HEADER = ("metric", "value", "threshold", "pass")

# Classical baselines are evaluated directly; the others are trained like the model
CLASSICAL_BASELINES = (Baseline.ROE, Baseline.LVM)


@dataclass(frozen=True)
class RunSettings:
    """Where and how a command runs."""

    output_root: pathlib.Path
    seed: int = 0
    threads: int = THREADS


def open_run(command: str, preset: ExperimentPreset, settings: RunSettings) -> pathlib.Path:
    """Creates the run directory and writes the configuration echo into it."""
    digest = config_hash(preset.as_dict())
    directory = create_run_directory(
        settings.output_root, command, preset.name, settings.seed, digest
    )
    (directory / CONFIG_ECHO_NAME).write_text(dump_preset(preset), encoding="utf-8")
    return directory


def close_run(directory: pathlib.Path, settings: RunSettings) -> None:
    """Points `latest` at a completed run."""
    update_latest_pointer(settings.output_root, directory)
    logger.info("Run complete: %s", directory)


def make_dataset(preset: ExperimentPreset, seed: int, threads: int = THREADS) -> PairDataset:
    """The dataset of the preset's sample layout, tagged with the configuration hash."""
    kind = preset.data_kind
    if kind is DataKind.PHASE:
        dataset = make_hamiltonian_dataset(preset.data, seed, threads)
    elif kind is DataKind.FIELD:
        dataset = make_roenet_dataset(preset.data, seed, threads)
    else:
        dataset = make_vortex_dataset(preset.data, seed, preset.model.reg, threads)
    dataset.metadata["config_hash"] = config_hash(preset.as_dict()["data"])
    dataset.metadata["seed"] = int(seed)
    return dataset


def check_dataset(dataset: PairDataset, preset: ExperimentPreset, family: ModelFamily) -> None:
    """
    Raises:
        ValidationError: The dataset was generated for another system or sample layout.
    """
    system = dataset.metadata.get("system")
    if dataset.kind is not FAMILY_DATA[family] or system != preset.data.system:
        logger.error(
            "Dataset of %s/%s does not match %s on %s",
            dataset.kind.value,
            system,
            family.value,
            preset.data.system,
        )
        raise ValidationError(
            f"Dataset ({dataset.kind.value}, {system}) does not fit a '{family.value}' model "
            f"on '{preset.data.system}'"
        )


def _checkpoint(
    family: ModelFamily, preset: ExperimentPreset, params: dict, seed: int, result: TrainResult
) -> Checkpoint:
    surrogate = build_surrogate(family, preset)
    history = result.history if result else []
    return Checkpoint(
        family=family.value,
        hyperparameters=surrogate.hyperparameters(),
        parameters=params,
        seed=seed,
        metadata={
            "version": VERSION,
            "config_hash": config_hash(preset.as_dict()),
            "epochs": len(history),
            "final_loss_train": history[-1].loss_train if history else None,
        },
    )


def train_in(
    directory: pathlib.Path,
    preset: ExperimentPreset,
    dataset: PairDataset,
    seed: int,
    family: Optional[ModelFamily] = None,
) -> pathlib.Path:
    """
    Trains a model family (the preset's by default) and writes checkpoint.bin and metrics.csv
    into directory.

    Raises:
        TrainingDivergedError: Raised again after the last good parameters were written to
            checkpoint.last-good.bin.
    """
    family = ModelFamily(family or preset.experiment.family)
    check_dataset(dataset, preset, family)
    surrogate = build_surrogate(family, preset)
    try:
        result = train_model(surrogate, dataset, preset.training, seed)
    except TrainingDivergedError as error:
        write_metrics_csv(directory / METRICS_FILE, error.loss_history)
        checkpoint = _checkpoint(family, preset, error.last_good_parameters, seed, None)
        save_checkpoint(directory / DIVERGED_CHECKPOINT_FILE, checkpoint)
        raise
    write_metrics_csv(directory / METRICS_FILE, result.history)
    path = directory / CHECKPOINT_FILE
    save_checkpoint(path, _checkpoint(family, preset, result.params, seed, result))
    return path


def cmd_gen_data(preset: ExperimentPreset, settings: RunSettings) -> pathlib.Path:
    """Generates the preset's dataset into a new run directory; returns the dataset file."""
    directory = open_run("gen-data", preset, settings)
    dataset = make_dataset(preset, settings.seed, settings.threads)
    path = directory / DATASET_FILE
    dataset.save(path)
    close_run(directory, settings)
    return path


def cmd_train(
    preset: ExperimentPreset,
    settings: RunSettings,
    dataset_path: Optional[pathlib.Path] = None,
) -> pathlib.Path:
    """
    Trains the preset's model family; returns the checkpoint file.

    Args:
        preset: Resolved preset.
        settings: Output root, seed and worker count.
        dataset_path: A dataset written by gen-data; generated in the run directory when None.
    """
    directory = open_run("train", preset, settings)
    if dataset_path is None:
        dataset = make_dataset(preset, settings.seed, settings.threads)
        dataset.save(directory / DATASET_FILE)
    else:
        dataset = PairDataset.load(pathlib.Path(dataset_path))
    path = train_in(directory, preset, dataset, settings.seed)
    close_run(directory, settings)
    return path


def load_model(checkpoint_path: pathlib.Path, preset: ExperimentPreset):
    """
    The model and parameters of a checkpoint of the preset's family or its trained baseline.

    Raises:
        ValidationError: The checkpoint belongs to neither.
    """
    checkpoint = load_checkpoint(pathlib.Path(checkpoint_path))
    allowed = {preset.experiment.family.value}
    if preset.experiment.baseline and preset.experiment.baseline not in CLASSICAL_BASELINES:
        allowed.add(preset.experiment.baseline.value)
    if checkpoint.family not in allowed:
        checkpoint.require_family(preset.experiment.family.value)
    surrogate = surrogate_from_hyperparameters(checkpoint.family, checkpoint.hyperparameters)
    return surrogate, checkpoint.parameters


def cmd_eval(
    preset: ExperimentPreset, settings: RunSettings, checkpoint_path: pathlib.Path
) -> Evaluation:
    """Evaluates a checkpoint over the preset's horizon; writes eval.csv and prediction CSVs."""
    surrogate, params = load_model(checkpoint_path, preset)
    directory = open_run("eval", preset, settings)
    result = evaluate_model(surrogate, params, preset, settings.seed, directory)
    close_run(directory, settings)
    return result


def _stage(name: str, action, *args, **kwargs):
    logger.info("Stage %s", name)
    try:
        return action(*args, **kwargs)
    except (SciMLError, OSError) as error:
        logger.exception("Stage %s failed", name)
        raise StageError(name, str(error)) from error


def acceptance_rows(
    preset: ExperimentPreset, model: Evaluation, baseline: Optional[Evaluation]
) -> list[tuple]:
    """
    Report rows: every model metric, every baseline metric, the thresholds and the baseline
    comparison factor·model ≤ baseline.
    """
    acceptance = preset.acceptance
    rows = []
    for name, value in sorted(model.metrics.items()):
        threshold = acceptance.thresholds.get(name)
        if threshold is None:
            rows.append((name, value, "", ""))
        else:
            rows.append((name, value, float(threshold), str(value <= threshold).lower()))
    missing = sorted(set(acceptance.thresholds) - set(model.metrics))
    for name in missing:
        rows.append((name, "", float(acceptance.thresholds[name]), "false"))
    if baseline is not None:
        for name, value in sorted(baseline.metrics.items()):
            rows.append((f"baseline.{name}", value, "", ""))
        metric = acceptance.compare_metric
        if metric:
            scaled = acceptance.baseline_factor * model.metrics.get(metric, float("nan"))
            reference = baseline.metrics.get(metric, float("nan"))
            rows.append((f"compare.{metric}", scaled, reference, str(scaled <= reference).lower()))
    return rows


def cmd_reproduce(preset: ExperimentPreset, settings: RunSettings) -> pathlib.Path:
    """
    Runs gen-data, train, eval and the baseline comparison in one run directory and writes
    report.csv (`metric,value,threshold,pass`).

    Returns:
        The report file.

    Raises:
        StageError: A stage failed, or the report holds a failing row (stage "acceptance").
    """
    directory = open_run("reproduce", preset, settings)
    seed = settings.seed
    model_dir, baseline_dir = directory / "model", directory / "baseline"
    model_dir.mkdir()

    dataset = _stage("gen-data", make_dataset, preset, seed, settings.threads)
    _stage("gen-data", dataset.save, directory / DATASET_FILE)
    checkpoint_path = _stage("train", train_in, model_dir, preset, dataset, seed)
    surrogate, params = _stage("eval", load_model, checkpoint_path, preset)
    model_result = _stage("eval", evaluate_model, surrogate, params, preset, seed, model_dir)

    baseline_result = None
    baseline = preset.experiment.baseline
    if baseline is not None:
        baseline_dir.mkdir()
        if baseline in CLASSICAL_BASELINES:
            baseline_result = _stage(
                "baseline", evaluate_classical, baseline, preset, seed, baseline_dir
            )
        else:
            family = ModelFamily(baseline.value)
            path = _stage("baseline-train", train_in, baseline_dir, preset, dataset, seed, family)
            surrogate, params = _stage("baseline-eval", load_model, path, preset)
            baseline_result = _stage(
                "baseline-eval", evaluate_model, surrogate, params, preset, seed, baseline_dir
            )

    rows = acceptance_rows(preset, model_result, baseline_result)
    report = directory / REPORT_FILE
    write_csv(report, REPORT_HEADER, rows)
    close_run(directory, settings)
    failed = [row[0] for row in rows if row[3] == "false"]
    if failed:
        logger.error("Acceptance failed for %s: %s", preset.name, failed)
        raise StageError("acceptance", f"failing metrics {', '.join(failed)}; see {report}")
    logger.info("Reproduction of %s passed", preset.name)
    return report
