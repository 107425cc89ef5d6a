"""
Experiment presets: sectioned YAML files validated into pydantic models.

Each preset file has the sections `experiment`, `data`, `model`, `training`, `evaluation` and
`acceptance`. Command line flags override single keys and the resolved preset is echoed into
every run directory, from where it can be loaded again with --config.
"""
import enum
import logging
import pathlib
from typing import Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from sciml_priors.configuration.settings import PRESETS_PATH
from sciml_priors.utilities.exceptions import UsageError
from sciml_priors.utilities.exceptions import ValidationError as PresetMismatchError

logger = logging.getLogger(__name__)


class ModelFamily(str, enum.Enum):
    """Trainable model families."""

    TAYLOR_NET = "taylor-net"
    NSSNN = "nssnn"
    HRK = "hrk"
    ODE_RK4 = "ode-rk4"
    ROENET = "roenet"
    VORTEX_DYNAMICS = "vortex-dynamics"
    VORTEX_HAMILTONIAN = "vortex-hamiltonian"


class Baseline(str, enum.Enum):
    """Comparison models of the reproduce command. The first two are trained, the last two are
    classical solvers."""

    ODE_RK4 = "ode-rk4"
    HRK = "hrk"
    ROE = "roe"
    LVM = "lvm"


class DataKind(str, enum.Enum):
    """Shape of the samples a family trains on."""

    PHASE = "phase"
    FIELD = "field"
    VORTEX = "vortex"


FAMILY_DATA = {
    ModelFamily.TAYLOR_NET: DataKind.PHASE,
    ModelFamily.NSSNN: DataKind.PHASE,
    ModelFamily.HRK: DataKind.PHASE,
    ModelFamily.ODE_RK4: DataKind.PHASE,
    ModelFamily.VORTEX_HAMILTONIAN: DataKind.PHASE,
    ModelFamily.ROENET: DataKind.FIELD,
    ModelFamily.VORTEX_DYNAMICS: DataKind.VORTEX,
}

PHASE_SYSTEMS = ("pendulum", "spring", "nonseparable", "point-vortex")
FIELD_SYSTEMS = ("1c-linear", "sod")
VORTEX_SYSTEMS = ("vortex",)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentSection(_Section):
    """What is trained and what it is compared with."""

    name: str
    family: ModelFamily
    baseline: Optional[Baseline] = None
    description: str = ""


class DataSection(_Section):
    """Dataset generation."""

    system: str
    samples: int = Field(ge=1)
    validation_samples: int = Field(default=0, ge=0)
    train_fraction: float = Field(default=0.9, gt=0.0, le=1.0)
    t_train: float = Field(gt=0.0)
    dt: float = Field(gt=0.0)
    noise_sigma: float = Field(default=0.0, ge=0.0)
    # phase-space systems
    particles: int = Field(default=1, ge=1)
    box: tuple[float, float] = (-2.0, 2.0)
    min_separation: float = Field(default=0.3, ge=0.0)
    # grid fields
    dx: float = Field(default=0.01, gt=0.0)
    domain: tuple[float, float] = (-0.5, 0.5)
    advection_speed: float = 1.0
    gas_gamma: float = Field(default=1.4, gt=1.0)
    # vortex frames
    min_vortices: int = Field(default=2, ge=1)
    max_vortices: int = Field(default=6, ge=1)
    strength_range: tuple[float, float] = (0.5, 1.5)
    external_uniform: tuple[float, float] = (0.0, 0.0)
    external_shear: float = 0.0
    fine_dt: float = Field(default=1e-4, gt=0.0, le=1e-4)
    layout: str = "random"

    @model_validator(mode="after")
    def _check_system(self) -> "DataSection":
        if self.system not in PHASE_SYSTEMS + FIELD_SYSTEMS + VORTEX_SYSTEMS:
            raise ValueError(f"Unknown data system '{self.system}'")
        if self.min_vortices > self.max_vortices:
            raise ValueError("min_vortices exceeds max_vortices")
        if self.layout not in ("random", "leapfrog"):
            raise ValueError(f"Unknown vortex layout '{self.layout}'")
        return self


class ModelSection(_Section):
    """Network layout and integrator settings."""

    terms: int = Field(default=8, ge=1)
    hidden: int = Field(default=16, ge=1)
    width: int = Field(default=64, ge=1)
    layers: int = Field(default=6, ge=2)
    blocks: int = Field(default=3, ge=1)
    omega: float = Field(default=10.0, gt=0.0)
    components: int = Field(default=1, ge=1)
    reg: float = Field(default=0.1, gt=0.0)


class TrainingSection(_Section):
    """Optimiser and schedule."""

    epochs: int = Field(default=100, ge=0)
    batch_size: int = Field(default=16, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    step_size: int = Field(default=10, ge=1)
    gamma: float = Field(default=0.8, gt=0.0, le=1.0)
    l2_weight: float = Field(default=0.0, ge=0.0)


class EvaluationSection(_Section):
    """Prediction horizon and test cases."""

    horizon: float = Field(gt=0.0)
    dt: Optional[float] = Field(default=None, gt=0.0)
    test_samples: int = Field(default=10, ge=1)
    snapshot_times: list[float] = Field(default_factory=list)
    initial_state: list[float] = Field(default_factory=list)
    initial_positions: list[tuple[float, float]] = Field(default_factory=list)
    initial_strengths: list[float] = Field(default_factory=list)
    grid_resolution: int = Field(default=32, ge=2)


class AcceptanceSection(_Section):
    """
    Pass criteria of the reproduce command.

    Attributes:
        thresholds: Upper bounds on named evaluation metrics of the trained model.
        compare_metric: Metric on which the model is compared with the baseline.
        baseline_factor: The model passes when factor·model ≤ baseline on compare_metric.
    """

    thresholds: dict[str, float] = Field(default_factory=dict)
    compare_metric: Optional[str] = None
    baseline_factor: float = Field(default=1.0, gt=0.0)


class ExperimentPreset(_Section):
    """A fully resolved experiment configuration."""

    experiment: ExperimentSection
    data: DataSection
    model: ModelSection = Field(default_factory=ModelSection)
    training: TrainingSection = Field(default_factory=TrainingSection)
    evaluation: EvaluationSection
    acceptance: AcceptanceSection = Field(default_factory=AcceptanceSection)

    @model_validator(mode="after")
    def _check_family_data(self) -> "ExperimentPreset":
        kind = FAMILY_DATA[self.experiment.family]
        allowed = {
            DataKind.PHASE: PHASE_SYSTEMS,
            DataKind.FIELD: FIELD_SYSTEMS,
            DataKind.VORTEX: VORTEX_SYSTEMS,
        }[kind]
        if self.data.system not in allowed:
            raise ValueError(
                f"Family '{self.experiment.family.value}' cannot train on '{self.data.system}'"
            )
        return self

    @property
    def name(self) -> str:
        """Preset name."""
        return self.experiment.name

    @property
    def data_kind(self) -> DataKind:
        """Sample layout of the preset's family."""
        return FAMILY_DATA[self.experiment.family]

    @property
    def evaluation_dt(self) -> float:
        """Rollout step of the evaluation."""
        return self.evaluation.dt or self.data.dt

    def as_dict(self) -> dict:
        """Plain dictionary with enum values, suitable for YAML and hashing."""
        return self.model_dump(mode="json")

    def with_overrides(
        self,
        epochs: Optional[int] = None,
        dt: Optional[float] = None,
        omega: Optional[float] = None,
        noise_sigma: Optional[float] = None,
        baseline: Optional[str] = None,
        horizon: Optional[float] = None,
    ) -> "ExperimentPreset":
        """
        A copy with command line overrides applied; None leaves a key unchanged.

        Raises:
            UsageError: An override value is invalid.
        """
        payload = self.as_dict()
        if epochs is not None:
            payload["training"]["epochs"] = epochs
        if dt is not None:
            payload["data"]["dt"] = dt
            payload["evaluation"]["dt"] = None
        if omega is not None:
            payload["model"]["omega"] = omega
        if noise_sigma is not None:
            payload["data"]["noise_sigma"] = noise_sigma
        if baseline is not None:
            payload["experiment"]["baseline"] = baseline
        if horizon is not None:
            payload["evaluation"]["horizon"] = horizon
        try:
            return ExperimentPreset.model_validate(payload)
        except ValidationError as error:
            logger.error("Invalid override for preset %s: %s", self.name, error)
            raise UsageError(f"Invalid override for preset '{self.name}': {error}") from error


def available_presets() -> list[str]:
    """Names of the presets shipped with the package."""
    return sorted(path.stem for path in PRESETS_PATH.glob("*.yaml"))


def parse_preset(payload: dict, source: str) -> ExperimentPreset:
    """
    Validates a preset mapping.

    Raises:
        PresetMismatchError: The mapping is not a valid preset.
    """
    try:
        return ExperimentPreset.model_validate(payload)
    except ValidationError as error:
        logger.error("Invalid preset %s: %s", source, error)
        raise PresetMismatchError(f"Invalid preset {source}: {error}") from error


def load_preset_file(path: Union[str, pathlib.Path]) -> ExperimentPreset:
    """
    Loads a preset or an echoed configuration from a YAML file.

    Raises:
        FileNotFoundError: The file does not exist.
        PresetMismatchError: The file is not a valid preset.
    """
    path = pathlib.Path(path)
    try:
        with open(path, "r", encoding="utf-8") as file:
            payload = yaml.safe_load(file)
    except FileNotFoundError as error:
        raise FileNotFoundError(f"Preset file not found: {path}") from error
    except yaml.YAMLError as error:
        logger.error("Error parsing YAML file %s: %s", path, error)
        raise PresetMismatchError(f"Error parsing YAML file: {path}") from error
    return parse_preset(payload or {}, str(path))


def load_preset(name: str) -> ExperimentPreset:
    """
    Loads a shipped preset by name.

    Raises:
        UsageError: No preset has that name.
    """
    path = PRESETS_PATH / f"{name}.yaml"
    if not path.is_file():
        logger.error("Unknown preset %s", name)
        raise UsageError(
            f"Unknown preset '{name}'; available: {', '.join(available_presets())}"
        )
    return load_preset_file(path)


def dump_preset(preset: ExperimentPreset) -> str:
    """YAML text of a resolved preset, keys sorted."""
    return yaml.safe_dump(preset.as_dict(), sort_keys=True)
