"""
Dataset builders for the three sample layouts:

  phase   endpoint pairs (q0, p0) -> (q1, p1) of an analytic Hamiltonian system
  field   grid fields u(0) -> u(T_train) from analytic solutions
  vortex  detected vortices of two rasterised point-vortex frames, paired across the frames

Samples are generated in parallel; sample i draws from its own generator derived from the
master seed and i, so the result does not depend on the number of workers.
"""
import logging
import math
import pathlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from sciml_priors.components.hamiltonian.analytic import AnalyticSystem, SystemKind
from sciml_priors.components.hyperbolic.exact import (
    advection_exact,
    random_gaussian_pulse,
    random_riemann_states,
    riemann_field,
)
from sciml_priors.components.hyperbolic.gas import EulerGasParams
from sciml_priors.components.integrate.steppers import PhaseState, forest_ruth_step, rk4_step
from sciml_priors.components.store.codec import read_record, write_record
from sciml_priors.components.vortex.detection import (
    detect_vortices,
    pair_vortices,
    rasterize_vorticity,
)
from sciml_priors.components.vortex.system import (
    BOX_SIZE,
    ExternalDrift,
    VortexSystem,
    min_separation,
    reference_trajectory,
)
from sciml_priors.configuration.presets import DataKind, DataSection
from sciml_priors.configuration.settings import THREADS
from sciml_priors.utilities.exceptions import ValidationError
from sciml_priors.utilities.helperfunctions import sample_rng

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"SCIMLDAT"

# Reference integration of phase-space targets
REFERENCE_DT = 1e-3
MIN_REFERENCE_STEPS = 10

# Padded particle slots of a vortex sample
MAX_VORTICES = 6
MAX_PLACEMENT_ATTEMPTS = 1000

# Counter offsets keeping test draws apart from training draws of the same seed
TEST_COUNTER_OFFSET = 1 << 40


@dataclass
class PairDataset:
    """
    Input/target pairs sharing one time span.

    Arrays have a leading sample axis; the first train_count samples form the training split
    and the rest the validation split.

    Attributes:
        kind: Sample layout.
        t_train: Time between input and target.
        noise_sigma: Standard deviation of the endpoint noise.
        arrays: Named arrays.
        train_count: Size of the training split.
        metadata: Generation settings, rejection counts and configuration hash.
    """

    kind: DataKind
    t_train: float
    noise_sigma: float
    arrays: dict[str, np.ndarray]
    train_count: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = {name: array.shape[0] for name, array in self.arrays.items()}
        if len(set(sizes.values())) > 1:
            raise ValidationError(f"PairDataset: arrays disagree on the sample count: {sizes}")
        if not 0 <= self.train_count <= len(self):
            raise ValidationError(
                f"PairDataset: train split {self.train_count} of {len(self)} samples"
            )

    def __len__(self) -> int:
        return next(iter(self.arrays.values())).shape[0] if self.arrays else 0

    @property
    def validation_count(self) -> int:
        """Size of the validation split."""
        return len(self) - self.train_count

    def batch(self, indices: np.ndarray) -> dict[str, np.ndarray]:
        """The samples at the given indices."""
        return {name: array[indices] for name, array in self.arrays.items()}

    def training(self) -> dict[str, np.ndarray]:
        """The training split."""
        return self.batch(np.arange(self.train_count))

    def validation(self) -> dict[str, np.ndarray]:
        """The validation split."""
        return self.batch(np.arange(self.train_count, len(self)))

    def save(self, path: pathlib.Path) -> None:
        """Writes a self-describing dataset file."""
        header = {
            "kind": self.kind.value,
            "t_train": self.t_train,
            "noise_sigma": self.noise_sigma,
            "train_count": self.train_count,
            "metadata": self.metadata,
        }
        write_record(path, DATASET_MAGIC, header, self.arrays)

    @classmethod
    def load(cls, path: pathlib.Path) -> "PairDataset":
        """Reads a dataset file."""
        header, arrays = read_record(path, DATASET_MAGIC)
        try:
            return cls(
                kind=DataKind(header["kind"]),
                t_train=float(header["t_train"]),
                noise_sigma=float(header["noise_sigma"]),
                arrays=arrays,
                train_count=int(header["train_count"]),
                metadata=header.get("metadata", {}),
            )
        except (KeyError, ValueError) as error:
            logger.error("Dataset file %s has an invalid header: %s", path, error)
            raise ValidationError(f"Dataset file {path} has an invalid header: {error}") from error


def generate_parallel(
    make_sample: Callable[[np.random.Generator], Optional[dict]],
    count: int,
    seed: int,
    threads: int = THREADS,
    counter_offset: int = 0,
) -> list[Optional[dict]]:
    """
    Runs make_sample for counters offset..offset+count-1, each with its own generator.

    Returns:
        Results in counter order.
    """

    def run(counter: int):
        return make_sample(sample_rng(seed, counter_offset + counter))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        return list(executor.map(run, range(count)))


def _stack(samples: list[dict]) -> dict[str, np.ndarray]:
    return {name: np.stack([sample[name] for sample in samples]) for name in samples[0]}


# ---- phase space


def phase_system(data: DataSection) -> AnalyticSystem:
    """The analytic system named by a data section."""
    kind = SystemKind(data.system)
    if kind is SystemKind.POINT_VORTEX:
        return AnalyticSystem(kind, strengths=tuple([1.0] * data.particles))
    return AnalyticSystem(kind)


def reference_flow(system: AnalyticSystem, q: np.ndarray, p: np.ndarray, t: float) -> tuple:
    """
    Fine-step reference solution at time t: the fourth-order splitting step for separable
    systems, RK4 otherwise.
    """
    steps = max(MIN_REFERENCE_STEPS, math.ceil(t / REFERENCE_DT - 1e-9))
    fine_dt = t / steps
    if system.separable:
        state = PhaseState(q=np.asarray(q, dtype=np.float64), p=np.asarray(p, dtype=np.float64))
        for _ in range(steps):
            state = forest_ruth_step(
                system.kinetic_gradient, system.potential_gradient, state, fine_dt
            )
        return state.q, state.p

    dimension = np.shape(q)[-1]

    def derivative(_t, z):
        dq, dp = system.vector_field(z[..., :dimension], z[..., dimension:])
        return np.concatenate([dq, dp], axis=-1)

    z = np.concatenate([q, p], axis=-1)
    for _ in range(steps):
        z = rk4_step(derivative, z, fine_dt)
    return z[..., :dimension], z[..., dimension:]


def draw_phase_point(
    rng: np.random.Generator, data: DataSection, system: AnalyticSystem
) -> tuple[np.ndarray, np.ndarray]:
    """Initial (q0, p0) uniform in the box; point vortices also keep data.min_separation."""
    dimension = data.particles
    low, high = data.box
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        q = rng.uniform(low, high, size=dimension)
        p = rng.uniform(low, high, size=dimension)
        if system.kind is not SystemKind.POINT_VORTEX:
            return q, p
        if min_separation(np.stack([q, p], axis=-1), None) >= data.min_separation:
            return q, p
    raise ValidationError(
        f"Could not place {dimension} vortices {data.min_separation} apart in the box {data.box}"
    )


def make_hamiltonian_dataset(
    data: DataSection, seed: int, threads: int = THREADS
) -> PairDataset:
    """
    Endpoint pairs of an analytic Hamiltonian system.

    Training takes data.samples pairs and validation data.validation_samples more; without an
    explicit validation count data.samples is split by data.train_fraction. Both endpoints get
    independent Normal(0, σ) noise on every coordinate.
    """
    system = phase_system(data)

    def make_sample(rng: np.random.Generator) -> dict:
        q0, p0 = draw_phase_point(rng, data, system)
        q1, p1 = reference_flow(system, q0, p0, data.t_train)
        sample = {"q0": q0, "p0": p0, "q1": np.asarray(q1), "p1": np.asarray(p1)}
        if data.noise_sigma > 0.0:
            sample = {
                name: value + rng.normal(0.0, data.noise_sigma, size=value.shape)
                for name, value in sample.items()
            }
        return sample

    if data.validation_samples:
        total, train_count = data.samples + data.validation_samples, data.samples
    else:
        total = data.samples
        train_count = max(1, int(round(data.train_fraction * total)))
    samples = generate_parallel(make_sample, total, seed, threads)
    arrays = _stack(samples)
    if system.kind is SystemKind.POINT_VORTEX:
        arrays["gamma"] = np.tile(system.gamma(), (total, 1))
    logger.info(
        "Generated %s %s pairs (%s training) over T_train=%s",
        total,
        data.system,
        train_count,
        data.t_train,
    )
    return PairDataset(
        kind=DataKind.PHASE,
        t_train=data.t_train,
        noise_sigma=data.noise_sigma,
        arrays=arrays,
        train_count=train_count,
        metadata={"system": data.system},
    )


# ---- grid fields


def field_grid(data: DataSection) -> np.ndarray:
    """Node coordinates of the data section's grid."""
    low, high = data.domain
    nodes = int(round((high - low) / data.dx))
    return low + data.dx * np.arange(nodes)


def exact_field_pair(
    rng: np.random.Generator, data: DataSection, t: float
) -> tuple[np.ndarray, np.ndarray]:
    """A random initial field and its analytic solution at time t, each (N_g, N_c)."""
    x = field_grid(data)
    if data.system == "1c-linear":
        pulse = random_gaussian_pulse(rng, tuple(data.domain))
        initial = pulse(x)[:, None]
        target = advection_exact(x, t, data.advection_speed, pulse, tuple(data.domain))[:, None]
        return initial, target
    gas = EulerGasParams(gamma=data.gas_gamma)
    left, right = random_riemann_states(rng)
    interface = 0.5 * (data.domain[0] + data.domain[1])
    return (
        riemann_field(x, 0.0, left, right, gas, interface),
        riemann_field(x, t, left, right, gas, interface),
    )


def make_roenet_dataset(data: DataSection, seed: int, threads: int = THREADS) -> PairDataset:
    """
    Analytic field pairs u(0) -> u(T_train): Gaussian pulses under linear advection, or
    Riemann problems with randomised states solved exactly. Split by data.train_fraction.
    """

    def make_sample(rng: np.random.Generator) -> dict:
        initial, target = exact_field_pair(rng, data, data.t_train)
        if data.noise_sigma > 0.0:
            initial = initial + rng.normal(0.0, data.noise_sigma, size=initial.shape)
            target = target + rng.normal(0.0, data.noise_sigma, size=target.shape)
        return {"u0": initial, "u1": target}

    samples = generate_parallel(make_sample, data.samples, seed, threads)
    train_count = max(1, int(round(data.train_fraction * data.samples)))
    logger.info(
        "Generated %s %s field pairs (%s training) over T_train=%s",
        data.samples,
        data.system,
        train_count,
        data.t_train,
    )
    return PairDataset(
        kind=DataKind.FIELD,
        t_train=data.t_train,
        noise_sigma=data.noise_sigma,
        arrays=_stack(samples),
        train_count=train_count,
        metadata={"system": data.system, "dx": data.dx, "domain": list(data.domain)},
    )


# ---- vortex frames


def external_drift(data: DataSection) -> ExternalDrift:
    """The data section's synthetic background flow."""
    return ExternalDrift(uniform=tuple(data.external_uniform), shear=data.external_shear)


def _random_strengths(rng: np.random.Generator, data: DataSection, count: int) -> np.ndarray:
    low, high = data.strength_range
    return rng.choice([-1.0, 1.0], size=count) * rng.uniform(low, high, size=count)


def random_vortex_system(
    rng: np.random.Generator, data: DataSection, reg: float
) -> VortexSystem:
    """
    A random configuration in the periodic box: data.min_vortices..data.max_vortices particles
    at least data.min_separation apart, or two co-moving dipoles for the leapfrog layout.
    """
    if data.layout == "leapfrog":
        centre = rng.uniform(0.0, BOX_SIZE, size=2)
        gap = rng.uniform(0.4, 0.6)
        inner, outer = rng.uniform(0.25, 0.35), rng.uniform(0.35, 0.45)
        positions = np.array(
            [
                centre + [0.0, -outer],
                centre + [0.0, outer],
                centre + [gap, -inner],
                centre + [gap, inner],
            ]
        )
        strength = rng.uniform(*data.strength_range)
        gamma = np.array([-strength, strength, -strength, strength])
        return VortexSystem(positions % BOX_SIZE, gamma, reg=reg)

    count = int(rng.integers(data.min_vortices, data.max_vortices + 1))
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        positions = rng.uniform(0.0, BOX_SIZE, size=(count, 2))
        if min_separation(positions, BOX_SIZE) >= data.min_separation:
            return VortexSystem(positions, _random_strengths(rng, data, count), reg=reg)
    raise ValidationError(f"Could not place {count} vortices {data.min_separation} apart")


def vortex_frame_pair(
    system: VortexSystem, data: DataSection, drift: ExternalDrift
) -> tuple[Optional[dict], str]:
    """
    Runs the reference to T_train, rasterises and detects both frames and pairs the detections.

    Returns:
        The padded sample, or None with the reason it was dropped.
    """
    trajectory = reference_trajectory(
        system, data.t_train, fine_dt=data.fine_dt, record_dt=data.t_train, external=drift
    )
    if trajectory.flagged:
        return None, "near-coincident particles"
    first_grid = rasterize_vorticity(system)
    last_grid = rasterize_vorticity(system.moved(trajectory.positions[-1]))
    first, last = detect_vortices(first_grid), detect_vortices(last_grid)
    pairing = pair_vortices(first, last)
    if pairing.rejected:
        return None, pairing.reason
    if not first or len(first) > MAX_VORTICES:
        return None, f"detected {len(first)} vortices"

    positions = np.zeros((MAX_VORTICES, 2))
    target = np.zeros((MAX_VORTICES, 2))
    gamma = np.zeros(MAX_VORTICES)
    mask = np.zeros(MAX_VORTICES)
    for slot, (index_a, index_b) in enumerate(pairing.pairs):
        positions[slot] = first[index_a].pos
        gamma[slot] = first[index_a].strength
        target[slot] = last[index_b].pos
        mask[slot] = 1.0
    vorticity = np.zeros(MAX_VORTICES)
    active = len(pairing.pairs)
    vorticity[:active] = first_grid.sample(positions[:active])
    return {
        "positions": positions,
        "gamma": gamma,
        "vorticity": vorticity,
        "target": target,
        "mask": mask,
    }, ""


def make_vortex_dataset(
    data: DataSection, seed: int, reg: float = 0.1, threads: int = THREADS
) -> PairDataset:
    """
    Paired vortex detections of frames at 0 and T_train from the point-vortex reference.

    Rejected samples (unpaired detections, near-coincident particles) are dropped and counted in
    the metadata; the split by data.train_fraction applies to the kept samples.
    """
    drift = external_drift(data)

    def make_sample(rng: np.random.Generator):
        return vortex_frame_pair(random_vortex_system(rng, data, reg), data, drift)

    results = generate_parallel(make_sample, data.samples, seed, threads)
    kept = [sample for sample, _ in results if sample is not None]
    reasons: dict[str, int] = {}
    for sample, reason in results:
        if sample is None:
            reasons[reason] = reasons.get(reason, 0) + 1
    rejected = data.samples - len(kept)
    if rejected:
        logger.warning("Dropped %s of %s vortex samples: %s", rejected, data.samples, reasons)
    if not kept:
        raise ValidationError("Every vortex sample was rejected")
    train_count = max(1, int(round(data.train_fraction * len(kept))))
    train_count = min(train_count, len(kept))
    logger.info(
        "Generated %s vortex frame pairs (%s training) over T_train=%s",
        len(kept),
        train_count,
        data.t_train,
    )
    return PairDataset(
        kind=DataKind.VORTEX,
        t_train=data.t_train,
        noise_sigma=0.0,
        arrays=_stack(kept),
        train_count=train_count,
        metadata={
            "system": data.system,
            "rejected": rejected,
            "rejection_reasons": reasons,
            "external": drift.as_dict(),
        },
    )
