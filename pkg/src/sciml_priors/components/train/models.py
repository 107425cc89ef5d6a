"""
Trainable model families.

Every family knows its parameter layout, how to advance a state by one step and its training
loss over a batch of dataset samples. The same code runs on plain arrays for evaluation and on
TapeNode variables for training.
"""
import abc
import logging
from dataclasses import asdict, dataclass
from typing import Any, ClassVar

import numpy as np

from sciml_priors.components.hamiltonian.mlp import (
    MlpHamiltonianParams,
    VectorFieldParams,
    mlp_hamiltonian_grads,
    vector_field_eval,
)
from sciml_priors.components.hamiltonian.pairwise import (
    PairwiseNetParams,
    pairwise_vortex_net_grads,
)
from sciml_priors.components.hamiltonian.taylor import SymmetricTaylorParams, taylor_field_eval
from sciml_priors.components.hyperbolic.grid import BoundaryCondition, GridField1D
from sciml_priors.components.hyperbolic.roenet import RoeNetModel, roenet_step
from sciml_priors.components.integrate.rollout import step_count
from sciml_priors.components.integrate.steppers import (
    ExtendedPhaseState,
    PhaseState,
    TaoConfig,
    forest_ruth_step,
    rk4_step,
    tao_strang_step,
)
from sciml_priors.components.numkit.layers import Parameters
from sciml_priors.components.numkit.tape import concat, reshape, shape_of, take, value_of
from sciml_priors.components.train.losses import loss_l1, loss_mse, parameter_penalty
from sciml_priors.components.vortex.dynamics import (
    DynamicsNetParams,
    nvm_step,
    periodic_difference,
)
from sciml_priors.components.vortex.system import BOX_SIZE, VortexSystem
from sciml_priors.configuration.presets import DataKind, ExperimentPreset, ModelFamily
from sciml_priors.utilities.exceptions import ValidationError

logger = logging.getLogger(__name__)


class Surrogate(abc.ABC):
    """A trainable model family bound to its hyperparameters."""

    family: ClassVar[ModelFamily]
    data_kind: ClassVar[DataKind]

    @abc.abstractmethod
    def initialise(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Fresh parameters."""

    @abc.abstractmethod
    def loss(self, params: Parameters, batch: dict[str, np.ndarray]) -> Any:
        """Training loss of a batch; a graph node when params are variables."""

    def hyperparameters(self) -> dict:
        """Everything needed to rebuild the model, as stored in checkpoints."""
        return asdict(self)  # pylint: disable=no-member


# ---- phase space models


class PhaseSurrogate(Surrogate):
    """A learned integrator over (q, p) with a fixed step dt, trained on endpoint pairs."""

    data_kind = DataKind.PHASE
    dt: float
    t_train: float

    @abc.abstractmethod
    def start(self, q, p, batch: dict) -> Any:
        """Integrator state at t = 0."""

    @abc.abstractmethod
    def advance(self, params: Parameters, state: Any, batch: dict) -> Any:
        """One step of size dt."""

    @abc.abstractmethod
    def phase(self, state: Any) -> tuple:
        """(q, p) of an integrator state."""

    def aux_loss(self, state: Any, batch: dict) -> Any:
        """Extra loss terms on the final state."""
        del state, batch
        return 0.0

    def loss(self, params: Parameters, batch: dict[str, np.ndarray]) -> Any:
        """L1 distance of the rolled-out endpoint to the target endpoint."""
        state = self.start(batch["q0"], batch["p0"], batch)
        for _ in range(step_count(0.0, self.t_train, self.dt)):
            state = self.advance(params, state, batch)
        q, p = self.phase(state)
        target = np.concatenate([batch["q1"], batch["p1"]], axis=-1)
        return loss_l1(concat([q, p], axis=-1), target) + self.aux_loss(state, batch)

    def predict(
        self, params: dict[str, np.ndarray], q0, p0, horizon: float, extra: dict = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Rollout with the numpy parameters.

        Args:
            params: Parameter arrays.
            q0: Initial positions of shape (batch, N).
            p0: Initial momenta of shape (batch, N).
            horizon: Final time.
            extra: Additional batch arrays, e.g. vortex strengths.

        Returns:
            Times (T+1,), q and p of shape (T+1, batch, N).
        """
        batch = dict(extra or {})
        state = self.start(np.asarray(q0, dtype=np.float64), np.asarray(p0, np.float64), batch)
        steps = step_count(0.0, horizon, self.dt)
        q_path, p_path = [], []
        for index in range(steps + 1):
            if index:
                state = self.advance(params, state, batch)
            q, p = self.phase(state)
            q_path.append(value_of(q))
            p_path.append(value_of(p))
        logger.debug("%s rollout of %s steps", self.family.value, steps)
        return self.dt * np.arange(steps + 1), np.stack(q_path), np.stack(p_path)


@dataclass(frozen=True)
class TaylorNet(PhaseSurrogate):
    """Two symmetric Taylor fields T_p(p) and V_q(q) in the fourth-order splitting step."""

    family = ModelFamily.TAYLOR_NET

    dimension: int
    terms: int
    hidden: int
    dt: float
    t_train: float

    @property
    def kinetic(self) -> SymmetricTaylorParams:
        """Layout of T_p."""
        return SymmetricTaylorParams(self.dimension, self.terms, self.hidden, prefix="taylor.T")

    @property
    def potential(self) -> SymmetricTaylorParams:
        """Layout of V_q."""
        return SymmetricTaylorParams(self.dimension, self.terms, self.hidden, prefix="taylor.V")

    def initialise(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        params: dict = {}
        self.kinetic.initialise(params, rng)
        self.potential.initialise(params, rng)
        return params

    def start(self, q, p, batch: dict) -> PhaseState:
        return PhaseState(q=q, p=p)

    def advance(self, params: Parameters, state: PhaseState, batch: dict) -> PhaseState:
        return forest_ruth_step(
            lambda p: taylor_field_eval(self.kinetic, params, p),
            lambda q: taylor_field_eval(self.potential, params, q),
            state,
            self.dt,
        )

    def phase(self, state: PhaseState) -> tuple:
        return state.q, state.p


class _ExtendedSurrogate(PhaseSurrogate):
    """Learned Hamiltonians integrated in the extended phase space."""

    omega: float

    @abc.abstractmethod
    def grads(self, params: Parameters, batch: dict):
        """Callable (q, p) -> gradients driving dq/dt = g_p, dp/dt = -g_q."""

    def start(self, q, p, batch: dict) -> ExtendedPhaseState:
        return ExtendedPhaseState.from_phase(PhaseState(q=q, p=p))

    def advance(self, params: Parameters, state: ExtendedPhaseState, batch: dict):
        return tao_strang_step(
            self.grads(params, batch), state, TaoConfig(omega=self.omega, dt=self.dt)
        )

    def phase(self, state: ExtendedPhaseState) -> tuple:
        return state.q, state.p

    def aux_loss(self, state: ExtendedPhaseState, batch: dict) -> Any:
        """The auxiliary copies are pulled towards the target as well."""
        target = np.concatenate([batch["q1"], batch["p1"]], axis=-1)
        return loss_l1(concat([state.x, state.y], axis=-1), target)


@dataclass(frozen=True)
class Nssnn(_ExtendedSurrogate):
    """A multilayer H_θ(q, p) in the extended phase space integrator."""

    family = ModelFamily.NSSNN

    dimension: int
    width: int
    layers: int
    omega: float
    dt: float
    t_train: float

    @property
    def hamiltonian(self) -> MlpHamiltonianParams:
        """Layout of H_θ."""
        return MlpHamiltonianParams(self.dimension, self.width, self.layers, prefix="nssnn.H")

    def initialise(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        params: dict = {}
        self.hamiltonian.initialise(params, rng)
        return params

    def grads(self, params: Parameters, batch: dict):
        return lambda q, p: mlp_hamiltonian_grads(self.hamiltonian, params, q, p)


@dataclass(frozen=True)
class VortexHamiltonian(_ExtendedSurrogate):
    """
    The pairwise vortex Hamiltonian in the extended phase space integrator. q holds the x and
    p the y coordinates; the strengths come with the batch as "gamma".
    """

    family = ModelFamily.VORTEX_HAMILTONIAN

    particles: int
    width: int
    layers: int
    omega: float
    dt: float
    t_train: float

    @property
    def pair(self) -> PairwiseNetParams:
        """Layout of the pair network."""
        return PairwiseNetParams(self.width, self.layers, prefix="pair")

    def initialise(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        params: dict = {}
        self.pair.initialise(params, rng)
        return params

    def grads(self, params: Parameters, batch: dict):
        gamma = np.asarray(batch["gamma"], dtype=np.float64)
        # Γ dx/dt = -dH/dy and Γ dy/dt = dH/dx in canonical form
        scale = -1.0 / gamma

        def canonical(q, p):
            shape = tuple(shape_of(q))
            positions = concat([reshape(q, shape + (1,)), reshape(p, shape + (1,))], axis=-1)
            grad = pairwise_vortex_net_grads(self.pair, params, gamma, positions)
            dh_dx = reshape(take(grad, [0], axis=-1), shape)
            dh_dy = reshape(take(grad, [1], axis=-1), shape)
            return dh_dx * scale, dh_dy * scale

        return canonical


class _FlatSurrogate(PhaseSurrogate):
    """RK4 on the stacked state z = (q, p)."""

    dimension: int

    @abc.abstractmethod
    def derivative(self, params: Parameters, z):
        """dz/dt."""

    def start(self, q, p, batch: dict):
        return concat([q, p], axis=-1)

    def advance(self, params: Parameters, state, batch: dict):
        return rk4_step(lambda _t, z: self.derivative(params, z), state, self.dt)

    def phase(self, state) -> tuple:
        n = self.dimension
        return take(state, np.arange(n), axis=-1), take(state, np.arange(n, 2 * n), axis=-1)


@dataclass(frozen=True)
class Hrk(_FlatSurrogate):
    """A multilayer H_θ integrated by RK4."""

    family = ModelFamily.HRK

    dimension: int
    width: int
    layers: int
    dt: float
    t_train: float

    @property
    def hamiltonian(self) -> MlpHamiltonianParams:
        """Layout of H_θ."""
        return MlpHamiltonianParams(self.dimension, self.width, self.layers, prefix="hrk.H")

    def initialise(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        params: dict = {}
        self.hamiltonian.initialise(params, rng)
        return params

    def derivative(self, params: Parameters, z):
        q, p = self.phase(z)
        dh_dq, dh_dp = mlp_hamiltonian_grads(self.hamiltonian, params, q, p)
        return concat([dh_dp, dh_dq * -1.0], axis=-1)


@dataclass(frozen=True)
class OdeRk4(_FlatSurrogate):
    """An unconstrained network for (dq/dt, dp/dt) integrated by RK4."""

    family = ModelFamily.ODE_RK4

    dimension: int
    width: int
    layers: int
    dt: float
    t_train: float

    @property
    def field(self) -> VectorFieldParams:
        """Layout of the vector field."""
        return VectorFieldParams(
            2 * self.dimension, 2 * self.dimension, self.width, self.layers, prefix="ode"
        )

    def initialise(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        params: dict = {}
        self.field.initialise(params, rng)
        return params

    def derivative(self, params: Parameters, z):
        return vector_field_eval(self.field, params, z)


# ---- grid fields


@dataclass(frozen=True)
class RoeNetSurrogate(Surrogate):
    """RoeNet stepping u(0) to u(T_train), trained with MSE plus an L2 parameter penalty."""

    family = ModelFamily.ROENET
    data_kind = DataKind.FIELD

    components: int
    hidden: int
    blocks: int
    width: int
    dt: float
    t_train: float
    dx: float
    bc: str
    x0: float
    l2_weight: float

    @property
    def model(self) -> RoeNetModel:
        """Layout of the factor networks."""
        return RoeNetModel(self.components, self.hidden, self.blocks, self.width)

    def initialise(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        params: dict = {}
        self.model.initialise(params, rng)
        return params

    def field(self, u) -> GridField1D:
        """A grid field on the model's grid."""
        return GridField1D(u=u, dx=self.dx, bc=BoundaryCondition(self.bc), x0=self.x0)

    def loss(self, params: Parameters, batch: dict[str, np.ndarray]) -> Any:
        model = self.model
        state = self.field(batch["u0"])
        for _ in range(step_count(0.0, self.t_train, self.dt)):
            state = roenet_step(model, params, state, self.dt)
        return loss_mse(state.u, batch["u1"]) + parameter_penalty(params, self.l2_weight)


# ---- vortex dynamics


@dataclass(frozen=True)
class VortexDynamics(Surrogate):
    """The neural vortex dynamics network stepped by RK4 over T_train on padded samples."""

    family = ModelFamily.VORTEX_DYNAMICS
    data_kind = DataKind.VORTEX

    width: int
    blocks: int
    dt: float
    t_train: float
    reg: float
    period: float = BOX_SIZE

    @property
    def network(self) -> DynamicsNetParams:
        """Layout of θ₁ and θ₂."""
        return DynamicsNetParams(self.width, self.blocks)

    def initialise(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        params: dict = {}
        self.network.initialise(params, rng)
        return params

    def loss(self, params: Parameters, batch: dict[str, np.ndarray]) -> Any:
        """Periodic L1 position error over the particles present in each sample."""
        mask = batch["mask"]
        system = VortexSystem(batch["positions"], batch["gamma"], reg=self.reg, period=self.period)
        for _ in range(step_count(0.0, self.t_train, self.dt)):
            system = nvm_step(
                self.network, params, system, batch["vorticity"], self.dt, mask=mask
            )
        difference = periodic_difference(system.positions, batch["target"], self.period)
        return loss_l1(difference, 0.0, mask=mask[..., None])


SURROGATES: dict[ModelFamily, type] = {
    ModelFamily.TAYLOR_NET: TaylorNet,
    ModelFamily.NSSNN: Nssnn,
    ModelFamily.HRK: Hrk,
    ModelFamily.ODE_RK4: OdeRk4,
    ModelFamily.VORTEX_HAMILTONIAN: VortexHamiltonian,
    ModelFamily.ROENET: RoeNetSurrogate,
    ModelFamily.VORTEX_DYNAMICS: VortexDynamics,
}


def build_surrogate(family: ModelFamily, preset: ExperimentPreset) -> Surrogate:
    """
    The model of a family configured from a preset. Baselines are built from the same preset
    as the model they are compared with.
    """
    data, model = preset.data, preset.model
    family = ModelFamily(family)
    if family is ModelFamily.TAYLOR_NET:
        return TaylorNet(data.particles, model.terms, model.hidden, data.dt, data.t_train)
    if family is ModelFamily.NSSNN:
        return Nssnn(data.particles, model.width, model.layers, model.omega, data.dt, data.t_train)
    if family is ModelFamily.HRK:
        return Hrk(data.particles, model.width, model.layers, data.dt, data.t_train)
    if family is ModelFamily.ODE_RK4:
        return OdeRk4(data.particles, model.width, model.layers, data.dt, data.t_train)
    if family is ModelFamily.VORTEX_HAMILTONIAN:
        return VortexHamiltonian(
            data.particles, model.width, model.layers, model.omega, data.dt, data.t_train
        )
    if family is ModelFamily.ROENET:
        periodic = data.system == "1c-linear"
        bc = BoundaryCondition.PERIODIC if periodic else BoundaryCondition.REPLICATE
        return RoeNetSurrogate(
            components=model.components,
            hidden=model.hidden,
            blocks=model.blocks,
            width=model.width,
            dt=data.dt,
            t_train=data.t_train,
            dx=data.dx,
            bc=bc.value,
            x0=data.domain[0],
            l2_weight=preset.training.l2_weight,
        )
    return VortexDynamics(model.width, model.blocks, data.dt, data.t_train, model.reg)


def surrogate_from_hyperparameters(family: str, hyperparameters: dict) -> Surrogate:
    """
    Rebuilds a model from a checkpoint's family tag and hyperparameters.

    Raises:
        ValidationError: Unknown family or hyperparameters that do not fit it.
    """
    try:
        return SURROGATES[ModelFamily(family)](**hyperparameters)
    except (ValueError, TypeError) as error:
        logger.error("Cannot rebuild a %s model: %s", family, error)
        raise ValidationError(f"Cannot rebuild a '{family}' model: {error}") from error
