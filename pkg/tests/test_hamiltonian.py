"""Tests for the analytic systems and the learned Hamiltonian fields."""

import math

import numpy as np
import pytest

from sciml_priors.components.hamiltonian.analytic import (
    AnalyticSystem,
    SystemKind,
    analytic_grads,
    point_vortex_gradient,
    point_vortex_hamiltonian,
)
from sciml_priors.components.hamiltonian.mlp import (
    MlpHamiltonianParams,
    VectorFieldParams,
    mlp_hamiltonian_eval,
    mlp_hamiltonian_grads,
    vector_field_eval,
)
from sciml_priors.components.hamiltonian.pairwise import (
    PairwiseNetParams,
    canonical_order,
    pairwise_vortex_net_eval,
    pairwise_vortex_net_grads,
)
from sciml_priors.components.hamiltonian.taylor import (
    SymmetricTaylorParams,
    taylor_field_eval,
    taylor_field_jacobian,
)
from sciml_priors.components.integrate.rollout import symplectic_defect
from sciml_priors.components.integrate.steppers import PhaseState, forest_ruth_step
from sciml_priors.components.numkit.gradcheck import (
    finite_difference_grad,
    finite_difference_jacobian,
    relative_error,
)
from sciml_priors.components.numkit.layers import as_variables
from sciml_priors.components.numkit.tape import backward_grad, monomial, reduce_sum, value_of
from sciml_priors.utilities.exceptions import ShapeMismatchError, SingularityError


class TestAnalyticSystems:
    """Unit tests for the analytic Hamiltonians"""

    def test_known_values(self):
        """Hand-evaluated energies and gradients."""
        pendulum = AnalyticSystem(SystemKind.PENDULUM)
        assert float(pendulum.energy(np.zeros(1), np.zeros(1))) == pytest.approx(-1.0)
        dh_dq, dh_dp = pendulum.grads(np.zeros(1), np.zeros(1))
        np.testing.assert_array_equal(dh_dq, [0.0])
        np.testing.assert_array_equal(dh_dp, [0.0])

        nonseparable = AnalyticSystem(SystemKind.NONSEPARABLE)
        assert float(nonseparable.energy(np.ones(1), np.ones(1))) == pytest.approx(2.0)

    @pytest.mark.parametrize(
        "kind", [SystemKind.PENDULUM, SystemKind.SPRING, SystemKind.NONSEPARABLE]
    )
    def test_gradients_match_energy(self, kind):
        """Analytic gradients agree with finite differences of the energy."""
        system = AnalyticSystem(kind)
        z = np.array([0.4, -1.3, 0.7, 0.2])
        expected = finite_difference_grad(lambda w: system.energy(w[:2], w[2:]), z)
        dh_dq, dh_dp = analytic_grads(system, z[:2], z[2:])
        np.testing.assert_allclose(np.concatenate([dh_dq, dh_dp]), expected, atol=1e-8)

    def test_separable_fields(self):
        """Only separable systems expose kinetic and potential gradients."""
        pendulum = AnalyticSystem(SystemKind.PENDULUM)
        np.testing.assert_allclose(pendulum.potential_gradient(np.array([math.pi / 2])), [1.0])
        with pytest.raises(ShapeMismatchError):
            AnalyticSystem(SystemKind.NONSEPARABLE).kinetic_gradient(np.ones(1))

    def test_point_vortex_pair(self):
        """Two unit vortices a unit apart rotate each other at speed 1/(2π)."""
        system = AnalyticSystem(SystemKind.POINT_VORTEX, strengths=(1.0, 1.0))
        q, p = np.array([0.0, 1.0]), np.array([0.0, 0.0])
        assert float(system.energy(q, p)) == pytest.approx(0.0)

        dq_dt, dp_dt = system.vector_field(q, p)
        np.testing.assert_allclose(dq_dt, [0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(dp_dt, [-1.0 / (2.0 * math.pi), 1.0 / (2.0 * math.pi)])

    def test_point_vortex_gradient(self):
        """The point-vortex gradient agrees with finite differences of the energy."""
        gamma = np.array([1.0, -0.5, 0.8])
        positions = np.array([[0.0, 0.0], [1.0, 0.3], [-0.4, 0.9]])
        expected = finite_difference_grad(
            lambda flat: point_vortex_hamiltonian(gamma, flat.reshape(3, 2)), positions.ravel()
        )
        np.testing.assert_allclose(
            point_vortex_gradient(gamma, positions).ravel(), expected, atol=1e-8
        )

    def test_coincident_vortices(self):
        """Coincident particles have no defined energy."""
        with pytest.raises(SingularityError):
            point_vortex_hamiltonian(np.ones(2), np.zeros((2, 2)))


class TestSymmetricTaylor:
    """Unit tests for the symmetric Taylor field"""

    layout = SymmetricTaylorParams(dimension=3, terms=4, hidden=5)

    def _params(self):
        params: dict = {}
        self.layout.initialise(params, np.random.default_rng(0))
        return params

    def test_jacobian_is_symmetric(self):
        """The analytic Jacobian is symmetric and matches finite differences of the field."""
        params = self._params()
        v = np.array([0.3, -0.8, 1.1])
        jacobian = taylor_field_jacobian(self.layout, params, v)
        np.testing.assert_allclose(jacobian, jacobian.T, atol=1e-14)

        expected = finite_difference_jacobian(
            lambda point: taylor_field_eval(self.layout, params, point), v
        )
        np.testing.assert_allclose(jacobian, expected, atol=1e-7)

    def test_zero_input(self):
        """At v = 0 every Taylor term vanishes and the field is the bias."""
        params = self._params()
        params[self.layout.bias_name] = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(
            taylor_field_eval(self.layout, params, np.zeros((2, 3))), [[1.0, 2.0, 3.0]] * 2
        )

    def test_parameter_gradient(self):
        """Gradients with respect to A_1 agree with finite differences."""
        params = self._params()
        v = np.array([[0.3, -0.8, 1.1], [0.5, 0.1, -0.2]])
        name, _ = self.layout.weight_names(1)

        def loss_of(weight):
            trial = dict(params, **{name: weight.reshape(params[name].shape)})
            return np.sum(taylor_field_eval(self.layout, trial, v) ** 2) / 2.0

        loss = reduce_sum(monomial(taylor_field_eval(self.layout, as_variables(params), v), 2))
        expected = finite_difference_grad(loss_of, params[name].ravel())
        assert relative_error(backward_grad(loss)[name].ravel(), expected) < 1e-6

    def test_shape_mismatch(self):
        """Inputs of the wrong width are refused."""
        with pytest.raises(ShapeMismatchError):
            taylor_field_eval(self.layout, self._params(), np.ones(2))


class TestSymplecticSplitting:
    """Unit tests for splitting steps driven by learned fields"""

    kinetic = SymmetricTaylorParams(dimension=2, terms=4, hidden=5, prefix="kinetic")
    potential = SymmetricTaylorParams(dimension=2, terms=4, hidden=5, prefix="potential")

    @staticmethod
    def _step_map(kinetic_field, potential_field, dt):
        def step_map(z):
            state = forest_ruth_step(kinetic_field, potential_field, PhaseState(z[:2], z[2:]), dt)
            return np.concatenate([state.q, state.p])

        return step_map

    @pytest.mark.parametrize("seed", range(20))
    def test_taylor_fields_are_symplectic(self, seed):
        """Steps built from symmetric Taylor fields satisfy JᵀΩJ = Ω for every draw."""
        rng = np.random.default_rng(seed)
        params: dict = {}
        self.kinetic.initialise(params, rng)
        self.potential.initialise(params, rng)
        z = rng.uniform(-1.0, 1.0, size=4)
        jacobian = taylor_field_jacobian(self.kinetic, params, z[2:])
        assert np.max(np.abs(jacobian - jacobian.T)) < 1e-10

        step_map = self._step_map(
            lambda p: taylor_field_eval(self.kinetic, params, p),
            lambda q: taylor_field_eval(self.potential, params, q),
            0.1,
        )
        assert symplectic_defect(step_map, z) < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_unconstrained_fields_are_not_symplectic(self, seed):
        """Two-layer networks with asymmetric Jacobians break JᵀΩJ = Ω."""
        rng = np.random.default_rng(seed)
        kinetic = VectorFieldParams(n_in=2, n_out=2, width=8, layers=2, prefix="kinetic")
        potential = VectorFieldParams(n_in=2, n_out=2, width=8, layers=2, prefix="potential")
        params: dict = {}
        kinetic.initialise(params, rng)
        potential.initialise(params, rng)
        params = {name: 3.0 * array for name, array in params.items()}

        step_map = self._step_map(
            lambda p: vector_field_eval(kinetic, params, p[None, :])[0],
            lambda q: vector_field_eval(potential, params, q[None, :])[0],
            0.5,
        )
        assert symplectic_defect(step_map, rng.uniform(-0.5, 0.5, size=4)) > 1e-3


def test_mlp_hamiltonian_grads():
    """The assembled gradient of H_θ agrees with finite differences of H_θ."""
    layout = MlpHamiltonianParams(dimension=2, width=8, layers=3)
    params: dict = {}
    layout.initialise(params, np.random.default_rng(1))
    z = np.array([0.3, -0.2, 0.9, 0.4])

    dh_dq, dh_dp = mlp_hamiltonian_grads(layout, params, z[None, :2], z[None, 2:])
    expected = finite_difference_grad(
        lambda w: mlp_hamiltonian_eval(layout, params, w[None, :2], w[None, 2:])[0, 0], z
    )
    np.testing.assert_allclose(np.concatenate([dh_dq[0], dh_dp[0]]), expected, atol=1e-8)

    with pytest.raises(ShapeMismatchError):
        mlp_hamiltonian_eval(layout, params, z[:2], z[2:])


def test_vector_field_shapes():
    """The unconstrained field maps (batch, n_in) to (batch, n_out)."""
    layout = VectorFieldParams(n_in=4, n_out=4, width=8)
    params: dict = {}
    layout.initialise(params, np.random.default_rng(2))
    assert vector_field_eval(layout, params, np.ones((3, 4))).shape == (3, 4)
    with pytest.raises(ShapeMismatchError):
        vector_field_eval(layout, params, np.ones((3, 2)))


class TestPairwise:
    """Unit tests for the learned pairwise vortex Hamiltonian"""

    layout = PairwiseNetParams(width=8, layers=3)
    gamma = np.array([1.0, -0.5, 0.8, 0.3])
    positions = np.array([[0.1, 0.2], [1.0, 0.3], [-0.4, 0.9], [0.5, -0.6]])

    def _params(self):
        params: dict = {}
        self.layout.initialise(params, np.random.default_rng(3))
        return params

    def test_permutation_invariance(self):
        """Relabelling the particles leaves the energy exactly unchanged."""
        params = self._params()
        energy = pairwise_vortex_net_eval(self.layout, params, self.gamma, self.positions)
        permutation = np.array([2, 0, 3, 1])
        permuted = pairwise_vortex_net_eval(
            self.layout, params, self.gamma[permutation], self.positions[permutation]
        )
        assert float(permuted) == float(energy)
        np.testing.assert_array_equal(
            self.positions[canonical_order(self.gamma, self.positions)],
            self.positions[permutation][
                canonical_order(self.gamma[permutation], self.positions[permutation])
            ],
        )

    def test_gradients_match_energy(self):
        """The assembled particle gradients agree with finite differences of the energy."""
        params = self._params()
        grads = pairwise_vortex_net_grads(
            self.layout, params, self.gamma[None], self.positions[None]
        )
        expected = finite_difference_grad(
            lambda flat: pairwise_vortex_net_eval(
                self.layout, params, self.gamma[None], flat.reshape(1, 4, 2)
            )[0],
            self.positions.ravel(),
        )
        np.testing.assert_allclose(np.asarray(value_of(grads)).ravel(), expected, atol=1e-8)

    def test_single_particle(self):
        """One particle has no pairs, so energy and gradient vanish."""
        params = self._params()
        energy = pairwise_vortex_net_eval(self.layout, params, np.ones(1), np.zeros((1, 2)))
        assert float(energy) == 0.0
        np.testing.assert_array_equal(
            pairwise_vortex_net_grads(self.layout, params, np.ones(1), np.zeros((1, 2))),
            np.zeros((1, 2)),
        )
