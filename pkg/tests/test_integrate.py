"""Tests for the time integrators, rollouts and the symplecticity checks."""

import math

import numpy as np
import pytest

from sciml_priors.components.hamiltonian.analytic import AnalyticSystem, SystemKind
from sciml_priors.components.integrate.rollout import (
    estimate_order,
    parallelogram_areas,
    rollout,
    stack_phase,
    step_count,
    symplectic_defect,
    write_trajectory_csv,
)
from sciml_priors.components.integrate.steppers import (
    FOREST_RUTH,
    ExtendedPhaseState,
    PhaseState,
    TaoConfig,
    euler_step,
    forest_ruth_step,
    rk4_step,
    tao_flow_a,
    tao_flow_b,
    tao_flow_c,
    tao_strang_step,
)
from sciml_priors.utilities.exceptions import NonFiniteError
from sciml_priors.utilities.helperfunctions import read_csv

SPRING = AnalyticSystem(SystemKind.SPRING)
PENDULUM = AnalyticSystem(SystemKind.PENDULUM)
NONSEPARABLE = AnalyticSystem(SystemKind.NONSEPARABLE)
LADDER = [0.1, 0.05, 0.025, 0.0125]


def _spring_exact(time: float) -> PhaseState:
    return PhaseState(q=np.array([math.cos(time)]), p=np.array([-math.sin(time)]))


def _forest_ruth(system: AnalyticSystem):
    def step(state, dt):
        return forest_ruth_step(system.kinetic_gradient, system.potential_gradient, state, dt)

    return step


def _tao(system: AnalyticSystem, omega: float):
    def step(state, dt):
        return tao_strang_step(system.canonical_grads, state, TaoConfig(omega=omega, dt=dt))

    return step


def _extended_flat(state: ExtendedPhaseState) -> np.ndarray:
    return np.concatenate([np.ravel(part) for part in (state.q, state.p, state.x, state.y)])


def _extended_from_flat(z: np.ndarray) -> ExtendedPhaseState:
    return ExtendedPhaseState(q=z[0:1], p=z[1:2], x=z[2:3], y=z[3:4])


class TestSimpleSteppers:
    """Unit tests for Euler and RK4"""

    def test_zero_field_is_identity(self):
        """A vanishing derivative leaves the state unchanged."""
        y = np.array([1.0, -2.0])
        np.testing.assert_array_equal(euler_step(lambda t, y: 0.0 * y, y, 0.1), y)
        np.testing.assert_array_equal(rk4_step(lambda t, y: 0.0 * y, y, 0.1), y)

    def test_exponential_growth(self):
        """One step of dy/dt = y from y = 1 with dt = 0.1."""
        y = np.array([1.0])
        np.testing.assert_allclose(euler_step(lambda t, y: y, y, 0.1), [1.1])
        result = rk4_step(lambda t, y: y, y, 0.1)
        np.testing.assert_allclose(result, [1.1051708333333333], rtol=1e-14)
        assert abs(result[0] - math.exp(0.1)) < 1e-6

    def test_invalid_step(self):
        """Non-positive steps and non-finite derivatives are refused."""
        with pytest.raises(ValueError):
            euler_step(lambda t, y: y, np.ones(1), 0.0)
        with pytest.raises(NonFiniteError):
            rk4_step(lambda t, y: y * np.inf, np.ones(1), 0.1)

    def test_orders(self):
        """Euler converges at first order on dy/dt = y and RK4 at fourth on the oscillator."""
        euler = estimate_order(
            lambda y, dt: euler_step(lambda t, y: y, y, dt),
            np.array([1.0]),
            lambda t: np.array([math.exp(t)]),
            1.0,
            LADDER,
        )
        assert euler.slope == pytest.approx(1.0, abs=0.3)

        def rotation(t, z):
            return np.array([z[1], -z[0]])

        rk4 = estimate_order(
            lambda z, dt: rk4_step(rotation, z, dt),
            np.array([1.0, 0.0]),
            lambda t: np.array([math.cos(t), -math.sin(t)]),
            1.0,
            LADDER,
        )
        assert rk4.slope == pytest.approx(4.0, abs=0.3)


class TestForestRuth:
    """Unit tests for the fourth-order symplectic step"""

    def test_coefficients(self):
        """The closed forms evaluate to the known decimals and the fractions sum to one."""
        np.testing.assert_allclose(
            FOREST_RUTH.c, [0.6756035960, -0.1756035960, -0.1756035960, 0.6756035960], atol=1e-10
        )
        np.testing.assert_allclose(
            FOREST_RUTH.d, [1.3512071919, -1.7024143839, 1.3512071919, 0.0], atol=1e-10
        )
        assert sum(FOREST_RUTH.c) == pytest.approx(1.0)
        assert sum(FOREST_RUTH.d) == pytest.approx(1.0)

    def test_zero_fields_are_identity(self):
        """Vanishing fields leave the state unchanged."""
        state = PhaseState(q=np.array([0.3]), p=np.array([-0.2]))
        result = forest_ruth_step(lambda p: 0.0 * p, lambda q: 0.0 * q, state, 0.1)
        np.testing.assert_array_equal(result.q, state.q)
        np.testing.assert_array_equal(result.p, state.p)

    def test_fourth_order(self):
        """The global error on the spring falls with slope four."""
        estimate = estimate_order(
            _forest_ruth(SPRING), _spring_exact(0.0), _spring_exact, 1.0, LADDER
        )
        assert estimate.slope == pytest.approx(4.0, abs=0.3)

    def test_reversibility(self):
        """A step with dt followed by one with -dt returns to the start."""
        state = PhaseState(q=np.array([1.1, -0.4]), p=np.array([0.3, 0.9]))
        step = _forest_ruth(PENDULUM)
        back = step(step(state, 0.1), -0.1)
        np.testing.assert_allclose(back.q, state.q, atol=1e-10)
        np.testing.assert_allclose(back.p, state.p, atol=1e-10)

    def test_symplectic(self):
        """The step map of gradient fields satisfies JᵀΩJ = Ω and preserves small areas."""
        step = _forest_ruth(PENDULUM)

        def step_map(z):
            result = step(PhaseState(q=z[:2], p=z[2:]), 0.1)
            return np.concatenate([result.q, result.p])

        z = np.array([0.7, -1.2, 0.4, 0.1])
        assert symplectic_defect(step_map, z) < 1e-6

        before, after = parallelogram_areas(
            step_map, z, np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0, 0.0])
        )
        assert after == pytest.approx(before, rel=1e-3)

    def test_energy_is_bounded(self):
        """On the spring the energy error stays bounded while RK4 drifts monotonically."""
        steps, dt = 10_000, 0.1
        state = _spring_exact(0.0)
        fr_step = _forest_ruth(SPRING)
        fr_errors = []
        for _ in range(steps):
            state = fr_step(state, dt)
            fr_errors.append(abs(float(SPRING.energy(state.q, state.p)) - 0.5))
        first, second = max(fr_errors[: steps // 2]), max(fr_errors[steps // 2 :])
        assert second <= 1.5 * first + 1e-12

        z = np.array([1.0, 0.0])
        energies = [0.5]
        for _ in range(steps):
            z = rk4_step(lambda t, z: np.array([z[1], -z[0]]), z, dt)
            energies.append(0.5 * float(z @ z))
        assert np.all(np.diff(energies) < 0.0)


class TestTao:
    """Unit tests for the extended phase space integrator"""

    def test_binding_rotation(self):
        """With 2ωδ = π/2 the binding flow maps (1, 0, 0, 0) to (½, −½, ½, ½)."""
        state = ExtendedPhaseState(q=1.0, p=0.0, x=0.0, y=0.0)
        result = tao_flow_c(state, delta=math.pi / 4.0, omega=1.0)
        np.testing.assert_allclose(
            [result.q, result.p, result.x, result.y], [0.5, -0.5, 0.5, 0.5], atol=1e-15
        )

    def test_zero_step_is_identity(self):
        """dt = 0 leaves the extended state unchanged."""
        state = ExtendedPhaseState(
            q=np.array([0.3]), p=np.array([0.8]), x=np.array([0.25]), y=np.array([0.9])
        )
        result = tao_strang_step(NONSEPARABLE.grads, state, TaoConfig(omega=10.0, dt=0.0))
        np.testing.assert_allclose(_extended_flat(result), _extended_flat(state), atol=1e-15)

    def test_sub_maps_are_symplectic(self):
        """Each flow map preserves dq∧dp + dx∧dy on the extended space."""
        z = np.array([0.6, -0.3, 0.65, -0.25])
        maps = [
            lambda s: tao_flow_a(NONSEPARABLE.grads, s, 0.1),
            lambda s: tao_flow_b(NONSEPARABLE.grads, s, 0.1),
            lambda s: tao_flow_c(s, 0.1, 10.0),
        ]
        for flow in maps:
            defect = symplectic_defect(
                lambda point, flow=flow: _extended_flat(flow(_extended_from_flat(point))),
                z,
                blocks=2,
            )
            assert defect < 1e-6

    def test_second_order(self):
        """The global error on the spring falls with slope two at fixed ω."""
        initial = ExtendedPhaseState.from_phase(_spring_exact(0.0))
        estimate = estimate_order(
            _tao(SPRING, 10.0), initial, _spring_exact, 1.0, [0.02, 0.01, 0.005, 0.0025]
        )
        assert estimate.slope == pytest.approx(2.0, abs=0.3)

    def test_auxiliary_copies_track_the_state(self):
        """The copies (x, y) stay close to (q, p), closer for a stronger binding."""
        deviations = {}
        for omega in (1.0, 10.0, 100.0):
            trajectory = rollout(
                _tao(SPRING, omega), ExtendedPhaseState.from_phase(_spring_exact(0.0)), 0, 10, 0.01
            )
            deviations[omega] = max(
                float(np.linalg.norm(s.x - s.q) + np.linalg.norm(s.y - s.p))
                for s in trajectory.states
            )
        assert deviations[10.0] < 1e-3
        assert deviations[100.0] <= deviations[10.0] <= deviations[1.0]


def test_rollout():
    """Rollouts hold n + 1 states; zero length returns the start and two steps compose."""
    step = _forest_ruth(PENDULUM)
    start = PhaseState(q=np.array([0.5]), p=np.array([0.0]))

    assert len(rollout(step, start, 0.0, 0.0, 0.1)) == 1

    trajectory = rollout(step, start, 0.0, 0.2, 0.1)
    assert len(trajectory) == 3
    assert trajectory.times == pytest.approx([0.0, 0.1, 0.2])
    composed = step(step(start, 0.1), 0.1)
    np.testing.assert_array_equal(trajectory.final.q, composed.q)

    q, p = stack_phase(trajectory)
    assert q.shape == p.shape == (3, 1)


def test_step_count():
    """floor((t - t0)/dt) with round-off absorbed."""
    assert step_count(0.0, 20.0 * math.pi, 0.01) == 6283
    assert step_count(0.0, 0.06, 0.001) == 60
    with pytest.raises(ValueError):
        step_count(1.0, 0.0, 0.1)


def test_estimate_order_validation():
    """Short or non-geometric ladders are rejected; exact schemes report no slope."""
    def identity(y, dt):  # pylint: disable=unused-argument
        return y

    with pytest.raises(ValueError):
        estimate_order(identity, np.ones(1), lambda t: np.ones(1), 1.0, [0.1, 0.05, 0.025])
    with pytest.raises(ValueError):
        estimate_order(identity, np.ones(1), lambda t: np.ones(1), 1.0, [0.1, 0.05, 0.02, 0.01])
    estimate = estimate_order(identity, np.ones(1), lambda t: np.ones(1), 1.0, LADDER)
    assert estimate.exact


def test_write_trajectory_csv(tmp_path):
    """The trajectory export names its columns and writes one row per time."""
    path = tmp_path / "trajectory.csv"
    q = np.array([[1.0, 2.0], [3.0, 4.0]])
    p = np.array([[0.5, 0.25], [0.125, 0.0]])
    write_trajectory_csv(path, [0.0, 0.1], q, p, energy=np.array([1.0, 1.5]))

    header, rows = read_csv(path)
    assert header == ["t", "q_1", "q_2", "p_1", "p_2", "H"]
    assert rows[1] == ["0.10000000000000001", "3", "4", "0.125", "0", "1.5"]
