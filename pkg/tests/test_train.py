"""Tests for the optimiser, losses, metrics, dataset builders, model families and trainer."""

import math

import numpy as np
import pytest

from sciml_priors.components.hamiltonian.analytic import AnalyticSystem, SystemKind
from sciml_priors.components.train.datasets import (
    MAX_VORTICES,
    PairDataset,
    make_hamiltonian_dataset,
    make_roenet_dataset,
    make_vortex_dataset,
    reference_flow,
    vortex_frame_pair,
)
from sciml_priors.components.train.losses import (
    loss_binary_cross_entropy,
    loss_cross_entropy,
    loss_focal,
    loss_l1,
    loss_mse,
    parameter_penalty,
)
from sciml_priors.components.train.metrics import (
    metric_eps_p,
    metric_eps_u,
    metric_eps_u_series,
)
from sciml_priors.components.train.models import (
    build_surrogate,
    surrogate_from_hyperparameters,
)
from sciml_priors.components.train.optim import AdamConfig, AdamState, LrSchedule, adam_update
from sciml_priors.components.train.trainer import train_model, write_metrics_csv
from sciml_priors.components.vortex.system import ExternalDrift, VortexSystem
from sciml_priors.configuration.presets import DataKind, ModelFamily, load_preset
from sciml_priors.utilities.exceptions import (
    NonFiniteError,
    ShapeMismatchError,
    TrainingDivergedError,
    ValidationError,
)
from sciml_priors.utilities.helperfunctions import read_csv


def _shrink(name: str, data: dict = None, model: dict = None, training: dict = None):
    preset = load_preset(name)
    payload = preset.as_dict()
    payload["data"].update(data or {})
    payload["model"].update(model or {})
    payload["training"].update(training or {})
    return preset.model_validate(payload)


class TestAdam:
    """Unit tests for the optimiser"""

    def test_first_step(self):
        """The bias-corrected first step moves each entry by about α against its gradient."""
        params = {"w": np.array([1.0, -1.0])}
        state = AdamState.for_parameters(params, AdamConfig(alpha=1e-3))
        new_params, new_state = adam_update(state, params, {"w": np.array([2.0, -0.5])})
        np.testing.assert_allclose(new_params["w"], [1.0 - 1e-3, -1.0 + 1e-3], atol=1e-10)
        assert new_state.t == 1
        np.testing.assert_array_equal(params["w"], [1.0, -1.0])

    def test_step_size_stays_bounded(self):
        """Over many steps of noisy gradients no entry moves by more than 2α."""
        rng = np.random.default_rng(4)
        scales = np.array([1e-3, 1.0, 10.0, 100.0, 1.0])
        params = {"w": np.zeros(5)}
        state = AdamState.for_parameters(params, AdamConfig(alpha=1e-3))
        for step in range(500):
            grad = scales * rng.standard_normal(5) + (0.5 if step % 50 < 25 else -0.5)
            new_params, state = adam_update(state, params, {"w": grad})
            assert np.max(np.abs(new_params["w"] - params["w"])) <= 2e-3
            params = new_params
        assert state.t == 500

    def test_zero_gradient_keeps_parameters(self):
        """No gradient, no movement."""
        params = {"w": np.ones(3)}
        state = AdamState.for_parameters(params, AdamConfig())
        new_params, _ = adam_update(state, params, {"w": np.zeros(3)})
        np.testing.assert_array_equal(new_params["w"], params["w"])

    def test_non_finite_gradient(self):
        """A NaN gradient is refused and the parameter is named."""
        params = {"w": np.ones(2)}
        state = AdamState.for_parameters(params, AdamConfig())
        with pytest.raises(NonFiniteError, match="'w'"):
            adam_update(state, params, {"w": np.array([1.0, math.nan])})

    def test_schedule(self):
        """The rate decays by gamma every step_size epochs."""
        schedule = LrSchedule(base_rate=1e-3, step_size=10, gamma=0.5)
        assert schedule.rate(0) == pytest.approx(1e-3)
        assert schedule.rate(9) == pytest.approx(1e-3)
        assert schedule.rate(25) == pytest.approx(2.5e-4)


class TestLosses:
    """Unit tests for the loss functions"""

    def test_regression_losses(self):
        """Known values of L1, MSE and the penalty."""
        assert float(loss_l1(np.array([1.0, -2.0]), np.zeros(2))) == pytest.approx(3.0)
        batch = np.array([[1.0, -2.0], [0.5, 0.5]])
        assert float(loss_l1(batch, np.zeros((2, 2)))) == pytest.approx(2.0)
        masked = loss_l1(batch, np.zeros((2, 2)), mask=np.array([[1.0, 0.0], [1.0, 0.0]]))
        assert float(masked) == pytest.approx(0.75)
        assert float(loss_mse(np.array([1.0, 2.0]), np.zeros(2))) == pytest.approx(2.5)
        assert float(parameter_penalty({"a": np.array([1.0, 2.0])}, 0.5)) == pytest.approx(2.5)
        assert parameter_penalty({"a": np.array([1.0, 2.0])}, 0.0) == 0.0

    def test_classification_losses(self):
        """Cross entropy, binary cross entropy and focal loss."""
        assert loss_cross_entropy(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]])) == pytest.approx(
            math.log(2.0)
        )
        assert loss_binary_cross_entropy(np.array([0.5]), np.array([1.0])) == pytest.approx(
            math.log(2.0)
        )
        focal = loss_focal(np.array([[0.9, 0.1]]), np.array([[1.0, 0.0]]))
        assert focal == pytest.approx(-0.25 * 0.01 * math.log(0.9))
        # Test case: a zero probability is floored instead of producing infinity
        assert math.isfinite(loss_cross_entropy(np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]])))


def test_metrics():
    """Phase-space and relative velocity errors."""
    predicted, reference = np.zeros((2, 3, 2)), np.ones((2, 3, 2))
    eps_p = metric_eps_p(predicted, reference)
    np.testing.assert_allclose(eps_p.per_step, [2.0, 2.0, 2.0])
    assert eps_p.mean == pytest.approx(2.0)
    assert metric_eps_p(predicted[0], reference[0]).mean == pytest.approx(2.0)
    with pytest.raises(ShapeMismatchError):
        metric_eps_p(predicted, reference[:, :2])

    assert metric_eps_u(np.array([3.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(0.8)
    with pytest.raises(ValidationError, match="identically zero"):
        metric_eps_u(np.zeros(2), np.zeros(2))
    with pytest.raises(ShapeMismatchError):
        metric_eps_u(np.zeros(2), np.ones(3))
    series = metric_eps_u_series([np.ones(2), np.zeros(2)], [np.ones(2), np.ones(2)])
    np.testing.assert_allclose(series, [0.0, 1.0])
    with pytest.raises(ShapeMismatchError):
        metric_eps_u_series([np.ones(2)], [])


class TestDatasets:
    """Unit tests for the dataset builders"""

    def test_pair_dataset_validation(self):
        """Arrays must agree on the sample count and the split must fit."""
        with pytest.raises(ValidationError):
            PairDataset(
                DataKind.PHASE, 0.1, 0.0, {"q0": np.zeros((2, 1)), "q1": np.zeros((3, 1))}, 1
            )
        with pytest.raises(ValidationError):
            PairDataset(DataKind.PHASE, 0.1, 0.0, {"q0": np.zeros((2, 1))}, 3)

    def test_reference_flow(self):
        """The spring reference rotates phase space."""
        system = AnalyticSystem(SystemKind.SPRING)
        q, p = reference_flow(system, np.array([1.0]), np.array([0.0]), 1.0)
        assert q[0] == pytest.approx(math.cos(1.0), abs=1e-9)
        assert p[0] == pytest.approx(-math.sin(1.0), abs=1e-9)

    def test_hamiltonian_dataset(self, tiny_pendulum, tmp_path):
        """Pairs are reproducible, independent of the worker count and survive a save."""
        first = make_hamiltonian_dataset(tiny_pendulum.data, seed=7, threads=1)
        second = make_hamiltonian_dataset(tiny_pendulum.data, seed=7, threads=4)
        assert first.kind is DataKind.PHASE
        assert len(first) == 6 and first.train_count == 4 and first.validation_count == 2
        assert first.arrays["q0"].shape == (6, 1)
        for name, array in first.arrays.items():
            np.testing.assert_array_equal(array, second.arrays[name])
        other = make_hamiltonian_dataset(tiny_pendulum.data, seed=8, threads=1)
        assert not np.array_equal(first.arrays["q0"], other.arrays["q0"])

        path = tmp_path / "dataset.bin"
        first.save(path)
        loaded = PairDataset.load(path)
        assert loaded.kind is DataKind.PHASE
        assert loaded.train_count == 4
        assert loaded.metadata == {"system": "pendulum"}
        np.testing.assert_array_equal(loaded.arrays["p1"], first.arrays["p1"])

    def test_noisy_endpoints(self, tiny_pendulum):
        """Noise perturbs every coordinate of both endpoints."""
        data = tiny_pendulum.data.model_copy(update={"noise_sigma": 0.1})
        clean = make_hamiltonian_dataset(tiny_pendulum.data, seed=3)
        noisy = make_hamiltonian_dataset(data, seed=3)
        assert noisy.noise_sigma == 0.1
        assert np.all(noisy.arrays["q1"] != clean.arrays["q1"])

    def test_roenet_dataset(self):
        """Pulses on the periodic grid move between the two fields."""
        preset = _shrink("1c-linear", data={"samples": 4})
        dataset = make_roenet_dataset(preset.data, seed=1)
        assert dataset.kind is DataKind.FIELD
        assert dataset.arrays["u0"].shape == (4, 100, 1)
        assert dataset.train_count == 4
        assert np.all(np.isfinite(dataset.arrays["u1"]))
        assert not np.allclose(dataset.arrays["u0"], dataset.arrays["u1"])

    def test_vortex_dataset(self):
        """Frame pairs are padded, counted and identical for any number of worker threads."""
        preset = _shrink(
            "vortex-pair",
            data={
                "samples": 6,
                "t_train": 0.01,
                "dt": 0.01,
                "max_vortices": 2,
                "min_separation": 1.0,
            },
        )
        dataset = make_vortex_dataset(preset.data, seed=2, threads=1)
        assert dataset.kind is DataKind.VORTEX
        kept = dataset.arrays["positions"].shape[0]
        assert kept + dataset.metadata["rejected"] == 6
        assert dataset.arrays["positions"].shape[1:] == (MAX_VORTICES, 2)
        assert 1 <= dataset.train_count <= kept
        again = make_vortex_dataset(preset.data, seed=2, threads=3)
        for name, array in dataset.arrays.items():
            np.testing.assert_array_equal(again.arrays[name], array)

    def test_vortex_frame_pair(self):
        """Two separated vortices are detected, paired and padded."""
        data = _shrink("vortex-pair", data={"t_train": 0.01, "dt": 0.01}).data
        system = VortexSystem(
            positions=np.array([[2.0, 2.0], [4.0, 4.0]]), gamma=np.array([1.0, -0.8])
        )
        sample, reason = vortex_frame_pair(system, data, ExternalDrift())
        assert reason == ""
        assert sample["positions"].shape == (MAX_VORTICES, 2)
        np.testing.assert_array_equal(sample["mask"], [1, 1, 0, 0, 0, 0])
        np.testing.assert_allclose(sample["target"][:2], sample["positions"][:2], atol=0.05)
        assert sorted(sample["gamma"][:2]) == pytest.approx([-0.8, 1.0], rel=0.05)


class TestModels:
    """Unit tests for the model families"""

    @pytest.mark.parametrize(
        "family", [ModelFamily.TAYLOR_NET, ModelFamily.NSSNN, ModelFamily.HRK, ModelFamily.ODE_RK4]
    )
    def test_phase_models(self, tiny_pendulum, family):
        """Every phase-space family gives a finite loss and a rollout of the right shape."""
        surrogate = build_surrogate(family, tiny_pendulum)
        params = surrogate.initialise(np.random.default_rng(0))
        batch = {name: np.full((3, 1), 0.5) for name in ("q0", "p0", "q1", "p1")}
        assert math.isfinite(float(surrogate.loss(params, batch)))
        times, q_path, p_path = surrogate.predict(params, batch["q0"], batch["p0"], 0.05)
        np.testing.assert_allclose(times, 0.01 * np.arange(6))
        assert q_path.shape == (6, 3, 1) and p_path.shape == (6, 3, 1)
        np.testing.assert_array_equal(q_path[0], batch["q0"])

        rebuilt = surrogate_from_hyperparameters(family.value, surrogate.hyperparameters())
        assert rebuilt == surrogate

    def test_roenet_and_vortex_models(self):
        """Field and vortex families evaluate their losses on padded batches."""
        roenet = build_surrogate(
            ModelFamily.ROENET, _shrink("1c-linear", model={"width": 8, "blocks": 1})
        )
        params = roenet.initialise(np.random.default_rng(0))
        u0 = np.exp(-((np.linspace(-0.5, 0.49, 100) / 0.1) ** 2))[None, :, None]
        assert float(roenet.loss(params, {"u0": u0, "u1": u0})) >= 0.0

        vortex = build_surrogate(
            ModelFamily.VORTEX_DYNAMICS, _shrink("vortex-pair", model={"width": 8, "blocks": 1})
        )
        params = vortex.initialise(np.random.default_rng(0))
        positions = np.zeros((1, MAX_VORTICES, 2))
        positions[0, :2] = [[2.0, 2.0], [4.0, 4.0]]
        batch = {
            "positions": positions,
            "gamma": np.array([[1.0, -1.0, 0.0, 0.0, 0.0, 0.0]]),
            "vorticity": np.zeros((1, MAX_VORTICES)),
            "target": positions,
            "mask": np.array([[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]]),
        }
        assert math.isfinite(float(vortex.loss(params, batch)))

    def test_bad_hyperparameters(self):
        """A checkpoint whose hyperparameters do not fit its family is refused."""
        with pytest.raises(ValidationError):
            surrogate_from_hyperparameters("taylor-net", {"dimension": 1})
        with pytest.raises(ValidationError):
            surrogate_from_hyperparameters("no-such-family", {})


class TestTrainer:
    """Unit tests for the training loop"""

    def test_training_is_reproducible(self, tiny_pendulum, tmp_path):
        """The same seed gives the same parameters and history."""
        dataset = make_hamiltonian_dataset(tiny_pendulum.data, seed=0)
        surrogate = build_surrogate(tiny_pendulum.experiment.family, tiny_pendulum)
        first = train_model(surrogate, dataset, tiny_pendulum.training, seed=0)
        second = train_model(surrogate, dataset, tiny_pendulum.training, seed=0)
        assert [record.epoch for record in first.history] == [0, 1]
        assert all(math.isfinite(record.loss_val) for record in first.history)
        assert first.history == second.history
        for name, array in first.params.items():
            np.testing.assert_array_equal(array, second.params[name])
        assert any(
            not np.array_equal(first.params[name], first.initial_params[name])
            for name in first.params
        )

        path = tmp_path / "metrics.csv"
        write_metrics_csv(path, first.history)
        header, rows = read_csv(path)
        assert header == ["epoch", "loss_train", "loss_val", "lr"]
        assert [row[0] for row in rows] == ["0", "1"]

    def test_epoch_loss_decreases(self, tiny_pendulum):
        """Full-batch training ends with a lower epoch-mean loss than it started with."""
        dataset = make_hamiltonian_dataset(tiny_pendulum.data, seed=0)
        surrogate = build_surrogate(tiny_pendulum.experiment.family, tiny_pendulum)
        training = tiny_pendulum.training.model_copy(update={"epochs": 20, "batch_size": 4})
        result = train_model(surrogate, dataset, training, seed=0)
        assert len(result.history) == 20
        assert result.history[-1].loss_train < result.history[0].loss_train

    def test_zero_epochs(self, tiny_pendulum):
        """Without epochs the initialisation comes back unchanged."""
        dataset = make_hamiltonian_dataset(tiny_pendulum.data, seed=0)
        surrogate = build_surrogate(tiny_pendulum.experiment.family, tiny_pendulum)
        training = tiny_pendulum.training.model_copy(update={"epochs": 0})
        result = train_model(surrogate, dataset, training, seed=0)
        assert result.history == []
        for name, array in result.params.items():
            np.testing.assert_array_equal(array, result.initial_params[name])

    def test_kind_mismatch(self, tiny_pendulum):
        """A phase dataset cannot train a field model."""
        dataset = make_hamiltonian_dataset(tiny_pendulum.data, seed=0)
        roenet = build_surrogate(ModelFamily.ROENET, _shrink("1c-linear"))
        with pytest.raises(ValidationError, match="cannot train"):
            train_model(roenet, dataset, tiny_pendulum.training, seed=0)

    def test_divergence_keeps_last_good_parameters(self, tiny_pendulum):
        """An infinite target stops training with the parameters before the failing epoch."""
        arrays = {name: np.full((2, 1), 0.1) for name in ("q0", "p0", "q1", "p1")}
        arrays["q1"][0, 0] = math.inf
        dataset = PairDataset(DataKind.PHASE, 0.01, 0.0, arrays, train_count=2)
        surrogate = build_surrogate(tiny_pendulum.experiment.family, tiny_pendulum)
        with pytest.raises(TrainingDivergedError) as caught:
            train_model(surrogate, dataset, tiny_pendulum.training, seed=0)
        assert caught.value.loss_history == []
        expected = surrogate.initialise(np.random.default_rng(0))
        assert set(caught.value.last_good_parameters) == set(expected)
