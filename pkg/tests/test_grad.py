import numpy as np
import pytest

from qdistill import sim
from qdistill.data import LabeledExample
from qdistill.errors import ArgumentError, DataError, NumericalError
from qdistill.grad import batch_loss, finite_diff_gradient, loss_gradient, parameter_shift_gradient
from qdistill.loss import LossMode, LossSpec
from qdistill.model import FrozenEmbedding, ModelConfig, StudentParams, ansatz_schedule


def random_batch(rng, n_classes, size, vocab=9):
    batch = []
    for i in range(size):
        tokens = tuple(int(t) for t in rng.integers(0, vocab, size=int(rng.integers(1, 5))))
        teacher = rng.dirichlet(np.ones(n_classes))
        batch.append(LabeledExample(id=f"g{i}", text="", label=int(rng.integers(n_classes)), tokens=tokens,
                                    teacher=teacher))
    return batch


def random_setup(rng, n_max=4, p_max=2, m_max=4):
    n = int(rng.integers(2, n_max + 1))
    config = ModelConfig(
        n_qubits=n,
        embed_dim=int(rng.integers(2, m_max + 1)),
        depth=int(rng.integers(1, p_max + 1)),
        n_classes=int(rng.integers(2, n + 1)),
    )
    params = StudentParams.initialize(config, rng)
    # order-one angles
    values = params.flatten() + rng.uniform(-1.0, 1.0, params.size())
    params = StudentParams.from_flat(config, values)
    mode = list(LossMode)[int(rng.integers(len(LossMode)))]
    spec = LossSpec(mode, float(rng.uniform(0, 1)))
    embedding = FrozenEmbedding(config.embed_dim, seed=int(rng.integers(1000)))
    batch = random_batch(rng, config.n_classes, int(rng.integers(1, 4)))
    return config, params, spec, embedding, batch


class TestAdjointGradient:
    def test_matches_parameter_shift(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            config, params, spec, embedding, batch = random_setup(rng)
            _, adjoint = loss_gradient(batch, params, config, spec, embedding)
            shifted = parameter_shift_gradient(batch, params, config, spec, embedding)
            np.testing.assert_allclose(adjoint.flatten(), shifted.flatten(), rtol=0, atol=1e-8)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(78)
        for _ in range(20):
            config, params, spec, embedding, batch = random_setup(rng, n_max=3, m_max=3)
            _, adjoint = loss_gradient(batch, params, config, spec, embedding)
            numeric = finite_diff_gradient(batch, params, config, spec, embedding, h=1e-4)
            np.testing.assert_allclose(adjoint.flatten(), numeric.flatten(), rtol=0, atol=1e-5)

    def test_loss_value_matches_forward(self):
        rng = np.random.default_rng(5)
        config, params, spec, embedding, batch = random_setup(rng)
        value, _ = loss_gradient(batch, params, config, spec, embedding)
        assert value == pytest.approx(batch_loss(batch, params, config, spec, embedding), abs=1e-12)

    def test_gate_applications_within_four_per_gate(self, monkeypatch):
        rng = np.random.default_rng(6)
        config = ModelConfig(n_qubits=4, embed_dim=3, depth=2, n_classes=2)
        params = StudentParams.initialize(config, rng)
        embedding = FrozenEmbedding(3)
        batch = random_batch(rng, 2, 1)
        gate_count = config.n_qubits + len(ansatz_schedule(params))

        calls = {"count": 0}
        original = sim.apply_matrix_inplace

        def counting(*args, **kwargs):
            calls["count"] += 1
            return original(*args, **kwargs)

        monkeypatch.setattr(sim, "apply_matrix_inplace", counting)
        loss_gradient(batch, params, config, LossSpec(), embedding)
        assert 0 < calls["count"] <= 4 * gate_count

    def test_workers_give_identical_result(self):
        rng = np.random.default_rng(8)
        config, params, spec, embedding, _ = random_setup(rng)
        batch = random_batch(rng, config.n_classes, 6)
        serial = loss_gradient(batch, params, config, spec, embedding, workers=1)
        threaded = loss_gradient(batch, params, config, spec, embedding, workers=3)
        assert serial[0] == threaded[0]
        np.testing.assert_array_equal(serial[1].flatten(), threaded[1].flatten())

    def test_gradient_shapes(self):
        rng = np.random.default_rng(9)
        config, params, spec, embedding, batch = random_setup(rng)
        _, grads = loss_gradient(batch, params, config, spec, embedding)
        assert grads.proj_weight.shape == params.proj_weight.shape
        assert grads.zz.shape == params.zz.shape
        assert np.all(np.isfinite(grads.flatten()))


class TestBatchValidation:
    def test_empty_batch(self, small_model, embedding, rng):
        params = StudentParams.initialize(small_model, rng)
        with pytest.raises(ArgumentError):
            loss_gradient([], params, small_model, LossSpec(), embedding)

    def test_missing_teacher(self, small_model, embedding, rng):
        params = StudentParams.initialize(small_model, rng)
        batch = [LabeledExample(id="x", text="", label=0, tokens=(1, 2))]
        with pytest.raises(DataError):
            loss_gradient(batch, params, small_model, LossSpec(LossMode.KL), embedding)

    def test_ce_needs_no_teacher(self, small_model, embedding, rng):
        params = StudentParams.initialize(small_model, rng)
        batch = [LabeledExample(id="x", text="", label=1, tokens=(1, 2))]
        value, _ = loss_gradient(batch, params, small_model, LossSpec(LossMode.CE), embedding)
        assert np.isfinite(value)

    @pytest.mark.parametrize("h", [0.0, 0.1])
    def test_finite_difference_step_range(self, small_model, embedding, rng, h):
        params = StudentParams.initialize(small_model, rng)
        batch = random_batch(rng, 2, 1)
        with pytest.raises(ArgumentError):
            finite_diff_gradient(batch, params, small_model, LossSpec(), embedding, h=h)


class TestGradientStructure:
    def test_bias_gradient_vanishes_on_symmetric_batch(self, small_model, embedding):
        params = StudentParams.zeros(small_model)
        uniform = np.array([0.5, 0.5])
        batch = [LabeledExample(id="s0", text="", label=0, tokens=(1, 2), teacher=uniform),
                 LabeledExample(id="s1", text="", label=1, tokens=(1, 2), teacher=uniform)]
        for mode in LossMode:
            _, grads = loss_gradient(batch, params, small_model, LossSpec(mode), embedding)
            np.testing.assert_allclose(grads.proj_bias, np.zeros(small_model.n_qubits), atol=1e-12)

    def test_stacked_angles_share_their_gradient(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            config, params, spec, embedding, batch = random_setup(rng)
            _, grads = loss_gradient(batch, params, config, spec, embedding)
            for stacked in (grads.uy, grads.uz):
                np.testing.assert_allclose(stacked[..., 1], stacked[..., 0], rtol=0, atol=1e-10)
                np.testing.assert_allclose(stacked[..., 2], stacked[..., 0], rtol=0, atol=1e-10)

    def test_norm_drift_is_numerical_error(self, small_model, embedding, rng, monkeypatch):
        params = StudentParams.initialize(small_model, rng)
        batch = random_batch(rng, 2, 1)
        original = sim.apply_matrix_inplace

        def leaking(amplitudes, *args, **kwargs):
            original(amplitudes, *args, **kwargs)
            amplitudes *= 1.01
            return amplitudes

        monkeypatch.setattr(sim, "apply_matrix_inplace", leaking)
        with pytest.raises(NumericalError, match="norm"):
            loss_gradient(batch, params, small_model, LossSpec(), embedding)
