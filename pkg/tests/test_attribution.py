import numpy as np
import pytest

from splitsentinel import autoencoder as ae
from splitsentinel import attribution as at
from splitsentinel import nn
from splitsentinel.autoencoder import AEConfig, AEModel
from splitsentinel.errors import SchemaError, ShapeError
from splitsentinel.schema import FeatureMatrix

from conftest import make_schema, random_model


def linear_model(m: int, h: int, seed: int) -> AEModel:
    rng = np.random.default_rng(seed)
    enc = nn.DenseLayer(rng.normal(size=(h, m)), np.zeros(h), nn.Identity())
    dec = nn.DenseLayer(rng.normal(size=(m, h)), np.zeros(m), nn.Identity())
    return AEModel(enc, dec, make_schema(m), AEConfig())


def completeness_error(model, x) -> float:
    ref = at.reference_pass(model)
    c = at.contributions(model, ref, x)
    delta = ae.reconstruct(model, x) - ae.reconstruct(model, np.zeros(model.n_dims))
    return float(np.max(np.abs(c.sum(axis=0) - delta) / np.maximum(np.abs(delta), 1e-12)))


class TestReferencePass:
    def test_zero_bias_reference_output_is_zero(self):
        model = random_model(5, 0, bias_scale=0.0)
        assert not at.reference_pass(model).output.any()

    def test_decoder_bias(self):
        model = random_model(5, 0, bias_scale=0.0)
        model.decoder.bias[:] = [1, 2, 3, 4, 5]
        np.testing.assert_array_equal(at.reference_pass(model).output, [1, 2, 3, 4, 5])

    def test_equals_reconstruct_of_zero(self):
        model = random_model(7, 3)
        np.testing.assert_allclose(at.reference_pass(model).output,
                                   ae.reconstruct(model, np.zeros(7)), rtol=1e-14)


class TestContributions:
    def test_linear_closed_form(self, rng):
        model = linear_model(6, 3, 0)
        p = model.decoder.weights @ model.encoder.weights
        x = rng.normal(size=6)
        c = at.contributions(model, at.reference_pass(model), x)
        np.testing.assert_allclose(c, p.T * x[:, None], rtol=1e-12, atol=1e-14)

    def test_zero_input(self):
        model = random_model(5, 2)
        c = at.contributions(model, at.reference_pass(model), np.zeros(5))
        assert not c.any()

    def test_summation_to_delta(self, rng):
        for trial in range(20):
            model = random_model(int(rng.integers(2, 9)), trial)
            x = rng.normal(size=model.n_dims)
            assert completeness_error(model, x) < 1e-6

    def test_rescale_guard_uses_reference_derivative(self):
        # hidden pre-activation unchanged from the reference: multiplier must be finite
        model = AEModel(nn.DenseLayer([[1.0, -1.0]], [-0.5], nn.LeakyReLU(0.2)),
                        nn.DenseLayer([[2.0], [1.0]], [0.0, 0.0]), make_schema(2), AEConfig())
        ref = at.reference_pass(model)
        mult = at.multipliers(model, ref, np.array([1.0, 1.0]))
        # d = 0 at the unit, so r = f'(-0.5) = 0.2 and m[j, i] = W_dec[j] * 0.2 * W_enc[i]
        np.testing.assert_allclose(mult, 0.2 * np.outer([2.0, 1.0], [1.0, -1.0]))

    def test_batched_matches_single(self, rng):
        model = random_model(6, 4)
        ref = at.reference_pass(model)
        x = rng.normal(size=(5, 6))
        batch = at.contributions(model, ref, x)
        for k in range(5):
            np.testing.assert_allclose(batch[k], at.contributions(model, ref, x[k]), rtol=1e-13)

    def test_shape_mismatch(self):
        model = random_model(4, 0)
        with pytest.raises(ShapeError):
            at.contributions(model, at.reference_pass(model), np.zeros(5))


class TestImportanceMatrix:
    def test_single_sample(self, rng):
        model = random_model(5, 1)
        x = rng.normal(size=(1, 5))
        imp = at.importance_matrix(model, FeatureMatrix(model.schema, x))
        np.testing.assert_allclose(imp.values, at.contributions(model, at.reference_pass(model), x[0]),
                                   rtol=1e-12, atol=1e-15)
        assert imp.sample_count == 1

    def test_symmetric_linear_cancels(self, rng):
        model = linear_model(4, 2, 2)
        x = rng.normal(size=4)
        imp = at.importance_matrix(model, FeatureMatrix(model.schema, np.stack([x, -x])))
        np.testing.assert_allclose(imp.values, 0.0, atol=1e-14)

    def test_linear_analytic_mean(self, rng):
        model = linear_model(7, 3, 5)
        p = model.decoder.weights @ model.encoder.weights
        x = rng.normal(size=(40, 7))
        expected = p.T * x.mean(axis=0)[:, None]
        imp = at.importance_matrix(model, FeatureMatrix(model.schema, x))
        np.testing.assert_allclose(imp.values, expected, rtol=0, atol=1e-9)

    def test_factorized_matches_bruteforce(self, rng):
        model = random_model(9, 6)
        data = FeatureMatrix(model.schema, rng.normal(size=(60, 9)))
        fast = at.importance_matrix(model, data)
        slow = at.importance_matrix_bruteforce(model, data)
        np.testing.assert_allclose(fast.values, slow.values, rtol=1e-10, atol=1e-13)

    def test_permutation_and_chunk_invariance(self, rng):
        model = random_model(6, 8)
        x = rng.normal(size=(101, 6))
        base = at.importance_matrix(model, FeatureMatrix(model.schema, x)).values
        perm = at.importance_matrix(model, FeatureMatrix(model.schema, x[rng.permutation(101)])).values
        chunked = at.importance_matrix(model, FeatureMatrix(model.schema, x), chunk_size=7).values
        np.testing.assert_allclose(perm, base, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(chunked, base, rtol=1e-12, atol=1e-15)

    def test_schema_mismatch(self):
        model = random_model(3, 0)
        with pytest.raises(SchemaError):
            at.importance_matrix(model, FeatureMatrix(make_schema(3, "x"), np.zeros((2, 3))))

    def test_fingerprint_tracks_model(self, rng):
        model = random_model(4, 0)
        data = FeatureMatrix(model.schema, rng.normal(size=(5, 4)))
        assert at.importance_matrix(model, data).model_fingerprint == model.fingerprint()

    def test_exports(self, tmp_path, rng):
        model = random_model(3, 0)
        imp = at.importance_matrix(model, FeatureMatrix(model.schema, rng.normal(size=(5, 3))))
        imp.to_csv(tmp_path / "imp.csv")
        lines = (tmp_path / "imp.csv").read_text().splitlines()
        assert lines[0] == "d0,d1,d2" and len(lines) == 4
        imp.to_json(tmp_path / "imp.json")
        back = at.ImportanceMatrix.from_json(tmp_path / "imp.json")
        assert back.values.tobytes() == imp.values.tobytes()
        assert back.sample_count == 5
