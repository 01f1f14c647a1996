import unittest

import numpy as np

from tests.package_test_utils import load_package_module


class RegressionTests(unittest.TestCase):
    def setUp(self):
        self.regression = load_package_module("domain.regression")
        self.capture = load_package_module("domain.capture")
        self.converter = load_package_module("domain.converter")
        self.errors = load_package_module("domain.errors")

    def single_unit(self):
        return self.regression.MlpParams(w0=[1.0], b0=[0.0], w1=[1.0], b1=0.0)

    def linear_dataset(self, bits=10, count=4096, gain=0.8, offset=0.05, seed=0):
        codes = np.random.default_rng(seed).integers(0, 1 << bits, count)
        inputs = self.regression.NormalizationMap(bits)(codes)
        return self.capture.Dataset(codes, gain * inputs + offset, bits=bits)

    def test_forward_of_a_single_relu(self):
        params = self.single_unit()
        self.assertEqual(self.regression.mlp_forward(1.0, params), 1.0)
        self.assertEqual(self.regression.mlp_forward(-1.0, params), 0.0)
        np.testing.assert_array_equal(self.regression.mlp_forward(np.array([-2.0, 0.5]), params), [0.0, 0.5])

    def test_zero_network_outputs_its_bias(self):
        params = self.regression.MlpParams(np.zeros(4), np.zeros(4), np.zeros(4), 0.25)
        self.assertEqual(self.regression.mlp_forward(0.7, params), 0.25)

    def test_mse_examples(self):
        zero = self.regression.MlpParams.zeros(3)
        self.assertEqual(self.regression.mse_loss(zero, self.regression.Batch([0.0], [2.0])), 4.0)
        self.assertEqual(self.regression.mse_loss(zero, self.regression.Batch([0.1, 0.2], [1.0, -1.0])), 1.0)
        with self.assertRaises(self.errors.ArgumentError):
            self.regression.mse_loss(zero, self.regression.Batch([], []))

    def test_duplicating_rows_leaves_the_loss_unchanged(self):
        dataset = self.linear_dataset(count=512)
        doubled = self.capture.Dataset(np.tile(dataset.x, 2), np.tile(dataset.y, 2), bits=10)
        params = self.regression.MlpParams.initialize(16, np.random.default_rng(1), self.regression.NormalizationMap(10))
        self.assertAlmostEqual(
            self.regression.mse_loss(params, dataset), self.regression.mse_loss(params, doubled), places=14,
        )

    def test_gradient_of_a_single_relu(self):
        gradient = self.regression.mlp_gradient(self.single_unit(), self.regression.Batch([1.0], [0.0]))
        self.assertEqual(gradient.b1, 2.0)
        self.assertEqual(gradient.w1.tolist(), [2.0])
        self.assertEqual(gradient.w0.tolist(), [2.0])
        self.assertEqual(gradient.b0.tolist(), [2.0])

    def test_relu_subgradient_at_the_kink_is_zero(self):
        params = self.regression.MlpParams(w0=[1.0], b0=[-0.5], w1=[1.0], b1=0.0)
        gradient = self.regression.mlp_gradient(params, self.regression.Batch([0.5], [1.0]))
        self.assertEqual(gradient.w0.tolist(), [0.0])
        self.assertEqual(gradient.b0.tolist(), [0.0])

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(2024)
        hidden, step = 5, 1e-6
        checked = 0
        while checked < 100:
            params = self.regression.MlpParams.initialize(hidden, rng)
            params = self.regression.MlpParams(params.w0, rng.normal(0, 0.5, hidden), params.w1, rng.normal())
            batch = self.regression.Batch(rng.uniform(-1, 1, 8), rng.normal(size=8))
            pre = np.multiply.outer(batch.inputs, params.w0) + params.b0
            if np.min(np.abs(pre)) < 0.01:
                continue
            analytic = self.regression.mlp_gradient(params, batch).as_vector()
            vector = params.as_vector()
            numeric = np.empty_like(vector)
            for index in range(vector.size):
                shift = np.zeros_like(vector)
                shift[index] = step
                upper = self.regression.MlpParams.from_vector(vector + shift, hidden)
                lower = self.regression.MlpParams.from_vector(vector - shift, hidden)
                numeric[index] = (
                    self.regression.mse_loss(upper, batch) - self.regression.mse_loss(lower, batch)
                ) / (2 * step)
            error = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), np.linalg.norm(numeric))
            self.assertLess(error, 1e-6)
            checked += 1

    def test_adam_step_with_zero_gradient_keeps_the_parameters(self):
        state = self.regression.AdamState(4, self.regression.TrainConfig())
        vector = np.array([0.5, -1.0, 2.0, 0.0])
        np.testing.assert_array_equal(state.step(vector, np.zeros(4)), vector)

    def test_adam_first_step_moves_by_the_learning_rate(self):
        cfg = self.regression.TrainConfig(lr=0.01)
        state = self.regression.AdamState(2, cfg)
        moved = state.step(np.zeros(2), np.array([3.0, -0.2]))
        np.testing.assert_allclose(moved, [-0.01, 0.01], rtol=1e-6)

    def test_train_config_rejects_invalid_values(self):
        with self.assertRaises(self.errors.ConfigurationError):
            self.regression.TrainConfig(lr=0.0)
        with self.assertRaises(self.errors.ConfigurationError):
            self.regression.TrainConfig(beta1=1.0)

    def test_training_fits_a_linear_map(self):
        dataset = self.linear_dataset()
        cfg = self.regression.TrainConfig(hidden=8, epochs=200, seed=3, lr=3e-3)
        result = self.regression.train_mlp(dataset, cfg)

        self.assertEqual(len(result.loss_history), 201)
        self.assertLess(result.final_loss, result.initial_loss)
        self.assertLess(self.regression.mse_loss(result.params, dataset), 1e-4)
        self.assertEqual(result.params.norm.bits, 10)

    def test_training_is_reproducible(self):
        dataset = self.linear_dataset(count=1024)
        cfg = self.regression.TrainConfig(hidden=16, epochs=3, seed=9)
        first = self.regression.train_mlp(dataset, cfg)
        second = self.regression.train_mlp(dataset, cfg)

        np.testing.assert_array_equal(first.params.as_vector(), second.params.as_vector())
        self.assertEqual(first.loss_history, second.loss_history)

    def test_training_needs_a_full_batch(self):
        dataset = self.linear_dataset(count=100)
        with self.assertRaises(self.errors.ArgumentError):
            self.regression.train_mlp(dataset, self.regression.TrainConfig(hidden=4, epochs=1))

    def test_divergence_reports_the_epoch(self):
        dataset = self.linear_dataset(count=512)
        cfg = self.regression.TrainConfig(hidden=8, epochs=3, lr=1e200, batch_size=128)
        with np.errstate(all="ignore"):
            with self.assertRaises(self.errors.TrainingError) as raised:
                self.regression.train_mlp(dataset, cfg)
        self.assertIsInstance(raised.exception, self.errors.NumericalError)
        self.assertNotIsInstance(raised.exception, self.errors.ConfigurationError)
        self.assertEqual(raised.exception.epoch, 1)

    def test_polynomial_fit_of_a_line_in_code_units(self):
        dataset = self.capture.Dataset([0, 1], [0.1, 0.3], bits=2)
        model = self.regression.fit_polynomial(dataset, degree=1)

        np.testing.assert_allclose(model.code_coefficients(), [0.1, 0.2], atol=1e-12)
        self.assertAlmostEqual(self.regression.model_eval(model, 3), 0.7, places=12)

    def test_polynomial_needs_enough_distinct_codes(self):
        dataset = self.capture.Dataset([4, 4, 5, 6], [0.0, 0.0, 0.1, 0.2], bits=10)
        with self.assertRaises(self.errors.FittingError):
            self.regression.fit_polynomial(dataset, degree=3)

    def test_polynomial_misses_a_jump_where_it_occurs(self):
        cfg = self.converter.DacConfig(seg_bits=0)
        deltas = np.zeros(cfg.binary_count)
        deltas[-1] = 8.0 / 512
        table = self.converter.transfer_table(
            cfg, self.converter.MismatchProfile(binary_deltas=deltas, unit_deltas=[]),
        )
        codes = np.arange(cfg.code_count)
        dataset = self.capture.Dataset(codes, table.outputs / np.abs(table.outputs).max(), bits=10)
        report = self.regression.fit_report(self.regression.fit_polynomial(dataset, 15), dataset)

        self.assertIn(report.max_residual_code, range(500, 524))
        self.assertEqual(report.distinct_codes, 1024)

    def test_models_round_trip_through_dicts(self):
        dataset = self.linear_dataset(count=512)
        poly = self.regression.fit_polynomial(dataset, 3)
        mlp = self.regression.MlpParams.initialize(6, np.random.default_rng(0), self.regression.NormalizationMap(10))
        codes = np.arange(1024)

        for model in (poly, mlp):
            restored = self.regression.model_from_dict(model.to_dict())
            np.testing.assert_array_equal(
                self.regression.model_eval(restored, codes), self.regression.model_eval(model, codes),
            )

    def test_unknown_model_type_is_a_configuration_error(self):
        with self.assertRaises(self.errors.ConfigurationError):
            self.regression.model_from_dict({"type": "svm", "norm": None})


if __name__ == "__main__":
    unittest.main()
