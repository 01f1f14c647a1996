import unittest

import numpy as np

from tests.package_test_utils import load_package_module


FS = 40.96e9
N = 65536


class StimulusTests(unittest.TestCase):
    def setUp(self):
        self.stimulus = load_package_module("domain.stimulus")
        self.errors = load_package_module("domain.errors")

    def test_tones_snap_to_odd_bins(self):
        self.assertEqual(self.stimulus.coherent_bin(3.1e9, FS, N), 4961)
        self.assertEqual(self.stimulus.coherent_bin(3.2e9, FS, N), 5121)
        self.assertEqual(self.stimulus.coherent_bin(100e6, FS, N), 161)
        # Ratio 101 is already odd.
        self.assertEqual(self.stimulus.coherent_bin(1.01e9, FS, 4096), 101)

    def test_bin_stays_inside_the_first_nyquist_zone(self):
        self.assertEqual(self.stimulus.coherent_bin(1e3, FS, N), 1)
        self.assertEqual(self.stimulus.coherent_bin(20.47e9, FS, 4096), 2047)
        with self.assertRaises(self.errors.ArgumentError):
            self.stimulus.coherent_bin(FS / 2, FS, N)
        with self.assertRaises(self.errors.ArgumentError):
            self.stimulus.coherent_bin(0.0, FS, N)

    def test_record_length_must_be_a_power_of_two(self):
        with self.assertRaises(self.errors.ArgumentError):
            self.stimulus.plan_tones((self.stimulus.ToneSpec(1e9),), FS, 1000)

    def test_colliding_tones_are_rejected(self):
        with self.assertRaises(self.errors.ArgumentError):
            self.stimulus.two_tone_plan(3.105e9, 1e6, -12.0, FS, 4096)

    def test_positive_dbfs_is_rejected(self):
        with self.assertRaises(self.errors.ArgumentError):
            self.stimulus.ToneSpec(1e9, amplitude_dbfs=1.0)

    def test_empty_plan_is_rejected(self):
        plan = self.stimulus.plan_tones((), FS, 4096)
        with self.assertRaises(self.errors.ArgumentError):
            self.stimulus.gen_codes(plan, 10)

    def test_two_tone_plan_is_coherent(self):
        plan = self.stimulus.two_tone_plan(3.15e9, 100e6, -12.0, FS, N)

        self.assertEqual(plan.bins, (4961, 5121))
        self.assertAlmostEqual(plan.tones[0].freq_hz, 4961 * FS / N)
        self.assertEqual(plan.to_dict()["tones"][1]["bin"], 5121)

    def test_codes_stay_in_range_and_center_on_mid_scale(self):
        plan = self.stimulus.two_tone_plan(3.15e9, 100e6, -12.0, FS, N)
        sequence = self.stimulus.gen_codes(plan, 10)

        self.assertEqual(len(sequence), N)
        self.assertEqual(sequence.clipped_samples, 0)
        self.assertGreaterEqual(sequence.codes.min(), 0)
        self.assertLessEqual(sequence.codes.max(), 1023)
        self.assertAlmostEqual(sequence.codes.mean(), 511.5, delta=0.5)

    def test_overdriven_tone_is_clipped_and_counted(self):
        plan = self.stimulus.plan_tones(
            (self.stimulus.ToneSpec(1e9, 0.0), self.stimulus.ToneSpec(2e9, -1.0)), FS, 4096,
        )
        with self.assertLogs(self.stimulus.logger, level="WARNING"):
            sequence = self.stimulus.gen_codes(plan, 10)

        self.assertGreater(sequence.clipped_samples, 0)
        self.assertEqual(sequence.codes.min(), 0)
        self.assertEqual(sequence.codes.max(), 1023)

    def test_generation_is_deterministic(self):
        plan = self.stimulus.two_tone_plan(9e9, 100e6, -18.0, FS, 8192)
        first = self.stimulus.gen_codes(plan, 10).codes
        second = self.stimulus.gen_codes(plan, 10).codes
        np.testing.assert_array_equal(first, second)

    def test_generated_tone_reads_its_level_in_the_spectrum(self):
        spectrum = load_package_module("domain.spectrum")
        plan = self.stimulus.plan_tones((self.stimulus.ToneSpec(1e9, -12.0),), FS, 4096)
        k = plan.bins[0]

        waveform = self.stimulus.tone_waveform(plan, 1.0)
        self.assertAlmostEqual(spectrum.power_spectrum(waveform, FS).power_dbfs[k], -12.0, delta=0.01)

        codes = self.stimulus.gen_codes(plan, 10).codes
        quantized = spectrum.power_spectrum(codes - 511.5, FS, full_scale=511.5)
        self.assertAlmostEqual(quantized.power_dbfs[k], -12.0, delta=0.01)

    def test_codes_swing_by_the_tone_amplitude(self):
        plan = self.stimulus.plan_tones((self.stimulus.ToneSpec(1e9, -12.0),), FS, N)
        codes = self.stimulus.gen_codes(plan, 10).codes
        expected = 10 ** (-12.0 / 20) * 511.5

        self.assertAlmostEqual(expected, 128.48, delta=0.01)
        self.assertAlmostEqual(np.max(np.abs(codes - 511.5)), expected, delta=0.5)

    def test_snapped_frequency_is_within_one_bin_of_the_request(self):
        for n_samples in (4096, N):
            for freq in np.linspace(10e6, 20e9, 97):
                with self.subTest(n_samples=n_samples, freq=freq):
                    plan = self.stimulus.plan_tones((self.stimulus.ToneSpec(freq),), FS, n_samples)
                    self.assertLessEqual(abs(plan.tones[0].freq_hz - freq), FS / n_samples)

    def test_identification_tone_covers_nearly_every_code(self):
        sequence = self.stimulus.ident_stimulus(FS, N, 10)
        distinct, unseen = self.stimulus.coverage(sequence.codes, 10)

        self.assertGreaterEqual(distinct, 960)
        self.assertEqual(distinct + unseen.size, 1024)
        self.assertEqual(sequence.plan.bins, (161,))

    def test_reduced_amplitude_leaves_the_outer_codes_uncovered(self):
        sequence = self.stimulus.ident_stimulus(FS, N, 10, amplitude_dbfs=-6.0)
        distinct, unseen = self.stimulus.coverage(sequence.codes, 10)

        self.assertLess(distinct, 530)
        self.assertIn(0, unseen)
        self.assertIn(1023, unseen)
        self.assertNotIn(512, unseen)

    def test_random_codes_are_seeded_and_in_range(self):
        first = self.stimulus.random_codes(4096, 10, seed=3).codes
        second = self.stimulus.random_codes(4096, 10, seed=3).codes

        np.testing.assert_array_equal(first, second)
        self.assertGreaterEqual(first.min(), 0)
        self.assertLessEqual(first.max(), 1023)


if __name__ == "__main__":
    unittest.main()
