"""
Tests for the Codec and Simulation Harness

Tests for:
- Encoding and decoding per received set
- Frame corruption handling
- Reproducible Monte-Carlo simulation (chunking, threads, erasures)
- Empirical entropy
- Agreement with the closed forms at high resolution
- Random binning of side indices
"""

import unittest
from pathlib import Path
from unittest.mock import patch
import sys

import numpy as np
from scipy.stats import norm

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.analysis.closed_forms import product_lattice_distortion2, theoretical_distortion2, theoretical_distortion3
from src.codec import simulate as simulate_module
from src.codec.binning import bin_assign, bin_decode, binning_ambiguity, bins_for_rate
from src.codec.coder import FrameCorruptionError, decode, decode_batch, encode, encode_batch, side_points
from src.codec.models import EncodedFrame, RESULT_COLUMNS, SourceConfig
from src.codec.simulate import (
    SimulationConfigError,
    gap_db,
    gaussian_source,
    plug_in_entropy,
    simulate,
)
from src.labeling.assignment import alpha_apply
from src.labeling.table import build_labeling
from src.lattice.core import make_lattice, to_cartesian
from src.nested.system import build_nested
from src.weights.models import WeightProfile


def _z1_labeling(factors, profile):
    system = build_nested(make_lattice("Z", 1), [{"kind": "scalar", "a": a} for a in factors], profile.mu)
    return build_labeling(system, profile)


class TestCoder(unittest.TestCase):
    """Test encode/decode on Z^1 with (4, 5)."""

    @classmethod
    def setUpClass(cls):
        cls.profile = WeightProfile.two_channel(1.0, 1.0)
        cls.labeling = _z1_labeling((4, 5), cls.profile)

    def setUp(self):
        self.X = np.random.default_rng(12).normal(scale=10.0, size=(200, 1))

    def test_full_set_recovers_central_point(self):
        """All descriptions give back the central quantization."""
        batch = encode_batch(self.labeling, self.X)
        recon = decode_batch(self.labeling, batch, (0, 1))
        self.assertTrue(np.allclose(recon, to_cartesian(self.labeling.system.central, batch.central)))
        self.assertTrue(np.all(np.abs(recon - self.X) <= 0.5 + 1e-12))

    def test_single_description(self):
        """One description decodes to its own sublattice point."""
        batch = encode_batch(self.labeling, self.X)
        labels = alpha_apply(self.labeling, batch.central)
        for i in (0, 1):
            recon = decode_batch(self.labeling, batch, (i,))
            self.assertTrue(np.allclose(recon[:, 0], labels[:, i, 0]))

    def test_side_points_match_labels(self):
        """(index, translate) pairs rebuild α(λ_c)."""
        batch = encode_batch(self.labeling, self.X)
        lams = side_points(self.labeling, batch.side_indices, batch.side_translates)
        self.assertTrue(np.array_equal(lams, alpha_apply(self.labeling, batch.central)))

    def test_single_vector_api(self):
        """encode/decode on one vector."""
        frame = encode(self.labeling, [3.2])
        self.assertEqual(frame.n, 2)
        self.assertTrue(np.allclose(decode(self.labeling, frame, (0, 1)), [3.0]))

    def test_index_out_of_range(self):
        """A side index past the representative count is corruption."""
        frame = EncodedFrame(product_translate=[0], side_indices=[999, 0], side_translates=[[0], [0]])
        with self.assertRaises(FrameCorruptionError):
            decode(self.labeling, frame, (0,))

    def test_not_a_label(self):
        """Descriptions that are not a label cannot be decoded jointly."""
        frame = EncodedFrame(product_translate=[0], side_indices=[0, 0], side_translates=[[0], [3]])
        with self.assertRaises(FrameCorruptionError):
            decode(self.labeling, frame, (0, 1))

    def test_bad_received_sets(self):
        """Empty or out-of-range received sets are rejected."""
        frame = encode(self.labeling, [1.0])
        with self.assertRaises(ValueError):
            decode(self.labeling, frame, ())
        with self.assertRaises(ValueError):
            decode(self.labeling, frame, (0, 5))


class TestSimulation(unittest.TestCase):
    """Test the Monte-Carlo harness."""

    @classmethod
    def setUpClass(cls):
        cls.profile = WeightProfile.two_channel(1.0, 1.0)
        cls.labeling = _z1_labeling((4, 5), cls.profile)
        cls.source = SourceConfig(sigma2=1.0)

    def test_patterns_and_theory(self):
        """Every received set is reported; the full set has G·ν_c^{2/L} as theory."""
        result = simulate(self.labeling, self.profile, self.source, 20_000, seed=4)
        self.assertEqual([p.pattern for p in result.patterns], ["empty", "0", "1", "01"])
        self.assertAlmostEqual(result.pattern("01").theory_mse, 1.0 / 12.0)
        self.assertAlmostEqual(result.pattern("0").theory_mse, 400.0 / 48.0)
        self.assertEqual(result.pattern("01").empirical_mse, result.central_mse)
        self.assertAlmostEqual(result.central_mse, 1.0 / 12.0, delta=0.05 / 12.0)
        self.assertAlmostEqual(result.pattern("empty").empirical_mse, 1.0, delta=0.05)

    def test_rates(self):
        """Empirical central entropy matches the exact entropy of the unit-step quantizer on N(0, 1)."""
        edges = np.arange(-12, 13) + 0.5
        p = np.diff(norm.cdf(edges))
        p = p[p > 0]
        exact = float(-np.sum(p * np.log2(p)))
        result = simulate(self.labeling, self.profile, self.source, 20_000, seed=4)
        self.assertAlmostEqual(result.central_entropy, exact, delta=0.02)
        self.assertEqual(len(result.side_entropies), 2)
        self.assertTrue(all(h >= 0 for h in result.side_entropies))

    def test_reproducible_across_threads(self):
        """Chunked runs give identical results with any worker count."""
        with patch.object(simulate_module.settings, "simulation_chunk_size", 1000):
            single = simulate(self.labeling, self.profile, self.source, 5000, seed=9, workers=1)
            threaded = simulate(self.labeling, self.profile, self.source, 5000, seed=9, workers=3)
        self.assertEqual(single.model_dump(), threaded.model_dump())
        self.assertNotIn("wall_clock_seconds", single.model_dump())

    def test_erasure_channel_limits(self):
        """p = 0 reproduces the central MSE; p = 1 the source variance."""
        none_lost = simulate(self.labeling, self.profile, self.source, 3000, seed=2, erasure_probability=0.0)
        all_lost = simulate(self.labeling, self.profile, self.source, 3000, seed=2, erasure_probability=1.0)
        self.assertAlmostEqual(none_lost.channel_mse, none_lost.central_mse, places=12)
        self.assertAlmostEqual(all_lost.channel_mse, all_lost.pattern("empty").empirical_mse, places=12)

    def test_result_frame(self):
        """The CSV frame has one row per pattern and fixed columns."""
        result = simulate(self.labeling, self.profile, self.source, 1000, seed=1)
        frame = result.to_frame()
        self.assertEqual(frame.columns, RESULT_COLUMNS)
        self.assertEqual(frame.height, 4)

    def test_invalid_parameters(self):
        """Bad counts, probabilities and profiles raise SimulationConfigError."""
        with self.assertRaises(SimulationConfigError):
            simulate(self.labeling, self.profile, self.source, 0, seed=1)
        with self.assertRaises(SimulationConfigError):
            simulate(self.labeling, self.profile, self.source, 10, seed=1, workers=0)
        with self.assertRaises(SimulationConfigError):
            simulate(self.labeling, self.profile, self.source, 10, seed=1, erasure_probability=1.5)
        with self.assertRaises(SimulationConfigError):
            simulate(self.labeling, WeightProfile.symmetric(3), self.source, 10, seed=1)

    def test_gap_db(self):
        """Doubling the distortion is about 3 dB; zero is rejected."""
        self.assertAlmostEqual(gap_db(2.0, 1.0), 10.0 * np.log10(2.0))
        with self.assertRaises(SimulationConfigError):
            gap_db(0.0, 1.0)


class TestHighResolutionAgreement(unittest.TestCase):
    """Test simulated side distortions against the closed forms at high resolution."""

    def test_two_channel_z2(self):
        """Gaussian index-50 sublattices of Z^2, γ = (1.55, 1): within 0.15 dB, about 0.2 dB under G(Z^2)."""
        profile = WeightProfile.two_channel(1.55, 1.0)
        subs = [{"kind": "gaussian", "a": 1, "b": 7}, {"kind": "gaussian", "a": 7, "b": 1}]
        system = build_nested(make_lattice("Z", 2, scale=0.02), subs, profile.mu, "full")
        labeling = build_labeling(system, profile)
        result = simulate(labeling, profile, SourceConfig(sigma2=1.0), 200_000, seed=11)

        theory = theoretical_distortion2(profile, 2, system.central_volume, 50, 50)
        product = product_lattice_distortion2(profile, 2, system.central_volume, 50, 50, 1.0 / 12.0)
        for i, key in enumerate(("0", "1")):
            empirical = result.pattern(key).empirical_mse
            self.assertLess(abs(gap_db(empirical, theory[i])), 0.15)
            self.assertAlmostEqual(gap_db(product[i], empirical), 0.2, delta=0.1)

    def test_three_channel_z1(self):
        """Three index-15 sublattices of Z^1: D̄_i / D̄_{i,j} near 4, both within 1.5 dB."""
        profile = WeightProfile.symmetric(3)
        subs = [{"kind": "scalar", "a": 15}] * 3
        system = build_nested(make_lattice("Z", 1, scale=2e-4), subs, profile.mu, "full")
        self.assertEqual(system.product_index, 3375)
        labeling = build_labeling(system, profile)
        result = simulate(labeling, profile, SourceConfig(sigma2=1.0), 100_000, seed=3)

        theory = theoretical_distortion3(profile, 1, system.central_volume, [15, 15, 15])
        singles = [result.pattern(k).empirical_mse for k in ("0", "1", "2")]
        pairs = [result.pattern(k).empirical_mse for k in ("01", "02", "12")]
        self.assertAlmostEqual(np.mean(singles) / np.mean(pairs), 4.0, delta=0.6)
        self.assertLess(max(singles) / min(singles) - 1.0, 0.1)
        for value in singles:
            self.assertLess(abs(gap_db(value, theory[(0,)])), 1.5)
        for value in pairs:
            self.assertLess(abs(gap_db(value, theory[(0, 1)])), 1.5)


class TestSourceAndEntropy(unittest.TestCase):
    """Test source streams and entropy estimates."""

    def test_gaussian_source(self):
        """Chunks have the requested shape and repeat for a seed."""
        a = next(gaussian_source(2, 1.0, seed=7, chunk_size=100))
        b = next(gaussian_source(2, 1.0, seed=7, chunk_size=100))
        self.assertEqual(a.shape, (100, 2))
        self.assertTrue(np.array_equal(a, b))

    def test_plug_in_entropy(self):
        """Two equal symbols give one bit; one symbol gives zero."""
        self.assertAlmostEqual(plug_in_entropy({0: 1, 1: 1}), 1.0)
        self.assertEqual(plug_in_entropy({5: 10}), 0.0)
        self.assertEqual(plug_in_entropy({}), 0.0)


class TestBinning(unittest.TestCase):
    """Test random binning on Z^1 with three index-31 descriptions."""

    @classmethod
    def setUpClass(cls):
        cls.labeling = _z1_labeling((31, 31, 31), WeightProfile.symmetric(3))

    def test_bins_for_rate(self):
        """round(2^{L·R_b}) bins."""
        self.assertEqual(bins_for_rate(5.0, 1), 32)
        self.assertEqual(bins_for_rate(0.5, 2), 2)

    def test_full_rate_unambiguous(self):
        """With a bin per representative no pair is ambiguous."""
        report = binning_ambiguity(self.labeling, 5.0, trials=500, seed=1)
        self.assertEqual(report.ambiguous, 0)

    def test_low_rate_ambiguous(self):
        """Two bins per description leave most points ambiguous."""
        report = binning_ambiguity(self.labeling, 1.0, trials=500, seed=1)
        self.assertGreater(report.frequency, 0.1)
        self.assertGreater(report.expected_false_candidates, 0.0)

    def test_ambiguity_falls_with_rate(self):
        """Ambiguity does not grow as the binning rate rises."""
        freqs = [binning_ambiguity(self.labeling, r, trials=500, seed=1).frequency for r in (1.0, 3.0, 5.0)]
        self.assertTrue(freqs[0] >= freqs[1] >= freqs[2])

    def test_bin_decode(self):
        """At full rate the received bins identify the sent pair."""
        table = bin_assign(self.labeling, 5.0, seed=2)
        inventory = table.pairs["01"]
        k = 10
        idx_i, idx_j = int(inventory["idx_i"][k]), int(inventory["idx_j"][k])
        bins = (int(table.bins[0][idx_i]), int(table.bins[1][idx_j]))

        result = bin_decode(table, (0, 1), bins)
        self.assertTrue(result.unique)
        self.assertEqual(result.candidates, [(idx_i, idx_j)])
        self.assertIn(k, result.central_indices[0])

        swapped = bin_decode(table, (1, 0), bins[::-1])
        self.assertEqual(swapped.candidates, result.candidates)

    def test_binning_needs_three_descriptions(self):
        """Two-description labelings and non-positive rates are rejected."""
        two = _z1_labeling((4, 5), WeightProfile.two_channel(1.0, 1.0))
        with self.assertRaises(ValueError):
            bin_assign(two, 1.0, seed=0)
        with self.assertRaises(ValueError):
            bin_assign(self.labeling, 0.0, seed=0)
        with self.assertRaises(ValueError):
            binning_ambiguity(self.labeling, 1.0, trials=0, seed=0)


def run_tests():
    """Run all tests with verbose output."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()

    suite.addTests(loader.loadTestsFromTestCase(TestCoder))
    suite.addTests(loader.loadTestsFromTestCase(TestSimulation))
    suite.addTests(loader.loadTestsFromTestCase(TestHighResolutionAgreement))
    suite.addTests(loader.loadTestsFromTestCase(TestSourceAndEntropy))
    suite.addTests(loader.loadTestsFromTestCase(TestBinning))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_tests()
    sys.exit(0 if success else 1)
