"""
Tests for Index Assignment

Tests for:
- Tuple generation (radius, expansion factor, cutoff ties, index bound)
- Cost matrices and the certified assignment solver
- The labeling function α and its inverse
- Labeling tables on disk
"""

import json
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch
import sys

import numpy as np

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.analysis.special import psi3
from src.labeling import assignment
from src.labeling.assignment import (
    NotALabelError,
    OptimalityCertificateError,
    alpha_apply,
    alpha_invert,
    alpha_invert_many,
    assign_tuples,
    assignment_cost,
    brute_force_assignment,
    certify_assignment,
    cost_matrix,
    evaluate_labeling,
    labeling_distortions,
    random_labeling,
    solve_assignment,
    weighted_side_cost,
)
from src.labeling.table import LabelingTableError, build_labeling, labeling_from_dict, labeling_to_dict, load_labeling, save_labeling
from src.labeling.tuples import (
    CosetCollisionError,
    IndexBoundError,
    check_index_bound,
    generate_tuples,
    outside_fraction,
    reduce_to_cosets,
    _cheapest,
    start_radius,
)
from src.lattice.core import CapacityError, make_lattice
from src.nested.system import build_nested
from src.weights.models import WeightProfile


def _z1_system(*factors, rule="deduplicated"):
    return build_nested(make_lattice("Z", 1), [{"kind": "scalar", "a": a} for a in factors], [1.0] * len(factors), rule)


class TestTupleGeneration(unittest.TestCase):
    """Test candidate tuples for small scalar systems."""

    @classmethod
    def setUpClass(cls):
        cls.system = _z1_system(4, 5)
        cls.profile = WeightProfile.two_channel(1.0, 1.0)
        cls.tuples = generate_tuples(cls.system, cls.profile)

    def test_count_and_radius(self):
        """Z^1 with (4, 5): 20 tuples, r = 10, ψ = 1."""
        self.assertEqual(self.tuples.count, 20)
        self.assertAlmostEqual(start_radius(self.system), 10.0)
        self.assertAlmostEqual(self.tuples.radius, 10.0)
        self.assertAlmostEqual(self.tuples.psi, 1.0)

    def test_sublattice_membership(self):
        """Element i of every tuple lies in Λ_i."""
        t = self.tuples.tuples[:, :, 0]
        self.assertTrue(np.all(t[:, 0] % 4 == 0))
        self.assertTrue(np.all(t[:, 1] % 5 == 0))

    def test_pair_constraint(self):
        """Every pair lies within the final radius."""
        t = self.tuples.tuples[:, :, 0]
        self.assertTrue(np.all(np.abs(t[:, 0] - t[:, 1]) <= self.tuples.radius + 1e-9))

    def test_distinct_cosets(self):
        """Canonical tuples are pairwise distinct."""
        flat = self.tuples.tuples.reshape(20, -1)
        self.assertEqual(len(np.unique(flat, axis=0)), 20)

    def test_outside_fraction(self):
        """Some tuples reach outside the canonical cell, most do not."""
        fraction = outside_fraction(self.tuples)
        self.assertGreater(fraction, 0.0)
        self.assertLess(fraction, 0.5)

    def test_workers_do_not_change_output(self):
        """Threaded generation gives the same tuples."""
        threaded = generate_tuples(self.system, self.profile, workers=3)
        self.assertTrue(np.array_equal(threaded.tuples, self.tuples.tuples))

    def test_reduce_to_cosets(self):
        """Product-lattice shifted copies collapse back to N_π cosets."""
        doubled = self.tuples.model_copy(update={"tuples": np.concatenate([self.tuples.tuples, self.tuples.tuples + 40])})
        reduced = reduce_to_cosets(doubled)
        self.assertEqual(len(reduced.tuples), 20)
        self.assertTrue(np.array_equal(reduced.tuples, self.tuples.tuples))

    def test_missing_cosets(self):
        """Fewer than N_π distinct cosets is a collision."""
        partial = self.tuples.model_copy(update={"tuples": self.tuples.tuples[:10]})
        with self.assertRaises(CosetCollisionError):
            reduce_to_cosets(partial)

    def test_profile_mismatch(self):
        """Profile n must match the system."""
        with self.assertRaises(ValueError):
            generate_tuples(self.system, WeightProfile.symmetric(3))

    def test_three_descriptions(self):
        """Z^1 with three index-31 sublattices: 961 tuples, ψ within 5% of ψ_{3,1}."""
        system = _z1_system(31, 31, 31)
        tuple_set = generate_tuples(system, WeightProfile.symmetric(3))
        self.assertEqual(tuple_set.count, 961)
        self.assertLess(abs(tuple_set.psi / psi3(1) - 1.0), 0.05)

    def test_counting_radius(self):
        """Index-31 sublattices of Z^1: Σ_{|k|≤3}(2r − 31|k|)/31 = 31 gives r = 43·31/14."""
        system = _z1_system(31, 31, 31)
        tuple_set = generate_tuples(system, WeightProfile.symmetric(3))
        self.assertAlmostEqual(start_radius(system), 31.0 ** 1.5 / 2.0, places=9)
        self.assertAlmostEqual(tuple_set.psi * start_radius(system), 43.0 * 31.0 / 14.0, places=6)

    def test_cutoff_ties_rotate(self):
        """Tuples tied at the cutoff are drawn in turn by row."""
        tuples = np.array([[[0], [0]], [[0], [3]], [[0], [1]], [[0], [2]]])
        cost = np.array([0.0, 1.0, 1.0, 1.0])
        picks = [_cheapest(tuples, cost, 2, rotation=k)[:, 1, 0].tolist() for k in range(4)]
        self.assertEqual(picks, [[0, 1], [0, 2], [0, 3], [0, 1]])
        self.assertEqual(len(_cheapest(tuples, cost, 6)), 4)

    def test_three_channel_balance(self):
        """Symmetric index-15 sublattices give every description the same table distortion."""
        system = _z1_system(15, 15, 15, rule="full")
        labeling = build_labeling(system, WeightProfile.symmetric(3))
        dist = labeling_distortions(labeling)
        singles = [dist[(i,)] for i in range(3)]
        pairs = [dist[ell] for ell in ((0, 1), (0, 2), (1, 2))]
        self.assertLess(max(singles) / min(singles) - 1.0, 0.1)
        self.assertLess(max(pairs) / min(pairs) - 1.0, 0.1)


class TestIndexBound(unittest.TestCase):
    """Test the admissible index bound."""

    def test_bound_value(self):
        """Two descriptions in Z^1: √2·2·N_π."""
        self.assertAlmostEqual(check_index_bound(_z1_system(4, 5)), 40.0 * np.sqrt(2.0))

    def test_bound_exceeded(self):
        """Index 49 beside two index-2 sublattices is not admissible."""
        system = _z1_system(2, 2, 49)
        with self.assertRaises(IndexBoundError):
            check_index_bound(system)
        with self.assertRaises(IndexBoundError):
            generate_tuples(system, WeightProfile.symmetric(3))


class TestAssignmentSolver(unittest.TestCase):
    """Test matching and its certificate."""

    def test_matches_brute_force(self):
        """The certified solver finds the exhaustive optimum."""
        rng = np.random.default_rng(31)
        for N in (3, 5, 7):
            cost = rng.uniform(0.0, 10.0, size=(N, N))
            _, solved = solve_assignment(cost)
            _, best = brute_force_assignment(cost)
            self.assertAlmostEqual(solved, best, places=9)

    def test_certificate_rejects_suboptimal(self):
        """Swapping a 2x2 identity-optimal matching fails certification."""
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        certify_assignment(cost, np.array([0, 1]))
        with self.assertRaises(OptimalityCertificateError):
            certify_assignment(cost, np.array([1, 0]))

    def test_non_square(self):
        """Cost matrices must be square."""
        with self.assertRaises(ValueError):
            solve_assignment(np.zeros((2, 3)))

    def test_brute_force_limit(self):
        """Exhaustive search stops at N = 8."""
        with self.assertRaises(ValueError):
            brute_force_assignment(np.zeros((9, 9)))

    def test_assignment_cost_example(self):
        """Balanced pair: 2γ‖λ_c − (λ_0 + λ_1)/2‖²."""
        profile = WeightProfile.two_channel(1.0, 1.0)
        self.assertAlmostEqual(assignment_cost([1.0], [[0.0], [4.0]], profile), 2.0)


class TestLabelingFunction(unittest.TestCase):
    """Test the optimal labeling on Z^1 with (4, 5)."""

    @classmethod
    def setUpClass(cls):
        cls.system = _z1_system(4, 5)
        cls.profile = WeightProfile.two_channel(1.0, 1.0)
        cls.tuples = generate_tuples(cls.system, cls.profile)
        cls.labeling = assign_tuples(cls.tuples, cls.profile)

    def test_cost_split_equals_side_cost(self):
        """f + g is the weighted side distortion of the table."""
        J = self.labeling.cost.J
        self.assertAlmostEqual(J, weighted_side_cost(self.labeling, self.profile), delta=1e-9 * max(1.0, J))

    def test_evaluate_matches_stored_cost(self):
        """Re-evaluating the table reproduces f and g."""
        cost = evaluate_labeling(self.labeling, self.profile)
        self.assertAlmostEqual(cost.f, self.labeling.cost.f, places=9)
        self.assertAlmostEqual(cost.g, self.labeling.cost.g, places=9)

    def test_better_than_random(self):
        """The optimal labeling beats a random bijection on g and ties on f."""
        baseline = random_labeling(self.tuples, self.profile, np.random.default_rng(3))
        self.assertLessEqual(self.labeling.cost.g, baseline.cost.g + 1e-9)
        self.assertAlmostEqual(self.labeling.cost.f, baseline.cost.f, places=9)

    def test_alpha_round_trip(self):
        """α⁻¹(α(λ_c)) = λ_c on and off the canonical cell."""
        for value in (-7, 0, 13, 45, 1000):
            label = alpha_apply(self.labeling, [value])
            self.assertEqual(label.shape, (2, 1))
            self.assertEqual(alpha_invert(self.labeling, label).tolist(), [value])

    def test_alpha_shift_invariance(self):
        """α(λ_c + π) = α(λ_c) + π for π in the product lattice."""
        base = alpha_apply(self.labeling, [3])
        shifted = alpha_apply(self.labeling, [43])
        self.assertTrue(np.array_equal(shifted, base + 40))

    def test_alpha_batch(self):
        """The vectorized inverse finds every label."""
        lam = np.arange(-30, 30).reshape(-1, 1)
        labels = alpha_apply(self.labeling, lam)
        back, found = alpha_invert_many(self.labeling, labels)
        self.assertTrue(np.all(found))
        self.assertTrue(np.array_equal(back, lam))

    def test_not_a_label(self):
        """A tuple outside the image raises NotALabelError."""
        with self.assertRaises(NotALabelError):
            alpha_invert(self.labeling, [[0], [1]])
        with self.assertRaises(NotALabelError):
            alpha_invert(self.labeling, [[0, 0]])

    def test_side_distortions(self):
        """Both single descriptions get a positive table distortion."""
        dist = labeling_distortions(self.labeling)
        self.assertEqual(sorted(dist), [(0,), (1,)])
        self.assertTrue(all(d > 0 for d in dist.values()))

    def test_table_cost_equals_matching(self):
        """The assigned table hits the per-dimension matching optimum."""
        _, total = solve_assignment(cost_matrix(self.tuples, self.profile)[0])
        self.assertAlmostEqual(total / 20.0, self.labeling.cost.g, places=9)

    def test_cost_matrix_budget(self):
        """N_π² above the budget raises CapacityError."""
        with patch.object(assignment.settings, "max_cost_matrix_entries", 100):
            with self.assertRaises(CapacityError):
                cost_matrix(self.tuples, self.profile)


class TestMatchingConsistency(unittest.TestCase):
    """Test that the stored table realises the optimal matching cost."""

    def _check(self, system, profile):
        tuple_set = generate_tuples(system, profile)
        _, total = solve_assignment(cost_matrix(tuple_set, profile)[0])
        labeling = assign_tuples(tuple_set, profile)
        expected = total / (system.product_index * system.dimension)
        self.assertAlmostEqual(labeling.cost.g, expected, delta=1e-8 * max(1.0, expected))

    def test_scalar_sublattices_of_z2(self):
        """Z^2 with scalar factors 3 and 5 under the full product rule."""
        subs = [{"kind": "scalar", "a": 3}, {"kind": "scalar", "a": 5}]
        system = build_nested(make_lattice("Z", 2), subs, [1.0, 1.0], "full")
        self._check(system, WeightProfile.two_channel(1.55, 1.0))

    def test_eisenstein_sublattices_of_a2(self):
        """A2 with multipliers 2 + ω and 3 + ω under the full product rule."""
        subs = [{"kind": "eisenstein", "a": 2, "b": 1}, {"kind": "eisenstein", "a": 3, "b": 1}]
        system = build_nested(make_lattice("A2"), subs, [1.0, 1.0], "full")
        self._check(system, WeightProfile.two_channel(1.0, 1.0))


class TestLabelingTable(unittest.TestCase):
    """Test labeling tables on disk."""

    @classmethod
    def setUpClass(cls):
        cls.labeling = build_labeling(_z1_system(4, 5), WeightProfile.two_channel(1.55, 1.0))

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_save_and_load(self):
        """A saved table loads back with the same entries and cost."""
        path = save_labeling(self.labeling, Path(self.temp_dir) / "labeling.json")
        loaded = load_labeling(path)
        self.assertTrue(np.array_equal(loaded.forward, self.labeling.forward))
        self.assertEqual(loaded.profile.gamma, self.labeling.profile.gamma)
        self.assertAlmostEqual(loaded.cost.J, self.labeling.cost.J, places=9)

    def test_unknown_version(self):
        """Another table version is rejected."""
        data = labeling_to_dict(self.labeling)
        data["version"] = 99
        with self.assertRaises(LabelingTableError):
            labeling_from_dict(data)

    def test_missing_entry(self):
        """Tables must cover the product cell exactly once."""
        data = labeling_to_dict(self.labeling)
        data["entries"] = data["entries"][:-1]
        with self.assertRaises(LabelingTableError):
            labeling_from_dict(data)

    def test_element_outside_sublattice(self):
        """A tuple element off its sublattice is rejected."""
        data = labeling_to_dict(self.labeling)
        data["entries"][0]["tuple"][1] = [1]
        with self.assertRaises(LabelingTableError):
            labeling_from_dict(data)

    def test_bad_profile(self):
        """An invalid stored profile is reported as a table error."""
        data = labeling_to_dict(self.labeling)
        data["profile"]["mu"] = [1.0, -1.0]
        with self.assertRaises(LabelingTableError):
            labeling_from_dict(data)

    def test_unreadable_file(self):
        """Broken JSON raises LabelingTableError."""
        path = Path(self.temp_dir) / "broken.json"
        path.write_text(json.dumps({"version": 1})[:-1])
        with self.assertRaises(LabelingTableError):
            load_labeling(path)


def run_tests():
    """Run all tests with verbose output."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()

    suite.addTests(loader.loadTestsFromTestCase(TestTupleGeneration))
    suite.addTests(loader.loadTestsFromTestCase(TestIndexBound))
    suite.addTests(loader.loadTestsFromTestCase(TestAssignmentSolver))
    suite.addTests(loader.loadTestsFromTestCase(TestLabelingFunction))
    suite.addTests(loader.loadTestsFromTestCase(TestMatchingConsistency))
    suite.addTests(loader.loadTestsFromTestCase(TestLabelingTable))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_tests()
    sys.exit(0 if success else 1)
