"""
Tests for Closed-Form Analysis

Tests for:
- Special functions β_L, β̃_L, ψ_{3,L} and Φ_L
- Lens volumes and the Monte-Carlo intersection oracle
- Rates, side distortions, rate loss and distortion products
- Gaussian inner-bound and binning forms
- Closed-form reports and the analysis tables
"""

import math
import unittest
from fractions import Fraction
from pathlib import Path
import sys

from pydantic import ValidationError

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.analysis.closed_forms import (
    G_BCC,
    ClosedFormReport,
    InfeasibleRateError,
    ParameterRangeError,
    binned_distortions,
    binning_equivalence_ratio,
    binning_threshold,
    central_distortion,
    closed_form_report,
    distortion_product3,
    gaussian_entropy,
    gaussian_inner_bound,
    gaussian_limit_product,
    hat_gamma_three,
    index_from_rate,
    index_upper_bound,
    inner_bound_high_rate_product,
    product_lattice_gap_db,
    rate_loss,
    rate_loss_limit,
    rates,
    theoretical_distortion2,
    theoretical_distortion2_rates,
    theoretical_distortion3,
)
from src.analysis.oracle import intersection_volume_mc, mc_intersection_oracle
from src.analysis.special import (
    UnsupportedDimensionError,
    ball_intersection_volume,
    beta,
    beta_compensated,
    beta_exact,
    beta_tilde,
    beta_tilde_exact,
    lens_volume,
    phi,
    phi_infinity,
    psi2,
    psi3,
    psi3_infinity,
    psi_closed_form,
    quadrature_intersection_moments,
)
from src.analysis.tables import (
    INNER_BOUND_COLUMNS,
    binning_threshold_table,
    inner_bound_table,
    product_table,
    psi_table,
    rate_loss_table,
    sphere_gap_checks,
    sphere_gap_table,
    tradeoff_sweep,
)
from src.lattice.core import make_lattice
from src.weights.algebra import hat_gamma_ell
from src.weights.models import WeightProfile


class TestSpecialFunctions(unittest.TestCase):
    """Test the Pochhammer sums and the expansion factors."""

    def test_exact_values(self):
        """β_1 = 3/2, β̃_1 = 5/12, β_3 = 5/12."""
        self.assertEqual(beta_exact(1), Fraction(3, 2))
        self.assertEqual(beta_tilde_exact(1), Fraction(5, 12))
        self.assertEqual(beta_exact(3), Fraction(5, 12))
        self.assertEqual(beta(1), 1.5)

    def test_float_sum_agrees_at_small_L(self):
        """The compensated float sum matches the exact rational for small L."""
        for L in (1, 3, 5, 7, 9):
            self.assertAlmostEqual(beta_compensated(L) / beta(L), 1.0, places=9)

    def test_even_and_large_dimensions_rejected(self):
        """Even L and L above 41 raise UnsupportedDimensionError."""
        for L in (0, 2, 4, 43):
            with self.assertRaises(UnsupportedDimensionError):
                beta(L)
        with self.assertRaises(UnsupportedDimensionError):
            psi3(2)

    def test_psi_values(self):
        """ψ_{3,1} = √(4/3) and ψ_{3,∞} = (4/3)^{1/4}."""
        self.assertAlmostEqual(psi3(1), math.sqrt(4.0 / 3.0), places=12)
        self.assertAlmostEqual(psi3_infinity(), (4.0 / 3.0) ** 0.25, places=15)
        self.assertEqual(psi2(), 1.0)
        self.assertEqual(psi_closed_form(2, 7), 1.0)
        self.assertIsNone(psi_closed_form(3, 2))
        self.assertIsNone(psi_closed_form(4, 1))

    def test_psi_decreases_to_limit(self):
        """ψ_{3,L} falls with L and stays above ψ_{3,∞}."""
        values = psi_table(21)["psi3"].to_list()
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))
        self.assertTrue(all(v > psi3_infinity() for v in values))

    def test_phi(self):
        """Φ_1 = 10/9 and Φ_∞ = √(4/3)."""
        self.assertAlmostEqual(phi(1), 10.0 / 9.0, places=12)
        self.assertAlmostEqual(phi_infinity(), math.sqrt(4.0 / 3.0), places=15)

    def test_beta_override(self):
        """A perturbed β changes ψ."""
        self.assertNotAlmostEqual(psi3(1, beta_value=1.65), psi3(1), places=3)


class TestIntersectionGeometry(unittest.TestCase):
    """Test lens volumes, quadrature and the Monte-Carlo oracle."""

    def test_lens_volume_limits(self):
        """Coincident balls give ω_L; balls two apart do not meet."""
        self.assertAlmostEqual(lens_volume(3, 0.0), 4.0 * math.pi / 3.0, places=12)
        self.assertEqual(lens_volume(3, 2.5), 0.0)
        self.assertAlmostEqual(lens_volume(1, 1.0), 1.0, places=12)
        with self.assertRaises(ValueError):
            lens_volume(2, -0.1)

    def test_ball_intersection_volume(self):
        """Unequal balls: interval overlap, containment and the 3-D lens formula."""
        self.assertAlmostEqual(ball_intersection_volume(1, 3.0, 1.0, 3.0), 1.0, places=10)
        self.assertAlmostEqual(ball_intersection_volume(1, 3.0, 1.0, 1.0), 2.0, places=12)
        self.assertAlmostEqual(ball_intersection_volume(3, 1.0, 2.0, 2.0), 13.0 * math.pi / 24.0, places=8)
        self.assertAlmostEqual(ball_intersection_volume(3, 2.0, 2.0, 1.5), 8.0 * lens_volume(3, 0.75), places=8)
        self.assertEqual(ball_intersection_volume(2, 1.0, 1.0, 2.0), 0.0)

    def test_quadrature_moments(self):
        """Quadrature reproduces β_L and β̃_L to 1e-6."""
        for L in (1, 3, 5):
            b, bt = quadrature_intersection_moments(L)
            self.assertAlmostEqual(b / beta(L), 1.0, places=6)
            self.assertAlmostEqual(bt / beta_tilde(L), 1.0, places=6)

    def test_intersection_volume_mc(self):
        """Unit intervals one apart overlap in length one."""
        est, err = intersection_volume_mc(1, 1.0, 100_000, seed=5)
        self.assertLessEqual(abs(est - 1.0), 5.0 * err)

    def test_oracle_beta(self):
        """The oracle finds β_1 and β̃_1 within five standard errors."""
        est = mc_intersection_oracle(1, 200_000, seed=7)
        self.assertLessEqual(abs(est.beta - 1.5), 5.0 * est.beta_stderr)
        self.assertLessEqual(abs(est.beta_tilde - 5.0 / 12.0), 5.0 * est.beta_tilde_stderr)

    def test_oracle_deterministic(self):
        """Same seed, same estimate."""
        a = mc_intersection_oracle(3, 5000, seed=1)
        b = mc_intersection_oracle(3, 5000, seed=1)
        self.assertEqual(a.model_dump(), b.model_dump())


class TestRatesAndDistortions(unittest.TestCase):
    """Test rates and side distortions."""

    def setUp(self):
        self.h1 = gaussian_entropy(1)

    def test_rates(self):
        """Index 4 in one dimension costs two bits."""
        r_c, (r0,) = rates(self.h1, 1, 1.0, [4], [1.0])
        self.assertAlmostEqual(r_c, self.h1)
        self.assertAlmostEqual(r0, self.h1 - 2.0)

    def test_index_from_rate(self):
        """The rate formula inverts; rates above R_c are infeasible."""
        self.assertAlmostEqual(index_from_rate(self.h1, 1, 1.0, self.h1 - 2.0), 4.0)
        with self.assertRaises(InfeasibleRateError):
            index_from_rate(self.h1, 1, 1.0, 5.0)

    def test_central_distortion(self):
        """G ν_c^{2/L}: a half-step integer lattice gives 1/48."""
        self.assertAlmostEqual(central_distortion(make_lattice("Z", 1, 0.5)), 1.0 / 48.0)
        self.assertAlmostEqual(central_distortion(make_lattice("Z", 2), 4.0), 4.0 / 12.0)

    def test_bad_variance(self):
        """Non-positive variances are out of range."""
        with self.assertRaises(ParameterRangeError):
            gaussian_entropy(1, 0.0)

    def test_two_channel_index_vs_rate(self):
        """Index and rate forms give the same side distortions."""
        profile = WeightProfile.two_channel(1.55, 1.0)
        L, nu_c = 2, 0.01
        h = gaussian_entropy(L)
        r_c, (r0, r1) = rates(h, L, nu_c, [5.0, 5.0], profile.mu)
        by_index = theoretical_distortion2(profile, L, nu_c, 5.0, 5.0)
        by_rate = theoretical_distortion2_rates(profile, L, h, r_c, r0, r1)
        for a, b in zip(by_index, by_rate):
            self.assertAlmostEqual(a / b, 1.0, places=9)

    def test_two_channel_balanced(self):
        """Balanced Z^1 (4,5): each side gets a quarter of G(S_1)·400."""
        d0, d1 = theoretical_distortion2(WeightProfile.two_channel(1.0, 1.0), 1, 1.0, 4, 5)
        self.assertAlmostEqual(d0, 400.0 / 48.0)
        self.assertAlmostEqual(d1, d0)

    def test_three_channel_coefficients(self):
        """Direct three-description coefficients agree with the general form."""
        profile = WeightProfile(n=3, gamma={"0": 0.5, "1": 1.0, "2": 2.0, "01": 1.0, "02": 0.3, "12": 0.8})
        for ell in [(0,), (1,), (2,)]:
            self.assertAlmostEqual(hat_gamma_three(profile, ell), hat_gamma_ell(profile, 1, ell), places=12)
        for ell in [(0, 1), (0, 2), (1, 2)]:
            self.assertAlmostEqual(hat_gamma_three(profile, ell), hat_gamma_ell(profile, 2, ell), places=12)

    def test_three_channel_needs_odd_L(self):
        """Even L has no three-description closed form."""
        with self.assertRaises(UnsupportedDimensionError):
            theoretical_distortion3(WeightProfile.symmetric(3), 2, 1.0, [9, 9, 9])

    def test_product_lattice_gap(self):
        """Z^2 as product lattice loses about 0.2 dB against the sphere."""
        self.assertAlmostEqual(product_lattice_gap_db(2, 1.0 / 12.0), 10.0 * math.log10(math.pi / 3.0), places=12)

    def test_index_bound(self):
        """Two descriptions in Z^1: √2·2·N_π."""
        self.assertAlmostEqual(index_upper_bound(2, 1, 20), 40.0 * math.sqrt(2.0))
        with self.assertRaises(ParameterRangeError):
            index_upper_bound(1, 1, 20)


class TestRateLossAndProducts(unittest.TestCase):
    """Test rate loss and distortion products."""

    def test_rate_loss_values(self):
        """Scalar rate loss is about 0.236 bit; the BCC lattice loses less."""
        self.assertAlmostEqual(rate_loss(1, 1.0 / 12.0), 0.2358, delta=5e-4)
        self.assertAlmostEqual(rate_loss(3, G_BCC), 0.1948, delta=5e-4)
        self.assertAlmostEqual(rate_loss_limit(), 0.0, places=12)

    def test_rate_loss_table(self):
        """Table rows follow the input pairs."""
        table = rate_loss_table([(1, 1.0 / 12.0), (3, G_BCC)])
        self.assertEqual(table["L"].to_list(), [1, 3])
        self.assertGreater(table["rate_loss"][0], table["rate_loss"][1])

    def test_product_independent_of_central_rate(self):
        """D̄_c·D̄_0·D̄_{0,1} does not move with R_c."""
        table = product_table(1.0, [1.0, 1.5, 2.0, 2.5], 3, gaussian_entropy(3), 1.0 / 12.0)
        for product, closed in zip(table["product"], table["closed_form"]):
            self.assertAlmostEqual(product / closed, 1.0, places=9)
        self.assertAlmostEqual(
            table["closed_form"][0], distortion_product3(3, 1.0, gaussian_entropy(3), 1.0 / 12.0), places=15
        )

    def test_gaussian_limit_product(self):
        """σ⁶ 2^{−6R}/27 at R = 1."""
        self.assertAlmostEqual(gaussian_limit_product(1.0), 1.0 / (64.0 * 27.0))
        self.assertAlmostEqual(gaussian_limit_product(1.0, 2.0), 8.0 / (64.0 * 27.0))

    def test_tradeoff_sweep(self):
        """The trade-off parameter moves R_c but not the product."""
        sweep = tradeoff_sweep([0.2, 0.5, 0.8], 3, [1.0, 1.0, 1.0], 1, gaussian_entropy(1), 1.0 / 12.0)
        products = sweep["product"].to_list()
        self.assertTrue(all(abs(p / products[0] - 1.0) < 1e-9 for p in products))
        self.assertLess(sweep["R_c"][0], sweep["R_c"][2])
        with self.assertRaises(ParameterRangeError):
            tradeoff_sweep([0.0], 2, [1.0, 1.0], 1, gaussian_entropy(1), 1.0 / 12.0)

    def test_sphere_gap_flags(self):
        """Every ordering flag holds up to L = 21."""
        flags = sphere_gap_checks(sphere_gap_table(21))
        self.assertEqual(set(flags), {"strict_ordering", "gsl_decreasing", "phi_rising"})
        self.assertTrue(all(flags.values()), msg=str(flags))

    def test_sphere_gap_phi_column(self):
        """The Φ term starts at log₂(25/27) and ends above 0 at L = 21."""
        table = sphere_gap_table(21)
        phi_terms = table["phi_term"].to_list()
        self.assertAlmostEqual(phi_terms[0], math.log2(25.0 / 27.0), places=12)
        self.assertLess(phi_terms[0], 0.0)
        self.assertGreater(phi_terms[-1], 0.0)
        self.assertLess(phi_terms[-1], table["gsl_term"][-1])

    def test_sphere_gap_range(self):
        """L_max above 41 is out of range."""
        with self.assertRaises(ParameterRangeError):
            sphere_gap_table(45)


class TestInnerBoundAndBinning(unittest.TestCase):
    """Test the Gaussian inner bound and binning forms."""

    def test_inner_bound_mmse(self):
        """Uncorrelated noise: MMSE_m = σ_q²/m."""
        point = gaussian_inner_bound(0.0, sigma_q2=0.1)
        for got, want in zip(point.mmse, [0.1, 0.05, 0.1 / 3.0]):
            self.assertAlmostEqual(got, want, places=12)
        self.assertTrue(all(e < m for e, m in zip(point.exact_mmse, point.mmse)))

    def test_inner_bound_rho_range(self):
        """ρ must lie in (-1/2, 1/2]."""
        for rho in (0.6, -0.5):
            with self.assertRaises(ParameterRangeError):
                gaussian_inner_bound(rho, sigma_q2=0.1)
        with self.assertRaises(ParameterRangeError):
            gaussian_inner_bound(0.0)

    def test_high_rate_product(self):
        """At high rate the exact product matches the asymptotic form."""
        point = gaussian_inner_bound(-0.25, rate=8.0)
        self.assertAlmostEqual(point.product / inner_bound_high_rate_product(-0.25, 8.0), 1.0, places=3)

    def test_inner_bound_table(self):
        """One row per ρ with the documented columns."""
        table = inner_bound_table([-0.4, 0.0, 0.4], 2.0)
        self.assertEqual(table.columns, INNER_BOUND_COLUMNS)
        self.assertEqual(table.height, 3)

    def test_binning_threshold(self):
        """R_b,min = R/2 when ψ√N′ = 1."""
        self.assertAlmostEqual(binning_threshold(1.0, 1.0, 1, psi=1.0), 0.5)
        with self.assertRaises(ParameterRangeError):
            binning_threshold(1.0, 0.5, 1)

    def test_binned_distortions(self):
        """R_b = 0, N′ = 1, ψ = 1 gives (1/12, 1)."""
        d_ij, d_c = binned_distortions(0.0, 1.0, psi=1.0)
        self.assertAlmostEqual(d_ij, 1.0 / 12.0)
        self.assertAlmostEqual(d_c, 1.0)

    def test_binning_equivalence(self):
        """The central distortion ratio approaches one as N′ grows."""
        rho, ratio = binning_equivalence_ratio(1000.0)
        self.assertTrue(-0.5 < rho <= 0.5)
        self.assertAlmostEqual(ratio, 1.0, places=4)
        with self.assertRaises(ParameterRangeError):
            binning_equivalence_ratio(2.0)

    def test_binning_threshold_table(self):
        """Thresholds grow with N′."""
        table = binning_threshold_table([2.0, 8.0, 32.0], 2.0, 1)
        values = table["R_b_min"].to_list()
        self.assertTrue(values[0] < values[1] < values[2])


class TestClosedFormReport(unittest.TestCase):
    """Test the per-system report."""

    def test_two_channel_report(self):
        """Two descriptions get both side distortions, ψ = 1 and the index bound."""
        report = closed_form_report(WeightProfile.two_channel(1.0, 1.0), 1, 1.0, [4, 5])
        self.assertIn("two_channel.side.0", report.outputs)
        self.assertEqual(report.outputs["psi"], 1.0)
        self.assertAlmostEqual(report.outputs["index_bound"], 40.0 * math.sqrt(2.0))
        self.assertLess(report.outputs["rate.side.1"], report.outputs["rate.central"])

    def test_three_channel_even_L_note(self):
        """Even L leaves a note instead of three-channel outputs."""
        report = closed_form_report(WeightProfile.symmetric(3), 2, 1.0, [9, 9, 9])
        self.assertNotIn("phi", report.outputs)
        self.assertEqual(len(report.notes), 1)

    def test_three_channel_odd_L(self):
        """Odd L adds six side distortions, Φ and the rate loss."""
        report = closed_form_report(WeightProfile.symmetric(3), 1, 1.0, [31, 31, 31])
        sides = [k for k in report.outputs if k.startswith("three_channel.side.")]
        self.assertEqual(len(sides), 6)
        self.assertIn("rate_loss", report.signed)

    def test_negative_output_rejected(self):
        """Unsigned outputs must be nonnegative."""
        with self.assertRaises(ValidationError):
            ClosedFormReport(L=1, n=2, outputs={"distortion.central": -1.0})
        ClosedFormReport(L=1, n=2, outputs={"rate.central": -1.0}, signed=["rate.central"])

    def test_index_count_mismatch(self):
        """One index per description."""
        with self.assertRaises(ParameterRangeError):
            closed_form_report(WeightProfile.symmetric(3), 1, 1.0, [3, 3])


def run_tests():
    """Run all tests with verbose output."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()

    suite.addTests(loader.loadTestsFromTestCase(TestSpecialFunctions))
    suite.addTests(loader.loadTestsFromTestCase(TestIntersectionGeometry))
    suite.addTests(loader.loadTestsFromTestCase(TestRatesAndDistortions))
    suite.addTests(loader.loadTestsFromTestCase(TestRateLossAndProducts))
    suite.addTests(loader.loadTestsFromTestCase(TestInnerBoundAndBinning))
    suite.addTests(loader.loadTestsFromTestCase(TestClosedFormReport))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_tests()
    sys.exit(0 if success else 1)
