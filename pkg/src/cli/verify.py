"""
Self-Verification Suites

Runs the numerical invariant checks and reports them as one JSON document:
- identities: weight-sum identities and the centroid cost decomposition on random profiles
- oracle: β_L, β̃_L against the Monte-Carlo intersection oracle and lens quadrature
- matching: the certified assignment solver against exhaustive search for N ≤ 8
- closed-forms: fixed values and internal consistency of the closed forms

`beta_override` replaces the stored β_L values in the oracle suite; a
perturbed value must make that suite fail.
"""

import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.analysis.closed_forms import (
    gaussian_entropy,
    gaussian_inner_bound,
    inner_bound_high_rate_product,
    rate_loss,
    rate_loss_limit,
    theoretical_distortion2,
    theoretical_distortion2_rates,
    rates,
)
from src.analysis.oracle import mc_intersection_oracle
from src.analysis.special import beta, beta_tilde, psi3, psi3_infinity, quadrature_intersection_moments
from src.analysis.tables import product_table, sphere_gap_checks, sphere_gap_table, tradeoff_sweep
from src.labeling.assignment import assign_tuples, brute_force_assignment, cost_matrix, solve_assignment
from src.labeling.tuples import generate_tuples
from src.lattice.core import make_lattice
from src.nested.models import ProductRule
from src.nested.system import build_nested
from src.utils.logger import get_logger, run_context
from src.utils.rng import Stream, stream_generator
from src.weights.algebra import check_centroid_decomposition, check_weight_identities, random_profile
from src.weights.models import WeightProfile

logger = get_logger(__name__)

SUITES = ("identities", "oracle", "matching", "closed-forms")
ORACLE_DIMENSIONS = (1, 3)


class CheckResult(BaseModel):
    """One numerical check."""

    suite: str
    name: str
    passed: bool
    value: Optional[float] = None
    expected: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""


class VerifyReport(BaseModel):
    """Outcome of a verify run."""

    seed: int
    suites: List[str] = Field(default_factory=list)
    checks: List[CheckResult] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> dict:
        """JSON-ready document with per-suite counts."""
        per_suite = {
            s: {
                "checks": sum(1 for c in self.checks if c.suite == s),
                "failed": sum(1 for c in self.checks if c.suite == s and not c.passed),
            }
            for s in self.suites
        }
        return {
            "passed": self.passed,
            "seed": self.seed,
            "suites": per_suite,
            "warnings": self.warnings,
            "checks": [c.model_dump() for c in self.checks],
        }


def _close(suite: str, name: str, value: float, expected: float, tolerance: float, relative: bool = True) -> CheckResult:
    gap = abs(value - expected)
    if relative:
        gap /= max(abs(expected), 1e-300)
    return CheckResult(
        suite=suite, name=name, passed=bool(gap <= tolerance),
        value=float(value), expected=float(expected), tolerance=tolerance,
    )


# -------------------------------------------------------------------
# Suites
# -------------------------------------------------------------------

def identity_checks(seed: int, trials: int = 5) -> List[CheckResult]:
    """Random profiles for n = 2..5, random vectors in R^3."""
    out = []
    for n in range(2, 6):
        rng = stream_generator(seed, Stream.ORACLE, 1000 + n)
        worst: Dict[str, float] = {}
        worst_centroid = 0.0
        for _ in range(trials):
            profile = random_profile(n, rng)
            lam_c = rng.standard_normal(3)
            lams = rng.standard_normal((n, 3))
            report = check_weight_identities(profile, lam_c, lams)
            for key, r in report.residuals.items():
                worst[key] = max(worst.get(key, 0.0), r)
            for kappa in range(1, n):
                scale = max(1.0, float(lam_c @ lam_c) + float(np.sum(lams * lams)))
                worst_centroid = max(worst_centroid, check_centroid_decomposition(profile, kappa, lam_c, lams) / scale)
        for key, r in worst.items():
            out.append(CheckResult(suite="identities", name=f"n{n}.{key}", passed=r <= 1e-9, value=r, tolerance=1e-9))
        out.append(CheckResult(
            suite="identities", name=f"n{n}.weighted_centroid", passed=worst_centroid <= 1e-9,
            value=worst_centroid, tolerance=1e-9,
        ))
    return out


def oracle_checks(
    seed: int,
    samples: int = 1_000_000,
    beta_override: Optional[Dict[int, float]] = None,
) -> List[CheckResult]:
    """
    β_L and β̃_L against the Monte-Carlo oracle (tolerance: the larger of
    1e-3 relative and five standard errors) and against quadrature (1e-6 relative).
    """
    beta_override = beta_override or {}
    out = []
    for L in ORACLE_DIMENSIONS:
        b = beta_override.get(L, beta(L))
        bt = beta_tilde(L)
        est = mc_intersection_oracle(L, samples, seed)
        for name, stored, mc, err in (
            ("beta", b, est.beta, est.beta_stderr),
            ("beta_tilde", bt, est.beta_tilde, est.beta_tilde_stderr),
        ):
            tol = max(1e-3 * abs(stored), 5.0 * err)
            out.append(_close("oracle", f"L{L}.{name}.monte_carlo", mc, stored, tol, relative=False))
        qb, qbt = quadrature_intersection_moments(L)
        out.append(_close("oracle", f"L{L}.beta.quadrature", qb, b, 1e-6))
        out.append(_close("oracle", f"L{L}.beta_tilde.quadrature", qbt, bt, 1e-6))
    out.append(_close("oracle", "L1.psi3", psi3(1, beta_override.get(1)), math.sqrt(4.0 / 3.0), 1e-12))
    return out


def _system_costs() -> List[tuple]:
    """Cost matrices of small real systems (N_π ≤ 8), scalar and two-dimensional."""
    out = []
    Z1 = make_lattice("Z", 1)
    Z2 = make_lattice("Z", 2)
    gaussian = {"kind": "gaussian", "a": 1, "b": 1}
    cases = [
        ("z1_2_3_symmetric", Z1, [{"kind": "scalar", "a": 2}, {"kind": "scalar", "a": 3}], WeightProfile.two_channel(1.0, 1.0)),
        ("z1_2_3_weighted", Z1, [{"kind": "scalar", "a": 2}, {"kind": "scalar", "a": 3}], WeightProfile.two_channel(1.55, 1.0)),
        ("z2_gaussian_pair", Z2, [gaussian, gaussian], WeightProfile.two_channel(1.0, 1.0)),
        ("z2_gaussian_scalar_weighted", Z2, [gaussian, {"kind": "scalar", "a": 2}], WeightProfile.two_channel(1.55, 1.0)),
    ]
    for name, lattice, subs, profile in cases:
        system = build_nested(lattice, subs, profile.mu, ProductRule.FULL)
        tuple_set = generate_tuples(system, profile)
        cost, _, _ = cost_matrix(tuple_set, profile)
        out.append((name, cost, tuple_set, profile))
    return out


def matching_checks(seed: int, random_cases: int = 6) -> List[CheckResult]:
    """
    Certified solver cost equals the exhaustive minimum. For real systems the
    stored labeling must also carry the matched cost: g = total/(N_π·L).
    """
    corpus = []
    for k in range(random_cases):
        rng = stream_generator(seed, Stream.ORACLE, 2000 + k)
        N = 3 + k % 6
        corpus.append((f"random_{N}x{N}.{k}", rng.uniform(0.0, 10.0, size=(N, N)), None, None))
    try:
        corpus += _system_costs()
    except Exception as e:
        logger.error(f"Could not build the matching corpus systems: {e}", exc_info=True)
        return [CheckResult(suite="matching", name="system_corpus", passed=False, detail=str(e))]

    out = []
    for name, cost, tuple_set, profile in corpus:
        try:
            _, solved = solve_assignment(cost)
        except Exception as e:
            out.append(CheckResult(suite="matching", name=name, passed=False, detail=f"solver failed: {e}"))
            continue
        _, best = brute_force_assignment(cost)
        out.append(_close("matching", name, solved, best, 1e-9 * max(1.0, abs(best)), relative=False))
        if tuple_set is not None:
            system = tuple_set.system
            g = assign_tuples(tuple_set, profile).cost.g
            expected = solved / (system.product_index * system.dimension)
            out.append(_close("matching", f"{name}.labeling_cost", g, expected, 1e-9 * max(1.0, expected), relative=False))
    return out


def closed_form_checks() -> List[CheckResult]:
    """Known values and consistency between the index and rate forms."""
    out = [
        _close("closed-forms", "rate_loss.L1", rate_loss(1, 1.0 / 12.0), 0.2358, 5e-4, relative=False),
        _close("closed-forms", "rate_loss.limit", rate_loss_limit(), 0.0, 1e-12, relative=False),
        _close("closed-forms", "psi3.infinity", psi3_infinity(), (4.0 / 3.0) ** 0.25, 1e-15),
        _close("closed-forms", "beta.L1", beta(1), 1.5, 1e-12),
        _close("closed-forms", "beta_tilde.L1", beta_tilde(1), 5.0 / 12.0, 1e-12),
    ]
    flags = sphere_gap_checks(sphere_gap_table(21))
    for key, ok in flags.items():
        out.append(CheckResult(suite="closed-forms", name=f"sphere_gap.{key}", passed=ok))

    h = gaussian_entropy(3)
    table = product_table(1.0, [1.0, 1.5, 2.0, 2.5], 3, h, 1.0 / 12.0)
    spread = float(np.max(np.abs(table["product"].to_numpy() / table["closed_form"].to_numpy() - 1.0)))
    out.append(CheckResult(suite="closed-forms", name="product.independent_of_central_rate", passed=spread <= 1e-9, value=spread, tolerance=1e-9))

    sweep = tradeoff_sweep([0.1, 0.3, 0.5, 0.7, 0.9], 2, [2.0, 2.0], 1, gaussian_entropy(1), 1.0 / 12.0)
    products = sweep["product"].to_numpy()
    spread = float(np.max(np.abs(products / products[0] - 1.0)))
    out.append(CheckResult(suite="closed-forms", name="tradeoff.product_constant", passed=spread <= 1e-9, value=spread, tolerance=1e-9))

    profile = WeightProfile.two_channel(1.55, 1.0)
    L, nu_c, N0, N1 = 2, 0.01, 5.0, 5.0
    h2 = gaussian_entropy(L)
    r_c, (r0, r1) = rates(h2, L, nu_c, [N0, N1], profile.mu)
    by_index = theoretical_distortion2(profile, L, nu_c, N0, N1)
    by_rate = theoretical_distortion2_rates(profile, L, h2, r_c, r0, r1)
    out.append(_close("closed-forms", "two_channel.index_vs_rate", by_index[0], by_rate[0], 1e-9))

    rho, rate = -0.25, 8.0
    out.append(_close(
        "closed-forms", "inner_bound.high_rate_product",
        gaussian_inner_bound(rho, rate=rate).product, inner_bound_high_rate_product(rho, rate), 1e-3,
    ))
    return out


# -------------------------------------------------------------------
# Driver
# -------------------------------------------------------------------

def parse_suites(text: Optional[str]) -> List[str]:
    """Comma-separated suite names; None selects every suite."""
    if text is None:
        return list(SUITES)
    names = [s.strip() for s in text.split(",") if s.strip()]
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; choose from {list(SUITES)}")
    return names


def run_verify(
    suites: Sequence[str],
    seed: int = 0,
    oracle_samples: int = 1_000_000,
    beta_override: Optional[Dict[int, float]] = None,
) -> VerifyReport:
    """Run the selected suites in their canonical order."""
    runners: Dict[str, Callable[[], List[CheckResult]]] = {
        "identities": lambda: identity_checks(seed),
        "oracle": lambda: oracle_checks(seed, oracle_samples, beta_override),
        "matching": lambda: matching_checks(seed),
        "closed-forms": closed_form_checks,
    }
    selected = [s for s in SUITES if s in suites]
    report = VerifyReport(seed=seed, suites=selected)
    if not selected:
        report.warnings.append("no suites selected; zero checks run")
        logger.warning("verify ran with an empty suite selection")
        return report
    for name in selected:
        checks = runners[name]()
        report.checks.extend(checks)
        failed = sum(1 for c in checks if not c.passed)
        logger.info(
            f"Suite {name}: {len(checks) - failed}/{len(checks)} checks passed",
            extra=run_context(seed=seed, suite=name, failed=failed),
        )
    return report
