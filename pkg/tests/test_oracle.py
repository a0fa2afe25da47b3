"""Tests for reference indices, quadrature and identity checks."""

import math

import numpy as np
import pytest

from proxy_sa.errors import CapabilityError, IncompleteInputError, InsufficientDataError, ValidationError
from proxy_sa.models import builtin, cdf_product, linear, restrict, trig_polynomial
from proxy_sa.oracle import (
    EqualityReport,
    closed_form_reference,
    gauss_legendre_unit,
    general_bound_report,
    pick_freeze_total,
    quadrature_variance,
    superset_index,
    verification_suite,
    verify_anova_structure,
    verify_variance_identity,
)
from proxy_sa.sampling import SeedPolicy


def _closed(model, order=2):
    return {r.subset: r for r in closed_form_reference(model, order)}


class TestPickFreeze:
    """Jansen pick-freeze totals."""

    @pytest.mark.parametrize("u,expected", [((1,), 0.558), ((3,), 0.244)])
    def test_ishigami_totals(self, ishigami, u, expected):
        ref = pick_freeze_total(ishigami, u, 2**16, SeedPolicy(1))
        assert ref.value_first_type == pytest.approx(expected, abs=0.01)

    def test_additive_half(self, additive2):
        assert pick_freeze_total(additive2, (1,), 2**14).value_first_type == pytest.approx(0.5, abs=0.02)

    def test_standard_error_scales(self, ishigami):
        """Spread over replicates shrinks by about sqrt(2) when m doubles."""
        def spread(m):
            vals = [pick_freeze_total(ishigami, (1,), m, SeedPolicy(7, r)).value_first_type for r in range(50)]
            return np.std(vals, ddof=1)

        ratio = spread(1024) / spread(2048)
        assert ratio == pytest.approx(math.sqrt(2), rel=0.25)

    def test_needs_two_rows(self, ishigami):
        with pytest.raises(InsufficientDataError):
            pick_freeze_total(ishigami, (1,), 1)


class TestSupersetIndex:
    """Inclusion-exclusion over total-effect matrices."""

    def test_pair(self):
        ref = superset_index({(1,): 0.5, (2,): 0.4, (1, 2): 0.8}, (1, 2), sigma=None)
        assert ref.value_first_type == pytest.approx(0.1, abs=1e-15)

    def test_additive_pair_is_zero(self):
        assert superset_index({(1,): 0.5, (2,): 0.5, (1, 2): 1.0}).value_first_type == 0.0

    def test_missing_subset(self):
        with pytest.raises(IncompleteInputError):
            superset_index({(1,): 0.5, (1, 2): 0.8}, (1, 2))

    def test_matches_closed_form(self, ishigami):
        refs = {u: pick_freeze_total(ishigami, u, 2**15, SeedPolicy(3)).matrix for u in [(1,), (3,), (1, 3)]}
        sigma = pick_freeze_total(ishigami, (1,), 2**15, SeedPolicy(3)).sigma
        assert superset_index(refs, (1, 3), sigma).value_first_type == pytest.approx(0.244, abs=0.01)


class TestClosedForms:
    """Analytic indices of the built-in models."""

    def test_ishigami(self, ishigami):
        ref = _closed(ishigami)
        got = [ref[(1,)].value_first_type, ref[(2,)].value_first_type, ref[(3,)].value_first_type,
               ref[(1, 3)].value_first_type]
        np.testing.assert_allclose(got, [0.558, 0.442, 0.244, 0.244], atol=5e-4)
        assert ref[(1, 2)].value_first_type == 0.0 and ref[(2, 3)].value_first_type == 0.0

    def test_product_of_cdfs(self, product2):
        ref = _closed(product2)
        assert ref[(1,)].value_first_type == pytest.approx(4 / 7, rel=1e-14)
        assert ref[(1, 2)].value_first_type == pytest.approx(1 / 7, rel=1e-14)
        assert ref[(1,)].sigma.trace == pytest.approx(7 / 144, rel=1e-14)

    def test_single_output_types_agree(self, ishigami):
        for r in closed_form_reference(ishigami):
            assert r.value_first_type == r.value_second_type

    def test_block_additive_against_pick_freeze(self, block_additive):
        ref = _closed(block_additive, 1)
        for j in (1, 4, 6):
            pf = pick_freeze_total(block_additive, (j,), 2**16, SeedPolicy(5))
            assert ref[(j,)].value_first_type == pytest.approx(pf.value_first_type, abs=0.01)

    def test_gsobol_against_pick_freeze(self, gsobol):
        ref = _closed(gsobol, 1)
        pf = pick_freeze_total(gsobol, (1,), 2**15, SeedPolicy(6))
        assert ref[(1,)].value_first_type == pytest.approx(pf.value_first_type, abs=0.02)

    def test_no_closed_form(self):
        with pytest.raises(CapabilityError):
            closed_form_reference(trig_polynomial([1.0], [0.0]))


class TestQuadrature:
    """Tensor Gauss-Legendre in probability space."""

    def test_weights_sum_to_one(self):
        t, w = gauss_legendre_unit(64)
        assert math.fsum(w) == pytest.approx(1.0, abs=1e-14)
        assert np.all((t > 0) & (t < 1))

    def test_uniform_variance(self):
        model = cdf_product(a=[1.0], b=[0.0])
        assert quadrature_variance(model, 32).trace == pytest.approx(1 / 12, abs=1e-14)

    def test_product_variance(self, product2):
        assert quadrature_variance(product2, 32).trace == pytest.approx(7 / 144, abs=1e-14)

    def test_sine_variance(self):
        assert quadrature_variance(trig_polynomial([0.0], [1.0]), 128).trace == pytest.approx(0.5, abs=1e-10)

    def test_dimension_cap(self, ishigami):
        with pytest.raises(CapabilityError):
            quadrature_variance(ishigami)


class TestVarianceIdentity:
    """Equality for products of CDFs and inequality in general."""

    @pytest.mark.parametrize("u", [(1,), (2,), (1, 2)])
    def test_product_equality(self, u):
        rep = verify_variance_identity(cdf_product(a=[1.5, -0.7], b=[0.3, 2.0]), u)
        assert rep.relation == "==" and rep.passed and rep.residual <= 1e-10

    def test_one_dimensional_values(self):
        rep = verify_variance_identity(cdf_product(a=[1.0], b=[0.0]), (1,), 64)
        assert rep.lhs == pytest.approx(1 / 12, abs=1e-13) and rep.rhs == pytest.approx(1 / 12, abs=1e-13)

    def test_sine_is_strict(self):
        rep = verify_variance_identity(trig_polynomial([0.0], [1.0]), (1,))
        assert rep.relation == "<=" and rep.passed and rep.slack > 0.1

    def test_convergence_in_nodes(self):
        model = cdf_product(a=[[1.0, 2.0], [0.5, -1.0]], b=[[0.2, 0.1], [1.0, 0.4]])
        res = [verify_variance_identity(model, (1, 2), n).residual for n in (4, 8, 16, 32)]
        assert all(b <= a + 1e-14 for a, b in zip(res, res[1:]))


class TestAnovaStructure:
    """Derivative-based ANOVA components at d = 2."""

    def test_linear(self):
        reports = verify_anova_structure(linear([1.0, 1.0]), nodes=32, inner=8)
        assert all(r.passed for r in reports)

    def test_restricted_ishigami(self):
        reports = verify_anova_structure(restrict(builtin("ishigami"), {2: 0.0}), nodes=32, inner=12)
        assert all(r.passed for r in reports)

    def test_needs_two_inputs(self, ishigami):
        with pytest.raises(CapabilityError):
            verify_anova_structure(ishigami, nodes=8)


class TestSuites:
    """Canned suites used by the verify command."""

    def test_equalities(self):
        reports = verification_suite("equalities", nodes=64)
        assert reports and all(isinstance(r, EqualityReport) and r.passed for r in reports)

    def test_inequalities(self):
        assert all(r.passed for r in verification_suite("inequalities", nodes=64))

    def test_unknown_scope(self):
        with pytest.raises(ValidationError):
            verification_suite("everything")

    def test_general_bound(self):
        rep = general_bound_report(linear([1.0, -2.0]), 64)
        assert rep.relation == "<=" and rep.slack >= 0

    def test_report_dict(self):
        d = EqualityReport("s", "==", 1.0, 1.0, 0.0, 1e-10).as_dict()
        assert d["passed"] is True and d["statement"] == "s"
