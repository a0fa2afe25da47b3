"""Tests for Poincaré constants, DGSM bounds and aggregated variance bounds."""

import json
import math

import numpy as np
import pytest
from scipy import stats

from proxy_sa import subsets as sub
from proxy_sa.bounds import (
    InteractionSets,
    centered_inputs_bound,
    classical_bound,
    dgsm,
    general_bound_sum,
    load_interaction_sets,
    ordered_interaction_bound,
    poincare_constants,
)
from proxy_sa.differentiation import partial_stack
from proxy_sa.errors import DegenerateModelError, DivergenceError, IncompleteInputError, ValidationError
from proxy_sa.estimators import CovMatrix
from proxy_sa.marginals import Marginal, uniform
from proxy_sa.sampling import SeedPolicy, prng_points, transform

# E[(d_1 f)^2] for Ishigami (a=7, b=0.1): E[cos^2] * E[(1 + b x3^4)^2].
ISHIGAMI_DGSM_1 = 0.5 * (1 + 0.2 * math.pi**4 / 5 + 0.01 * math.pi**8 / 9)
ISHIGAMI_VAR = 49 / 8 + 0.1 * math.pi**4 / 5 + 0.01 * math.pi**8 / 18 + 0.5


class TestPoincareConstants:
    """Suprema and derived constants per marginal."""

    def test_unit_uniform(self):
        c = poincare_constants(uniform(0, 1))
        assert c.sup_w == 0.25 and c.c_new == 0.125
        assert c.c_optimal == pytest.approx(1 / math.pi**2, rel=1e-14)
        assert c.c_best == c.c_optimal

    def test_symmetric_uniform(self):
        c = poincare_constants(uniform(-math.pi, math.pi))
        assert c.c_optimal == pytest.approx(4.0, rel=1e-14)
        assert c.c_new == pytest.approx(math.pi**2 / 2, rel=1e-14)
        assert c.c_best == pytest.approx(4.0, rel=1e-14)

    def test_uniform_matches_numeric_scan(self):
        """The closed form agrees with a scan of a scipy-backed uniform."""
        c = poincare_constants(Marginal.from_scipy(stats.uniform(loc=-1, scale=3)))
        assert c.sup_w == pytest.approx(9 / 4, rel=1e-8)
        assert c.sup_cheeger == pytest.approx(3 / 4, rel=1e-8)

    def test_normal(self):
        c = poincare_constants(Marginal.from_scipy(stats.norm()))
        assert math.isinf(c.sup_w)
        assert c.sup_cheeger == pytest.approx(0.25 * math.sqrt(2 * math.pi), rel=1e-8)
        assert c.c_new == pytest.approx(math.pi / 2, rel=1e-6)

    def test_cauchy_diverges(self):
        with pytest.raises(DivergenceError):
            poincare_constants(Marginal.from_scipy(stats.cauchy()))

    def test_grid_too_small(self):
        with pytest.raises(ValidationError):
            poincare_constants(uniform(0, 1), grid_points=64)


class TestClassicalBound:
    """DGSM-based upper bounds U_u."""

    def test_ishigami_dgsm(self, ishigami):
        samples = transform(prng_points(2**16, 3, SeedPolicy(2)), ishigami.space)
        D = dgsm(partial_stack(ishigami, (1,), samples))
        assert D.trace == pytest.approx(ISHIGAMI_DGSM_1, rel=0.01)

    def test_ishigami_value(self, ishigami):
        consts = [poincare_constants(mg) for mg in ishigami.space]
        U = classical_bound(CovMatrix(np.array([[ISHIGAMI_DGSM_1]])), consts, (1,), ISHIGAMI_VAR)
        assert U == pytest.approx(2.230, abs=1e-3)

    def test_zero_dgsm(self, ishigami):
        consts = [poincare_constants(mg) for mg in ishigami.space]
        assert classical_bound(CovMatrix.zeros(1), consts, (1, 2), 1.0) == 0.0

    def test_frobenius_single_output(self, ishigami):
        consts = [poincare_constants(mg) for mg in ishigami.space]
        M = CovMatrix(np.array([[3.0]]))
        assert classical_bound(M, consts, (1,), 2.0, "frobenius") == classical_bound(M, consts, (1,), 2.0)

    def test_degenerate_sigma(self, ishigami):
        consts = [poincare_constants(mg) for mg in ishigami.space]
        with pytest.raises(DegenerateModelError):
            classical_bound(CovMatrix.zeros(1), consts, (1,), 0.0)


class TestGeneralBound:
    """Sum of proxies over all or over the active subsets."""

    def test_full_sum(self):
        proxies = {u: 1.0 for u in sub.nonempty_subsets((1, 2, 3))}
        assert general_bound_sum(proxies, 3) == 7.0

    def test_missing_subset(self):
        with pytest.raises(IncompleteInputError):
            general_bound_sum({(1,): 1.0, (2,): 1.0}, 2)

    def test_sparse_sets(self):
        sets = InteractionSets.from_active([(1,), (2,), (1, 2), (3,)], 3)
        assert general_bound_sum({(1,): 1.0, (2,): 2.0, (1, 2): 0.5, (3,): 4.0}, 3, sets) == 7.5


class TestOrderedBound:
    """Greedy bound over ordered interaction sets."""

    def test_additive(self):
        sets = InteractionSets(tuple(((j,),) for j in (1, 2, 3)))
        bound, order = ordered_interaction_bound([3.0, 1.0, 2.0], sets)
        assert bound == pytest.approx(3.0) and order == [2, 3, 1]

    def test_pair_block(self):
        """A block {1,2} with singletons: the smaller D carries weight 2."""
        sets = InteractionSets.from_active([(1,), (2,), (1, 2)], 2)
        bound, order = ordered_interaction_bound([5.0, 1.0], sets)
        assert order == [2, 1] and bound == pytest.approx(2 / 2 * 1.0 + 1 / 2 * 5.0)

    def test_single_input(self):
        bound, order = ordered_interaction_bound([4.0], InteractionSets((((1,),),)))
        assert bound == 2.0 and order == [1]

    def test_relabeling(self):
        sets = InteractionSets.from_active([(1,), (2,), (3,), (1, 3)], 3)
        swapped = InteractionSets.from_active([(3,), (2,), (1,), (1, 3)], 3)
        assert ordered_interaction_bound([1.0, 2.0, 3.0], sets)[0] == ordered_interaction_bound([3.0, 2.0, 1.0], swapped)[0]

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            ordered_interaction_bound([1.0], InteractionSets.from_active([(1,), (2,)], 2))

    def test_centered_inputs(self):
        assert centered_inputs_bound([4.0, 1.0, 3.0], [1, 3]) == (1.5, 3)


class TestInteractionSets:
    """Declarations and file formats."""

    def test_subset_must_contain_input(self):
        with pytest.raises(ValidationError):
            InteractionSets((((2,),), ((2,),)))

    def test_empty_family(self):
        with pytest.raises(ValidationError):
            InteractionSets(((), ((2,),)))

    def test_mapping_needs_all_inputs(self):
        with pytest.raises(ValidationError):
            InteractionSets.from_mapping({1: [[1]]}, 2)

    def test_active_order(self):
        sets = InteractionSets.from_active([(1, 2), (2,), (1,)], 2)
        assert sets.active() == [(1,), (2,), (1, 2)]

    @pytest.mark.parametrize("text", [
        json.dumps({"1": [[1], [1, 2]], "2": [[2], [1, 2]], "3": [[3]]}),
        json.dumps([[1], [2], [3], [1, 2]]),
        "1;2\n3;1,2\n",
    ])
    def test_file_formats(self, tmp_path, text):
        path = tmp_path / "sets.txt"
        path.write_text(text)
        sets = load_interaction_sets(path, 3)
        assert sets.active() == [(1,), (2,), (3,), (1, 2)]
        assert InteractionSets.from_mapping(sets.to_json(), 3) == sets
