import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpreg.privacy import (
    PrivacyBudget,
    ZcdpBudget,
    advanced_compose,
    bin_indices,
    compose,
    dp_histogram,
    histogram_counts,
    histogram_threshold,
    laplace_noise,
    lse_total_budget,
    per_step_budget,
    symmetric_gaussian_matrix,
)

eps_st = st.floats(min_value=1e-3, max_value=50, allow_nan=False)
delta_st = st.floats(min_value=1e-12, max_value=0.5, allow_nan=False)


class TestBudgets:
    @pytest.mark.parametrize("eps, delta", [(-1, 0.1), (1, 1.0), (1, -0.1), (math.nan, 0.1)])
    def test_invalid_budget_rejected(self, eps, delta):
        with pytest.raises(ValueError):
            PrivacyBudget(eps, delta)

    def test_zero_budget_not_usable(self):
        with pytest.raises(ValueError):
            PrivacyBudget(0.0, 0.1).require_usable()
        with pytest.raises(ValueError):
            PrivacyBudget(1.0, 0.0).require_usable()

    def test_compose_adds(self):
        total = compose([PrivacyBudget(0.5, 1e-6), PrivacyBudget(0.25, 2e-6)])
        assert total == PrivacyBudget(0.75, 3e-6)

    def test_compose_empty(self):
        assert compose([]) == PrivacyBudget(0.0, 0.0)

    @given(eps_st, delta_st, st.integers(1, 20))
    def test_split_recomposes(self, eps, delta, k):
        total = compose(PrivacyBudget(eps, delta).split(k))
        assert total.epsilon == pytest.approx(eps, rel=1e-12)
        assert total.delta == pytest.approx(delta, rel=1e-12)

    def test_advanced_compose_formula(self):
        out = advanced_compose(PrivacyBudget(0.1, 1e-8), 10, 1e-6)
        assert out.epsilon == pytest.approx(0.1 * math.sqrt(60 * math.log(1e6)))
        assert out.delta == pytest.approx(1e-6 + 1e-7)

    @given(eps_st, delta_st, st.integers(1, 200))
    def test_per_step_budget_fits(self, eps, delta, k):
        total = PrivacyBudget(eps, delta)
        step = per_step_budget(total, k)
        basic = compose([step] * k)
        adv = advanced_compose(step, k, delta / 2) if k > 1 else basic
        fits_basic = basic.epsilon <= eps * (1 + 1e-12) and basic.delta <= delta * (1 + 1e-12)
        fits_adv = adv.epsilon <= eps * (1 + 1e-12) and adv.delta <= delta * (1 + 1e-12)
        assert fits_basic or fits_adv
        assert step.epsilon >= eps / k * (1 - 1e-12)

    def test_per_step_prefers_advanced_for_many_steps(self):
        step = per_step_budget(PrivacyBudget(1.0, 1e-6), 1000)
        assert step.epsilon > 1.0 / 1000


class TestZcdp:
    def test_conversion_formula(self):
        out = ZcdpBudget(0.5).to_approx_dp(1e-6)
        assert out.epsilon == pytest.approx(0.5 + 2 * math.sqrt(0.5 * math.log(1e6)))

    def test_lse_total_matches_rho_conversion(self):
        eps, delta = 1.3, 1e-7
        via_rho = ZcdpBudget.from_epsilon(eps).to_approx_dp(delta)
        assert lse_total_budget(eps, delta).epsilon == pytest.approx(via_rho.epsilon, rel=1e-14)

    @given(eps_st, delta_st)
    def test_from_approx_dp_inverts(self, eps, delta):
        rho = ZcdpBudget.from_approx_dp(PrivacyBudget(eps, delta))
        back = rho.to_approx_dp(delta)
        assert back.epsilon == pytest.approx(eps, rel=1e-9)

    def test_infinite_epsilon(self):
        assert math.isinf(ZcdpBudget.from_approx_dp(PrivacyBudget(math.inf, 1e-6)).rho)
        assert lse_total_budget(math.inf, 1e-6).is_infinite

    def test_rho_must_be_positive(self):
        with pytest.raises(ValueError):
            ZcdpBudget(0.0)


class TestNoise:
    def test_laplace_rejects_bad_scale(self):
        rng = np.random.default_rng(0)
        for bad in (0.0, -1.0, math.inf):
            with pytest.raises(ValueError):
                laplace_noise(bad, rng)

    def test_laplace_scale(self):
        rng = np.random.default_rng(0)
        draws = [laplace_noise(2.0, rng) for _ in range(20000)]
        # mean absolute deviation of Laplace(b) is b
        assert np.mean(np.abs(draws)) == pytest.approx(2.0, rel=0.03)

    def test_symmetric_matrix(self):
        rng = np.random.default_rng(0)
        M = symmetric_gaussian_matrix(4, 1.5, rng)
        assert np.array_equal(M, M.T)
        big = np.stack([symmetric_gaussian_matrix(3, 1.5, rng) for _ in range(4000)])
        assert big.std(axis=0) == pytest.approx(np.full((3, 3), 1.5), rel=0.05)

    def test_symmetric_matrix_rejects_zero_sigma(self):
        with pytest.raises(ValueError):
            symmetric_gaussian_matrix(3, 0.0, np.random.default_rng(0))


class TestHistogram:
    def test_bins_are_half_open(self):
        assert list(bin_indices([0.0, 0.999, 1.0, -0.001, -1.0], 1.0)) == [0, 0, 1, -1, -1]

    def test_threshold_formula(self):
        b = PrivacyBudget(0.5, 1e-6)
        assert histogram_threshold(1000, b, 0.05) == pytest.approx(
            2 * math.log(2 / (1e-6 * 0.05)) / (1000 * 0.5) + 1 / 1000
        )

    def test_concentrated_data_found(self):
        rng = np.random.default_rng(3)
        x = rng.normal(1234.5, 0.2, size=5000)
        res = dp_histogram(x, 1.0, PrivacyBudget(1.0, 1e-6), 0.05, rng)
        assert res is not None and res.bin_lower <= 1234.5 < res.bin_upper + 1.0

    def test_spread_data_refused(self):
        rng = np.random.default_rng(0)
        x = np.arange(50, dtype=float) * 10
        assert dp_histogram(x, 1.0, PrivacyBudget(1.0, 1e-6), 0.05, rng) is None

    def test_tie_goes_to_lowest_bin(self):
        x = np.array([0.5] * 5 + [3.5] * 5)
        res = dp_histogram(x, 1.0, PrivacyBudget(math.inf, 1e-6), 0.05, np.random.default_rng(0))
        assert res.bin_index == 0

    @pytest.mark.parametrize("bad", [[], [1.0, math.nan]])
    def test_bad_input(self, bad):
        with pytest.raises(ValueError):
            dp_histogram(np.array(bad), 1.0, PrivacyBudget(1.0, 1e-6), 0.05, np.random.default_rng(0))

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_swap_changes_l1_by_at_most_two_over_n(self, n):
        # every dataset over 3 bins, every single-row replacement
        worst = 0.0
        for data in itertools.product(range(3), repeat=n):
            base = histogram_counts(np.array(data, dtype=float), 1.0)
            for i, new in itertools.product(range(n), range(3)):
                other = list(data)
                other[i] = new
                alt = histogram_counts(np.array(other, dtype=float), 1.0)
                keys = set(base) | set(alt)
                l1 = sum(abs(base.get(k, 0) - alt.get(k, 0)) for k in keys)
                assert l1 <= 2 / n + 1e-15
                worst = max(worst, l1)
        assert worst == pytest.approx(2 / n, abs=1e-15)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200), st.floats(0.1, 100))
    def test_counts_normalised(self, values, w):
        counts = histogram_counts(np.array(values), w)
        assert sum(counts.values()) == pytest.approx(1.0)
