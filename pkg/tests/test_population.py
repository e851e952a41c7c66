import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from brwx import population as pop
from brwx._random import replicate_rng, uniforms
from brwx.distributions import DegenerateProgeny, ProgenyLaw, sample_positive_stable
from brwx.errors import DomainError, UndefinedStatisticError

SWITCH = math.log(1e6)


def surrogate_paths(alpha, n, reps, seed=0):
    law = ProgenyLaw(alpha)
    return [pop.simulate_surrogate_sizes(law, n, SWITCH, replicate_rng(seed, i)) for i in range(reps)]


@pytest.fixture(scope="module")
def half_paths():
    return surrogate_paths(0.5, 25, 1000)


class TestExact:
    def test_degenerate_law_stays_at_one(self):
        path = pop.simulate_exact_sizes(DegenerateProgeny(1), 10, 100, np.random.default_rng(0))
        assert np.all(path.log_sizes == 0) and path.n == 10 and not path.truncated

    def test_same_seed_same_path(self):
        a = pop.simulate_exact_sizes(ProgenyLaw(0.8), 5, 10**6, replicate_rng(1, 2))
        b = pop.simulate_exact_sizes(ProgenyLaw(0.8), 5, 10**6, replicate_rng(1, 2))
        assert np.array_equal(a.log_sizes, b.log_sizes)

    def test_sizes_are_integers_and_nondecreasing(self):
        for i in range(20):
            p = pop.simulate_exact_sizes(ProgenyLaw(0.7), 6, 10**6, replicate_rng(4, i))
            z = np.exp(p.log_sizes)
            assert p.log_sizes[0] == 0.0
            assert np.all(np.abs(z - np.round(z)) <= 1e-9 * z)
            assert np.all(np.diff(p.log_sizes) >= 0)

    def test_cap_truncates_after_first_exceedance(self):
        p = pop.simulate_exact_sizes(DegenerateProgeny(3), 10, 50, np.random.default_rng(0))
        assert p.truncated and np.allclose(np.exp(p.log_sizes), [1, 3, 9, 27, 81])

    def test_domain(self):
        with pytest.raises(DomainError):
            pop.simulate_exact_sizes(ProgenyLaw(0.5), 0, 10, None)

    def test_first_generation_tail(self):
        rng = np.random.default_rng(9)
        z = ProgenyLaw(0.6).sample(uniforms(rng, 10**6))
        hits = int(np.sum(z >= 5))
        p = 5**-0.6
        assert abs(hits - z.size * p) <= 3 * math.sqrt(z.size * p * (1 - p))

    @pytest.mark.xfail(strict=True, reason="alpha**n log Z_n still drifts upward by ~0.5 per generation at n <= 6")
    def test_w_consistency_between_generations(self):
        a = 0.8
        w4, w6 = [], []
        for i in range(1000):
            p = pop.simulate_exact_sizes(ProgenyLaw(a), 6, 10**7, replicate_rng(21, i))
            if p.truncated:
                continue
            w4.append(a**4 * p.log_sizes[4])
            w6.append(a**6 * p.log_sizes[6])
        assert len(w6) > 200
        assert np.median(w6) > np.median(w4)
        assert abs(np.median(w4) / np.median(w6) - 1) <= 0.2


class TestSurrogate:
    def test_switch_floor(self):
        with pytest.raises(DomainError):
            pop.simulate_surrogate_sizes(ProgenyLaw(0.5), 5, math.log(1e3), None)

    def test_needs_alpha(self):
        with pytest.raises(DomainError):
            pop.simulate_surrogate_sizes(DegenerateProgeny(2), 5, SWITCH, None)

    def test_same_seed_same_path(self):
        a = pop.simulate_surrogate_sizes(ProgenyLaw(0.5), 25, SWITCH, replicate_rng(3, 0))
        b = pop.simulate_surrogate_sizes(ProgenyLaw(0.5), 25, SWITCH, replicate_rng(3, 0))
        assert np.array_equal(a.log_sizes, b.log_sizes)

    def test_hybrid_and_monotone(self, half_paths):
        for p in half_paths[:100]:
            assert p.mode == "hybrid" and p.switch_generation is not None
            assert np.all(np.diff(p.log_sizes) >= 0)
            assert np.all(np.isfinite(p.log_sizes))

    def test_increments_shrink(self, half_paths):
        inc = np.array([pop.estimate_w(p).increments for p in half_paths])
        med = np.median(inc, axis=0)
        # compare well separated generations; adjacent medians are noisy early on
        assert np.all(np.diff(med[5:]) < 0)
        w = np.median([pop.estimate_w(p).value for p in half_paths])
        assert med[19] < 0.05 * w

    def test_last_two_generations_agree(self, half_paths):
        close = 0
        for p in half_paths:
            w = pop.estimate_w(p)
            close += w.increments[-1] < 0.05 * w.value
        assert close >= 0.9 * len(half_paths)

    def test_stable_seam(self):
        # N**-2 * sum of N progeny draws vs c * S, c fitted on its own stream
        law, n_terms, n_sums = ProgenyLaw(0.5), 10**5, 10**4
        c = pop.calibrate_stable_scale(law, np.random.default_rng(100))
        rng = np.random.default_rng(101)
        sums = np.array([pop.offspring_total(law, n_terms, rng) for _ in range(n_sums)]) / n_terms**2
        rng2 = np.random.default_rng(102)
        s = c * sample_positive_stable(0.5, uniforms(rng2, 10**6), uniforms(rng2, 10**6))
        assert stats.ks_2samp(sums, s).statistic < 0.02
        assert c == pytest.approx(pop.stable_scale_theory(0.5), rel=0.05)

    def test_analytic_scale(self):
        assert pop.stable_scale_theory(0.5) == pytest.approx(math.pi, rel=1e-14)


class TestW:
    def test_constant_path(self):
        path = pop.PopulationPath(np.zeros(8), alpha=0.5)
        w = pop.estimate_w(path)
        assert w.value == pytest.approx(0.5**7 * math.log(2), rel=1e-15)
        assert w.generation == 7

    def test_needs_alpha(self):
        with pytest.raises(DomainError):
            pop.estimate_w(pop.PopulationPath(np.zeros(3)))

    @given(st.lists(st.floats(0, 1e5), min_size=1, max_size=30), st.floats(0.05, 0.95))
    def test_nonnegative(self, logs, alpha):
        w = pop.estimate_w(pop.PopulationPath(np.cumsum(logs), alpha=alpha))
        assert w.value >= 0 and np.all(w.increments >= 0)


class TestMassConcentration:
    def test_convention_pinned(self):
        assert pop.mass_concentration_stat(pop.PopulationPath([0.0, 1.0]), 1.0) == 0.0

    def test_undefined(self):
        with pytest.raises(UndefinedStatisticError):
            pop.mass_concentration_stat(pop.PopulationPath([0.0, 0.0]), 1.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            pop.mass_concentration_stat(pop.PopulationPath([0.0]), 1.0)
        with pytest.raises(DomainError):
            pop.mass_concentration_stat(pop.PopulationPath([0.0, 1.0]), 0.0)

    @given(st.lists(st.floats(0.0, 30.0), min_size=2, max_size=12), st.floats(0.1, 3.0))
    def test_matches_naive(self, steps, s):
        logs = np.concatenate([[0.0], np.cumsum(steps)])[: len(steps)]
        if logs[-1] == 0:
            return
        naive = math.log(sum(math.exp(s * v) for v in logs[:-1])) / logs[-1]
        assert pop.mass_concentration_stat(pop.PopulationPath(logs), s) == pytest.approx(naive, rel=1e-9, abs=1e-12)

    def test_surrogate_no_overflow(self, half_paths):
        vals = [pop.mass_concentration_stat(p, 1.0) for p in half_paths[:500]]
        assert np.all(np.isfinite(vals))
        assert 0.45 <= np.median(vals) <= 0.55

    def test_alpha_03_s2(self):
        vals = [pop.mass_concentration_stat(p, 2.0) for p in surrogate_paths(0.3, 25, 500, seed=5)]
        assert 0.54 <= np.median(vals) <= 0.66


class TestHeavySums:
    @pytest.mark.parametrize("alpha, lo, hi", [
        (0.5, 1.8, 2.2),
        pytest.param(0.8, 1.15, 1.35, marks=pytest.mark.xfail(
            strict=True, reason="finite-n median is ~1.379; log(c S)/log n is not yet negligible")),
    ])
    def test_ratio(self, alpha, lo, hi):
        vals = [pop.heavy_sum_log_ratio(ProgenyLaw(alpha), 10**6, replicate_rng(8, i)) for i in range(100)]
        assert lo <= np.median(vals) <= hi

    # 1/alpha + median(log(c S))/log n with c = Gamma(1 - alpha)**(1/alpha), from 1e6 stable draws
    @pytest.mark.parametrize("alpha, finite_n", [(0.5, 2.0899), (0.8, 1.3786)])
    def test_ratio_matches_stable_prediction(self, alpha, finite_n):
        vals = [pop.heavy_sum_log_ratio(ProgenyLaw(alpha), 10**6, replicate_rng(8, i)) for i in range(100)]
        assert abs(np.median(vals) - finite_n) < 0.04

    def test_degenerate(self):
        assert pop.heavy_sum_log_ratio(DegenerateProgeny(1), 1000, None) == pytest.approx(1.0, rel=1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            pop.heavy_sum_log_ratio(ProgenyLaw(0.5), 1, None)
