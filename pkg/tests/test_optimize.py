import dataclasses
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrbuffer.core import DomainError, LinkParams
from qrbuffer.optimize import (
    InfeasibleScheduleError,
    _level_objective,
    hierarchical_optimize,
    optimal_n_level1,
    search_bound,
)
from qrbuffer.rates import LevelSchedule, rate_obp_level1


def brute_argmax(params, upto):
    rates = [rate_obp_level1(params, n) for n in range(1, upto + 1)]
    best = max(rates)
    return rates.index(best) + 1


class TestLevel1:
    @pytest.mark.parametrize("p, beta, n_opt", [(0.1, 0.9, 3), (0.05, 0.8, 2), (0.1, 0.4, 1)])
    def test_fixtures(self, p, beta, n_opt):
        res = optimal_n_level1(LinkParams(p=p, beta=beta))
        assert res.n_opt == n_opt
        assert not res.threshold_hit

    @pytest.mark.parametrize("p, beta", [
        (0.5, 0.6), (0.1, 0.9), (0.01, 0.99), (0.2, 0.95), (0.9, 0.999), (0.001, 0.9),
    ])
    def test_matches_exhaustive_scan(self, p, beta):
        params = LinkParams(p=p, beta=beta)
        res = optimal_n_level1(params)
        assert res.n_opt == brute_argmax(params, min(search_bound(p, beta), 3000))
        assert res.rate_at_opt == rate_obp_level1(params, res.n_opt)

    @given(st.floats(1e-3, 1.0), st.floats(0.01, 0.999))
    def test_local_maximum(self, p, beta):
        params = LinkParams(p=p, beta=beta)
        res = optimal_n_level1(params)
        assert res.n_opt >= 1
        assert res.rate_at_opt >= rate_obp_level1(params, res.n_opt + 1)
        if res.n_opt > 1:
            assert res.rate_at_opt >= rate_obp_level1(params, res.n_opt - 1)

    @given(st.floats(1e-3, 1.0), st.floats(0.01, 0.999), st.floats(0.01, 1.0), st.floats(1e-6, 1e3))
    def test_argmax_invariant_under_scaling(self, p, beta, p_S, tau_C):
        base = optimal_n_level1(LinkParams(p=p, beta=beta))
        scaled = optimal_n_level1(LinkParams(p=p, beta=beta, p_S=p_S, tau_C=tau_C))
        assert scaled.n_opt == base.n_opt

    @given(st.floats(1e-3, 1.0), st.floats(1e-3, 0.3))
    def test_rapid_reset_for_poor_memories(self, p, beta):
        assert optimal_n_level1(LinkParams(p=p, beta=beta)).n_opt == 1

    def test_perfect_memory_prefers_long_buffers(self):
        res = optimal_n_level1(LinkParams(p=0.1, beta=1.0), cap=500)
        # with beta = 1 the rate (1 - q^n)^2 / n peaks at a finite n
        assert res.n_opt == brute_argmax(LinkParams(p=0.1, beta=1.0), 500)

    def test_search_bound(self):
        assert search_bound(0.5, 0.1) == 64
        assert search_bound(1e-3, 0.99) == math.ceil(10 / (1e-3 * -math.log(0.99)))
        assert search_bound(1e-9, 0.999999) == 10**6
        assert search_bound(0.5, 1.0) == 10**6


class TestHierarchical:
    def test_single_level_is_level1_argmax(self):
        params = LinkParams(p=0.1, beta=0.9)
        schedule, report = hierarchical_optimize(params, 1)
        assert schedule.n_out == (optimal_n_level1(params).n_opt,)
        assert report[0].n_out_argmax == 3

    def test_argmax_one_becomes_two(self):
        schedule, report = hierarchical_optimize(LinkParams(p=0.1, beta=0.4), 2)
        assert report[0].n_out_argmax == 1
        assert schedule.n_out[0] == 2

    def test_nesting_point_schedule(self):
        schedule, report = hierarchical_optimize(LinkParams(p=0.02, beta=0.2, p_S=0.5), 8)
        assert schedule.n_out == (2, 2, 2, 2, 2, 2, 2, 1)
        assert schedule.n_in == (1,) * 8
        assert [lv.n_out_argmax for lv in report] == [1] * 8

    def test_chosen_neighbour_beats_rejected(self):
        params = LinkParams(p=0.1, beta=0.9, p_S=0.6)
        schedule, report = hierarchical_optimize(params, 5)
        log_p_in, log_cum = math.log(params.p), 0.0
        for i, lv in enumerate(report, start=1):
            if lv.n_out != lv.n_out_argmax:
                other = 2 * lv.n_out_argmax - lv.n_out
                obj = _level_objective(params, i, log_p_in, lv.n_in, log_cum, "paper")
                if other >= 1:
                    assert obj(lv.n_out) >= obj(other)
            log_p_in = math.log(params.p_T) + lv.log10_p_out * math.log(10)
            log_cum = lv.log10_cumulative_gamma * math.log(10)

    def test_infeasible(self, monkeypatch):
        # the greedy rule itself can never produce n_out * n_in < 2; force it
        import qrbuffer.optimize as opt

        monkeypatch.setattr(opt, "_pick_even_neighbour", lambda objective, n_arg, n_in: 1)
        with pytest.raises(InfeasibleScheduleError):
            hierarchical_optimize(LinkParams(p=0.1, beta=0.4), 2)
        assert issubclass(InfeasibleScheduleError, DomainError)

    def test_bad_level_count(self):
        with pytest.raises(DomainError):
            hierarchical_optimize(LinkParams(p=0.1, beta=0.9), 0)

    @pytest.mark.parametrize("convention", ["paper", "symmetric"])
    def test_schedules_synchronise(self, convention):
        rng = random.Random(1234)
        for _ in range(5):
            params = LinkParams(p=rng.uniform(0.01, 1.0), beta=rng.uniform(0.05, 0.999),
                                p_S=rng.uniform(0.3, 1.0), p_T=rng.uniform(0.5, 1.0))
            schedule, report = hierarchical_optimize(params, 6, convention)
            LevelSchedule(schedule.n_in, schedule.n_out)
            for i in range(schedule.N_m - 1):
                assert 2 * schedule.n_in[i + 1] == schedule.n_in[i] * schedule.n_out[i]
            assert len(report) == 6

    def test_deterministic(self):
        params = LinkParams(p=0.05, beta=0.95, p_S=0.7)
        assert hierarchical_optimize(params, 4) == hierarchical_optimize(params, 4)
        assert hierarchical_optimize(dataclasses.replace(params), 4)[0].n_out == \
            hierarchical_optimize(params, 4)[0].n_out


def test_beta_099_crossover_to_single_attempt():
    # n_opt drops from 2 to 1 at p* = 0.566966591885811 (root of R(1) = R(2);
    # confirmed at 40 digits with mpmath), not at p = 0.5
    for p, expected in [(0.51, 2), (0.55, 2), (0.5669, 2), (0.5671, 1), (0.6, 1), (0.9, 1)]:
        assert optimal_n_level1(LinkParams(p=p, beta=0.99)).n_opt == expected
