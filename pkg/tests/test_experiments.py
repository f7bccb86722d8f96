import math

import pytest

from qrbuffer.core import LinkParams, UsageError
from qrbuffer.experiments import (
    DEFAULT_AXES,
    PRESETS,
    Axis,
    DistanceModel,
    SweepSpec,
    level1_comparison,
    preset,
    run_sweep,
    sweep_distance,
    sweep_nesting,
)


class TestAxis:
    def test_values(self):
        assert list(Axis(1.0, 3.0, 3).values()) == [1.0, 2.0, 3.0]
        assert Axis(0.01, 1.0, 3, "log").values() == pytest.approx([0.01, 0.1, 1.0])

    @pytest.mark.parametrize("args", [(0.0, 1.0, 1), (1.0, 1.0, 5), (2.0, 1.0, 5),
                                      (0.0, 1.0, 5, "log"), (0.1, 1.0, 5, "cubic")])
    def test_degenerate(self, args):
        with pytest.raises(UsageError):
            Axis(*args)

    def test_spec_validation(self):
        with pytest.raises(UsageError):
            SweepSpec("nonsense", {})
        with pytest.raises(UsageError):
            SweepSpec("grid_ratio", {}, convention="x")
        with pytest.raises(UsageError):
            run_sweep(SweepSpec("grid_ratio", {"p": Axis(0.1, 1.0, 2)}))


class TestDistanceModel:
    def test_derived_quantities(self):
        m = DistanceModel(L0=100.0, tau_M=1e-3)
        assert m.p == pytest.approx(math.exp(-5.0))
        assert m.tau_C == pytest.approx(5e-4)
        assert m.beta == pytest.approx(math.exp(-0.5))

    def test_short_links_approach_perfect(self):
        m = DistanceModel(L0=1e-6, tau_M=1e-3)
        assert m.p == pytest.approx(1.0) and m.beta == pytest.approx(1.0)
        assert level1_comparison(m.params())[1] <= 1e-6

    def test_invalid(self):
        with pytest.raises(UsageError):
            DistanceModel(L0=0.0, tau_M=1e-3)


@pytest.fixture(scope="module")
def table():
    axes = {"p": Axis(0.01, 1.0, 9, "log"), "beta": Axis(0.05, 1.0, 9)}
    return run_sweep(SweepSpec("grid_ratio", axes))


class TestGridRatio:
    def test_shape_and_order(self, table):
        assert table.columns == ("p", "beta", "n_opt", "log10_eta")
        assert len(table.rows) == 81
        keys = [(r[0], r[1]) for r in table.rows]
        assert keys == sorted(keys)

    def test_perfect_corner(self, table):
        rec = table.records()[-1]
        assert (rec["p"], rec["beta"]) == (1.0, 1.0)
        assert rec["n_opt"] == 1
        assert rec["log10_eta"] == pytest.approx(0.0, abs=1e-12)

    def test_canonical_wins_near_perfect_memory(self, table):
        col = [r for r in table.records() if r["beta"] == 1.0]
        assert any(r["log10_eta"] is not None and r["log10_eta"] <= 0.0 for r in col)

    def test_null_where_rates_vanish(self):
        axes = {"p": Axis(0.5, 0.6, 2), "beta": Axis(1e-130, 2e-130, 2)}
        table = run_sweep(SweepSpec("grid_ratio", axes))
        assert table.column("log10_eta") == [None] * 4

    def test_deterministic(self):
        axes = {"p": Axis(0.01, 1.0, 4, "log"), "beta": Axis(0.05, 1.0, 4)}
        spec = SweepSpec("grid_ratio", axes)
        assert run_sweep(spec).rows == run_sweep(spec).rows


class TestNesting:
    def test_level1_independent_of_swap_probability(self):
        low = sweep_nesting(LinkParams(**preset("nesting-low-ps")), 3)
        high = sweep_nesting(LinkParams(**preset("nesting-high-ps")), 3)
        assert low.rows[0][-1] == pytest.approx(high.rows[0][-1], rel=1e-12)

    def test_columns(self):
        table = sweep_nesting(LinkParams(p=0.1, beta=0.9), 2)
        assert table.column("level") == [1, 2]
        assert table.column("n_in")[0] == 1


class TestDistance:
    def test_memory_time_ordering(self):
        table = sweep_distance(Axis(50.0, 100.0, 2), [1e-4, 1e-3])
        rec = {(r["L0_km"], r["tau_M"]): r["log10_eta"] for r in table.records()}
        assert rec[(100.0, 1e-4)] > rec[(100.0, 1e-3)]
        assert rec[(100.0, 1e-3)] == pytest.approx(2.0, abs=0.5)


class TestNopt:
    def test_vs_beta(self):
        spec = SweepSpec("nopt_vs_beta", {"beta": Axis(0.05, 0.7, 8)},
                         base=LinkParams(p=0.01, beta=0.5))
        assert run_sweep(spec).column("n_opt") == [1] * 8

    def test_vs_p_grows_as_p_falls(self):
        spec = SweepSpec("nopt_vs_p", {"p": Axis(1e-3, 0.5, 6, "log")},
                         base=LinkParams(p=0.1, beta=0.99))
        n = run_sweep(spec).column("n_opt")
        assert n == sorted(n, reverse=True)
        assert n[0] > n[-1]

    def test_ratio_asymptote(self):
        spec = SweepSpec("ratio_asymptote", {"p": Axis(0.01, 0.1, 4, "log")},
                         base=LinkParams(p=0.1, beta=0.1))
        for r in run_sweep(spec).records():
            assert r["ratio_to_approx"] == pytest.approx(1.0, abs=0.2)


def test_presets():
    assert {"soa", "nesting-low-ps", "nesting-high-ps"} <= set(PRESETS)
    assert preset("soa") == dict(p=1e-4, beta=0.135, p_S=0.5, p_T=1.0, tau_C=1e-4)
    for name in PRESETS:
        LinkParams(**preset(name))
    with pytest.raises(UsageError):
        preset("nope")


def test_default_axes_cover_kinds():
    for kind, axes in DEFAULT_AXES.items():
        SweepSpec(kind, axes)
