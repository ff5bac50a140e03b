import math

import numpy as np
import pytest

from vtprune import (
    FlopsConfig,
    ModelDims,
    PruneSchedule,
    cost_report,
    flops_layer,
    integrated_compression_ratio,
    nv_at_layer,
    preset,
    total_flops,
    vanilla_flops,
)

LLAVA = ModelDims(m=576, d=4096, n_layers=32, n_text=40)


def cfg(**kw) -> FlopsConfig:
    return FlopsConfig.from_model(LLAVA, **kw)


class TestFlopsLayer:
    def test_unit_evaluation(self):
        unit = FlopsConfig(d=1, n_layers=1, n_text=0)
        assert flops_layer(1, unit) == 20.0   # 4 + 16

    def test_zero_length_sequence(self):
        assert flops_layer(0, cfg()) == 0.0

    def test_direct_formula_value(self):
        # 4*213^2*4096 + 16*213*4096^2
        want = 4 * 213**2 * 4096 + 16 * 213 * 4096**2
        assert flops_layer(213, cfg()) == pytest.approx(want)
        assert want == pytest.approx(5.792e10, rel=1e-3)

    def test_intermediate_mode_uses_ffn_width(self):
        c = cfg(ffn_mode="intermediate", d_ffn=11008, ffn_passes=3)
        want = 4 * 100**2 * 4096 + 2 * 100 * 4096 * 11008 * 3
        assert flops_layer(100, c) == pytest.approx(want)

    def test_negative_sequence_rejected(self):
        with pytest.raises(ValueError):
            flops_layer(-1, cfg())


class TestNvAtLayer:
    def test_piecewise_segments(self):
        sched = preset("p889")
        assert nv_at_layer(1, sched) == 172
        assert nv_at_layer(sched.l_s, sched) == 77
        assert nv_at_layer(sched.l_d - 1, sched) == 77
        assert nv_at_layer(sched.l_d, sched) == 15
        assert nv_at_layer(32, sched) == 15

    def test_out_of_range_layer(self):
        sched = preset("p889")
        with pytest.raises(ValueError):
            nv_at_layer(0, sched)
        with pytest.raises(ValueError):
            nv_at_layer(33, sched)


class TestTotalFlops:
    def test_degenerate_schedule_collapses(self):
        p = 0.5
        sched = PruneSchedule(p, p, p, model=LLAVA)
        c = cfg()
        assert total_flops(sched, c) == pytest.approx(
            32 * flops_layer(int(math.floor(p * 576)) + 40, c)
        )

    def test_llava_paper_mode_bracket(self):
        got = total_flops(preset("p889"), cfg())
        assert 0.70e12 <= got <= 0.95e12

    def test_monotone_in_text_tokens(self):
        sched = preset("p889")
        with_text = total_flops(sched, cfg())
        no_text = total_flops(sched, FlopsConfig(d=4096, n_layers=32, n_text=0))
        assert no_text < with_text

    def test_monotone_in_ratios(self):
        base = total_flops(preset("p889"), cfg())
        for name in ("p778", "p667"):
            assert total_flops(preset(name), cfg()) > base

    def test_identity_equals_vanilla(self):
        sched = PruneSchedule(1.0, 1.0, 1.0, model=LLAVA)
        c = cfg()
        assert total_flops(sched, c) == pytest.approx(vanilla_flops(576, c))

    def test_never_exceeds_vanilla(self):
        c = cfg()
        ceiling = vanilla_flops(576, c)
        for name in ("p667", "p778", "p889", "p944"):
            assert total_flops(preset(name), c) <= ceiling


class TestCompressionRatio:
    def test_no_pruning_means_zero(self):
        assert integrated_compression_ratio(PruneSchedule(1.0, 1.0, 1.0, model=LLAVA)) == 0.0

    @pytest.mark.parametrize(
        "name,expected,headline",
        [("p667", 0.6795, 0.667), ("p778", 0.7885, 0.778), ("p889", 0.8974, 0.889)],
    )
    def test_preset_values(self, name, expected, headline):
        got = integrated_compression_ratio(preset(name))
        assert got == pytest.approx(expected, abs=5e-5)
        assert abs(got - headline) <= 0.02

    def test_decreases_as_ratios_increase(self):
        lo = integrated_compression_ratio(preset("p667"))
        hi = integrated_compression_ratio(preset("p889"))
        assert 0.0 <= lo < hi < 1.0


class TestCostReport:
    def test_report_is_consistent(self):
        sched = preset("p889")
        report = cost_report(sched, cfg())
        assert len(report.nv_per_layer) == 32
        diffs = np.diff(report.nv_per_layer)
        assert np.all(diffs <= 0)
        assert report.flops_total <= report.flops_vanilla
        assert report.cr_int == pytest.approx(integrated_compression_ratio(sched), abs=1e-12)
        assert set(report.overhead_ops) == {"stage1_topk", "stage2_clustering", "stage3_topk"}
        assert report.overhead_ops["stage2_clustering"] == pytest.approx(172.0**2)

    def test_realized_counts_override(self):
        sched = preset("p889")
        realized = [172] + [70] * 20 + [15] * 11
        report = cost_report(sched, cfg(), realized_nv=realized)
        assert report.nv_per_layer == realized
        assert report.cr_int == pytest.approx(1.0 - sum(realized) / (32 * 576))

    def test_realized_length_checked(self):
        with pytest.raises(ValueError):
            cost_report(preset("p889"), cfg(), realized_nv=[10] * 5)
