"""Tests for token budgets and baseline comparisons."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridtok.budget import (
    BaselineSpec,
    budget_for_plan,
    compare_budgets,
    llava_baseline,
    monkey_baseline,
)
from gridtok.config import PipelineConfig
from gridtok.partition import GridSpec, ImageDims, make_plan

CONFIG = PipelineConfig()


def budget_total_oracle(patch_count: int, global_tokens: int = 576, local_tokens: int = 144) -> int:
    """Count the assembled sequence literally, one block at a time."""
    total = 1 + global_tokens  # position token + global block
    for _ in range(patch_count):
        total += 1 + local_tokens  # position token + compressed local block
    return total


class TestBudgetForPlan:
    def test_full_grid_totals_1882(self):
        plan = make_plan(ImageDims(width=5000, height=5000), CONFIG)
        budget = budget_for_plan(plan, CONFIG)
        assert budget.patch_count == 9
        assert budget_total_oracle(9) == 1882
        assert budget.total == 1882

    def test_single_cell_totals_722(self):
        plan = make_plan(ImageDims(width=300, height=200), CONFIG)
        budget = budget_for_plan(plan, CONFIG)
        assert budget.patch_count == 1
        assert budget_total_oracle(1) == 722
        assert budget.total == 722

    def test_token_constants(self):
        plan = make_plan(ImageDims(width=336, height=336), CONFIG)
        budget = budget_for_plan(plan, CONFIG)
        assert budget.global_tokens == 576
        assert budget.local_tokens_per_patch == 144
        assert budget.position_tokens == budget.patch_count + 1

    def test_total_strictly_increases_with_patch_count(self):
        sizes = [(336, 336), (672, 336), (1008, 336), (672, 672), (1008, 672), (1008, 1008)]
        budgets = [
            budget_for_plan(make_plan(ImageDims(width=w, height=h), CONFIG), CONFIG)
            for w, h in sizes
        ]
        counts = [b.patch_count for b in budgets]
        totals = [b.total for b in budgets]
        assert counts == sorted(counts)
        assert totals == sorted(totals)
        assert len(set(totals)) == len(totals)

    @settings(max_examples=300)
    @given(height=st.integers(1, 20_000), width=st.integers(1, 20_000))
    def test_total_bounded_for_default_grid(self, height, width):
        plan = make_plan(ImageDims(width=width, height=height), CONFIG)
        assert 722 <= budget_for_plan(plan, CONFIG).total <= 1882

    def test_max_grid_2_ablation_bounds(self):
        config = PipelineConfig(max_grid=2)
        plan = make_plan(ImageDims(width=9000, height=9000), config)
        assert (plan.resized.width, plan.resized.height) == (672, 672)
        assert budget_total_oracle(4) == 1157
        assert budget_for_plan(plan, config).total == 1157


class TestBaselines:
    def test_llava_is_one_square_cell(self):
        spec = llava_baseline()
        assert spec.grid == GridSpec(1, 1)
        assert spec.token_total == 576

    def test_monkey_is_fixed_grid_plus_global(self):
        spec = monkey_baseline()
        assert (spec.grid.rows, spec.grid.cols) == (2, 3)
        assert spec.cell_px == 448
        assert spec.token_total == (6 + 1) * 256

    def test_single_cell_requires_1x1_grid(self):
        with pytest.raises(ValueError, match="1x1"):
            BaselineSpec(
                name="bad",
                strategy="fixed-single-cell",
                cell_px=336,
                grid=GridSpec(2, 2),
                tokens_per_patch=576,
            )

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValueError, match="strategy"):
            BaselineSpec(
                name="bad", strategy="learned", cell_px=336, grid=GridSpec(1, 1), tokens_per_patch=1
            )


class TestCompareBudgets:
    def test_square_cell_image(self):
        rows = compare_budgets(ImageDims(width=336, height=336), [llava_baseline()], CONFIG)
        adaptive, llava = rows
        assert adaptive.strategy == "adaptive"
        assert adaptive.tokens == 722
        assert llava.tokens == 576
        assert adaptive.distortion == 1.0 and llava.distortion == 1.0

    def test_large_square_image(self):
        rows = compare_budgets(ImageDims(width=1000, height=1000), [], CONFIG)
        (adaptive,) = rows
        assert (adaptive.rows, adaptive.cols) == (3, 3)
        assert adaptive.tokens == 1882
        assert (adaptive.resized_w, adaptive.resized_h) == (1008, 1008)

    @settings(max_examples=100)
    @given(height=st.integers(1, 4000), width=st.integers(1, 4000))
    def test_llava_distortion_is_inverse_aspect(self, height, width):
        rows = compare_budgets(ImageDims(width=width, height=height), [llava_baseline()], CONFIG)
        rho = 1.0 / (width / height)
        assert rows[1].distortion == pytest.approx(max(rho, 1.0 / rho), rel=1e-12)

    def test_monkey_resize_target(self):
        rows = compare_budgets(ImageDims(width=500, height=500), [monkey_baseline()], CONFIG)
        monkey = rows[1]
        assert (monkey.resized_w, monkey.resized_h) == (1344, 896)

    def test_baseline_order_preserved(self):
        rows = compare_budgets(
            ImageDims(width=500, height=500), [monkey_baseline(), llava_baseline()], CONFIG
        )
        assert [r.strategy for r in rows] == ["adaptive", "monkey", "llava"]
