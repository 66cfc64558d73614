"""Visual-token budgets for partition plans and fixed-resolution baselines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .config import PipelineConfig
from .partition import GridSpec, ImageDims, PartitionPlan, distortion_factor, make_plan

ADAPTIVE_STRATEGY = "adaptive"
FIXED_SINGLE_CELL = "fixed-single-cell"
FIXED_GRID = "fixed-grid"

# Column order of serialized comparison records.
CSV_COLUMNS = ("image", "strategy", "rows", "cols", "resized_w", "resized_h", "tokens", "distortion")


@dataclass(frozen=True)
class TokenBudget:
    """Token counts for one plan: global view, local patches, position markers."""

    global_tokens: int
    local_tokens_per_patch: int
    patch_count: int
    position_tokens: int
    total: int


@dataclass(frozen=True)
class BaselineSpec:
    """A fixed-resolution comparison strategy.

    ``fixed-single-cell`` resizes everything to one ``cell_px`` square view.
    ``fixed-grid`` always crops the same grid of ``cell_px`` cells and may
    add a global view. ``tokens_per_patch`` is a plain config value because
    baseline internals are not modeled beyond their token counts.
    """

    name: str
    strategy: str
    cell_px: int
    grid: GridSpec
    tokens_per_patch: int
    include_global: bool = False

    def __post_init__(self) -> None:
        if self.strategy not in (FIXED_SINGLE_CELL, FIXED_GRID):
            raise ValueError(f"unknown baseline strategy {self.strategy!r}")
        if self.strategy == FIXED_SINGLE_CELL and self.grid != GridSpec(1, 1):
            raise ValueError("fixed-single-cell implies a 1x1 grid")
        if self.cell_px < 1 or self.tokens_per_patch < 1:
            raise ValueError("cell_px and tokens_per_patch must be positive")

    @property
    def token_total(self) -> int:
        cells = self.grid.cell_count + (1 if self.include_global else 0)
        return cells * self.tokens_per_patch


@dataclass(frozen=True)
class StrategyRow:
    """One comparison record: how a strategy would process a given image."""

    strategy: str
    rows: int
    cols: int
    resized_w: int
    resized_h: int
    tokens: int
    distortion: float


def llava_baseline() -> BaselineSpec:
    """Single fixed 336-px view, 576 tokens, no compression or position token."""
    return BaselineSpec(
        name="llava",
        strategy=FIXED_SINGLE_CELL,
        cell_px=336,
        grid=GridSpec(1, 1),
        tokens_per_patch=576,
    )


def monkey_baseline(tokens_per_patch: int = 256) -> BaselineSpec:
    """Fixed 2x3 grid of 448-px cells (1344x896) plus a global view."""
    return BaselineSpec(
        name="monkey",
        strategy=FIXED_GRID,
        cell_px=448,
        grid=GridSpec(rows=2, cols=3),
        tokens_per_patch=tokens_per_patch,
        include_global=True,
    )


BUILTIN_BASELINES = {"llava": llava_baseline, "monkey": monkey_baseline}


def budget_for_plan(plan: PartitionPlan, config: PipelineConfig) -> TokenBudget:
    """Token counts the adaptive pipeline emits for ``plan``.

    One position token precedes the global block and each local block, so
    total = (global + 1) + patch_count * (local_per_patch + 1).
    """
    global_tokens = config.tokens_per_cell
    local_tokens = config.compressed_tokens_per_cell
    patch_count = len(plan.patches)
    return TokenBudget(
        global_tokens=global_tokens,
        local_tokens_per_patch=local_tokens,
        patch_count=patch_count,
        position_tokens=1 + patch_count,
        total=(global_tokens + 1) + patch_count * (local_tokens + 1),
    )


def compare_budgets(
    dims: ImageDims, baselines: Sequence[BaselineSpec], config: PipelineConfig
) -> list[StrategyRow]:
    """Token count and distortion per strategy for one image size.

    The adaptive row comes first, computed from the real partition plan;
    baseline rows follow in the given order.
    """
    plan = make_plan(dims, config)
    rows = [
        StrategyRow(
            strategy=ADAPTIVE_STRATEGY,
            rows=plan.grid.rows,
            cols=plan.grid.cols,
            resized_w=plan.resized.width,
            resized_h=plan.resized.height,
            tokens=budget_for_plan(plan, config).total,
            distortion=plan.distortion,
        )
    ]
    for spec in baselines:
        rows.append(
            StrategyRow(
                strategy=spec.name,
                rows=spec.grid.rows,
                cols=spec.grid.cols,
                resized_w=spec.grid.cols * spec.cell_px,
                resized_h=spec.grid.rows * spec.cell_px,
                tokens=spec.token_total,
                distortion=distortion_factor(dims, spec.grid),
            )
        )
    return rows
