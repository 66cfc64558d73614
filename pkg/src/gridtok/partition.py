"""Dynamic grid partitioning.

Given an image size, pick the minimal grid of encoder-sized cells that
covers it (clamped to the configured maximum), the stretch-resize target,
the per-cell crop boxes, and the position-token id of every cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .resize import resize


@dataclass(frozen=True)
class ImageDims:
    """Pixel dimensions of an RGB image."""

    width: int
    height: int
    channels: int = 3

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dims must be at least 1x1, got {self.width}x{self.height}")
        if self.channels != 3:
            raise ValueError(f"only 3-channel images are supported, got {self.channels}")

    @property
    def aspect(self) -> float:
        return self.width / self.height


@dataclass(frozen=True)
class GridSpec:
    """Cell coverage: ``rows`` x ``cols`` cells of the predefined grid."""

    rows: int
    cols: int

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")

    @property
    def cell_count(self) -> int:
        return self.rows * self.cols

    @property
    def aspect(self) -> float:
        return self.cols / self.rows


@dataclass(frozen=True)
class PatchBox:
    """One cell's crop rectangle in the resized image, with its position id.

    ``row``/``col`` are 1-based cell coordinates. ``position_id`` is the flat
    id (row-1)*N + col used to look up the cell's position token; it depends
    only on the cell coordinate, never on which other cells are occupied.
    """

    row: int
    col: int
    x0: int
    y0: int
    x1: int
    y1: int
    position_id: int


@dataclass(frozen=True)
class PartitionPlan:
    """Complete, serializable description of how one image is gridded."""

    source: ImageDims
    grid: GridSpec
    resized: ImageDims
    patches: tuple[PatchBox, ...]
    distortion: float

    def to_dict(self) -> dict:
        return {
            "source": {"w": self.source.width, "h": self.source.height},
            "grid": {"rows": self.grid.rows, "cols": self.grid.cols},
            "resized": {"w": self.resized.width, "h": self.resized.height},
            "distortion": self.distortion,
            "patches": [
                {
                    "row": p.row,
                    "col": p.col,
                    "x0": p.x0,
                    "y0": p.y0,
                    "x1": p.x1,
                    "y1": p.y1,
                    "position_id": p.position_id,
                }
                for p in self.patches
            ],
        }

    def to_json(self) -> str:
        """Serialize with stable field order; byte-identical for equal plans."""
        return json.dumps(self.to_dict(), separators=(",", ":"))


def select_grid(dims: ImageDims, config: PipelineConfig) -> GridSpec:
    """Smallest grid whose cells cover the image, clamped per dimension.

    rows = min(N, max(1, ceil(height/S))) and likewise for cols: the unique
    minimal cover once each dimension is capped at N cells. Images smaller
    than one cell in both dimensions still get a 1x1 grid.
    """
    s = config.cell_size_px
    n = config.max_grid
    rows = min(n, max(1, -(-dims.height // s)))
    cols = min(n, max(1, -(-dims.width // s)))
    return GridSpec(rows=rows, cols=cols)


def distortion_factor(dims: ImageDims, grid: GridSpec) -> float:
    """Aspect-ratio distortion of stretching ``dims`` onto ``grid``.

    max(rho, 1/rho) where rho = grid aspect / image aspect. Always >= 1,
    and exactly 1 iff the grid aspect matches the image aspect.
    """
    rho = grid.aspect / dims.aspect
    return max(rho, 1.0 / rho)


def make_plan(dims: ImageDims, config: PipelineConfig) -> PartitionPlan:
    """Build the full partition plan for an image of size ``dims``.

    Patches are emitted in row-major order (sorted by (row, col)) and tile
    the resize target exactly.
    """
    grid = select_grid(dims, config)
    s = config.cell_size_px
    n = config.max_grid
    patches = tuple(
        PatchBox(
            row=r,
            col=c,
            x0=(c - 1) * s,
            y0=(r - 1) * s,
            x1=c * s,
            y1=r * s,
            position_id=(r - 1) * n + c,
        )
        for r in range(1, grid.rows + 1)
        for c in range(1, grid.cols + 1)
    )
    return PartitionPlan(
        source=dims,
        grid=grid,
        resized=ImageDims(width=grid.cols * s, height=grid.rows * s),
        patches=patches,
        distortion=distortion_factor(dims, grid),
    )


def extract_patches(
    image: np.ndarray, plan: PartitionPlan, config: PipelineConfig
) -> list[np.ndarray]:
    """Resize ``image`` to the plan's target and crop each patch box.

    The resize is a plain anisotropic stretch to (cols*S, rows*S) with the
    configured kernel; every returned patch is exactly S x S x 3.
    """
    expected = (plan.source.height, plan.source.width, 3)
    if image.ndim != 3 or image.shape != expected:
        raise ValueError(f"image shape {image.shape} does not match plan source {expected}")
    resized = resize(image, plan.resized.width, plan.resized.height, config.resample)
    return [resized[p.y0 : p.y1, p.x0 : p.x1].copy() for p in plan.patches]


def dims_of(image: np.ndarray) -> ImageDims:
    """ImageDims for an HxWx3 pixel buffer."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {image.shape}")
    return ImageDims(width=image.shape[1], height=image.shape[0])
