"""Shared hyperparameters for the partitioning and token pipeline."""

from __future__ import annotations

from dataclasses import dataclass

RESAMPLE_KERNELS = ("bilinear", "nearest")
COMPRESS_GROUPINGS = ("spatial", "sequential")


@dataclass(frozen=True)
class PipelineConfig:
    """Dimension and grid hyperparameters.

    Defaults are the published preprocessing configuration: 336-px cells on
    a 3x3 grid with 14-px encoder patches (576 tokens per cell) and 4x token
    compression. ``encoder_dim`` and ``embed_dim`` default to toy sizes so
    the forward pass stays cheap to test; the full-scale values would be
    1024 and 4096.

    ``compress_grouping`` selects how the 4x compressor groups tokens:
    ``"spatial"`` concatenates each 2x2 neighborhood of the token grid,
    ``"sequential"`` concatenates consecutive runs of four rows.
    """

    cell_size_px: int = 336
    max_grid: int = 3
    encoder_patch_px: int = 14
    encoder_dim: int = 32
    embed_dim: int = 64
    compression_factor: int = 4
    resample: str = "bilinear"
    compress_grouping: str = "spatial"

    def __post_init__(self) -> None:
        for name in ("cell_size_px", "max_grid", "encoder_patch_px", "encoder_dim", "embed_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.cell_size_px % self.encoder_patch_px != 0:
            raise ValueError(
                f"cell_size_px ({self.cell_size_px}) must be divisible by "
                f"encoder_patch_px ({self.encoder_patch_px})"
            )
        if (self.cell_size_px // self.encoder_patch_px) % 2 != 0:
            raise ValueError(
                "cell_size_px / encoder_patch_px must be even so 2x2 token merging is defined"
            )
        if self.compression_factor != 4:
            raise ValueError(f"compression_factor is fixed at 4, got {self.compression_factor}")
        if self.resample not in RESAMPLE_KERNELS:
            raise ValueError(f"resample must be one of {RESAMPLE_KERNELS}, got {self.resample!r}")
        if self.compress_grouping not in COMPRESS_GROUPINGS:
            raise ValueError(
                f"compress_grouping must be one of {COMPRESS_GROUPINGS}, "
                f"got {self.compress_grouping!r}"
            )

    @property
    def token_grid_side(self) -> int:
        """Tokens per cell along one axis (24 at defaults)."""
        return self.cell_size_px // self.encoder_patch_px

    @property
    def tokens_per_cell(self) -> int:
        """Encoder tokens produced per cell (576 at defaults)."""
        return self.token_grid_side**2

    @property
    def compressed_tokens_per_cell(self) -> int:
        """Tokens per local patch after 4x compression (144 at defaults)."""
        return self.tokens_per_cell // self.compression_factor

    @property
    def max_resolution_px(self) -> int:
        """Side length of the largest supported resize target (1008 at defaults)."""
        return self.max_grid * self.cell_size_px

    @property
    def position_token_count(self) -> int:
        """Rows in the position-token table: one per grid cell plus the global view."""
        return self.max_grid**2 + 1

    @property
    def patch_pixel_dim(self) -> int:
        """Flattened length of one encoder sub-patch (14*14*3 = 588 at defaults)."""
        return self.encoder_patch_px**2 * 3
