"""Adaptive grid partitioning and visual-token budgeting for images.

The package answers, for any input image: how would an any-resolution
visual front end grid it, what does each patch look like, which position
token does every cell get, and how many visual tokens does the language
model end up consuming. A toy encoder/projector/compressor pipeline
realizes the full dataflow with verifiable gradients.
"""

from .budget import (
    BUILTIN_BASELINES,
    BaselineSpec,
    StrategyRow,
    TokenBudget,
    budget_for_plan,
    compare_budgets,
    llava_baseline,
    monkey_baseline,
)
from .config import PipelineConfig
from .harness import CorpusReport, EmptyCorpusError, ingest, run_report
from .partition import (
    GridSpec,
    ImageDims,
    PartitionPlan,
    PatchBox,
    distortion_factor,
    extract_patches,
    make_plan,
    select_grid,
)
from .pipeline import (
    FeatureSequence,
    PipelineParams,
    ProjectorParams,
    SquaredNormLoss,
    SumLoss,
    ToyEncoderParams,
    ZeroLoss,
    assemble,
    compress,
    encode_cell,
    forward,
    grad_check,
    init_params,
    load_params,
    project,
    save_params,
)
from .resize import resize

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_BASELINES",
    "BaselineSpec",
    "CorpusReport",
    "EmptyCorpusError",
    "FeatureSequence",
    "GridSpec",
    "ImageDims",
    "PartitionPlan",
    "PatchBox",
    "PipelineConfig",
    "PipelineParams",
    "ProjectorParams",
    "SquaredNormLoss",
    "StrategyRow",
    "SumLoss",
    "TokenBudget",
    "ToyEncoderParams",
    "ZeroLoss",
    "assemble",
    "budget_for_plan",
    "compare_budgets",
    "compress",
    "distortion_factor",
    "encode_cell",
    "extract_patches",
    "forward",
    "grad_check",
    "ingest",
    "init_params",
    "llava_baseline",
    "load_params",
    "make_plan",
    "monkey_baseline",
    "project",
    "resize",
    "run_report",
    "save_params",
    "select_grid",
]
