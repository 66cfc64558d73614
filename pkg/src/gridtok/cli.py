"""Command-line surface: plan, budget, compare, batch, forward, gradcheck.

Exit codes: 0 success, 1 check failure, 2 usage or IO error. Machine
output goes to stdout, diagnostics to stderr. Every command is
byte-deterministic for fixed inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .budget import BUILTIN_BASELINES, BaselineSpec, budget_for_plan, compare_budgets
from .config import PipelineConfig
from .harness import (
    EmptyCorpusError,
    ReportRow,
    ingest,
    run_report,
    write_aggregates_json,
    write_rows_csv,
)
from .partition import ImageDims, make_plan
from .pipeline import SquaredNormLoss, forward, grad_check, init_params

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

GRAD_CHECK_TOLERANCE = 1e-5
# Reduced dims keep the finite-difference probe fast while exercising the
# same code path as the full configuration.
_GRADCHECK_ENCODER_DIM = 8
_GRADCHECK_EMBED_DIM = 16


class CliError(Exception):
    """User-facing failure mapped to exit code 2."""


def _config_from_args(args: argparse.Namespace, **overrides) -> PipelineConfig:
    try:
        return PipelineConfig(cell_size_px=args.cell, max_grid=args.max_grid, **overrides)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _image_dims(path: str) -> ImageDims:
    """Read image dimensions from the file header, without decoding pixels."""
    try:
        with Image.open(path) as img:
            width, height = img.size
    except FileNotFoundError as exc:
        raise CliError(f"no such file: {path}") from exc
    except (UnidentifiedImageError, OSError) as exc:
        raise CliError(f"cannot read image {path}: {exc}") from exc
    return ImageDims(width=width, height=height)


def _decode_image(path: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except FileNotFoundError as exc:
        raise CliError(f"no such file: {path}") from exc
    except (UnidentifiedImageError, OSError) as exc:
        raise CliError(f"cannot decode image {path}: {exc}") from exc


def _parse_baselines(spec: str) -> list[BaselineSpec]:
    baselines = []
    for name in [part.strip() for part in spec.split(",") if part.strip()]:
        if name not in BUILTIN_BASELINES:
            known = ", ".join(sorted(BUILTIN_BASELINES))
            raise CliError(f"unknown baseline {name!r} (known: {known})")
        baselines.append(BUILTIN_BASELINES[name]())
    return baselines


def cmd_plan(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    plan = make_plan(_image_dims(args.image), config)
    print(plan.to_json())
    return EXIT_OK


def cmd_budget(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    plan = make_plan(_image_dims(args.image), config)
    budget = budget_for_plan(plan, config)
    print(
        json.dumps(
            {
                "global_tokens": budget.global_tokens,
                "local_tokens_per_patch": budget.local_tokens_per_patch,
                "patch_count": budget.patch_count,
                "position_tokens": budget.position_tokens,
                "total": budget.total,
            },
            separators=(",", ":"),
        )
    )
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    dims = _image_dims(args.image)
    rows = [
        ReportRow(
            image=Path(args.image).name,
            strategy=r.strategy,
            rows=r.rows,
            cols=r.cols,
            resized_w=r.resized_w,
            resized_h=r.resized_h,
            tokens=r.tokens,
            distortion=r.distortion,
        )
        for r in compare_budgets(dims, _parse_baselines(args.baselines), config)
    ]
    print("image,strategy,rows,cols,resized_w,resized_h,tokens,distortion")
    for row in rows:
        print(
            f"{row.image},{row.strategy},{row.rows},{row.cols},"
            f"{row.resized_w},{row.resized_h},{row.tokens},{row.distortion!r}"
        )
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    try:
        corpus = ingest(args.directory)
        report = run_report(corpus, _parse_baselines(args.baselines), config, workers=args.workers)
    except (FileNotFoundError, EmptyCorpusError) as exc:
        raise CliError(str(exc)) from exc
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "per_image.csv"
    json_path = out_dir / "aggregates.json"
    write_rows_csv(report.per_image, csv_path)
    write_aggregates_json(report, json_path)
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return EXIT_OK


def cmd_forward(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    image = _decode_image(args.image)
    params = init_params(config, seed=args.seed)
    seq = forward(image, config, params)
    plan = make_plan(ImageDims(width=image.shape[1], height=image.shape[0]), config)
    budget = budget_for_plan(plan, config)
    roles = {role: 0 for role in ("position", "global", "local")}
    for role in seq.roles:
        roles[role] += 1
    print(
        json.dumps(
            {
                "length": len(seq),
                "dim": seq.dim,
                "grid": {"rows": plan.grid.rows, "cols": plan.grid.cols},
                "roles": roles,
                "budget_total": budget.total,
            },
            separators=(",", ":"),
        )
    )
    if len(seq) != budget.total:
        print(f"sequence length {len(seq)} != budget total {budget.total}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    config = _config_from_args(
        args, encoder_dim=_GRADCHECK_ENCODER_DIM, embed_dim=_GRADCHECK_EMBED_DIM
    )
    rng = np.random.default_rng(args.seed)
    # Taller than wide so the probe covers a multi-patch plan.
    image = rng.integers(0, 256, size=(400, 250, 3), dtype=np.uint8)
    params = init_params(config, seed=rng, dtype=np.float64)
    err = grad_check(
        SquaredNormLoss(),
        image,
        config,
        params,
        epsilon=1e-4,
        seed=args.seed,
        corrupt=args.corrupt,
    )
    print(f"max_rel_err={err!r}")
    return EXIT_OK if err <= GRAD_CHECK_TOLERANCE else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridtok",
        description="Adaptive grid partitioning and visual-token budgeting for images.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--max-grid", type=int, default=3, metavar="N", help="grid cap per axis")
    common.add_argument("--cell", type=int, default=336, metavar="PX", help="cell side in pixels")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="print the partition plan JSON for an image")
    p.add_argument("image")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("budget", parents=[common], help="print the visual-token budget for an image")
    p.add_argument("image")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("compare", parents=[common], help="compare strategies for one image (CSV)")
    p.add_argument("image")
    p.add_argument("--baselines", default="llava,monkey", help="comma-separated baseline names")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("batch", parents=[common], help="report over a directory of images")
    p.add_argument("directory")
    p.add_argument("--baselines", default="llava,monkey", help="comma-separated baseline names")
    p.add_argument("--out", required=True, help="output directory for per_image.csv/aggregates.json")
    p.add_argument("--workers", type=int, default=1, help="parallel workers")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("forward", parents=[common], help="run the toy pipeline on an image")
    p.add_argument("image")
    p.add_argument("--seed", type=int, default=0, help="parameter init seed")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser(
        "gradcheck", parents=[common], help="verify analytic gradients against finite differences"
    )
    p.add_argument("--seed", type=int, default=0, help="image and parameter seed")
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
