"""Batch reporting over an image directory.

Ingests PNG/JPEG files, computes the per-image strategy comparison, and
emits a deterministic CSV of rows plus a JSON aggregate block. Per-image
work is embarrassingly parallel; rows are sorted by image id before
aggregation so worker count never changes the output.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .budget import CSV_COLUMNS, BaselineSpec, compare_budgets
from .config import PipelineConfig
from .partition import ImageDims

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


class EmptyCorpusError(RuntimeError):
    """Raised when a corpus directory yields no decodable images."""


@dataclass(frozen=True)
class CorpusImage:
    image_id: str
    dims: ImageDims
    pixels: np.ndarray


@dataclass(frozen=True)
class ReportRow:
    """One (image, strategy) comparison record."""

    image: str
    strategy: str
    rows: int
    cols: int
    resized_w: int
    resized_h: int
    tokens: int
    distortion: float


@dataclass(frozen=True)
class CorpusReport:
    per_image: tuple[ReportRow, ...]
    aggregates: dict


def ingest(path: str | Path) -> list[CorpusImage]:
    """Decode every PNG/JPEG in ``path``, in lexicographic filename order.

    Undecodable files are skipped with a warning; other extensions are
    ignored. Raises :class:`EmptyCorpusError` if nothing decodes.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    entries: list[CorpusImage] = []
    for file in sorted(directory.iterdir(), key=lambda p: p.name):
        if file.suffix.lower() not in IMAGE_EXTENSIONS or not file.is_file():
            continue
        try:
            with Image.open(file) as img:
                pixels = np.asarray(img.convert("RGB"))
        except (UnidentifiedImageError, OSError) as exc:
            logger.warning("skipping undecodable file %s: %s", file.name, exc)
            continue
        dims = ImageDims(width=pixels.shape[1], height=pixels.shape[0])
        entries.append(CorpusImage(image_id=file.name, dims=dims, pixels=pixels))
    if not entries:
        raise EmptyCorpusError(f"no decodable PNG/JPEG images in {directory}")
    return entries


def aggregate_rows(rows: Sequence[ReportRow]) -> dict:
    """Per-strategy aggregates, recomputable exactly from the emitted rows.

    Sums run in row order, so feeding back rows parsed from the CSV
    reproduces this block bit for bit.
    """
    strategies: dict[str, dict] = {}
    images: set[str] = set()
    for row in rows:
        images.add(row.image)
        agg = strategies.setdefault(
            row.strategy,
            {"tokens_sum": 0, "max_tokens": 0, "distortion_sum": 0.0, "grid_histogram": {}, "count": 0},
        )
        agg["count"] += 1
        agg["tokens_sum"] += row.tokens
        agg["max_tokens"] = max(agg["max_tokens"], row.tokens)
        agg["distortion_sum"] += row.distortion
        key = f"{row.rows}x{row.cols}"
        agg["grid_histogram"][key] = agg["grid_histogram"].get(key, 0) + 1
    return {
        "images": len(images),
        "strategies": {
            name: {
                "mean_tokens": agg["tokens_sum"] / agg["count"],
                "max_tokens": agg["max_tokens"],
                "mean_distortion": agg["distortion_sum"] / agg["count"],
                "grid_histogram": dict(sorted(agg["grid_histogram"].items())),
            }
            for name, agg in strategies.items()
        },
    }


def run_report(
    corpus: Sequence[CorpusImage],
    baselines: Sequence[BaselineSpec],
    config: PipelineConfig,
    workers: int = 1,
) -> CorpusReport:
    """Compare every corpus image against the baselines.

    The result is independent of ``workers``: rows are ordered by image id
    (adaptive row first, then baselines in the given order) before
    aggregation and emission.
    """
    if not corpus:
        raise EmptyCorpusError("corpus is empty")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    def rows_for(entry: CorpusImage) -> list[ReportRow]:
        return [
            ReportRow(
                image=entry.image_id,
                strategy=r.strategy,
                rows=r.rows,
                cols=r.cols,
                resized_w=r.resized_w,
                resized_h=r.resized_h,
                tokens=r.tokens,
                distortion=r.distortion,
            )
            for r in compare_budgets(entry.dims, baselines, config)
        ]

    if workers == 1:
        groups = [rows_for(entry) for entry in corpus]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(rows_for, corpus))
    groups.sort(key=lambda g: g[0].image)
    rows = tuple(row for group in groups for row in group)
    return CorpusReport(per_image=rows, aggregates=aggregate_rows(rows))


def write_rows_csv(rows: Sequence[ReportRow], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.image,
                    row.strategy,
                    row.rows,
                    row.cols,
                    row.resized_w,
                    row.resized_h,
                    row.tokens,
                    repr(row.distortion),
                ]
            )


def read_rows_csv(path: str | Path) -> list[ReportRow]:
    """Parse a CSV written by :func:`write_rows_csv` back into rows."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            ReportRow(
                image=rec["image"],
                strategy=rec["strategy"],
                rows=int(rec["rows"]),
                cols=int(rec["cols"]),
                resized_w=int(rec["resized_w"]),
                resized_h=int(rec["resized_h"]),
                tokens=int(rec["tokens"]),
                distortion=float(rec["distortion"]),
            )
            for rec in reader
        ]


def write_aggregates_json(report: CorpusReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.aggregates, indent=2) + "\n")
