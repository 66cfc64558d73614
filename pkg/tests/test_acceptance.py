"""Acceptance suite: one test per release criterion, each printing PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Every tolerance is pinned here; nothing is deferred to calibration.
"""

from __future__ import annotations

import time

import numpy as np

from gridtok.budget import budget_for_plan, llava_baseline, monkey_baseline
from gridtok.config import PipelineConfig
from gridtok.harness import ingest, run_report, write_aggregates_json, write_rows_csv
from gridtok.partition import ImageDims, make_plan, select_grid
from gridtok.pipeline import (
    SquaredNormLoss,
    compress,
    forward,
    grad_check,
    init_params,
    params_from_arrays,
)

CONFIG = PipelineConfig()
TOY = PipelineConfig(encoder_dim=8, embed_dim=16)


def _criterion(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] {name}{suffix}")
    assert ok, f"{name} failed{suffix}"


def test_grid_selection_matches_bruteforce_oracle():
    """select_grid equals the minimal-cover scan on ~30k size pairs in <10s."""
    cell, n = CONFIG.cell_size_px, CONFIG.max_grid
    sizes = range(1, 1206, 7)  # 173 values per axis -> 29,929 pairs
    started = time.monotonic()
    checked = 0
    for height in sizes:
        min_h = min(height, n * cell)
        for width in sizes:
            grid = select_grid(ImageDims(width=width, height=height), CONFIG)
            # brute force: first (r, c) in lexicographic order that covers
            expected = None
            for r in range(1, n + 1):
                for c in range(1, n + 1):
                    if r * cell >= min_h and c * cell >= min(width, n * cell):
                        expected = (r, c)
                        break
                if expected:
                    break
            if (grid.rows, grid.cols) != expected:
                _criterion(
                    "grid-selection oracle equivalence",
                    False,
                    f"{height}x{width}: got {(grid.rows, grid.cols)}, oracle {expected}",
                )
            checked += 1
    elapsed = time.monotonic() - started
    _criterion(
        "grid-selection oracle equivalence",
        checked == len(sizes) ** 2 and elapsed < 10.0,
        f"{checked} pairs in {elapsed:.2f}s",
    )


def test_resolution_cap():
    """1,000 random sizes up to 8000x8000 all resize within 1008x1008."""
    rng = np.random.default_rng(42)
    cap = CONFIG.max_resolution_px
    worst = (0, 0)
    for _ in range(1000):
        w, h = int(rng.integers(1, 8001)), int(rng.integers(1, 8001))
        plan = make_plan(ImageDims(width=w, height=h), CONFIG)
        worst = max(worst, (plan.resized.width, plan.resized.height))
        if plan.resized.width > cap or plan.resized.height > cap:
            _criterion("resolution cap", False, f"{w}x{h} resized to {plan.resized}")
    _criterion("resolution cap", True, f"1000 sizes, max resized {worst[0]}x{worst[1]} <= {cap}")


def test_token_constants():
    """576 global / 144 local per cell; 3x3 total 1882; forward length == budget."""
    single = budget_for_plan(make_plan(ImageDims(width=200, height=150), CONFIG), CONFIG)
    full = budget_for_plan(make_plan(ImageDims(width=4000, height=4000), CONFIG), CONFIG)
    ok = (
        single.global_tokens == 576
        and single.local_tokens_per_patch == 144
        and full.total == 577 + 9 * 145 == 1882
    )
    _criterion(
        "token constants (576 global / 144 local / 1882 full grid)",
        ok,
        f"single={single.global_tokens}/{single.local_tokens_per_patch}, full={full.total}",
    )

    params = init_params(TOY, seed=0)
    rng = np.random.default_rng(7)
    for i in range(200):
        w, h = int(rng.integers(1, 1601)), int(rng.integers(1, 1601))
        image = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        seq = forward(image, TOY, params)
        budget = budget_for_plan(make_plan(ImageDims(width=w, height=h), TOY), TOY)
        if len(seq) != budget.total:
            _criterion(
                "forward length equals budget total",
                False,
                f"{w}x{h}: sequence {len(seq)} != budget {budget.total}",
            )
    _criterion("forward length equals budget total", True, "200 random sizes")


def test_position_token_count():
    """Exactly ten position-token rows at the default 3x3 grid."""
    params = init_params(CONFIG, seed=0)
    rows = params.projector.position_table.shape[0]
    _criterion("position-token count", rows == 10, f"position_table has {rows} rows")


def test_ablation_grid_2_configuration():
    """max_grid=2 caps resolution at 672x672 and totals at 1157."""
    config = PipelineConfig(max_grid=2)
    rng = np.random.default_rng(11)
    max_resized = 0
    max_total = 0
    for _ in range(500):
        w, h = int(rng.integers(1, 6001)), int(rng.integers(1, 6001))
        plan = make_plan(ImageDims(width=w, height=h), config)
        max_resized = max(max_resized, plan.resized.width, plan.resized.height)
        max_total = max(max_total, budget_for_plan(plan, config).total)
    ok = max_resized == 672 and max_total == 1157 == 577 + 4 * 145
    _criterion("ablation config (max_grid=2)", ok, f"max resized {max_resized}, max total {max_total}")


def test_gradient_check_five_seeds():
    """Analytic vs central-difference gradients within 1e-5, 5 seeds, <60s."""
    started = time.monotonic()
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        image = rng.integers(0, 256, size=(400, 250, 3), dtype=np.uint8)
        params = init_params(TOY, seed=rng, dtype=np.float64)
        err = grad_check(
            SquaredNormLoss(),
            image,
            TOY,
            params,
            epsilon=1e-4,
            groups=("proj1", "proj2", "position_table", "patch_embed"),
            seed=seed,
        )
        worst = max(worst, err)
        if err > 1e-5:
            _criterion("gradient check", False, f"seed {seed}: max rel err {err:.3e}")
    elapsed = time.monotonic() - started
    _criterion(
        "gradient check",
        worst <= 1e-5 and elapsed < 60.0,
        f"worst rel err {worst:.3e} over 5 seeds in {elapsed:.1f}s",
    )


def test_tiling_and_locality_properties():
    """Tiling exactness and compression locality over 1,000 random cases each."""
    rng = np.random.default_rng(13)
    for _ in range(1000):
        w, h = int(rng.integers(1, 9000)), int(rng.integers(1, 9000))
        plan = make_plan(ImageDims(width=w, height=h), CONFIG)
        occupancy = np.zeros((plan.resized.height, plan.resized.width), dtype=np.uint8)
        for p in plan.patches:
            occupancy[p.y0 : p.y1, p.x0 : p.x1] += 1
        if occupancy.min() != 1 or occupancy.max() != 1:
            _criterion("tiling exactness", False, f"{w}x{h} not tiled exactly")
        if len(plan.patches) != plan.grid.cell_count:
            _criterion("tiling exactness", False, f"{w}x{h} patch count mismatch")
    _criterion("tiling exactness", True, "1000 random sizes")

    dt = TOY.embed_dim
    arrays = {
        "patch_embed": rng.uniform(-0.1, 0.1, (TOY.patch_pixel_dim, TOY.encoder_dim)),
        "pos_embed": rng.uniform(-0.1, 0.1, (576, TOY.encoder_dim)),
        "proj1": rng.uniform(-0.1, 0.1, (TOY.encoder_dim, dt)),
        "proj1_bias": rng.uniform(-0.1, 0.1, dt),
        "proj2": rng.uniform(-0.1, 0.1, (4 * dt, dt)),
        "proj2_bias": rng.uniform(-0.1, 0.1, dt),
        "position_table": rng.uniform(-0.1, 0.1, (10, dt)),
    }
    proj = params_from_arrays(arrays).projector
    token_grid_side = TOY.token_grid_side
    for _ in range(1000):
        features = rng.standard_normal((576, dt))
        base = compress(features, proj, TOY)
        # pick a block, then perturb a token belonging to a different block
        br, bc = rng.integers(0, token_grid_side // 2, size=2)
        block_rows = [
            (2 * br + i) * token_grid_side + (2 * bc + j) for i in (0, 1) for j in (0, 1)
        ]
        outside = int(rng.integers(0, 576))
        while outside in block_rows:
            outside = int(rng.integers(0, 576))
        perturbed = features.copy()
        perturbed[outside] += rng.standard_normal(dt)
        out = compress(perturbed, proj, TOY)
        row = int(br * (token_grid_side // 2) + bc)
        if not np.array_equal(out[row], base[row]):
            _criterion("compression locality", False, f"block {br},{bc} changed")
    _criterion("compression locality", True, "1000 random perturbations")


def test_byte_determinism(run_cli, write_png, tmp_path):
    """cmd_plan and batch outputs byte-identical across runs and worker counts."""
    image = write_png("det.png", 700, 500, seed=3)
    outputs = [run_cli("plan", str(image)) for _ in range(3)]
    plans_identical = all(
        r.returncode == 0 and r.stdout == outputs[0].stdout for r in outputs
    )
    _criterion("cmd_plan byte determinism", plans_identical, "3 runs")

    corpus = tmp_path / "corpus"
    corpus.mkdir()
    rng = np.random.default_rng(17)
    for i in range(6):
        write_png(f"corpus/img{i}.png", int(rng.integers(1, 1500)), int(rng.integers(1, 1500)), seed=i)
    blobs = []
    for run, workers in enumerate(("1", "1", "4", "4")):
        out = tmp_path / f"out{run}"
        result = run_cli("batch", str(corpus), "--out", str(out), "--workers", workers)
        assert result.returncode == 0, result.stderr
        blobs.append(
            (out / "per_image.csv").read_bytes() + (out / "aggregates.json").read_bytes()
        )
    batch_identical = all(blob == blobs[0] for blob in blobs)
    _criterion("batch report byte determinism", batch_identical, "3+ runs, workers 1 and 4")


def test_library_report_matches_cli_batch(run_cli, write_png, tmp_path):
    """The in-process harness and the CLI batch command emit the same bytes."""
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i, size in enumerate([90, 400, 1100]):
        write_png(f"corpus/s{i}.png", size, size, seed=i)
    out = tmp_path / "cli_out"
    result = run_cli("batch", str(corpus), "--out", str(out))
    assert result.returncode == 0, result.stderr

    report = run_report(ingest(corpus), [llava_baseline(), monkey_baseline()], CONFIG)
    lib_csv = tmp_path / "lib.csv"
    lib_json = tmp_path / "lib.json"
    write_rows_csv(report.per_image, lib_csv)
    write_aggregates_json(report, lib_json)
    same = (
        lib_csv.read_bytes() == (out / "per_image.csv").read_bytes()
        and lib_json.read_bytes() == (out / "aggregates.json").read_bytes()
    )
    _criterion("library/CLI report equivalence", same, "CSV and JSON bytes")
