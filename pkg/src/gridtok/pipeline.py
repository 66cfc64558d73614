"""Toy encoder -> projector -> compressor forward pass.

A small, fully deterministic stand-in for the real model's visual path:
a linear patch embedder with learned additive position rows feeds two
affine projections, the second of which merges groups of four tokens into
one (quartering the token count). Position tokens are injected after
projection, one ahead of the global block and one ahead of each local
block. All gradients are computed analytically and can be verified against
central finite differences with :func:`grad_check`.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .config import PipelineConfig
from .partition import PartitionPlan, dims_of, extract_patches, make_plan
from .resize import resize

ROLE_POSITION = "position"
ROLE_GLOBAL = "global"
ROLE_LOCAL = "local"

PARAM_NAMES = (
    "patch_embed",
    "pos_embed",
    "proj1",
    "proj1_bias",
    "proj2",
    "proj2_bias",
    "position_table",
)

# Parameter groups compared against finite differences by default.
GRAD_CHECK_GROUPS = ("patch_embed", "proj1", "proj2", "position_table")

_BINARY_MAGIC = "gridtok-params"


@dataclass
class ToyEncoderParams:
    """Linear patch embedder: per-sub-patch projection plus position rows."""

    patch_embed: np.ndarray  # (encoder_patch_px^2 * 3, encoder_dim)
    pos_embed: np.ndarray  # (tokens_per_cell, encoder_dim)


@dataclass
class ProjectorParams:
    """Projection to embedding space, 4x compressor, and position-token table.

    ``position_table`` row 0 is the global view's token; row (r-1)*N + c
    belongs to grid cell (r, c).
    """

    proj1: np.ndarray  # (encoder_dim, embed_dim)
    proj1_bias: np.ndarray  # (embed_dim,)
    proj2: np.ndarray  # (4 * embed_dim, embed_dim)
    proj2_bias: np.ndarray  # (embed_dim,)
    position_table: np.ndarray  # (max_grid^2 + 1, embed_dim)


@dataclass
class PipelineParams:
    encoder: ToyEncoderParams
    projector: ProjectorParams

    @property
    def dtype(self) -> np.dtype:
        return self.projector.proj1.dtype


@dataclass(frozen=True)
class FeatureSequence:
    """Ordered visual-token matrix with per-token role labels.

    ``source_position_id`` is 0 for position/global tokens of the global
    block and the originating cell's position id for local blocks.
    """

    tokens: np.ndarray  # (length, dim)
    roles: tuple[str, ...]
    source_position_id: np.ndarray  # (length,)

    def __post_init__(self) -> None:
        if not (self.tokens.shape[0] == len(self.roles) == self.source_position_id.shape[0]):
            raise ValueError("tokens, roles, and source_position_id lengths differ")

    def __len__(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


class Loss(Protocol):
    """Scalar loss over a feature sequence, with its analytic gradient."""

    def value(self, seq: FeatureSequence) -> float: ...

    def grad(self, seq: FeatureSequence) -> np.ndarray: ...


class SumLoss:
    """Sum of all sequence entries (linear; gradient is all ones)."""

    def value(self, seq: FeatureSequence) -> float:
        return float(seq.tokens.sum())

    def grad(self, seq: FeatureSequence) -> np.ndarray:
        return np.ones_like(seq.tokens)


class SquaredNormLoss:
    """Sum of squared sequence entries."""

    def value(self, seq: FeatureSequence) -> float:
        return float((seq.tokens**2).sum())

    def grad(self, seq: FeatureSequence) -> np.ndarray:
        return 2.0 * seq.tokens


class ZeroLoss:
    """Identically zero; every gradient vanishes."""

    def value(self, seq: FeatureSequence) -> float:
        return 0.0

    def grad(self, seq: FeatureSequence) -> np.ndarray:
        return np.zeros_like(seq.tokens)


def init_params(
    config: PipelineConfig,
    seed: int | np.random.Generator = 0,
    dtype: np.dtype | type = np.float32,
) -> PipelineParams:
    """Initialize all parameters uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].

    Groups are drawn in a fixed order so a seed pins every weight. Matrices
    use their input dimension as fan_in; standalone tables use their vector
    dimension.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def draw(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    pdim = config.patch_pixel_dim
    dv, dt = config.encoder_dim, config.embed_dim
    encoder = ToyEncoderParams(
        patch_embed=draw((pdim, dv), pdim),
        pos_embed=draw((config.tokens_per_cell, dv), dv),
    )
    projector = ProjectorParams(
        proj1=draw((dv, dt), dv),
        proj1_bias=draw((dt,), dv),
        proj2=draw((4 * dt, dt), 4 * dt),
        proj2_bias=draw((dt,), 4 * dt),
        position_table=draw((config.position_token_count, dt), dt),
    )
    return PipelineParams(encoder=encoder, projector=projector)


def _flatten_cell(patch: np.ndarray, config: PipelineConfig) -> np.ndarray:
    """Split an SxSx3 cell into row-major sub-patches, one flattened per row."""
    s, p = config.cell_size_px, config.encoder_patch_px
    if patch.shape != (s, s, 3):
        raise ValueError(f"expected a {s}x{s}x3 patch, got shape {patch.shape}")
    side = s // p
    blocks = patch.reshape(side, p, side, p, 3).transpose(0, 2, 1, 3, 4)
    return blocks.reshape(side * side, p * p * 3)


def encode_cell(
    patch: np.ndarray, params: ToyEncoderParams, config: PipelineConfig
) -> np.ndarray:
    """Embed one SxSx3 cell (values in [0, 1]) into (tokens_per_cell, D_v).

    Token i is the flattened i-th sub-patch times ``patch_embed`` plus the
    i-th ``pos_embed`` row.
    """
    flat = _flatten_cell(patch, config).astype(params.patch_embed.dtype, copy=False)
    return flat @ params.patch_embed + params.pos_embed


def project(features: np.ndarray, params: ProjectorParams) -> np.ndarray:
    """Affine map into embedding space, applied row-wise. Row count is preserved."""
    if features.ndim != 2 or features.shape[1] != params.proj1.shape[0]:
        raise ValueError(
            f"features shape {features.shape} does not match proj1 input dim "
            f"{params.proj1.shape[0]}"
        )
    return features @ params.proj1 + params.proj1_bias


def _group_index(n_rows: int, grouping: str) -> np.ndarray:
    """(n_rows/4, 4) index table mapping each output token to its four inputs."""
    if grouping == "spatial":
        side = math.isqrt(n_rows)
        if side * side != n_rows or side % 2 != 0:
            raise ValueError(
                f"row count {n_rows} is not compressible: need a perfect square with even side"
            )
        ids = np.arange(n_rows).reshape(side, side)
        # block (br, bc) gathers [top-left, top-right, bottom-left, bottom-right]
        return ids.reshape(side // 2, 2, side // 2, 2).transpose(0, 2, 1, 3).reshape(-1, 4)
    if grouping == "sequential":
        if n_rows % 4 != 0:
            raise ValueError(f"row count {n_rows} is not compressible: need a multiple of 4")
        return np.arange(n_rows).reshape(-1, 4)
    raise ValueError(f"unknown compress grouping {grouping!r}")


def _grouped(features: np.ndarray, grouping: str) -> tuple[np.ndarray, np.ndarray]:
    idx = _group_index(features.shape[0], grouping)
    return features[idx].reshape(idx.shape[0], 4 * features.shape[1]), idx


def compress(
    features: np.ndarray, params: ProjectorParams, config: PipelineConfig
) -> np.ndarray:
    """Merge groups of four tokens into one: concatenate, then affine map.

    576 rows in, 144 rows out at defaults. Output row k depends only on the
    four input tokens of its group.
    """
    grouped, _ = _grouped(features, config.compress_grouping)
    if grouped.shape[1] != params.proj2.shape[0]:
        raise ValueError(
            f"grouped width {grouped.shape[1]} does not match proj2 input dim "
            f"{params.proj2.shape[0]}"
        )
    return grouped @ params.proj2 + params.proj2_bias


def assemble(
    global_feat: np.ndarray,
    local_feats: Sequence[np.ndarray],
    plan: PartitionPlan,
    params: ProjectorParams,
) -> FeatureSequence:
    """Interleave position tokens with the global and local feature blocks.

    Layout: [pos_0, global rows] then, per patch in plan order,
    [pos_id, local rows]. Total length 577 + patch_count*145 at defaults.
    """
    if len(local_feats) != len(plan.patches):
        raise ValueError(
            f"got {len(local_feats)} local features for {len(plan.patches)} patches"
        )
    table = params.position_table
    dim = global_feat.shape[1]
    if table.shape[1] != dim:
        raise ValueError("position_table dim does not match features")

    blocks = [table[0:1], global_feat]
    roles: list[str] = [ROLE_POSITION] + [ROLE_GLOBAL] * global_feat.shape[0]
    pids: list[int] = [0] * (1 + global_feat.shape[0])
    for patch, feat in zip(plan.patches, local_feats):
        if feat.ndim != 2 or feat.shape[1] != dim:
            raise ValueError(f"local feature shape {feat.shape} does not match dim {dim}")
        if not 0 < patch.position_id < table.shape[0]:
            raise ValueError(f"position id {patch.position_id} out of table range")
        blocks.extend([table[patch.position_id : patch.position_id + 1], feat])
        roles.extend([ROLE_POSITION] + [ROLE_LOCAL] * feat.shape[0])
        pids.extend([patch.position_id] * (1 + feat.shape[0]))
    return FeatureSequence(
        tokens=np.concatenate(blocks, axis=0),
        roles=tuple(roles),
        source_position_id=np.asarray(pids, dtype=np.int64),
    )


def _to_unit_float(image: np.ndarray) -> np.ndarray:
    if image.dtype == np.uint8:
        return image.astype(np.float64) / 255.0
    return image.astype(np.float64, copy=False)


def _image_cells(
    image01: np.ndarray, plan: PartitionPlan, config: PipelineConfig
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Flattened sub-patch matrices for the global view and each local patch."""
    s = config.cell_size_px
    global_view = resize(image01, s, s, config.resample)
    xg = _flatten_cell(global_view, config)
    xs = [_flatten_cell(p, config) for p in extract_patches(image01, plan, config)]
    return xg, xs


def _forward_intermediates(
    xg: np.ndarray,
    xs: Sequence[np.ndarray],
    plan: PartitionPlan,
    params: PipelineParams,
    config: PipelineConfig,
) -> dict:
    enc, proj = params.encoder, params.projector
    dtype = params.dtype

    def embed(x: np.ndarray) -> np.ndarray:
        return x.astype(dtype, copy=False) @ enc.patch_embed + enc.pos_embed

    eg = embed(xg)
    fg = project(eg, proj)
    es, fs, gs, cs = [], [], [], []
    idx = None
    for x in xs:
        e = embed(x)
        f = project(e, proj)
        g, idx = _grouped(f, config.compress_grouping)
        c = g @ proj.proj2 + proj.proj2_bias
        es.append(e)
        fs.append(f)
        gs.append(g)
        cs.append(c)
    seq = assemble(fg, cs, plan, proj)
    return {"eg": eg, "fg": fg, "es": es, "fs": fs, "gs": gs, "cs": cs, "idx": idx, "seq": seq}


def forward(image: np.ndarray, config: PipelineConfig, params: PipelineParams) -> FeatureSequence:
    """Full pass: partition, encode global + local branches, project,
    compress locals, and assemble the token sequence.

    The global branch encodes the original image resized straight to one
    cell; the local branch encodes each patch of the grid-resized image.
    uint8 images are scaled to [0, 1]; float images are used as-is.
    """
    plan = make_plan(dims_of(image), config)
    image01 = _to_unit_float(image)
    xg, xs = _image_cells(image01, plan, config)
    return _forward_intermediates(xg, xs, plan, params, config)["seq"]


def _backprop(
    dtokens: np.ndarray,
    inter: dict,
    xg: np.ndarray,
    xs: Sequence[np.ndarray],
    plan: PartitionPlan,
    params: PipelineParams,
    config: PipelineConfig,
) -> dict[str, np.ndarray]:
    """Gradients of a loss w.r.t. every parameter group, given dL/dtokens."""
    enc, proj = params.encoder, params.projector
    tg = inter["fg"].shape[0]
    grads = {
        "patch_embed": np.zeros_like(enc.patch_embed),
        "pos_embed": np.zeros_like(enc.pos_embed),
        "proj1": np.zeros_like(proj.proj1),
        "proj1_bias": np.zeros_like(proj.proj1_bias),
        "proj2": np.zeros_like(proj.proj2),
        "proj2_bias": np.zeros_like(proj.proj2_bias),
        "position_table": np.zeros_like(proj.position_table),
    }

    def through_projection(de_source: np.ndarray, e: np.ndarray, x: np.ndarray) -> None:
        # de_source is dL/dF for one cell's projected features
        grads["proj1"] += e.T @ de_source
        grads["proj1_bias"] += de_source.sum(axis=0)
        de = de_source @ proj.proj1.T
        grads["patch_embed"] += x.astype(de.dtype, copy=False).T @ de
        grads["pos_embed"] += de

    grads["position_table"][0] += dtokens[0]
    through_projection(dtokens[1 : 1 + tg], inter["eg"], xg)

    tc = inter["cs"][0].shape[0] if inter["cs"] else 0
    for i, patch in enumerate(plan.patches):
        base = 1 + tg + i * (1 + tc)
        grads["position_table"][patch.position_id] += dtokens[base]
        dc = dtokens[base + 1 : base + 1 + tc]
        grads["proj2"] += inter["gs"][i].T @ dc
        grads["proj2_bias"] += dc.sum(axis=0)
        dg = dc @ proj.proj2.T
        df = np.zeros_like(inter["fs"][i])
        df[inter["idx"].ravel()] = dg.reshape(-1, df.shape[1])
        through_projection(df, inter["es"][i], xs[i])
    return grads


def _as_float64(params: PipelineParams) -> PipelineParams:
    return PipelineParams(
        encoder=ToyEncoderParams(
            patch_embed=params.encoder.patch_embed.astype(np.float64),
            pos_embed=params.encoder.pos_embed.astype(np.float64),
        ),
        projector=ProjectorParams(
            proj1=params.projector.proj1.astype(np.float64),
            proj1_bias=params.projector.proj1_bias.astype(np.float64),
            proj2=params.projector.proj2.astype(np.float64),
            proj2_bias=params.projector.proj2_bias.astype(np.float64),
            position_table=params.projector.position_table.astype(np.float64),
        ),
    )


def params_to_arrays(params: PipelineParams) -> dict[str, np.ndarray]:
    return {
        "patch_embed": params.encoder.patch_embed,
        "pos_embed": params.encoder.pos_embed,
        "proj1": params.projector.proj1,
        "proj1_bias": params.projector.proj1_bias,
        "proj2": params.projector.proj2,
        "proj2_bias": params.projector.proj2_bias,
        "position_table": params.projector.position_table,
    }


def params_from_arrays(arrays: Mapping[str, np.ndarray]) -> PipelineParams:
    missing = set(PARAM_NAMES) - set(arrays)
    if missing:
        raise ValueError(f"missing parameter entries: {sorted(missing)}")
    return PipelineParams(
        encoder=ToyEncoderParams(
            patch_embed=np.asarray(arrays["patch_embed"]),
            pos_embed=np.asarray(arrays["pos_embed"]),
        ),
        projector=ProjectorParams(
            proj1=np.asarray(arrays["proj1"]),
            proj1_bias=np.asarray(arrays["proj1_bias"]),
            proj2=np.asarray(arrays["proj2"]),
            proj2_bias=np.asarray(arrays["proj2_bias"]),
            position_table=np.asarray(arrays["position_table"]),
        ),
    )


def grad_check(
    loss: Loss,
    image: np.ndarray,
    config: PipelineConfig,
    params: PipelineParams,
    *,
    epsilon: float = 1e-4,
    samples_per_group: int = 16,
    groups: Sequence[str] = GRAD_CHECK_GROUPS,
    seed: int = 0,
    corrupt: bool = False,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs the whole computation in float64 regardless of the params' dtype.
    ``samples_per_group`` coordinates of each named group are probed with
    central differences at ``epsilon``; the relative error is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).

    ``corrupt`` is a negative-control hook: it shifts one analytic gradient
    group so the check must fail.
    """
    if not 0.0 < epsilon <= 1e-2:
        raise ValueError(f"epsilon must be in (0, 1e-2], got {epsilon}")
    unknown = set(groups) - set(PARAM_NAMES)
    if unknown:
        raise ValueError(f"unknown parameter groups: {sorted(unknown)}")

    params64 = _as_float64(params)
    plan = make_plan(dims_of(image), config)
    xg, xs = _image_cells(_to_unit_float(image), plan, config)

    def evaluate() -> FeatureSequence:
        return _forward_intermediates(xg, xs, plan, params64, config)["seq"]

    inter = _forward_intermediates(xg, xs, plan, params64, config)
    base = loss.value(inter["seq"])
    if not np.isfinite(base):
        raise ValueError(f"loss is not finite: {base}")
    dtokens = np.asarray(loss.grad(inter["seq"]), dtype=np.float64)
    if dtokens.shape != inter["seq"].tokens.shape:
        raise ValueError("loss gradient shape does not match the sequence")

    grads = _backprop(dtokens, inter, xg, xs, plan, params64, config)
    if corrupt:
        grads[groups[0]] = grads[groups[0]] + 0.5

    arrays = params_to_arrays(params64)
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    for name in groups:
        arr = arrays[name]
        analytic = grads[name]
        count = min(samples_per_group, arr.size)
        coords = rng.choice(arr.size, size=count, replace=False)
        for flat_idx in coords:
            original = arr.flat[flat_idx]
            arr.flat[flat_idx] = original + epsilon
            plus = loss.value(evaluate())
            arr.flat[flat_idx] = original - epsilon
            minus = loss.value(evaluate())
            arr.flat[flat_idx] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            a = float(analytic.flat[flat_idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            max_rel = max(max_rel, rel)
    return max_rel


def save_params(params: PipelineParams, path: str | Path, mode: str = "binary") -> None:
    """Dump parameters to ``path``.

    Binary mode stores little-endian float32 with a JSON shape header;
    JSON mode stores full-precision nested lists plus the dtype name.
    """
    arrays = params_to_arrays(params)
    path = Path(path)
    if mode == "json":
        payload = {
            "format": _BINARY_MAGIC,
            "dtype": np.dtype(params.dtype).name,
            "arrays": {
                name: {"shape": list(a.shape), "data": np.asarray(a).ravel().tolist()}
                for name, a in arrays.items()
            },
        }
        path.write_text(json.dumps(payload) + "\n")
    elif mode == "binary":
        header = {
            "format": _BINARY_MAGIC,
            "dtype": "<f4",
            "entries": [{"name": n, "shape": list(arrays[n].shape)} for n in PARAM_NAMES],
        }
        header_bytes = json.dumps(header).encode("utf-8")
        with path.open("wb") as fh:
            fh.write(struct.pack("<Q", len(header_bytes)))
            fh.write(header_bytes)
            for name in PARAM_NAMES:
                fh.write(np.ascontiguousarray(arrays[name], dtype="<f4").tobytes())
    else:
        raise ValueError(f"unknown checkpoint mode {mode!r}")


def load_params(path: str | Path) -> PipelineParams:
    """Load a checkpoint written by :func:`save_params` (format auto-detected)."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:1] == b"{":
        payload = json.loads(raw.decode("utf-8"))
        if payload.get("format") != _BINARY_MAGIC:
            raise ValueError(f"{path} is not a parameter checkpoint")
        dtype = np.dtype(payload["dtype"])
        arrays = {
            name: np.asarray(entry["data"], dtype=dtype).reshape(entry["shape"])
            for name, entry in payload["arrays"].items()
        }
        return params_from_arrays(arrays)
    (header_len,) = struct.unpack_from("<Q", raw, 0)
    header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    if header.get("format") != _BINARY_MAGIC:
        raise ValueError(f"{path} is not a parameter checkpoint")
    offset = 8 + header_len
    arrays = {}
    for entry in header["entries"]:
        size = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        view = np.frombuffer(raw, dtype=header["dtype"], count=size, offset=offset)
        arrays[entry["name"]] = view.reshape(entry["shape"]).astype(np.float32)
        offset += size * np.dtype(header["dtype"]).itemsize
    return params_from_arrays(arrays)
