"""Desk-scale stand-ins for the vision encoder, projector and decision head.

The patch embedding is a fixed random linear map; only the projector and
head are trained. Random matrices come from numpy's PCG64 generator
(``numpy.random.default_rng``) seeded with the configured 64-bit seed, and
prompt-token vectors from PCG64 seeded with the token's FNV-1a 64 hash.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .fileio import atomic_write_bytes, atomic_write_text
from .imagecore import RasterImage, resize_nearest
from .pvtm import (
    MaskConfig,
    MaskPlan,
    TokenMatrix,
    apply_mask,
    concat_vision,
    plan_mask,
    pool_prompt,
    read_tokmat,
    write_tokmat,
)
from .savp import DescriptorImage, HogConfig, compose_savp
from .text import fnv1a_64, tokenize

__all__ = [
    "PatchEmbedConfig",
    "PipelineConfig",
    "PipelineResult",
    "Projector",
    "ToyHead",
    "classify",
    "embed_prompt",
    "init_head",
    "init_projector",
    "load_params",
    "loss_and_grads",
    "patch_embed",
    "project",
    "run_pipeline",
    "save_params",
    "separable_batch",
    "train_step",
]

CLASS_COUNTS = (2, 13)
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class PatchEmbedConfig:
    patch_size: int = 16
    dim: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def _frozen_array(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(a)):
        raise ValueError("parameters must be finite")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Projector:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w, b = _frozen_array(self.weight), _frozen_array(self.bias).reshape(-1)
        if w.ndim != 2 or b.shape[0] != w.shape[1]:
            raise ValueError(f"projector shapes disagree: weight {w.shape}, bias {b.shape}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True, eq=False)
class ToyHead:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w, b = _frozen_array(self.weight), _frozen_array(self.bias).reshape(-1)
        if w.ndim != 2 or b.shape[0] != w.shape[1]:
            raise ValueError(f"head shapes disagree: weight {w.shape}, bias {b.shape}")
        if w.shape[1] not in CLASS_COUNTS:
            raise ValueError(f"class_count must be one of {CLASS_COUNTS}, got {w.shape[1]}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def class_count(self) -> int:
        return self.weight.shape[1]


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & _U64)


def init_projector(d_in: int, d_out: int, seed: int = 0) -> Projector:
    w = _rng(seed).standard_normal((d_in, d_out)) / np.sqrt(d_in)
    return Projector(w, np.zeros(d_out))


def init_head(d_in: int, class_count: int = 2, seed: int = 1) -> ToyHead:
    w = _rng(seed).standard_normal((d_in, class_count)) / np.sqrt(d_in)
    return ToyHead(w, np.zeros(class_count))


# -- encoders ----------------------------------------------------------------


@lru_cache(maxsize=32)
def _embedding_matrix(fan_in: int, dim: int, seed: int) -> np.ndarray:
    m = _rng(seed).standard_normal((fan_in, dim)) / np.sqrt(fan_in)
    m.setflags(write=False)
    return m


def _nearest_multiple(n: int, step: int) -> int:
    return max(step, int(np.floor(n / step + 0.5)) * step)


def patch_embed(img, cfg: PatchEmbedConfig = PatchEmbedConfig(), resize: bool = False) -> TokenMatrix:
    """One token per non-overlapping patch, row-major over the patch grid.

    ``img`` is a RasterImage or DescriptorImage. Pixel values are scaled to
    [0, 1] and the embedding has no bias, so black patches embed to zero.
    """
    if isinstance(img, DescriptorImage):
        arr, tag = img.as_array(), "sav"
    elif isinstance(img, RasterImage):
        arr, tag = img.pixels, "rgb"
    else:
        raise TypeError(f"expected RasterImage or DescriptorImage, got {type(img).__name__}")
    ps = cfg.patch_size
    h, w, c = arr.shape
    if h % ps or w % ps:
        if not resize:
            raise ValueError(
                f"image {w}x{h} is not divisible by patch size {ps}; enable resizing"
            )
        arr = resize_nearest(arr, _nearest_multiple(w, ps), _nearest_multiple(h, ps))
        h, w, c = arr.shape
    patches = (
        arr.reshape(h // ps, ps, w // ps, ps, c).transpose(0, 2, 1, 3, 4).reshape(-1, ps * ps * c)
    )
    emb = _embedding_matrix(ps * ps * c, cfg.dim, int(cfg.seed))
    tokens = (patches.astype(np.float64) / 255.0) @ emb
    return TokenMatrix(tokens, tags=(tag,) * tokens.shape[0])


def embed_prompt(text: str, cfg: PatchEmbedConfig = PatchEmbedConfig()) -> TokenMatrix:
    """Hash-seeded Gaussian vector (variance 1/dim) per prompt token."""
    tokens = tokenize(text)
    if not tokens:
        raise ValueError("prompt is empty after tokenization")
    rows = [_rng(fnv1a_64(tok)).standard_normal(cfg.dim) / np.sqrt(cfg.dim) for tok in tokens]
    return TokenMatrix(np.vstack(rows), tags=("prompt",) * len(rows))


def project(v: TokenMatrix, proj: Projector) -> TokenMatrix:
    if v.dim != proj.d_in:
        raise ValueError(f"token dim {v.dim} does not match projector input {proj.d_in}")
    return TokenMatrix(v.values @ proj.weight + proj.bias, tags=v.tags)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def classify(v_align: TokenMatrix, head: ToyHead) -> np.ndarray:
    """Mean-pool tokens, apply the head, return class probabilities."""
    if v_align.dim != head.weight.shape[0]:
        raise ValueError(f"token dim {v_align.dim} does not match head input {head.weight.shape[0]}")
    pooled = v_align.values.mean(axis=0)
    return _softmax(pooled @ head.weight + head.bias)


# -- training ----------------------------------------------------------------


def _batch_arrays(batch, proj: Projector, head: ToyHead):
    means, labels = [], []
    for tokens, label in batch:
        values = tokens.values if isinstance(tokens, TokenMatrix) else np.asarray(tokens, float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] != proj.d_in:
            raise ValueError(f"sample tokens must be (N >= 1, {proj.d_in}), got {values.shape}")
        label = int(label)
        if not 0 <= label < head.class_count:
            raise ValueError(f"label {label} out of range for {head.class_count} classes")
        means.append(values.mean(axis=0))
        labels.append(label)
    if not means:
        raise ValueError("empty batch")
    return np.vstack(means), np.asarray(labels)


def loss_and_grads(batch, proj: Projector, head: ToyHead):
    """Mean cross-entropy and its gradients.

    Returns ``(loss, {"proj_w", "proj_b", "head_w", "head_b"})``.
    """
    m, y = _batch_arrays(batch, proj, head)
    n = m.shape[0]
    a = m @ proj.weight + proj.bias
    p = _softmax(a @ head.weight + head.bias)
    loss = float(-np.mean(np.log(np.maximum(p[np.arange(n), y], 1e-300))))
    dz = p.copy()
    dz[np.arange(n), y] -= 1.0
    dz /= n
    da = dz @ head.weight.T
    grads = {
        "proj_w": m.T @ da,
        "proj_b": da.sum(axis=0),
        "head_w": a.T @ dz,
        "head_b": dz.sum(axis=0),
    }
    return loss, grads


def train_step(batch, proj: Projector, head: ToyHead, lr: float):
    """One full-batch gradient-descent step.

    Returns ``(new_proj, new_head, loss)``; ``loss`` is measured before the step.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    loss, g = loss_and_grads(batch, proj, head)
    new_proj = Projector(proj.weight - lr * g["proj_w"], proj.bias - lr * g["proj_b"])
    new_head = ToyHead(head.weight - lr * g["head_w"], head.bias - lr * g["head_b"])
    return new_proj, new_head, loss


def predict(batch_tokens, proj: Projector, head: ToyHead) -> np.ndarray:
    return np.array([int(np.argmax(classify(project(t, proj), head))) for t in batch_tokens])


def separable_batch(
    n: int = 40, n_tokens: int = 6, dim: int = 16, margin: float = 1.0, noise: float = 0.5, seed: int = 0
):
    """Two Gaussian token clouds at +/- ``margin`` along a random unit direction.

    Labels alternate 0, 1, 0, ... Pooled means are linearly separable with
    high probability for ``margin`` well above ``noise / sqrt(n_tokens)``.
    """
    rng = _rng(seed)
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    out = []
    for i in range(n):
        label = i % 2
        centre = (1.0 if label else -1.0) * margin * u
        out.append((TokenMatrix(centre + noise * rng.standard_normal((n_tokens, dim))), label))
    return out


# -- end-to-end pipeline ------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    hog: HogConfig = field(default_factory=HogConfig)
    embed: PatchEmbedConfig = field(default_factory=PatchEmbedConfig)
    mask: MaskConfig = field(default_factory=MaskConfig)
    mask_style: str = "drop"
    resize: bool = False
    proj_dim: int = 32
    class_count: int = 2
    param_seed: int = 7


@dataclass
class PipelineResult:
    probabilities: np.ndarray
    plan: MaskPlan
    shapes: dict

    def to_dict(self) -> dict:
        return {
            "probabilities": [float(x) for x in self.probabilities],
            "mask_plan": self.plan.to_dict(),
            "shapes": self.shapes,
        }


def encode_image(img: RasterImage, cfg: PipelineConfig) -> TokenMatrix:
    """RGB and spoof-aware tokens for one image, concatenated."""
    desc = compose_savp(img, cfg.hog)
    rgb = patch_embed(img, cfg.embed, resize=cfg.resize)
    sav = patch_embed(desc, cfg.embed, resize=cfg.resize)
    return concat_vision(rgb, sav)


def run_pipeline(
    img: RasterImage,
    prompt: str,
    cfg: PipelineConfig = PipelineConfig(),
    proj: Projector | None = None,
    head: ToyHead | None = None,
) -> PipelineResult:
    desc = compose_savp(img, cfg.hog)
    rgb = patch_embed(img, cfg.embed, resize=cfg.resize)
    sav = patch_embed(desc, cfg.embed, resize=cfg.resize)
    vision = concat_vision(rgb, sav)
    prompt_tokens = embed_prompt(prompt, cfg.embed)
    plan = plan_mask(vision, pool_prompt(prompt_tokens), cfg.mask)
    masked = apply_mask(vision, plan, cfg.mask_style)
    if proj is None:
        proj = init_projector(cfg.embed.dim, cfg.proj_dim, seed=cfg.param_seed)
    if head is None:
        head = init_head(proj.d_out, cfg.class_count, seed=cfg.param_seed + 1)
    v_align = project(masked, proj)
    probs = classify(v_align, head)
    shapes = {
        "image": [img.height, img.width],
        "descriptor": [desc.height, desc.width, 3],
        "rgb_tokens": [rgb.n_tokens, rgb.dim],
        "sav_tokens": [sav.n_tokens, sav.dim],
        "prompt_tokens": [prompt_tokens.n_tokens, prompt_tokens.dim],
        "vision_tokens": [vision.n_tokens, vision.dim],
        "retained": len(plan.retained),
        "masked": len(plan.masked),
        "post_mask_tokens": [masked.n_tokens, masked.dim],
        "v_align": [v_align.n_tokens, v_align.dim],
        "probabilities": [int(probs.shape[0])],
    }
    return PipelineResult(probabilities=probs, plan=plan, shapes=shapes)


# -- parameter files -----------------------------------------------------------

_PARAM_FILES = {
    "proj_w": "projector.weight.tokmat",
    "proj_b": "projector.bias.tokmat",
    "head_w": "head.weight.tokmat",
    "head_b": "head.bias.tokmat",
}


def save_params(out_dir, proj: Projector, head: ToyHead, meta: dict | None = None) -> Path:
    """Write parameters as float32 TOKMAT files plus ``manifest.json``."""
    out_dir = Path(out_dir)
    arrays = {
        "proj_w": proj.weight,
        "proj_b": proj.bias[None, :],
        "head_w": head.weight,
        "head_b": head.bias[None, :],
    }
    for key, arr in arrays.items():
        atomic_write_bytes(out_dir / _PARAM_FILES[key], write_tokmat(TokenMatrix(arr)))
    manifest = {
        "format": "TOKMAT float32 little-endian",
        "files": _PARAM_FILES,
        "shapes": {k: list(v.shape) for k, v in arrays.items()},
        "meta": meta or {},
    }
    return atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))


def load_params(in_dir):
    in_dir = Path(in_dir)
    manifest = json.loads((in_dir / "manifest.json").read_text())
    arrays = {
        k: read_tokmat((in_dir / name).read_bytes()).values for k, name in manifest["files"].items()
    }
    proj = Projector(arrays["proj_w"], arrays["proj_b"][0])
    head = ToyHead(arrays["head_w"], arrays["head_b"][0])
    return proj, head, manifest
