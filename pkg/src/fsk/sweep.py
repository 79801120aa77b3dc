"""Retain-ratio / mask-probability ablation harness on a synthetic face set.

Each grid cell trains a fresh projector and head on masked tokens and reports
held-out accuracy. Accuracy here only shows that the harness works; it says
nothing about real face data.

CSV columns, in order:

``k``             retain fraction
``p``             mask probability
``trial``         trial ordinal
``seed``          cell seed derived from (base seed, k, p, trial)
``mode``          mask mode
``pre_mask_n``    vision tokens per image before masking
``post_mask_n``   mean tokens per training image after masking
``toy_accuracy``  held-out accuracy of the toy classifier, in percent
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .imagecore import RasterImage
from .pvtm import MaskConfig, apply_mask, derive_seed, plan_mask, pool_prompt
from .savp import HogConfig
from .text import fnv1a_64
from .toyenc import (
    PatchEmbedConfig,
    PipelineConfig,
    embed_prompt,
    encode_image,
    init_head,
    init_projector,
    predict,
    train_step,
)

CSV_COLUMNS = ("k", "p", "trial", "seed", "mode", "pre_mask_n", "post_mask_n", "toy_accuracy")
SWEEP_PROMPT = "Is this face real or a presentation attack?"


@dataclass(frozen=True)
class SweepConfig:
    pipeline: PipelineConfig = field(
        default_factory=lambda: PipelineConfig(
            hog=HogConfig(cell_size=4),
            embed=PatchEmbedConfig(patch_size=8, dim=32, seed=0),
            proj_dim=16,
        )
    )
    image_size: int = 32
    n_train: int = 40
    n_test: int = 40
    steps: int = 100
    lr: float = 0.1
    mode: str = "fixed_count"
    seed: int = 0
    prompt: str = SWEEP_PROMPT


def synthetic_faces(n: int, size: int = 32, seed: int = 0) -> list[tuple[RasterImage, int]]:
    """Alternating live (label 0) and spoof (label 1) images.

    Live images are a smooth shaded disc with mild noise. Spoof images add
    a fine stripe pattern and a colour cast, loosely imitating print moire.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    out = []
    for i in range(n):
        label = i % 2
        cy, cx = size / 2 + rng.normal(0, size / 16, 2)
        r = size * rng.uniform(0.3, 0.4)
        dist = np.hypot(yy - cy, xx - cx) / r
        base = np.clip(1.0 - dist**2, 0.0, 1.0) * rng.uniform(150, 210) + 30
        img = np.repeat(base[..., None], 3, axis=2) * np.array([1.0, 0.85, 0.75])
        img += rng.normal(0, 4, img.shape)
        if label:
            period = rng.uniform(2.5, 4.0)
            theta = rng.uniform(0, np.pi)
            stripes = np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period)
            img += 40 * stripes[..., None]
            img *= np.array([0.8, 1.0, 1.3])
        out.append((RasterImage(np.clip(np.rint(img), 0, 255).astype(np.uint8)), label))
    return out


def cell_seed(base_seed: int, k: float, p: float, trial: int) -> int:
    return fnv1a_64(f"{int(base_seed)}:{k!r}:{p!r}:{int(trial)}")


class SweepRunner:
    """Encodes the synthetic set once; each cell only re-masks and retrains."""

    def __init__(self, cfg: SweepConfig = SweepConfig()):
        self.cfg = cfg
        pc = cfg.pipeline
        data = synthetic_faces(cfg.n_train + cfg.n_test, cfg.image_size, cfg.seed)
        self.tokens = [encode_image(img, pc) for img, _ in data]
        self.labels = [label for _, label in data]
        self.prompt = pool_prompt(embed_prompt(cfg.prompt, pc.embed))
        self.pre_mask_n = self.tokens[0].n_tokens

    def _masked(self, idx, mask_cfg: MaskConfig, seed: int):
        out = []
        for i in idx:
            plan = plan_mask(self.tokens[i], self.prompt, replace(mask_cfg, seed=derive_seed(seed, i)))
            out.append(apply_mask(self.tokens[i], plan, self.cfg.pipeline.mask_style))
        return out

    def run_cell(self, k: float, p: float, trial: int) -> dict:
        cfg, pc = self.cfg, self.cfg.pipeline
        seed = cell_seed(cfg.seed, k, p, trial)
        mask_cfg = MaskConfig(retain_fraction=k, mask_probability=p, mode=cfg.mode, seed=seed)
        train_idx = range(cfg.n_train)
        test_idx = range(cfg.n_train, cfg.n_train + cfg.n_test)
        train = self._masked(train_idx, mask_cfg, seed)
        test = self._masked(test_idx, mask_cfg, seed)
        batch = list(zip(train, (self.labels[i] for i in train_idx)))
        proj = init_projector(pc.embed.dim, pc.proj_dim, seed=derive_seed(seed, 1 << 32))
        head = init_head(pc.proj_dim, 2, seed=derive_seed(seed, 1 << 33))
        for _ in range(cfg.steps):
            proj, head, _ = train_step(batch, proj, head, cfg.lr)
        pred = predict(test, proj, head)
        gold = np.array([self.labels[i] for i in test_idx])
        return {
            "k": k,
            "p": p,
            "trial": trial,
            "seed": seed,
            "mode": cfg.mode,
            "pre_mask_n": self.pre_mask_n,
            "post_mask_n": float(np.mean([t.n_tokens for t in train])),
            "toy_accuracy": 100.0 * float(np.mean(pred == gold)),
        }


def validate_grid(values, name: str) -> list[float]:
    values = [float(v) for v in values]
    if not values:
        raise ValueError(f"{name} grid is empty")
    bad = [v for v in values if not 0.0 <= v <= 1.0]
    if bad:
        raise ValueError(f"{name} grid values outside [0, 1]: {bad}")
    return values


def run_sweep(k_list, p_list, trials: int = 1, cfg: SweepConfig = SweepConfig()) -> list[dict]:
    """Full factorial sweep, rows ordered by k, then p, then trial."""
    k_list = validate_grid(k_list, "k")
    p_list = validate_grid(p_list, "p")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    runner = SweepRunner(cfg)
    return [runner.run_cell(k, p, t) for k in k_list for p in p_list for t in range(trials)]


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({**row, "post_mask_n": f"{row['post_mask_n']:.4f}", "toy_accuracy": f"{row['toy_accuracy']:.4f}"})
    return buf.getvalue()
