"""Prompt-guided vision token masking.

Vision tokens are scored by the softmax of their cosine similarity to the
mean prompt embedding. The top ``ceil(k * N)`` tokens are protected, and the
rest are masked at random with probability ``p``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .imagecore import GrayImage

__all__ = [
    "DegenerateInputError",
    "MaskConfig",
    "MaskPlan",
    "PooledPrompt",
    "TokenMatrix",
    "TokmatError",
    "apply_mask",
    "concat_vision",
    "cosine_similarity",
    "derive_seed",
    "importance",
    "importance_map",
    "plan_mask",
    "pool_prompt",
    "read_tokmat",
    "write_tokmat",
]

MASK_MODES = ("bernoulli", "fixed_count")
MASK_STYLES = ("drop", "zero")
TOKEN_TAGS = ("rgb", "sav", "prompt")
_U64 = (1 << 64) - 1


class DegenerateInputError(ValueError):
    """Raised when a similarity is undefined (zero-norm prompt or vector)."""


class TokmatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def round_half_up(x: float) -> int:
    # the inner round() hides float noise such as 0.05 * 90 = 4.5000000000000001
    return math.floor(round(x, 9) + 0.5)


def ceil_count(x: float) -> int:
    return math.ceil(round(x, 9))


@dataclass(frozen=True, eq=False)
class TokenMatrix:
    values: np.ndarray
    tags: tuple | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2:
            raise ValueError(f"token matrix must be 2-D, got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"token matrix needs N >= 1 and D >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("token matrix contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.tags is not None:
            tags = tuple(self.tags)
            if len(tags) != v.shape[0]:
                raise ValueError("one tag per token required")
            unknown = set(tags) - set(TOKEN_TAGS)
            if unknown:
                raise ValueError(f"unknown token tags {sorted(unknown)}")
            object.__setattr__(self, "tags", tags)

    @property
    def n_tokens(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TokenMatrix):
            return NotImplemented
        return self.tags == other.tags and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class PooledPrompt:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("pooled prompt contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def nonzero(self) -> bool:
        return bool(np.any(self.values != 0.0))


@dataclass(frozen=True)
class MaskConfig:
    retain_fraction: float = 0.10
    mask_probability: float = 0.05
    mode: str = "bernoulli"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.retain_fraction <= 1.0:
            raise ValueError(f"retain_fraction must be in [0, 1], got {self.retain_fraction}")
        if not 0.0 <= self.mask_probability <= 1.0:
            raise ValueError(f"mask_probability must be in [0, 1], got {self.mask_probability}")
        if self.mode not in MASK_MODES:
            raise ValueError(f"mode must be one of {MASK_MODES}, got {self.mode!r}")

    def as_dict(self) -> dict:
        return {
            "retain_fraction": self.retain_fraction,
            "mask_probability": self.mask_probability,
            "mode": self.mode,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class MaskPlan:
    importance: np.ndarray
    retained: tuple[int, ...]
    masked: tuple[int, ...]
    kept: tuple[int, ...]
    config: MaskConfig = field(default_factory=MaskConfig)

    def __post_init__(self):
        imp = np.array(self.importance, dtype=np.float64, copy=True)
        imp.setflags(write=False)
        object.__setattr__(self, "importance", imp)
        for name in ("retained", "masked", "kept"):
            object.__setattr__(self, name, tuple(sorted(int(i) for i in getattr(self, name))))
        n = imp.shape[0]
        together = self.retained + self.masked + self.kept
        if sorted(together) != list(range(n)):
            raise ValueError("retained, masked and kept must partition the token indices")

    @property
    def n_tokens(self) -> int:
        return self.importance.shape[0]

    @property
    def seed(self) -> int:
        return self.config.seed

    def to_dict(self) -> dict:
        return {
            "importance": [float(x) for x in self.importance],
            "retained": list(self.retained),
            "masked": list(self.masked),
            "kept": list(self.kept),
            "seed": self.config.seed,
            "config": self.config.as_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MaskPlan":
        return cls(
            importance=np.asarray(d["importance"], dtype=np.float64),
            retained=d["retained"],
            masked=d["masked"],
            kept=d["kept"],
            config=MaskConfig(**d["config"]),
        )

    def __eq__(self, other):
        if not isinstance(other, MaskPlan):
            return NotImplemented
        return self.to_dict() == other.to_dict()


# -- operations --------------------------------------------------------------


def concat_vision(rgb: TokenMatrix, sav: TokenMatrix) -> TokenMatrix:
    """Stack RGB tokens above spoof-aware tokens."""
    if rgb.dim != sav.dim:
        raise ValueError(f"token dims differ: rgb {rgb.dim} vs sav {sav.dim}")
    tags = (rgb.tags or ("rgb",) * rgb.n_tokens) + (sav.tags or ("sav",) * sav.n_tokens)
    return TokenMatrix(np.vstack([rgb.values, sav.values]), tags=tags)


def pool_prompt(prompt_tokens: TokenMatrix) -> PooledPrompt:
    return PooledPrompt(prompt_tokens.values.mean(axis=0))


def cosine_similarity(v, p) -> float:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if v.shape != p.shape:
        raise ValueError(f"dimension mismatch: {v.shape[0]} vs {p.shape[0]}")
    nv, np_ = np.linalg.norm(v), np.linalg.norm(p)
    if nv == 0.0 or np_ == 0.0:
        raise DegenerateInputError("cosine similarity of a zero-norm vector is undefined")
    return float(np.clip(np.dot(v / nv, p / np_), -1.0, 1.0))


def similarities(vision: TokenMatrix, p: PooledPrompt) -> np.ndarray:
    """Cosine similarity of every token to the prompt; zero-norm tokens get -1."""
    if p.dim != vision.dim:
        raise ValueError(f"dimension mismatch: tokens {vision.dim} vs prompt {p.dim}")
    if not p.nonzero:
        raise DegenerateInputError("pooled prompt is the zero vector")
    q = p.values / np.linalg.norm(p.values)
    norms = np.linalg.norm(vision.values, axis=1)
    sims = np.full(vision.n_tokens, -1.0)
    ok = norms > 0.0
    # einsum keeps the reduction out of BLAS so results do not depend on thread count
    sims[ok] = np.einsum("ij,j->i", vision.values[ok] / norms[ok, None], q)
    return np.clip(sims, -1.0, 1.0)


def importance(vision: TokenMatrix, p: PooledPrompt) -> np.ndarray:
    """Softmax over token-prompt similarities."""
    sims = similarities(vision, p)
    e = np.exp(sims - sims.max())
    return e / e.sum()


def derive_seed(global_seed: int, ordinal: int) -> int:
    """Per-sample seed for parallel batch runs."""
    return (int(global_seed) ^ int(ordinal)) & _U64


def plan_mask(vision: TokenMatrix, p: PooledPrompt, cfg: MaskConfig = MaskConfig()) -> MaskPlan:
    scores = importance(vision, p)
    n = scores.shape[0]
    n_retain = ceil_count(cfg.retain_fraction * n)
    # stable sort of -score: equal scores keep ascending index order
    order = np.argsort(-scores, kind="stable")
    retained = np.sort(order[:n_retain])
    remaining = np.sort(order[n_retain:])
    rng = np.random.default_rng(int(cfg.seed) & _U64)
    if cfg.mode == "bernoulli":
        masked = remaining[rng.random(remaining.shape[0]) < cfg.mask_probability]
    else:
        n_mask = round_half_up(cfg.mask_probability * remaining.shape[0])
        masked = rng.choice(remaining, size=n_mask, replace=False) if n_mask else remaining[:0]
    kept = np.setdiff1d(remaining, masked)
    return MaskPlan(importance=scores, retained=retained, masked=masked, kept=kept, config=cfg)


def apply_mask(vision: TokenMatrix, plan: MaskPlan, style: str = "drop") -> TokenMatrix:
    if style not in MASK_STYLES:
        raise ValueError(f"style must be one of {MASK_STYLES}, got {style!r}")
    bad = [i for i in plan.masked if not 0 <= i < vision.n_tokens]
    if bad or plan.n_tokens != vision.n_tokens:
        raise IndexError(
            f"mask plan covers {plan.n_tokens} tokens, matrix has {vision.n_tokens}"
            + (f"; out-of-range indices {bad}" if bad else "")
        )
    if not plan.masked:
        return vision
    masked = np.asarray(plan.masked)
    if style == "zero":
        values = vision.values.copy()
        values[masked] = 0.0
        return TokenMatrix(values, tags=vision.tags)
    keep = np.ones(vision.n_tokens, dtype=bool)
    keep[masked] = False
    tags = None if vision.tags is None else tuple(t for t, k in zip(vision.tags, keep) if k)
    return TokenMatrix(vision.values[keep], tags=tags)


def importance_map(plan: MaskPlan, grid_w: int, grid_h: int, start: int = 0) -> GrayImage:
    """Render ``grid_w * grid_h`` importance scores from token ``start`` as a gray image.

    Scores are rescaled linearly so the largest maps to 255.
    """
    n = grid_w * grid_h
    if grid_w < 1 or grid_h < 1 or start < 0 or start + n > plan.n_tokens:
        raise ValueError(
            f"grid {grid_w}x{grid_h} from token {start} does not fit {plan.n_tokens} tokens"
        )
    s = plan.importance[start : start + n]
    scaled = np.floor(255.0 * (s / s.max()) + 0.5)
    return GrayImage(scaled.clip(0, 255).astype(np.uint8).reshape(grid_h, grid_w))


# -- TOKMAT file format ------------------------------------------------------

_TOKMAT_HEADER = re.compile(rb"TOKMAT ([0-9]+) ([0-9]+)\n")


def write_tokmat(tm: TokenMatrix) -> bytes:
    header = f"TOKMAT {tm.n_tokens} {tm.dim}\n".encode("ascii")
    return header + tm.values.astype("<f4").tobytes()


def read_tokmat(data: bytes) -> TokenMatrix:
    """Parse ``TOKMAT N D\\n`` followed by N*D little-endian float32 values."""
    data = bytes(data)
    m = _TOKMAT_HEADER.match(data)
    if m is None:
        if not data.startswith(b"TOKMAT"):
            raise TokmatError("missing TOKMAT magic", 0)
        nl = data.find(b"\n")
        raise TokmatError("malformed TOKMAT header, expected 'TOKMAT N D\\n'", max(nl, 0))
    n, d = int(m.group(1)), int(m.group(2))
    if n < 1 or d < 1:
        raise TokmatError(f"TOKMAT needs N >= 1 and D >= 1, got {n}x{d}", m.start(1))
    off = m.end()
    need = 4 * n * d
    if len(data) - off < need:
        raise TokmatError(f"truncated TOKMAT data: need {need} bytes, have {len(data) - off}", len(data))
    if len(data) - off > need:
        raise TokmatError("trailing bytes after TOKMAT data", off + need)
    values = np.frombuffer(data, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values.ravel()))[0])
        raise TokmatError("non-finite value in TOKMAT data", off + 4 * bad)
    return TokenMatrix(values.astype(np.float64))
