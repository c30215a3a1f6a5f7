"""Intra-class partner selection and mask-composited mixing.

The core operation composites two same-class clips through a binary mask:

    out = x_i where the mask is false, x_j where it is true

so every output pixel is copied verbatim from exactly one input and the
label is preserved by construction. The full pipeline resamples both clips
to T frames, derives selection weights from the motion of the clip being
augmented, draws a budgeted mask, and composites. Two baselines ride the
same machinery: mask-only erasing (constant fill instead of partner
content) and plain mixup interpolation.

Batch processing derives one random stream per clip from a stable 64-bit
hash of (seed, clip_id), which makes outputs a pure function of (manifest,
config) regardless of worker count or scheduling.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AugmentationError,
    ShapeMismatchError,
    SingletonClassError,
)
from .masking import (
    Mask4D,
    STRATEGY_RANDOM_PATCHES,
    STRATEGY_RECT,
    STRATEGY_TUBE,
    build_mask_variant,
    coverage_ratio,
)
from .motion import motion_map, normalize_patch_motion, pool_to_patches, selection_weights
from .video_io import DatasetManifest, VideoClip, sample_frames, write_clip

logger = logging.getLogger(__name__)

STRATEGY_MASK_ONLY = "mask_only"
STRATEGY_MIXUP = "mixup"
STRATEGIES = (
    STRATEGY_RECT,
    STRATEGY_RANDOM_PATCHES,
    STRATEGY_TUBE,
    STRATEGY_MASK_ONLY,
    STRATEGY_MIXUP,
)


@dataclass(frozen=True)
class AugConfig:
    """Full determinism key for one augmentation run.

    r is the coverage ratio, b0 the patch edge in pixels, t the output frame
    count; fill only matters for mask_only and mixup_lambda only for mixup,
    but every field is validated regardless.
    """

    r: float = 0.3
    b0: int = 16
    t: int = 16
    strategy: str = STRATEGY_TUBE
    fill: float = 0.0
    mixup_lambda: float = 0.5
    seed: int = 42

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"coverage ratio must be in [0, 1], got {self.r}")
        if self.b0 < 1:
            raise ValueError(f"block size must be positive, got {self.b0}")
        if self.t < 1:
            raise ValueError(f"frame count must be positive, got {self.t}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if not 0.0 <= self.fill <= 1.0:
            raise ValueError(f"fill must be in [0, 1], got {self.fill}")
        if not 0.0 <= self.mixup_lambda <= 1.0:
            raise ValueError(f"mixup_lambda must be in [0, 1], got {self.mixup_lambda}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class Provenance:
    source_id: str
    partner_id: str | None
    strategy: str
    seed: int
    realized_coverage: float


@dataclass(frozen=True, eq=False)
class AugmentedClip:
    clip: VideoClip
    provenance: Provenance

    @property
    def label(self) -> str | None:
        return self.clip.label

    @property
    def realized_coverage(self) -> float:
        return self.provenance.realized_coverage


def derive_seed(seed: int, clip_id: str) -> int:
    """Stable per-clip 64-bit stream seed, independent of scheduling."""
    digest = hashlib.blake2b(f"{seed}:{clip_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def sample_partner(manifest: DatasetManifest, clip_id: str, rng: np.random.Generator) -> str:
    """Uniformly pick another clip with the same label (never clip_id itself)."""
    entry = manifest.by_id.get(clip_id)
    if entry is None:
        raise KeyError(f"unknown clip id {clip_id!r}")
    candidates = [i for i in manifest.index[entry.label] if i != clip_id]
    if not candidates:
        raise SingletonClassError(
            f"class {entry.label!r} holds no partner for clip {clip_id!r}"
        )
    return candidates[int(rng.integers(0, len(candidates)))]


def _require_same_shape(a: VideoClip, b: VideoClip | Mask4D) -> None:
    shape_b = b.shape if isinstance(b, VideoClip) else b.frames.shape
    shape_a = a.shape if isinstance(b, VideoClip) else a.frames.shape[:3]
    if shape_a != shape_b:
        raise ShapeMismatchError(f"shape mismatch: {shape_a} vs {shape_b}")


def mix(x_i: VideoClip, x_j: VideoClip, mask: Mask4D) -> VideoClip:
    """Composite per-element: x_j where the mask is true, x_i elsewhere."""
    _require_same_shape(x_i, x_j)
    _require_same_shape(x_i, mask)
    out = np.where(mask.frames[..., None], x_j.frames, x_i.frames)
    return VideoClip(frames=out, id=x_i.id, label=x_i.label)


def mask_only(x: VideoClip, mask: Mask4D, fill: float) -> VideoClip:
    """Erase masked regions to a constant fill value instead of mixing."""
    if not 0.0 <= fill <= 1.0:
        raise ValueError(f"fill must be in [0, 1], got {fill}")
    _require_same_shape(x, mask)
    out = np.where(mask.frames[..., None], np.float32(fill), x.frames)
    return VideoClip(frames=out, id=x.id, label=x.label)


def mixup(x_i: VideoClip, x_j: VideoClip, lam: float) -> VideoClip:
    """Pixel-wise convex interpolation: lam * x_i + (1 - lam) * x_j."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    _require_same_shape(x_i, x_j)
    out = np.float32(lam) * x_i.frames + np.float32(1.0 - lam) * x_j.frames
    return VideoClip(frames=out, id=x_i.id, label=x_i.label)


def augment_pair(
    x_i: VideoClip,
    x_j: VideoClip,
    cfg: AugConfig,
    rng: np.random.Generator,
) -> AugmentedClip:
    """Run the full pipeline on one same-label pair.

    Both clips are independently resampled to cfg.t frames; motion (and
    hence mask placement) is computed from the clip being augmented, never
    from the partner. A zero budget short-circuits to the identity.
    """
    if x_i.label != x_j.label:
        raise ValueError(f"labels differ: {x_i.label!r} vs {x_j.label!r}")
    a = sample_frames(x_i, cfg.t)
    b = sample_frames(x_j, cfg.t)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch after resampling: {a.shape} vs {b.shape}")
    t, h, w, _ = a.shape

    if cfg.strategy == STRATEGY_MIXUP:
        out = mixup(a, b, cfg.mixup_lambda)
        # coverage of the constant soft mask: a 1-lam fraction of every
        # pixel's value comes from the partner
        prov = Provenance(x_i.id, x_j.id, cfg.strategy, cfg.seed, 1.0 - cfg.mixup_lambda)
        return AugmentedClip(clip=out, provenance=prov)

    partner_id = None if cfg.strategy == STRATEGY_MASK_ONLY else x_j.id
    if cfg.r == 0.0:
        prov = Provenance(x_i.id, partner_id, cfg.strategy, cfg.seed, 0.0)
        return AugmentedClip(clip=a, provenance=prov)

    if cfg.strategy == STRATEGY_RECT:
        mask = build_mask_variant(STRATEGY_RECT, None, cfg.r, cfg.b0, h, w, t, rng)
    else:
        weights = selection_weights(
            normalize_patch_motion(pool_to_patches(motion_map(a), cfg.b0))
        )
        variant = STRATEGY_RANDOM_PATCHES if cfg.strategy == STRATEGY_RANDOM_PATCHES else STRATEGY_TUBE
        mask = build_mask_variant(variant, weights, cfg.r, cfg.b0, h, w, t, rng)

    if cfg.strategy == STRATEGY_MASK_ONLY:
        out = mask_only(a, mask, cfg.fill)
    else:
        out = mix(a, b, mask)
    prov = Provenance(x_i.id, partner_id, cfg.strategy, cfg.seed, coverage_ratio(mask))
    return AugmentedClip(clip=out, provenance=prov)


@dataclass
class BatchReport:
    augmented: int = 0
    skipped: int = 0
    failed: int = 0
    failures: list = None

    def __post_init__(self):
        if self.failures is None:
            self.failures = []

    def as_dict(self) -> dict:
        return {
            "augmented": self.augmented,
            "skipped": self.skipped,
            "failed": self.failed,
            "failures": list(self.failures),
        }


def _sidecar(prov: Provenance, cfg: AugConfig) -> dict:
    return {
        "source_id": prov.source_id,
        "partner_id": prov.partner_id,
        "strategy": prov.strategy,
        "seed": prov.seed,
        "r": cfg.r,
        "b0": cfg.b0,
        "T": cfg.t,
        "realized_coverage": prov.realized_coverage,
    }


def _write_output(clip: VideoClip, meta: dict, out_dir: Path, clip_id: str) -> None:
    write_clip(clip, out_dir / f"{clip_id}.rvt1", format="raw_tensor")
    text = json.dumps(meta, sort_keys=True) + "\n"
    (out_dir / f"{clip_id}.meta.json").write_text(text)


def _augment_one(manifest: DatasetManifest, clip_id: str, cfg: AugConfig, out_dir: Path) -> str:
    """Process one clip; returns 'augmented' or 'skipped'."""
    rng = np.random.default_rng(derive_seed(cfg.seed, clip_id))
    try:
        partner_id = sample_partner(manifest, clip_id, rng)
    except SingletonClassError:
        logger.warning("clip %s is alone in its class; copying it unaugmented", clip_id)
        clip = manifest.load(clip_id)
        prov = Provenance(clip_id, None, cfg.strategy, cfg.seed, 0.0)
        _write_output(clip, _sidecar(prov, cfg), out_dir, clip_id)
        return "skipped"
    x_i = manifest.load(clip_id)
    x_j = manifest.load(partner_id)
    aug = augment_pair(x_i, x_j, cfg, rng)
    _write_output(aug.clip, _sidecar(aug.provenance, cfg), out_dir, clip_id)
    return "augmented"


def augment_batch(
    manifest: DatasetManifest,
    cfg: AugConfig,
    out_dir: str | Path,
    workers: int = 1,
) -> BatchReport:
    """Augment every manifest clip into out_dir (RVT1 + .meta.json sidecar).

    Per-clip failures are recorded in the report, never fatal. Output bytes
    are a pure function of (manifest, cfg): worker count only changes wall
    time.
    """
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = BatchReport()

    def run(clip_id: str) -> tuple[str, str]:
        try:
            return clip_id, _augment_one(manifest, clip_id, cfg, out)
        except (AugmentationError, OSError) as e:
            return clip_id, f"failed: {type(e).__name__}: {e}"

    ids = [e.id for e in manifest.entries]
    if workers == 1:
        results = [run(i) for i in ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, ids))
    for clip_id, status in results:
        if status == "augmented":
            report.augmented += 1
        elif status == "skipped":
            report.skipped += 1
        else:
            report.failed += 1
            report.failures.append({"id": clip_id, "error": status.removeprefix("failed: ")})
    return report
