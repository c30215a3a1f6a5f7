"""In-memory array bindings for the augmentation engine.

Training data loaders hand in T x H x W x C float32 arrays in [0, 1] and
get augmented arrays back, no file round-trips. Outputs are bit-exact with
the engine (and therefore with the CLI on RVT1 files) for the same seed.

The layout contract is contiguous row-major float32. The `layout` flag
controls what happens to nonconforming inputs: "copy" (default) converts
them, counting the conversions in a diagnostics counter, and "reject"
raises instead. Engine failures surface as plain ValueError carrying the
engine's error name and message.

Calls are reentrant: each call derives its own random stream and nothing
shared is mutated except the diagnostics counter.
"""

from __future__ import annotations

import threading
from dataclasses import fields
from typing import Sequence

import numpy as np

from rema import (
    AugConfig,
    AugmentationError,
    SingletonClassError,
    VideoClip,
    augment_pair,
    derive_seed,
    sample_partner,
)
from rema.video_io import DatasetManifest, ManifestEntry

__version__ = "0.1.0"

LAYOUT_COPY = "copy"
LAYOUT_REJECT = "reject"

_copy_count = 0
_copy_lock = threading.Lock()


def copy_count() -> int:
    """How many boundary conversions (dtype/layout copies) have happened."""
    return _copy_count


def reset_copy_count() -> None:
    global _copy_count
    with _copy_lock:
        _copy_count = 0


def engine_defaults() -> dict:
    """The engine's default configuration as a plain mapping."""
    return {f.name: f.default for f in fields(AugConfig)}


def _as_config(config: dict) -> AugConfig:
    try:
        return AugConfig(**config)
    except TypeError as e:
        raise ValueError(f"bad config: {e}") from e
    except ValueError as e:
        raise ValueError(f"bad config: {e}") from e


def _check_array(arr, name: str, layout: str) -> np.ndarray:
    if layout not in (LAYOUT_COPY, LAYOUT_REJECT):
        raise ValueError(f"layout must be 'copy' or 'reject', got {layout!r}")
    if not isinstance(arr, np.ndarray):
        raise ValueError(f"{name}: expected a numpy array, got {type(arr).__name__}")
    if arr.ndim != 4 or arr.shape[3] != 3:
        raise ValueError(f"{name}: expected a T x H x W x 3 array, got shape {arr.shape}")
    conforming = arr.dtype == np.float32 and arr.flags.c_contiguous
    if not conforming:
        if layout == LAYOUT_REJECT:
            raise ValueError(
                f"{name}: needs contiguous row-major float32 "
                f"(got dtype {arr.dtype}, contiguous={arr.flags.c_contiguous})"
            )
        global _copy_count
        with _copy_lock:
            _copy_count += 1
        arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: values must be finite")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name}: values must lie in [0, 1]")
    return arr


def _provenance_record(prov, cfg: AugConfig) -> dict:
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


def augment_pair_arrays(
    a: np.ndarray,
    b: np.ndarray,
    *,
    layout: str = LAYOUT_COPY,
    **config,
) -> tuple[np.ndarray, dict]:
    """Augment array a with partner array b; returns (array, provenance).

    Keyword arguments mirror the engine config (r, b0, t, strategy, fill,
    mixup_lambda, seed). The result equals the engine's output for the same
    seed, bit for bit.
    """
    a = _check_array(a, "a", layout)
    b = _check_array(b, "b", layout)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: a is {a.shape}, b is {b.shape}")
    cfg = _as_config(config)
    try:
        x_i = VideoClip(frames=a, id="a", label="")
        x_j = VideoClip(frames=b, id="b", label="")
        aug = augment_pair(x_i, x_j, cfg, np.random.default_rng(cfg.seed))
    except AugmentationError as e:
        raise ValueError(f"{type(e).__name__}: {e}") from e
    return aug.clip.frames, _provenance_record(aug.provenance, cfg)


def augment_dataset_arrays(
    items: Sequence[tuple[np.ndarray, str]],
    *,
    layout: str = LAYOUT_COPY,
    **config,
) -> tuple[list[np.ndarray], list[dict]]:
    """In-memory analogue of batch augmentation, keyed by list position.

    Each item is (array, label). Item i gets the random stream derived from
    (seed, str(i)), the same rule the file batch uses for clip ids, so
    results are deterministic and order-stable. Singleton labels pass
    through unmodified with a warning record.
    """
    if not items:
        raise ValueError("need at least one (array, label) item")
    arrays = []
    entries = []
    for i, (arr, label) in enumerate(items):
        if not isinstance(label, str):
            raise ValueError(f"item {i}: label must be a string, got {type(label).__name__}")
        arrays.append(_check_array(arr, f"item {i}", layout))
        entries.append(ManifestEntry(id=str(i), path="", label=label))
    cfg = _as_config(config)
    manifest = DatasetManifest.from_entries(entries)

    outputs: list[np.ndarray] = []
    warnings: list[dict] = []
    for i, arr in enumerate(arrays):
        rng = np.random.default_rng(derive_seed(cfg.seed, str(i)))
        try:
            partner_idx = int(sample_partner(manifest, str(i), rng))
        except SingletonClassError as e:
            outputs.append(arr)
            warnings.append({"index": i, "label": entries[i].label, "reason": str(e)})
            continue
        try:
            x_i = VideoClip(frames=arr, id=str(i), label=entries[i].label)
            x_j = VideoClip(frames=arrays[partner_idx], id=str(partner_idx),
                            label=entries[partner_idx].label)
            aug = augment_pair(x_i, x_j, cfg, rng)
        except AugmentationError as e:
            raise ValueError(f"{type(e).__name__}: {e}") from e
        outputs.append(aug.clip.frames)
    return outputs, warnings
