"""Spatiotemporal replacement masks under a fixed coverage budget.

Three mask families share one budget rule:

    A  one random rectangle per frame, area round(r * H * W), position
       independent per frame (motion weights unused)
    B  an independent weighted patch set per frame, each of size k
    C  a single weighted patch set shared by all frames (tube mask)

Patch sets are drawn by weighted sampling without replacement via the
exponential-key method: each cell gets key = -ln(1 - u) / w for one uniform
u, zero-weight cells get +inf, and the k smallest keys win. This matches
successive weighted draws exactly and makes the budget-k selection a subset
of the budget-(k+1) selection for a shared random stream.

Random-stream consumption is part of the contract (oracles replay it): one
uniform per grid cell in row-major order per patch draw, and for rectangles
two bounded integers (top, then left) per frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InsufficientPositiveWeightError, ShapeMismatchError
from .motion import PatchMotion, WeightGrid

STRATEGY_RECT = "A"
STRATEGY_RANDOM_PATCHES = "B"
STRATEGY_TUBE = "C"


@dataclass(frozen=True, eq=False)
class PatchIndexSet:
    """k distinct (row, col) grid coordinates picked by one budget draw."""

    indices: frozenset
    k: int

    def __post_init__(self):
        if len(self.indices) != self.k:
            raise ValueError(f"expected {self.k} distinct patches, got {len(self.indices)}")


@dataclass(frozen=True, eq=False)
class TubeMask:
    """One H x W boolean mask shared by all T frames (true = replaced)."""

    spatial: np.ndarray
    t: int

    def as_mask4d(self) -> "Mask4D":
        frames = np.repeat(self.spatial[None, :, :], self.t, axis=0)
        return Mask4D(frames=frames, strategy=STRATEGY_TUBE)


@dataclass(frozen=True, eq=False)
class Mask4D:
    """A T x H x W boolean mask plus the strategy that produced it."""

    frames: np.ndarray
    strategy: str

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.frames.shape


def budget_patches(r: float, n_patches: int) -> int:
    """Quantize a coverage ratio into a patch count.

    k = round-half-up(r * n_patches), clamped to [1, n_patches] for r > 0;
    exactly 0 only when r = 0, so any positive budget replaces something.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"coverage ratio must be in [0, 1], got {r}")
    if n_patches < 1:
        raise ValueError(f"n_patches must be positive, got {n_patches}")
    if r == 0.0:
        return 0
    k = math.floor(r * n_patches + 0.5)
    return min(max(k, 1), n_patches)


def sample_patches(weights: WeightGrid, k: int, rng: np.random.Generator) -> PatchIndexSet:
    """Draw k distinct patches by weight, without replacement.

    Consumes one uniform per grid cell (row-major) and keeps the k smallest
    exponential keys; ties break toward the lower flat index. Zero-weight
    cells are never selected. Raises InsufficientPositiveWeightError when k
    exceeds the number of positive-weight cells; callers then retry with
    uniform_weights over the full grid.
    """
    w = weights.weights
    g_h, g_w = w.shape
    n = w.size
    if k < 0 or k > n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    if k == 0:
        return PatchIndexSet(indices=frozenset(), k=0)
    positive = w > 0
    n_positive = int(positive.sum())
    if k > n_positive:
        raise InsufficientPositiveWeightError(
            f"requested {k} patches but only {n_positive} have positive weight"
        )
    u = rng.random(w.shape)
    keys = np.full(w.shape, np.inf)
    keys[positive] = -np.log1p(-u[positive]) / w[positive]
    order = np.argsort(keys, axis=None, kind="stable")
    chosen = order[:k]
    indices = frozenset((int(i) // g_w, int(i) % g_w) for i in chosen)
    return PatchIndexSet(indices=indices, k=k)


def _patch_extents(length: int, b0: int) -> np.ndarray:
    starts = np.arange(0, length, b0)
    return np.minimum(b0, length - starts)


def _footprint_mask(indices, row_sizes: np.ndarray, col_sizes: np.ndarray) -> np.ndarray:
    """Rasterize selected grid cells onto their pixel footprints."""
    row_off = np.concatenate(([0], np.cumsum(row_sizes)))
    col_off = np.concatenate(([0], np.cumsum(col_sizes)))
    spatial = np.zeros((int(row_off[-1]), int(col_off[-1])), dtype=bool)
    for i, j in sorted(indices):
        spatial[row_off[i]:row_off[i + 1], col_off[j]:col_off[j + 1]] = True
    return spatial


def build_tube_mask(patches: PatchIndexSet, pm: PatchMotion, h: int, w: int, t: int) -> TubeMask:
    """Expand selected patches into one spatial mask shared by all frames."""
    if pm.height != h or pm.width != w:
        raise ShapeMismatchError(
            f"patch grid covers {pm.height}x{pm.width}, clip is {h}x{w}"
        )
    for i, j in patches.indices:
        if not (0 <= i < pm.g_h and 0 <= j < pm.g_w):
            raise ValueError(f"patch ({i}, {j}) outside the {pm.g_h}x{pm.g_w} grid")
    spatial = _footprint_mask(patches.indices, pm.row_sizes, pm.col_sizes)
    return TubeMask(spatial=spatial, t=t)


@lru_cache(maxsize=256)
def _rect_dims(target: int, h: int, w: int) -> tuple[int, int]:
    """Pick rectangle sides for a target pixel area inside an h x w frame.

    Prefers an exact-area rectangle closest to the frame's aspect ratio;
    when no integer rectangle of that exact area fits, falls back to the
    nearest achievable area (aspect closeness as tie-break).
    """
    if target <= 0:
        return (0, 0)
    if target >= h * w:
        return (h, w)
    best = None
    for rh in range(1, h + 1):
        for rw_f in {target // rh, -(-target // rh)}:  # floor and ceil of target/rh
            rw = min(max(rw_f, 1), w)
            area_err = abs(rh * rw - target)
            aspect_err = abs(rh * w - rw * h)
            cand = (area_err, aspect_err, rh, rw)
            if best is None or cand < best:
                best = cand
    return (best[2], best[3])


def build_mask_variant(
    strategy: str,
    weights: WeightGrid | None,
    r: float,
    b0: int,
    h: int,
    w: int,
    t: int,
    rng: np.random.Generator,
) -> Mask4D:
    """Build a budgeted mask for one of the three strategies.

    Strategies B and C need selection weights matching the ceil(h/b0) x
    ceil(w/b0) grid; strategy A ignores them. All strategies honor the same
    coverage budget r.
    """
    if strategy == STRATEGY_RECT:
        return _build_rect_mask(r, h, w, t, rng)
    if strategy not in (STRATEGY_RANDOM_PATCHES, STRATEGY_TUBE):
        raise ValueError(f"unknown mask strategy {strategy!r}")
    if weights is None:
        raise ValueError(f"strategy {strategy} needs selection weights")
    row_sizes = _patch_extents(h, b0)
    col_sizes = _patch_extents(w, b0)
    if weights.shape != (len(row_sizes), len(col_sizes)):
        raise ShapeMismatchError(
            f"weight grid {weights.shape} does not match the "
            f"{len(row_sizes)}x{len(col_sizes)} patch grid for b0={b0}"
        )
    n = weights.weights.size
    k = budget_patches(r, n)
    if k == 0:
        return Mask4D(frames=np.zeros((t, h, w), dtype=bool), strategy=strategy)
    if strategy == STRATEGY_TUBE:
        patches = _sample_with_fallback(weights, k, rng)
        spatial = _footprint_mask(patches.indices, row_sizes, col_sizes)
        return TubeMask(spatial=spatial, t=t).as_mask4d()
    frames = np.zeros((t, h, w), dtype=bool)
    for ti in range(t):
        patches = _sample_with_fallback(weights, k, rng)
        frames[ti] = _footprint_mask(patches.indices, row_sizes, col_sizes)
    return Mask4D(frames=frames, strategy=STRATEGY_RANDOM_PATCHES)


def _sample_with_fallback(weights: WeightGrid, k: int, rng: np.random.Generator) -> PatchIndexSet:
    try:
        return sample_patches(weights, k, rng)
    except InsufficientPositiveWeightError:
        uniform = WeightGrid(weights=np.ones_like(weights.weights))
        return sample_patches(uniform, k, rng)


def _build_rect_mask(r: float, h: int, w: int, t: int, rng: np.random.Generator) -> Mask4D:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"coverage ratio must be in [0, 1], got {r}")
    target = math.floor(r * h * w + 0.5)
    if r > 0:
        target = max(target, 1)
    rh, rw = _rect_dims(target, h, w)
    frames = np.zeros((t, h, w), dtype=bool)
    if rh == 0:
        return Mask4D(frames=frames, strategy=STRATEGY_RECT)
    for ti in range(t):
        top = int(rng.integers(0, h - rh + 1))
        left = int(rng.integers(0, w - rw + 1))
        frames[ti, top:top + rh, left:left + rw] = True
    return Mask4D(frames=frames, strategy=STRATEGY_RECT)


def coverage_ratio(mask: Mask4D | TubeMask) -> float:
    """Realized coverage: the exact mean of the boolean mask volume."""
    if isinstance(mask, TubeMask):
        return float(mask.spatial.mean())
    return float(mask.frames.mean())


def save_mask_png(mask: Mask4D | TubeMask, path) -> list:
    """Export a mask as 8-bit grayscale PNG (0 = keep, 255 = replace).

    A tube mask writes a single image at the given path; a Mask4D writes
    one image per frame into the given directory. Returns the paths written.
    """
    from pathlib import Path

    from PIL import Image

    def write(spatial: np.ndarray, target: Path) -> Path:
        Image.fromarray(np.where(spatial, 255, 0).astype(np.uint8), mode="L").save(target)
        return target

    p = Path(path)
    if isinstance(mask, TubeMask):
        return [write(mask.spatial, p)]
    p.mkdir(parents=True, exist_ok=True)
    return [write(mask.frames[t], p / f"mask_{t:05d}.png") for t in range(mask.frames.shape[0])]
