"""Statistical checks for the augmentation engine's controllability claims.

Each check pits the engine against an independent reference:

    coverage   realized mask coverage vs. the configured budget (exact for
               tube masks on divisible grids)
    sampling   empirical patch-inclusion frequencies vs. marginals computed
               by enumerating every ordered weighted draw (grids <= 6 cells)
    tube       frame-identity of tube masks, with the per-frame-random
               strategy as a negative control
    drift      class-conditional feature means before vs. after mixing on
               exchangeable synthetic classes, under a fixed analytic
               feature map

All checks are deterministic given their seed and parameters. The grid
runner sweeps (r, b0, strategy) combinations and emits one JSON report per
check per point plus a flat CSV summary.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import OracleTooLargeError
from .masking import (
    STRATEGY_RANDOM_PATCHES,
    STRATEGY_TUBE,
    budget_patches,
    build_mask_variant,
    coverage_ratio,
    sample_patches,
)
from .mixing import AugConfig, augment_pair, derive_seed
from .motion import WeightGrid
from .video_io import VideoClip

ORACLE_MAX_PATCHES = 6

PHI_GLOBAL_MEAN = "global_mean"
PHI_POOLED_8X8 = "pooled_8x8_mean"
PHI_KINDS = (PHI_GLOBAL_MEAN, PHI_POOLED_8X8)


@dataclass(frozen=True)
class FeatureMap:
    """A fixed, parameter-free linear map from clips to feature vectors.

    global_mean averages each channel over the whole clip (3 values);
    pooled_8x8_mean averages each channel over an adaptive 8x8 spatial grid
    and all frames (192 values). Linearity in pixel values is what the
    drift analysis relies on.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in PHI_KINDS:
            raise ValueError(f"unknown feature map {self.kind!r}, expected one of {PHI_KINDS}")

    @property
    def description(self) -> str:
        if self.kind == PHI_GLOBAL_MEAN:
            return "per-channel mean over all frames and pixels"
        return "per-channel mean over an 8x8 adaptive spatial grid, averaged over frames"

    def __call__(self, clip: VideoClip) -> np.ndarray:
        f = clip.frames.astype(np.float64)
        if self.kind == PHI_GLOBAL_MEAN:
            return f.mean(axis=(0, 1, 2))
        t, h, w, c = f.shape
        if h < 8 or w < 8:
            raise ValueError(f"pooled_8x8_mean needs H, W >= 8, got {h}x{w}")
        rows = [h * i // 8 for i in range(9)]
        cols = [w * j // 8 for j in range(9)]
        out = np.empty((8, 8, c))
        for i in range(8):
            for j in range(8):
                out[i, j] = f[:, rows[i]:rows[i + 1], cols[j]:cols[j + 1], :].mean(axis=(0, 1, 2))
        return out.reshape(-1)


@dataclass
class ValidationReport:
    check: str
    samples: int
    statistic: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "samples": self.samples,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "pass": self.passed,
            "details": self.details,
        }


def make_clip_generator(
    t: int, h: int, w: int, label: str = "x"
) -> Callable[[np.random.Generator], VideoClip]:
    """Uniform-noise synthetic clips for coverage/tube checks."""

    def gen(rng: np.random.Generator) -> VideoClip:
        frames = rng.random((t, h, w, 3)).astype(np.float32)
        return VideoClip(frames=frames, id="synthetic", label=label)

    return gen


def make_class_generator(
    mean: float, noise: float, t: int, h: int, w: int, label: str
) -> Callable[[np.random.Generator], VideoClip]:
    """I.i.d. clips from one class: constant mean plus bounded uniform noise.

    mean must stay at least `noise` away from both 0 and 1 so no clipping is
    needed; clipping would break the symmetry the drift analysis assumes.
    """
    if not noise <= mean <= 1.0 - noise:
        raise ValueError(f"mean {mean} +- {noise} leaves [0, 1]")

    def gen(rng: np.random.Generator) -> VideoClip:
        frames = mean + rng.uniform(-noise, noise, size=(t, h, w, 3))
        return VideoClip(frames=frames.astype(np.float32), id="synthetic", label=label)

    return gen


def check_coverage(
    cfg: AugConfig,
    n_trials: int,
    clip_gen: Callable[[np.random.Generator], VideoClip],
    rng: np.random.Generator,
    slack: float = 0.01,
) -> ValidationReport:
    """Realized coverage vs. the configured budget over n_trials pairs.

    For tube masks on divisible grids every trial must hit k / n_patches
    exactly; for every strategy the mean must sit within half a patch of r
    (plus Monte-Carlo slack).
    """
    probe = clip_gen(rng)
    h, w = probe.height, probe.width
    g_h = -(-h // cfg.b0)
    g_w = -(-w // cfg.b0)
    n_patches = g_h * g_w
    k = budget_patches(cfg.r, n_patches)
    exact_expected = cfg.strategy == STRATEGY_TUBE and h % cfg.b0 == 0 and w % cfg.b0 == 0
    exact_value = k / n_patches

    realized = np.empty(n_trials)
    exact_violations = 0
    for i in range(n_trials):
        x_i = clip_gen(rng)
        x_j = clip_gen(rng)
        aug = augment_pair(x_i, x_j, cfg, rng)
        realized[i] = aug.realized_coverage
        if exact_expected and realized[i] != exact_value:
            exact_violations += 1
        if cfg.r == 0.0 and realized[i] != 0.0:
            exact_violations += 1

    gap = abs(float(realized.mean()) - cfg.r)
    threshold = 1.0 / (2.0 * n_patches) + slack
    passed = gap <= threshold and exact_violations == 0
    return ValidationReport(
        check="coverage",
        samples=n_trials,
        statistic=gap,
        threshold=threshold,
        passed=passed,
        details={
            "strategy": cfg.strategy,
            "r": cfg.r,
            "b0": cfg.b0,
            "n_patches": n_patches,
            "k": k,
            "mean_coverage": float(realized.mean()),
            "exact_expected": exact_expected,
            "exact_violations": exact_violations,
        },
    )


def exact_marginals(weights: Sequence[float] | np.ndarray, k: int) -> np.ndarray:
    """Inclusion probability of each cell in a size-k weighted draw.

    Enumerates every ordered sequence of k distinct positive-weight cells
    with sequential renormalization, which is the distribution the
    exponential-key sampler realizes. Capped at 6 cells.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    n = w.size
    if n > ORACLE_MAX_PATCHES:
        raise OracleTooLargeError(f"oracle handles at most {ORACLE_MAX_PATCHES} cells, got {n}")
    positive = [i for i in range(n) if w[i] > 0]
    if k > len(positive):
        raise ValueError(f"k={k} exceeds the {len(positive)} positive-weight cells")
    marginals = np.zeros(n)
    for seq in itertools.permutations(positive, k):
        p = 1.0
        remaining = float(w[positive].sum())
        for i in seq:
            p *= w[i] / remaining
            remaining -= w[i]
        for i in seq:
            marginals[i] += p
    return marginals


def check_sampling_law(
    weights: WeightGrid,
    k: int,
    n_trials: int,
    rng: np.random.Generator,
) -> ValidationReport:
    """Empirical inclusion frequencies vs. the enumeration oracle.

    Each cell must land within its own 3-sigma binomial band; cells with
    marginal exactly 0 or 1 must match exactly. The statistic is the worst
    band-normalized deviation (<= 1 passes).
    """
    w = weights.weights
    expected = exact_marginals(w, k).reshape(w.shape)
    counts = np.zeros(w.shape)
    for _ in range(n_trials):
        for (i, j) in sample_patches(weights, k, rng).indices:
            counts[i, j] += 1
    empirical = counts / n_trials

    bands = 3.0 * np.sqrt(expected * (1.0 - expected) / n_trials)
    deviation = np.abs(empirical - expected)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bands > 0, deviation / bands, np.where(deviation == 0, 0.0, np.inf))
    statistic = float(ratio.max())
    return ValidationReport(
        check="sampling",
        samples=n_trials,
        statistic=statistic,
        threshold=1.0,
        passed=statistic <= 1.0,
        details={
            "k": k,
            "weights": w.reshape(-1).tolist(),
            "expected": expected.reshape(-1).tolist(),
            "empirical": empirical.reshape(-1).tolist(),
            "max_abs_deviation": float(deviation.max()),
        },
    )


def check_tube_consistency(
    cfg: AugConfig,
    n_trials: int,
    rng: np.random.Generator,
    h: int = 32,
    w: int = 32,
) -> ValidationReport:
    """Frame-identity of generated masks.

    Tube masks must never violate it; the per-frame strategy is a negative
    control expected to violate it in > 99% of trials when k < n_patches.
    """
    if cfg.strategy not in (STRATEGY_TUBE, STRATEGY_RANDOM_PATCHES):
        raise ValueError(f"tube check applies to strategies C and B, not {cfg.strategy!r}")
    g_h = -(-h // cfg.b0)
    g_w = -(-w // cfg.b0)
    violations = 0
    for _ in range(n_trials):
        weights = WeightGrid(weights=rng.random((g_h, g_w)) + 1e-9)
        mask = build_mask_variant(cfg.strategy, weights, cfg.r, cfg.b0, h, w, cfg.t, rng)
        if np.any(mask.frames != mask.frames[0]):
            violations += 1
    rate = violations / n_trials
    if cfg.strategy == STRATEGY_TUBE:
        passed = violations == 0
        threshold = 0.0
    else:
        passed = rate > 0.99
        threshold = 0.99
    return ValidationReport(
        check="tube",
        samples=n_trials,
        statistic=rate,
        threshold=threshold,
        passed=passed,
        details={"strategy": cfg.strategy, "t": cfg.t, "violations": violations},
    )


def check_class_mean_drift(
    class_gen: Callable[[np.random.Generator], VideoClip],
    cfg: AugConfig,
    phi: FeatureMap,
    n_trials: int,
    rng: np.random.Generator,
) -> ValidationReport:
    """Class-conditional feature-mean gap between raw and mixed samples.

    Uses a paired design: each trial augments a fresh intra-class pair and
    compares phi of the augmented clip against phi of its source. Passes
    when every coordinate's gap sits inside 4 * sigma / sqrt(n); a constant
    class must give a gap of exactly zero. This verifies the expectation
    property on exchangeable synthetic sources only; real datasets, where
    mask placement can correlate with content, are out of scope here.
    """
    phi_src = []
    phi_aug = []
    for _ in range(n_trials):
        x_i = class_gen(rng)
        x_j = class_gen(rng)
        aug = augment_pair(x_i, x_j, cfg, rng)
        phi_src.append(phi(x_i))
        phi_aug.append(phi(aug.clip))
    src = np.asarray(phi_src)
    out = np.asarray(phi_aug)
    gap = np.abs(out.mean(axis=0) - src.mean(axis=0))
    sigma = src.std(axis=0, ddof=1) if n_trials > 1 else np.zeros(src.shape[1])
    bands = 4.0 * sigma / math.sqrt(n_trials)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bands > 0, gap / bands, np.where(gap == 0, 0.0, np.inf))
    statistic = float(ratio.max())
    return ValidationReport(
        check="drift",
        samples=n_trials,
        statistic=statistic,
        threshold=1.0,
        passed=statistic <= 1.0,
        details={
            "phi": phi.kind,
            "strategy": cfg.strategy,
            "gap_inf_norm": float(gap.max()),
            "max_band": float(bands.max()),
        },
    )


DEFAULT_TRIALS = {"coverage": 2000, "sampling": 20000, "tube": 1000, "drift": 2000}

# 6-cell fixture used when the sampling check runs inside a parameter sweep.
_SWEEP_SAMPLING_WEIGHTS = np.array([[1.0, 0.8, 0.6], [0.4, 0.2, 0.0]])


def run_check(
    name: str,
    cfg: AugConfig,
    n_trials: int,
    rng: np.random.Generator,
    h: int = 32,
    w: int = 32,
) -> ValidationReport:
    """Run one named check at a synthetic-fixture geometry."""
    if name == "coverage":
        gen = make_clip_generator(cfg.t, h, w)
        return check_coverage(cfg, n_trials, gen, rng)
    if name == "sampling":
        weights = WeightGrid(weights=_SWEEP_SAMPLING_WEIGHTS.copy())
        n_positive = int((_SWEEP_SAMPLING_WEIGHTS > 0).sum())
        k = min(budget_patches(cfg.r, _SWEEP_SAMPLING_WEIGHTS.size), n_positive)
        return check_sampling_law(weights, k, n_trials, rng)
    if name == "tube":
        positive = replace(cfg, strategy=STRATEGY_TUBE)
        report = check_tube_consistency(positive, n_trials, rng, h=h, w=w)
        n_patches = (-(-h // cfg.b0)) * (-(-w // cfg.b0))
        k = budget_patches(cfg.r, n_patches)
        if 0 < k < n_patches and cfg.t > 1:
            control = replace(cfg, strategy=STRATEGY_RANDOM_PATCHES)
            control_report = check_tube_consistency(control, n_trials, rng, h=h, w=w)
            report.details["negative_control"] = control_report.as_dict()
            report.passed = report.passed and control_report.passed
        return report
    if name == "drift":
        gen = make_class_generator(0.35, 0.05, cfg.t, h, w, label="a")
        phi = FeatureMap(PHI_GLOBAL_MEAN)
        return check_class_mean_drift(gen, cfg, phi, n_trials, rng)
    raise ValueError(f"unknown check {name!r}")


def parse_grid_spec(spec: str) -> dict[str, list]:
    """Parse "r=0.1,0.3;b0=4,8;strategy=A,B,C" into a sweep dict."""
    grid: dict[str, list] = {}
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"malformed grid segment {part!r} (expected key=v1,v2,...)")
        key, _, values = part.partition("=")
        key = key.strip()
        items = [v.strip() for v in values.split(",") if v.strip()]
        if not items:
            raise ValueError(f"grid key {key!r} lists no values")
        if key == "r":
            grid[key] = [float(v) for v in items]
        elif key == "b0":
            grid[key] = [int(v) for v in items]
        elif key == "strategy":
            for v in items:
                if v not in ("A", "B", "C"):
                    raise ValueError(f"grid strategy must be A, B, or C, got {v!r}")
            grid[key] = items
        else:
            raise ValueError(f"unknown grid key {key!r} (use r, b0, strategy)")
    if not grid:
        raise ValueError("empty grid spec")
    return grid


def grid_runner(
    grid: dict[str, list],
    checks: Sequence[str],
    base_cfg: AugConfig,
    n_trials: int | None = None,
    out_dir: str | Path | None = None,
    h: int = 32,
    w: int = 32,
) -> list[dict]:
    """Run the requested checks at every grid point.

    Returns one record per (point, check) with the point's parameters and
    the report; per-point failures are recorded, not raised. When out_dir
    is set, writes one JSON file per point and a summary.csv.
    """
    keys = list(grid.keys())
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    records = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    for point in points:
        cfg = replace(base_cfg, **point)
        point_reports = []
        for name in checks:
            trials = n_trials if n_trials else DEFAULT_TRIALS[name]
            seed = derive_seed(base_cfg.seed, f"grid:{sorted(point.items())}:{name}")
            rng = np.random.default_rng(seed)
            try:
                report = run_check(name, cfg, trials, rng, h=h, w=w)
            except Exception as e:  # per-point failures are data, not crashes
                report = ValidationReport(
                    check=name,
                    samples=0,
                    statistic=float("nan"),
                    threshold=float("nan"),
                    passed=False,
                    details={"error": f"{type(e).__name__}: {e}"},
                )
            record = {**point, "check": name, "report": report}
            records.append(record)
            point_reports.append(report)
        if out is not None:
            tag = "_".join(f"{k}-{point[k]}" for k in keys)
            payload = [r.as_dict() for r in point_reports]
            (out / f"point_{tag}.json").write_text(json.dumps(payload, indent=2) + "\n")

    if out is not None:
        write_summary_csv(records, out / "summary.csv")
    return records


def write_summary_csv(records: list[dict], path: str | Path) -> None:
    """Flat CSV summary: check, r, b0, strategy, statistic, threshold, pass."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["check", "r", "b0", "strategy", "statistic", "threshold", "pass"])
        for rec in records:
            rep: ValidationReport = rec["report"]
            writer.writerow([
                rep.check,
                rec.get("r", ""),
                rec.get("b0", ""),
                rec.get("strategy", rep.details.get("strategy", "")),
                rep.statistic,
                rep.threshold,
                rep.passed,
            ])
