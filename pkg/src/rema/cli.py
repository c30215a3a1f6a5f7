"""Command-line surface: augment, batch, inspect, validate, bench.

Exit codes: 0 success, 1 check/validation failure, 2 usage error, 3 I/O
error. The REMA_SEED environment variable, when set, overrides --seed for
every subcommand. batch, validate, and bench print exactly one JSON
document on stdout.

Default hyperparameters (r=0.3, b0=16, T=16, tube strategy) are mid-range
engineering choices, not published values.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import validation
from .errors import (
    AugmentationError,
    BadHeaderError,
    DuplicateClipIdError,
    InconsistentFrameDimensionsError,
    IoFailure,
    MalformedLineError,
    MissingPathError,
    ShapeMismatchError,
    SingleFrameClipError,
    UnsupportedChannelCountError,
)
from .masking import STRATEGY_TUBE, TubeMask, build_mask_variant, save_mask_png
from .mixing import AugConfig, augment_batch, augment_pair, derive_seed, mix
from .motion import motion_map, normalize_patch_motion, pool_to_patches, selection_weights
from .video_io import VideoClip, load_clip, load_manifest, write_clip

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3

_IO_ERRORS = (
    MissingPathError,
    IoFailure,
    BadHeaderError,
    InconsistentFrameDimensionsError,
    MalformedLineError,
    DuplicateClipIdError,
    UnsupportedChannelCountError,
    OSError,
)

STRATEGY_CHOICES = ["tube", "rect", "random", "mask-only", "mixup", "A", "B", "C"]
_STRATEGY_ALIASES = {
    "tube": "C",
    "rect": "A",
    "random": "B",
    "mask-only": "mask_only",
    "A": "A",
    "B": "B",
    "C": "C",
    "mixup": "mixup",
}


def _canonical_strategy(name: str) -> str:
    return _STRATEGY_ALIASES[name]


def _resolve_seed(seed: int) -> int:
    """REMA_SEED overrides the flag when set."""
    env = os.environ.get("REMA_SEED")
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError:
        raise click.UsageError(f"REMA_SEED must be an integer, got {env!r}")


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Translate engine errors into the documented exit codes."""
    try:
        return fn()
    except click.ClickException:
        raise
    except _IO_ERRORS as e:
        _fail(str(e), EXIT_IO)
    except (SingleFrameClipError, ShapeMismatchError, ValueError) as e:
        _fail(str(e), EXIT_USAGE)
    except AugmentationError as e:
        _fail(str(e), EXIT_USAGE)


def _sidecar_path(out: Path) -> Path:
    if out.suffix:
        return out.with_suffix(".meta.json")
    return Path(str(out) + ".meta.json")


def _clip_label(path: Path, flag: str | None) -> str | None:
    """Label resolution: explicit flag, then a meta.json sidecar, then none."""
    if flag is not None:
        return flag
    candidates = [_sidecar_path(path), Path(str(path) + ".meta.json")]
    if path.is_dir():
        candidates.insert(0, path / "meta.json")
    for c in candidates:
        if c.is_file():
            try:
                meta = json.loads(c.read_text())
            except (OSError, json.JSONDecodeError):
                continue
            if isinstance(meta, dict) and isinstance(meta.get("label"), str):
                return meta["label"]
    return None


def _hyperparam_options(fn):
    fn = click.option("--frames", default=16, show_default=True, help="Output frame count T.")(fn)
    fn = click.option("--ratio", default=0.3, show_default=True, help="Coverage ratio r in [0, 1].")(fn)
    fn = click.option("--block", default=16, show_default=True, help="Patch edge b0 in pixels.")(fn)
    fn = click.option(
        "--strategy",
        default="tube",
        show_default=True,
        type=click.Choice(STRATEGY_CHOICES),
        help="Mask strategy (tube=C, rect=A, random=B), mask-only, or mixup.",
    )(fn)
    fn = click.option("--fill", default=0.0, show_default=True, help="Fill value for mask-only.")(fn)
    fn = click.option(
        "--mixup-lambda", default=0.5, show_default=True, help="Interpolation weight for mixup."
    )(fn)
    fn = click.option("--seed", default=42, show_default=True, help="Random seed (REMA_SEED overrides).")(fn)
    return fn


def _build_config(frames, ratio, block, strategy, fill, mixup_lambda, seed) -> AugConfig:
    try:
        return AugConfig(
            r=ratio,
            b0=block,
            t=frames,
            strategy=_canonical_strategy(strategy),
            fill=fill,
            mixup_lambda=mixup_lambda,
            seed=_resolve_seed(seed),
        )
    except ValueError as e:
        raise click.UsageError(str(e))


@click.group()
def main():
    """Motion-guided, budget-controlled intra-class video mixing."""


@main.command()
@click.option("--clip-a", required=True, type=click.Path(path_type=Path), help="Clip to augment.")
@click.option("--clip-b", required=True, type=click.Path(path_type=Path), help="Same-class partner clip.")
@click.option("--out", required=True, type=click.Path(path_type=Path), help="Output clip path.")
@click.option("--label-a", default=None, help="Label of clip-a (else read from a sidecar).")
@click.option("--label-b", default=None, help="Label of clip-b (else read from a sidecar).")
@click.option(
    "--format",
    "out_format",
    default="raw",
    show_default=True,
    type=click.Choice(["raw", "frames"]),
    help="Output format: RVT1 raw tensor or a PNG frame directory.",
)
@_hyperparam_options
def augment(clip_a, clip_b, out, label_a, label_b, out_format,
            frames, ratio, block, strategy, fill, mixup_lambda, seed):
    """Augment one clip with one partner and print the realized coverage."""
    cfg = _build_config(frames, ratio, block, strategy, fill, mixup_lambda, seed)

    def run():
        la = _clip_label(clip_a, label_a)
        lb = _clip_label(clip_b, label_b)
        if la != lb:
            raise click.UsageError(f"labels differ: clip-a is {la!r}, clip-b is {lb!r}")
        a = load_clip(clip_a, label=la)
        b = load_clip(clip_b, label=lb)
        rng = np.random.default_rng(cfg.seed)
        aug = augment_pair(a, b, cfg, rng)
        write_clip(aug.clip, out, format="raw_tensor" if out_format == "raw" else "frame_dir")
        meta = {
            "source_id": aug.provenance.source_id,
            "partner_id": aug.provenance.partner_id,
            "strategy": aug.provenance.strategy,
            "seed": aug.provenance.seed,
            "r": cfg.r,
            "b0": cfg.b0,
            "T": cfg.t,
            "realized_coverage": aug.provenance.realized_coverage,
        }
        _sidecar_path(out).write_text(json.dumps(meta, sort_keys=True) + "\n")
        click.echo(str(aug.provenance.realized_coverage))

    _guard(run)


@main.command()
@click.option("--manifest", required=True, type=click.Path(path_type=Path), help="JSONL manifest path.")
@click.option("--out", required=True, type=click.Path(path_type=Path), help="Output directory.")
@click.option("--workers", default=1, show_default=True, help="Parallel workers.")
@_hyperparam_options
def batch(manifest, out, workers, frames, ratio, block, strategy, fill, mixup_lambda, seed):
    """Augment every clip in a manifest; prints a JSON report."""
    cfg = _build_config(frames, ratio, block, strategy, fill, mixup_lambda, seed)
    if workers < 1:
        raise click.UsageError(f"workers must be positive, got {workers}")

    def run():
        m = load_manifest(manifest)
        report = augment_batch(m, cfg, out, workers=workers)
        click.echo(json.dumps(report.as_dict()))
        if report.failed > 0:
            sys.exit(EXIT_CHECK_FAILED)

    _guard(run)


def _to_gray_png(values: np.ndarray, path: Path, minmax: bool = False) -> None:
    v = values.astype(np.float64)
    if minmax:
        lo, hi = v.min(), v.max()
        v = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    pixels = np.clip(np.rint(v * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels, mode="L").save(path)


def _upsample_grid(grid: np.ndarray, row_sizes: np.ndarray, col_sizes: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(grid, row_sizes, axis=0), col_sizes, axis=1)


@main.command()
@click.option("--clip", "clip_path", required=True, type=click.Path(path_type=Path), help="Clip to inspect.")
@click.option("--out", required=True, type=click.Path(path_type=Path), help="Output directory for PNGs.")
@click.option("--block", default=16, show_default=True, help="Patch edge b0 in pixels.")
@click.option("--ratio", default=0.3, show_default=True, help="Coverage ratio for the sampled mask.")
@click.option("--seed", default=42, show_default=True, help="Random seed (REMA_SEED overrides).")
def inspect(clip_path, out, block, ratio, seed):
    """Export motion map, patch motion, weights, and a sampled tube mask as PNGs."""
    seed = _resolve_seed(seed)

    def run():
        clip = load_clip(clip_path)
        out.mkdir(parents=True, exist_ok=True)
        m = motion_map(clip)
        pm = normalize_patch_motion(pool_to_patches(m, block))
        weights = selection_weights(pm)
        rng = np.random.default_rng(seed)
        mask = build_mask_variant(
            STRATEGY_TUBE, weights, ratio, block, clip.height, clip.width, clip.t, rng
        )
        _to_gray_png(m.values, out / "motion.png", minmax=True)
        _to_gray_png(_upsample_grid(pm.grid, pm.row_sizes, pm.col_sizes), out / "patch_motion.png")
        _to_gray_png(
            _upsample_grid(weights.weights, pm.row_sizes, pm.col_sizes), out / "weights.png"
        )
        save_mask_png(TubeMask(spatial=mask.frames[0], t=clip.t), out / "tube_mask.png")

    _guard(run)


@main.command()
@click.option(
    "--suite",
    default="all",
    show_default=True,
    type=click.Choice(["coverage", "sampling", "tube", "drift", "all"]),
    help="Which checks to run.",
)
@click.option("--trials", default=0, show_default=True, help="Trials per check (0 = per-check default).")
@click.option("--grid", "grid_spec", default=None, help='Sweep spec, e.g. "r=0.1,0.3;b0=4,8;strategy=A,B,C".')
@click.option("--seed", default=42, show_default=True, help="Random seed (REMA_SEED overrides).")
@click.option("--report", "report_dir", default=None, type=click.Path(path_type=Path),
              help="Directory for JSON reports and the CSV summary.")
def validate(suite, trials, grid_spec, seed, report_dir):
    """Run the statistical validation harness; prints a JSON summary."""
    seed = _resolve_seed(seed)
    checks = ["coverage", "sampling", "tube", "drift"] if suite == "all" else [suite]
    base_cfg = AugConfig(r=0.3, b0=8, t=8, strategy=STRATEGY_TUBE, seed=seed)

    if grid_spec is not None:
        try:
            grid = validation.parse_grid_spec(grid_spec)
        except ValueError as e:
            raise click.UsageError(f"bad grid spec: {e}")
    else:
        grid = None

    def run():
        if grid is not None:
            records = validation.grid_runner(
                grid, checks, base_cfg, n_trials=trials or None, out_dir=report_dir
            )
        else:
            records = []
            for name in checks:
                n = trials or validation.DEFAULT_TRIALS[name]
                rng = np.random.default_rng(derive_seed(seed, f"validate:{name}"))
                report = validation.run_check(name, base_cfg, n, rng)
                records.append({
                    "r": base_cfg.r, "b0": base_cfg.b0, "strategy": base_cfg.strategy,
                    "check": name, "report": report,
                })
            if report_dir is not None:
                report_dir.mkdir(parents=True, exist_ok=True)
                for rec in records:
                    payload = rec["report"].as_dict()
                    (report_dir / f"{rec['check']}.json").write_text(
                        json.dumps(payload, indent=2) + "\n"
                    )
                validation.write_summary_csv(records, report_dir / "summary.csv")
        all_pass = all(rec["report"].passed for rec in records)
        doc = {
            "checks": [
                {k: v for k, v in rec.items() if k != "report"} | rec["report"].as_dict()
                for rec in records
            ],
            "all_pass": all_pass,
        }
        click.echo(json.dumps(doc))
        if not all_pass:
            sys.exit(EXIT_CHECK_FAILED)

    _guard(run)


@main.command()
@click.option("--frames", default=16, show_default=True, help="Frames per synthetic clip.")
@click.option("--size", default=224, show_default=True, help="Square frame edge in pixels.")
@click.option("--clips", default=500, show_default=True, help="Number of synthetic pairs to time.")
@click.option("--workers", default=1, show_default=True, help="Parallel workers for the end-to-end pass.")
@click.option("--seed", default=42, show_default=True, help="Random seed (REMA_SEED overrides).")
def bench(frames, size, clips, workers, seed):
    """Time the pipeline on in-memory synthetic pairs; prints a JSON report."""
    if frames < 2 or size < 1 or clips < 1 or workers < 1:
        raise click.UsageError("need --frames >= 2, --size >= 1, --clips >= 1, --workers >= 1")
    seed = _resolve_seed(seed)
    cfg = AugConfig(r=0.3, b0=min(16, size), t=frames, strategy=STRATEGY_TUBE, seed=seed)
    rng = np.random.default_rng(seed)

    def synth() -> VideoClip:
        return VideoClip(frames=rng.random((frames, size, size, 3)).astype(np.float32), label="bench")

    pairs = [(synth(), synth()) for _ in range(clips)]

    stages = {"motion": 0.0, "pooling": 0.0, "sampling": 0.0, "mixing": 0.0}
    for a, b in pairs:
        t0 = time.perf_counter()
        m = motion_map(a)
        t1 = time.perf_counter()
        weights = selection_weights(normalize_patch_motion(pool_to_patches(m, cfg.b0)))
        t2 = time.perf_counter()
        mask = build_mask_variant(
            STRATEGY_TUBE, weights, cfg.r, cfg.b0, a.height, a.width, a.t, rng
        )
        t3 = time.perf_counter()
        mix(a, b, mask)
        t4 = time.perf_counter()
        stages["motion"] += t1 - t0
        stages["pooling"] += t2 - t1
        stages["sampling"] += t3 - t2
        stages["mixing"] += t4 - t3

    def one_pair(pair):
        a, b = pair
        return augment_pair(a, b, cfg, np.random.default_rng(cfg.seed))

    t0 = time.perf_counter()
    if workers == 1:
        for pair in pairs:
            one_pair(pair)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one_pair, pairs))
    elapsed = time.perf_counter() - t0

    doc = {
        "clips": clips,
        "frames": frames,
        "size": size,
        "workers": workers,
        "stage_ms_per_clip": {k: 1000.0 * v / clips for k, v in stages.items()},
        "end_to_end_seconds": elapsed,
        "clips_per_second": clips / elapsed if elapsed > 0 else float("inf"),
    }
    click.echo(json.dumps(doc))


if __name__ == "__main__":
    main()
