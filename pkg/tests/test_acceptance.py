"""Acceptance suite: one test per release criterion, at stated tolerances.

Each test prints a PASS/FAIL line (visible with pytest -s) and asserts.
Statistical criteria use fixed seeds, so a green run is reproducible.

Run with:  pytest tests/test_acceptance.py -v
"""

import hashlib
import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from rema import (
    AugConfig,
    Mask4D,
    VideoClip,
    WeightGrid,
    augment_batch,
    augment_pair,
    load_manifest,
    mix,
    sample_patches,
)
from rema.cli import main as cli_main
from rema.validation import (
    FeatureMap,
    check_class_mean_drift,
    check_coverage,
    check_tube_consistency,
    exact_marginals,
    make_class_generator,
    make_clip_generator,
)

from conftest import constant_clip, random_clip, write_dataset
from oracles import motion_map_oracle, straight_line_tube_augment


def _report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"{status}: {name}{suffix}")
    assert ok, f"{name}{suffix}"


class TestAcceptance:
    def test_budget_exactness(self):
        """Strategy C hits k/n exactly every trial; all strategies hold the mean band."""
        n_trials = 10_000
        gen = make_clip_generator(4, 16, 16)
        details = []
        ok = True
        for strategy in ("C", "A", "B"):
            cfg = AugConfig(r=0.3, b0=4, t=4, strategy=strategy, seed=17)
            rng = np.random.default_rng(cfg.seed)
            report = check_coverage(cfg, n_trials, gen, rng, slack=0.01)
            ok = ok and report.passed
            if strategy == "C":
                ok = ok and report.details["exact_expected"]
                ok = ok and report.details["exact_violations"] == 0
            details.append(f"{strategy}: mean={report.details['mean_coverage']:.4f}")
        _report("budget exactness over 10,000 trials per strategy", ok, "; ".join(details))

    def test_sampling_law(self):
        """Empirical inclusion frequencies match enumeration marginals at 3 sigma."""
        n_trials = 200_000
        fixtures = [
            (np.array([[1.0, 1.0]]), 1),
            (np.array([[1.0, 0.0]]), 1),
            (np.array([[1.0, 2 / 3], [1 / 3, 0.0]]), 2),
            (np.array([[1.0, 0.8, 0.6], [0.4, 0.2, 0.0]]), 3),
            (np.ones((2, 3)), 2),
        ]
        ok = True
        worst = 0.0
        for fixture_idx, (w, k) in enumerate(fixtures):
            expected = exact_marginals(w, k).reshape(w.shape)
            rng = np.random.default_rng(1000 + fixture_idx)
            counts = np.zeros(w.shape)
            for _ in range(n_trials):
                for (i, j) in sample_patches(WeightGrid(weights=w), k, rng).indices:
                    counts[i, j] += 1
            empirical = counts / n_trials
            bands = 3.0 * np.sqrt(expected * (1.0 - expected) / n_trials)
            deviation = np.abs(empirical - expected)
            ok = ok and bool(np.all(deviation <= bands))
            zero_cells = w == 0
            ok = ok and counts[zero_cells].sum() == 0
            worst = max(worst, float(deviation.max()))
        _report(
            "sampling law on 5 fixture grids x 200,000 draws",
            ok,
            f"max abs deviation {worst:.5f}",
        )

    def test_tube_consistency(self):
        """1,000 tube masks are frame-identical for T in {2, 8, 16}; B control violates."""
        ok = True
        for t in (2, 8, 16):
            cfg = AugConfig(r=0.3, b0=4, t=t, strategy="C", seed=3)
            report = check_tube_consistency(cfg, 1000, np.random.default_rng(cfg.seed), h=16, w=16)
            ok = ok and report.passed and report.statistic == 0.0
        control = AugConfig(r=0.3, b0=4, t=16, strategy="B", seed=3)
        control_report = check_tube_consistency(control, 1000, np.random.default_rng(4), h=16, w=16)
        ok = ok and control_report.statistic > 0.99
        _report(
            "tube consistency, 1,000 masks per T",
            ok,
            f"B-control violation rate {control_report.statistic:.3f}",
        )

    def test_motion_map_oracle(self):
        """Engine motion map equals the scalar triple-loop oracle within 1e-6."""
        from rema import motion_map

        rng = np.random.default_rng(99)
        worst = 0.0
        for _ in range(100):
            t = int(rng.integers(2, 9))
            h = int(rng.integers(1, 17))
            w = int(rng.integers(1, 17))
            clip = VideoClip(frames=rng.random((t, h, w, 3)).astype(np.float32))
            expected = motion_map_oracle(clip.frames)
            got = motion_map(clip).values
            worst = max(worst, float(np.max(np.abs(got - expected))))
        _report("motion map vs triple-loop oracle on 100 clips", worst <= 1e-6,
                f"max abs error {worst:.2e}")

    def test_class_mean_stability(self):
        """Mean feature gap within 4 sigma / sqrt(n) on exchangeable classes."""
        n_trials = 5_000
        phis = [FeatureMap("global_mean"), FeatureMap("pooled_8x8_mean")]
        classes = [("a", 0.30), ("b", 0.70)]
        ok = True
        worst_ratio = 0.0
        for strategy in ("A", "B", "C"):
            for label, mean in classes:
                gen = make_class_generator(mean, 0.05, 4, 16, 16, label)
                cfg = AugConfig(r=0.3, b0=4, t=4, strategy=strategy, seed=11)
                rng = np.random.default_rng(hashlib.blake2b(
                    f"{strategy}:{label}".encode(), digest_size=8).digest()[0] + 50)
                src = {p.kind: [] for p in phis}
                aug_feats = {p.kind: [] for p in phis}
                for _ in range(n_trials):
                    x_i = gen(rng)
                    x_j = gen(rng)
                    aug = augment_pair(x_i, x_j, cfg, rng)
                    for phi in phis:
                        src[phi.kind].append(phi(x_i))
                        aug_feats[phi.kind].append(phi(aug.clip))
                for phi in phis:
                    s = np.asarray(src[phi.kind])
                    o = np.asarray(aug_feats[phi.kind])
                    gap = np.abs(o.mean(axis=0) - s.mean(axis=0))
                    band = 4.0 * s.std(axis=0, ddof=1) / math.sqrt(n_trials)
                    ok = ok and bool(np.all(gap <= band))
                    worst_ratio = max(worst_ratio, float((gap / band).max()))
        # constant-clip classes: the gap must be exactly zero
        for strategy in ("A", "B", "C"):
            cfg = AugConfig(r=0.3, b0=4, t=4, strategy=strategy, seed=12)
            gen = lambda r: constant_clip(0.4, t=4, h=16, w=16, label="const")
            for phi in phis:
                report = check_class_mean_drift(gen, cfg, phi, 200, np.random.default_rng(5))
                ok = ok and report.passed and report.details["gap_inf_norm"] == 0.0
        _report(
            "class-mean stability at 5,000 trials, both feature maps, A/B/C",
            ok,
            f"worst gap/band ratio {worst_ratio:.3f}",
        )

    def test_end_to_end_determinism(self, tmp_path):
        """Batch digests identical across workers and reruns; seed changes them."""
        rng = np.random.default_rng(8)
        clips = [random_clip(rng, t=6, clip_id=f"c{i}", label=["x", "y"][i % 2]) for i in range(8)]
        manifest = load_manifest(write_dataset(tmp_path, clips))

        def digest(out_dir):
            h = hashlib.sha256()
            for f in sorted(out_dir.iterdir()):
                h.update(f.name.encode() + f.read_bytes())
            return h.hexdigest()

        cfg = AugConfig(r=0.4, b0=4, t=4, seed=21)
        digests = []
        for i, workers in enumerate((1, 4, 8, 1)):
            out = tmp_path / f"run{i}"
            augment_batch(manifest, cfg, out, workers=workers)
            digests.append(digest(out))
        other = tmp_path / "other-seed"
        augment_batch(manifest, AugConfig(r=0.4, b0=4, t=4, seed=22), other, workers=4)
        ok = len(set(digests)) == 1 and digest(other) != digests[0]
        _report("end-to-end determinism across workers {1,4,8} and reruns", ok)

    def test_end_to_end_oracle(self):
        """augment_pair matches a straight-line reimplementation bit-exactly."""
        gen = np.random.default_rng(2024)
        cfg = AugConfig(r=0.25, b0=4, t=4, strategy="C", seed=7)
        ok = True
        for trial in range(20):
            frames_i = gen.random((int(gen.integers(4, 9)), 8, 8, 3)).astype(np.float32)
            frames_j = gen.random((int(gen.integers(4, 9)), 8, 8, 3)).astype(np.float32)
            a = VideoClip(frames=frames_i, id="i", label="q")
            b = VideoClip(frames=frames_j, id="j", label="q")
            seed = 7 + trial
            got = augment_pair(a, b, cfg, np.random.default_rng(seed)).clip.frames
            want = straight_line_tube_augment(
                frames_i, frames_j, cfg.r, cfg.b0, cfg.t, np.random.default_rng(seed)
            )
            ok = ok and got.tobytes() == want.tobytes()
        _report("end-to-end oracle, 20 random 8x8x3 T=4 pairs, bit-exact", ok)

    def test_mix_boundary_identities(self):
        """M=0 -> x_i, M=1 -> x_j, x_i=x_j -> x_i; bit-exact on random inputs."""
        rng = np.random.default_rng(31)
        ok = True
        for _ in range(100):
            t, h, w = (int(rng.integers(1, 5)), int(rng.integers(2, 10)), int(rng.integers(2, 10)))
            a = VideoClip(frames=rng.random((t, h, w, 3)).astype(np.float32))
            b = VideoClip(frames=rng.random((t, h, w, 3)).astype(np.float32))
            zeros = Mask4D(frames=np.zeros((t, h, w), dtype=bool), strategy="C")
            ones = Mask4D(frames=np.ones((t, h, w), dtype=bool), strategy="C")
            random_mask = Mask4D(frames=rng.random((t, h, w)) < 0.5, strategy="B")
            ok = ok and mix(a, b, zeros).frames.tobytes() == a.frames.tobytes()
            ok = ok and mix(a, b, ones).frames.tobytes() == b.frames.tobytes()
            ok = ok and mix(a, a, random_mask).frames.tobytes() == a.frames.tobytes()
        _report("mask boundary identities, 100 random masks/clips, bit-exact", ok)

    def test_throughput_report(self):
        """bench completes at 224x224, T=16 and emits per-stage timings."""
        runner = CliRunner()
        result = runner.invoke(
            cli_main, ["bench", "--frames", "16", "--size", "224", "--clips", "4"]
        )
        ok = result.exit_code == 0
        doc = json.loads(result.output) if ok else {}
        ok = ok and set(doc.get("stage_ms_per_clip", {})) == {
            "motion", "pooling", "sampling", "mixing"
        }
        ok = ok and all(v >= 0.0 for v in doc["stage_ms_per_clip"].values())
        ok = ok and doc.get("clips_per_second", 0) > 0
        detail = ""
        if ok:
            stages = ", ".join(f"{k} {v:.1f}ms" for k, v in doc["stage_ms_per_clip"].items())
            detail = f"{doc['clips_per_second']:.1f} clips/s; {stages}"
        _report("throughput report on 224x224 T=16 synthetic pairs", ok, detail)
