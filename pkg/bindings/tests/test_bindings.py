import subprocess
import sys

import numpy as np
import pytest

import rema_bindings as rb
from rema import AugConfig, VideoClip, augment_pair, load_clip, write_clip


def _pair(rng, t=4, h=8, w=8):
    a = rng.random((t, h, w, 3)).astype(np.float32)
    b = rng.random((t, h, w, 3)).astype(np.float32)
    return a, b


@pytest.fixture
def rng():
    return np.random.default_rng(55)


class TestAugmentPairArrays:
    def test_zero_ratio_returns_input(self, rng):
        a, b = _pair(rng)
        out, prov = rb.augment_pair_arrays(a, b, r=0.0, b0=4, t=4, seed=1)
        assert out.tobytes() == a.tobytes()
        assert prov["realized_coverage"] == 0.0

    def test_matches_engine_bit_exactly(self, rng):
        a, b = _pair(rng)
        out, _ = rb.augment_pair_arrays(a, b, r=0.5, b0=4, t=4, seed=9)
        cfg = AugConfig(r=0.5, b0=4, t=4, seed=9)
        want = augment_pair(
            VideoClip(frames=a, id="a", label=""),
            VideoClip(frames=b, id="b", label=""),
            cfg,
            np.random.default_rng(9),
        )
        assert out.tobytes() == want.clip.frames.tobytes()

    def test_shape_mismatch_names_both_shapes(self, rng):
        a = rng.random((4, 8, 8, 3)).astype(np.float32)
        b = rng.random((4, 6, 8, 3)).astype(np.float32)
        with pytest.raises(ValueError) as exc:
            rb.augment_pair_arrays(a, b, t=4)
        assert "(4, 8, 8, 3)" in str(exc.value) and "(4, 6, 8, 3)" in str(exc.value)

    def test_engine_error_carries_name(self, rng):
        a, b = _pair(rng, t=1)
        with pytest.raises(ValueError) as exc:
            rb.augment_pair_arrays(a, b, r=0.3, b0=4, t=1, seed=1)
        assert "SingleFrameClipError" in str(exc.value)

    def test_out_of_range_rejected(self, rng):
        a, b = _pair(rng)
        a[0, 0, 0, 0] = 2.0
        with pytest.raises(ValueError):
            rb.augment_pair_arrays(a, b, t=4)

    def test_bad_config_key_rejected(self, rng):
        a, b = _pair(rng)
        with pytest.raises(ValueError):
            rb.augment_pair_arrays(a, b, block_size=4)


class TestLayoutContract:
    def test_conforming_input_is_not_copied(self, rng):
        a, b = _pair(rng)
        rb.reset_copy_count()
        rb.augment_pair_arrays(a, b, r=0.3, b0=4, t=4, seed=1)
        assert rb.copy_count() == 0

    def test_nonconforming_input_copied_and_counted(self, rng):
        a, b = _pair(rng)
        rb.reset_copy_count()
        out, _ = rb.augment_pair_arrays(a.astype(np.float64), b, r=0.0, b0=4, t=4, seed=1)
        assert rb.copy_count() == 1
        assert out.tobytes() == a.tobytes()

    def test_reject_mode_raises(self, rng):
        a, b = _pair(rng)
        with pytest.raises(ValueError):
            rb.augment_pair_arrays(a.astype(np.float64), b, layout="reject", t=4)
        with pytest.raises(ValueError):
            rb.augment_pair_arrays(np.asfortranarray(a), b, layout="reject", t=4)

    def test_unknown_layout_flag(self, rng):
        a, b = _pair(rng)
        with pytest.raises(ValueError):
            rb.augment_pair_arrays(a, b, layout="maybe", t=4)


class TestAugmentDatasetArrays:
    def test_constant_class_fixed_point(self):
        arr = np.full((4, 8, 8, 3), 0.5, dtype=np.float32)
        outs, warnings = rb.augment_dataset_arrays(
            [(arr.copy(), "x"), (arr.copy(), "x")], r=0.5, b0=4, t=4, seed=2
        )
        assert warnings == []
        for out in outs:
            assert out.tobytes() == arr.tobytes()

    def test_singleton_passthrough_with_warning(self, rng):
        a, b = _pair(rng)
        outs, warnings = rb.augment_dataset_arrays(
            [(a, "x"), (b, "lonely")], r=0.5, b0=4, t=4, seed=2
        )
        assert len(warnings) == 2  # both labels are singletons here
        assert outs[0].tobytes() == a.tobytes()
        assert outs[1].tobytes() == b.tobytes()
        assert {w["index"] for w in warnings} == {0, 1}

    def test_deterministic_across_calls(self, rng):
        items = [(_pair(rng)[0], "x") for _ in range(4)]
        first, _ = rb.augment_dataset_arrays(items, r=0.4, b0=4, t=4, seed=3)
        second, _ = rb.augment_dataset_arrays(items, r=0.4, b0=4, t=4, seed=3)
        for x, y in zip(first, second):
            assert x.tobytes() == y.tobytes()

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            rb.augment_dataset_arrays([])


class TestModuleSurface:
    def test_version_and_defaults(self):
        assert isinstance(rb.__version__, str)
        defaults = rb.engine_defaults()
        assert defaults["r"] == 0.3 and defaults["b0"] == 16 and defaults["t"] == 16
        assert defaults["strategy"] == "C"


class TestBoundaryEquivalence:
    def test_bindings_match_cli_on_rvt1(self, tmp_path, rng):
        """[SECONDARY] 50 random (input, seed) cases, bit-exact vs the CLI."""
        ok = True
        for case in range(50):
            t = int(rng.integers(2, 6))
            h = int(rng.integers(4, 13))
            w = int(rng.integers(4, 13))
            a, b = _pair(rng, t=t, h=h, w=w)
            seed = int(rng.integers(0, 2**32))
            r = float(rng.choice([0.0, 0.25, 0.5, 1.0]))
            b0 = int(rng.choice([2, 4]))

            got, _ = rb.augment_pair_arrays(a, b, r=r, b0=b0, t=t, seed=seed)

            write_clip(VideoClip(frames=a, id="a"), tmp_path / "a.rvt1")
            write_clip(VideoClip(frames=b, id="b"), tmp_path / "b.rvt1")
            out_path = tmp_path / "out.rvt1"
            proc = subprocess.run(
                [
                    sys.executable, "-m", "rema", "augment",
                    "--clip-a", str(tmp_path / "a.rvt1"),
                    "--clip-b", str(tmp_path / "b.rvt1"),
                    "--out", str(out_path),
                    "--frames", str(t), "--ratio", str(r), "--block", str(b0),
                    "--seed", str(seed),
                ],
                capture_output=True,
                text=True,
            )
            assert proc.returncode == 0, proc.stderr
            via_cli = load_clip(out_path)
            ok = ok and got.tobytes() == via_cli.frames.tobytes()
        status = "PASS" if ok else "FAIL"
        print(f"{status}: bindings vs CLI/RVT1 boundary equivalence, 50 cases, bit-exact")
        assert ok
