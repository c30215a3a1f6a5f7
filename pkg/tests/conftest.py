import json
import sys
from pathlib import Path

import numpy as np
import pytest

from rema import VideoClip, write_clip

sys.path.insert(0, str(Path(__file__).parent))


def random_clip(rng, t=4, h=8, w=8, label="x", clip_id="clip") -> VideoClip:
    frames = rng.random((t, h, w, 3)).astype(np.float32)
    return VideoClip(frames=frames, id=clip_id, label=label)


def constant_clip(value, t=4, h=8, w=8, label="x", clip_id="clip") -> VideoClip:
    frames = np.full((t, h, w, 3), value, dtype=np.float32)
    return VideoClip(frames=frames, id=clip_id, label=label)


def write_dataset(tmp_path: Path, clips: list[VideoClip]) -> Path:
    """Persist clips as RVT1 next to a JSONL manifest; returns the manifest path."""
    lines = []
    for clip in clips:
        name = f"{clip.id}.rvt1"
        write_clip(clip, tmp_path / name, format="raw_tensor")
        lines.append(json.dumps({"id": clip.id, "path": name, "label": clip.label}))
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
