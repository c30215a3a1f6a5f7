"""Clip and manifest I/O.

Clips live on disk either as directories of image frames (PNG/JPEG, loaded
in lexical filename order) or as RVT1 raw tensor files, a little-endian
binary format that round-trips float32 pixel data bit-exactly:

    magic "RVT1" | version u16 = 1 | dtype u8 (0 = f32) | reserved u8 = 0
    | T u32 | H u32 | W u32 | C u32 | T*H*W*C payload values, t-major
    (then h, then w, then c)

Dataset manifests are JSON Lines files: one object per line with string
keys "id", "path", "label", where "path" is relative to the manifest's
directory.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    BadHeaderError,
    DuplicateClipIdError,
    InconsistentFrameDimensionsError,
    IoFailure,
    MalformedLineError,
    MissingPathError,
    ShapeMismatchError,
    UnsupportedChannelCountError,
)

RVT1_MAGIC = b"RVT1"
RVT1_VERSION = 1
RVT1_DTYPE_F32 = 0

# magic, version, dtype, reserved, T, H, W, C
_HEADER = struct.Struct("<4sHBBIIII")

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True, eq=False)
class VideoClip:
    """A T x H x W x C float32 pixel volume in [0, 1] plus identity metadata.

    The frames array is treated as immutable: the engine never writes to it
    and never hands out views it later mutates, so clips are safe to share
    across threads.
    """

    frames: np.ndarray
    id: str = ""
    label: str | None = None

    def __post_init__(self):
        f = self.frames
        if not isinstance(f, np.ndarray) or f.ndim != 4:
            raise ShapeMismatchError(
                f"expected a T x H x W x C array, got {getattr(f, 'shape', type(f))}"
            )
        if f.shape[3] != 3:
            raise UnsupportedChannelCountError(f"expected 3 channels, got {f.shape[3]}")
        if f.shape[0] < 1 or f.shape[1] < 1 or f.shape[2] < 1:
            raise ShapeMismatchError(f"degenerate clip shape {f.shape}")
        if f.dtype != np.float32 or not f.flags.c_contiguous:
            object.__setattr__(self, "frames", np.ascontiguousarray(f, dtype=np.float32))

    @property
    def t(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.frames.shape


def sample_frames(clip: VideoClip, t_out: int) -> VideoClip:
    """Resample a clip to t_out frames with the segment-center rule.

    Frame t of the output is source index floor((t + 0.5) * N / t_out).
    Indices are non-decreasing; when N < t_out the formula repeats frames,
    so short clips never error. Label and id are preserved.
    """
    if t_out < 1:
        raise ValueError(f"t_out must be >= 1, got {t_out}")
    n = clip.t
    idx = [((2 * t + 1) * n) // (2 * t_out) for t in range(t_out)]
    return VideoClip(frames=clip.frames[idx], id=clip.id, label=clip.label)


def segment_center_indices(n: int, t_out: int) -> list[int]:
    """The source indices sample_frames would pick for an n-frame clip."""
    return [((2 * t + 1) * n) // (2 * t_out) for t in range(t_out)]


def load_clip(
    path: str | Path,
    format: str = "auto",
    *,
    id: str | None = None,
    label: str | None = None,
) -> VideoClip:
    """Load a clip from a frame directory or an RVT1 file.

    format is "frame_dir", "raw_tensor", or "auto" (directory -> frame_dir,
    file -> raw_tensor). Pixel values are scaled to [0, 1]; 8-bit images map
    to v / 255.
    """
    p = Path(path)
    if not p.exists():
        raise MissingPathError(f"no such path: {p}")
    if format == "auto":
        format = "frame_dir" if p.is_dir() else "raw_tensor"
    if format == "frame_dir":
        frames = _load_frame_dir(p)
    elif format == "raw_tensor":
        frames = _load_rvt1(p)
    else:
        raise ValueError(f"unknown clip format {format!r}")
    return VideoClip(frames=frames, id=id if id is not None else p.stem, label=label)


def _load_frame_dir(p: Path) -> np.ndarray:
    files = sorted(f for f in p.iterdir() if f.suffix.lower() in _IMAGE_SUFFIXES)
    if not files:
        raise MissingPathError(f"no image frames found in {p}")
    frames = []
    shape = None
    for f in files:
        arr = np.asarray(Image.open(f))
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise UnsupportedChannelCountError(
                f"{f.name}: expected an 8-bit RGB image, got shape {arr.shape}"
            )
        if arr.dtype != np.uint8:
            raise UnsupportedChannelCountError(
                f"{f.name}: expected 8-bit pixels, got dtype {arr.dtype}"
            )
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise InconsistentFrameDimensionsError(
                f"{f.name}: frame shape {arr.shape[:2]} != first frame {shape[:2]}"
            )
        frames.append(arr)
    stack = np.stack(frames).astype(np.float32) / 255.0
    return stack


def _load_rvt1(p: Path) -> np.ndarray:
    data = p.read_bytes()
    if len(data) < _HEADER.size:
        raise BadHeaderError(f"{p}: file shorter than the RVT1 header")
    magic, version, dtype, reserved, t, h, w, c = _HEADER.unpack_from(data)
    if magic != RVT1_MAGIC:
        raise BadHeaderError(f"{p}: bad magic {magic!r}")
    if version != RVT1_VERSION:
        raise BadHeaderError(f"{p}: unsupported version {version}")
    if dtype != RVT1_DTYPE_F32 or reserved != 0:
        raise BadHeaderError(f"{p}: unsupported dtype/reserved bytes ({dtype}, {reserved})")
    if c != 3:
        raise UnsupportedChannelCountError(f"{p}: expected 3 channels, got {c}")
    if t < 1 or h < 1 or w < 1:
        raise BadHeaderError(f"{p}: degenerate geometry ({t}, {h}, {w}, {c})")
    n = t * h * w * c
    payload = data[_HEADER.size:]
    if len(payload) != 4 * n:
        raise BadHeaderError(
            f"{p}: payload holds {len(payload)} bytes, header implies {4 * n}"
        )
    frames = np.frombuffer(payload, dtype="<f4", count=n).reshape(t, h, w, c)
    if not np.all(np.isfinite(frames)):
        raise BadHeaderError(f"{p}: payload contains non-finite values")
    if frames.min() < 0.0 or frames.max() > 1.0:
        raise BadHeaderError(f"{p}: payload values outside [0, 1]")
    return frames.astype(np.float32)


def write_clip(clip: VideoClip, path: str | Path, format: str = "raw_tensor") -> None:
    """Persist a clip.

    raw_tensor writes are bit-exact (load_clip inverts them); frame_dir
    writes quantize to 8-bit PNGs and are lossy except for values k/255.
    The parent directory must already exist.
    """
    p = Path(path)
    if not p.parent.exists():
        raise IoFailure(f"parent directory does not exist: {p.parent}")
    try:
        if format == "raw_tensor":
            _write_rvt1(clip, p)
        elif format == "frame_dir":
            _write_frame_dir(clip, p)
        else:
            raise ValueError(f"unknown clip format {format!r}")
    except OSError as e:
        raise IoFailure(f"writing {p} failed: {e}") from e


def _write_rvt1(clip: VideoClip, p: Path) -> None:
    t, h, w, c = clip.shape
    header = _HEADER.pack(RVT1_MAGIC, RVT1_VERSION, RVT1_DTYPE_F32, 0, t, h, w, c)
    payload = np.ascontiguousarray(clip.frames, dtype="<f4").tobytes()
    p.write_bytes(header + payload)


def _write_frame_dir(clip: VideoClip, p: Path) -> None:
    p.mkdir(exist_ok=True)
    pixels = np.clip(np.rint(clip.frames * 255.0), 0, 255).astype(np.uint8)
    for t in range(clip.t):
        Image.fromarray(pixels[t], mode="RGB").save(p / f"frame_{t:05d}.png")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: str
    label: str


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    """Clip registry with a label -> clip-id index for partner sampling."""

    entries: tuple[ManifestEntry, ...]
    root: Path = field(default_factory=Path)
    index: dict[str, list[str]] = field(default_factory=dict)
    by_id: dict[str, ManifestEntry] = field(default_factory=dict)

    @staticmethod
    def from_entries(entries, root: str | Path = ".") -> "DatasetManifest":
        index: dict[str, list[str]] = {}
        by_id: dict[str, ManifestEntry] = {}
        for e in entries:
            if e.id in by_id:
                raise DuplicateClipIdError(f"duplicate clip id {e.id!r}")
            by_id[e.id] = e
            index.setdefault(e.label, []).append(e.id)
        return DatasetManifest(
            entries=tuple(entries), root=Path(root), index=index, by_id=by_id
        )

    def clip_path(self, clip_id: str) -> Path:
        return self.root / self.by_id[clip_id].path

    def load(self, clip_id: str) -> VideoClip:
        e = self.by_id[clip_id]
        return load_clip(self.clip_path(clip_id), id=e.id, label=e.label)

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a JSON Lines manifest; paths stay relative to its directory."""
    p = Path(path)
    if not p.exists():
        raise MissingPathError(f"no such manifest: {p}")
    entries = []
    seen = set()
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedLineError(lineno, f"invalid JSON ({e.msg})") from e
        if not isinstance(obj, dict):
            raise MalformedLineError(lineno, "expected a JSON object")
        for key in ("id", "path", "label"):
            if not isinstance(obj.get(key), str):
                raise MalformedLineError(lineno, f"missing or non-string field {key!r}")
        if obj["id"] in seen:
            raise DuplicateClipIdError(f"duplicate clip id {obj['id']!r} (line {lineno})")
        seen.add(obj["id"])
        entries.append(ManifestEntry(id=obj["id"], path=obj["path"], label=obj["label"]))
    return DatasetManifest.from_entries(entries, root=p.parent)
