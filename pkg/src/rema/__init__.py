"""Motion-guided, budget-controlled intra-class mixing augmentation for video.

The engine replaces a fixed fraction of a clip with same-class partner
content, placed on low-motion patches and held consistent across frames.
Deterministic given a seed; see the `rema` CLI for batch processing,
inspection, validation, and benchmarking.
"""

from .errors import (
    AugmentationError,
    BadHeaderError,
    DuplicateClipIdError,
    InconsistentFrameDimensionsError,
    InsufficientPositiveWeightError,
    IoFailure,
    MalformedLineError,
    MissingPathError,
    OracleTooLargeError,
    ShapeMismatchError,
    SingleFrameClipError,
    SingletonClassError,
    UnsupportedChannelCountError,
)
from .masking import (
    Mask4D,
    PatchIndexSet,
    STRATEGY_RANDOM_PATCHES,
    STRATEGY_RECT,
    STRATEGY_TUBE,
    TubeMask,
    budget_patches,
    build_mask_variant,
    build_tube_mask,
    coverage_ratio,
    sample_patches,
    save_mask_png,
)
from .mixing import (
    AugConfig,
    AugmentedClip,
    BatchReport,
    Provenance,
    STRATEGIES,
    STRATEGY_MASK_ONLY,
    STRATEGY_MIXUP,
    augment_batch,
    augment_pair,
    derive_seed,
    mask_only,
    mix,
    mixup,
    sample_partner,
)
from .motion import (
    MotionMap,
    PatchMotion,
    WeightGrid,
    motion_map,
    normalize_patch_motion,
    pool_to_patches,
    selection_weights,
    uniform_weights,
)
from .video_io import (
    DatasetManifest,
    ManifestEntry,
    VideoClip,
    load_clip,
    load_manifest,
    sample_frames,
    segment_center_indices,
    write_clip,
)

__version__ = "0.1.0"
