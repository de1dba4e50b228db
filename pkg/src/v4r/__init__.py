"""Object-removal triplet construction and evaluation from fixed-camera video frames.

The pipeline separates frames into foreground/background via a per-pixel
Gaussian-mixture model, pairs each foreground frame with its best background
frame, generates and optionally perturbs object masks, and emits
(input, mask, ground-truth) triplets with a reproducible manifest. A metric
suite (PSNR, Fréchet distance, kernel MMD, paired embedding distance) scores
removal results.
"""

from .background import BackgroundSubtractor, MogParams, foreground_ratio, is_foreground_frame
from .build import build_dataset
from .config import RunConfig, load_config
from .embeddings import EmbeddingSet, GridEmbedder, embed_frame, read_embeddings, write_embeddings
from .imaging import frame_mse, load_image, load_mask, save_image, save_mask, to_gray
from .masks import (
    AugConfig,
    CleanupConfig,
    RleMask,
    augment_mask,
    derive_record_seed,
    dilate,
    erode,
    mask_iou,
    mog_mask_cleanup,
    rle_decode,
    rle_encode,
    tight_box,
)
from .metrics import (
    GaussianStats,
    MetricReport,
    evaluate,
    frechet_distance,
    mean_cov,
    mmd2,
    paired_embedding_distance,
    psnr,
)
from .scenes import (
    GateConfig,
    PairedCandidate,
    SceneSequence,
    blur_score,
    discover_scenes,
    pair_frames,
    quality_gate,
    separate_frames,
)
from .sidecar import SidecarClient, SidecarEmbedder
from .store import (
    DatasetWriter,
    GuidancePair,
    TripletRecord,
    dataset_stats,
    decompose_object_background,
    make_record_id,
    read_manifest,
    validate_dataset,
    write_manifest,
)

__version__ = "0.1.0"
