"""Multi-shot video toolkit.

Library surface for building block-diagonal attention masks over shot
partitions, detecting shots in frame sequences, curating clip datasets
with the split-stitch rules, analyzing attention maps, and scoring
multi-shot generations.
"""

from .analysis import (
    AttnCapture,
    FrameAttentionMap,
    boundary_correlation,
    group_attention_by_frame,
    intra_inter_ratio,
    pearson,
    read_atn,
    write_atn,
)
from .attention import (
    AttentionOutput,
    HeadProjections,
    multi_head_attention,
    scaled_dot_product_attention,
    softmax_rows,
)
from .config import RunConfig
from .curation import (
    DatasetRecord,
    Segment,
    StitchConfig,
    build_dataset_record,
    endpoint_distance,
    filter_clips,
    read_emb,
    split_stitch,
    write_emb,
)
from .detect import (
    GradualScores,
    content_cut_scores,
    detect_cuts,
    gradual_scores,
    remove_gradual_frames,
    segment,
)
from .dynamics import SmoothingConfig, demo_multishot_generation, run_smoothing
from .errors import (
    ConfigError,
    DegenerateRowError,
    FormatError,
    MultishotError,
    NotComputableError,
    ShapeError,
    ValidationError,
)
from .frameio import (
    FeatureSequence,
    FrameSequence,
    GradualSpan,
    ShotSpec,
    SyntheticSpec,
    available_extractors,
    extract_features,
    gen_synthetic_multishot,
    read_ctf,
    register_extractor,
    write_ctf,
)
from .masks import (
    AttnMask,
    LayerPolicy,
    TokenLayout,
    apply_visible_first_frame,
    build_block_diagonal_mask,
    build_text_video_mask,
    frame_of_token,
    read_msk,
    select_masked_layers,
    shot_of_token,
    write_msk,
)
from .metrics import (
    ConvergencePoint,
    Histogram,
    MetricReport,
    build_reference_distribution,
    consistency_gap,
    convergence_report,
    eval_report,
    inter_shot_semantic_consistency,
    inter_shot_visual_consistency,
    intra_shot_consistency,
    jsd,
    middle_frame,
    transition_control_curve,
    transition_control_score,
)
from .partition import ShotPartition, partition_from_json, partition_to_json
from .rng import SplitMix64, derive_seed

__version__ = "0.1.0"
