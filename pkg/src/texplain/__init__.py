"""texplain: concept-level explanations for texture-image classifiers.

Perturb an image with global-feature operators (hue tune, edge-preserving
smooth, flips/rotations, groove/surface removal), record a black-box
classifier's confidence per operator subset, fit an interpretable surrogate
on the (plan, confidence) data, and rank the human concepts each operator
stands for. An evaluation harness scores rankings against ground-truth
annotations with tie-corrected Kendall's tau.
"""

from .concepts import (
    CONCEPT_TIE_ORDER,
    CONCEPTS,
    ConceptRanking,
    ConceptSignificance,
    concept_significance,
    kendall_tau,
    rank_concepts,
)
from .errors import (
    DegenerateImageError,
    DegenerateRemovalWarning,
    DimensionMismatchError,
    GroundTruthError,
    InsufficientSamplesError,
    RegistryMismatchError,
    SamplingError,
    ScorerTransportError,
    TexplainError,
    UnknownOperatorError,
)
from .evaluation import (
    EvaluationReport,
    ExplainerSettings,
    Explanation,
    GroundTruthRecord,
    TauResult,
    evaluate,
    explain_raster,
    load_ground_truth,
    write_ground_truth,
)
from .operators import (
    OperatorRegistry,
    OperatorSpec,
    PerturbationPlan,
    apply_operator,
    bilateral_smooth,
    compose,
    cuco_score,
    default_registry,
    flip,
    hue_shift,
    remove_region,
    rotate,
)
from .raster import (
    GrayRaster,
    HsvPixel,
    Raster,
    hsv_to_rgb,
    mean_abs_error,
    read_image,
    resize_bilinear,
    rgb_to_hsv,
    to_grayscale,
    write_png,
)
from .scorers import (
    GrooveContrastScorer,
    HttpScorer,
    HueGateScorer,
    ProbVector,
    ScorerDescriptor,
    StdioScorer,
    StripeOrientationScorer,
    make_builtin,
    score,
)
from .segmentation import (
    BinaryMask,
    Component,
    SegmentationParams,
    connected_components,
    morph_close,
    morph_open,
    otsu_threshold,
    segment_grooves,
)
from .surrogate import (
    ForestParams,
    ForestSurrogate,
    ImportanceReport,
    LinearSurrogate,
    PerturbationDataset,
    ReasoningPath,
    SamplingConfig,
    TreeParams,
    TreeSurrogate,
    build_dataset,
    dump_dataset_csv,
    fit_cart,
    fit_forest,
    fit_linear,
    importance,
    load_dataset_csv,
    sample_plans,
    tree_reasoning_path,
)
from .synth import KINDS, PLANTED_RANKINGS, generate_corpus, make_stripes

__version__ = "0.1.0"
