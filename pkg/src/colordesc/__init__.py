"""colordesc: conditional language models of color descriptions.

Train sequence, atomic, and histogram models that map an HSV color to a
distribution over token-sequence descriptions; score, sample, search,
evaluate (per-description perplexity, AIC, recall@1, paired permutation
tests), and visualize description denotations over color space.
"""

__version__ = "0.1.0"

from .colors import (
    ColorHSL,
    ColorHSV,
    canonical_hue,
    hsl_to_hsv,
    hsl_to_hsv_array,
    hsv_to_hsl,
    hsv_to_hsl_array,
)
from .corpus import (
    Dataset,
    Description,
    EncodedDataset,
    Vocabulary,
    build_vocabulary,
    encode_dataset,
    load_corpus,
    load_manifest,
    tokenize,
)
from .errors import (
    CheckpointError,
    ColordescError,
    ConfigError,
    CorpusError,
    EvaluationError,
    TrainingDivergence,
)
from .evaluation import (
    EvalReport,
    accuracy,
    aic,
    count_params,
    evaluate,
    per_item_log2,
    permutation_test,
    perplexity,
    perplexity_from_log2,
)
from .features import (
    BUCKET_GRIDS,
    FOURIER_DIM,
    SCHEMES,
    bucket_index,
    feature_dim,
    fourier_features,
    raw_features,
)
from .models import (
    AtomicModel,
    HistogramModel,
    SequenceDecoderModel,
    load_checkpoint,
    save_checkpoint,
    train_model,
)
from .nn import TrainingConfig
from .viz import (
    CrossSection,
    GridSpec,
    ProbField,
    cross_sections,
    hue_profile,
    periodic_local_maxima,
    probability_field,
    render,
)

__all__ = [
    "AtomicModel",
    "BUCKET_GRIDS",
    "CheckpointError",
    "ColordescError",
    "ColorHSL",
    "ColorHSV",
    "ConfigError",
    "CorpusError",
    "CrossSection",
    "Dataset",
    "Description",
    "EncodedDataset",
    "EvalReport",
    "EvaluationError",
    "FOURIER_DIM",
    "GridSpec",
    "HistogramModel",
    "ProbField",
    "SCHEMES",
    "SequenceDecoderModel",
    "TrainingConfig",
    "TrainingDivergence",
    "Vocabulary",
    "accuracy",
    "aic",
    "build_vocabulary",
    "bucket_index",
    "canonical_hue",
    "count_params",
    "cross_sections",
    "encode_dataset",
    "evaluate",
    "feature_dim",
    "fourier_features",
    "hsl_to_hsv",
    "hsl_to_hsv_array",
    "hsv_to_hsl",
    "hsv_to_hsl_array",
    "hue_profile",
    "load_checkpoint",
    "load_corpus",
    "load_manifest",
    "per_item_log2",
    "periodic_local_maxima",
    "permutation_test",
    "perplexity",
    "perplexity_from_log2",
    "probability_field",
    "raw_features",
    "render",
    "save_checkpoint",
    "tokenize",
    "train_model",
]
