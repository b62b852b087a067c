"""privimu: user-controllable privacy for IMU sensor streams.

Windows of multichannel sensor data are classified by cosine similarity to
natural-language activity descriptions in a shared embedding space; a
white/black/gray policy decides which windows pass through untouched and which
are replaced by synthesized windows of the most similar gray-listed activity.
Policy changes take effect immediately, with no retraining.
"""

__version__ = "0.1.0"

from . import corpus, datasets, evaluation, imuclip, policy, sanitizer
from .corpus import (
    DescriptionCorpus,
    FallbackTextEncoder,
    corpus_hash,
    load_corpus,
    save_corpus,
    templated_corpus,
    validate_corpus,
)
from .datasets import (
    IMUWindow,
    LabeledSeries,
    Normalizer,
    SyntheticConfig,
    apply_normalizer,
    few_shot_subsample,
    fit_normalizer,
    generate_synthetic,
    load_labeled_series,
    make_windows,
    save_labeled_series,
    split,
)
from .imuclip import (
    Checkpoint,
    SimilarityRanking,
    TrainConfig,
    classify,
    encode_class_anchor,
    encode_imu,
    load_checkpoint,
    save_checkpoint,
    similarity,
    supcon_loss,
    top_k,
    train,
)
from .policy import Category, PolicyStore, PrivacyPolicy, categorize, validate_policy
from .sanitizer import (
    Action,
    ExemplarLibrary,
    JitterConfig,
    SanitizationResult,
    build_library,
    sanitize,
    sanitize_stream,
    select_replacement,
    synthesize,
)
