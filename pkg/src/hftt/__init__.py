"""Text-only training of unwanted-visual-content detectors.

In a joint text/image embedding space, captions of unwanted content sit
close to the images they describe.  This package exploits that: detectors
are trained purely on embedded text (concept names plus a large generic
word corpus) and then applied to image embeddings at test time, no image
collection or labeling involved.

The moving parts:

- :mod:`hftt.store`     embedding containers and the ``.hemb`` file format
- :mod:`hftt.synth`     prompt templating over word corpora
- :mod:`hftt.objective` the focal-weighted objective and its gradients
- :mod:`hftt.trainer`   SGD over the trainable embeddings, persistence
- :mod:`hftt.detector`  scikit-learn style estimator façade
- :mod:`hftt.scoring`   detector and zero-shot baseline scores
- :mod:`hftt.metrics`   AUROC / FPR-at-TPR evaluation
- :mod:`hftt.theory`    synthetic fixtures for the transfer argument
- :mod:`hftt.cli`       the ``hftt`` command-line pipeline
"""

__version__ = "0.1.0"

from .detector import HFTTDetector
from .errors import (
    ConvergenceWarning,
    CorruptionError,
    FormatError,
    HFTTError,
    NumericalError,
    ValidationError,
)
from .metrics import CONVENTION, EvalReport, auroc, eval_report, fpr_at_tpr
from .objective import (
    CLAMP_EPS,
    DetectorModel,
    LossBreakdown,
    LossConfig,
    focal_weights,
    loss,
    loss_and_gradient,
    loss_gradient,
    predict_out_probability,
)
from .scoring import (
    SCORE_METHODS,
    ScoreSet,
    export_scores,
    read_scores,
    score_baseline,
    score_hftt,
)
from .store import (
    DEFAULT_TEMPERATURE,
    EmbeddingStore,
    TaskEmbeddings,
    build_task_embeddings,
    load_store,
    normalize_rows,
    save_store,
)
from .synth import (
    DEFAULT_TEMPLATE,
    PromptTemplate,
    WordCorpus,
    load_templates,
    load_word_set,
    synthesize_in_distribution,
    word2data,
)
from .theory import (
    BimodalConfig,
    BimodalSample,
    CorollaryReport,
    alignment_margins,
    closed_form_classifier,
    default_bimodal_config,
    fit_quadratic_classifier,
    random_bimodal_config,
    sample_bimodal,
    verify_corollary,
)
from .trainer import (
    TrainConfig,
    TrainReport,
    init_trainable,
    load_model,
    save_model,
    train,
)

__all__ = [
    "__version__",
    "CLAMP_EPS",
    "CONVENTION",
    "DEFAULT_TEMPERATURE",
    "DEFAULT_TEMPLATE",
    "SCORE_METHODS",
    "BimodalConfig",
    "BimodalSample",
    "ConvergenceWarning",
    "CorollaryReport",
    "CorruptionError",
    "DetectorModel",
    "EmbeddingStore",
    "EvalReport",
    "FormatError",
    "HFTTDetector",
    "HFTTError",
    "LossBreakdown",
    "LossConfig",
    "NumericalError",
    "PromptTemplate",
    "ScoreSet",
    "TaskEmbeddings",
    "TrainConfig",
    "TrainReport",
    "ValidationError",
    "WordCorpus",
    "alignment_margins",
    "auroc",
    "build_task_embeddings",
    "closed_form_classifier",
    "default_bimodal_config",
    "eval_report",
    "export_scores",
    "fit_quadratic_classifier",
    "focal_weights",
    "fpr_at_tpr",
    "init_trainable",
    "load_model",
    "load_store",
    "load_templates",
    "load_word_set",
    "loss",
    "loss_and_gradient",
    "loss_gradient",
    "normalize_rows",
    "predict_out_probability",
    "random_bimodal_config",
    "read_scores",
    "sample_bimodal",
    "save_model",
    "save_store",
    "score_baseline",
    "score_hftt",
    "synthesize_in_distribution",
    "train",
    "verify_corollary",
    "word2data",
]
