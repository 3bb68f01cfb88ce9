"""Active-learning engine for multi-label customer-review classification.

The pieces: a rule-based tokenizer and embedding provisioning
(`embeddings`), a two-layer LSTM classifier with a sigmoid head and
hand-derived BPTT (`seqmodel`), micro-averaged evaluation (`metrics`), the
pool/selection/retrain loop with a simulated-oracle benchmark
(`active_loop`, `synth`), a persistent annotation service (`service`,
`api`), and the operator CLI (`cli`).
"""

from .corpus import ASPECT_CLASSES, SENTIMENT_CLASSES, Taxonomy
from .embeddings import (
    EmbeddingTable,
    TokenSequence,
    Vocabulary,
    build_vocabulary,
    create_trainable,
    load_pretrained,
    lookup,
    tokenize,
)
from .metrics import ConfusionTotals, EvalReport, accumulate, binarize, micro_scores
from .seqmodel import (
    Gradients,
    Hyperparams,
    LabelVector,
    ModelParams,
    PredictionVector,
    backward,
    forward,
    gradient_check,
    load_checkpoint,
    multi_label_loss,
    save_checkpoint,
    train,
)
from .active_loop import (
    ExperimentConfig,
    ExperimentSetting,
    LearningCurve,
    Pool,
    Round,
    SelectionStrategy,
    curves_to_csv,
    run_experiment,
    run_round,
    select_batch,
    uncertainty_score,
)
from .synth import SynthSpec, generate_synthetic_corpus, write_synthetic
from .service import ServiceConfig, Store

__version__ = "0.1.0"
