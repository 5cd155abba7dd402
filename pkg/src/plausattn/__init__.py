"""Plausibility constraints for attention in RNN text classifiers.

Train bi-LSTM attention classifiers with an extra attention term in the
objective (entropy regularization, Jaccard supervision from human rationales,
or KL semi-supervision toward a POS-rule heuristic map) and measure how
closely the resulting attention maps match human annotations.
"""

__version__ = "0.1.0"

from .corpus import Example, Task, Vocabulary, batchify, generate_synthetic, load_corpus
from .heuristic import (DEFAULT_SHORTLIST, FrequencyTable, HeuristicMap,
                        build_frequency_table, build_heuristic_map,
                        heuristic_quality, nli_similarity_weights, pos_keep_mask)
from .metrics import (MetricsReport, auprc, evaluate_split, macro_f,
                      minmax_scale, recall_specificity)
from .model import AttentionClassifier, AttentionOutput, ModelConfig
from .objective import (ConstraintConfig, ConstraintKind, LossBreakdown,
                        combined_loss, cross_entropy, entropy_constraint,
                        jaccard_constraint, kl_constraint)
from .tagging import FixtureTagger, SpacyTagger, Token, TaggerUnavailableError
from .trainer import (ExperimentConfig, RunRecord, SyntheticSpec,
                      evaluate_checkpoint, sweep, train_one)
