"""Probabilistic embeddings toolkit: distributions, scoring functions,
training objectives, synthetic class-disjoint benchmarks and evaluation
metrics, with a CLI harness for multi-seed method comparisons."""

from .autodiff import Node, constant, gradients, parameter
from .config import RunConfig, load_config
from .data import (LabeledDataset, VerificationSet, corrupt, generate,
                   load_dataset, sample_verification_pairs, save_dataset,
                   split_classes)
from .distributions import (DiagonalNormal, PredictedDistribution,
                            VonMisesFisher, confidence_of,
                            kl_normal_to_standard, normal_log_pdf,
                            sample_normal, sample_vmf, vmf_log_normalizer,
                            vmf_log_pdf)
from .encoder import (EncoderConfig, EncoderModel, class_logits, encode,
                      init_encoder, load_model, prenorm_magnitude, save_model)
from .errors import (ConfigurationError, ContractError, DegenerateInputError,
                     DomainError, NonFiniteError, NumericalError, ProbembError,
                     TrainingError)
from .evaluation import (ConfidenceRecords, baseline_confidences, ceda,
                         filter_out_curve, map_at_r, recall_at_1, spearman,
                         verification_accuracy)
from .harness import (BenchmarkReport, MethodSpec, MetricRow, TrainResult,
                      run_ablation, run_benchmark, run_dul_reg_cls, train)
from .losses import (LossConfig, StageFlags, arcface_loss, cosface_loss,
                     dul_cls_loss, dul_reg_loss, hib_loss, hib_match_prob,
                     pfe_loss, vmf_fl_loss, vmf_sampled_softmax_loss)
from .scoring import (ScoringKind, mean_score, mls_normal, mls_vmf,
                      sampled_score, score, score_matrix)
from .special import log_bessel_i, log_sum_exp

__version__ = "0.1.0"
