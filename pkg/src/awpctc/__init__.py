"""Alignment-property training for CTC models, with a desk-scale synthetic benchmark.

The core pieces are a log-space CTC lattice (:mod:`awpctc.ctc`), an alignment
sampler (:mod:`awpctc.sampler`), property transforms producing improved
alignments (:mod:`awpctc.properties`) and the pairwise hinge loss added to CTC
(:mod:`awpctc.awp`). :mod:`awpctc.toybench` trains a small numpy model on
synthetic utterances, and :mod:`awpctc.evaluation` measures WER, CER and
emission drift.
"""
from .awp import AwpConfig, awp_grad, awp_loss, awp_loss_and_grad, combined_loss
from .config import ExperimentConfig
from .ctc import (InfeasibleTargetError, LogProbMatrix, ctc_grad, ctc_loss, forced_align,
                  path_log_prob)
from .evaluation import BeamConfig, LatencyReport, decode, evaluate, measure_drift
from .properties import AlignmentPair, PropertyTransform, f_low_latency, f_mwer
from .sampler import SamplerConfig, SamplingMode, sample_alignments
from .text_metrics import Vocabulary, cer, collapse, edit_distance, wer

__version__ = "0.1.0"
