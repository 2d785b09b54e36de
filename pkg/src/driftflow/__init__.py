"""Drift flow matching on low-dimensional point clouds."""
from .driftfield import DriftConfig, DriftOutput, drift_target, grouped_drift
from .evalkit import GaussianTaskSpec, emd_to_target, exact_w2
from .kernelops import KernelSpec, row_softmax, sinkhorn_from_logits
from .netcore import TimeEmbedSpec, TransportNet, load_checkpoint, save_checkpoint
from .sampler import TimeGrid, generate
from .synthdata import DatasetSpec, PointBatch, SourceSpec, sample_source, sample_target
from .timepath import Schedule, TimePair, TimeSamplerSpec, build_grouped_batch, sample_time_pairs
from .trainer import TrainConfig, TrainReport, train

__version__ = "0.1.0"
