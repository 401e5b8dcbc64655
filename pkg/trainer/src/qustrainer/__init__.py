"""Toy scatterer-density segmentation trainer over QUSD datasets."""

from .adabn import ReferenceSetError, adabn_adapt, learned_parameters, normalization_state
from .data import Record, envelope_channels, load_dataset, record_from_sample, resample_map_to_pixels
from .loss import dice_loss, mtl_loss
from .metrics import MetricsReport, evaluate, image_metrics, pooled_auc
from .model import SegModel, predict_probability
from .qusd_io import DigestError, QusdError, Sample, iter_split, load_manifest, read_sample
from .sweep import density_sweep, interval_widths, spearman_rho
from .train import TrainConfig, train, validation_iou

__version__ = "0.1.0"
