"""Frequency-aware progressive face super-resolution.

A small, fully deterministic implementation: numpy-backed autograd engine,
exact blockwise DCT coefficient branch, synthetic morphable-model structural
supervision, the combined four-term loss with a binary-classifier
discriminator, and a reproducible training/evaluation harness.
"""
from .autograd import Tensor, tensor
from .dct import DctCoefficientMap, dct_block, dct_map_to_image, idct_block, image_to_dct_map
from .errors import DimensionError, NumericError, TrainingDiverged, UsageError
from .generator import Generator, GeneratorConfig, GeneratorOutput
from .losses import (Discriminator, DiscriminatorConfig, FeatureExtractor, LossWeights,
                     adversarial_losses, dct_loss, feature_loss, structure_loss, total_loss)
from .metrics import MetricReport, psnr, ssim
from .morphable import (Camera, ShapeModel, StructureTarget, default_camera,
                        make_synthetic_model, project, render_target, sample_shape)
from .training import (Adam, RunConfig, TrainingState, adam_step, evaluate, infer,
                       load_checkpoint, overfit_run_config, save_checkpoint,
                       toy_run_config, train)

__version__ = "0.1.0"

__all__ = [
    "Adam", "Camera", "DctCoefficientMap", "DimensionError", "Discriminator",
    "DiscriminatorConfig", "FeatureExtractor", "Generator", "GeneratorConfig",
    "GeneratorOutput", "LossWeights", "MetricReport", "NumericError", "RunConfig",
    "ShapeModel", "StructureTarget", "Tensor", "TrainingDiverged", "TrainingState",
    "UsageError", "adam_step", "adversarial_losses", "dct_block", "dct_loss",
    "dct_map_to_image", "default_camera", "evaluate", "feature_loss", "idct_block",
    "image_to_dct_map", "infer", "load_checkpoint", "make_synthetic_model",
    "overfit_run_config", "project", "psnr", "render_target", "sample_shape",
    "save_checkpoint", "ssim", "structure_loss", "tensor", "total_loss",
    "toy_run_config", "train",
]
