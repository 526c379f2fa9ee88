"""Toy-scale camera parameter regressor.

Trains a convolutional regressor on camdist-generated datasets to predict
the eight camera parameters (horizontal FOV, principal point and the five
distortion coefficients) from a single image, and emits predictions files
that the camdist error-map evaluation consumes.
"""

from .config import TrainConfig, TransformFlags
from .data import (
    ManifestDataset,
    Record,
    decode_targets,
    encode_targets,
    load_manifest,
    resolution_batch_sampler,
)
from .evaluate import evaluate_robustness, predict, render_robustness_row
from .model import CameraParameterRegressor, build_model
from .training import TrainHistory, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
