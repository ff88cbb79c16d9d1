"""
Run configuration, training, checkpoints, inference and diagnostics.
"""

from .checkpoint import Checkpoint, CheckpointError, apply_checkpoint, load_checkpoint, save_checkpoint
from .inference import EvalRow, InferenceError, evaluate_folder, infer_full, infer_to_size, mean_rows
from .runconfig import PRESETS, ConfigError, RunConfig, parse_config
from .trainer import (
    FULL_TRAIN_CONFIG, EpochResult, TrainConfig, Trainer, TrainingError, TrainPair, forward_loss,
    lr_schedule, make_pair, train_step,
)

__all__ = [
    'Checkpoint', 'CheckpointError', 'ConfigError', 'EpochResult', 'EvalRow', 'InferenceError',
    'FULL_TRAIN_CONFIG', 'PRESETS', 'RunConfig', 'TrainConfig', 'TrainPair', 'Trainer',
    'TrainingError', 'apply_checkpoint', 'evaluate_folder', 'forward_loss', 'infer_full',
    'infer_to_size', 'load_checkpoint', 'lr_schedule', 'make_pair', 'mean_rows', 'parse_config',
    'save_checkpoint', 'train_step',
]
