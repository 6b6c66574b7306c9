"""
Models module for the MOHSA system.
Vision Transformer, its config files and the AdamW optimizer.
"""

from .vit import (
    ModelConfig,
    ModelWeights,
    LabelError,
    expected_weight_shapes,
    init_weights,
    forward,
    loss,
    predictions,
    patchify,
)
from .config_file import (
    SYNTHETIC,
    TrainConfig,
    load_model_config,
    load_train_config,
    parse_key_values,
    render_config,
)
from .optimizer import AdamW, AdamWState, adamw_step, clip_grad_norm, decay_mask, lr_at

__all__ = [
    'ModelConfig', 'ModelWeights', 'LabelError', 'expected_weight_shapes', 'init_weights',
    'forward', 'loss', 'predictions', 'patchify',
    'SYNTHETIC', 'TrainConfig', 'load_model_config', 'load_train_config', 'parse_key_values', 'render_config',
    'AdamW', 'AdamWState', 'adamw_step', 'clip_grad_norm', 'decay_mask', 'lr_at',
]
