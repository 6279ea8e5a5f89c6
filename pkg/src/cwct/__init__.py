"""Circular-window streaming inference for online action detection."""
from .config import ModelConfig, default_config, validate
from .engine import SlidingEngine, StreamingEngine, batch_forward, new_engine
from .weights import WeightStore, init_weights, load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "ModelConfig", "default_config", "validate",
    "StreamingEngine", "SlidingEngine", "batch_forward", "new_engine",
    "WeightStore", "init_weights", "load_weights", "save_weights",
]
