"""Reference stdio evaluation worker: a mock adapter trainer behind the
line-delimited request/response protocol."""

from .trainer import (
    MockTrainer,
    WorkerConfig,
    mock_train,
    trainable_param_count,
)

__version__ = "0.1.0"
