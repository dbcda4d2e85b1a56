from .data import PreparedExample, prepare_example, prepare_query, prepare_split
from .loop import (
    LOSSES,
    TrainConfig,
    TrainResult,
    TrainState,
    batch_tokens,
    init_state,
    quick_recall_at_1,
    run_training,
    train_step,
)
from .losses import bbc_loss, kl_loss

__all__ = [
    "PreparedExample",
    "prepare_example",
    "prepare_query",
    "prepare_split",
    "LOSSES",
    "TrainConfig",
    "TrainResult",
    "TrainState",
    "batch_tokens",
    "init_state",
    "quick_recall_at_1",
    "run_training",
    "train_step",
    "bbc_loss",
    "kl_loss",
]
