"""Losses, optimizer, training loops and the linear probe."""
from biascope.training.losses import nt_xent_loss, supervised_loss
from biascope.training.loop import Checkpoint, TrainConfig, checkpoint_name, load_checkpoint, train
from biascope.training.optim import OptimizerState, adam_step
from biascope.training.probe import ProbeResult, linear_probe

__all__ = [
    "Checkpoint",
    "OptimizerState",
    "ProbeResult",
    "TrainConfig",
    "adam_step",
    "checkpoint_name",
    "linear_probe",
    "load_checkpoint",
    "nt_xent_loss",
    "supervised_loss",
    "train",
]
