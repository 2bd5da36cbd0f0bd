"""Trainable noise predictor: U-Net with manual backprop and Adam."""

from usdenoise.nnet.ops import l1_eval, mse_loss
from usdenoise.nnet.optim import TrainConfig, adam_step, lr_schedule
from usdenoise.nnet.train import (
    heldout_l1,
    load_model,
    save_model,
    train,
    write_loss_log,
)
from usdenoise.nnet.unet import (
    UNetConfig,
    UNetParams,
    check_compatible,
    init_params,
    time_embed,
    unet_backward,
    unet_forward,
)

__all__ = [
    "TrainConfig",
    "UNetConfig",
    "UNetParams",
    "adam_step",
    "check_compatible",
    "heldout_l1",
    "init_params",
    "l1_eval",
    "load_model",
    "lr_schedule",
    "mse_loss",
    "save_model",
    "time_embed",
    "train",
    "unet_backward",
    "unet_forward",
    "write_loss_log",
]
