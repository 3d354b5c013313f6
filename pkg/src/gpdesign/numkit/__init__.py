"""Numerical substrate: thin SVD, a small reverse-mode engine, optimizers."""

from .net import (
    ACTIVATIONS,
    Conv2d,
    ConvTranspose2d,
    Dense,
    NetworkSpec,
    Reshape,
    init_params,
    net_backward,
    net_forward,
    spec_from_dicts,
    spec_to_dicts,
)
from .optim import LrSchedule, OptimizerState, lr_at, optimizer_step
from .svd import SvdResult, thin_svd, truncate

__all__ = [
    "ACTIVATIONS",
    "Dense",
    "Conv2d",
    "ConvTranspose2d",
    "Reshape",
    "NetworkSpec",
    "init_params",
    "net_forward",
    "net_backward",
    "spec_to_dicts",
    "spec_from_dicts",
    "OptimizerState",
    "optimizer_step",
    "LrSchedule",
    "lr_at",
    "SvdResult",
    "thin_svd",
    "truncate",
]
