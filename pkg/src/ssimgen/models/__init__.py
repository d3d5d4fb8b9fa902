from .config import Checkpoint, TrainConfig, VARIANTS
from .gan import discriminator_accuracy, train_gan, train_lsgan
from .gmmn import train_gmmn
from .mlp import MlpSpec
from .sampling import evaluate_nn_ssim, sample
from .vae import reconstruct, train_autoencoder, train_vae

__all__ = [
    "Checkpoint",
    "MlpSpec",
    "TrainConfig",
    "VARIANTS",
    "discriminator_accuracy",
    "evaluate_nn_ssim",
    "reconstruct",
    "sample",
    "train",
    "train_autoencoder",
    "train_gan",
    "train_gmmn",
    "train_lsgan",
    "train_vae",
]


def train(data, cfg: TrainConfig, autoencoder=None) -> Checkpoint:
    """Dispatch on ``cfg.variant``."""
    v = cfg.variant
    if v == "autoencoder":
        return train_autoencoder(data, cfg)
    if v.startswith("gmmn"):
        return train_gmmn(data, cfg, autoencoder)
    if v == "vae":
        return train_vae(data, cfg)
    if v.startswith("lsgan"):
        return train_lsgan(data, cfg)
    return train_gan(data, cfg)
