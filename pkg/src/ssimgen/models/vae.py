"""Deterministic autoencoder (code space for GMMN) and the VAE whose
reconstruction term may be the patch-summed squared SSIM distance."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigError
from ..imgio import Dataset
from . import losses
from ._common import (
    check_finite,
    epoch_means,
    guard,
    log,
    mean_ssim_unit,
    minibatches,
    prepare,
    rng_descriptor,
)
from .config import Checkpoint, TrainConfig
from .mlp import MlpSpec, forward, init_params, predict


def _adam_all(nets: list[list[np.ndarray]], grads, states):
    out = []
    pos = 0
    for params, state in zip(nets, states):
        g = grads[pos : pos + len(params)]
        pos += len(params)
        new, _ = ad.adam_step(params, g, state)
        out.append(new)
    return out


def train_autoencoder(data: Dataset, cfg: TrainConfig) -> Checkpoint:
    """Encoder/decoder pair trained on squared l2 reconstruction."""
    prep = prepare(data, cfg)
    if cfg.latent_dim > prep.dim:
        raise ConfigError("latent_dim must not exceed the pixel count")
    espec = MlpSpec((prep.dim, *cfg.hidden, cfg.latent_dim), cfg.activation, "linear")
    dspec = MlpSpec((cfg.latent_dim, *reversed(cfg.hidden), prep.dim), cfg.activation, cfg.output)
    rng = np.random.default_rng(cfg.seed)
    enc, dec = init_params(espec, rng), init_params(dspec, rng)
    states = [ad.AdamState.for_params(enc, cfg.lr), ad.AdamState.for_params(dec, cfg.lr)]
    l2 = prep.range_l**2

    def evaluate() -> dict:
        recon = predict(dspec, dec, predict(espec, enc, prep.eval))
        return {"eval_mse": float(np.mean((recon - prep.eval) ** 2) * l2)}

    initial = {"epoch": 0, **guard(evaluate, 0)}
    history = []
    for epoch in range(1, cfg.epochs + 1):
        steps = []
        for idx in minibatches(rng, len(prep.train), cfg.batch_size):
            x = prep.train[idx]

            def step():
                e, d = [ad.Tensor(p) for p in enc], [ad.Tensor(p) for p in dec]
                xhat = forward(dspec, d, forward(espec, e, x))
                total = ad.mean(ad.tsum(ad.square(xhat - x), axis=-1))
                return total.item(), ad.backward(total, e + d)

            value, grads = guard(step, epoch)
            enc, dec = _adam_all([enc, dec], grads, states)
            steps.append({"loss": value, "recon": value})
        record = {"epoch": epoch, **epoch_means(steps), **evaluate()}
        check_finite(record, epoch)
        history.append(record)
        log.info("autoencoder epoch %d loss=%.6g eval_mse=%.6g", epoch, record["loss"], record["eval_mse"])
    return Checkpoint(
        "autoencoder",
        {"encoder": espec, "decoder": dspec},
        {"encoder": enc, "decoder": dec},
        cfg.replace(variant="autoencoder"),
        prep.image_meta(),
        history,
        initial,
        rng_descriptor(rng),
    )


def vae_terms(cfg: TrainConfig, layout, espec, dspec, enc, dec, x, eps):
    """Per-sample (kl, recon) tensors for one batch; ``eps`` drives the
    reparameterised draw z = mu + exp(logvar / 2) * eps."""
    L = cfg.latent_dim
    h = forward(espec, enc, x)
    mu, logvar = h[:, :L], h[:, L:]
    z = mu + ad.exp(logvar * 0.5) * eps
    kl = losses.gaussian_kl(mu, logvar)
    if cfg.recon == "bce":
        logits = forward(dspec, dec, z, logits=True)
        recon = ad.tsum(ad.softplus(logits) - logits * x, axis=-1)
    else:
        xhat = forward(dspec, dec, z)
        if cfg.recon == "l2":
            recon = ad.tsum(ad.square(xhat - x), axis=-1)
        else:
            recon = losses.patch_dist2(xhat, ad.as_tensor(x), layout, cfg.ssim_center)
    return kl, recon


def vae_loss(cfg, layout, espec, dspec, enc, dec, x, eps):
    kl, recon = vae_terms(cfg, layout, espec, dspec, enc, dec, x, eps)
    return ad.mean(kl) + ad.mean(recon), kl, recon


def reconstruct(ckpt: Checkpoint, x_unit: np.ndarray) -> np.ndarray:
    """Decoder applied to the posterior mean; unit-range rows in and out."""
    L = ckpt.config.latent_dim
    h = predict(ckpt.specs["encoder"], ckpt.params["encoder"], x_unit)
    return predict(ckpt.specs["decoder"], ckpt.params["decoder"], h[:, :L])


def train_vae(data: Dataset, cfg: TrainConfig) -> Checkpoint:
    if cfg.variant != "vae":
        raise ConfigError(f"train_vae cannot train variant {cfg.variant!r}")
    prep = prepare(data, cfg)
    layout = losses.PatchLayout(prep.shape, cfg.window, cfg.stride)
    L = cfg.latent_dim
    espec = MlpSpec((prep.dim, *cfg.hidden, 2 * L), cfg.activation, "linear")
    dspec = MlpSpec((L, *reversed(cfg.hidden), prep.dim), cfg.activation, "sigmoid")
    rng = np.random.default_rng(cfg.seed)
    enc, dec = init_params(espec, rng), init_params(dspec, rng)
    states = [ad.AdamState.for_params(enc, cfg.lr), ad.AdamState.for_params(dec, cfg.lr)]

    def evaluate() -> dict:
        h = predict(espec, enc, prep.eval)
        xhat = predict(dspec, dec, h[:, :L])
        score = mean_ssim_unit(prep.eval, xhat, prep.shape, cfg.eval_window, cfg.eval_stride)
        return {"eval_mean_ssim": float(np.mean(score))}

    initial = {"epoch": 0, **guard(evaluate, 0)}
    history = []
    for epoch in range(1, cfg.epochs + 1):
        steps = []
        for idx in minibatches(rng, len(prep.train), cfg.batch_size):
            x = prep.train[idx]
            eps = rng.standard_normal((len(idx), L))

            def step():
                e, d = [ad.Tensor(p) for p in enc], [ad.Tensor(p) for p in dec]
                total, kl, recon = vae_loss(cfg, layout, espec, dspec, e, d, x, eps)
                rec = {"loss": total.item(), "kl": float(kl.data.mean()), "recon": float(recon.data.mean())}
                return rec, ad.backward(total, e + d)

            rec, grads = guard(step, epoch)
            enc, dec = _adam_all([enc, dec], grads, states)
            steps.append(rec)
        record = {"epoch": epoch, **epoch_means(steps), **evaluate()}
        check_finite(record, epoch)
        history.append(record)
        log.info("vae epoch %d loss=%.6g eval_mean_ssim=%.4f", epoch, record["loss"], record["eval_mean_ssim"])
    return Checkpoint(
        "vae",
        {"encoder": espec, "decoder": dspec},
        {"encoder": enc, "decoder": dec},
        cfg,
        prep.image_meta(),
        history,
        initial,
        rng_descriptor(rng),
    )
