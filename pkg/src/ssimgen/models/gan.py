"""Adversarial trainers: the log-loss GAN (optionally with a squared SSIM
distance term on the generator) and the least-squares GAN, whose squared
errors may be swapped for patch-summed squared SSIM distances between an
image-shaped discriminator score map and constant target maps."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigError
from ..imgio import Dataset
from . import losses
from ._common import check_finite, epoch_means, eval_noise, guard, log, minibatches, prepare, rng_descriptor
from .config import Checkpoint, TrainConfig
from .mlp import MlpSpec, forward, init_params, predict

# ---------------------------------------------------------------- loss graphs


def gan_d_terms(dspec, dparams, real, fake):
    """D maximises log D(x) + log(1 - D(G(z))); returned as losses to minimise."""
    lr = forward(dspec, dparams, real, logits=True)
    lf = forward(dspec, dparams, fake, logits=True)
    return ad.mean(ad.softplus(-lr)), ad.mean(ad.softplus(lf))


def gan_g_terms(gspec, gparams, dspec, dparams, z, paired_real, layout, center=True):
    """Non-saturating -log D(G(z)) and the mean patch-summed squared SSIM
    distance between each fake and its paired real image."""
    fake = forward(gspec, gparams, z)
    lf = forward(dspec, dparams, fake, logits=True)
    adv = ad.mean(ad.softplus(-lf))
    ssim_term = ad.mean(losses.patch_dist2(ad.as_tensor(paired_real), fake, layout, center))
    return adv, ssim_term


def _target(shape, value):
    return ad.Tensor(np.full(shape, float(value)))


def lsgan_error(cfg, score, target: float, score_layout) -> ad.Tensor:
    """1/2 (score - target)^2, or its patch-summed squared SSIM counterpart."""
    if cfg.variant == "lsgan-ssim":
        t = _target(score.shape, target)
        return ad.mean(losses.patch_dist2(score, t, score_layout, cfg.score_center)) * 0.5
    return ad.mean(ad.square(score - target)) * 0.5


def lsgan_d_terms(cfg, dspec, dparams, real, fake, score_layout):
    sr = forward(dspec, dparams, real)
    sf = forward(dspec, dparams, fake)
    return lsgan_error(cfg, sr, cfg.lsgan_b, score_layout), lsgan_error(cfg, sf, cfg.lsgan_a, score_layout)


def lsgan_g_term(cfg, gspec, gparams, dspec, dparams, z, score_layout):
    sf = forward(dspec, dparams, forward(gspec, gparams, z))
    return lsgan_error(cfg, sf, cfg.lsgan_c, score_layout)


# ---------------------------------------------------------------- shared loop


def discriminator_accuracy(dspec, dparams, real, fake) -> float:
    lr = forward(dspec, dparams, real, logits=True).data
    lf = forward(dspec, dparams, fake, logits=True).data
    return float((np.sum(lr > 0) + np.sum(lf < 0)) / (lr.size + lf.size))


def _train_adversarial(data: Dataset, cfg: TrainConfig, least_squares: bool) -> Checkpoint:
    prep = prepare(data, cfg)
    layout = losses.PatchLayout(prep.shape, cfg.window, cfg.stride)
    score_layout = losses.PatchLayout(prep.shape, cfg.window, cfg.stride, range_l=1.0)
    score_ssim = cfg.variant == "lsgan-ssim"
    gspec = MlpSpec((cfg.latent_dim, *cfg.hidden, prep.dim), cfg.activation, "sigmoid")
    d_out = prep.dim if score_ssim else 1
    dspec = MlpSpec((prep.dim, *cfg.hidden, d_out), cfg.activation, "linear" if least_squares else "sigmoid")
    rng = np.random.default_rng(cfg.seed)
    gparams, dparams = init_params(gspec, rng), init_params(dspec, rng)
    gstate = ad.AdamState.for_params(gparams, cfg.lr, beta1=0.5)
    dstate = ad.AdamState.for_params(dparams, cfg.lr, beta1=0.5)
    lam = cfg.lambda_ssim if cfg.variant == "gan-ssim" else 0.0
    z_eval = eval_noise(cfg, len(prep.eval), cfg.latent_dim)

    def d_terms(dp, real, fake):
        if least_squares:
            return lsgan_d_terms(cfg, dspec, dp, real, fake, score_layout)
        return gan_d_terms(dspec, dp, real, fake)

    def g_terms(gp, dp, z, paired):
        if least_squares:
            return {"g_loss": lsgan_g_term(cfg, gspec, gp, dspec, dp, z, score_layout)}
        adv, raw = gan_g_terms(gspec, gp, dspec, dp, z, paired, layout, cfg.ssim_center)
        weighted = raw * lam
        return {"g_loss": adv + weighted, "g_adv": adv, "g_ssim": weighted, "g_ssim_raw": raw}

    def d_step(real):
        nonlocal dparams, dstate
        z = rng.uniform(-1.0, 1.0, (len(real), cfg.latent_dim))
        fake = predict(gspec, gparams, z)
        leaves = [ad.Tensor(p) for p in dparams]
        d_real, d_fake = d_terms(leaves, real, fake)
        total = d_real + d_fake
        grads = ad.backward(total, leaves)
        dparams, dstate = ad.adam_step(dparams, grads, dstate)
        return {"d_loss": total.item(), "d_real": d_real.item(), "d_fake": d_fake.item()}

    def g_step(real):
        nonlocal gparams, gstate
        z = rng.uniform(-1.0, 1.0, (len(real), cfg.latent_dim))
        paired = real[rng.permutation(len(real))]
        leaves = [ad.Tensor(p) for p in gparams]
        terms = g_terms(leaves, [ad.Tensor(p) for p in dparams], z, paired)
        grads = ad.backward(terms["g_loss"], leaves)
        gparams, gstate = ad.adam_step(gparams, grads, gstate)
        return {k: v.item() for k, v in terms.items()}

    def evaluate() -> dict:
        dp = [ad.Tensor(p) for p in dparams]
        fake = predict(gspec, gparams, z_eval)
        d_real, d_fake = d_terms(dp, prep.eval, fake)
        g = g_terms([ad.Tensor(p) for p in gparams], dp, z_eval, prep.eval)
        out = {"eval_d_loss": d_real.item() + d_fake.item(), "eval_g_loss": g["g_loss"].item()}
        if not least_squares:
            out["d_acc"] = discriminator_accuracy(dspec, dparams, prep.eval, fake)
        return out

    def warmup():
        for _ in range(cfg.d_warmup):
            idx = rng.choice(len(prep.train), size=min(cfg.batch_size, len(prep.train)), replace=False)
            d_step(prep.train[idx])

    guard(warmup, 0)
    initial = {"epoch": 0, **guard(evaluate, 0)}
    history = []
    for epoch in range(1, cfg.epochs + 1):
        steps = []
        for idx in minibatches(rng, len(prep.train), cfg.batch_size):
            real = prep.train[idx]

            def step():
                rec = {}
                for _ in range(cfg.d_steps):
                    rec = d_step(real)
                rec.update(g_step(real))
                return rec

            steps.append(guard(step, epoch))
        record = {"epoch": epoch, **epoch_means(steps), **guard(evaluate, epoch)}
        check_finite(record, epoch)
        history.append(record)
        log.info(
            "%s epoch %d d_loss=%.6g g_loss=%.6g eval_g_loss=%.6g",
            cfg.variant, epoch, record["d_loss"], record["g_loss"], record["eval_g_loss"],
        )
    return Checkpoint(
        cfg.variant,
        {"generator": gspec, "discriminator": dspec},
        {"generator": gparams, "discriminator": dparams},
        cfg,
        prep.image_meta(),
        history,
        initial,
        rng_descriptor(rng),
    )


def train_gan(data: Dataset, cfg: TrainConfig) -> Checkpoint:
    if cfg.variant not in ("gan", "gan-ssim"):
        raise ConfigError(f"train_gan cannot train variant {cfg.variant!r}")
    return _train_adversarial(data, cfg, least_squares=False)


def train_lsgan(data: Dataset, cfg: TrainConfig) -> Checkpoint:
    if cfg.variant not in ("lsgan", "lsgan-ssim"):
        raise ConfigError(f"train_lsgan cannot train variant {cfg.variant!r}")
    return _train_adversarial(data, cfg, least_squares=True)
