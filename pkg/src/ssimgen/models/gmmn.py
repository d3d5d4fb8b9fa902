"""Generative moment matching: a generator fed uniform noise, trained to
minimise biased MMD^2 to the data, in pixel space or an autoencoder's code
space."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigError
from ..imgio import Dataset
from . import losses
from ._common import check_finite, epoch_means, eval_noise, guard, log, minibatches, prepare, rng_descriptor
from .config import Checkpoint, TrainConfig
from .mlp import MlpSpec, forward, init_params, predict


def _mmd_loss(cfg: TrainConfig, layout, gspec, dec):
    """Build loss(generator params, noise, real batch) for the configured kernel/space."""

    def loss(gparams, z, real):
        gen = forward(gspec, gparams, z)
        if dec is not None and cfg.kernel == "ssim":
            gen = forward(dec[0], dec[1], gen)  # decode codes, compare images
        if cfg.kernel == "ssim":
            return losses.ssim_kernel_mmd2(gen, ad.as_tensor(real), layout, cfg.ssim_mode)
        return losses.rbf_mmd2(gen, ad.as_tensor(real), cfg.gamma)

    return loss


def train_gmmn(data: Dataset, cfg: TrainConfig, autoencoder: Checkpoint | None = None) -> Checkpoint:
    if cfg.variant not in ("gmmn-data", "gmmn-code"):
        raise ConfigError(f"train_gmmn cannot train variant {cfg.variant!r}")
    prep = prepare(data, cfg)
    layout = losses.PatchLayout(prep.shape, cfg.window, cfg.stride)
    specs, dec, encode = {}, None, None
    if cfg.variant == "gmmn-code":
        if autoencoder is None or autoencoder.variant != "autoencoder":
            raise ConfigError("gmmn-code needs a pretrained autoencoder checkpoint")
        if (autoencoder.image["height"], autoencoder.image["width"]) != prep.shape:
            raise ConfigError("autoencoder was trained on a different image shape")
        dspec, dparams = autoencoder.specs["decoder"], autoencoder.params["decoder"]
        espec, eparams = autoencoder.specs["encoder"], autoencoder.params["encoder"]
        dec = (dspec, [ad.Tensor(p) for p in dparams])
        specs["decoder"] = dspec
        out_dim, out_act = dspec.widths[0], "linear"

        def encode(x):
            return predict(espec, eparams, x)

    else:
        out_dim, out_act = prep.dim, cfg.output
    gspec = MlpSpec((cfg.latent_dim, *cfg.hidden, out_dim), cfg.activation, out_act)
    specs = {"generator": gspec, **specs}

    rng = np.random.default_rng(cfg.seed)
    gparams = init_params(gspec, rng)
    state = ad.AdamState.for_params(gparams, cfg.lr)
    loss_fn = _mmd_loss(cfg, layout, gspec, dec)

    # real side lives in code space for the rbf code-space kernel
    code_space = encode is not None and cfg.kernel == "rbf"
    train_real = encode(prep.train) if code_space else prep.train
    eval_real = encode(prep.eval) if code_space else prep.eval
    z_eval = eval_noise(cfg, len(eval_real), cfg.latent_dim)

    def evaluate() -> dict:
        raw = loss_fn([ad.Tensor(p) for p in gparams], z_eval, eval_real).item()
        return {"eval_mmd2": max(raw, 0.0), "eval_mmd2_raw": raw}

    initial = {"epoch": 0, **guard(evaluate, 0)}
    log.info("gmmn epoch 0 eval_mmd2=%.6g", initial["eval_mmd2"])
    history = []
    for epoch in range(1, cfg.epochs + 1):
        steps = []
        for idx in minibatches(rng, len(train_real), cfg.batch_size):
            z = rng.uniform(-1.0, 1.0, (len(idx), cfg.latent_dim))

            def step():
                leaves = [ad.Tensor(p) for p in gparams]
                total = loss_fn(leaves, z, train_real[idx])
                return total.item(), ad.backward(total, leaves)

            value, grads = guard(step, epoch)
            gparams, state = ad.adam_step(gparams, grads, state)
            steps.append({"loss": value, "mmd2": value})
        record = {"epoch": epoch, **epoch_means(steps), **guard(evaluate, epoch)}
        check_finite(record, epoch)
        history.append(record)
        log.info("gmmn epoch %d loss=%.6g eval_mmd2=%.6g", epoch, record["loss"], record["eval_mmd2"])

    params = {"generator": gparams}
    if dec is not None:
        params["decoder"] = [np.array(p) for p in autoencoder.params["decoder"]]
    return Checkpoint(cfg.variant, specs, params, cfg, prep.image_meta(), history, initial, rng_descriptor(rng))
