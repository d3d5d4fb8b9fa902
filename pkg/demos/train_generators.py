"""
Training small generators with SSIM losses
==========================================

A moment-matching generator, a VAE with an SSIM reconstruction term and a
least-squares GAN, each trained for a few seconds on 8x8 synthetic images.
"""

from ssimgen import imgio
from ssimgen.models import TrainConfig, evaluate_nn_ssim, sample, train

bars = imgio.synth("bars-stripes", 8, 200, 42)
blobs = imgio.synth("blobs", 8, 200, 42)

ck = train(bars, TrainConfig(variant="gmmn-data", epochs=40, lr=3e-3, latent_dim=8, seed=42))
print("gmmn  eval MMD^2", ck.initial["eval_mmd2"], "->", ck.history[-1]["eval_mmd2"])
held = imgio.synth("bars-stripes", 8, 50, 7)
print("      nn-ssim of samples", evaluate_nn_ssim(sample(ck, 50, 0), held))

ck = train(blobs, TrainConfig(variant="vae", recon="ssim", epochs=60, lr=3e-3, latent_dim=4, seed=42))
print("vae   held-out mean SSIM", ck.initial["eval_mean_ssim"], "->", ck.history[-1]["eval_mean_ssim"])

ck = train(bars, TrainConfig(variant="lsgan-ssim", epochs=30, lr=1e-3, seed=42))
print("lsgan generator loss", ck.initial["eval_g_loss"], "->", ck.history[-1]["eval_g_loss"])

grid = imgio.montage(sample(ck, 16, 0).images)
print("montage", grid.shape)
