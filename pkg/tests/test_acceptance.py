"""The acceptance suite: nine end-to-end criteria at their stated tolerances
and time budgets.  Each test prints one PASS/FAIL line, visible with or
without ``-s``."""

import inspect
import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

import oracles
import test_gradients
from ssimgen import csvio, imgio, kernels, mmd, ssim
from ssimgen.cli import bench_rows, main
from ssimgen.imgio import Dataset
from ssimgen.mmd import GramBlocks
from ssimgen.models import Checkpoint, TrainConfig, train
from ssimgen.ssim import Block


@contextmanager
def criterion(capsys, number, title, budget):
    start = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        ok = ok and elapsed < budget
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({elapsed:.2f}s of {budget:g}s)")
    assert elapsed < budget, f"criterion {number} took {elapsed:.1f}s, budget {budget}s"


# ---------------------------------------------------------------- 1


def test_1_metric_identities(capsys):
    with criterion(capsys, 1, "metric identities on 1000 block pairs", 5):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            q = int(rng.integers(2, 65))
            l = float(rng.choice([1.0, 255.0]))
            x = Block(rng.uniform(0, l, q), l)
            y = Block(rng.uniform(0, l, q), l)
            assert abs(ssim.ssim(x, x) - 1) <= 1e-12
            d = ssim.dist_eq1(x, y)
            assert abs(d * d + ssim.ssim_zero_mean(x, y) - 1) <= 1e-10
            comp = ssim.ssim_components(x, y)
            assert abs(comp.s1) <= 1 + 1e-12 and abs(comp.s2) <= 1 + 1e-12
            assert ssim.ssim(x, y) == ssim.ssim(y, x)
            assert ssim.ssim_zero_mean(x, y) == ssim.ssim_zero_mean(y, x)
            assert d == ssim.dist_eq1(y, x)
            assert ssim.dist_eq2(x, y) == ssim.dist_eq2(y, x)


# ---------------------------------------------------------------- 2


def test_2_hand_derived_values(capsys):
    with criterion(capsys, 2, "hand-derived values", 1):
        a, b = Block([1.0, -1.0], 1.0), Block([-1.0, 1.0], 1.0)
        assert ssim.ssim_zero_mean(a, b) == pytest.approx(-0.999550, abs=1e-5)
        assert ssim.dist_eq1(a, b) == pytest.approx(1.414051, abs=1e-5)
        const, zero = Block([5.0] * 4, 10.0), Block([0.0] * 4, 10.0)
        assert ssim.ssim(const, zero) == pytest.approx(3.9984e-4, abs=1e-5)
        assert ssim.dist_eq2(const, zero) == pytest.approx(0.999800, abs=1e-5)
        K = kernels.double_center(np.array([[0.0, 4.0], [4.0, 0.0]]))
        assert np.allclose(K.entries, [[1, -1], [-1, 1]], atol=1e-5)
        assert np.allclose(kernels.eigen_sym(K).eigenvalues, [2, 0], atol=1e-5)


# ---------------------------------------------------------------- 3


def test_3_kernel_invariants(capsys):
    with criterion(capsys, 3, "kernel invariants on seeded datasets", 30):
        for kind in ("uniform-noise", "blobs", "bars-stripes"):
            for mode in ("eq1", "eq2"):
                ds = imgio.synth(kind, 8, 20, 11)
                K = kernels.ssim_kernel(ds, 4, 2, mode)
                e = K.entries
                assert np.max(np.abs(e.sum(axis=1))) < 1e-8
                assert np.max(np.abs(e @ np.ones(len(ds)))) < 1e-8
                s = kernels.eigen_sym(K)
                scale = max(1.0, np.linalg.norm(e))
                assert abs(s.eigenvalues.sum() - np.trace(e)) < 1e-8 * scale
                rec = (s.eigenvectors * s.eigenvalues) @ s.eigenvectors.T
                assert np.linalg.norm(rec - e) < 1e-8 * scale
                P = kernels.psd_project(K)
                assert kernels.eigen_sym(P).eigenvalues.min() >= -1e-8
                assert np.linalg.eigvalsh(P.entries).min() >= -1e-8


# ---------------------------------------------------------------- 4


def test_4_mmd_oracle_equivalence(capsys):
    with criterion(capsys, 4, "MMD estimators equal brute-force double sums", 5):
        rng = np.random.default_rng(4)
        worst = 0.0
        for nx in range(1, 6):
            for ny in range(1, 6):
                for trial in range(4):
                    pts = rng.normal(size=(nx + ny, 3))
                    if trial == 0:
                        K = kernels.rbf_kernel(pts, 0.5).entries
                    elif trial == 1:
                        K = kernels.ssim_kernel(imgio.synth("uniform-noise", 4, nx + ny, trial + nx * 10 + ny), 2, 2).entries
                    else:
                        a = rng.normal(size=(nx + ny, nx + ny))
                        K = a @ a.T
                    g = GramBlocks.from_pooled(K, nx)
                    xx, yy, xy = g.Kxx.tolist(), g.Kyy.tolist(), g.Kxy.tolist()
                    worst = max(worst, abs(mmd.mmd2_biased(g).raw - oracles.mmd2_biased(xx, yy, xy)))
                    if nx >= 2 and ny >= 2:
                        worst = max(worst, abs(mmd.mmd2_unbiased(g).mmd2 - oracles.mmd2_unbiased(xx, yy, xy)))
        assert worst < 1e-12


# ---------------------------------------------------------------- 5


def test_5_permutation_calibration_and_power(capsys):
    with criterion(capsys, 5, "permutation test calibration and power", 600):
        for kind in ("blobs", "bars-stripes", "uniform-noise"):
            rejections = 0
            for trial in range(200):
                ds = imgio.synth(kind, 8, 20, 1000 + trial)
                K = kernels.ssim_kernel(ds, 4, 4)
                rejections += mmd.permutation_test(K, 10, 10, 99, trial).p_value <= 0.05
            assert 0.01 <= rejections / 200 <= 0.12, (kind, rejections / 200)
        x, y = imgio.synth("bars-stripes", 8, 20, 0), imgio.synth("blobs", 8, 20, 0)
        K = kernels.ssim_kernel(Dataset(x.images + y.images), 4, 4)
        assert mmd.permutation_test(K, 20, 20, 99, 0).p_value < 0.05


# ---------------------------------------------------------------- 6


def _gradient_cases():
    for name, fn in inspect.getmembers(test_gradients, inspect.isfunction):
        if not name.startswith("test_"):
            continue
        marks = {m.args[0]: m.args[1] for m in getattr(fn, "pytestmark", []) if m.name == "parametrize"}
        grid = [{}]
        for argnames, values in marks.items():
            names = [n.strip() for n in argnames.split(",")]
            grid = [
                {**g, **dict(zip(names, v if len(names) > 1 else (v,)))} for g in grid for v in values
            ]
        for kw in grid:
            yield name, fn, kw


def test_6_gradient_correctness(capsys):
    with criterion(capsys, 6, "central-difference checks of every loss graph", 120):
        counts = {}
        for name, fn, kw in _gradient_cases():
            fn(**kw)
            counts[name] = counts.get(name, 0) + 1
        for name, n in counts.items():
            if name != "test_losses_at_initialisation":
                assert n >= 20, name


# ---------------------------------------------------------------- 7


def _steps(ck, n_train):
    return ck.config.epochs * -(-n_train // ck.config.batch_size)


def test_7_training_progress(capsys):
    with criterion(capsys, 7, "training progress at seed 42", 900):
        bars = imgio.synth("bars-stripes", 8, 200, 42)
        blobs = imgio.synth("blobs", 8, 200, 42)
        n_train = 160
        for mode in ("eq1", "eq2"):
            cfg = TrainConfig(variant="gmmn-data", ssim_mode=mode, epochs=40, lr=3e-3, latent_dim=8, seed=42)
            ck = train(bars, cfg)
            assert _steps(ck, n_train) <= 5000
            assert ck.history[-1]["eval_mmd2"] < 0.5 * ck.initial["eval_mmd2"]

        ck = train(blobs, TrainConfig(variant="vae", recon="ssim", epochs=60, lr=3e-3, latent_dim=4, seed=42))
        assert _steps(ck, n_train) <= 5000
        assert ck.history[-1]["eval_mean_ssim"] > ck.initial["eval_mean_ssim"] + 0.05

        for variant in ("lsgan", "lsgan-ssim"):
            ck = train(bars, TrainConfig(variant=variant, epochs=100, lr=1e-3, seed=42))
            assert _steps(ck, n_train) <= 5000
            assert ck.history[-1]["eval_g_loss"] < ck.initial["eval_g_loss"]

        a = train(bars, TrainConfig(variant="gan", epochs=10, seed=42))
        b = train(bars, TrainConfig(variant="gan-ssim", lambda_ssim=0.0, epochs=10, seed=42))
        for name in a.params:
            for p, q in zip(a.params[name], b.params[name]):
                assert np.array_equal(p, q)


# ---------------------------------------------------------------- 8


def test_8_mse_vs_ssim_benchmark(capsys):
    with criterion(capsys, 8, "equal-MSE distortions separated by SSIM distance", 30):
        image = imgio.with_headroom(imgio.parse_synth_spec("bars-stripes:128:1:0")[0], 0.25)
        rows = {r[0]: r for r in bench_rows(image, 400.0, 0, 8, 1)}
        for r in rows.values():
            assert abs(r[2] - 400.0) <= 4.0
        shift, noise = rows["mean-shift"], rows["gauss-noise"]
        for col in (4, 5):  # eq1 and eq2 mean distances
            lo, hi = sorted((shift[col], noise[col]))
            assert hi >= 1.5 * lo


# ---------------------------------------------------------------- 9


def _run(capsys, argv):
    assert main([str(a) for a in argv]) == 0
    return capsys.readouterr().out


def _snapshot(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_9_determinism_and_formats(capsys, tmp_path):
    with criterion(capsys, 9, "byte-identical reruns and lossless formats", 120):
        ds = imgio.synth("blobs", 16, 2, 0)
        a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
        imgio.save_pgm(ds[0], a)
        imgio.save_pgm(ds[1], b, binary=False)
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"data": "bars-stripes:8:30:0", "variant": "vae", "epochs": 2, "hidden": [8]}))

        def commands(out):
            return [
                ["ssim", a, b, "--map", out / "map.csv"],
                ["kernel", "--synth", "blobs:8:6:1", "--psd-fix", "--out", out / "k"],
                ["mmd", "--x", "blobs:8:6:0", "--y", "uniform-noise:8:6:0", "--out", out / "mmd.csv"],
                ["mmd", "--x", "blobs:8:6:0", "--y", "uniform-noise:8:6:0", "--kernel", "rbf"],
                ["train", "--config", cfg, "--out", out / "t"],
                ["sample", "--ckpt", out / "t" / "checkpoint.json", "--out", out / "s.pgm"],
                ["bench", "--out", out / "bench.csv"],
            ]

        runs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            out.mkdir()
            stdout = [_run(capsys, c) for c in commands(out)]
            runs.append((stdout, _snapshot(out)))
        assert runs[0] == runs[1]

        # PGM: binary and ASCII encodings decode to the same pixels
        for im in ds:
            for binary in (True, False):
                back = imgio.parse_pgm(imgio.encode_pgm(im, binary))
                assert back == im
        # CSV matrices survive bit-for-bit
        m = np.random.default_rng(0).normal(size=(5, 4)) * 10.0 ** np.arange(-3, 1)
        csvio.write_matrix_csv(tmp_path / "m.csv", m)
        assert np.array_equal(csvio.read_matrix_csv(tmp_path / "m.csv"), m)
        # JSON checkpoints reload to identical bytes and parameters
        ck = Checkpoint.load(tmp_path / "r1" / "t" / "checkpoint.json")
        assert ck.to_json().encode() == (tmp_path / "r1" / "t" / "checkpoint.json").read_bytes()
        again = train(imgio.synth("bars-stripes", 8, 30, 0), ck.config)
        for net in ck.params:
            for p, q in zip(ck.params[net], again.params[net]):
                assert np.array_equal(p, q)
