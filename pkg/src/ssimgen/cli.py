"""Command-line entry point: ``ssimgen {ssim,kernel,mmd,train,bench,sample}``.

stdout carries machine-parsable ``key=value`` lines (or CSV for ``bench``);
progress and errors go to stderr.  Exit codes: 0 success, 2 usage or input
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

import jsonschema
import numpy as np

from . import csvio, imgio, kernels, mmd, ssim
from .errors import InputError, InvalidParam, NonFiniteLoss, NumericalError, SsimGenError
from .imgio import Dataset

log = logging.getLogger("ssimgen")


class CalibrationFailure(InputError):
    pass


def _emit(**kv) -> None:
    for k, v in kv.items():
        if isinstance(v, float):
            v = f"{v:.6f}" if k.startswith("mean_") or k == "mse" else f"{v:.10g}"
        print(f"{k}={v}")


def load_source(spec: str) -> Dataset:
    """A directory of PGMs, an IDX file, a single PGM, or ``kind:side:count:seed``."""
    p = Path(spec)
    if p.is_dir():
        return imgio.load_pgm_dir(p)
    if p.is_file():
        if p.suffix.lower() == ".pgm":
            return Dataset((imgio.load_pgm(p),), name=p.stem)
        return imgio.load_idx_images(p)
    if spec.count(":") == 3:
        return imgio.parse_synth_spec(spec)
    raise InvalidParam(f"{spec!r} is neither an existing path nor a synth spec")


def _default_window(window, shape, cap: int = 8) -> int:
    return window if window is not None else min(cap, *shape)


# ---------------------------------------------------------------- ssim


def cmd_ssim(args) -> int:
    a, b = imgio.load_pgm(args.a), imgio.load_pgm(args.b)
    window = _default_window(args.window, a.shape)
    dmap = ssim.distance_map(a, b, window, args.stride, args.mode)
    _emit(
        mean_ssim=ssim.mean_ssim(a, b, window, args.stride),
        mean_distance=float(np.mean(dmap.values)),
        frobenius=dmap.frobenius(),
        mse=imgio.mse(a, b),
        mode=args.mode,
        window=window,
        stride=args.stride,
    )
    if args.map:
        csvio.write_matrix_csv(args.map, dmap.values)
    return 0


# ---------------------------------------------------------------- kernel


def cmd_kernel(args) -> int:
    if args.distances:
        D = kernels.DistanceMatrix(csvio.read_matrix_csv(args.distances))
    else:
        data = load_source(args.dir or args.synth)
        window = _default_window(args.window, data.shape, args.window_cap)
        D = kernels.pairwise_distance_matrix(data, window, args.stride, args.mode)
    K = kernels.double_center(D, squared=args.squared)
    if args.psd_fix:
        K = kernels.psd_project(K)
    spec = kernels.spectrum_of(K)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csvio.write_matrix_csv(out / "D.csv", D.entries)
    csvio.write_matrix_csv(out / "K.csv", K.entries)
    csvio.atomic_write(out / "spectrum.csv", csvio.spectrum_to_csv(spec.eigenvalues, spec.clipped_mass).encode())
    _emit(
        n=K.n,
        row_sum_max_dev=float(np.max(np.abs(K.entries.sum(axis=1)))),
        min_eigenvalue=float(spec.eigenvalues[-1]),
        clipped_mass=spec.clipped_mass,
        psd_fixed=str(K.psd_fixed).lower(),
    )
    return 0


# ---------------------------------------------------------------- mmd


def pooled_kernel(x: Dataset, y: Dataset, kernel: str, window: int, stride: int, mode: str, gamma):
    if x.shape != y.shape or x.range_l != y.range_l:
        raise imgio.DimensionMismatch(f"samples differ: {x.shape} vs {y.shape}")
    pooled = Dataset(x.images + y.images, "pooled")
    if kernel == "ssim":
        return kernels.double_center(kernels.pairwise_distance_matrix(pooled, window, stride, mode)), None
    flat = pooled.array().reshape(len(pooled), -1) / pooled.range_l
    if gamma is None:
        sq = np.sum((flat[:, None] - flat[None]) ** 2, axis=-1)
        med = float(np.median(sq[np.triu_indices(len(flat), 1)]))
        gamma = 1.0 / med if med > 0 else 1.0
    return kernels.rbf_kernel(flat, gamma), gamma


def cmd_mmd(args) -> int:
    x, y = load_source(args.x), load_source(args.y)
    window = _default_window(args.window, x.shape, args.window_cap)
    K, gamma = pooled_kernel(x, y, args.kernel, window, args.stride, args.mode, args.gamma)
    res = mmd.permutation_test(K, len(x), len(y), args.permutations, args.seed)
    kv = dict(mmd2=res.observed_mmd2, p_value=res.p_value, B=res.permutations, seed=res.seed, kernel=args.kernel)
    if gamma is not None:
        kv["gamma"] = gamma
    _emit(**kv, n_x=res.n_x, n_y=res.n_y)
    if args.out:
        path = Path(args.out)
        existing = path.read_bytes() if path.exists() else b""
        row = csvio.table_to_csv(mmd.REPORT_HEADER, [res.csv_row()], include_header=not existing)
        csvio.atomic_write(path, existing + row.encode())
    return 0


# ---------------------------------------------------------------- train

RUN_KEYS = {"data", "output_dir", "autoencoder"}


def run_config_schema() -> dict:
    from .models.config import TrainConfig

    types = {int: "integer", float: "number", str: "string", bool: "boolean"}
    props = {}
    for f in fields(TrainConfig):
        default = getattr(TrainConfig(), f.name)
        if isinstance(default, tuple):
            props[f.name] = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}
        else:
            props[f.name] = {"type": types[type(default)]}
    props["data"] = {"type": "string"}
    props["output_dir"] = {"type": "string"}
    props["autoencoder"] = {"type": "string"}
    return {
        "type": "object",
        "properties": props,
        "required": ["data", "variant"],
        "additionalProperties": False,
    }


def load_run_config(path):
    from .models.config import TrainConfig

    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise imgio.IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidParam(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidParam("run config must be a JSON object")
    unknown = sorted(set(doc) - set(run_config_schema()["properties"]))
    if unknown:
        raise InvalidParam(f"unknown config key(s): {', '.join(unknown)}")
    try:
        jsonschema.validate(doc, run_config_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidParam(f"config error at {where}: {exc.message}") from exc
    cfg = TrainConfig.from_dict({k: v for k, v in doc.items() if k not in RUN_KEYS})
    return doc, cfg


def cmd_train(args) -> int:
    from .models import Checkpoint, train

    doc, cfg = load_run_config(args.config)
    out = Path(args.out or doc.get("output_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    data = load_source(doc["data"])
    ae = None
    if cfg.variant == "gmmn-code":
        if "autoencoder" in doc:
            ae = Checkpoint.load(doc["autoencoder"])
        else:
            log.info("training the code-space autoencoder first")
            ae = train(data, cfg.replace(variant="autoencoder"))
            ae.save(out / "autoencoder.json")
    ckpt = train(data, cfg, ae)
    ckpt.save(out / "checkpoint.json")
    rows = [ckpt.initial] + ckpt.history
    csvio.atomic_write(out / "history.csv", csvio.records_to_csv(rows).encode())
    final = ckpt.history[-1]
    _emit(variant=ckpt.variant, epochs=len(ckpt.history), **{k: v for k, v in final.items() if k != "epoch"})
    return 0


# ---------------------------------------------------------------- bench

# family -> (lower bracket, upper bracket, MSE increases with param)
BENCH_FAMILIES = {
    "gauss-noise": (0.0, None, True),
    "mean-shift": (0.0, None, True),
    "contrast-scale": (1e-6, 1.0, False),
    "box-blur": (0.0, 1.0, True),
    "salt-pepper": (0.0, 1.0, True),
}
BENCH_HEADER = ("family", "param", "mse", "mean_ssim", "mean_dist_eq1", "mean_dist_eq2")


def calibrate(image, family: str, target: float, seed: int, tol: float = 0.01, max_iter: int = 60):
    """Bisect the distortion parameter until MSE is within ``tol`` of ``target``."""
    lo, hi, increasing = BENCH_FAMILIES[family]
    if hi is None:
        hi = 4.0 * image.range_l
    lo_v, hi_v = (lo, hi) if increasing else (hi, lo)  # lo_v gives the smaller MSE

    def err(p):
        return imgio.mse(image, imgio.distort(image, family, p, seed))

    for _ in range(max_iter):
        mid = 0.5 * (lo_v + hi_v)
        m = err(mid)
        if abs(m - target) <= tol * target:
            return mid, m
        if m < target:
            lo_v = mid
        else:
            hi_v = mid
    raise CalibrationFailure(f"{family}: could not reach MSE {target:g} within {tol:.0%} in {max_iter} steps")


def bench_rows(image, target: float, seed: int, window: int, stride: int) -> list[tuple]:
    rows = []
    for family in BENCH_FAMILIES:
        param, m = calibrate(image, family, target, seed)
        dist = imgio.distort(image, family, param, seed)
        rows.append(
            (
                family,
                param,
                m,
                ssim.mean_ssim(image, dist, window, stride),
                ssim.mean_distance(image, dist, window, stride, "eq1"),
                ssim.mean_distance(image, dist, window, stride, "eq2"),
            )
        )
    return rows


def cmd_bench(args) -> int:
    image = imgio.load_pgm(args.image) if args.image else load_source(args.synth)[0]
    image = imgio.with_headroom(image, args.headroom)
    window = _default_window(args.window, image.shape)
    rows = bench_rows(image, args.target_mse, args.seed, window, args.stride)
    text = csvio.table_to_csv(BENCH_HEADER, rows)
    if args.out:
        csvio.atomic_write(args.out, text.encode())
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- sample


def cmd_sample(args) -> int:
    from .models import Checkpoint, evaluate_nn_ssim, sample

    ckpt = Checkpoint.load(args.ckpt)
    samples = sample(ckpt, args.n, args.seed)
    grid = imgio.montage(samples.images)
    imgio.save_pgm(grid, args.out)
    kv = dict(n=args.n, width=grid.width, height=grid.height)
    if args.heldout:
        held = load_source(args.heldout)
        window = _default_window(args.window, held.shape)
        kv["nn_ssim"] = evaluate_nn_ssim(samples, held, window, args.stride)
    _emit(**kv)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssimgen", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="per-epoch progress on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def geometry(sp, window=8, stride=1):
        sp.add_argument("--window", type=int, default=None, help=f"window side (default: min({window}, image side))")
        sp.add_argument("--stride", type=int, default=stride)
        sp.set_defaults(window_cap=window)

    s = sub.add_parser("ssim", help="SSIM and SSIM distances between two PGM images")
    s.add_argument("a")
    s.add_argument("b")
    geometry(s)
    s.add_argument("--mode", choices=ssim.MODES, default="eq1")
    s.add_argument("--map", help="write the distance map as CSV")
    s.set_defaults(func=cmd_ssim)

    k = sub.add_parser("kernel", help="SSIM distance matrix, kernel and spectrum")
    src = k.add_mutually_exclusive_group(required=True)
    src.add_argument("--dir")
    src.add_argument("--synth")
    src.add_argument("--distances", help="precomputed distance matrix CSV")
    geometry(k, 4, 4)
    k.add_argument("--mode", choices=ssim.MODES, default="eq1")
    k.add_argument("--psd-fix", action="store_true")
    k.add_argument("--squared", action="store_true", help="square distances before double centring")
    k.add_argument("--out", default=".")
    k.set_defaults(func=cmd_kernel)

    m = sub.add_parser("mmd", help="MMD^2 permutation two-sample test")
    m.add_argument("--x", required=True)
    m.add_argument("--y", required=True)
    m.add_argument("--kernel", choices=("ssim", "rbf"), default="ssim")
    m.add_argument("--gamma", type=float, default=None, help="rbf bandwidth on [0,1]-scaled pixels (default: median heuristic)")
    m.add_argument("--permutations", type=int, default=99)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--mode", choices=ssim.MODES, default="eq1")
    geometry(m, 4, 4)
    m.add_argument("--out", help="append a CSV report row")
    m.set_defaults(func=cmd_mmd)

    t = sub.add_parser("train", help="train a model from a JSON run config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help="output directory (overrides output_dir)")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bench", help="MSE-matched distortions scored by SSIM")
    bsrc = b.add_mutually_exclusive_group()
    bsrc.add_argument("--image")
    bsrc.add_argument("--synth", default="bars-stripes:128:1:0")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--target-mse", type=float, default=400.0)
    b.add_argument(
        "--headroom", type=float, default=0.25,
        help="compress intensities into [h*l, (1-h)*l] so shifts are not clipped (0 disables)",
    )
    geometry(b)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    sm = sub.add_parser("sample", help="sample a montage from a generative checkpoint")
    sm.add_argument("--ckpt", required=True)
    sm.add_argument("--n", type=int, default=16)
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--out", required=True)
    sm.add_argument("--heldout")
    geometry(sm)
    sm.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(message)s",
    )
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        print(f"error: non-finite loss at epoch {exc.epoch}: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, SsimGenError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
