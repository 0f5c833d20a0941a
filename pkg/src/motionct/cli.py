"""Command-line entry point: dataset generation, reconstruction, evaluation.

All subcommand flags may also be supplied through a JSON config file
(``--config``); explicit flags win over config values.  The environment
variable ``MOTIONCT_THREADS`` caps the worker pool used for per-sample
parallelism.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio
from .dataset import build_dataset, estimate_eta, mix_seed, worker_count
from .dremel import DremelParams, dremel_reconstruct, shift_cross_corr
from .fbp import fbp
from .geometry import FAN, PARALLEL, default_counts, inner_x, make_geometry
from .kaczmarz import kaczmarz_reconstruct
from .metrics import psnr, ssim
from .perturb import warp_image
from .phantoms import generate_phantom
from .projector import adjoint_angle, project_angle, project_full
from .resesop import ResesopParams, resesop_reconstruct

METHODS = ("fbp", "kaczmarz", "dremel", "resesop")


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Resolution order: explicit flag > config file entry > default."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            cfg = json.load(f)
    out = {}
    for key, default in defaults.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            out[key] = cli_val
        elif key in cfg:
            out[key] = cfg[key]
        else:
            out[key] = default
    return out


def _dataset_geometry(opts: dict):
    kind = opts["geometry"]
    if kind not in (PARALLEL, FAN):
        raise SystemExit(f"unknown geometry {kind!r}")
    size = opts["image_size"]
    k_def, l_def, d_def = default_counts(kind, size)
    angles = opts["angles"] or k_def
    dets = opts["detectors"] or l_def
    src = opts["source_radius_px"] or d_def
    return make_geometry(kind, angles, dets, src, size)


def cmd_gen_dataset(args) -> int:
    opts = _merge_config(args, {
        "geometry": PARALLEL, "seed": 0, "train": 8, "val": 1, "test": 1,
        "out": None, "image_size": 255, "angles": None, "detectors": None,
        "source_radius_px": None, "noise_std": 0.0,
    })
    if not opts["out"]:
        print("gen-dataset: --out is required", file=sys.stderr)
        return 2
    g = _dataset_geometry(opts)
    t0 = time.time()
    manifest = build_dataset(opts["seed"], g, opts["train"], opts["val"],
                             opts["test"], opts["out"],
                             noise_std=opts["noise_std"])
    n = sum(manifest.counts)
    print(f"wrote {n} samples to {opts['out']} in {time.time() - t0:.1f}s "
          f"(splits {manifest.counts})")
    return 0


def _reconstruct_one(method: str, sample, g, opts: dict):
    y = sample.sino_clean if opts["input"] == "clean" else sample.sino_perturbed
    y = y.astype(np.float64)
    t0 = time.time()
    info: dict = {"method": method, "input": opts["input"]}
    if method == "fbp":
        img = fbp(y, g)
        info["sweeps"] = 0
    elif method == "kaczmarz":
        img = kaczmarz_reconstruct(y, g, opts["omega"], opts["max_sweeps"])
        info.update(sweeps=opts["max_sweeps"], omega=opts["omega"])
    elif method == "dremel":
        params = DremelParams(omega=opts["omega"], lam=opts["lam"],
                              max_iters=opts["max_sweeps"])
        res = dremel_reconstruct(y, g, params)
        img = res.image
        info.update(sweeps=params.max_iters, omega=params.omega,
                    lam=params.lam,
                    max_abs_shift=float(np.abs(res.shifts).max()))
    elif method == "resesop":
        params = ResesopParams(tau=opts["tau"], eta_scale=opts["eta_scale"],
                               max_sweeps=opts["max_sweeps"])
        eta = sample.eta_per_angle.astype(np.float64)
        res = resesop_reconstruct(y, eta, g, params)
        img = res.image
        info.update(sweeps=res.sweeps, converged=res.converged,
                    tau=params.tau, eta_scale=params.eta_scale)
    else:
        raise SystemExit(f"unknown method {method!r}")
    info["runtime_s"] = round(time.time() - t0, 3)
    return img.astype(np.float32), info


def cmd_reconstruct(args) -> int:
    opts = _merge_config(args, {
        "method": None, "dataset": None, "split": "test", "eta_scale": 1.0,
        "tau": 1.1, "max_sweeps": None, "omega": 1.0, "lam": 0.3,
        "out": None, "input": "perturbed",
    })
    if not opts["method"] or not opts["dataset"]:
        print("reconstruct: --method and --dataset are required", file=sys.stderr)
        return 2
    if opts["max_sweeps"] is None:
        opts["max_sweeps"] = 32 if opts["method"] == "dremel" else 20
    manifest = dataio.read_manifest(opts["dataset"])
    g = manifest.geometry
    ids = manifest.splits.get(opts["split"])
    if ids is None:
        print(f"reconstruct: unknown split {opts['split']!r}", file=sys.stderr)
        return 2
    out_dir = opts["out"] or str(Path(opts["dataset"]) / "recon")
    method = opts["method"]

    def run(sid: str) -> None:
        sample = dataio.read_sample(opts["dataset"], sid, g)
        img, info = _reconstruct_one(method, sample, g, opts)
        dataio.write_reconstruction(out_dir, sid, method, img, info)

    t0 = time.time()
    workers = worker_count()
    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, ids))
    else:
        for sid in ids:
            run(sid)
    print(f"reconstructed {len(ids)} samples with {method} "
          f"in {time.time() - t0:.1f}s -> {out_dir}")
    return 0


def _save_png(path: Path, img: np.ndarray, symmetric: bool = False) -> None:
    from PIL import Image as PILImage

    arr = np.asarray(img, dtype=np.float64)
    if symmetric:
        scale = max(1e-12, np.abs(arr).max())
        norm = 0.5 + arr / (2 * scale)
    else:
        lo, hi = arr.min(), arr.max()
        norm = (arr - lo) / max(1e-12, hi - lo)
    data = (np.clip(norm, 0, 1) * 255).astype(np.uint8)
    PILImage.fromarray(data, mode="L").save(path)


def cmd_evaluate(args) -> int:
    opts = _merge_config(args, {
        "dataset": None, "recons": None, "out": "metrics.csv",
        "previews": True,
    })
    if not opts["dataset"] or not opts["recons"]:
        print("evaluate: --dataset and --recons are required", file=sys.stderr)
        return 2
    manifest = dataio.read_manifest(opts["dataset"])
    g = manifest.geometry
    recons_root = Path(opts["recons"])
    rows = []
    preview_dir = Path(opts["out"]).parent / "previews"
    for sid in manifest.all_ids():
        sdir = recons_root / sid
        if not sdir.is_dir():
            continue
        sample = dataio.read_sample(opts["dataset"], sid, g)
        phantom = sample.phantom.astype(np.float64)
        found = sorted(sdir.glob("recon_*.f32"))
        if found and opts["previews"]:
            preview_dir.mkdir(parents=True, exist_ok=True)
            _save_png(preview_dir / f"{sid}_sino_clean.png", sample.sino_clean)
            _save_png(preview_dir / f"{sid}_sino_perturbed.png",
                      sample.sino_perturbed)
        for f in found:
            method = f.stem[len("recon_"):]
            img = dataio.read_reconstruction(str(recons_root), sid, method)
            img = img.astype(np.float64)
            rows.append({
                "sample_id": sid,
                "method": method,
                "psnr_db": psnr(phantom, img),
                "ssim": ssim(phantom, img),
            })
            if opts["previews"]:
                _save_png(preview_dir / f"{sid}_recon_{method}.png",
                          np.clip(img, 0, 1))
                _save_png(preview_dir / f"{sid}_diff_{method}.png",
                          img - phantom, symmetric=True)
    with open(opts["out"], "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["sample_id", "method",
                                               "psnr_db", "ssim"])
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "psnr_db": f"{row['psnr_db']:.4f}",
                             "ssim": f"{row['ssim']:.6f}"})
    by_method: dict = {}
    for row in rows:
        by_method.setdefault(row["method"], []).append(row)
    for method, mrows in sorted(by_method.items()):
        ps = np.array([r["psnr_db"] for r in mrows])
        ss = np.array([r["ssim"] for r in mrows])
        finite = ps[np.isfinite(ps)]
        pm = finite.mean() if finite.size else float("inf")
        print(f"{method}: PSNR {pm:.2f} +- {finite.std() if finite.size else 0:.2f} dB, "
              f"SSIM {ss.mean():.3f} +- {ss.std():.3f}  (n={len(mrows)})")
    print(f"wrote {len(rows)} rows to {opts['out']}")
    return 0


def _selftest_checks():
    rng = np.random.default_rng(0)

    def adjoint_gap(kind, src):
        g = make_geometry(kind, 9, 13, src, 16)
        worst = 0.0
        for _ in range(20):
            x = rng.standard_normal((16, 16))
            w = rng.standard_normal(g.num_detectors)
            k = int(rng.integers(g.num_angles))
            lhs = float(np.dot(w, project_angle(x, g, k)))
            rhs = inner_x(adjoint_angle(w, g, k), x)
            worst = max(worst, abs(lhs - rhs)
                        / max(1e-30, np.linalg.norm(x) * np.linalg.norm(w)))
        return worst

    yield "adjoint identity (parallel)", adjoint_gap(PARALLEL, None) <= 1e-8
    yield "adjoint identity (fan)", adjoint_gap(FAN, 7773.4) <= 1e-8

    g8 = make_geometry(PARALLEL, 4, 11, None, 8)
    basis = np.zeros((8, 8))
    a = np.zeros((44, 64))
    for p in range(64):
        basis.ravel()[p] = 1.0
        a[:, p] = project_full(basis, g8).ravel()
        basis.ravel()[p] = 0.0
    x = rng.random((8, 8))
    gap = np.abs(project_full(x, g8).ravel() - a @ x.ravel()).max()
    yield "dense-matrix oracle", gap <= 1e-10

    ok = True
    for s in range(-6, 7):
        base = np.zeros(31)
        base[12] = 1.0
        shifted = np.roll(base, s)
        ok &= abs(shift_cross_corr(shifted, base) - s) <= 0.5
    yield "shift estimator on impulses", ok

    y1 = rng.random((5, 7))
    y2 = rng.random((5, 7))
    eta = estimate_eta(y1, y2)
    ok = all(eta[k] == np.abs(y1[k] - y2[k]).max() for k in range(5))
    yield "per-angle deviation estimate", ok

    _, p1 = generate_phantom(3, 32)
    _, p2 = generate_phantom(3, 32)
    yield "phantom determinism", np.array_equal(p1, p2)
    yield "phantom range", p1.min() >= 0.0 and p1.max() <= 1.0

    img = rng.random((16, 16))
    yield "warp identity", np.array_equal(warp_image(img, (0.0, np.zeros(2))), img)


def cmd_selftest(_args) -> int:
    failures = 0
    for name, ok in _selftest_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motionct")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="simulate a motion-corrupted dataset")
    p.add_argument("--geometry", choices=(PARALLEL, FAN))
    p.add_argument("--seed", type=int)
    p.add_argument("--train", type=int)
    p.add_argument("--val", type=int)
    p.add_argument("--test", type=int)
    p.add_argument("--out")
    p.add_argument("--image-size", dest="image_size", type=int)
    p.add_argument("--angles", type=int)
    p.add_argument("--detectors", type=int)
    p.add_argument("--source-radius-px", dest="source_radius_px", type=float)
    p.add_argument("--noise-std", dest="noise_std", type=float)
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("reconstruct", help="run a solver over a dataset split")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--dataset")
    p.add_argument("--split", choices=("train", "val", "test"))
    p.add_argument("--eta-scale", dest="eta_scale", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--out")
    p.add_argument("--input", choices=("perturbed", "clean"))
    p.add_argument("--config")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="metrics CSV and preview images")
    p.add_argument("--dataset")
    p.add_argument("--recons")
    p.add_argument("--out")
    p.add_argument("--no-previews", dest="previews", action="store_false",
                   default=None)
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("selftest", help="quick adjoint/oracle/invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (dataio.DataFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
