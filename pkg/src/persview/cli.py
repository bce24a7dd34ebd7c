"""Command-line driver for the correction pipeline.

Exit codes: 0 success, 2 validation failure (bad flags, broken bundle),
3 runtime failure. Every run echoes its numeric flags into
effective-config.json beside the outputs for reproducibility.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fixtures
from .blend import laplacian_blend
from .bundle import load_bundle, save_outputs
from .errors import EmptyReport, PersviewError, ValidationError
from .fileio import read_png, write_png
from .fit import FitConfig, LandmarkSet, fit_camera
from .metrics import MetricRow, aggregate_report, id_score, psnr, ssim
from .pipeline import PipelineConfig, reparam_context, run_correct


def _add_geometry_flags(p: argparse.ArgumentParser):
    p.add_argument("--yaw", type=float, default=0.0, help="novel-view yaw in degrees")
    p.add_argument("--pitch", type=float, default=0.0, help="novel-view pitch in degrees")
    p.add_argument("--roll", type=float, default=0.0, help="novel-view roll in degrees")
    dist = p.add_mutually_exclusive_group()
    dist.add_argument("--tz", type=float, default=None, help="novel camera distance in scene units")
    dist.add_argument("--tz-half", action="store_true", help="halve the initial camera distance")
    p.add_argument("--cull-deg", type=float, default=80.0, help="grazing-face culling threshold")
    p.add_argument("--bilateral-k", type=int, default=5, help="bilateral kernel size")
    p.add_argument("--sigma-color", type=float, default=0.1)
    p.add_argument("--sigma-space", type=float, default=1.0)
    p.add_argument("--levels", type=int, default=3, help="Laplacian pyramid levels")
    p.add_argument("--erode", type=int, default=2, help="mask erosion radius in px")
    p.add_argument("--blur", type=int, default=5, help="mask blur kernel in px")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--dry-run", action="store_true", help="validate inputs without writing")


def _config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        yaw=args.yaw, pitch=args.pitch, roll=args.roll,
        tz=args.tz, tz_half=args.tz_half, cull_deg=args.cull_deg,
        bilateral_k=args.bilateral_k, sigma_color=args.sigma_color,
        sigma_space=args.sigma_space, levels=args.levels,
        erode=args.erode, blur=args.blur,
    )


def _write_effective_config(out_dir: Path, cfg: PipelineConfig):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "effective-config.json").write_text(json.dumps(cfg.to_json_dict(), indent=2))


def _cmd_correct(args, blend: bool) -> int:
    cfg = _config_from_args(args)
    bundle = load_bundle(args.bundle)
    if blend and bundle.generated_image is None:
        raise ValidationError("bundle member 'generated' missing; blending needs it "
                              "(run `warp` instead or add a generated image)")
    if args.dry_run:
        print("dry run: bundle and config valid")
        return 0
    result = run_correct(bundle, cfg, blend=blend)
    for stage, ms in result.timings_ms.items():
        print(f"{stage:>12s}: {ms:8.1f} ms")
    print(f"visible fraction: {result.visible_fraction:.4f}")
    _write_effective_config(args.out, cfg)
    blended = result.blended if blend else result.render.color
    names = save_outputs(args.out, result.render, blended, result.mask)
    result.novel_camera.save_json(args.out / "novel_camera.json")
    print(f"wrote {', '.join(names)} to {args.out}")
    return 0


def _cmd_blend(args) -> int:
    bundle = load_bundle(args.bundle)
    if bundle.generated_image is None:
        raise ValidationError("bundle member 'generated' missing; blending needs it")
    warped = read_png(args.warped)
    mask = read_png(args.mask)
    if mask.ndim == 3:
        mask = mask.mean(axis=2)
    out = laplacian_blend(warped, bundle.generated_image, mask, args.levels)
    if args.dry_run:
        print("dry run: inputs valid")
        return 0
    args.out.mkdir(parents=True, exist_ok=True)
    write_png(args.out / "blended.png", out)
    print(f"wrote blended.png to {args.out}")
    return 0


def _cmd_fit_camera(args) -> int:
    bundle = load_bundle(args.bundle)
    if bundle.landmarks is None:
        raise ValidationError("bundle member 'landmarks' missing; camera fit needs it")
    with open(args.geometry) as fh:
        geometry = LandmarkSet.from_json_dict(json.load(fh))
    cfg = FitConfig(learning_rate=args.lr, max_iters=args.max_iters,
                    alternation_period=args.alternation_period,
                    convergence_tol=args.tol)
    ctx = reparam_context(bundle)
    if args.dry_run:
        print("dry run: bundle, geometry and config valid")
        return 0
    result = fit_camera(geometry, bundle.landmarks, bundle.original_camera, ctx, cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "fit-report.json").write_text(json.dumps(result.to_json_dict(), indent=2))
    result.camera.save_json(args.out / "fitted-camera.json")
    print(f"iterations: {result.iterations_run}  converged: {result.converged}  "
          f"final loss: {result.loss_trace[-1]:.3e}")
    print(f"wrote fit-report.json, fitted-camera.json to {args.out}")
    return 0


def _load_sidecar(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _cmd_eval(args) -> int:
    pairs_dir = Path(args.pairs_dir)
    outs = sorted(pairs_dir.glob("*_out.png"))
    if not outs:
        raise EmptyReport(f"no *_out.png / *_ref.png pairs in {pairs_dir}")
    lpips = _load_sidecar(args.lpips)
    feats_out = _load_sidecar(args.features_out)
    feats_ref = _load_sidecar(args.features_ref)
    rows = []
    for out_path in outs:
        name = out_path.name[:-len("_out.png")]
        ref_path = pairs_dir / f"{name}_ref.png"
        if not ref_path.is_file():
            raise ValidationError(f"missing reference image for pair {name!r}")
        a = read_png(out_path)
        b = read_png(ref_path)
        ids = None
        if name in feats_out and name in feats_ref:
            ids = id_score(np.array(feats_out[name]), np.array(feats_ref[name]))
        rows.append(MetricRow(name=name, psnr_db=psnr(a, b), ssim=ssim(a, b),
                              lpips=lpips.get(name), id_score=ids))
    report = aggregate_report(rows)
    if args.dry_run:
        print(report.format_table())
        return 0
    args.out.mkdir(parents=True, exist_ok=True)
    report.save_json(args.out / "report.json")
    (args.out / "report.txt").write_text(report.format_table() + "\n")
    print(report.format_table())
    return 0


def _cmd_make_fixture(args) -> int:
    if args.dry_run:
        if args.size < 16:
            raise ValidationError(f"fixture size must be >= 16, got {args.size}")
        print("dry run: fixture parameters valid")
        return 0
    fx = fixtures.make_fixture(args.kind, args.size, args.out,
                               yaw_deg=args.yaw, pitch_deg=args.pitch, roll_deg=args.roll)
    print(f"wrote {args.kind} fixture ({args.size}x{args.size}) to {fx.bundle_dir}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(session_cap=args.session_cap)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="persview",
        description="Perspective correction for close-up portraits via "
                    "depth-induced mesh warping and visibility-based blending.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correct", help="full pipeline: warp, mask, blend")
    p.add_argument("bundle", type=Path)
    _add_geometry_flags(p)
    p.set_defaults(func=lambda a: _cmd_correct(a, blend=True))

    p = sub.add_parser("warp", help="warp only, no blending")
    p.add_argument("bundle", type=Path)
    _add_geometry_flags(p)
    p.set_defaults(func=lambda a: _cmd_correct(a, blend=False))

    p = sub.add_parser("blend", help="blend a warped image with the bundle's generated image")
    p.add_argument("bundle", type=Path)
    p.add_argument("--warped", type=Path, required=True)
    p.add_argument("--mask", type=Path, required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=_cmd_blend)

    p = sub.add_parser("fit-camera", help="recover the camera from landmarks")
    p.add_argument("bundle", type=Path)
    p.add_argument("--geometry", type=Path, required=True,
                   help="scene-space 3D landmark JSON ({'points': [[x,y,z]...]})")
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--alternation-period", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=_cmd_fit_camera)

    p = sub.add_parser("eval", help="PSNR/SSIM report over *_out.png / *_ref.png pairs")
    p.add_argument("pairs_dir", type=Path)
    p.add_argument("--lpips", type=Path, default=None, help="sidecar {name: value} JSON")
    p.add_argument("--features-out", type=Path, default=None)
    p.add_argument("--features-ref", type=Path, default=None)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("make-fixture", help="generate a synthetic test scene")
    p.add_argument("kind", choices=fixtures.KINDS)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--yaw", type=float, default=5.0)
    p.add_argument("--pitch", type=float, default=0.0)
    p.add_argument("--roll", type=float, default=0.0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=_cmd_make_fixture)

    p = sub.add_parser("serve", help="run the HTTP render service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--session-cap", type=int, default=8)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 2
    except PersviewError as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
