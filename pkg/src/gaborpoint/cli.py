"""Command-line interface: kernel inspection, detection, the oriented-energy
demo, and repeatability evaluation campaigns.

Configuration is a flat ``key = value`` text file (see DEFAULT_CONFIG for the
keys); command-line flags override file values.  All outputs are
deterministic for a fixed configuration and input.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from gaborpoint import evaluate as ev
from gaborpoint import imageio
from gaborpoint.conv import BORDER_MODES, OrientedParams, orientation_max, oriented_energy
from gaborpoint.detectors import (
    Keypoint,
    detect_blobs,
    detect_corners,
    detect_edges,
    detect_edges_zero_crossing,
)
from gaborpoint.gabor import (
    FAMILIES,
    OperatorTarget,
    default_target_sigma,
    discretize,
    fit_complex_compromise,
    fit_to_derivative,
    write_kernel_text,
)
from gaborpoint.scale_space import ScaleLadder, build_maps, build_pyramid


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration shared by the detect and evaluate commands."""

    family: str = "gabor"
    border: str = "reflect"
    sigma0: float = 1.4
    ratio: float = 1.4
    levels: int = 6
    blob_threshold: float = 0.10
    corner_threshold: float = 0.01
    edge_threshold: float = 0.20
    zero_crossing_floor: float = 0.10
    harris_k: float = 0.04
    sigma_i_ratio: float = 1.4
    overlap_threshold: float = 0.4
    max_keypoints: int = 100
    seed: int = 0
    threads: int = 1

    def ladder(self) -> ScaleLadder:
        return ScaleLadder(self.sigma0, self.ratio, self.levels)

    def validate(self) -> "RunConfig":
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.border not in BORDER_MODES:
            raise ValueError(f"border must be one of {BORDER_MODES}")
        self.ladder()
        if not (0.0 < self.overlap_threshold < 1.0):
            raise ValueError("overlap_threshold must be in (0, 1)")
        if not (0.0 < self.harris_k < 0.25):
            raise ValueError("harris_k must be in (0, 0.25)")
        return self


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; '#' starts a comment; unknown keys fail."""
    values: dict = {}
    types = {f.name: f.type for f in fields(RunConfig)}
    casts = {"str": str, "float": float, "int": int}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in types:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = casts[types[key]](val)
    return RunConfig(**values).validate()


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(RunConfig)]
    return "\n".join(lines) + "\n"


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = parse_config(Path(args.config).read_text())
    overrides = {}
    if getattr(args, "border", None):
        overrides["border"] = args.border
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    if getattr(args, "family", None):
        overrides["family"] = args.family
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()


def write_keypoints(path, kps, header_fields: dict) -> None:
    """Keypoint text format: one ``x y a b c`` line per keypoint, where
    [[a, b], [b, c]] is the ellipse matrix; the comment header records the
    detector configuration, scales and response type."""
    lines = ["# x y a b c"]
    for key, val in header_fields.items():
        lines.append(f"# {key}={val}")
    for kp in kps:
        if kp.ellipse is None:
            r = 3.0 * kp.sigma
            a, b, c = 1.0 / (r * r), 0.0, 1.0 / (r * r)
        else:
            a, b, c = kp.ellipse
        lines.append(f"{kp.x:.6f} {kp.y:.6f} {a:.10g} {b:.10g} {c:.10g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_keypoints(path) -> list[Keypoint]:
    kps = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        x, y, a, b, c = (float(t) for t in line.split())
        sigma = (a * c - b * b) ** -0.25 / 3.0
        kps.append(Keypoint(x=x, y=y, sigma=sigma, response=0.0,
                            ellipse=(a, b, c)))
    return kps


_RAMP_HI = np.array([235.0, 80.0, 50.0])
_RAMP_LO = np.array([60.0, 100.0, 235.0])


def render_keypoints(img, kps) -> np.ndarray:
    """Gray background with 1-px ellipse strokes colored by response rank."""
    base = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    rgb = np.repeat((base * 255.0).astype(np.uint8)[:, :, None], 3, axis=2)
    h, w = base.shape
    n = max(len(kps) - 1, 1)
    for rank, kp in enumerate(kps):
        color = np.round(_RAMP_HI + (_RAMP_LO - _RAMP_HI) * (rank / n)).astype(np.uint8)
        if kp.ellipse is None:
            r = 3.0 * kp.sigma
            e = np.array([[1.0 / (r * r), 0.0], [0.0, 1.0 / (r * r)]])
        else:
            a, b, c = kp.ellipse
            e = np.array([[a, b], [b, c]])
        vals, vecs = np.linalg.eigh(e)
        if np.any(vals <= 0):
            continue
        axes = vals ** -0.5
        ts = np.linspace(0.0, 2.0 * math.pi, 256, endpoint=False)
        ring = vecs @ np.vstack([axes[0] * np.cos(ts), axes[1] * np.sin(ts)])
        xs = np.round(kp.x + ring[0]).astype(int)
        ys = np.round(kp.y + ring[1]).astype(int)
        ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
        rgb[ys[ok], xs[ok]] = color
    return rgb


def render_profile(kernel_samples) -> np.ndarray:
    """Tiny raster plot of a 1-D kernel profile (real part on top of imag)."""
    samples = np.asarray(kernel_samples)
    planes = [samples.real] if not np.iscomplexobj(samples) else [samples.real,
                                                                  samples.imag]
    height, width = 96, max(8 * samples.size, 64)
    img = np.full((height * len(planes), width), 1.0)
    peak = max(float(np.abs(np.asarray(p)).max()) for p in planes) or 1.0
    for pi, plane in enumerate(planes):
        y0 = pi * height
        img[y0 + height // 2, :] = 0.85
        xs = np.linspace(0, width - 1, samples.size).round().astype(int)
        for i in range(samples.size - 1):
            x_a, x_b = xs[i], xs[i + 1]
            v_a = plane[i] / peak
            v_b = plane[i + 1] / peak
            for t in np.linspace(0.0, 1.0, 2 * (x_b - x_a + 1)):
                x = int(round(x_a + t * (x_b - x_a)))
                v = v_a + t * (v_b - v_a)
                y = int(round(y0 + height / 2 - v * (height / 2 - 4)))
                img[np.clip(y, y0, y0 + height - 1), x] = 0.0
    return img


def cmd_kernel(args) -> int:
    alpha = args.alpha
    sigma_target = args.sigma_target or default_target_sigma(alpha)
    if args.fit == "complex":
        params = fit_complex_compromise(alpha, sigma_target)
    else:
        order = "first" if args.fit == "first" else "second"
        params = fit_to_derivative(OperatorTarget(order, sigma_target), alpha)
    kernel = discretize(params, args.radius_sigmas)
    out = Path(args.out or f"kernel_{args.fit}.txt")
    write_kernel_text(out, kernel, "gabor", params.alpha, params.xi,
                      params.scale_a)
    print(f"fit={args.fit} alpha={params.alpha:.6g} xi={params.xi:.6g} "
          f"taps={len(kernel)} -> {out}")
    if args.render:
        imageio.write_image(args.render, render_profile(kernel.samples))
    return 0


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    img = imageio.read_image(args.input)
    mode = args.mode
    out_kp = Path(args.out or "keypoints.txt")
    annotate = Path(args.annotate) if args.annotate else \
        out_kp.with_name(out_kp.stem + "_annotated.png")
    header = {
        "detector": mode, "family": cfg.family, "sigma0": cfg.sigma0,
        "ratio": cfg.ratio, "levels": cfg.levels, "border": cfg.border,
        "response": "hessian_det" if mode == "blob" else
                    ("harris" if mode == "corner" else "gradient_modulus"),
    }
    if mode in ("blob", "corner"):
        pyr = build_pyramid(img, cfg.family, cfg.ladder(), cfg.border)
        if mode == "blob":
            kps = detect_blobs(pyr, cfg.blob_threshold, cfg.max_keypoints,
                               cfg.sigma_i_ratio)
        else:
            kps = detect_corners(pyr, cfg.sigma_i_ratio, cfg.harris_k,
                                 cfg.corner_threshold, cfg.max_keypoints)
        write_keypoints(out_kp, kps, header)
        imageio.write_rgb(annotate, render_keypoints(img, kps))
        print(f"{mode}: {len(kps)} keypoints -> {out_kp}")
        return 0
    maps = build_maps(img, cfg.family, cfg.sigma0, cfg.border)
    if mode == "edge":
        em = detect_edges(maps, cfg.edge_threshold)
    else:
        em = detect_edges_zero_crossing(maps, cfg.zero_crossing_floor)
    write_keypoints(out_kp, [], header)
    imageio.write_image(annotate, em.mask.astype(np.float64))
    print(f"{mode}: {int(em.mask.sum())} edge pixels, sigma_d={cfg.sigma0}")
    return 0


def cmd_orient(args) -> int:
    cfg = _load_config(args)
    img = imageio.read_image(args.input)
    degrees = [float(t) for t in args.directions.split(",")]
    plist = [OrientedParams(math.radians(d), args.xi, args.alpha)
             for d in degrees]
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    energies = []
    for deg, p in zip(degrees, plist):
        e = oriented_energy(img, p, args.radius, cfg.border)
        energies.append(e)
        peak = e.max() or 1.0
        imageio.write_image(outdir / f"energy_{int(round(deg)):03d}.png",
                            e / peak)
    emax, eidx = orientation_max(img, plist, args.radius, cfg.border)
    imageio.write_image(outdir / "energy_max.png", emax / (emax.max() or 1.0))
    if len(plist) > 1:
        imageio.write_image(outdir / "orientation_argmax.png",
                            eidx / (len(plist) - 1))
    else:
        imageio.write_image(outdir / "orientation_argmax.png",
                            np.zeros_like(emax))
    print(f"orient: directions {degrees} -> {outdir}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    if args.input:
        img = imageio.read_image(args.input)
    else:
        img = ev.synthetic_scene(seed=cfg.seed if cfg.seed else 7)
    height, width = img.shape
    if args.identity_only:
        seq = [("ident", np.eye(3))]
    else:
        seq = ev.default_view_sequence(width, height)
    families = [f.strip() for f in args.families.split(",")]
    det = ev.DetectorConfig(ladder=cfg.ladder(), threshold=cfg.blob_threshold,
                            max_count=cfg.max_keypoints, border=cfg.border,
                            overlap_threshold=cfg.overlap_threshold)
    reports = ev.run_comparison(img, seq, families, det, threads=cfg.threads)
    csv_text = ev.reports_to_csv(reports)
    out = Path(args.out or "repeatability.csv")
    out.write_text(csv_text)
    means = {r.family: r.mean_repeatability() for r in reports}
    for fam, mean in means.items():
        print(f"{fam}: mean repeatability {mean:.3f}")
    print(f"report -> {out}")
    if args.assert_ordering:
        order = ["gaussian_derivative", "gabor", "haar"]
        present = [f for f in order if f in means]
        vals = [means[f] for f in present]
        if vals != sorted(vals, reverse=True):
            print("ordering violated:", " >= ".join(present))
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaborpoint",
        description="Gabor-wavelet interest points: kernels, detection, "
                    "oriented transforms and repeatability evaluation.")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--border", choices=BORDER_MODES)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="fit and export 1-D kernels")
    k.add_argument("--alpha", type=float, default=0.05)
    k.add_argument("--fit", choices=("first", "second", "complex"),
                   default="first")
    k.add_argument("--sigma-target", type=float, default=None)
    k.add_argument("--radius-sigmas", type=float, default=4.0)
    k.add_argument("--out")
    k.add_argument("--render", help="optional profile raster (PNG/PGM)")
    k.set_defaults(func=cmd_kernel)

    d = sub.add_parser("detect", help="run a detector on an image")
    d.add_argument("input")
    d.add_argument("--mode", choices=("blob", "corner", "edge", "edge-zc"),
                   default="blob")
    d.add_argument("--family", choices=FAMILIES)
    d.add_argument("--out", help="keypoint text file")
    d.add_argument("--annotate", help="visualization raster path")
    d.set_defaults(func=cmd_detect)

    o = sub.add_parser("orient", help="oriented energy demo")
    o.add_argument("input")
    o.add_argument("--directions", default="17,77,137",
                   help="comma-separated degrees")
    o.add_argument("--xi", type=float, default=1.8)
    o.add_argument("--alpha", type=float, default=0.32)
    o.add_argument("--radius", type=int, default=5)
    o.add_argument("--outdir", default="orient_out")
    o.set_defaults(func=cmd_orient)

    e = sub.add_parser("evaluate", help="repeatability comparison campaign")
    e.add_argument("--input", help="reference image (default: bundled scene)")
    e.add_argument("--families", default="gaussian_derivative,gabor,haar")
    e.add_argument("--out", help="CSV report path")
    e.add_argument("--identity-only", action="store_true",
                   help="single identity homography (sanity run)")
    e.add_argument("--assert-ordering", action="store_true",
                   help="exit nonzero unless gaussian >= gabor >= haar")
    e.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
