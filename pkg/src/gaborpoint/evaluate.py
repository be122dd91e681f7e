"""Repeatability evaluation under synthetic viewpoint change.

A detector is run on a reference image and on projectively warped copies;
detections are matched through the homography by ellipse overlap, and the
repeatability score is the matched fraction of the detections visible in
both views.  Kernel families are compared by running the same Hessian blob
detector on each family's derivative maps.

Before the overlap test each candidate pair is rescaled so the geometric
mean of the two region radii becomes 30 pixels (center distances scale
along), which keeps the criterion size-independent without rewarding huge
regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gaborpoint.conv import as_image
from gaborpoint.detectors import ELLIPSE_RADIUS_SIGMAS, Keypoint, detect_blobs
from gaborpoint.scale_space import ScaleLadder, build_pyramid

NORMALIZED_RADIUS = 30.0


@dataclass(frozen=True)
class PairResult:
    """Repeatability of one reference/warped image pair."""

    viewpoint_label: str
    detections_a: int
    detections_b: int
    correspondences: int
    repeatability: float


@dataclass(frozen=True)
class RepeatabilityReport:
    family: str
    per_pair: list[PairResult] = field(default_factory=list)

    def mean_repeatability(self) -> float:
        if not self.per_pair:
            return 0.0
        return sum(p.repeatability for p in self.per_pair) / len(self.per_pair)


@dataclass(frozen=True)
class DetectorConfig:
    """Blob-detector settings used on every image of a comparison run."""

    ladder: ScaleLadder = ScaleLadder(1.4, 1.4, 6)
    threshold: float = 0.10
    max_count: int = 100
    border: str = "reflect"
    overlap_threshold: float = 0.4


def normalize_homography(h) -> np.ndarray:
    """Validate a 3x3 homography and scale it so h[2,2] == 1."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (3, 3):
        raise ValueError(f"homography must be 3x3, got {h.shape}")
    det = np.linalg.det(h)
    if not np.isfinite(det) or abs(det) <= 1e-12:
        raise ValueError("homography must be invertible")
    if h[2, 2] == 0.0:
        raise ValueError("homography has h[2,2] == 0")
    return h / h[2, 2]


def apply_homography(h, xs, ys) -> tuple[np.ndarray, np.ndarray]:
    """Map point arrays through a homography."""
    w = h[2, 0] * xs + h[2, 1] * ys + h[2, 2]
    px = (h[0, 0] * xs + h[0, 1] * ys + h[0, 2]) / w
    py = (h[1, 0] * xs + h[1, 1] * ys + h[1, 2]) / w
    return px, py


def homography_jacobian(h, x: float, y: float) -> np.ndarray:
    """Local 2x2 affine approximation of the map at (x, y)."""
    w = h[2, 0] * x + h[2, 1] * y + h[2, 2]
    px = (h[0, 0] * x + h[0, 1] * y + h[0, 2]) / w
    py = (h[1, 0] * x + h[1, 1] * y + h[1, 2]) / w
    return np.array([
        [(h[0, 0] - px * h[2, 0]) / w, (h[0, 1] - px * h[2, 1]) / w],
        [(h[1, 0] - py * h[2, 0]) / w, (h[1, 1] - py * h[2, 1]) / w],
    ])


def _fold_indices(idx: np.ndarray, n: int, border: str) -> np.ndarray:
    if border == "replicate":
        return np.clip(idx, 0, n - 1)
    period = max(2 * n - 2, 1)
    folded = np.mod(idx, period)
    return np.where(folded >= n, period - folded, folded)


def warp_image(img, h, border: str = "zero") -> np.ndarray:
    """Inverse-mapping bilinear warp; ``h`` maps source to output coordinates."""
    img = as_image(img)
    h = normalize_homography(h)
    inv = np.linalg.inv(h)
    height, width = img.shape
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    sx, sy = apply_homography(inv, xs, ys)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    out = np.zeros_like(img)
    for dy in (0, 1):
        for dx in (0, 1):
            weight = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            xi = x0 + dx
            yi = y0 + dy
            if border == "zero":
                valid = (xi >= 0) & (xi < width) & (yi >= 0) & (yi < height)
                vals = img[np.clip(yi, 0, height - 1),
                           np.clip(xi, 0, width - 1)] * valid
            else:
                vals = img[_fold_indices(yi, height, border),
                           _fold_indices(xi, width, border)]
            out += weight * vals
    return out


def _keypoint_radius(kp: Keypoint) -> float:
    if kp.ellipse is not None:
        a, b, c = kp.ellipse
        return (a * c - b * b) ** -0.25
    return ELLIPSE_RADIUS_SIGMAS * kp.sigma


def project_keypoints(kps, h) -> list[Keypoint]:
    """Map keypoints through a homography: projective positions, ellipses by
    the local affine Jacobian, scale from the ellipse area change."""
    h = normalize_homography(h)
    out = []
    for kp in kps:
        px, py = apply_homography(h, np.float64(kp.x), np.float64(kp.y))
        jac = homography_jacobian(h, kp.x, kp.y)
        jdet = abs(np.linalg.det(jac))
        if kp.ellipse is None:
            out.append(Keypoint(x=float(px), y=float(py),
                                sigma=kp.sigma * math.sqrt(jdet),
                                response=kp.response))
            continue
        a, b, c = kp.ellipse
        e = np.array([[a, b], [b, c]])
        jinv = np.linalg.inv(jac)
        ep = jinv.T @ e @ jinv
        ep = 0.5 * (ep + ep.T)
        # area = pi / sqrt(det E); scale follows the equivalent radius.
        ratio = (np.linalg.det(e) / np.linalg.det(ep)) ** 0.25
        out.append(Keypoint(x=float(px), y=float(py),
                            sigma=kp.sigma * float(ratio),
                            response=kp.response,
                            ellipse=(float(ep[0, 0]), float(ep[0, 1]),
                                     float(ep[1, 1]))))
    return out


def _ellipse_bbox(kp: Keypoint) -> tuple[float, float, float, float]:
    if kp.ellipse is None:
        r = ELLIPSE_RADIUS_SIGMAS * kp.sigma
        return kp.x - r, kp.x + r, kp.y - r, kp.y + r
    a, b, c = kp.ellipse
    inv = np.linalg.inv(np.array([[a, b], [b, c]]))
    rx = math.sqrt(max(inv[0, 0], 0.0))
    ry = math.sqrt(max(inv[1, 1], 0.0))
    return kp.x - rx, kp.x + rx, kp.y - ry, kp.y + ry


def _quad_form(kp: Keypoint) -> tuple[float, float, float]:
    if kp.ellipse is not None:
        return kp.ellipse
    r = ELLIPSE_RADIUS_SIGMAS * kp.sigma
    return (1.0 / (r * r), 0.0, 1.0 / (r * r))


def overlap_error(k1: Keypoint, k2: Keypoint, samples_per_axis: int = 192) -> float:
    """One minus intersection-over-union of two elliptical regions.

    Estimated by dense sampling on a grid over the joint bounding box (well
    above 10^4 samples, keeping the quadrature error under a percent).
    """
    x1lo, x1hi, y1lo, y1hi = _ellipse_bbox(k1)
    x2lo, x2hi, y2lo, y2hi = _ellipse_bbox(k2)
    if x1hi < x2lo or x2hi < x1lo or y1hi < y2lo or y2hi < y1lo:
        return 1.0
    union_lo_x, union_hi_x = min(x1lo, x2lo), max(x1hi, x2hi)
    union_lo_y, union_hi_y = min(y1lo, y2lo), max(y1hi, y2hi)
    xs = np.linspace(union_lo_x, union_hi_x, samples_per_axis)
    ys = np.linspace(union_lo_y, union_hi_y, samples_per_axis)
    gx, gy = np.meshgrid(xs, ys)

    def inside(kp):
        a, b, c = _quad_form(kp)
        ux = gx - kp.x
        uy = gy - kp.y
        return a * ux * ux + 2.0 * b * ux * uy + c * uy * uy <= 1.0

    in1 = inside(k1)
    in2 = inside(k2)
    union = np.count_nonzero(in1 | in2)
    if union == 0:
        return 1.0
    inter = np.count_nonzero(in1 & in2)
    return 1.0 - inter / union


def _rescaled_pair(ka: Keypoint, kb: Keypoint) -> tuple[Keypoint, Keypoint]:
    """Scale both regions (and their center offset) so the geometric mean of
    the two radii is NORMALIZED_RADIUS; symmetric in its arguments."""
    ra = _keypoint_radius(ka)
    rb = _keypoint_radius(kb)
    s = NORMALIZED_RADIUS / math.sqrt(ra * rb)

    def scaled(kp: Keypoint, cx: float, cy: float) -> Keypoint:
        a, b, c = _quad_form(kp)
        return Keypoint(x=cx + (kp.x - cx) * s, y=cy + (kp.y - cy) * s,
                        sigma=kp.sigma * s, response=kp.response,
                        ellipse=(a / (s * s), b / (s * s), c / (s * s)))

    return scaled(ka, ka.x, ka.y), scaled(kb, ka.x, ka.y)


def repeatability(kps_a, kps_b, h, overlap_threshold: float = 0.4,
                  shared_region: tuple[tuple[int, int], tuple[int, int]] | None = None
                  ) -> dict:
    """Greedy one-to-one matching of two detection sets through a homography.

    Keypoints of ``kps_b`` are projected back into the reference frame with
    the inverse map.  Only detections whose counterpart position falls inside
    the other image (the co-visible region) enter the score denominator.
    Returns ``{"correspondences", "score", "denominator"}``.
    """
    if not (0.0 < overlap_threshold < 1.0):
        raise ValueError(
            f"overlap_threshold must be in (0, 1), got {overlap_threshold}")
    h = normalize_homography(h)
    hinv = np.linalg.inv(h)

    def inside(x, y, shape) -> bool:
        if shape is None:
            return True
        hh, ww = shape
        return 0.0 <= x <= ww - 1.0 and 0.0 <= y <= hh - 1.0

    shape_a = shared_region[0] if shared_region else None
    shape_b = shared_region[1] if shared_region else None

    vis_a = [kp for kp in kps_a
             if inside(*apply_homography(h, np.float64(kp.x),
                                         np.float64(kp.y)), shape_b)]
    proj_b = project_keypoints(kps_b, hinv)
    vis_b = [kp for kp in proj_b if inside(kp.x, kp.y, shape_a)]

    denom = min(len(vis_a), len(vis_b))
    if denom == 0:
        return {"correspondences": 0, "score": 0.0, "denominator": 0}

    def max_semi_axis(kp: Keypoint) -> float:
        a, b, c = _quad_form(kp)
        lam_min = 0.5 * (a + c - math.hypot(a - c, 2.0 * b))
        return 1.0 / math.sqrt(max(lam_min, 1e-300))

    axes_a = [max_semi_axis(k) for k in vis_a]
    axes_b = [max_semi_axis(k) for k in vis_b]

    candidates = []
    for ia, ka in enumerate(vis_a):
        for ib, kb in enumerate(vis_b):
            # Cheap reject: regions whose extents cannot touch never overlap.
            if (math.hypot(ka.x - kb.x, ka.y - kb.y)
                    > axes_a[ia] + axes_b[ib]):
                continue
            sa, sb = _rescaled_pair(ka, kb)
            err = overlap_error(sa, sb)
            if err <= overlap_threshold:
                candidates.append((err, ia, ib))
    candidates.sort()
    matched_a: set[int] = set()
    matched_b: set[int] = set()
    matches = 0
    for err, ia, ib in candidates:
        if ia in matched_a or ib in matched_b:
            continue
        matched_a.add(ia)
        matched_b.add(ib)
        matches += 1
    return {"correspondences": matches,
            "score": matches / denom,
            "denominator": denom}


def view_rotation_homography(theta_deg: float, width: int, height: int,
                             focal_scale: float = 1.2) -> np.ndarray:
    """Homography of a camera rotating around the vertical axis.

    ``K @ R_y(theta) @ K^-1`` with a simple pinhole K centered on the image,
    composed with a similarity that refits the warped frame into the original
    canvas so the views keep a large co-visible region.
    """
    theta = math.radians(theta_deg)
    f = focal_scale * max(width, height)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    k = np.array([[f, 0, cx], [0, f, cy], [0, 0, 1.0]])
    rot = np.array([
        [math.cos(theta), 0.0, math.sin(theta)],
        [0.0, 1.0, 0.0],
        [-math.sin(theta), 0.0, math.cos(theta)],
    ])
    h = k @ rot @ np.linalg.inv(k)
    corners_x = np.array([0.0, width - 1.0, 0.0, width - 1.0])
    corners_y = np.array([0.0, 0.0, height - 1.0, height - 1.0])
    wx, wy = apply_homography(h, corners_x, corners_y)
    span_x = wx.max() - wx.min()
    span_y = wy.max() - wy.min()
    scale = min((width - 1) / span_x, (height - 1) / span_y)
    fit = np.array([
        [scale, 0.0, -scale * wx.min()],
        [0.0, scale, -scale * wy.min()],
        [0.0, 0.0, 1.0],
    ])
    return normalize_homography(fit @ h)


def default_view_sequence(width: int, height: int) -> list[tuple[str, np.ndarray]]:
    """Five labelled homographies for nominal rotations of 20 to 60 degrees."""
    return [(f"deg{int(d):02d}", view_rotation_homography(d, width, height))
            for d in (20.0, 30.0, 40.0, 50.0, 60.0)]


def synthetic_scene(width: int = 192, height: int = 192, seed: int = 7) -> np.ndarray:
    """Structured test scene: checkerboard band, blobs, and stroke clutter.

    Deterministic for a given seed; values in [0, 1].
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.full((height, width), 0.45)

    # Checkerboard band along the top fifth.
    cell = 12
    board = ((xx // cell + yy // cell) % 2) * 0.35
    band = (yy < height * 0.20)
    img[band] = 0.28 + board[band]

    # Gaussian blobs of assorted radii and signs below the band.
    margin = min(12.0, width / 4.0, height / 4.0)
    for _ in range(20):
        bx = rng.uniform(margin, width - margin)
        by = rng.uniform(min(height * 0.24, height - 2 * margin),
                         height - margin)
        br = rng.uniform(3.0, 7.5)
        amp = rng.uniform(0.25, 0.45) * (1 if rng.random() < 0.6 else -1)
        img += amp * np.exp(-((xx - bx) ** 2 + (yy - by) ** 2) / (br * br))

    # Short text-like strokes.
    smargin = min(8.0, width / 4.0, height / 4.0)
    for _ in range(30):
        sx = rng.uniform(smargin, width - smargin)
        sy = rng.uniform(min(height * 0.24, height - 2 * smargin),
                         height - smargin)
        ang = rng.choice([0.0, math.pi / 2, math.pi / 4, -math.pi / 4])
        length = rng.uniform(4, 12)
        amp = rng.uniform(-0.35, 0.35)
        ts = np.linspace(0.0, 1.0, 24)
        pxs = sx + ts * length * math.cos(ang)
        pys = sy + ts * length * math.sin(ang)
        for px, py in zip(pxs, pys):
            img += amp * np.exp(-((xx - px) ** 2 + (yy - py) ** 2) / 1.8)

    return np.clip(img, 0.0, 1.0)


def run_comparison(img, homography_sequence, families,
                   config: DetectorConfig | None = None,
                   threads: int = 1) -> list[RepeatabilityReport]:
    """Detect blobs per family on the reference and each warped view and score
    repeatability for every pair.  Deterministic for a fixed configuration."""
    img = as_image(img)
    if config is None:
        config = DetectorConfig()
    seq = [(label, normalize_homography(h)) for label, h in homography_sequence]
    shape = img.shape

    def evaluate_family(family: str) -> RepeatabilityReport:
        pyr = build_pyramid(img, family, config.ladder, config.border)
        kps_ref = detect_blobs(pyr, config.threshold, config.max_count)
        pairs = []
        for label, h in seq:
            warped = warp_image(img, h, "zero")
            wpyr = build_pyramid(warped, family, config.ladder, config.border)
            kps = detect_blobs(wpyr, config.threshold, config.max_count)
            rep = repeatability(kps_ref, kps, h, config.overlap_threshold,
                                shared_region=(shape, shape))
            pairs.append(PairResult(
                viewpoint_label=label,
                detections_a=len(kps_ref),
                detections_b=len(kps),
                correspondences=rep["correspondences"],
                repeatability=rep["score"],
            ))
        return RepeatabilityReport(family=family, per_pair=pairs)

    families = list(families)
    if threads > 1 and len(families) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(evaluate_family, families))
    else:
        reports = [evaluate_family(f) for f in families]
    return reports


def reports_to_csv(reports) -> str:
    """CSV rows, one per (family, pair): the plot-ready output format."""
    lines = ["family,pair,detections_a,detections_b,correspondences,repeatability"]
    for rep in reports:
        for p in rep.per_pair:
            lines.append(f"{rep.family},{p.viewpoint_label},{p.detections_a},"
                         f"{p.detections_b},{p.correspondences},"
                         f"{p.repeatability:.6f}")
    return "\n".join(lines) + "\n"
