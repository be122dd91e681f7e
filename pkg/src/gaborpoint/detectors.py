"""Edge, corner and blob detectors on top of derivative maps.

All response thresholds are fractions of the response raster's maximum, so
defaults transfer across image dynamic ranges.  Non-maximum suppression uses
a deterministic plateau rule: a pixel survives only if it strictly exceeds
every neighbor scanned before it in raster order and is at least equal to
every later one, so exactly one pixel per plateau is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gaborpoint.conv import conv_cols, conv_rows
from gaborpoint.gabor import make_smoothing_kernel, operator_gain
from gaborpoint.scale_space import DerivativeMaps

# Keypoint ellipses are drawn at this many sigmas (measurement-region size).
ELLIPSE_RADIUS_SIGMAS = 3.0


@dataclass(frozen=True)
class EdgeMap:
    """Gradient-modulus raster plus the thinned, thresholded edge mask."""

    strength: np.ndarray
    mask: np.ndarray
    sigma_d: float


@dataclass(frozen=True)
class Keypoint:
    """Detected feature: sub-pixel position, scale, response, optional ellipse.

    ``ellipse`` holds (A, B, C) with [[A, B], [B, C]] positive definite; the
    region is the set of offsets u with u'Eu <= 1 around (x, y).
    """

    x: float
    y: float
    sigma: float
    response: float
    ellipse: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.sigma,
                                              self.response)):
            raise ValueError("keypoint fields must be finite")
        if self.ellipse is not None:
            a, b, c = self.ellipse
            if not (a > 0.0 and a * c - b * b > 0.0):
                raise ValueError("ellipse matrix must be positive definite")


@dataclass(frozen=True)
class SecondMomentMatrix:
    """Rasters of the three distinct entries of the averaged gradient outer product."""

    mu11: np.ndarray
    mu12: np.ndarray
    mu22: np.ndarray
    sigma_i: float
    sigma_d: float


def edge_modulus(maps: DerivativeMaps) -> np.ndarray:
    """Per-pixel gradient modulus sqrt(Ix^2 + Iy^2)."""
    return np.hypot(maps.Ix, maps.Iy)


def _raster_nms_2d(resp: np.ndarray) -> np.ndarray:
    """8-neighbor NMS with the raster-order plateau rule."""
    H, W = resp.shape
    pad = np.full((H + 2, W + 2), -np.inf)
    pad[1:-1, 1:-1] = resp
    center = pad[1:-1, 1:-1]
    # Earlier-scanned neighbors (strict >): row above, and left in same row.
    earlier = [(0, 0), (0, 1), (0, 2), (1, 0)]
    # Later-scanned neighbors (>=): right in same row, and row below.
    later = [(1, 2), (2, 0), (2, 1), (2, 2)]
    keep = np.ones_like(resp, dtype=bool)
    for dy, dx in earlier:
        keep &= center > pad[dy:dy + H, dx:dx + W]
    for dy, dx in later:
        keep &= center >= pad[dy:dy + H, dx:dx + W]
    return keep


def detect_edges(maps: DerivativeMaps, threshold: float) -> EdgeMap:
    """Gradient-modulus maxima along the quantized gradient direction.

    ``threshold`` is a fraction of the modulus maximum (may be ``inf`` to
    select nothing).  The modulus is suppressed along one of four quantized
    gradient directions; of the two opposing neighbors, the raster-earlier
    one is compared strictly.
    """
    if not threshold >= 0.0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    strength = edge_modulus(maps)
    peak = float(strength.max())
    if peak <= 0.0 or math.isinf(threshold):
        return EdgeMap(strength, np.zeros_like(strength, bool), maps.sigma_d)
    cut = threshold * peak

    angle = np.mod(np.arctan2(maps.Iy, maps.Ix), np.pi)
    sector = np.mod(np.round(angle / (np.pi / 4.0)).astype(int), 4)
    # Neighbor step along the gradient for each sector: 0 -> (0,1), 1 -> (1,1),
    # 2 -> (1,0), 3 -> (1,-1); the opposite neighbor is raster-earlier.
    steps = ((0, 1), (1, 1), (1, 0), (1, -1))
    H, W = strength.shape
    pad = np.full((H + 2, W + 2), -np.inf)
    pad[1:-1, 1:-1] = strength
    keep = np.zeros((H, W), dtype=bool)
    for s, (dy, dx) in enumerate(steps):
        later = pad[1 + dy:1 + dy + H, 1 + dx:1 + dx + W]
        earlier = pad[1 - dy:1 - dy + H, 1 - dx:1 - dx + W]
        keep |= (sector == s) & (strength > earlier) & (strength >= later)
    return EdgeMap(strength, keep & (strength >= cut), maps.sigma_d)


def detect_edges_zero_crossing(maps: DerivativeMaps,
                               strength_floor: float) -> EdgeMap:
    """Edges as sign changes of Ixx + Iyy against a 4-neighbor.

    Of a sign-changing pair, the pixel closer to the zero crossing (smaller
    absolute value, raster-earlier on ties) is marked.  ``strength_floor`` is
    a fraction of the gradient-modulus maximum and suppresses zero-noise in
    flat regions.
    """
    if not strength_floor >= 0.0:
        raise ValueError(f"strength_floor must be >= 0, got {strength_floor}")
    lap = maps.Ixx + maps.Iyy
    strength = edge_modulus(maps)
    peak = float(strength.max())
    mask = np.zeros_like(lap, dtype=bool)
    H, W = lap.shape
    for dy, dx in ((0, 1), (1, 0), (0, -1), (-1, 0)):
        src = (slice(max(0, -dy), H - max(0, dy)),
               slice(max(0, -dx), W - max(0, dx)))
        dst = (slice(max(0, dy), H + min(0, dy)),
               slice(max(0, dx), W + min(0, dx)))
        a, b = lap[src], lap[dst]
        flip = a * b < 0.0
        nearer = np.abs(a) < np.abs(b)
        tie = np.abs(a) == np.abs(b)
        raster_earlier = (dy, dx) > (0, 0)
        hit = flip & (nearer | (tie & raster_earlier))
        hit |= (a == 0.0) & (b != 0.0)
        mask[src] |= hit
    if peak > 0.0:
        mask &= strength >= strength_floor * peak
    else:
        mask[:] = False
    return EdgeMap(strength, mask, maps.sigma_d)


def second_moment(maps: DerivativeMaps, sigma_i: float) -> SecondMomentMatrix:
    """Gaussian-averaged outer product of the first derivatives.

    The maps are already scale-normalized (each first-order raster carries a
    sigma_d factor), so the products need no extra sigma_d^2 factor.  The
    averaging window is a unit-DC-gain sampled Gaussian of scale sigma_i.
    """
    if not (math.isfinite(sigma_i) and sigma_i > 0.0):
        raise ValueError(f"sigma_i must be > 0, got {sigma_i}")
    win = make_smoothing_kernel("gaussian_derivative", sigma_i)
    gain = operator_gain(win, 0) ** 2

    def smooth(img):
        return conv_cols(conv_rows(img, win), win) * gain

    return SecondMomentMatrix(
        mu11=smooth(maps.Ix * maps.Ix),
        mu12=smooth(maps.Ix * maps.Iy),
        mu22=smooth(maps.Iy * maps.Iy),
        sigma_i=sigma_i,
        sigma_d=maps.sigma_d,
    )


def harris_response(smm: SecondMomentMatrix, k: float = 0.04) -> np.ndarray:
    """det(mu) - k * trace(mu)^2."""
    if not (0.0 < k < 0.25):
        raise ValueError(f"k must be in (0, 0.25), got {k}")
    det = smm.mu11 * smm.mu22 - smm.mu12 * smm.mu12
    trace = smm.mu11 + smm.mu22
    return det - k * trace * trace


def shi_tomasi_response(smm: SecondMomentMatrix) -> np.ndarray:
    """Smaller eigenvalue of the averaged gradient outer product."""
    trace = smm.mu11 + smm.mu22
    det = smm.mu11 * smm.mu22 - smm.mu12 * smm.mu12
    disc = np.sqrt(np.maximum(trace * trace - 4.0 * det, 0.0))
    return 0.5 * (trace - disc)


def hessian_det(maps: DerivativeMaps) -> np.ndarray:
    """Determinant of the Hessian, Ixx*Iyy - Ixy^2.

    The maps carry a sigma_d factor per derivative order, so this raster is
    the sigma_d^4-normalized determinant.
    """
    return maps.Ixx * maps.Iyy - maps.Ixy * maps.Ixy


def _ellipse_from_smm(smm: SecondMomentMatrix, xi: int, yi: int,
                      sigma: float) -> tuple[float, float, float]:
    """Affine shape at a pixel: the second-moment quadratic form normalized to
    enclose area pi*(ELLIPSE_RADIUS_SIGMAS*sigma)^2; circular fallback when
    the matrix is not usable."""
    r = ELLIPSE_RADIUS_SIGMAS * sigma
    m11 = float(smm.mu11[yi, xi])
    m12 = float(smm.mu12[yi, xi])
    m22 = float(smm.mu22[yi, xi])
    det = m11 * m22 - m12 * m12
    scale = math.sqrt(det) * r * r if det > 0.0 else 0.0
    if scale <= 0.0 or not math.isfinite(scale):
        return (1.0 / (r * r), 0.0, 1.0 / (r * r))
    a, b, c = m11 / scale, m12 / scale, m22 / scale
    if a <= 0.0 or a * c - b * b <= 0.0:
        return (1.0 / (r * r), 0.0, 1.0 / (r * r))
    return (a, b, c)


def _quadratic_refine(stack: np.ndarray, k: int, y: int, x: int):
    """One Newton step on the 3x3x3 cube; offsets clamped to half a step."""
    g = np.array([
        (stack[k + 1, y, x] - stack[k - 1, y, x]) / 2.0,
        (stack[k, y + 1, x] - stack[k, y - 1, x]) / 2.0,
        (stack[k, y, x + 1] - stack[k, y, x - 1]) / 2.0,
    ])
    c = stack[k, y, x]
    hkk = stack[k + 1, y, x] + stack[k - 1, y, x] - 2 * c
    hyy = stack[k, y + 1, x] + stack[k, y - 1, x] - 2 * c
    hxx = stack[k, y, x + 1] + stack[k, y, x - 1] - 2 * c
    hky = (stack[k + 1, y + 1, x] - stack[k + 1, y - 1, x]
           - stack[k - 1, y + 1, x] + stack[k - 1, y - 1, x]) / 4.0
    hkx = (stack[k + 1, y, x + 1] - stack[k + 1, y, x - 1]
           - stack[k - 1, y, x + 1] + stack[k - 1, y, x - 1]) / 4.0
    hyx = (stack[k, y + 1, x + 1] - stack[k, y + 1, x - 1]
           - stack[k, y - 1, x + 1] + stack[k, y - 1, x - 1]) / 4.0
    hess = np.array([[hkk, hky, hkx], [hky, hyy, hyx], [hkx, hyx, hxx]])
    try:
        delta = np.linalg.solve(hess, -g)
    except np.linalg.LinAlgError:
        return 0.0, 0.0, 0.0, c
    if not np.all(np.isfinite(delta)):
        return 0.0, 0.0, 0.0, c
    delta = np.clip(delta, -0.5, 0.5)
    value = c + 0.5 * float(np.dot(g, delta))
    return float(delta[0]), float(delta[1]), float(delta[2]), value


def _quadratic_refine_2d(resp: np.ndarray, y: int, x: int):
    """Spatial Newton step on the 3x3 patch; offsets clamped to half a pixel."""
    H, W = resp.shape
    c = float(resp[y, x])
    if not (0 < y < H - 1 and 0 < x < W - 1):
        return 0.0, 0.0, c
    gy = (resp[y + 1, x] - resp[y - 1, x]) / 2.0
    gx = (resp[y, x + 1] - resp[y, x - 1]) / 2.0
    hyy = resp[y + 1, x] + resp[y - 1, x] - 2 * c
    hxx = resp[y, x + 1] + resp[y, x - 1] - 2 * c
    hyx = (resp[y + 1, x + 1] - resp[y + 1, x - 1]
           - resp[y - 1, x + 1] + resp[y - 1, x - 1]) / 4.0
    hess = np.array([[hyy, hyx], [hyx, hxx]])
    try:
        delta = np.linalg.solve(hess, -np.array([gy, gx]))
    except np.linalg.LinAlgError:
        return 0.0, 0.0, c
    if not np.all(np.isfinite(delta)):
        return 0.0, 0.0, c
    delta = np.clip(delta, -0.5, 0.5)
    value = c + 0.5 * float(gy * delta[0] + gx * delta[1])
    return float(delta[0]), float(delta[1]), value


def detect_blobs(pyramid: list[DerivativeMaps], threshold: float = 0.05,
                 max_count: int = 500, sigma_i_ratio: float = 1.4,
                 border_margin_sigmas: float = 2.0) -> list[Keypoint]:
    """Blobs as 3x3x3 maxima of the Hessian determinant across space and scale.

    Candidates must be positive and reach ``threshold`` times the stack
    maximum.  Sub-pixel and sub-scale positions come from a quadratic fit;
    each keypoint's ellipse is the normalized second-moment shape at its
    level.  Results are sorted by response (descending) and truncated.
    """
    if not pyramid:
        raise ValueError("pyramid must not be empty")
    if not threshold >= 0.0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    levels = len(pyramid)
    sigmas = [m.sigma_d for m in pyramid]
    stack = np.stack([hessian_det(m) for m in pyramid])
    peak = float(stack.max())
    if peak <= 0.0:
        return []
    cut = threshold * peak

    H, W = stack.shape[1:]
    pad = np.full((levels + 2, H + 2, W + 2), -np.inf)
    pad[1:-1, 1:-1, 1:-1] = stack
    center = pad[1:-1, 1:-1, 1:-1]
    keep = (center >= cut) & (center > 0.0)
    for dk in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if (dk, dy, dx) == (0, 0, 0):
                    continue
                nb = pad[1 + dk:1 + dk + levels,
                         1 + dy:1 + dy + H, 1 + dx:1 + dx + W]
                finite = np.isfinite(nb)
                if (dk, dy, dx) < (0, 0, 0):
                    ok = ~finite | (center > nb)
                else:
                    ok = ~finite | (center >= nb)
                keep &= ok
    kk, yy, xx = np.nonzero(keep)

    smms: dict[int, SecondMomentMatrix] = {}
    kps = []
    for k, y, x in zip(kk, yy, xx):
        sigma = sigmas[k]
        margin = border_margin_sigmas * sigma
        if (x < margin or y < margin or x >= W - margin or y >= H - margin):
            continue
        if 0 < k < levels - 1 and 0 < y < H - 1 and 0 < x < W - 1:
            dk, dy, dx, value = _quadratic_refine(stack, k, y, x)
        else:
            dk, dy, dx, value = 0.0, 0.0, 0.0, float(stack[k, y, x])
        if levels > 1:
            ratio = sigmas[1] / sigmas[0]
            sigma = sigmas[0] * ratio ** (k + dk)
        if k not in smms:
            smms[k] = second_moment(pyramid[k], sigma_i_ratio * sigmas[k])
        ellipse = _ellipse_from_smm(smms[k], x, y, sigma)
        kps.append(Keypoint(x=float(x + dx), y=float(y + dy), sigma=sigma,
                            response=value, ellipse=ellipse))
    kps.sort(key=lambda p: (-p.response, p.y, p.x, p.sigma))
    return kps[:max_count]


def detect_corners(pyramid: list[DerivativeMaps], sigma_i_ratio: float = 1.4,
                   k: float = 0.04, threshold: float = 0.01,
                   max_count: int = 500,
                   border_margin_sigmas: float = 2.0) -> list[Keypoint]:
    """Multiscale Harris corners: per-scale spatial NMS, merged by response.

    The threshold is a fraction of the strongest response over all scales.
    Spatially coincident detections from different scales are merged, keeping
    the strongest.
    """
    if not pyramid:
        raise ValueError("pyramid must not be empty")
    responses = []
    for maps in pyramid:
        smm = second_moment(maps, sigma_i_ratio * maps.sigma_d)
        responses.append(harris_response(smm, k))
    peak = max(float(r.max()) for r in responses)
    if peak <= 0.0:
        return []
    cut = threshold * peak

    candidates = []
    for maps, resp in zip(pyramid, responses):
        H, W = resp.shape
        margin = border_margin_sigmas * maps.sigma_d
        keep = _raster_nms_2d(resp) & (resp >= cut)
        for y, x in zip(*np.nonzero(keep)):
            if (x < margin or y < margin or x >= W - margin or y >= H - margin):
                continue
            dy, dx, value = _quadratic_refine_2d(resp, y, x)
            candidates.append(Keypoint(x=float(x + dx), y=float(y + dy),
                                       sigma=maps.sigma_d, response=value))
    candidates.sort(key=lambda p: (-p.response, p.y, p.x, p.sigma))
    merged: list[Keypoint] = []
    for cand in candidates:
        radius = max(2.0, 0.5 * cand.sigma)
        if any(math.hypot(cand.x - m.x, cand.y - m.y) <= radius
               for m in merged):
            continue
        merged.append(cand)
        if len(merged) >= max_count:
            break
    return merged
