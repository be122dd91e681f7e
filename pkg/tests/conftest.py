import math

import numpy as np
import pytest

from gaborpoint.conv import conv_cols, conv_rows
from gaborpoint.gabor import make_smoothing_kernel, operator_gain


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def gaussian_blur(img, sigma):
    """Reference smoothing used to build band-limited test inputs."""
    k = make_smoothing_kernel("gaussian_derivative", sigma)
    gain = operator_gain(k, 0) ** 2
    return conv_cols(conv_rows(img, k), k) * gain


def sinusoid_mixture(height, width, rng, n_components=8, omega_max=0.15):
    """Smooth random image as a sum of low-frequency sinusoids.

    Returns the image and the component list (amplitude, wx, wy, phase) so
    tests can evaluate Gaussian-smoothed versions analytically.
    """
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.zeros((height, width))
    comps = []
    for _ in range(n_components):
        w = rng.uniform(0.03, omega_max)
        th = rng.uniform(0.0, np.pi)
        ph = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.5, 1.0)
        wx, wy = w * math.cos(th), w * math.sin(th)
        comps.append((amp, wx, wy, ph))
        img += amp * np.sin(wx * xx + wy * yy + ph)
    return img, comps


def analytic_gaussian_smoothed(comps, height, width, sigma):
    """Closed-form Gaussian smoothing of a sinusoid mixture."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.zeros((height, width))
    for amp, wx, wy, ph in comps:
        att = math.exp(-(wx * wx + wy * wy) * sigma * sigma / 2.0)
        img += amp * att * np.sin(wx * xx + wy * yy + ph)
    return img


def gaussian_blob(height, width, cx, cy, radius, amp=1.0):
    """Blob with the e^-1 radius convention: amp * exp(-d^2 / radius^2)."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    return amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (radius * radius))


def fold_index(idx, n, border):
    """Index mapping used by the brute-force convolution oracle."""
    idx = np.asarray(idx)
    if border == "zero":
        return np.clip(idx, 0, n - 1), (idx >= 0) & (idx < n)
    if border == "replicate":
        return np.clip(idx, 0, n - 1), np.ones_like(idx, dtype=bool)
    period = max(2 * n - 2, 1)
    folded = np.mod(idx, period)
    folded = np.where(folded >= n, period - folded, folded)
    return folded, np.ones_like(idx, dtype=bool)


def conv2d_brute(img, k_row, k_col, border):
    """Direct 2-D summation with the outer-product kernel (shift-and-add).

    Independent of the separable row/column implementation under test.
    """
    height, width = img.shape
    out = np.zeros((height, width),
                   dtype=np.result_type(img, k_row.samples, k_col.samples))
    ys = np.arange(height)
    xs = np.arange(width)
    for j, kc in enumerate(np.asarray(k_col.samples)):
        yy, vmask = fold_index(ys + k_col.center_index - j, height, border)
        for i, kr in enumerate(np.asarray(k_row.samples)):
            xx, hmask = fold_index(xs + k_row.center_index - i, width, border)
            out += (img[np.ix_(yy, xx)] * (kc * kr)
                    * vmask[:, None] * hmask[None, :])
    return out
