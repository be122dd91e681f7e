"""Separable 2-D convolution: 1-D passes along rows and columns.

Images are plain 2-D float64 arrays indexed ``[y, x]`` (row-major); a complex
kernel or input produces a complex128 result whose real/imaginary planes are
the two response rasters.  The primitive is convolution (kernel reversed),
not correlation; since every kernel here is symmetric or antisymmetric the
distinction only flips the sign of odd responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from gaborpoint.gabor import Kernel1D

BORDER_MODES = ("reflect", "replicate", "zero")

_NP_PAD_MODE = {"reflect": "reflect", "replicate": "edge", "zero": "constant"}


def as_image(img, allow_complex: bool = False) -> np.ndarray:
    """Validate and return a 2-D raster as float64 (or complex128)."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"image must be a non-empty 2-D array, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        if not allow_complex:
            raise ValueError("complex image not allowed here")
        arr = arr.astype(np.complex128, copy=False)
    else:
        arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValueError("image contains non-finite values")
    return arr


def _check_border(border: str) -> str:
    if border not in BORDER_MODES:
        raise ValueError(f"border must be one of {BORDER_MODES}, got {border!r}")
    return border


@dataclass(frozen=True)
class OrientedParams:
    """Direction and frequency of one oriented 2-D Gabor probe.

    ``theta`` is the angle between the x-axis and the normal of the wave
    fronts; the per-axis frequencies are ``xi_mag*cos(theta)`` along rows and
    ``xi_mag*sin(theta)`` along columns.
    """

    theta: float
    xi_mag: float
    alpha: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if not (math.isfinite(self.xi_mag) and self.xi_mag > 0.0):
            raise ValueError(f"xi_mag must be > 0, got {self.xi_mag}")
        if not (math.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")

    @property
    def xi_components(self) -> tuple[float, float]:
        return (self.xi_mag * math.cos(self.theta),
                self.xi_mag * math.sin(self.theta))


def _conv_axis1(img: np.ndarray, kernel: Kernel1D, border: str) -> np.ndarray:
    k = np.asarray(kernel.samples)
    length = k.size
    center = kernel.center_index
    pad = ((0, 0), (length - 1 - center, center))
    mode = _NP_PAD_MODE[border]
    if mode == "constant":
        padded = np.pad(img, pad, mode="constant", constant_values=0)
    else:
        padded = np.pad(img, pad, mode=mode)
    windows = sliding_window_view(padded, length, axis=1)
    return windows @ k[::-1]


def conv_rows(img, kernel: Kernel1D, border: str = "reflect") -> np.ndarray:
    """Convolve each row (the x axis) with the kernel; output keeps the shape."""
    img = as_image(img, allow_complex=True)
    _check_border(border)
    if len(kernel) > 2 * min(img.shape) + 1:
        raise ValueError(
            f"kernel of {len(kernel)} taps too long for image of shape {img.shape}")
    return _conv_axis1(img, kernel, border)


def conv_cols(img, kernel: Kernel1D, border: str = "reflect") -> np.ndarray:
    """Convolve each column (the y axis); by construction the exact transpose
    of :func:`conv_rows` on the transposed image."""
    img = as_image(img, allow_complex=True)
    _check_border(border)
    if len(kernel) > 2 * min(img.shape) + 1:
        raise ValueError(
            f"kernel of {len(kernel)} taps too long for image of shape {img.shape}")
    return _conv_axis1(img.T, kernel, border).T


def conv_separable(img, k_row: Kernel1D, k_col: Kernel1D,
                   border: str = "reflect") -> np.ndarray:
    """Row pass followed by column pass; equals the full 2-D convolution with
    the outer-product kernel away from the borders."""
    return conv_cols(conv_rows(img, k_row, border), k_col, border)


def _oriented_kernel(alpha: float, xi: float, radius: int) -> Kernel1D:
    # Complex atom samples with the mean removed, so a constant input yields
    # exactly zero energy, then renormalized to unit complex norm.
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    samples = np.exp(-alpha * xs * xs) * np.exp(-1.0j * xi * xs)
    samples -= samples.mean()
    samples /= np.linalg.norm(samples)
    return Kernel1D(samples, radius, radius, "complex")


def oriented_energy(img, p: OrientedParams, kernel_radius: int = 5,
                    border: str = "reflect") -> np.ndarray:
    """Spectral energy density for one direction: squared magnitude of the
    complex response to the oriented separable Gabor pair."""
    if kernel_radius < 1:
        raise ValueError("kernel_radius must be >= 1")
    xi0, xi1 = p.xi_components
    k_row = _oriented_kernel(p.alpha, xi0, kernel_radius)
    k_col = _oriented_kernel(p.alpha, xi1, kernel_radius)
    resp = conv_separable(img, k_row, k_col, border)
    return resp.real ** 2 + resp.imag ** 2


def orientation_max(img, params_list, kernel_radius: int = 5,
                    border: str = "reflect") -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel maximum energy over a set of directions and its argmax index."""
    params_list = list(params_list)
    if not params_list:
        raise ValueError("params_list must contain at least one orientation")
    energies = np.stack([oriented_energy(img, p, kernel_radius, border)
                         for p in params_list])
    return energies.max(axis=0), energies.argmax(axis=0).astype(np.int32)
