"""Per-scale derivative maps from separable kernel pipelines.

``build_maps`` produces the five rasters Ix, Iy, Ixx, Iyy, Ixy at one
differentiation scale, for any of the three kernel families.  Responses are
calibrated so each map approximates the true smoothed derivative (see
``operator_gain``) and then scale-normalized by ``sigma_d**order``, so
detector measures built from products of these maps carry their usual
scale-normalization factors automatically.

The scale space is fixed-resolution: kernels dilate with scale, rasters are
never downsampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gaborpoint.conv import as_image, conv_cols, conv_rows
from gaborpoint.gabor import (
    FAMILIES,
    Kernel1D,
    make_comparison_kernels,
    make_smoothing_kernel,
    operator_gain,
)


@dataclass(frozen=True)
class ScaleLadder:
    """Geometric ladder of differentiation scales: sigma_k = sigma0 * ratio**k."""

    sigma0: float
    ratio: float
    levels: int

    def __post_init__(self):
        if not (math.isfinite(self.sigma0) and self.sigma0 > 0.0):
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if not (math.isfinite(self.ratio) and self.ratio > 1.0):
            raise ValueError(f"ratio must be > 1, got {self.ratio}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")

    def sigmas(self) -> list[float]:
        return [self.sigma0 * self.ratio ** k for k in range(self.levels)]


@dataclass(frozen=True)
class DerivativeMaps:
    """Scale-normalized derivative rasters of one image at one scale."""

    sigma_d: float
    Ix: np.ndarray
    Iy: np.ndarray
    Ixx: np.ndarray
    Iyy: np.ndarray
    Ixy: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.Ix.shape


def _calibrated(kernel: Kernel1D, order: int) -> tuple[Kernel1D, float]:
    return kernel, operator_gain(kernel, order)


def build_maps(img, family: str, sigma_d: float,
               border: str = "reflect", radius_sigmas: float = 4.0) -> DerivativeMaps:
    """Derivative maps at one scale.

    Each first-order map pairs the family's derivative kernel on its axis
    with the family's smoothing kernel on the other; second-order maps use
    the second-derivative kernel, and Ixy uses first-order kernels on both
    axes.  For the Gabor family the kernels come from the frequency fit at
    alpha = 1/(2*sigma_d**2), i.e. the envelope scale equals sigma_d.
    """
    img = as_image(img)
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    if not (math.isfinite(sigma_d) and sigma_d >= 0.5):
        raise ValueError(f"sigma_d must be >= 0.5 pixel, got {sigma_d}")

    k1, g1 = _calibrated(make_comparison_kernels(family, "first", sigma_d,
                                                 radius_sigmas), 1)
    k2, g2 = _calibrated(make_comparison_kernels(family, "second", sigma_d,
                                                 radius_sigmas), 2)
    ks, gs = _calibrated(make_smoothing_kernel(family, sigma_d, radius_sigmas), 0)

    s = sigma_d
    ix = conv_cols(conv_rows(img, k1, border), ks, border) * (g1 * gs * s)
    iy = conv_rows(conv_cols(img, k1, border), ks, border) * (g1 * gs * s)
    ixx = conv_cols(conv_rows(img, k2, border), ks, border) * (g2 * gs * s * s)
    iyy = conv_rows(conv_cols(img, k2, border), ks, border) * (g2 * gs * s * s)
    ixy = conv_cols(conv_rows(img, k1, border), k1, border) * (g1 * g1 * s * s)
    return DerivativeMaps(sigma_d=s, Ix=ix, Iy=iy, Ixx=ixx, Iyy=iyy, Ixy=ixy)


def build_pyramid(img, family: str, ladder: ScaleLadder,
                  border: str = "reflect",
                  radius_sigmas: float = 4.0) -> list[DerivativeMaps]:
    """One DerivativeMaps per ladder scale, all at the input resolution."""
    img = as_image(img)
    return [build_maps(img, family, s, border, radius_sigmas)
            for s in ladder.sigmas()]
