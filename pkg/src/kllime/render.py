"""Grayscale rendering of coefficient and variance maps."""
import numpy as np

from .io import pgm_bytes


def coefficient_pixels(coef):
    """Map ``[-c, c]`` linearly onto ``[0, 255]``; zero lands on 127."""
    coef = np.asarray(coef, dtype=np.float64)
    c = float(np.max(np.abs(coef), initial=0.0))
    if c == 0.0:
        return np.full(coef.shape, 127, dtype=np.int64)
    return np.clip(np.floor((coef / c + 1.0) * 127.5), 0, 255).astype(np.int64)


def variance_pixels(var):
    """Map ``[0, v_max]`` linearly onto ``[0, 255]``."""
    var = np.asarray(var, dtype=np.float64)
    vmax = float(np.max(var, initial=0.0))
    if vmax <= 0.0:
        return np.zeros(var.shape, dtype=np.int64)
    return np.clip(np.floor(var / vmax * 255.0), 0, 255).astype(np.int64)


def intensity_pixels(features):
    """Instance image, features assumed in [0, 1]."""
    return np.clip(np.floor(np.asarray(features) * 255.0 + 0.5), 0, 255).astype(np.int64)


def render_map(values, shape, kind):
    pixels = variance_pixels(values) if kind == "variance" else coefficient_pixels(values)
    return pgm_bytes(pixels, shape)
