"""Synthetic images with known answers, used by tests, benchmarks and demos."""
from __future__ import annotations

import numpy as np

from .raster import GreyImage

BINDER_GREY = 30


def dumbbell(left: int = 200, right: int = 120, neck_width: int = 2, neck_length: int = 2,
             side: int = 8, margin: int = 4, binder: int = BINDER_GREY) -> GreyImage:
    """Two ``side``-pixel squares joined by a straight neck.

    The left half of the neck takes the left grey, the right half the right
    grey, so the grey step sits in the middle of the neck.
    """
    width = 2 * margin + 2 * side + neck_length
    height = 2 * margin + side
    img = np.full((height, width), binder, dtype=np.uint8)
    top = margin
    x0 = margin
    x1 = margin + side + neck_length
    img[top:top + side, x0:x0 + side] = left
    img[top:top + side, x1:x1 + side] = right
    ny = top + (side - neck_width) // 2
    half = neck_length // 2
    img[ny:ny + neck_width, x0 + side:x0 + side + half] = left
    img[ny:ny + neck_width, x0 + side + half:x1] = right
    return GreyImage(img)


def squares(side: int = 6, size: int = 40, grey: int = 200,
            binder: int = BINDER_GREY) -> GreyImage:
    """Three disjoint squares on binder."""
    img = np.full((size, size), binder, dtype=np.uint8)
    for x, y in ((4, 4), (size - side - 5, 8), (12, size - side - 6)):
        img[y:y + side, x:x + side] = grey
    return GreyImage(img)


def disc(radius: float = 16, grey: int = 200, margin: int = 4,
         binder: int = BINDER_GREY) -> GreyImage:
    """Digitised disc: pixels whose centre lies within ``radius`` of the image centre."""
    size = int(2 * np.ceil(radius)) + 2 * margin
    c = size / 2.0
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    img = np.where(np.hypot(xx - c, yy - c) <= radius, grey, binder).astype(np.uint8)
    return GreyImage(img)


def rectangle(length: int = 4, thickness: int = 1, grey: int = 200, margin: int = 3,
              binder: int = BINDER_GREY) -> GreyImage:
    img = np.full((thickness + 2 * margin, length + 2 * margin), binder, dtype=np.uint8)
    img[margin:margin + thickness, margin:margin + length] = grey
    return GreyImage(img)


def micrograph(size: int = 256, grains: int = 40, seed: int = 0,
               binder: int = 35, noise: float = 4.0) -> GreyImage:
    """Flat-topped grains on a dark binder.

    Each grain is the superlevel set of a random anisotropic Gaussian; where
    several overlap the strongest wins, so neighbouring grains can touch with
    different grey levels.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    best = np.zeros((size, size))
    owner = np.full((size, size), -1)
    greys = rng.integers(140, 235, size=grains)
    for k in range(grains):
        cx, cy = rng.uniform(0, size, 2)
        sx, sy = rng.uniform(size / 40, size / 14, 2)
        theta = rng.uniform(0, np.pi)
        c, s = np.cos(theta), np.sin(theta)
        u = (xx - cx) * c + (yy - cy) * s
        v = -(xx - cx) * s + (yy - cy) * c
        g = np.exp(-0.5 * ((u / sx) ** 2 + (v / sy) ** 2))
        win = (g > 0.5) & (g > best)
        best[win] = g[win]
        owner[win] = k
    img = np.where(owner >= 0, greys[np.maximum(owner, 0)], binder).astype(np.float64)
    img += rng.normal(0.0, noise, img.shape)
    return GreyImage(np.clip(np.rint(img), 0, 255).astype(np.uint8))
