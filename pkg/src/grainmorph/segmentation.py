"""Bi-level segmentation and edge-preserving smoothing of grey images.

Two segmenters are provided: a spectral band threshold, and a pulse-coupled
neural network (PCNN) whose synchronous pulse groups are classified by their
mean grey.  The same network drives :func:`pcnn_smooth`.

The PCNN is the discrete Eckhorn-type model with fast linking::

    F[n] = a_F F[n-1] + S
    L[n] = a_L L[n-1] + sum_q w_pq Y_q[n]        (iterated until Y[n] settles)
    U[n] = F[n] (1 + beta L[n])
    Y[n] = U[n] > T[n-1]
    T[n] = a_T T[n-1] + V_T Y[n],   T[0] = initial_threshold

with ``w_pq = 1 / |p - q|`` over the square window of the linking radius.  A
pixel's *epoch* is the iteration of its first pulse; pulse groups are the
4-connected components of equal epoch.  Pixels of grey 0 can never pulse and
form their own (epoch 0) groups.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .raster import GreyImage


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Foreground (True) / background (False) mask of shape ``(height, width)``."""

    mask: np.ndarray

    def __post_init__(self):
        arr = np.array(self.mask, dtype=bool, copy=True)
        if arr.ndim != 2 or 0 in arr.shape:
            raise ValueError(f"mask must be a non-empty 2-D grid, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "mask", arr)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)

    __hash__ = None

    def to_grey(self) -> GreyImage:
        """Render as a bi-level image: foreground 255, background 0."""
        return GreyImage(np.where(self.mask, 255, 0).astype(np.uint8))

    def inverted(self) -> "BinaryImage":
        return BinaryImage(~self.mask)


@dataclass(frozen=True)
class SpectralBand:
    """Inclusive grey-level range ``[low, high]``."""

    low: int = 0
    high: int = 100

    def __post_init__(self):
        if not 0 <= self.low <= self.high <= 255:
            raise ValueError(f"invalid spectral band [{self.low}, {self.high}]")

    def contains(self, grey):
        return (grey >= self.low) & (grey <= self.high)


BINDER_BAND = SpectralBand(0, 100)


@dataclass(frozen=True)
class PcnnParams:
    linking_radius: int = 1
    beta: float = 0.2
    feed_decay: float = 0.7
    link_decay: float = 0.7
    threshold_decay: float = 0.9
    threshold_amplitude: float = 20.0
    initial_threshold: float = 255.0
    max_iterations: int = 50
    mode: str = "segment"

    def __post_init__(self):
        for name in ("feed_decay", "link_decay", "threshold_decay"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.linking_radius < 1:
            raise ValueError("linking_radius must be >= 1")
        if self.beta < 0 or self.threshold_amplitude < 0 or self.initial_threshold <= 0:
            raise ValueError("beta and threshold_amplitude must be >= 0, initial_threshold > 0")
        if self.mode not in ("segment", "smooth"):
            raise ValueError(f"unknown PCNN mode {self.mode!r}")

    def replace(self, **changes) -> "PcnnParams":
        return dataclasses.replace(self, **changes)


class PcnnConvergenceError(RuntimeError):
    """Some pulsable pixels never fired within ``max_iterations``.

    ``partial`` holds the result computed with the silent pixels treated as an
    extra epoch; it is flagged invalid by virtue of being attached here.
    """

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def spectral_segment(img: GreyImage, binder_band: SpectralBand = BINDER_BAND) -> BinaryImage:
    """Grey levels inside the binder band become background, the rest foreground."""
    return BinaryImage(~binder_band.contains(img.pixels))


def _linking_kernel(radius: int) -> np.ndarray:
    offs = np.arange(-radius, radius + 1, dtype=np.float64)
    dist = np.hypot(offs[:, None], offs[None, :])
    kern = np.zeros_like(dist)
    np.divide(1.0, dist, out=kern, where=dist > 0)
    return kern


def _correlate(y: np.ndarray, kern: np.ndarray, workers: int) -> np.ndarray:
    src = y.astype(np.float64)
    h = src.shape[0]
    if workers <= 1 or h < 2 * workers:
        return ndimage.correlate(src, kern, mode="constant", cval=0.0)
    r = kern.shape[0] // 2
    bounds = np.linspace(0, h, workers + 1).astype(int)

    def band(k):
        lo, hi = bounds[k], bounds[k + 1]
        a, b = max(lo - r, 0), min(hi + r, h)
        part = ndimage.correlate(src[a:b], kern, mode="constant", cval=0.0)
        return part[lo - a:lo - a + (hi - lo)]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.concatenate(list(pool.map(band, range(workers))), axis=0)


def pulse_epochs(img: GreyImage, params: PcnnParams, workers: int = 1):
    """Run the network; return ``(epoch, converged)``.

    ``epoch`` holds the 1-based iteration of each pixel's first pulse, or 0 for
    pixels that never pulsed.
    """
    s = img.pixels.astype(np.float64)
    kern = _linking_kernel(params.linking_radius)
    feed = np.zeros_like(s)
    link = np.zeros_like(s)
    thresh = np.full_like(s, params.initial_threshold)
    epoch = np.zeros(s.shape, dtype=np.int64)
    pulsable = s > 0
    for n in range(1, params.max_iterations + 1):
        feed = params.feed_decay * feed + s
        base = params.link_decay * link
        link = base
        fired = feed * (1.0 + params.beta * link) > thresh
        while params.beta > 0 and fired.any():
            link = base + _correlate(fired, kern, workers)
            again = fired | (feed * (1.0 + params.beta * link) > thresh)
            if np.array_equal(again, fired):
                break
            fired = again
        epoch[(epoch == 0) & fired] = n
        thresh = params.threshold_decay * thresh + params.threshold_amplitude * fired
        if not (pulsable & (epoch == 0)).any():
            return epoch, True
    return epoch, not (pulsable & (epoch == 0)).any()


def pulse_groups(epoch: np.ndarray):
    """Label 4-connected components of equal epoch, numbered in raster order.

    Returns ``(labels, sizes)`` with labels ``0 .. k-1``.
    """
    labels = np.zeros(epoch.shape, dtype=np.int64)
    offset = 0
    for value in np.unique(epoch):
        lab, count = ndimage.label(epoch == value)
        sel = lab > 0
        labels[sel] = lab[sel] + offset - 1
        offset += count
    _, first, inverse = np.unique(labels.ravel(), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    labels = order[inverse].reshape(epoch.shape)
    sizes = np.bincount(labels.ravel())
    return labels, sizes


def _check_mode(params: PcnnParams, mode: str):
    if params.mode != mode:
        raise ValueError(f"PcnnParams.mode must be {mode!r}, got {params.mode!r}")


def pcnn_segment(img: GreyImage, params: PcnnParams = PcnnParams(),
                 binder_band: SpectralBand = BINDER_BAND, workers: int = 1) -> BinaryImage:
    """Foreground = pulse groups whose mean grey lies above the binder band."""
    _check_mode(params, "segment")
    epoch, converged = pulse_epochs(img, params, workers)
    labels, sizes = pulse_groups(epoch)
    means = np.bincount(labels.ravel(), weights=img.pixels.ravel().astype(np.float64)) / sizes
    result = BinaryImage((means > binder_band.high)[labels])
    if not converged:
        raise PcnnConvergenceError(
            f"PCNN did not converge within {params.max_iterations} iterations", result)
    return result


def pcnn_smooth(img: GreyImage, params: PcnnParams = PcnnParams(mode="smooth"),
                workers: int = 1) -> GreyImage:
    """Replace each pixel by the lower-median grey of its pulse group in its window.

    Pixels whose group is smaller than the linking window are treated as
    noise and take the representative of the neighbouring group whose
    in-window median is closest to their own grey.
    """
    _check_mode(params, "smooth")
    epoch, converged = pulse_epochs(img, params, workers)
    labels, sizes = pulse_groups(epoch)
    r = params.linking_radius
    grey = img.pixels
    h = grey.shape[0]
    if workers <= 1 or h < 2 * workers:
        out = kernels.smooth_representatives(grey, labels, sizes, r)
    else:
        bounds = np.linspace(0, h, workers + 1).astype(int)

        def band(k):
            lo, hi = bounds[k], bounds[k + 1]
            a, b = max(lo - r, 0), min(hi + r, h)
            part = kernels.smooth_representatives(grey[a:b], labels[a:b], sizes, r)
            return part[lo - a:lo - a + (hi - lo)]

        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = np.concatenate(list(pool.map(band, range(workers))), axis=0)
    result = GreyImage(out)
    if not converged:
        raise PcnnConvergenceError(
            f"PCNN did not converge within {params.max_iterations} iterations", result)
    return result
