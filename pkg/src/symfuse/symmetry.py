"""Orientation tensor and its decomposition into symmetry responses.

Images are 2-D float arrays indexed ``[row, col]``.  The x axis runs along
columns and the y axis along rows (downwards), and every filter in this
module is sampled on that same grid.  All filtering is done by separable
1-D passes with mirror boundary handling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionError, InvariantError

__all__ = [
    "FilterBank",
    "as_gray_image",
    "gaussian_taps",
    "orientation_tensor",
    "build_symmetry_filter",
    "separable_terms",
    "normalized_response",
    "symmetry_responses",
    "inhibit",
    "total_symmetry",
    "EPS_DEN",
]

#: Denominators of the normalized response below this value yield zero.
EPS_DEN = 1e-12

# Tolerance for |s_n| <= 1 before inhibition refuses the input.
_UNIT_TOL = 1e-9

_BOUNDARY = "mirror"


def as_gray_image(img) -> np.ndarray:
    """Validate a grayscale image and return it as a float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise InvariantError("image intensities must lie in [0, 1]")
    return arr


def half_width(sigma: float) -> int:
    return int(math.ceil(3.0 * sigma))


def gaussian_taps(sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample positions, Gaussian taps and Gaussian-derivative taps.

    The Gaussian taps sum to one; the derivative taps are the analytic
    derivative ``-x / sigma**2 * g`` of those same taps.
    """
    if not sigma > 0:
        raise InvariantError(f"sigma must be positive, got {sigma}")
    r = half_width(sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    g /= g.sum()
    dg = -x / sigma**2 * g
    return x, g, dg


def orientation_tensor(img, sigma1: float) -> np.ndarray:
    """Squared complex gradient ``(Dx f + i Dy f)**2`` of an image.

    The derivatives come from separable Gaussian-derivative filtering at
    scale `sigma1`, so ``arg(z)`` is twice the gradient angle.
    """
    f = np.asarray(img, dtype=np.float64)
    if f.ndim != 2:
        raise DimensionError(f"expected a 2-D image, got shape {f.shape}")
    _, g, dg = gaussian_taps(sigma1)
    if min(f.shape) < g.size:
        raise DimensionError(
            f"derivative kernel of width {g.size} does not fit a {f.shape} image"
        )
    # convolve1d with dg gives the derivative of the smoothed image
    dx = ndimage.convolve1d(ndimage.convolve1d(f, g, axis=0, mode=_BOUNDARY),
                            dg, axis=1, mode=_BOUNDARY)
    dy = ndimage.convolve1d(ndimage.convolve1d(f, g, axis=1, mode=_BOUNDARY),
                            dg, axis=0, mode=_BOUNDARY)
    return (dx + 1j * dy) ** 2


def build_symmetry_filter(n: int, sigma2: float) -> np.ndarray:
    """Dense symmetry filter ``(x + iy)**n g`` (``(x - iy)**|n| g`` for n < 0).

    Returned unnormalized on a square grid of half-width ``ceil(3 sigma2)``,
    indexed ``[y, x]`` with the origin at the center sample.
    """
    if not sigma2 > 0:
        raise InvariantError(f"sigma2 must be positive, got {sigma2}")
    r = half_width(sigma2)
    t = np.arange(-r, r + 1, dtype=np.float64)
    x, y = np.meshgrid(t, t)
    g = np.exp(-(x**2 + y**2) / (2.0 * sigma2**2))
    w = x + 1j * y if n >= 0 else x - 1j * y
    return w ** abs(n) * g


def separable_terms(n: int, sigma2: float) -> list[tuple[complex, np.ndarray, np.ndarray]]:
    """Split the order-`n` filter into ``sum(c * outer(ty, tx))``.

    Uses the binomial expansion of ``(x +/- iy)**|n|`` over the separable
    Gaussian, giving ``|n| + 1`` rank-one terms.
    """
    if not sigma2 > 0:
        raise InvariantError(f"sigma2 must be positive, got {sigma2}")
    r = half_width(sigma2)
    t = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(t**2) / (2.0 * sigma2**2))
    k = abs(n)
    iy = 1j if n >= 0 else -1j
    terms = []
    for p in range(k + 1):
        coef = math.comb(k, p) * iy ** (k - p)
        terms.append((coef, t ** (k - p) * g, t**p * g))
    return terms


def _correlate_terms(field, terms) -> np.ndarray:
    out = None
    for coef, ty, tx in terms:
        part = ndimage.correlate1d(field, ty, axis=0, mode=_BOUNDARY)
        part = ndimage.correlate1d(part, tx, axis=1, mode=_BOUNDARY)
        out = coef * part if out is None else out + coef * part
    return out


@dataclass(frozen=True)
class FilterBank:
    """Scales and orders for the symmetry decomposition.

    Kernels are derived lazily and cached; the bank is immutable and can be
    shared between threads.
    """

    sigma1: float = 0.6
    sigma2: float = 3.0
    orders: tuple[int, ...] = (0, 1)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise InvariantError("filter scales must be positive")
        orders = tuple(int(n) for n in self.orders)
        if not orders or len(set(orders)) != len(orders):
            raise InvariantError(f"orders must be non-empty and distinct: {self.orders}")
        object.__setattr__(self, "orders", orders)

    @cached_property
    def derivative_taps(self) -> tuple[np.ndarray, np.ndarray]:
        _, g, dg = gaussian_taps(self.sigma1)
        return g, dg

    def terms(self, n: int):
        if n not in self._cache:
            self._cache[n] = separable_terms(n, self.sigma2)
        return self._cache[n]

    def kernel_mass(self, n: int) -> float:
        """Sum of ``|h_n|`` over the sampled support."""
        key = ("mass", n)
        if key not in self._cache:
            self._cache[key] = float(np.abs(build_symmetry_filter(n, self.sigma2)).sum())
        return self._cache[key]


def normalized_response(z: np.ndarray, n: int, bank: FilterBank) -> np.ndarray:
    """Certainty-weighted symmetry response of order `n`.

    Numerator is ``<z, h_n>`` with ``h_n`` scaled to unit absolute mass,
    denominator ``<|z|, h_0>`` with ``h_0`` scaled to unit mass.  The local
    scalar product is the correlation ``sum_t h_n(t) z(p + t)``.  Pixels
    whose denominator falls below :data:`EPS_DEN` get zero, and magnitudes
    are capped at one.
    """
    z = np.asarray(z)
    if z.ndim != 2:
        raise DimensionError(f"expected a 2-D field, got shape {z.shape}")
    z = z.astype(np.complex128, copy=False)
    num = _correlate_terms(z, bank.terms(n)) / bank.kernel_mass(n)
    den = _correlate_terms(np.abs(z), bank.terms(0)).real / bank.kernel_mass(0)
    out = np.zeros_like(num)
    ok = den >= EPS_DEN
    out[ok] = num[ok] / den[ok]
    # the two kernel normalizations do not bound the ratio pointwise
    mag = np.abs(out)
    over = mag > 1.0
    out[over] /= mag[over]
    return out


def symmetry_responses(img, bank: FilterBank, z: np.ndarray | None = None) -> dict[int, np.ndarray]:
    """Normalized responses for every order in the bank."""
    if z is None:
        z = orientation_tensor(img, bank.sigma1)
    return {n: normalized_response(z, n, bank) for n in bank.orders}


def inhibit(responses: Mapping[int, np.ndarray] | Sequence[np.ndarray]):
    """Suppress each response by the magnitudes of all the others.

    Accepts a mapping ``order -> field`` (returns a dict with the same keys)
    or a sequence of fields (returns a list).
    """
    keyed = isinstance(responses, Mapping)
    items = list(responses.items()) if keyed else list(enumerate(responses))
    if not items:
        raise InvariantError("no responses to inhibit")
    shape = np.shape(items[0][1])
    mags = []
    for _, s in items:
        if np.shape(s) != shape:
            raise DimensionError("responses must share dimensions")
        m = np.abs(s)
        if np.any(m > 1.0 + _UNIT_TOL):
            raise InvariantError(f"response magnitude {m.max():.6g} exceeds 1")
        mags.append(m)
    out = []
    for i, (_, s) in enumerate(items):
        factor = np.ones(shape)
        for j, m in enumerate(mags):
            if j != i:
                factor = factor * (1.0 - np.minimum(m, 1.0))
        out.append(np.asarray(s) * factor)
    if keyed:
        return {k: v for (k, _), v in zip(items, out)}
    return out


def total_symmetry(inhibited) -> np.ndarray:
    """Pixel-wise sum of inhibited response magnitudes."""
    fields = list(inhibited.values()) if isinstance(inhibited, Mapping) else list(inhibited)
    if not fields:
        raise InvariantError("no responses given")
    return np.sum([np.abs(s) for s in fields], axis=0)
