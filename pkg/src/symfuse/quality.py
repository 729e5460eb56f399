"""Block-wise fingerprint quality from symmetry responses."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvariantError
from .symmetry import (
    FilterBank,
    as_gray_image,
    inhibit,
    orientation_tensor,
    symmetry_responses,
    total_symmetry,
)

__all__ = [
    "QualityConfig",
    "QualityReport",
    "block_average",
    "block_correlation",
    "pair_correlation",
    "block_quality",
    "interest_mask",
    "overall_quality",
    "downsize",
    "assess_fingerprint",
    "EPS_VAR",
]

EPS_VAR = 1e-12


@dataclass(frozen=True)
class QualityConfig:
    sigma1: float = 0.6
    sigma2: float = 3.0
    block_size: int = 8
    orders: tuple[int, ...] = (0, 1)
    tau_s: float = 0.1
    #: ``None`` picks 2 for images larger than 300 pixels on a side, else 1.
    downsize_factor: int | None = None

    def __post_init__(self):
        if self.block_size < 2:
            raise InvariantError(f"block size must be >= 2, got {self.block_size}")
        if self.tau_s < 0:
            raise InvariantError(f"tau_s must be >= 0, got {self.tau_s}")
        if self.downsize_factor is not None and self.downsize_factor < 1:
            raise InvariantError("downsize factor must be >= 1")
        object.__setattr__(self, "orders", tuple(int(n) for n in self.orders))

    @property
    def bank(self) -> FilterBank:
        return FilterBank(self.sigma1, self.sigma2, self.orders)

    def factor_for(self, shape) -> int:
        if self.downsize_factor is not None:
            return int(self.downsize_factor)
        return 2 if max(shape) > 300 else 1


@dataclass
class QualityReport:
    """Result of :func:`assess_fingerprint`.

    All maps live on the block grid of the downsized image; multiply block
    indices by ``block_size * downsize_factor`` for original pixel offsets.
    """

    quality: float
    quality_map: np.ndarray
    mask: np.ndarray
    correlation_map: np.ndarray
    symmetry_map: np.ndarray
    block_size: int
    downsize_factor: int
    fields: dict = field(default_factory=dict, repr=False)


def _tiles(f, b):
    """View `f` as ``(rows, b, cols, b)`` tiles padded with NaN."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2:
        raise DimensionError(f"expected a 2-D field, got shape {f.shape}")
    h, w = f.shape
    gh, gw = -(-h // b), -(-w // b)
    padded = np.full((gh * b, gw * b), np.nan)
    padded[:h, :w] = f
    return padded.reshape(gh, b, gw, b)


def block_average(field, b: int) -> np.ndarray:
    """Mean of each ``b x b`` tile; edge tiles average only their own pixels."""
    if b < 2:
        raise InvariantError(f"block size must be >= 2, got {b}")
    return np.nanmean(_tiles(field, b), axis=(1, 3))


def block_correlation(a, c, b: int) -> np.ndarray:
    """Per-tile Pearson correlation of two fields.

    Tiles where either field has variance below :data:`EPS_VAR` get 0.
    """
    if np.shape(a) != np.shape(c):
        raise DimensionError("fields must share dimensions")
    if b < 2:
        raise InvariantError(f"block size must be >= 2, got {b}")
    ta, tc = _tiles(a, b), _tiles(c, b)
    da = ta - np.nanmean(ta, axis=(1, 3), keepdims=True)
    dc = tc - np.nanmean(tc, axis=(1, 3), keepdims=True)
    va = np.nanmean(da * da, axis=(1, 3))
    vc = np.nanmean(dc * dc, axis=(1, 3))
    cov = np.nanmean(da * dc, axis=(1, 3))
    ok = (va >= EPS_VAR) & (vc >= EPS_VAR)
    r = np.zeros_like(cov)
    r[ok] = cov[ok] / np.sqrt(va[ok] * vc[ok])
    return np.clip(r, -1.0, 1.0)


def _vanishing_pairs(a, c, b):
    """Blocks where exactly one of the two fields is identically ~0."""
    tol = np.sqrt(EPS_VAR)
    za = np.nanmax(_tiles(a, b), axis=(1, 3)) < tol
    zc = np.nanmax(_tiles(c, b), axis=(1, 3)) < tol
    return za ^ zc


def pair_correlation(a, c, b: int) -> np.ndarray:
    """Block correlation of two inhibited magnitude fields.

    Same as :func:`block_correlation`, except that a block in which one
    field vanishes while the other does not counts as perfectly exclusive
    (-1): that is the noise-free limit of the correlation.
    """
    r = block_correlation(a, c, b)
    r[_vanishing_pairs(a, c, b)] = -1.0
    return r


def block_quality(r, s) -> np.ndarray:
    """Quality per block, ``(1 - r) / 2 * s``."""
    r = np.asarray(r, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if r.shape != s.shape:
        raise DimensionError("grids must share shape")
    if np.any(np.abs(r) > 1.0):
        raise InvariantError("correlation outside [-1, 1]")
    return 0.5 * (1.0 - r) * s


def interest_mask(s, tau_s: float) -> np.ndarray:
    if tau_s < 0:
        raise InvariantError(f"tau_s must be >= 0, got {tau_s}")
    return np.asarray(s) > tau_s


def overall_quality(q, mask) -> float:
    q = np.asarray(q, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if q.shape != mask.shape:
        raise DimensionError("quality map and mask must share shape")
    if not mask.any():
        return 0.0
    return float(q[mask].mean())


def downsize(img, factor: int) -> np.ndarray:
    if factor == 1:
        return np.asarray(img, dtype=np.float64)
    return block_average(img, factor)


def assess_fingerprint(img, cfg: QualityConfig | None = None, keep_fields: bool = False) -> QualityReport:
    """Quality map and overall quality of a grayscale image.

    With ``keep_fields`` the report also carries the pixel-level
    orientation tensor and raw/inhibited responses in ``report.fields``.
    """
    cfg = cfg or QualityConfig()
    f = as_gray_image(img)
    k = cfg.factor_for(f.shape)
    f = downsize(f, k)
    bank = cfg.bank
    z = orientation_tensor(f, bank.sigma1)
    raw = symmetry_responses(f, bank, z=z)
    inh = inhibit(raw)
    s = total_symmetry(inh)
    b = cfg.block_size
    s_bar = block_average(s, b)
    mags = {n: np.abs(v) for n, v in inh.items()}
    pairs = list(itertools.combinations(cfg.orders, 2))
    if pairs:
        r_bar = np.mean([pair_correlation(mags[i], mags[j], b) for i, j in pairs], axis=0)
    else:
        r_bar = np.zeros_like(s_bar)
    q_bar = block_quality(r_bar, s_bar)
    mask = interest_mask(s_bar, cfg.tau_s)
    fields = {}
    if keep_fields:
        fields = {"image": f, "z": z, "responses": raw, "inhibited": inh, "total": s}
    return QualityReport(
        quality=overall_quality(q_bar, mask),
        quality_map=q_bar,
        mask=mask,
        correlation_map=r_bar,
        symmetry_map=s_bar,
        block_size=b,
        downsize_factor=k,
        fields=fields,
    )
