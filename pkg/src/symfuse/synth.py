"""Synthetic inputs: symmetry test patterns and expert score panels.

Everything here is deterministic given its arguments (and seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvariantError
from .fusion import quality_index, score_variance

__all__ = [
    "generate_test_pattern",
    "generate_core_in_grating",
    "add_noise",
    "ExpertModel",
    "ScorePanel",
    "generate_synthetic_panel",
]


def _pattern_phase(n, alpha, size, wavelength, center=None):
    c = (size - 1) / 2.0 if center is None else center
    t = np.arange(size, dtype=np.float64)
    cy, cx = (c, c) if np.isscalar(c) else c
    x, y = np.meshgrid(t - cx, t - cy)
    # rotating the coordinates by alpha / (n + 2) multiplies the class member
    # in by alpha while keeping the branch cut aligned with the pattern
    ref = size / 4.0
    if n == -2:
        # no rotation maps onto alpha here; for alpha != 0 the spiral keeps a seam
        w = x + 1j * y
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = np.real(np.exp(-0.5j * alpha) * np.log(w)) * ref
        phase[~np.isfinite(phase)] = 0.0
    else:
        w = (x + 1j * y) * np.exp(-1j * alpha / (n + 2))
        p = (n + 2) / 2.0
        phase = np.real(w**p) / (p * ref ** (p - 1))
    return phase / wavelength


def generate_test_pattern(n: int, alpha: float = 0.0, size: int = 128,
                          wavelength: float = 8.0, center=None) -> np.ndarray:
    """Ridge pattern whose double-angle orientation winds n times about the center.

    The image is ``0.5 * (1 + cos(2 pi xi / wavelength))`` where ``xi`` is
    the real part of ``exp(-i alpha / 2) (x + iy)**((n + 2) / 2)``.
    Order 0 gives a straight grating (vertical when alpha is 0), order 1 a
    parabolic core-like pattern, order 2 concentric circles.  Order -2 uses
    ``log(x + iy)``, the limit of the half-power family.

    The phase is scaled so that the ridge period equals `wavelength` at a
    quarter of the image size from the center.  In image coordinates the
    orientation tensor of the result is proportional to
    ``exp(i (alpha - n phi))``.
    """
    if size < 32:
        raise InvariantError(f"pattern size must be at least 32, got {size}")
    if wavelength < 4:
        raise InvariantError(f"wavelength must be at least 4 pixels, got {wavelength}")
    if n != int(n) or n < -2:
        raise InvariantError(f"order must be an integer >= -2, got {n}")
    phase = _pattern_phase(int(n), float(alpha), int(size), float(wavelength), center)
    return 0.5 * (1.0 + np.cos(2.0 * np.pi * phase))


def generate_core_in_grating(size: int = 128, wavelength: float = 8.0,
                             core_radius: float = 24.0, taper: float = 8.0,
                             center=None, alpha: float = 0.0) -> np.ndarray:
    """A parabolic core pattern cross-faded into a straight grating.

    Inside `core_radius` the image is the order-1 pattern centered at
    `center`; beyond ``core_radius + taper`` it is the order-0 grating.
    """
    c = (size - 1) / 2.0 if center is None else center
    cy, cx = (c, c) if np.isscalar(c) else c
    core = generate_test_pattern(1, alpha, size, wavelength, center=(cy, cx))
    grating = generate_test_pattern(0, alpha, size, wavelength, center=(cy, cx))
    t = np.arange(size, dtype=np.float64)
    x, y = np.meshgrid(t - cx, t - cy)
    r = np.hypot(x, y)
    u = np.clip((r - core_radius) / taper, 0.0, 1.0)
    w = 0.5 * (1.0 + np.cos(np.pi * u))
    return w * core + (1.0 - w) * grating


def add_noise(img, sigma: float, seed: int = 0) -> np.ndarray:
    """Additive Gaussian noise, clipped back to [0, 1]."""
    rng = np.random.default_rng(seed)
    noisy = np.asarray(img, dtype=np.float64) + rng.normal(0.0, sigma, np.shape(img))
    return np.clip(noisy, 0.0, 1.0)


QUALITY_MODELS = ("fixed", "uniform", "coupled")


@dataclass(frozen=True)
class ExpertModel:
    """A synthetic expert with Gaussian errors ``N(bias, noise**2)``.

    `quality` picks how the expert reports quality: ``"fixed"`` always
    reports 1, ``"uniform"`` reports the shot quality without it affecting
    the errors, ``"coupled"`` also scales the error variance by
    ``1 / q**2`` where ``q`` is the quality index of the score.

    Impostor errors share `bias` unless `impostor_bias` is given; a
    negative impostor bias keeps impostor scores off the lower clip.
    """

    name: str
    bias: float
    noise: float
    quality: str = "fixed"
    impostor_bias: float | None = None

    def __post_init__(self):
        if self.quality not in QUALITY_MODELS:
            raise InvariantError(f"unknown quality model {self.quality!r}")
        if self.noise < 0:
            raise InvariantError("noise must be non-negative")


@dataclass
class ScorePanel:
    """Scores of every expert on every trial, as ``(trials, experts)`` arrays.

    ``labels`` is 1 for genuine, 0 for impostor and -1 for unknown trials.
    """

    experts: tuple[str, ...]
    scores: np.ndarray
    qualities: np.ndarray
    claim_qualities: np.ndarray
    labels: np.ndarray
    shot_ids: np.ndarray
    claim_ids: np.ndarray

    def __len__(self):
        return self.scores.shape[0]

    @property
    def genuine(self) -> np.ndarray:
        return self.labels == 1

    @property
    def impostor(self) -> np.ndarray:
        return self.labels == 0

    def subset(self, rows) -> "ScorePanel":
        return ScorePanel(self.experts, self.scores[rows], self.qualities[rows],
                          self.claim_qualities[rows], self.labels[rows],
                          self.shot_ids[rows], self.claim_ids[rows])

    def select_experts(self, names: Sequence[str]) -> "ScorePanel":
        idx = [self.experts.index(n) for n in names]
        return ScorePanel(tuple(names), self.scores[:, idx], self.qualities[:, idx],
                          self.claim_qualities[:, idx], self.labels,
                          self.shot_ids, self.claim_ids)

    def quality_indices(self) -> np.ndarray:
        return quality_index(self.qualities, self.claim_qualities)


def generate_synthetic_panel(experts: Sequence[ExpertModel], n_users: int = 10,
                             genuine_per_user: int = 10, impostor_per_user: int = 10,
                             quality_range: tuple[float, float] = (0.25, 2.0),
                             claim_quality: float = 2.0, seed: int = 0,
                             clamp: bool = True) -> ScorePanel:
    """Draw a labelled score panel from the Gaussian expert error model.

    Every user (claim) gets `genuine_per_user` genuine and
    `impostor_per_user` impostor shots, each scored by every expert.  Each
    shot has one image quality drawn uniformly from `quality_range`, shared
    by all experts that report quality.  Scores are ``y - z`` with
    ``z ~ N(bias, noise**2 * s)``, clipped to [0, 1] unless `clamp` is off.
    """
    experts = list(experts)
    if not experts:
        raise InvariantError("need at least one expert")
    lo, hi = quality_range
    if not 0 <= lo <= hi:
        raise InvariantError(f"bad quality range {quality_range}")
    rng = np.random.default_rng(seed)
    per_user = genuine_per_user + impostor_per_user
    n = n_users * per_user
    labels = np.tile(np.r_[np.ones(genuine_per_user, int), np.zeros(impostor_per_user, int)], n_users)
    users = np.repeat(np.arange(1, n_users + 1), per_user)
    kind = np.where(labels == 1, "g", "i")
    within = np.tile(np.r_[np.arange(genuine_per_user), np.arange(impostor_per_user)], n_users)
    shot_ids = np.array([f"u{u}-{k}{j}" for u, k, j in zip(users, kind, within)], dtype=object)
    claim_ids = np.array([f"u{u}" for u in users], dtype=object)

    shot_quality = rng.uniform(lo, hi, n)
    m = len(experts)
    scores = np.empty((n, m))
    qualities = np.empty((n, m))
    claims = np.empty((n, m))
    for i, ex in enumerate(experts):
        if ex.quality == "fixed":
            qualities[:, i] = 1.0
            claims[:, i] = 1.0
        else:
            qualities[:, i] = shot_quality
            claims[:, i] = claim_quality
        if ex.quality == "coupled":
            sd = ex.noise * np.sqrt(score_variance(quality_index(qualities[:, i], claims[:, i])))
        else:
            sd = np.full(n, float(ex.noise))
        ib = ex.bias if ex.impostor_bias is None else ex.impostor_bias
        z = np.where(labels == 1, ex.bias, ib) + sd * rng.standard_normal(n)
        scores[:, i] = labels - z
    if clamp:
        np.clip(scores, 0.0, 1.0, out=scores)
    return ScorePanel(tuple(ex.name for ex in experts), scores, qualities, claims,
                      labels, shot_ids, claim_ids)
