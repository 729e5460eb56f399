"""Score-level fusion of several experts.

Three families live here: the trained Bayesian supervisor (client and
impostor sides, optionally quality adaptive), the quality-triggered
cascade, and the plain SUM/MAX rules.

Score matrices are laid out ``(shots, experts)``.  A true authenticity of
1 marks genuine shots and 0 impostor shots, and the error of expert ``i``
on shot ``j`` is ``y_j - x_ij``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ExpertFailure, InvariantError, PanelError, TrainingSizeError

__all__ = [
    "Q_FLOOR",
    "ALPHA_FLOOR",
    "MIN_TRAINING_SHOTS",
    "quality_index",
    "score_variance",
    "supervisor_quality",
    "SupervisorSide",
    "TrainedSupervisor",
    "estimate_side",
    "train_supervisor",
    "calibrate",
    "combine",
    "FusionDecision",
    "decide",
    "panel_variances",
    "bayes_fuse",
    "fuse_sum",
    "fuse_max",
    "RULES",
    "CascadeConfig",
    "cascaded_fuse",
    "cascade_scores",
    "default_thresholds",
    "expected_execution_fraction",
]

Q_FLOOR = 0.05
ALPHA_FLOOR = 1e-8
MIN_TRAINING_SHOTS = 4
TIE_TOL = 1e-12


def quality_index(quality, claim_quality):
    """Quality of a score: the worse of the shot and the enrolled claim."""
    return np.minimum(quality, claim_quality)


def score_variance(q, q_floor: float = Q_FLOOR):
    """Score variance ``1 / q**2`` with ``q`` floored at `q_floor`."""
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < 0):
        raise InvariantError("quality index must be non-negative")
    out = 1.0 / np.maximum(q, q_floor) ** 2
    return float(out) if out.ndim == 0 else out


def supervisor_quality(overall_quality, scale: float = 2.0):
    """Map an image quality in [0, 1] to the supervisor's quality scale.

    With the default scale 2, an image quality of 0.5 becomes the
    "normal" quality 1 and the best image quality becomes 2.
    """
    return np.asarray(overall_quality, dtype=np.float64) * scale


@dataclass(frozen=True)
class SupervisorSide:
    """Per-expert bias ``M``, bias variance ``V`` and variance scale ``alpha``."""

    bias: np.ndarray
    variance: np.ndarray
    alpha: np.ndarray
    n_shots: int


@dataclass(frozen=True)
class TrainedSupervisor:
    experts: tuple[str, ...]
    client: SupervisorSide
    impostor: SupervisorSide

    @property
    def n_experts(self) -> int:
        return len(self.experts)

    def side(self, name: str) -> SupervisorSide:
        if name == "client":
            return self.client
        if name == "impostor":
            return self.impostor
        raise ValueError(f"unknown supervisor side {name!r}")

    def params(self) -> dict[str, np.ndarray]:
        return {
            "MC": self.client.bias, "VC": self.client.variance, "alphaC": self.client.alpha,
            "MI": self.impostor.bias, "VI": self.impostor.variance, "alphaI": self.impostor.alpha,
        }


def _as_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise PanelError(f"{name} must be a (shots, experts) matrix")
    return a


def estimate_side(errors, variances=None, alpha_floor: float = ALPHA_FLOOR) -> SupervisorSide:
    """Bias statistics of each expert from its training errors.

    Parameters
    ----------
    errors : array, shape (n, m)
        ``y - x`` for every training shot and expert.
    variances : array, shape (n, m), optional
        Per-score variances ``s``; 1 everywhere when omitted.
    """
    z = _as_matrix(errors, "errors")
    s = np.ones_like(z) if variances is None else _as_matrix(variances, "variances")
    if s.shape != z.shape:
        raise PanelError(f"variances shape {s.shape} does not match errors {z.shape}")
    if np.isnan(z).any() or np.isnan(s).any():
        raise PanelError("incomplete panel: every expert must score every training shot")
    if np.any(s <= 0):
        raise InvariantError("score variances must be positive")
    n = z.shape[0]
    if n < MIN_TRAINING_SHOTS:
        raise TrainingSizeError(f"need at least {MIN_TRAINING_SHOTS} training shots per side, got {n}")
    w = 1.0 / s
    sw = w.sum(axis=0)
    swz = (w * z).sum(axis=0)
    alpha = ((w * z * z).sum(axis=0) - swz**2 / sw) / (n - 3)
    # rounding can push a zero-scatter estimate slightly below zero
    if np.any(alpha < -alpha_floor):
        warnings.warn(f"negative variance scale {alpha.min():.3g} floored", RuntimeWarning, stacklevel=2)
    alpha = np.maximum(alpha, alpha_floor)
    # sigma^2 = s * alpha, so alpha cancels from the bias estimate
    sigma2 = s * alpha
    bias = (z / sigma2).sum(axis=0) / (1.0 / sigma2).sum(axis=0)
    variance = 1.0 / (1.0 / sigma2).sum(axis=0)
    return SupervisorSide(bias, variance, alpha, n)


def train_supervisor(client_scores, impostor_scores, client_variances=None,
                     impostor_variances=None, experts: Sequence[str] | None = None,
                     alpha_floor: float = ALPHA_FLOOR) -> TrainedSupervisor:
    """Train client and impostor supervisors.

    `client_scores` holds scores of genuine shots, `impostor_scores` of
    impostor shots, both ``(shots, experts)``.  Variances default to 1
    (experts without quality estimates).
    """
    xc = _as_matrix(client_scores, "client scores")
    xi = _as_matrix(impostor_scores, "impostor scores")
    if xc.shape[1] != xi.shape[1]:
        raise PanelError("client and impostor panels cover different experts")
    m = xc.shape[1]
    experts = tuple(str(e) for e in experts) if experts is not None else tuple(str(i) for i in range(1, m + 1))
    if len(experts) != m:
        raise PanelError(f"{len(experts)} expert ids for {m} score columns")
    client = estimate_side(1.0 - xc, client_variances, alpha_floor)
    impostor = estimate_side(0.0 - xi, impostor_variances, alpha_floor)
    return TrainedSupervisor(experts, client, impostor)


def calibrate(side: SupervisorSide, x, s=1.0):
    """Calibrated means and variances, ``x + M`` and ``s * alpha + V``."""
    x = np.asarray(x, dtype=np.float64)
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), x.shape)
    return x + side.bias, s * side.alpha + side.variance


def combine(means, variances):
    """Inverse-variance weighted mean over the last (expert) axis."""
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    if means.shape[-1:] == (0,):
        raise PanelError("no experts to combine")
    if np.any(variances <= 0):
        raise InvariantError("calibrated variances must be positive")
    w = 1.0 / variances
    out = (means * w).sum(axis=-1) / w.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FusionDecision:
    """Conciliated score and the supervisor that produced it.

    Fields are scalars for a single shot or arrays for a batch; ``client``
    is True where the client supervisor won.
    """

    score: np.ndarray | float
    client: np.ndarray | bool
    client_score: np.ndarray | float
    impostor_score: np.ndarray | float

    @property
    def branch(self):
        if np.ndim(self.client) == 0:
            return "client" if self.client else "impostor"
        return np.where(self.client, "client", "impostor")


def decide(client_score, impostor_score) -> FusionDecision:
    """Keep whichever supervisor is closer to its ideal value.

    Ties go to the impostor supervisor.  Distances that differ by less
    than :data:`TIE_TOL` count as a tie, so decimal inputs such as
    (0.8, 0.2) are not decided by binary rounding.
    """
    mc = np.asarray(client_score, dtype=np.float64)
    mi = np.asarray(impostor_score, dtype=np.float64)
    pick = np.abs(1.0 - mc) - np.abs(0.0 - mi) < -TIE_TOL
    score = np.where(pick, mc, mi)
    if score.ndim == 0:
        return FusionDecision(float(score), bool(pick), float(mc), float(mi))
    return FusionDecision(score, pick, mc, mi)


def panel_variances(qualities=None, claim_qualities=None, adaptive: bool = True,
                    q_floor: float = Q_FLOOR, shape=None):
    """Score variances for a panel: ``1 / q**2`` when adaptive, else ones."""
    if not adaptive or qualities is None:
        if shape is None:
            shape = np.shape(qualities)
        return np.ones(shape)
    q = np.asarray(qualities, dtype=np.float64)
    if claim_qualities is not None:
        q = quality_index(q, np.asarray(claim_qualities, dtype=np.float64))
    return score_variance(q, q_floor)


def bayes_fuse(sup: TrainedSupervisor, scores, qualities=None, claim_qualities=None,
               adaptive: bool = True, q_floor: float = Q_FLOOR) -> FusionDecision:
    """Fuse one panel (shape ``(m,)``) or a batch (``(n, m)``) of expert scores.

    Columns follow ``sup.experts``.  When `adaptive` is false, or no
    qualities are given, every score variance is 1.
    """
    x = np.asarray(scores, dtype=np.float64)
    if x.shape[-1:] != (sup.n_experts,):
        raise PanelError(f"panel has {x.shape[-1:]} experts, supervisor expects {sup.n_experts}")
    if np.isnan(x).any():
        raise PanelError("incomplete panel")
    s = panel_variances(qualities, claim_qualities, adaptive, q_floor, shape=x.shape)
    s = np.broadcast_to(s, x.shape)
    mc = combine(*calibrate(sup.client, x, s))
    mi = combine(*calibrate(sup.impostor, x, s))
    return decide(mc, mi)


def fuse_sum(scores):
    """Mean score over the last (expert) axis."""
    x = np.asarray(scores, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise PanelError("empty panel")
    out = x.mean(axis=-1)
    return float(out) if out.ndim == 0 else out


def fuse_max(scores):
    x = np.asarray(scores, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise PanelError("empty panel")
    out = x.max(axis=-1)
    return float(out) if out.ndim == 0 else out


RULES: dict[str, Callable] = {"sum": fuse_sum, "max": fuse_max}


def _rule(rule):
    if callable(rule):
        return rule
    try:
        return RULES[str(rule).lower()]
    except KeyError:
        raise ValueError(f"unknown fusion rule {rule!r}") from None


@dataclass(frozen=True)
class CascadeConfig:
    """Trigger thresholds for experts 2..m and the rule that fuses them.

    Expert ``i`` (1-based, ``i >= 2``) runs only when the certainty is
    below ``thresholds[i - 2]``.
    """

    thresholds: tuple[float, ...]
    rule: str = "max"

    def __post_init__(self):
        t = tuple(float(v) for v in self.thresholds)
        if any(b >= a for a, b in zip(t, t[1:])):
            raise InvariantError(f"thresholds must be strictly decreasing: {t}")
        object.__setattr__(self, "thresholds", t)
        _rule(self.rule)

    @property
    def n_experts(self) -> int:
        return len(self.thresholds) + 1

    def experts_for(self, certainty):
        """How many experts a trial with this certainty triggers."""
        c = np.asarray(certainty, dtype=np.float64)
        t = np.asarray(self.thresholds)
        n = 1 + (c[..., None] < t).sum(axis=-1) if t.size else np.ones(c.shape, dtype=int)
        return int(n) if np.ndim(n) == 0 else n


def cascaded_fuse(cfg: CascadeConfig, certainty: float,
                  experts: Sequence[Callable[[], float]]) -> tuple[float, int]:
    """Run experts lazily until the certainty clears the next threshold.

    The first expert always runs; each further expert runs only when
    `certainty` lies below its trigger threshold.  Returns the fused score
    and the number of experts evaluated.
    """
    if certainty < 0:
        raise InvariantError("certainty must be non-negative")
    if len(experts) != cfg.n_experts:
        raise PanelError(f"{len(experts)} experts for {len(cfg.thresholds)} thresholds")
    scores = []
    for i, expert in enumerate(experts):
        if i > 0 and not certainty < cfg.thresholds[i - 1]:
            break
        try:
            scores.append(float(expert()))
        except Exception as exc:
            raise ExpertFailure(i + 1, exc) from exc
    return _rule(cfg.rule)(np.array(scores)), len(scores)


def cascade_scores(cfg: CascadeConfig, scores, certainty):
    """Cascade over precomputed scores ``(n, m)``.

    Returns fused scores and the per-trial count of experts used.  Trials
    that trigger every expert are fused with exactly the plain rule.
    """
    x = np.asarray(scores, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.n_experts:
        raise PanelError(f"expected (n, {cfg.n_experts}) scores, got {x.shape}")
    c = np.asarray(certainty, dtype=np.float64)
    if np.any(c < 0):
        raise InvariantError("certainty must be non-negative")
    used = np.broadcast_to(cfg.experts_for(c), (x.shape[0],))
    fused = np.empty(x.shape[0])
    rule = _rule(cfg.rule)
    for k in np.unique(used):
        sel = used == k
        fused[sel] = rule(x[sel, :k])
    return fused, np.asarray(used)


def default_thresholds(m: int, q_best: float = 1.0) -> tuple[float, ...]:
    """Halving schedule: the first threshold is half the best expected quality."""
    if m < 2:
        raise InvariantError("a cascade needs at least two experts")
    if not q_best > 0:
        raise InvariantError("expected best quality must be positive")
    return tuple(q_best / 2.0**i for i in range(1, m))


def expected_execution_fraction(m: int) -> float:
    """Expected share of expert runs under the halving schedule.

    Assumes certainties uniform on ``[0, q_best]``.
    """
    if m < 1:
        raise InvariantError("need at least one expert")
    return (2.0 - 2.0 ** (1 - m)) / m
