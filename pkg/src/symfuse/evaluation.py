"""Verification error rates, quality groups and the leave-one-user-out protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import DataError, TrainingSizeError
from .fusion import ALPHA_FLOOR, Q_FLOOR, bayes_fuse, panel_variances, train_supervisor

__all__ = [
    "far_frr",
    "compute_eer",
    "eer_from_labels",
    "roman",
    "QualityGroup",
    "QualityGroupPartition",
    "quality_partition",
    "finger_qualities",
    "GroupResult",
    "per_group_eer",
    "JackknifeResult",
    "jackknife_eer",
]


def _split(genuine, impostor):
    g = np.asarray(genuine, dtype=np.float64).ravel()
    i = np.asarray(impostor, dtype=np.float64).ravel()
    if g.size == 0 or i.size == 0:
        raise DataError("need both genuine and impostor trials")
    return g, i


def far_frr(genuine, impostor, threshold: float) -> tuple[float, float]:
    """False acceptance and false rejection rates at `threshold`.

    A trial is accepted when its score is at least the threshold.
    """
    g, i = _split(genuine, impostor)
    return float(np.mean(i >= threshold)), float(np.mean(g < threshold))


def compute_eer(genuine, impostor) -> float:
    """Equal error rate by a sweep over every observed score.

    Candidate thresholds are the distinct scores plus one above them all.
    At the threshold where ``|FAR - FRR|`` is smallest (the lowest such
    threshold on ties) the midpoint ``(FAR + FRR) / 2`` is returned.
    """
    g, i = _split(genuine, impostor)
    g = np.sort(g)
    i = np.sort(i)
    t = np.unique(np.concatenate([g, i, [np.inf]]))
    far = (i.size - np.searchsorted(i, t, side="left")) / i.size
    frr = np.searchsorted(g, t, side="left") / g.size
    k = int(np.argmin(np.abs(far - frr)))
    return float((far[k] + frr[k]) / 2.0)


def eer_from_labels(scores, labels) -> float:
    """EER of scores labelled 1 (genuine) / 0 (impostor)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    return compute_eer(scores[labels == 1], scores[labels == 0])


_ROMAN = [(1000, "M"), (900, "CM"), (500, "D"), (400, "CD"), (100, "C"), (90, "XC"),
          (50, "L"), (40, "XL"), (10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I")]


def roman(n: int) -> str:
    out = []
    for value, sym in _ROMAN:
        while n >= value:
            out.append(sym)
            n -= value
    return "".join(out)


@dataclass(frozen=True)
class QualityGroup:
    label: str
    members: tuple
    mean_quality: float


@dataclass(frozen=True)
class QualityGroupPartition:
    groups: tuple[QualityGroup, ...]

    def __iter__(self):
        return iter(self.groups)

    def __len__(self):
        return len(self.groups)

    def group_of(self) -> dict:
        """Map each member to its group label."""
        return {m: g.label for g in self.groups for m in g.members}


def quality_partition(qualities: Mapping[Hashable, float], k: int = 5) -> QualityGroupPartition:
    """Split fingers into `k` equally sized groups of increasing quality.

    Fingers are sorted by quality, ties broken by finger id.  Groups get
    ``n // k`` members each and the ``n % k`` leftovers go one apiece to
    the lowest groups.  Labels run I, II, ... from worst to best.
    """
    n = len(qualities)
    if k <= 0 or k > n:
        raise DataError(f"cannot split {n} fingers into {k} groups")
    order = sorted(qualities, key=lambda f: (qualities[f], f))
    base, extra = divmod(n, k)
    groups = []
    start = 0
    for g in range(k):
        size = base + (1 if g < extra else 0)
        members = tuple(order[start:start + size])
        start += size
        mean_q = float(np.mean([qualities[f] for f in members]))
        groups.append(QualityGroup(roman(g + 1), members, mean_q))
    return QualityGroupPartition(tuple(groups))


def finger_qualities(finger_ids, qualities, labels) -> dict:
    """Mean quality of each finger over its genuine trials."""
    finger_ids = np.asarray(finger_ids, dtype=object)
    qualities = np.asarray(qualities, dtype=np.float64)
    labels = np.asarray(labels)
    out = {}
    for f in dict.fromkeys(finger_ids[labels == 1]):
        sel = (finger_ids == f) & (labels == 1)
        out[f] = float(qualities[sel].mean())
    return out


@dataclass(frozen=True)
class GroupResult:
    group: str
    n_genuine: int
    n_impostor: int
    eer: float


def per_group_eer(partition: QualityGroupPartition, finger_ids, scores, labels) -> list[GroupResult]:
    """EER within each quality group.

    Trials belong to the group of their finger (claim).  A group lacking
    genuine or impostor trials reports an EER of NaN.
    """
    finger_ids = np.asarray(finger_ids, dtype=object)
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    out = []
    for group in partition:
        sel = np.isin(finger_ids, np.array(group.members, dtype=object))
        g = scores[sel & (labels == 1)]
        i = scores[sel & (labels == 0)]
        eer = compute_eer(g, i) if g.size and i.size else math.nan
        out.append(GroupResult(group.label, int(g.size), int(i.size), eer))
    return out


@dataclass
class JackknifeResult:
    eer: float
    fold_eers: dict = field(default_factory=dict)
    scores: np.ndarray | None = None
    labels: np.ndarray | None = None


def _training_rows(panel, users, per_user):
    if per_user is None:
        return np.ones(len(panel), dtype=bool)
    keep = np.zeros(len(panel), dtype=bool)
    for u in users:
        for lab in (1, 0):
            rows = np.flatnonzero((panel.claim_ids == u) & (panel.labels == lab))
            keep[rows[:per_user]] = True
    return keep


def jackknife_eer(panel, adaptive: bool = True, mode: str = "pooled",
                  train_per_user: int | None = None, q_floor: float = Q_FLOOR,
                  alpha_floor: float = ALPHA_FLOOR) -> JackknifeResult:
    """Leave-one-user-out evaluation of the Bayesian supervisor.

    For each user (claim id) the supervisor is trained on the labelled
    trials of all other users and tested on that user's trials.  With
    `train_per_user`, only the first that many genuine and impostor trials
    of each user serve for training and the rest for testing.

    ``mode="pooled"`` computes one EER over all test scores;
    ``mode="mean"`` averages per-fold EERs.
    """
    if mode not in ("pooled", "mean"):
        raise ValueError(f"unknown jackknife mode {mode!r}")
    labelled = panel.labels >= 0
    panel = panel.subset(labelled)
    users = list(dict.fromkeys(panel.claim_ids))
    if len(users) < 2:
        raise TrainingSizeError("jackknife needs at least two users")
    train_mask = _training_rows(panel, users, train_per_user)
    s_all = panel_variances(panel.qualities, panel.claim_qualities, adaptive, q_floor,
                            shape=panel.scores.shape)
    fused = np.full(len(panel), np.nan)
    fold_eers = {}
    for u in users:
        own = panel.claim_ids == u
        tr = ~own & train_mask
        te = own & (~train_mask if train_per_user is not None else True)
        gen = tr & (panel.labels == 1)
        imp = tr & (panel.labels == 0)
        try:
            sup = train_supervisor(panel.scores[gen], panel.scores[imp], s_all[gen], s_all[imp],
                                   experts=panel.experts, alpha_floor=alpha_floor)
        except TrainingSizeError as exc:
            raise TrainingSizeError(f"fold {u}: {exc}") from exc
        if not te.any():
            continue
        fused[te] = bayes_fuse(sup, panel.scores[te], panel.qualities[te],
                               panel.claim_qualities[te], adaptive=adaptive, q_floor=q_floor).score
        lab = panel.labels[te]
        if (lab == 1).any() and (lab == 0).any():
            fold_eers[u] = eer_from_labels(fused[te], lab)
    tested = ~np.isnan(fused)
    if mode == "pooled":
        eer = eer_from_labels(fused[tested], panel.labels[tested])
    else:
        if not fold_eers:
            raise DataError("no fold has both genuine and impostor test trials")
        eer = float(np.mean(list(fold_eers.values())))
    return JackknifeResult(eer, fold_eers, fused[tested], panel.labels[tested])
