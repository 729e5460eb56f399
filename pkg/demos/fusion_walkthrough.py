"""
Fusing two matchers with quality
================================

Two synthetic experts, one whose noise grows as quality drops.  We train the
Bayesian supervisor with and without quality, compare to SUM and MAX, and
run a quality-triggered cascade.
"""

import warnings

import numpy as np

from symfuse.evaluation import eer_from_labels, jackknife_eer
from symfuse.fusion import (
    CascadeConfig,
    bayes_fuse,
    cascade_scores,
    default_thresholds,
    expected_execution_fraction,
    fuse_max,
    fuse_sum,
    panel_variances,
    quality_index,
    train_supervisor,
)
from symfuse.synth import ExpertModel, generate_synthetic_panel

warnings.simplefilter("ignore", RuntimeWarning)

experts = [ExpertModel("A", 0.2, 0.15, "coupled", impostor_bias=-0.2),
           ExpertModel("B", 0.3, 0.15, "fixed", impostor_bias=-0.3)]
train = generate_synthetic_panel(experts, n_users=1, genuine_per_user=10, impostor_per_user=10, seed=0)
test = generate_synthetic_panel(experts, n_users=1, genuine_per_user=5000, impostor_per_user=5000, seed=1)

for i, name in enumerate(test.experts):
    print(f"expert {name}: EER={eer_from_labels(test.scores[:, i], test.labels):.4f}")
print(f"SUM: EER={eer_from_labels(fuse_sum(test.scores), test.labels):.4f}")
print(f"MAX: EER={eer_from_labels(fuse_max(test.scores), test.labels):.4f}")

g, i = train.genuine, train.impostor
for adaptive in (False, True):
    s = panel_variances(train.qualities, train.claim_qualities, adaptive, shape=train.scores.shape)
    sup = train_supervisor(train.scores[g], train.scores[i], s[g], s[i], experts=train.experts)
    fused = bayes_fuse(sup, test.scores, test.qualities, test.claim_qualities, adaptive=adaptive)
    tag = "adaptive" if adaptive else "plain"
    print(f"Bayes {tag:8s}: EER={eer_from_labels(fused.score, test.labels):.4f}  "
          f"client branch on {np.mean(fused.client):.0%} of trials")
    print("   client biases", np.round(sup.client.bias, 3), " impostor biases", np.round(sup.impostor.bias, 3))

# cascade: expert B only runs when expert A's quality index is low
c = quality_index(test.qualities[:, 0], test.claim_qualities[:, 0])
cfg = CascadeConfig(default_thresholds(2, q_best=float(c.max())), "max")
fused, used = cascade_scores(cfg, test.scores, c)
print(f"cascade thresholds {cfg.thresholds}: executions {used.mean() / 2:.3f} "
      f"(uniform-quality model predicts {expected_execution_fraction(2):.3f}), "
      f"EER={eer_from_labels(fused, test.labels):.4f}")

# leave-one-user-out on a multi-user panel
panel = generate_synthetic_panel(experts, n_users=10, genuine_per_user=20, impostor_per_user=20, seed=2)
res = jackknife_eer(panel, adaptive=True)
print(f"jackknife (adaptive, pooled) EER={res.eer:.4f} over {len(res.fold_eers)} folds")
