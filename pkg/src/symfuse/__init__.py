"""Symmetry-filter fingerprint quality and quality-aware multi-expert score fusion."""

from .errors import (
    DataError,
    DimensionError,
    ExpertFailure,
    FormatError,
    InvariantError,
    PanelError,
    SymfuseError,
    TrainingSizeError,
)
from .symmetry import (
    FilterBank,
    build_symmetry_filter,
    inhibit,
    orientation_tensor,
    symmetry_responses,
    total_symmetry,
)
from .quality import QualityConfig, QualityReport, assess_fingerprint
from .fusion import (
    CascadeConfig,
    TrainedSupervisor,
    bayes_fuse,
    cascade_scores,
    cascaded_fuse,
    default_thresholds,
    expected_execution_fraction,
    fuse_max,
    fuse_sum,
    quality_index,
    score_variance,
    train_supervisor,
)
from .evaluation import compute_eer, jackknife_eer, per_group_eer, quality_partition
from .synth import (
    ExpertModel,
    ScorePanel,
    generate_core_in_grating,
    generate_synthetic_panel,
    generate_test_pattern,
)

__version__ = "0.1.0"
