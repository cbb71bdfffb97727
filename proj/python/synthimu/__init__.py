"""Pose-to-inertial transfer learning toolkit.

Thin python surface over the C++ core: quintic-spline signal operations,
sliding-window segmentation, temporal CNNs with layer transplantation, and
the evaluation stack (weighted F1, majority voting, permutation tests).
"""

from synthimu._core import (
    Model,
    aggregate_runs,
    anchor_normalize,
    confusion,
    gradient_check,
    majority_vote,
    metrics_report,
    orthonormal_init,
    permutation_test,
    quintic_eval,
    resample,
    segment,
    split_indices,
    stratified_sample_indices,
    synthesize_obd,
    transplant,
    weighted_f1,
    window_count,
    zscore,
)

__all__ = [
    "Model",
    "aggregate_runs",
    "anchor_normalize",
    "confusion",
    "gradient_check",
    "majority_vote",
    "metrics_report",
    "orthonormal_init",
    "permutation_test",
    "quintic_eval",
    "resample",
    "segment",
    "split_indices",
    "stratified_sample_indices",
    "synthesize_obd",
    "transplant",
    "weighted_f1",
    "window_count",
    "zscore",
]
