"""Dense vector algebra over flat model-parameter vectors.

Every aggregation rule and the learner operate on plain 1-D float64
numpy arrays; this module is the single place where boundary checks
(finiteness, matching dimension) happen.
"""
from __future__ import annotations

import numpy as np

ParameterVector = np.ndarray


def as_vector(values) -> ParameterVector:
    """Coerce to a float64 1-D array, rejecting NaN/Inf."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        v = v.ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("parameter vector contains non-finite entries")
    return v


def l2_norm(v: ParameterVector) -> float:
    v = as_vector(v)
    return float(np.sqrt(np.dot(v, v)))


def mean_vectors(vs) -> ParameterVector:
    """Coordinate-wise arithmetic mean of equally sized vectors."""
    vs = [as_vector(v) for v in vs]
    if not vs:
        raise ValueError("cannot average an empty list of vectors")
    dim = vs[0].shape[0]
    for v in vs[1:]:
        if v.shape[0] != dim:
            raise ValueError(f"dimension mismatch: {v.shape[0]} != {dim}")
    return np.mean(np.stack(vs), axis=0)


def project_to_ball(v: ParameterVector, M: float) -> ParameterVector:
    """Project v onto the l2 ball of radius M (identity if already inside)."""
    if M <= 0:
        raise ValueError(f"ball radius must be positive, got {M}")
    v = as_vector(v)
    norm = l2_norm(v)
    if norm <= M:
        return v
    return v * (M / norm)
