"""Server-side aggregation rules.

Each rule maps a list of aggregands (client updates in baseline mode,
cohort aggregates in meta mode) to a single parameter vector. All rules
are pure; differential privacy takes an explicit noise seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .linalg import ParameterVector, as_vector, l2_norm, mean_vectors, project_to_ball

RULES = ("fedavg", "krum", "cwm", "trimmed_mean", "rfa", "norm_bound", "dp")


@dataclass
class AggregatorConfig:
    rule: str = "fedavg"
    f: int = 6                  # Krum byzantine bound
    beta: float = 0.20          # trimmed-mean trim fraction per side
    rfa_max_iter: int = 10
    rfa_smoothing: float = 1e-6
    dp_sigma: float = 0.001
    seed: int = 0               # DP noise stream

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown aggregation rule: {self.rule!r}")
        if not (0.0 <= self.beta < 0.5):
            raise ValueError(f"beta must be in [0, 0.5), got {self.beta}")
        if self.f < 0:
            raise ValueError("f must be non-negative")
        if self.dp_sigma < 0:
            raise ValueError("dp_sigma must be non-negative")


def _stack(aggregands: Sequence[ParameterVector]) -> np.ndarray:
    vs = [as_vector(v) for v in aggregands]
    if not vs:
        raise ValueError("no aggregands")
    dims = {v.shape[0] for v in vs}
    if len(dims) != 1:
        raise ValueError(f"aggregand dimensions differ: {sorted(dims)}")
    return np.stack(vs)


def fedavg(aggregands: Sequence[ParameterVector]) -> ParameterVector:
    return mean_vectors(aggregands)


def krum(aggregands: Sequence[ParameterVector], f: int) -> ParameterVector:
    """Select the aggregand with the lowest sum of squared distances to
    its n-f-2 nearest peers. Requires n >= 2f+3; ties break to the
    lowest index."""
    A = _stack(aggregands)
    n = A.shape[0]
    if n < 2 * f + 3:
        raise ValueError(f"krum needs n >= 2f+3 aggregands (n={n}, f={f})")
    diffs = A[:, None, :] - A[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diffs, diffs)
    k = n - f - 2
    scores = np.empty(n)
    for i in range(n):
        others = np.delete(sq[i], i)
        scores[i] = np.sort(others)[:k].sum()
    return A[int(np.argmin(scores))].copy()


def coordinate_wise_median(aggregands: Sequence[ParameterVector]) -> ParameterVector:
    return np.median(_stack(aggregands), axis=0)


def trimmed_mean(aggregands: Sequence[ParameterVector], beta: float) -> ParameterVector:
    """Per coordinate: drop floor(beta*n) values from each end, average the rest."""
    if not (0.0 <= beta < 0.5):
        raise ValueError(f"beta must be in [0, 0.5), got {beta}")
    A = _stack(aggregands)
    n = A.shape[0]
    k = int(np.floor(beta * n))
    if n - 2 * k < 1:
        raise ValueError("trimming would discard every aggregand")
    A_sorted = np.sort(A, axis=0)
    return A_sorted[k:n - k].mean(axis=0)


def rfa_geometric_median(aggregands: Sequence[ParameterVector], max_iter: int = 10,
                         smoothing: float = 1e-6) -> ParameterVector:
    """Smoothed Weiszfeld iteration for the geometric median, uniform
    weights, starting from the plain mean."""
    A = _stack(aggregands)
    z = A.mean(axis=0)
    for _ in range(max_iter):
        dists = np.linalg.norm(A - z, axis=1)
        w = 1.0 / np.maximum(dists, smoothing)
        z = (w[:, None] * A).sum(axis=0) / w.sum()
    return z


def norm_bounding(aggregands: Sequence[ParameterVector]) -> ParameterVector:
    """Project every aggregand to the l2 ball whose radius is the smallest
    aggregand norm this call, then average."""
    A = _stack(aggregands)
    norms = np.linalg.norm(A, axis=1)
    M = float(norms.min())
    if M == 0.0:
        return np.zeros(A.shape[1])
    projected = [project_to_ball(v, M) for v in A]
    return mean_vectors(projected)


def dp_aggregate(aggregands: Sequence[ParameterVector], sigma: float, seed: int) -> ParameterVector:
    """Norm-bounded average plus per-coordinate Gaussian noise of std sigma."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    base = norm_bounding(aggregands)
    noise = np.random.default_rng(seed).normal(0.0, sigma, size=base.shape[0]) if sigma > 0 \
        else np.zeros_like(base)
    return base + noise


def apply_rule(aggregands: Sequence[ParameterVector], cfg: AggregatorConfig) -> ParameterVector:
    """Dispatch on cfg.rule."""
    if cfg.rule == "fedavg":
        return fedavg(aggregands)
    if cfg.rule == "krum":
        return krum(aggregands, cfg.f)
    if cfg.rule == "cwm":
        return coordinate_wise_median(aggregands)
    if cfg.rule == "trimmed_mean":
        return trimmed_mean(aggregands, cfg.beta)
    if cfg.rule == "rfa":
        return rfa_geometric_median(aggregands, cfg.rfa_max_iter, cfg.rfa_smoothing)
    if cfg.rule == "norm_bound":
        return norm_bounding(aggregands)
    if cfg.rule == "dp":
        return dp_aggregate(aggregands, cfg.dp_sigma, cfg.seed)
    raise ValueError(f"unknown aggregation rule: {cfg.rule!r}")
