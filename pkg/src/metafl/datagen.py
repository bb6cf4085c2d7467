"""Synthetic classification data, non-i.i.d. Dirichlet partitioning and
backdoor trigger embedding.

The dataset is a stand-in for image benchmarks: Gaussian clusters in
[0,1]^d_in, one cluster per class. The visual "square in the corner"
trigger becomes the leading block of feature coordinates, covering the
same area fraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np


@dataclass(frozen=True)
class Sample:
    features: np.ndarray  # shape (d_in,), values in [0,1]
    label: int
    uid: int = -1  # identity for partition-disjointness checks

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))


@dataclass
class ClientShard:
    client_id: int
    samples: List[Sample] = field(default_factory=list)
    poisoned: bool = False

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class TriggerSpec:
    coverage_fraction: float = 0.09
    trigger_value: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.coverage_fraction < 1.0):
            raise ValueError(f"coverage_fraction must be in (0,1), got {self.coverage_fraction}")

    def n_coords(self, d_in: int) -> int:
        return math.ceil(self.coverage_fraction * d_in)


def generate_dataset(n_samples: int, d_in: int, n_classes: int, seed: int,
                     cluster_std: float = 0.12) -> List[Sample]:
    """Gaussian class-cluster data clipped to [0,1]^d_in.

    Class means are drawn uniformly in [0.15, 0.85]^d_in so clusters do
    not saturate at the box boundary. Every class gets at least one
    sample (labels assigned round-robin then shuffled).
    """
    if n_samples < n_classes:
        raise ValueError("need at least one sample per class")
    if d_in < 4:
        raise ValueError("feature dimension must be at least 4")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.15, 0.85, size=(n_classes, d_in))
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    feats = means[labels] + rng.normal(0.0, cluster_std, size=(n_samples, d_in))
    np.clip(feats, 0.0, 1.0, out=feats)
    return [Sample(feats[i], int(labels[i]), uid=i) for i in range(n_samples)]


def dirichlet_partition(dataset: List[Sample], P: int, alpha: float, seed: int) -> List[ClientShard]:
    """Split a dataset among P clients, class by class, with Dirichlet
    proportions per class. Empty shards are re-balanced by moving one
    sample from the largest shard so training never sees an empty client.
    """
    if P < 2:
        raise ValueError("need at least 2 clients")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if len(dataset) < P:
        raise ValueError("dataset smaller than client count")
    rng = np.random.default_rng(seed)
    shards = [ClientShard(client_id=i) for i in range(P)]
    labels = sorted({s.label for s in dataset})
    for lbl in labels:
        members = [s for s in dataset if s.label == lbl]
        props = rng.dirichlet([alpha] * P)
        # largest-remainder rounding so counts sum exactly to len(members)
        raw = props * len(members)
        counts = np.floor(raw).astype(int)
        short = len(members) - counts.sum()
        for idx in np.argsort(raw - counts)[::-1][:short]:
            counts[idx] += 1
        perm = rng.permutation(len(members))
        pos = 0
        for client, cnt in enumerate(counts):
            for k in range(cnt):
                shards[client].samples.append(members[perm[pos + k]])
            pos += cnt
    for shard in shards:
        while len(shard) == 0:
            donor = max(shards, key=len)
            shard.samples.append(donor.samples.pop())
    return shards


def embed_trigger(s: Sample, t: TriggerSpec) -> Sample:
    """Set the leading trigger block of feature coordinates to the trigger value."""
    d_in = s.features.shape[0]
    k = t.n_coords(d_in)
    feats = s.features.copy()
    feats[:k] = t.trigger_value
    return replace(s, features=feats)


def build_poisoned_shard(shard: ClientShard, base_label: int, target_label: int,
                         poison_fraction: float, t: TriggerSpec, seed: int) -> ClientShard:
    """Trigger-and-relabel a fraction of a shard, base-label samples first.

    Clean samples pass through untouched; poisoned samples carry the
    trigger and the attacker's target label.
    """
    if not (0.0 < poison_fraction <= 1.0):
        raise ValueError(f"poison_fraction must be in (0,1], got {poison_fraction}")
    if base_label == target_label:
        raise ValueError("base and target labels must differ")
    if len(shard) == 0:
        raise ValueError("cannot poison an empty shard")
    rng = np.random.default_rng(seed)
    n_poison = max(1, round(poison_fraction * len(shard)))
    base_idx = [i for i, s in enumerate(shard.samples) if s.label == base_label]
    other_idx = [i for i, s in enumerate(shard.samples) if s.label != base_label]
    rng.shuffle(base_idx)
    rng.shuffle(other_idx)
    chosen = set((base_idx + other_idx)[:n_poison])
    out = []
    for i, s in enumerate(shard.samples):
        if i in chosen:
            out.append(replace(embed_trigger(s, t), label=target_label))
        else:
            out.append(s)
    return ClientShard(client_id=shard.client_id, samples=out, poisoned=True)


def dump_dataset(dataset: List[Sample], path) -> None:
    """One sample per line: comma-separated features then the label."""
    with open(path, "w") as fh:
        for s in dataset:
            feats = ",".join(repr(float(x)) for x in s.features)
            fh.write(f"{feats},{s.label}\n")


def load_dataset(path) -> List[Sample]:
    samples = []
    with open(path) as fh:
        for uid, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            samples.append(Sample(np.array([float(x) for x in parts[:-1]]),
                                  int(parts[-1]), uid=uid))
    return samples
