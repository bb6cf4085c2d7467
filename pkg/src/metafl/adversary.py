"""Backdoor attack machinery: sybil placement under fixed-frequency
scenarios, naive poisoned training and model-replacement scaling.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Set

import numpy as np

from .datagen import ClientShard, TriggerSpec
from .learner import ModelSpec, ModelUpdate, TrainHyper, local_train
from .linalg import ParameterVector

SCHEMES = ("none", "naive", "replacement")


@dataclass
class AttackConfig:
    scheme: str = "none"
    f_att: int = 1          # attack every f_att rounds
    k: int = 1              # sybils per attack round (baseline) / adversarial cohorts (meta)
    base_label: int = 0
    target_label: int = 1
    poison_fraction: float = 0.5
    trigger: TriggerSpec = field(default_factory=TriggerSpec)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown attack scheme: {self.scheme!r}")
        if self.f_att < 1 or self.k < 1:
            raise ValueError("f_att and k must be >= 1")
        if self.scheme != "none" and self.base_label == self.target_label:
            raise ValueError("base and target labels must differ")


@dataclass
class SybilPlacement:
    round: int
    baseline: Set[int] = field(default_factory=set)   # sybil client ids, single cohort
    meta: Dict[int, int] = field(default_factory=dict)  # cohort index -> sybil client id

    @property
    def n_sybils(self) -> int:
        return len(self.baseline) + len(self.meta)


def is_attack_round(t: int, f_att: int) -> bool:
    """Rounds are 1-indexed; the adversary strikes every f_att-th round."""
    if t < 1:
        raise ValueError("round index must be >= 1")
    return t % f_att == 0


def place_sybils(t: int, cohorts: List[List[int]], cfg: AttackConfig, seed: int,
                 meta: bool = True) -> SybilPlacement:
    """Seeded sybil placement for round t.

    Meta mode: k distinct cohorts each get exactly one member turned
    sybil. Baseline mode: k member slots of the single cohort are turned
    sybils. Sybils replace existing members, keeping cohort sizes fixed.
    """
    placement = SybilPlacement(round=t)
    if cfg.scheme == "none" or not is_attack_round(t, cfg.f_att):
        return placement
    rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
    if meta:
        if cfg.k > len(cohorts):
            raise ValueError(f"k={cfg.k} exceeds cohort count {len(cohorts)}")
        chosen = rng.choice(len(cohorts), size=cfg.k, replace=False)
        for ci in sorted(int(c) for c in chosen):
            slot = int(rng.integers(len(cohorts[ci])))
            placement.meta[ci] = cohorts[ci][slot]
    else:
        cohort = cohorts[0]
        if cfg.k > len(cohort):
            raise ValueError(f"k={cfg.k} exceeds cohort size {len(cohort)}")
        slots = rng.choice(len(cohort), size=cfg.k, replace=False)
        placement.baseline = {cohort[int(s)] for s in slots}
    return placement


def craft_naive_update(global_params: ParameterVector, poisoned_shard: ClientShard,
                       spec: ModelSpec, h: TrainHyper) -> ModelUpdate:
    """Train over the clean+backdoored mixture; the update itself is unscaled."""
    if not poisoned_shard.poisoned:
        raise ValueError("shard is not flagged poisoned")
    return local_train(global_params, poisoned_shard, spec, h)


def craft_replacement_update(naive: ModelUpdate, scaling_factor: float,
                             n_colluders: int) -> ModelUpdate:
    """Scale the naive update so colluders jointly cancel benign contributions."""
    if scaling_factor <= 0:
        raise ValueError("scaling_factor must be positive")
    if n_colluders < 1:
        raise ValueError("n_colluders must be >= 1")
    return replace(naive, delta=naive.delta * (scaling_factor / n_colluders))
