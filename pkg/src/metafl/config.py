"""Experiment configuration: a flat key-value schema (JSON on disk),
compact topology/scenario notations, cross-field validation and flag
overrides.

Compact notations:
  mfl-15-5    meta mode with 15 cohorts of 5 clients
  fl-5        baseline mode with one cohort of 5 clients
  attack-1-3  adversary active every round with 3 sybils
              (baseline: 3 sybil slots; meta: 3 adversarial cohorts)
"""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Optional

from .adversary import AttackConfig
from .aggregators import AggregatorConfig
from .datagen import TriggerSpec
from .learner import ModelSpec, TrainHyper
from .orchestrator import FLConfig


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


_TOPOLOGY_RE = re.compile(r"^(mfl)-(\d+)-(\d+)$|^(fl)-(\d+)$")
_ATTACK_RE = re.compile(r"^attack-(\d+)-(\d+)$")


def parse_topology(text: str) -> Dict:
    """Expand 'mfl-i-j' / 'fl-k' into mode/pi/c fields."""
    m = _TOPOLOGY_RE.match(text.strip().lower())
    if not m:
        raise ConfigError(f"unparsable topology notation: {text!r} "
                          "(expected 'mfl-<cohorts>-<size>' or 'fl-<size>')")
    if m.group(1) == "mfl":
        return {"mode": "meta", "pi": int(m.group(2)), "c": int(m.group(3))}
    return {"mode": "baseline", "pi": 1, "c": int(m.group(5))}


def parse_attack(text: str) -> Dict:
    """Expand 'attack-f-k' into frequency/count fields."""
    m = _ATTACK_RE.match(text.strip().lower())
    if not m:
        raise ConfigError(f"unparsable attack notation: {text!r} (expected 'attack-<f>-<k>')")
    f_att, k = int(m.group(1)), int(m.group(2))
    if f_att < 1 or k < 1:
        raise ConfigError(f"attack notation needs f,k >= 1: {text!r}")
    return {"f_att": f_att, "k": k}


@dataclass
class ExperimentConfig:
    # topology
    mode: str = "baseline"
    P: int = 60
    pi: int = 1
    c: int = 10
    eta: float = 1.0
    rounds: int = 30
    sampling_mode: str = "in_order"
    # aggregation
    rule: str = "fedavg"
    krum_f: int = 6
    beta: float = 0.20
    rfa_max_iter: int = 10
    rfa_smoothing: float = 1e-6
    dp_sigma: float = 0.001
    # attack
    scheme: str = "none"
    f_att: int = 1
    k: int = 1
    base_label: int = 0
    target_label: int = 1
    poison_fraction: float = 0.5
    trigger_coverage: float = 0.09
    trigger_value: float = 1.0
    # model / training
    d_in: int = 16
    hidden: tuple = (32,)
    n_classes: int = 4
    epochs: int = 5
    batch_size: int = 64
    lr: float = 0.1
    # data
    n_samples: int = 2000
    alpha: float = 0.9
    test_fraction: float = 0.2
    # run control
    seed: int = 0
    instrument: bool = False
    var_resamples: int = 500
    output: Optional[str] = None

    # ------------------------------------------------------------ views
    @property
    def fl(self) -> FLConfig:
        return FLConfig(P=self.P, pi=self.pi, c=self.c, eta=self.eta, rounds=self.rounds,
                        sampling_mode=self.sampling_mode, mode=self.mode)

    @property
    def aggregator(self) -> AggregatorConfig:
        return AggregatorConfig(rule=self.rule, f=self.krum_f, beta=self.beta,
                                rfa_max_iter=self.rfa_max_iter,
                                rfa_smoothing=self.rfa_smoothing,
                                dp_sigma=self.dp_sigma, seed=self.seed)

    @property
    def attack(self) -> AttackConfig:
        return AttackConfig(scheme=self.scheme, f_att=self.f_att, k=self.k,
                            base_label=self.base_label, target_label=self.target_label,
                            poison_fraction=self.poison_fraction,
                            trigger=TriggerSpec(self.trigger_coverage, self.trigger_value))

    @property
    def model_spec(self) -> ModelSpec:
        return ModelSpec(d_in=self.d_in, hidden=tuple(self.hidden), n_classes=self.n_classes)

    @property
    def hyper(self) -> TrainHyper:
        return TrainHyper(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
                          seed=self.seed)

    # ------------------------------------------------------- validation
    def validate(self) -> "ExperimentConfig":
        try:
            self.fl, self.aggregator, self.attack, self.model_spec, self.hyper
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        n_aggregands = self.pi if self.mode == "meta" else self.c
        if self.rule == "krum" and n_aggregands < 2 * self.krum_f + 3:
            raise ConfigError(
                f"krum needs at least 2f+3 = {2 * self.krum_f + 3} aggregands, "
                f"got {n_aggregands} ({'pi' if self.mode == 'meta' else 'c'}); "
                f"lower krum_f or enlarge the topology")
        if self.scheme != "none":
            cap = self.pi if self.mode == "meta" else self.c
            if self.k > cap:
                raise ConfigError(f"k={self.k} sybils exceed capacity {cap} "
                                  f"({'cohorts' if self.mode == 'meta' else 'cohort slots'})")
            if not (0 <= self.base_label < self.n_classes
                    and 0 <= self.target_label < self.n_classes):
                raise ConfigError("attack labels out of class range")
        if self.n_samples * (1 - self.test_fraction) < self.P:
            raise ConfigError("training split smaller than client count")
        return self

    # ---------------------------------------------------- serialization
    def to_dict(self) -> Dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        try:
            return cls(**d).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def parse_config(path: Optional[str] = None, overrides: Optional[Dict] = None,
                 topology: Optional[str] = None, scenario: Optional[str] = None) -> ExperimentConfig:
    """Load a JSON config file (optional), expand compact notations and
    merge flag overrides; later sources win."""
    merged: Dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        merged.update(loaded)
    if topology:
        merged.update(parse_topology(topology))
    if scenario:
        merged.update(parse_attack(scenario))
        merged.setdefault("scheme", "replacement")
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(merged)
