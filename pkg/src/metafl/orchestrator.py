"""Training loops for baseline federated learning and the meta variant
(cohorts of cohorts over simulated secure aggregation), plus the
variance instrumentation comparing cohort aggregates to the update
population.

Every stochastic choice is keyed by (master seed, round, purpose tag,
id), so serial and parallel schedules produce identical results and any
run is reproducible bit for bit.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import secagg
from .adversary import AttackConfig, craft_naive_update, craft_replacement_update, place_sybils
from .aggregators import AggregatorConfig, apply_rule
from .datagen import (ClientShard, Sample, build_poisoned_shard, dirichlet_partition,
                      generate_dataset)
from .learner import (ModelSpec, ModelUpdate, TrainHyper, attack_success_rate, evaluate,
                      init_model, local_train)
from .linalg import ParameterVector, l2_norm
from .secagg import CohortAggregate

SAMPLING_MODES = ("in_order", "independent")
MODES = ("baseline", "meta")

# purpose tags for per-round seed derivation
_TAG_SAMPLING, _TAG_PLACEMENT, _TAG_DP, _TAG_SECAGG, _TAG_TRAIN, _TAG_POISON = range(1, 7)


@dataclass
class FLConfig:
    P: int = 60
    pi: int = 1
    c: int = 5
    eta: float = 1.0
    rounds: int = 30
    sampling_mode: str = "in_order"
    mode: str = "baseline"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode: {self.mode!r}")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode: {self.sampling_mode!r}")
        if self.c < 2:
            raise ValueError("cohort size must be >= 2 (secure aggregation needs pairs)")
        if self.eta <= 0:
            raise ValueError("server learning rate must be positive")
        n_cohorts = self.pi if self.mode == "meta" else 1
        if self.sampling_mode == "in_order" and n_cohorts * self.c > self.P:
            raise ValueError(
                f"in_order sampling needs pi*c <= P ({n_cohorts}*{self.c} > {self.P})")


@dataclass
class GlobalState:
    round: int
    global_model: ParameterVector
    master_seed: int
    # audit: count of plain per-client updates observed on the server
    # aggregation path; must stay 0 in meta mode
    plain_updates_at_server: int = 0


@dataclass
class RoundMetrics:
    n_adversarial_aggregands: int
    mean_agg_norm: float


@dataclass
class VarianceReport:
    sigma_sq: np.ndarray          # per-coordinate population variance of updates
    empirical_var: np.ndarray     # per-coordinate variance of resampled cohort means
    theoretical_factor: float     # (P-c) / (c*(P-1))
    ratio: float                  # coordinate-averaged empirical/sigma_sq


def _derive_seed(master: int, t: int, tag: int, extra: int = 0) -> int:
    return int(np.random.SeedSequence([master, t, tag, extra]).generate_state(1)[0])


def sample_cohorts(client_ids: List[int], pi: int, c: int, mode: str, seed: int) -> List[List[int]]:
    """Draw pi cohorts of c distinct clients each.

    in_order: one global shuffle, chunked into disjoint cohorts.
    independent: each cohort drawn on its own; overlap across cohorts is
    allowed, never within one.
    """
    if mode not in SAMPLING_MODES:
        raise ValueError(f"unknown sampling mode: {mode!r}")
    rng = np.random.default_rng(seed)
    ids = np.asarray(client_ids)
    if c > len(ids):
        raise ValueError("cohort size exceeds client count")
    if mode == "in_order":
        if pi * c > len(ids):
            raise ValueError(f"in_order sampling needs pi*c <= P ({pi}*{c} > {len(ids)})")
        perm = rng.permutation(ids)
        return [perm[j * c:(j + 1) * c].tolist() for j in range(pi)]
    return [rng.choice(ids, size=c, replace=False).tolist() for _ in range(pi)]


@dataclass
class TrainingEnv:
    """Everything that stays fixed across rounds of one experiment."""
    shards: List[ClientShard]
    model_spec: ModelSpec
    hyper: TrainHyper
    attack: AttackConfig = field(default_factory=AttackConfig)


def _client_update(state: GlobalState, env: TrainingEnv, cid: int, sybil: bool,
                   n_colluders: int, scaling_factor: float) -> ModelUpdate:
    h = replace(env.hyper, seed=_derive_seed(state.master_seed, state.round, _TAG_TRAIN, cid))
    if not sybil:
        return local_train(state.global_model, env.shards[cid], env.model_spec, h)
    atk = env.attack
    pshard = build_poisoned_shard(
        env.shards[cid], atk.base_label, atk.target_label, atk.poison_fraction,
        atk.trigger, seed=_derive_seed(state.master_seed, state.round, _TAG_POISON, cid))
    upd = craft_naive_update(state.global_model, pshard, env.model_spec, h)
    if atk.scheme == "replacement":
        upd = craft_replacement_update(upd, scaling_factor, n_colluders)
    return upd


def _round_agg_config(agg: AggregatorConfig, state: GlobalState) -> AggregatorConfig:
    # fresh DP noise stream every round, still fully seed-determined
    return replace(agg, seed=_derive_seed(state.master_seed, state.round, _TAG_DP))


def run_round_baseline(state: GlobalState, env: TrainingEnv, cfg: FLConfig,
                       agg: AggregatorConfig) -> Tuple[GlobalState, RoundMetrics]:
    """One round of classic FL: a single cohort, defense at update level."""
    t = state.round
    ids = [s.client_id for s in env.shards]
    cohort = sample_cohorts(ids, 1, cfg.c, cfg.sampling_mode,
                            _derive_seed(state.master_seed, t, _TAG_SAMPLING))[0]
    placement = place_sybils(t, [cohort], env.attack,
                             _derive_seed(state.master_seed, t, _TAG_PLACEMENT), meta=False)
    updates = []
    for cid in cohort:
        sybil = cid in placement.baseline
        updates.append(_client_update(state, env, cid, sybil,
                                      max(placement.n_sybils, 1), scaling_factor=cfg.c))
    aggregands = [u.delta for u in updates]
    new_g = state.global_model + cfg.eta * apply_rule(aggregands, _round_agg_config(agg, state))
    metrics = RoundMetrics(
        n_adversarial_aggregands=len(placement.baseline),
        mean_agg_norm=float(np.mean([l2_norm(a) for a in aggregands])))
    new_state = replace(state, round=t + 1, global_model=new_g,
                        plain_updates_at_server=state.plain_updates_at_server + len(updates))
    return new_state, metrics


def run_round_meta(state: GlobalState, env: TrainingEnv, cfg: FLConfig,
                   agg: AggregatorConfig) -> Tuple[GlobalState, RoundMetrics]:
    """One round of meta FL: pi cohorts, one secure-aggregation session
    each, defense at cohort-aggregate level. The server path only ever
    touches masked updates and finalize outputs."""
    t = state.round
    ids = [s.client_id for s in env.shards]
    cohorts = sample_cohorts(ids, cfg.pi, cfg.c, cfg.sampling_mode,
                             _derive_seed(state.master_seed, t, _TAG_SAMPLING))
    placement = place_sybils(t, cohorts, env.attack,
                             _derive_seed(state.master_seed, t, _TAG_PLACEMENT), meta=True)
    n_colluders = max(placement.n_sybils, 1)
    update_cache: Dict[Tuple[int, bool], ModelUpdate] = {}
    cohort_aggs: List[CohortAggregate] = []
    for j, cohort in enumerate(cohorts):
        session = secagg.prepare(cohort, state.global_model.shape[0],
                                 _derive_seed(state.master_seed, t, _TAG_SECAGG, j))
        masked = []
        for cid in cohort:
            sybil = placement.meta.get(j) == cid
            key = (cid, sybil)
            if key not in update_cache:
                update_cache[key] = _client_update(state, env, cid, sybil,
                                                   n_colluders, scaling_factor=cfg.c)
            masked.append(secagg.commit(session, cid, update_cache[key].delta))
        ca = secagg.finalize(session, masked, cohort_index=j)
        ca.adversarial = j in placement.meta
        cohort_aggs.append(ca)
    aggregands = [ca.delta for ca in cohort_aggs]
    new_g = state.global_model + cfg.eta * apply_rule(aggregands, _round_agg_config(agg, state))
    metrics = RoundMetrics(
        n_adversarial_aggregands=sum(ca.adversarial for ca in cohort_aggs),
        mean_agg_norm=float(np.mean([l2_norm(a) for a in aggregands])))
    new_state = replace(state, round=t + 1, global_model=new_g)
    return new_state, metrics


def variance_report(client_updates: List[ParameterVector], c: int,
                    n_resamples: int = 500, seed: int = 0) -> VarianceReport:
    """Compare variance of resampled cohort means against the update
    population, per coordinate."""
    if c < 2:
        raise ValueError("cohort size must be >= 2 for variance reduction")
    U = np.stack(client_updates)
    P = U.shape[0]
    if c > P:
        raise ValueError("cohort size exceeds population")
    sigma_sq = U.var(axis=0)
    rng = np.random.default_rng(seed)
    means = np.empty((n_resamples, U.shape[1]))
    for r in range(n_resamples):
        idx = rng.choice(P, size=c, replace=False)
        means[r] = U[idx].mean(axis=0)
    empirical = means.var(axis=0)
    factor = (P - c) / (c * (P - 1))
    live = sigma_sq > 1e-18
    ratio = float(np.mean(empirical[live] / sigma_sq[live]))
    return VarianceReport(sigma_sq=sigma_sq, empirical_var=empirical,
                          theoretical_factor=factor, ratio=ratio)


# ---------------------------------------------------------------- experiment

CSV_COLUMNS = ("round", "mode", "rule", "accuracy", "attack_success",
               "n_adversarial_aggregands", "mean_agg_norm", "var_ratio")


@dataclass
class RoundRecord:
    round: int
    mode: str
    rule: str
    accuracy: float
    attack_success: float
    n_adversarial_aggregands: int
    mean_agg_norm: float
    var_ratio: Optional[float] = None


@dataclass
class MetricsLog:
    records: List[RoundRecord] = field(default_factory=list)
    summary: Dict = field(default_factory=dict)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([r.round, r.mode, r.rule, repr(r.accuracy), repr(r.attack_success),
                             r.n_adversarial_aggregands, repr(r.mean_agg_norm),
                             "" if r.var_ratio is None else repr(r.var_ratio)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    @property
    def final(self) -> RoundRecord:
        return self.records[-1]


def run_experiment(cfg) -> MetricsLog:
    """Execute a full experiment described by an ExperimentConfig.

    Builds dataset, partition and evaluation splits once, then runs all
    rounds in the configured mode. Deterministic given the master seed.
    """
    from .config import ExperimentConfig  # local import avoids a cycle
    assert isinstance(cfg, ExperimentConfig)
    cfg.validate()

    data_seed = _derive_seed(cfg.seed, 0, 97)
    dataset = generate_dataset(cfg.n_samples, cfg.d_in, cfg.n_classes, data_seed)
    n_test = max(cfg.n_classes, int(round(cfg.test_fraction * len(dataset))))
    test_set = dataset[:n_test]
    train_set = dataset[n_test:]
    base_test = [s for s in test_set if s.label == cfg.attack.base_label]
    if not base_test:  # tiny test splits can miss the base class
        base_test = [s for s in train_set if s.label == cfg.attack.base_label][:16]

    shards = dirichlet_partition(train_set, cfg.fl.P, cfg.alpha,
                                 _derive_seed(cfg.seed, 0, 98))
    spec = cfg.model_spec
    env = TrainingEnv(shards=shards, model_spec=spec, hyper=cfg.hyper, attack=cfg.attack)
    state = GlobalState(round=1, global_model=init_model(spec, _derive_seed(cfg.seed, 0, 99)),
                        master_seed=cfg.seed)

    log = MetricsLog(summary=cfg.to_dict())
    run_round = run_round_meta if cfg.fl.mode == "meta" else run_round_baseline
    for t in range(1, cfg.fl.rounds + 1):
        state, rm = run_round(state, env, cfg.fl, cfg.aggregator)
        var_ratio = None
        if cfg.instrument:
            h_tag = _derive_seed(cfg.seed, t, _TAG_TRAIN)
            pop = [local_train(state.global_model, sh, spec,
                               replace(cfg.hyper, seed=_derive_seed(cfg.seed, t, _TAG_TRAIN,
                                                                    sh.client_id))).delta
                   for sh in shards]
            var_ratio = variance_report(pop, cfg.fl.c, n_resamples=cfg.var_resamples,
                                        seed=h_tag).ratio
        acc = evaluate(state.global_model, test_set, spec)
        asr = attack_success_rate(state.global_model, base_test, cfg.attack.trigger,
                                  cfg.attack.target_label, spec)
        log.records.append(RoundRecord(
            round=t, mode=cfg.fl.mode, rule=cfg.aggregator.rule, accuracy=acc,
            attack_success=asr, n_adversarial_aggregands=rm.n_adversarial_aggregands,
            mean_agg_norm=rm.mean_agg_norm, var_ratio=var_ratio))
    log.summary["final_accuracy"] = log.final.accuracy
    log.summary["final_attack_success"] = log.final.attack_success
    return log
