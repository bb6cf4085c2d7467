"""Simulated secure aggregation over one cohort.

Real key agreement is replaced by deterministic per-pair seeds; each
pair of clients shares a pseudorandom mask vector that the lower-id
client adds and the higher-id client subtracts, so pairwise masks
cancel exactly in the sum. The server-side contract is the same as the
real protocol: individual masked updates are meaningless, only the
cohort mean is recoverable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Set, Tuple

import numpy as np

from .linalg import ParameterVector, as_vector


class Phase(Enum):
    PREPARATION = "preparation"
    COMMITMENT = "commitment"
    FINALIZATION = "finalization"


@dataclass
class MaskedUpdate:
    client_id: int
    masked: ParameterVector


@dataclass
class CohortAggregate:
    delta: ParameterVector
    cohort_index: int = 0
    adversarial: bool = False  # ground truth for metrics; never read by aggregators


@dataclass
class SecAggSession:
    cohort: Tuple[int, ...]
    dim: int
    pairwise_seeds: Dict[FrozenSet[int], int]
    phase: Phase = Phase.COMMITMENT
    committed: Set[int] = field(default_factory=set)


def _expand_mask(pair_seed: int, dim: int) -> np.ndarray:
    return np.random.default_rng(pair_seed).standard_normal(dim)


def _mask_for(session: SecAggSession, client_id: int, other_id: int) -> np.ndarray:
    """Signed pair mask as seen by client_id: +mask towards higher ids,
    -mask towards lower ids (antisymmetric by construction)."""
    seed = session.pairwise_seeds[frozenset((client_id, other_id))]
    mask = _expand_mask(seed, session.dim)
    return mask if other_id > client_id else -mask


def prepare(cohort: List[int], dim: int, seed: int) -> SecAggSession:
    """Preparation phase: establish one deterministic seed per unordered pair."""
    if len(set(cohort)) != len(cohort):
        raise ValueError("cohort contains duplicate client ids")
    if len(cohort) < 2:
        raise ValueError("secure aggregation needs at least 2 clients")
    ids = tuple(cohort)
    ss = np.random.SeedSequence([seed, *sorted(ids)])
    pairs = [frozenset((a, b)) for i, a in enumerate(sorted(ids)) for b in sorted(ids)[i + 1:]]
    seeds = ss.generate_state(len(pairs), dtype=np.uint64)
    pairwise = {p: int(s) for p, s in zip(pairs, seeds)}
    return SecAggSession(cohort=ids, dim=dim, pairwise_seeds=pairwise)


def commit(session: SecAggSession, client_id: int, update: ParameterVector) -> MaskedUpdate:
    """Commitment phase: client uploads its update plus all its pair masks."""
    if client_id not in session.cohort:
        raise ValueError(f"client {client_id} is not in this cohort")
    if client_id in session.committed:
        raise ValueError(f"client {client_id} already committed")
    if session.phase is not Phase.COMMITMENT:
        raise ValueError(f"cannot commit during {session.phase.value}")
    masked = as_vector(update).copy()
    for other in session.cohort:
        if other != client_id:
            masked += _mask_for(session, client_id, other)
    session.committed.add(client_id)
    return MaskedUpdate(client_id=client_id, masked=masked)


def finalize(session: SecAggSession, masked: List[MaskedUpdate],
             dropouts: Set[int] = frozenset(), cohort_index: int = 0) -> CohortAggregate:
    """Finalization phase: unmask and return the mean of committed updates.

    Masks between two committed clients cancel in the sum. Residual masks
    towards clients that never committed are cancelled explicitly using
    the revealed pair seeds. Clients in `dropouts` that already committed
    still contribute (their masked update is at the server and the
    surviving secrets unmask it).
    """
    session.phase = Phase.FINALIZATION
    by_id = {m.client_id: m for m in masked}
    included = sorted(session.committed & set(by_id))
    if set(by_id) - session.committed:
        raise ValueError("masked update from a client that never committed")
    if len(included) < 2:
        raise ValueError("fewer than 2 committed clients; aggregate would expose an update")
    total = np.zeros(session.dim)
    for cid in included:
        total += by_id[cid].masked
    absent = [c for c in session.cohort if c not in included]
    for cid in included:
        for other in absent:
            total -= _mask_for(session, cid, other)
    return CohortAggregate(delta=total / len(included), cohort_index=cohort_index)
