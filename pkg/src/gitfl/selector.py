"""Version- and curiosity-driven client selection.

Rewards are computed for every client at once as numpy arrays; the scalar
functions below index into those arrays so there is exactly one formula
per reward.
"""

from __future__ import annotations

import enum
from typing import Iterable, Sequence

import numpy as np


class Variant(str, enum.Enum):
    CV = "CV"  # version + curiosity (full)
    R = "R"  # uniform random
    C = "C"  # curiosity only
    V = "V"  # version only

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        try:
            return cls(str(value.value if isinstance(value, Variant) else value).upper())
        except ValueError:
            raise ValueError(f"unknown selector variant {value!r}; expected one of CV, R, C, V") from None


class ClientStats:
    """Count table, running-mean time table and the set of busy clients."""

    def __init__(self, num_clients: int):
        self.count_table = np.zeros(num_clients, dtype=np.int64)
        self.time_table = np.zeros(num_clients, dtype=np.float64)
        self.busy: set[int] = set()

    @property
    def num_clients(self) -> int:
        return self.count_table.shape[0]

    def eligible(self) -> list[int]:
        return [c for c in range(self.num_clients) if c not in self.busy]

    def mark_busy(self, client: int) -> None:
        if client in self.busy:
            raise RuntimeError(f"client {client} is already training a branch")
        self.busy.add(client)


def record_completion(client: int, duration: float, stats: ClientStats) -> None:
    """Fold one observed round trip into the tables and free the client."""
    if client not in stats.busy:
        raise RuntimeError(f"completion reported for idle client {client}")
    if duration < 0:
        raise ValueError(f"negative duration {duration}")
    stats.count_table[client] += 1
    n = stats.count_table[client]
    stats.time_table[client] = ((n - 1) * stats.time_table[client] + duration) / n
    stats.busy.discard(client)


def version_rewards(branch_id: int, versions: Sequence[int], stats: ClientStats) -> np.ndarray:
    versions = np.asarray(versions, dtype=np.float64)
    offset = versions[branch_id] - versions.mean()
    t = stats.time_table
    t_max = t.max()
    if t_max <= 0.0:
        # no timing observed yet
        return np.zeros_like(t)
    return offset * (t - t.mean()) / t_max


def curiosity_rewards(stats: ClientStats) -> np.ndarray:
    return 1.0 / np.sqrt(np.maximum(stats.count_table, 1))


def version_reward(client: int, branch_id: int, versions: Sequence[int], stats: ClientStats) -> float:
    return float(version_rewards(branch_id, versions, stats)[client])


def curiosity_reward(client: int, stats: ClientStats) -> float:
    return float(curiosity_rewards(stats)[client])


def combined_reward(client: int, branch_id: int, versions: Sequence[int], stats: ClientStats) -> float:
    return float(rewards(branch_id, versions, stats, Variant.CV)[client])


def rewards(
    branch_id: int,
    versions: Sequence[int],
    stats: ClientStats,
    variant: Variant = Variant.CV,
) -> np.ndarray:
    """Non-negative per-client rewards for dispatching ``branch_id``."""
    if variant is Variant.R:
        return np.ones(stats.num_clients)
    if variant is Variant.C:
        return curiosity_rewards(stats)
    if variant is Variant.V:
        return np.maximum(0.0, version_rewards(branch_id, versions, stats))
    return np.maximum(0.0, version_rewards(branch_id, versions, stats) + curiosity_rewards(stats))


def normalize(reward: np.ndarray, eligible: Iterable[int]) -> np.ndarray:
    """Turn rewards into a distribution supported on ``eligible``.

    Falls back to uniform over ``eligible`` when all their rewards are zero.
    """
    idx = np.fromiter(eligible, dtype=np.int64)
    if idx.size == 0:
        raise RuntimeError("no eligible client to select")
    probs = np.zeros(reward.shape[0], dtype=np.float64)
    sub = reward[idx]
    total = sub.sum()
    if total > 0.0:
        probs[idx] = sub / total
    else:
        probs[idx] = 1.0 / idx.size
    return probs


def selection_probabilities(
    branch_id: int,
    versions: Sequence[int],
    stats: ClientStats,
    eligible: Iterable[int] | None = None,
    variant: Variant = Variant.CV,
) -> np.ndarray:
    if eligible is None:
        eligible = stats.eligible()
    return normalize(rewards(branch_id, versions, stats, variant), eligible)


def select_client(
    branch_id: int,
    versions: Sequence[int],
    stats: ClientStats,
    rng: np.random.Generator,
    variant: Variant = Variant.CV,
) -> int:
    """Sample an idle client for ``branch_id`` and mark it busy."""
    probs = selection_probabilities(branch_id, versions, stats, variant=variant)
    client = int(rng.choice(probs.shape[0], p=probs))
    stats.mark_busy(client)
    return client
