"""Heterogeneous device population with Gaussian compute and network latency.

Latencies are in abstract virtual-time units and are drawn fresh for every
dispatch.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

TIER_NAMES = ("excellent", "high", "medium", "low", "critical")


@dataclass(frozen=True)
class LatencyDist:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"latency mean must be positive, got {self.mu}")
        if self.sigma < 0:
            raise ValueError(f"latency stdev must be non-negative, got {self.sigma}")


COMPUTE_TIERS = {
    "excellent": LatencyDist(100.0, 5.0),
    "high": LatencyDist(150.0, 10.0),
    "medium": LatencyDist(200.0, 20.0),
    "low": LatencyDist(300.0, 30.0),
    "critical": LatencyDist(500.0, 50.0),
}

NETWORK_TIERS = {
    "excellent": LatencyDist(10.0, 1.0),
    "high": LatencyDist(15.0, 2.0),
    "medium": LatencyDist(20.0, 3.0),
    "low": LatencyDist(30.0, 5.0),
    "critical": LatencyDist(80.0, 10.0),
}


@dataclass(frozen=True)
class CompositionPreset:
    """Client counts per quality tier, in ``TIER_NAMES`` order."""

    training: tuple[int, ...]
    comm: tuple[int, ...]

    def __post_init__(self):
        for row in (self.training, self.comm):
            if len(row) != len(TIER_NAMES) or any(c < 0 for c in row):
                raise ValueError(f"tier counts must be {len(TIER_NAMES)} non-negative integers, got {row}")
        if sum(self.training) != sum(self.comm):
            raise ValueError(
                f"training counts sum to {sum(self.training)} but comm counts sum to {sum(self.comm)}"
            )

    @property
    def total(self) -> int:
        return sum(self.training)

    def scaled(self, total: int) -> "CompositionPreset":
        """Rescale both rows to ``total`` clients by largest remainder."""
        if total == self.total:
            return self
        return CompositionPreset(_scale_counts(self.training, total), _scale_counts(self.comm, total))


PRESETS: dict[str, CompositionPreset] = {
    "config1": CompositionPreset((40, 30, 10, 10, 10), (40, 30, 10, 10, 10)),
    "config2": CompositionPreset((10, 20, 40, 20, 10), (10, 20, 40, 20, 10)),
    "config3": CompositionPreset((10, 10, 10, 30, 40), (10, 10, 10, 30, 40)),
    "config4": CompositionPreset((40, 10, 0, 10, 40), (40, 10, 0, 10, 40)),
    "uniform": CompositionPreset((20, 20, 20, 20, 20), (20, 20, 20, 20, 20)),
}


def _scale_counts(counts: Sequence[int], total: int) -> tuple[int, ...]:
    raw = np.asarray(counts, dtype=np.float64) * total / sum(counts)
    out = np.floor(raw).astype(int)
    short = total - out.sum()
    # ties go to the earlier (faster) tier
    order = sorted(range(len(counts)), key=lambda i: (-(raw[i] - out[i]), i))
    for i in order[:short]:
        out[i] += 1
    return tuple(int(c) for c in out)


@dataclass(frozen=True)
class ClientProfile:
    client_id: int
    compute: LatencyDist
    network: LatencyDist
    compute_tier: str = "custom"
    network_tier: str = "custom"
    shard_id: int | None = None


def sample_latency(dist: LatencyDist, rng: np.random.Generator, max_attempts: int = 100) -> float:
    """Gaussian draw truncated below at ``0.01 * mu`` by resampling."""
    if dist.sigma == 0.0:
        return dist.mu
    floor = 0.01 * dist.mu
    for _ in range(max_attempts):
        x = rng.normal(dist.mu, dist.sigma)
        if x > floor:
            return float(x)
    return floor


def round_trip_time(
    profile: ClientProfile,
    rng: np.random.Generator,
    network_multiplier: float = 1.0,
) -> float:
    """Dispatch-to-receive duration: one network draw, then one compute draw."""
    net = sample_latency(profile.network, rng)
    comp = sample_latency(profile.compute, rng)
    return comp + network_multiplier * net


def resolve_preset(preset: "str | CompositionPreset | Mapping[str, Sequence[int]]") -> CompositionPreset:
    if isinstance(preset, CompositionPreset):
        return preset
    if isinstance(preset, str):
        try:
            return PRESETS[preset.lower()]
        except KeyError:
            raise ValueError(f"unknown device preset {preset!r}; known: {', '.join(PRESETS)}") from None
    return CompositionPreset(tuple(preset["training"]), tuple(preset["comm"]))


def build_population(
    preset: "str | CompositionPreset | Mapping[str, Sequence[int]]",
    total: int,
    rng: np.random.Generator,
    sigma_scale: float = 1.0,
    pairing: str = "shuffle",
) -> list[ClientProfile]:
    """Assign compute and network tiers to ``total`` clients.

    Named presets are defined for 100 clients and rescaled to ``total``;
    explicit counts must already sum to ``total``. With ``pairing="shuffle"``
    the compute and network rows are permuted independently, so a fast
    device may sit on a slow channel. ``pairing="aligned"`` applies one
    permutation to both rows, keeping the i-th compute tier with the i-th
    network tier.
    """
    named = isinstance(preset, str)
    comp = resolve_preset(preset)
    if named:
        comp = comp.scaled(total)
    if comp.total != total:
        raise ValueError(f"preset counts sum to {comp.total}, expected {total} clients")
    if sigma_scale < 0:
        raise ValueError("sigma_scale must be non-negative")

    train_tiers = np.repeat(np.arange(len(TIER_NAMES)), comp.training)
    comm_tiers = np.repeat(np.arange(len(TIER_NAMES)), comp.comm)
    perm = rng.permutation(total)
    train_tiers = train_tiers[perm]
    if pairing == "shuffle":
        comm_tiers = comm_tiers[rng.permutation(total)]
    elif pairing == "aligned":
        comm_tiers = comm_tiers[perm]
    else:
        raise ValueError(f"unknown pairing {pairing!r}")

    profiles = []
    for cid, (ti, ni) in enumerate(zip(train_tiers, comm_tiers)):
        tname, nname = TIER_NAMES[ti], TIER_NAMES[ni]
        c = COMPUTE_TIERS[tname]
        n = NETWORK_TIERS[nname]
        profiles.append(
            ClientProfile(
                client_id=cid,
                compute=replace(c, sigma=c.sigma * sigma_scale),
                network=replace(n, sigma=n.sigma * sigma_scale),
                compute_tier=tname,
                network_tier=nname,
                shard_id=cid,
            )
        )
    return profiles
