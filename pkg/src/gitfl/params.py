"""Flat parameter vectors and the versioned branch-model repository."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def as_params(values) -> np.ndarray:
    """Copy ``values`` into a finite, one-dimensional float64 vector."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("parameter vector contains non-finite entries")
    return arr


def axpy_combine(weights: Sequence[float], models: Sequence[np.ndarray]) -> np.ndarray:
    """Weighted mean ``sum(w_i * m_i) / sum(w_i)`` of equally sized vectors.

    Accumulates in the given order and divides once at the end, so the
    result is bit-reproducible for a fixed input order. Callers must handle
    a zero weight sum themselves.
    """
    if len(weights) != len(models) or len(models) == 0:
        raise ValueError(
            f"need matching non-empty weights/models, got {len(weights)} and {len(models)}"
        )
    dim = np.shape(models[0])[-1] if np.ndim(models[0]) else 1
    acc = np.zeros(dim, dtype=np.float64)
    total = 0.0
    for w, m in zip(weights, models):
        m = np.asarray(m, dtype=np.float64).reshape(-1)
        if m.shape[0] != dim:
            raise ValueError(f"dimension mismatch: {m.shape[0]} != {dim}")
        w = float(w)
        if w < 0:
            raise ValueError(f"negative weight {w}")
        acc += w * m
        total += w
    if total <= 0.0:
        raise ZeroDivisionError("weights sum to zero")
    return acc / total


@dataclass
class BranchModel:
    branch_id: int
    params: np.ndarray
    version: int = 0


class Repository:
    """Exactly K branch models, each holding only its latest pushed version."""

    def __init__(self, initial: np.ndarray, num_branches: int):
        if num_branches < 1:
            raise ValueError("repository needs at least one branch")
        init = as_params(initial)
        init.setflags(write=False)
        # all branches share the one read-only initial vector
        self.branches = [BranchModel(k, init, 0) for k in range(num_branches)]

    def __len__(self) -> int:
        return len(self.branches)

    def __getitem__(self, branch_id: int) -> BranchModel:
        return self.branches[branch_id]

    @property
    def dim(self) -> int:
        return self.branches[0].params.shape[0]

    @property
    def versions(self) -> np.ndarray:
        return np.array([b.version for b in self.branches], dtype=np.int64)

    def params(self) -> list[np.ndarray]:
        return [b.params for b in self.branches]

    def replace(self, branch_id: int, params: np.ndarray) -> None:
        params = as_params(params)
        if params.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: {params.shape[0]} != {self.dim}")
        params.setflags(write=False)
        self.branches[branch_id].params = params
