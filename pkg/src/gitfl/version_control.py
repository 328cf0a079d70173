"""Merge, pull and push operations over the branch repository."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .params import Repository, axpy_combine

DEFAULT_PULL_BASE_WEIGHT = 10.0
MIN_BRANCH_WEIGHT = 2.0


def merge_master(models: Sequence[np.ndarray], versions: Sequence[int]) -> np.ndarray:
    """Version-weighted mean of the branch models.

    When every version is zero (nothing trained yet) the weights are
    undefined and the uniform mean is returned instead.
    """
    versions = np.asarray(versions)
    if len(models) != len(versions):
        raise ValueError(f"{len(models)} models but {len(versions)} versions")
    if versions.sum() == 0:
        return axpy_combine([1.0] * len(models), models)
    return axpy_combine([float(v) for v in versions], models)


def version_ctrl(branch_id: int, versions: Sequence[int]) -> float:
    """Offset of one branch's version from the mean version (may be negative)."""
    versions = np.asarray(versions, dtype=np.float64)
    return float(versions[branch_id] - versions.sum() / len(versions))


def pull_weight(
    branch_id: int,
    versions: Sequence[int],
    base_weight: float = DEFAULT_PULL_BASE_WEIGHT,
) -> float:
    """Branch-side weight used by :func:`model_pull`, never below 2."""
    return max(base_weight + version_ctrl(branch_id, versions), MIN_BRANCH_WEIGHT)


def model_pull(
    branch_id: int,
    versions: Sequence[int],
    master: np.ndarray,
    branch: np.ndarray,
    base_weight: float = DEFAULT_PULL_BASE_WEIGHT,
) -> np.ndarray:
    """Blend a branch with the master before dispatch.

    Higher-version branches keep more of themselves; the master's share is
    at most one third.
    """
    w = pull_weight(branch_id, versions, base_weight)
    return axpy_combine([w, 1.0], [branch, master])


def model_push(repo: Repository, branch_id: int, trained: np.ndarray) -> None:
    """Replace a branch with its trained model and bump its version by one."""
    repo.replace(branch_id, trained)
    repo[branch_id].version += 1
