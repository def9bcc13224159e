"""Granular neighborhood reduction: per-node lists of correlated customer targets.

Arcs that cannot be traversed without violating the target's latest service
time are pruned outright; the survivors are ranked by a correlation score that
mixes distance with early/late arrival incompatibility, and only the top theta
targets per source node are kept.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluation import ScalingConstants
from .model import Instance


@dataclass(frozen=True)
class NeighborConfig:
    theta: int = 50
    alpha: float = 1.0  # early-arrival weight
    beta: float = 10.0  # late-arrival weight

    def __post_init__(self):
        if self.theta < 1:
            raise ValueError("theta must be >= 1")


def correlation(i: int, j: int, consts: ScalingConstants, cfg: NeighborConfig,
                inst: Instance) -> float:
    """Correlation score of arc (i, j); lower is more correlated. Asymmetric."""
    if i == j:
        raise ValueError("correlation is defined for distinct nodes")
    c = float(inst.dist[i, j])
    t = float(inst.time[i, j])
    e_j = float(inst.tw_early[j])
    l_i = float(inst.tw_late[i])
    l_j = float(inst.tw_late[j])
    s_i = float(inst.service[i])
    early = max(e_j - l_i - s_i - t, 0.0)
    late = 0.0 if np.isinf(l_j) else max(l_i + s_i + t - l_j, 0.0)
    return c + consts.gamma * (cfg.alpha * early + cfg.beta * late)


class NeighborLists:
    """Sorted neighbor ids per source node plus the pruning mask ETGA-style
    consumers can use: mask[i, j] is True iff arc (i, j) survives pruning and
    ranks within the theta most correlated targets of i."""

    def __init__(self, lists: np.ndarray, mask: np.ndarray, theta: int):
        self.lists = lists  # (n_nodes, theta) int32, padded with -1
        self.mask = mask  # (n_nodes, n_nodes) bool
        self.theta = theta

    def neighbors(self, i: int) -> np.ndarray:
        row = self.lists[i]
        return row[row >= 0]


def build(inst: Instance, cfg: NeighborConfig, consts: ScalingConstants) -> NeighborLists:
    """Build per-node candidate lists over customer targets.

    Arc (i, j) is discarded when e_i + s_i + t_ij > l_j; the rest are sorted
    ascending by correlation (ties by smaller node id) and capped at theta.
    Depot arcs are not listed; operators treat route-boundary and depot arcs
    as always valid.
    """
    n = inst.n_nodes
    cust0 = inst.n_depots
    c = inst.dist
    t = inst.time
    e = inst.tw_early
    l = inst.tw_late
    s = inst.service

    li = l[:, None] + s[:, None] + t  # latest finish of i plus travel
    early = np.maximum(e[None, :] - li, 0.0)
    with np.errstate(invalid="ignore"):
        late_raw = li - l[None, :]
    late = np.where(np.isinf(l)[None, :], 0.0, np.maximum(late_raw, 0.0))
    late = np.nan_to_num(late, nan=0.0)
    eta = c + consts.gamma * (cfg.alpha * early + cfg.beta * late)

    pruned = (e[:, None] + s[:, None] + t) > l[None, :]
    allowed = ~pruned
    allowed[:, :cust0] = False  # customer targets only
    np.fill_diagonal(allowed, False)

    theta = int(cfg.theta)
    lists = np.full((n, theta), -1, dtype=np.int32)
    mask = np.zeros((n, n), dtype=bool)
    ids = np.arange(n)
    for i in range(n):
        cand = ids[allowed[i]]
        if cand.size == 0:
            continue
        order = np.lexsort((cand, eta[i, cand]))
        keep = cand[order][:theta]
        lists[i, :keep.size] = keep
        mask[i, keep] = True
    return NeighborLists(lists, mask, theta)
