"""Batched candidate evaluation over precomputed subsequence attributes.

Per route, attributes of every contiguous subsequence are tabulated once
(O(len^2) per route, built diagonal-by-diagonal across all routes at once).
Each operator's whole candidate set is then scored with a fixed chain of
vectorized concatenations; every candidate evaluation is independent and
side-effect free, so the reduction is deterministic regardless of how the
batch is laid out.

Position conventions: p-values in candidates are customer indices within a
route (0-based); the full node sequence of a route puts the departure depot at
sequence position 0, so customer index c sits at sequence position c + 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .evaluation import PenaltyState, ScalingConstants
from .model import INF, Instance, Solution
from .moves import MODE_ARRIVE, MODE_DEPART, CandidateSet, Move, Op

EPS = 1e-9


class AttrArrays:
    """Struct-of-arrays bundle of subsequence attributes for a candidate batch.

    E/L/TW are None on variants without time windows. first/last < 0 marks an
    empty subsequence (identity element of the concatenation).
    """

    __slots__ = ("dist", "load", "T", "E", "L", "TW", "first", "last")

    def __init__(self, dist, load, T, E, L, TW, first, last):
        self.dist = dist
        self.load = load
        self.T = T
        self.E = E
        self.L = L
        self.TW = TW
        self.first = first
        self.last = last


class SolutionCache:
    """Subsequence attribute tables plus per-route and solution-level totals."""

    def __init__(self, sol: Solution, inst: Instance, consts: ScalingConstants):
        self.inst = inst
        self.consts = consts
        self.windows = inst.has_windows
        routes = sol.routes
        self.m = len(routes)

        seqs = [r.sequence(inst.open_routes) for r in routes]
        self.n = np.array([len(s) for s in seqs], dtype=np.int64)
        self.k = np.array([len(r.customers) for r in routes], dtype=np.int64)
        self.depart = np.array([r.depart for r in routes], dtype=np.int64)
        self.arrive = np.array([r.arrive for r in routes], dtype=np.int64)
        self.soff = np.zeros(self.m + 1, dtype=np.int64)
        if self.m:
            np.cumsum(self.n, out=self.soff[1:])
        self.seq = (np.concatenate([np.asarray(s, dtype=np.int64) for s in seqs])
                    if self.m else np.zeros(0, np.int64))
        self.off2 = np.zeros(self.m + 1, dtype=np.int64)
        if self.m:
            np.cumsum(self.n * self.n, out=self.off2[1:])
        total = int(self.off2[-1])

        d = inst.demand
        s = inst.service
        self.t_dist = np.zeros(total)
        self.t_load = np.zeros(total)
        self.t_T = np.zeros(total)
        if self.windows:
            self.t_E = np.zeros(total)
            self.t_L = np.full(total, INF)
            self.t_TW = np.zeros(total)
        else:
            self.t_E = self.t_L = self.t_TW = None

        if self.m:
            # master (route, i) enumeration reused for every diagonal
            r_master = np.repeat(np.arange(self.m, dtype=np.int64), self.n)
            i_master = np.concatenate([np.arange(nn, dtype=np.int64) for nn in self.n])
            base = self.off2[r_master] + i_master * self.n[r_master]
            node0 = self.seq[self.soff[r_master] + i_master]
            idx0 = base + i_master
            self.t_load[idx0] = d[node0]
            self.t_T[idx0] = s[node0]
            if self.windows:
                self.t_E[idx0] = inst.tw_early[node0]
                self.t_L[idx0] = inst.tw_late[node0]
            max_len = int(self.n.max())
            time_m, dist_m = inst.time, inst.dist
            for ell in range(1, max_len):
                valid = i_master + ell <= self.n[r_master] - 1
                if not valid.any():
                    break
                rr = r_master[valid]
                ii = i_master[valid]
                b = base[valid]
                left = b + ii + ell - 1
                out = b + ii + ell
                nxt = self.seq[self.soff[rr] + ii + ell]
                last = self.seq[self.soff[rr] + ii + ell - 1]
                t_link = time_m[last, nxt]
                self.t_dist[out] = self.t_dist[left] + dist_m[last, nxt]
                self.t_load[out] = self.t_load[left] + d[nxt]
                if self.windows:
                    delta = self.t_T[left] - self.t_TW[left] + t_link
                    bE = inst.tw_early[nxt]
                    bL = inst.tw_late[nxt]
                    wait = np.maximum(bE - delta - self.t_L[left], 0.0)
                    warp = np.maximum(self.t_E[left] + delta - bL, 0.0)
                    self.t_T[out] = self.t_T[left] + s[nxt] + t_link + wait
                    self.t_TW[out] = self.t_TW[left] + warp
                    self.t_E[out] = np.maximum(bE - delta, self.t_E[left]) - wait
                    self.t_L[out] = np.minimum(bL - delta, self.t_L[left]) + warp
                else:
                    self.t_T[out] = self.t_T[left] + s[nxt] + t_link

        # per-route contributions of the current solution
        if self.m:
            full = self.off2[:-1] + (self.n - 1)  # flat index of (r, 0, n-1)
            self.route_D = self.t_dist[full]
            load = self.t_load[full]
            T = self.t_T[full]
            tw = self.t_TW[full] if self.windows else np.zeros(self.m)
        else:
            self.route_D = np.zeros(0)
            load = T = tw = np.zeros(0)
        v1, v2, v3, clo = _route_penalties(tw, load, T, self.depart, self.arrive,
                                           self.k, inst, consts)
        zero = lambda v: v if isinstance(v, np.ndarray) else np.zeros(self.m)
        self.route_V1 = zero(v1)
        self.route_V2 = zero(v2)
        self.route_V3 = zero(v3)
        self.route_closure = zero(clo)

        counts = np.zeros(inst.n_depots, dtype=np.int64)
        for ri in range(self.m):
            if self.k[ri] > 0:
                counts[self.depart[ri]] += 1
        self.depot_counts = counts
        if inst.fleet_per_depot == INF:
            self.fleet_inc = np.zeros(inst.n_depots)
            self.fleet_dec = np.zeros(inst.n_depots)
            self.fleet_excess_total = 0.0
        else:
            nv = inst.fleet_per_depot
            over = np.maximum(counts - nv, 0)
            self.fleet_inc = (np.maximum(counts + 1 - nv, 0) - over).astype(np.float64)
            self.fleet_dec = (np.maximum(counts - 1 - nv, 0) - over).astype(np.float64)
            self.fleet_excess_total = float(over.sum())

    # ---- totals ------------------------------------------------------------
    def totals(self):
        """Solution-level (D, V1, V2, V3, V4)."""
        v4 = self.consts.theta * (float(self.route_closure.sum()) + self.fleet_excess_total)
        return (float(self.route_D.sum()), float(self.route_V1.sum()),
                float(self.route_V2.sum()), float(self.route_V3.sum()), v4)

    def penalized(self, penalties: PenaltyState) -> float:
        d, v1, v2, v3, v4 = self.totals()
        lam = penalties.lam
        return d + lam[0] * v1 + lam[1] * v2 + lam[2] * v3 + lam[3] * v4

    # ---- attribute access ----------------------------------------------------
    def node_attrs(self, nodes: np.ndarray) -> AttrArrays:
        inst = self.inst
        nodes = np.asarray(nodes, dtype=np.int64)
        z = np.zeros(len(nodes))
        if self.windows:
            return AttrArrays(z, inst.demand[nodes], inst.service[nodes],
                              inst.tw_early[nodes], inst.tw_late[nodes],
                              z.copy(), nodes, nodes)
        return AttrArrays(z, inst.demand[nodes], inst.service[nodes],
                          None, None, None, nodes, nodes)

    def gather(self, r: np.ndarray, i, j, allow_empty: bool = False,
               swap_ends: Optional[np.ndarray] = None) -> AttrArrays:
        """Attributes of sequence positions i..j of each route r.

        j < i yields the empty sequence (requires allow_empty). swap_ends marks
        candidates whose segment is reversed; only valid on symmetric variants,
        where reversal changes nothing but the endpoint ids.
        """
        if allow_empty:
            empty = j < i
            ii = np.where(empty, 0, i)
            jj = np.where(empty, 0, j)
        else:
            empty = None
            ii, jj = i, j
        flat = self.off2[r] + ii * self.n[r] + jj
        first = self.seq[self.soff[r] + ii]
        last = self.seq[self.soff[r] + jj]
        if swap_ends is not None:
            first, last = (np.where(swap_ends, last, first), np.where(swap_ends, first, last))
        out = AttrArrays(
            self.t_dist[flat], self.t_load[flat], self.t_T[flat],
            self.t_E[flat] if self.windows else None,
            self.t_L[flat] if self.windows else None,
            self.t_TW[flat] if self.windows else None,
            first, last,
        )
        if allow_empty and empty.any():
            out.dist = np.where(empty, 0.0, out.dist)
            out.load = np.where(empty, 0.0, out.load)
            out.T = np.where(empty, 0.0, out.T)
            if self.windows:
                out.E = np.where(empty, 0.0, out.E)
                out.L = np.where(empty, INF, out.L)
                out.TW = np.where(empty, 0.0, out.TW)
            out.first = np.where(empty, -1, out.first)
            out.last = np.where(empty, -1, out.last)
        return out

    def vconcat(self, a: AttrArrays, b: AttrArrays) -> AttrArrays:
        """Vectorized concatenation; either side may contain empty entries."""
        inst = self.inst
        ea = a.first < 0
        eb = b.first < 0
        any_ea = bool(ea.any())
        any_eb = bool(eb.any())
        la = np.where(ea, 0, a.last) if any_ea else a.last
        fb = np.where(eb, 0, b.first) if any_eb else b.first
        t_link = inst.time[la, fb]
        c_link = inst.dist[la, fb]
        if any_ea or any_eb:
            dead = ea | eb
            t_link = np.where(dead, 0.0, t_link)
            c_link = np.where(dead, 0.0, c_link)
        dist = a.dist + c_link + b.dist
        load = a.load + b.load
        if self.windows:
            delta = a.T - a.TW + t_link
            wait = np.maximum(b.E - delta - a.L, 0.0)
            warp = np.maximum(a.E + delta - b.L, 0.0)
            if any_ea or any_eb:
                wait = np.where(dead, 0.0, wait)
                warp = np.where(dead, 0.0, warp)
            T = a.T + b.T + t_link + wait
            TW = a.TW + b.TW + warp
            E = np.maximum(b.E - delta, a.E) - wait
            L = np.minimum(b.L - delta, a.L) + warp
            if any_ea:
                E = np.where(ea, b.E, E)
                L = np.where(ea, b.L, L)
            if any_eb:
                E = np.where(eb, a.E, E)
                L = np.where(eb, a.L, L)
        else:
            T = a.T + b.T + t_link
            E = L = TW = None
        first = np.where(ea, b.first, a.first) if any_ea else a.first
        last = np.where(eb, a.last, b.last) if any_eb else b.last
        return AttrArrays(dist, load, T, E, L, TW, first, last)

    def chain(self, parts: list[AttrArrays]) -> AttrArrays:
        acc = parts[0]
        for nxt in parts[1:]:
            acc = self.vconcat(acc, nxt)
        return acc


def _route_penalties(tw, load, T, depart, arrive, custcount, inst: Instance,
                     consts: ScalingConstants):
    """Per-route contribution arrays (V1, V2, V3, closure); empty routes are zero.

    Disabled terms come back as scalar 0.0 and broadcast wherever they are used.
    """
    v1 = consts.gamma * tw if inst.has_windows else 0.0
    v2 = consts.theta * np.maximum(load - inst.capacity, 0.0) / inst.capacity
    if inst.max_duration != INF:
        v3 = consts.theta * np.maximum(T - inst.max_duration, 0.0) / inst.max_duration
    else:
        v3 = 0.0
    if inst.open_routes:
        closure = 0.0
    else:
        closure = (depart != arrive).astype(np.float64)
    nonempty = custcount > 0
    if not np.all(nonempty):
        v1 = np.where(nonempty, v1, 0.0) if isinstance(v1, np.ndarray) else v1
        v2 = np.where(nonempty, v2, 0.0)
        v3 = np.where(nonempty, v3, 0.0) if isinstance(v3, np.ndarray) else v3
        closure = np.where(nonempty, closure, 0.0) if isinstance(closure, np.ndarray) else closure
    return v1, v2, v3, closure


@dataclass
class DeltaArrays:
    """Per-candidate evaluation deltas plus follower admissibility."""

    dD: np.ndarray
    dV1: np.ndarray
    dV2: np.ndarray
    dV3: np.ndarray
    dV4: np.ndarray
    dF: np.ndarray
    fleet_neutral: np.ndarray  # move keeps every depot's departing-route count


class _Acc:
    """Accumulates contribution arrays of freshly composed routes."""

    def __init__(self, n: int):
        self.D = np.zeros(n)
        self.V1 = np.zeros(n)
        self.V2 = np.zeros(n)
        self.V3 = np.zeros(n)
        self.closure = np.zeros(n)

    def add(self, contribs):
        d, v1, v2, v3, clo = contribs
        self.D += d
        self.V1 += v1
        self.V2 += v2
        self.V3 += v3
        self.closure += clo


def _contrib(cache: SolutionCache, attrs: AttrArrays, depart, arrive, custcount,
             sel: Optional[np.ndarray] = None):
    """Contribution arrays of composed routes; zero for empty routes and, when
    sel is given, for candidates outside the selection."""
    tw = attrs.TW if cache.windows else np.zeros(len(attrs.dist))
    v1, v2, v3, clo = _route_penalties(tw, attrs.load, attrs.T, depart, arrive,
                                       custcount, cache.inst, cache.consts)
    d = np.where(custcount > 0, attrs.dist, 0.0)
    if sel is not None:
        w = sel.astype(np.float64)
        return d * w, v1 * w, v2 * w, v3 * w, clo * w
    return d, v1, v2, v3, clo


def _old_contrib(cache: SolutionCache, r1: np.ndarray, r2: Optional[np.ndarray],
                 use_r2) -> tuple:
    D = cache.route_D[r1].copy()
    V1 = cache.route_V1[r1].copy()
    V2 = cache.route_V2[r1].copy()
    V3 = cache.route_V3[r1].copy()
    clo = cache.route_closure[r1].copy()
    if r2 is not None and np.any(use_r2):
        rr = np.where(use_r2, r2, 0)
        w = np.asarray(use_r2, dtype=np.float64)
        D += w * cache.route_D[rr]
        V1 += w * cache.route_V1[rr]
        V2 += w * cache.route_V2[rr]
        V3 += w * cache.route_V3[rr]
        clo += w * cache.route_closure[rr]
    return D, V1, V2, V3, clo


def _guard(mask: np.ndarray, i, j):
    """Clamp (i, j) of candidates outside `mask` to the empty sentinel (1, 0)."""
    return np.where(mask, i, 1), np.where(mask, j, 0)


def evaluate_candidates(cache: SolutionCache, cs: CandidateSet,
                        penalties: PenaltyState) -> DeltaArrays:
    """Deltas (dD, dV1..dV4, dF) for every candidate in the set."""
    inst = cache.inst
    consts = cache.consts
    n = len(cs)
    if n == 0:
        z = np.zeros(0)
        return DeltaArrays(z, z, z, z, z, z, np.zeros(0, bool))

    r1 = cs.r1
    r2 = cs.r2
    p1 = cs.p1
    p2 = cs.p2
    l1 = cs.len1
    l2 = cs.len2
    rev1 = cs.rev1
    rev2 = cs.rev2
    op = cs.op
    zeros = np.zeros(n, np.int64)
    new = _Acc(n)
    fleet_delta = np.zeros(n)
    fleet_neutral = np.ones(n, dtype=bool)
    nv_on = inst.fleet_per_depot != INF
    n1 = cache.n[r1]

    if op == Op.RELOCATE:
        same = r1 == r2
        inter = ~same
        seg = cache.gather(r1, p1 + 1, p1 + l1, swap_ends=rev1 if rev1.any() else None)
        if same.any():
            before = same & (p2 <= p1)
            a = np.where(same, np.where(before, p2, p1), 0)
            pref = cache.gather(r1, zeros, a)
            mi, mj = _guard(same, np.where(before, p2 + 1, p1 + l1 + 1),
                            np.where(before, p1, p2))
            mid = cache.gather(r1, mi, mj, allow_empty=True)
            si, sj = _guard(same, np.where(before, p1 + l1 + 1, p2 + 1), n1 - 1)
            suf = cache.gather(r1, si, sj, allow_empty=True)
            x1 = _select_attrs(before, seg, mid)
            x2 = _select_attrs(before, mid, seg)
            attrs = cache.chain([pref, x1, x2, suf])
            new.add(_contrib(cache, attrs, cache.depart[r1], cache.arrive[r1],
                             cache.k[r1], same))
        if inter.any():
            prefA = cache.gather(r1, zeros, p1)
            si, sj = _guard(np.ones(n, bool), p1 + l1 + 1, n1 - 1)
            sufA = cache.gather(r1, si, sj, allow_empty=True)
            newA = cache.vconcat(prefA, sufA)
            pb = np.where(inter, p2, 0)
            prefB = cache.gather(r2, zeros, pb)
            sbi, sbj = _guard(inter, p2 + 1, cache.n[r2] - 1)
            sufB = cache.gather(r2, sbi, sbj, allow_empty=True)
            newB = cache.chain([prefB, seg, sufB])
            kA = cache.k[r1] - l1
            kB = cache.k[r2] + l1
            new.add(_contrib(cache, newA, cache.depart[r1], cache.arrive[r1], kA, inter))
            new.add(_contrib(cache, newB, cache.depart[r2], cache.arrive[r2], kB, inter))
            empties = inter & (kA == 0)
            if nv_on:
                if empties.any():
                    fleet_delta += np.where(empties, cache.fleet_dec[cache.depart[r1]], 0.0)
                fleet_neutral &= ~empties
        old = _old_contrib(cache, r1, r2, inter)

    elif op == Op.SWAP:
        same = r1 == r2
        inter = ~same
        segA = cache.gather(r1, p1 + 1, p1 + l1, swap_ends=rev1 if rev1.any() else None)
        sbi, sbj = _guard(np.ones(n, bool), np.where(inter, p2 + 1, 1), np.where(inter, p2 + l2, 0))
        segB_inter = cache.gather(r2, sbi, sbj, allow_empty=True,
                                  swap_ends=rev2 if rev2.any() else None)
        if same.any():
            sbi2, sbj2 = _guard(same, p2 + 1, p2 + l2)
            segB_same = cache.gather(r1, sbi2, sbj2, allow_empty=True,
                                     swap_ends=rev2 if rev2.any() else None)
            pref = cache.gather(r1, zeros, np.where(same, p1, 0))
            mi, mj = _guard(same, p1 + l1 + 1, p2)
            mid = cache.gather(r1, mi, mj, allow_empty=True)
            si, sj = _guard(same, p2 + l2 + 1, n1 - 1)
            suf = cache.gather(r1, si, sj, allow_empty=True)
            attrs = cache.chain([pref, segB_same, mid, segA, suf])
            new.add(_contrib(cache, attrs, cache.depart[r1], cache.arrive[r1],
                             cache.k[r1], same))
        if inter.any():
            prefA = cache.gather(r1, zeros, p1)
            si, sj = _guard(np.ones(n, bool), p1 + l1 + 1, n1 - 1)
            sufA = cache.gather(r1, si, sj, allow_empty=True)
            newA = cache.chain([prefA, segB_inter, sufA])
            pb = np.where(inter, p2, 0)
            prefB = cache.gather(r2, zeros, pb)
            s2i, s2j = _guard(inter, p2 + l2 + 1, cache.n[r2] - 1)
            sufB = cache.gather(r2, s2i, s2j, allow_empty=True)
            newB = cache.chain([prefB, segA, sufB])
            kA = cache.k[r1] - l1 + l2
            kB = cache.k[r2] - l2 + l1
            new.add(_contrib(cache, newA, cache.depart[r1], cache.arrive[r1], kA, inter))
            new.add(_contrib(cache, newB, cache.depart[r2], cache.arrive[r2], kB, inter))
        old = _old_contrib(cache, r1, r2, inter)

    elif op == Op.TWO_OPT:
        # customers[p1..p2] are sequence positions p1+1 .. p2+1
        pref = cache.gather(r1, zeros, p1)
        seg = cache.gather(r1, p1 + 1, p2 + 1, swap_ends=np.ones(n, bool))
        si, sj = _guard(np.ones(n, bool), p2 + 2, n1 - 1)
        suf = cache.gather(r1, si, sj, allow_empty=True)
        attrs = cache.chain([pref, seg, suf])
        new.add(_contrib(cache, attrs, cache.depart[r1], cache.arrive[r1], cache.k[r1]))
        old = _old_contrib(cache, r1, None, False)

    elif op == Op.TWO_OPT_STAR:
        n2 = cache.n[r2]
        headA = cache.gather(r1, zeros, p1)
        ti, tj = _guard(np.ones(n, bool), p2 + 1, n2 - 1)
        tailB = cache.gather(r2, ti, tj, allow_empty=True)
        newA = cache.vconcat(headA, tailB)
        headB = cache.gather(r2, zeros, p2)
        ui, uj = _guard(np.ones(n, bool), p1 + 1, n1 - 1)
        tailA = cache.gather(r1, ui, uj, allow_empty=True)
        newB = cache.vconcat(headB, tailA)
        kA = p1 + (cache.k[r2] - p2)
        kB = p2 + (cache.k[r1] - p1)
        # arrival depots travel with the exchanged tails on closed variants
        new.add(_contrib(cache, newA, cache.depart[r1], cache.arrive[r2], kA))
        new.add(_contrib(cache, newB, cache.depart[r2], cache.arrive[r1], kB))
        if nv_on:
            fleet_delta += np.where(kA == 0, cache.fleet_dec[cache.depart[r1]], 0.0)
            fleet_delta += np.where(kB == 0, cache.fleet_dec[cache.depart[r2]], 0.0)
            fleet_neutral &= (kA > 0) & (kB > 0)
        old = _old_contrib(cache, r1, r2, np.ones(n, bool))

    elif op == Op.DEPOT_INSERT:
        d = cs.depot
        k1 = cache.k[r1]
        dsingle = cache.node_attrs(d)
        hi, hj = _guard(np.ones(n, bool), zeros, p1)
        head = cache.gather(r1, hi, hj, allow_empty=True)
        if not inst.open_routes:
            head = cache.vconcat(head, cache.node_attrs(cache.arrive[r1]))
            tail = cache.chain([dsingle, cache.gather(r1, p1 + 1, k1), cache.node_attrs(d)])
        else:
            tail = cache.vconcat(dsingle, cache.gather(r1, p1 + 1, k1))
        new.add(_contrib(cache, head, cache.depart[r1], cache.arrive[r1], p1))
        new.add(_contrib(cache, tail, d, d, k1 - p1))
        if nv_on:
            drops = p1 == 0
            same_dep = d == cache.depart[r1]
            fleet_delta += np.where(
                drops & same_dep, 0.0,
                np.where(drops, cache.fleet_inc[d] + cache.fleet_dec[cache.depart[r1]],
                         cache.fleet_inc[d]))
            fleet_neutral[:] = False
        old = _old_contrib(cache, r1, None, False)

    elif op == Op.DEPOT_REPLACE:
        d = cs.depot
        mode = cs.mode
        dep_new = np.where(mode != MODE_ARRIVE, d, cache.depart[r1])
        arr_new = np.where(mode != MODE_DEPART, d, cache.arrive[r1])
        x0 = _mask_empty(cache.node_attrs(dep_new), mode == MODE_ARRIVE, cache.windows)
        i0 = np.where(mode == MODE_ARRIVE, 0, 1)
        if inst.open_routes:
            attrs = cache.vconcat(x0, cache.gather(r1, i0, n1 - 1))
        else:
            j0 = np.where(mode == MODE_DEPART, n1 - 1, n1 - 2)
            x2 = _mask_empty(cache.node_attrs(arr_new), mode == MODE_DEPART, cache.windows)
            attrs = cache.chain([x0, cache.gather(r1, i0, j0), x2])
        new.add(_contrib(cache, attrs, dep_new, arr_new, cache.k[r1]))
        if nv_on:
            moves_dep = dep_new != cache.depart[r1]
            if moves_dep.any():
                fleet_delta += np.where(
                    moves_dep,
                    cache.fleet_inc[dep_new] + cache.fleet_dec[cache.depart[r1]], 0.0)
            fleet_neutral &= ~moves_dep
        old = _old_contrib(cache, r1, None, False)

    else:
        raise ValueError(f"unknown operator {op}")

    dD = new.D - old[0]
    dV1 = new.V1 - old[1]
    dV2 = new.V2 - old[2]
    dV3 = new.V3 - old[3]
    d_closure = new.closure - old[4]
    dV4 = consts.theta * (d_closure + fleet_delta)
    lam = penalties.lam
    dF = dD + lam[0] * dV1 + lam[1] * dV2 + lam[2] * dV3 + lam[3] * dV4
    return DeltaArrays(dD, dV1, dV2, dV3, dV4, dF, fleet_neutral)


def _select_attrs(mask: np.ndarray, a: AttrArrays, b: AttrArrays) -> AttrArrays:
    """Elementwise choice between two attribute bundles."""
    return AttrArrays(
        np.where(mask, a.dist, b.dist), np.where(mask, a.load, b.load),
        np.where(mask, a.T, b.T),
        np.where(mask, a.E, b.E) if a.E is not None else None,
        np.where(mask, a.L, b.L) if a.L is not None else None,
        np.where(mask, a.TW, b.TW) if a.TW is not None else None,
        np.where(mask, a.first, b.first), np.where(mask, a.last, b.last),
    )


def _mask_empty(a: AttrArrays, mask: np.ndarray, windows: bool) -> AttrArrays:
    return AttrArrays(
        np.where(mask, 0.0, a.dist), np.where(mask, 0.0, a.load), np.where(mask, 0.0, a.T),
        np.where(mask, 0.0, a.E) if windows else None,
        np.where(mask, INF, a.L) if windows else None,
        np.where(mask, 0.0, a.TW) if windows else None,
        np.where(mask, -1, a.first), np.where(mask, -1, a.last),
    )


def leader_and_followers(cache: SolutionCache, cs: CandidateSet, deltas: DeltaArrays,
                         multi_move: bool) -> tuple[Optional[Move], list[Move]]:
    """Extract the best candidate and the distance-improving, penalty-neutral rest.

    Ties on the leader's dF are broken by the canonical candidate key so the
    reduction is independent of batch layout.
    """
    if len(cs) == 0:
        return None, []
    dF = deltas.dF
    best_val = dF.min()
    if not (best_val < -EPS):
        return None, []
    ties = np.flatnonzero(dF == best_val)
    if len(ties) > 1:
        keys = np.lexsort(tuple(arr[ties] for arr in cs.key_arrays()))
        best = int(ties[keys[0]])
    else:
        best = int(ties[0])
    leader = _materialize(cs, deltas, best)

    followers: list[Move] = []
    if multi_move:
        ok = (
            (deltas.dD < -EPS)
            & (np.abs(deltas.dV1) <= EPS)
            & (np.abs(deltas.dV2) <= EPS)
            & (np.abs(deltas.dV3) <= EPS)
            & (np.abs(deltas.dV4) <= EPS)
            & deltas.fleet_neutral
        )
        ok[best] = False
        idx = np.flatnonzero(ok)
        if len(idx):
            order = np.lexsort(tuple(arr[idx] for arr in cs.key_arrays()) + (dF[idx],))
            followers = [_materialize(cs, deltas, int(i)) for i in idx[order]]
    return leader, followers


def _materialize(cs: CandidateSet, deltas: DeltaArrays, i: int) -> Move:
    mv = cs.move(i)
    mv.dD = float(deltas.dD[i])
    mv.dV = (float(deltas.dV1[i]), float(deltas.dV2[i]),
             float(deltas.dV3[i]), float(deltas.dV4[i]))
    mv.dF = float(deltas.dF[i])
    return mv
