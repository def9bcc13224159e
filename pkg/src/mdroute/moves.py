"""Move types, candidate enumeration and move application plans.

Six operators: Relocate and Swap (segment length 1-2, optional reversal on
symmetric variants), 2-opt* (tail exchange between routes), 2-opt (intra-route
reversal, symmetric variants only), Depot-Insert (split a route at a new depot)
and Depot-Replace (re-assign departure and/or arrival depot).

Candidates are kept as parallel numpy arrays (`CandidateSet`) so the evaluator
can score a whole neighborhood at once; `Move` objects are materialized only
for the few candidates that get selected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .model import Instance, Route, Solution
from .neighborhood import NeighborLists


class Op(IntEnum):
    RELOCATE = 0
    SWAP = 1
    TWO_OPT_STAR = 2
    TWO_OPT = 3
    DEPOT_INSERT = 4
    DEPOT_REPLACE = 5


# Depot-Replace modes
MODE_DEPART = 0
MODE_ARRIVE = 1
MODE_BOTH = 2

ALL_OPS = tuple(Op)


@dataclass
class Move:
    """One neighborhood transition plus its evaluated deltas."""

    op: Op
    r1: int
    p1: int
    r2: int = -1
    p2: int = -1
    len1: int = 0
    len2: int = 0
    rev1: bool = False
    rev2: bool = False
    depot: int = -1
    mode: int = -1
    dD: float = 0.0
    dV: tuple = (0.0, 0.0, 0.0, 0.0)
    dF: float = 0.0

    def routes_touched(self) -> set[int]:
        out = {self.r1}
        if self.r2 >= 0:
            out.add(self.r2)
        return out

    def key(self) -> tuple:
        """Canonical ordering key: operator, route indices, positions ascending."""
        return (int(self.op), self.r1, self.r2, self.p1, self.p2,
                self.len1, self.len2, int(self.rev1), int(self.rev2),
                self.depot, self.mode)


@dataclass
class RoutePlan:
    """Replacement content for one route; route_index None means a new route."""

    route_index: Optional[int]
    depart: int
    arrive: int
    customers: list[int]


def _seg(route: Route, p: int, length: int, rev: bool) -> list[int]:
    seg = route.customers[p:p + length]
    return seg[::-1] if rev else seg


def move_plan(sol: Solution, move: Move, inst: Instance) -> list[RoutePlan]:
    """Expand a move into the new contents of every affected route."""
    op = move.op
    if op == Op.RELOCATE:
        ra = sol.routes[move.r1]
        seg = _seg(ra, move.p1, move.len1, move.rev1)
        if move.r1 == move.r2:
            rest = ra.customers[:move.p1] + ra.customers[move.p1 + move.len1:]
            at = move.p2 - move.len1 if move.p2 > move.p1 else move.p2
            return [RoutePlan(move.r1, ra.depart, ra.arrive, rest[:at] + seg + rest[at:])]
        rb = sol.routes[move.r2]
        return [
            RoutePlan(move.r1, ra.depart, ra.arrive,
                      ra.customers[:move.p1] + ra.customers[move.p1 + move.len1:]),
            RoutePlan(move.r2, rb.depart, rb.arrive,
                      rb.customers[:move.p2] + seg + rb.customers[move.p2:]),
        ]
    if op == Op.SWAP:
        ra = sol.routes[move.r1]
        seg1 = _seg(ra, move.p1, move.len1, move.rev1)
        if move.r1 == move.r2:
            # normalized so the first segment ends before the second starts
            seg2 = _seg(ra, move.p2, move.len2, move.rev2)
            cust = (ra.customers[:move.p1] + seg2
                    + ra.customers[move.p1 + move.len1:move.p2] + seg1
                    + ra.customers[move.p2 + move.len2:])
            return [RoutePlan(move.r1, ra.depart, ra.arrive, cust)]
        rb = sol.routes[move.r2]
        seg2 = _seg(rb, move.p2, move.len2, move.rev2)
        return [
            RoutePlan(move.r1, ra.depart, ra.arrive,
                      ra.customers[:move.p1] + seg2 + ra.customers[move.p1 + move.len1:]),
            RoutePlan(move.r2, rb.depart, rb.arrive,
                      rb.customers[:move.p2] + seg1 + rb.customers[move.p2 + move.len2:]),
        ]
    if op == Op.TWO_OPT:
        ra = sol.routes[move.r1]
        cust = (ra.customers[:move.p1]
                + ra.customers[move.p1:move.p2 + 1][::-1]
                + ra.customers[move.p2 + 1:])
        return [RoutePlan(move.r1, ra.depart, ra.arrive, cust)]
    if op == Op.TWO_OPT_STAR:
        ra, rb = sol.routes[move.r1], sol.routes[move.r2]
        head1, tail1 = ra.customers[:move.p1], ra.customers[move.p1:]
        head2, tail2 = rb.customers[:move.p2], rb.customers[move.p2:]
        return [
            RoutePlan(move.r1, ra.depart, rb.arrive, head1 + tail2),
            RoutePlan(move.r2, rb.depart, ra.arrive, head2 + tail1),
        ]
    if op == Op.DEPOT_INSERT:
        ra = sol.routes[move.r1]
        return [
            RoutePlan(move.r1, ra.depart, ra.arrive, ra.customers[:move.p1]),
            RoutePlan(None, move.depot, move.depot, ra.customers[move.p1:]),
        ]
    if op == Op.DEPOT_REPLACE:
        ra = sol.routes[move.r1]
        depart = move.depot if move.mode in (MODE_DEPART, MODE_BOTH) else ra.depart
        arrive = move.depot if move.mode in (MODE_ARRIVE, MODE_BOTH) else ra.arrive
        return [RoutePlan(move.r1, depart, arrive, list(ra.customers))]
    raise ValueError(f"unknown operator {op}")


class SolutionIndex:
    """Array views of a solution's structure used by candidate enumeration."""

    def __init__(self, sol: Solution, inst: Instance):
        n = inst.n_nodes
        self.route_of = np.full(n, -1, dtype=np.int64)
        self.idx_of = np.full(n, -1, dtype=np.int64)
        self.n_routes = len(sol.routes)
        self.k = np.zeros(self.n_routes, dtype=np.int64)
        self.depart = np.zeros(self.n_routes, dtype=np.int64)
        self.arrive = np.zeros(self.n_routes, dtype=np.int64)
        routed = []
        for ri, r in enumerate(sol.routes):
            self.k[ri] = len(r.customers)
            self.depart[ri] = r.depart
            self.arrive[ri] = r.arrive
            routed.extend(r.customers)
            for pi, cst in enumerate(r.customers):
                self.route_of[cst] = ri
                self.idx_of[cst] = pi
        self.routed = np.array(sorted(routed), dtype=np.int64)


_FIELDS = ("r1", "p1", "r2", "p2", "len1", "len2", "rev1", "rev2", "depot", "mode")
_DEFAULTS = dict(r1=-1, p1=-1, r2=-1, p2=-1, len1=0, len2=0, rev1=0, rev2=0,
                 depot=-1, mode=-1)


@dataclass
class CandidateSet:
    """Struct-of-arrays description of all candidates of one operator."""

    op: Op
    r1: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    p1: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    r2: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    p2: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    len1: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    len2: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    rev1: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    rev2: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    depot: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    mode: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __len__(self) -> int:
        return len(self.r1)

    def move(self, i: int) -> Move:
        return Move(
            self.op,
            int(self.r1[i]), int(self.p1[i]), int(self.r2[i]), int(self.p2[i]),
            int(self.len1[i]), int(self.len2[i]),
            bool(self.rev1[i]), bool(self.rev2[i]),
            int(self.depot[i]), int(self.mode[i]),
        )

    def moves(self) -> list[Move]:
        return [self.move(i) for i in range(len(self))]

    def key_arrays(self) -> tuple:
        """Lexicographic ordering keys, least significant first (np.lexsort style)."""
        return (self.mode, self.depot, self.rev2, self.rev1, self.len2, self.len1,
                self.p2, self.p1, self.r2, self.r1)


class _Builder:
    """Accumulates candidate parts cheaply; one concatenate per column."""

    __slots__ = ("op", "parts", "sizes")

    def __init__(self, op: Op):
        self.op = op
        self.parts: list[dict] = []
        self.sizes: list[int] = []

    def add(self, n: int, **cols) -> None:
        if n:
            self.parts.append(cols)
            self.sizes.append(n)

    def build(self) -> CandidateSet:
        cs = CandidateSet(self.op)
        if not self.parts:
            return cs
        total = sum(self.sizes)
        for name in _FIELDS:
            default = _DEFAULTS[name]
            dtype = bool if name.startswith("rev") else np.int64
            if not any(name in p for p in self.parts):
                setattr(cs, name, np.full(total, default, dtype=dtype))
                continue
            chunks = []
            for n, p in zip(self.sizes, self.parts):
                val = p.get(name, default)
                if isinstance(val, np.ndarray):
                    chunks.append(val.astype(dtype, copy=False))
                else:
                    chunks.append(np.full(n, val, dtype=dtype))
            setattr(cs, name, np.concatenate(chunks) if len(chunks) > 1 else chunks[0])
        return cs


def _neighbor_pairs(sidx: SolutionIndex, nbr: NeighborLists, inst: Instance):
    """All (u, v) arcs with u a routed customer and v a routed neighbor of u."""
    pairs = getattr(nbr, "_pair_cache", None)
    if pairs is None:
        cust = np.arange(inst.n_depots, inst.n_nodes, dtype=np.int64)
        lists = nbr.lists[cust].astype(np.int64)  # (n_cust, theta), padded with -1
        u = np.repeat(cust, lists.shape[1])
        v = lists.ravel()
        ok = v >= 0
        pairs = (u[ok], v[ok])
        nbr._pair_cache = pairs
    u, v = pairs
    if len(sidx.routed) == inst.n_customers:
        return u, v
    ok = (sidx.route_of[u] >= 0) & (sidx.route_of[v] >= 0)
    return u[ok], v[ok]


def _boundary_pairs(sidx: SolutionIndex):
    """Every routed customer crossed with every route index."""
    cust = sidx.routed
    n_routes = sidx.n_routes
    ub = np.repeat(cust, n_routes)
    rb = np.tile(np.arange(n_routes, dtype=np.int64), len(cust))
    return ub, rb


def enumerate_relocate(sol: Solution, sidx: SolutionIndex, nbr: NeighborLists,
                       inst: Instance, symmetric: bool) -> CandidateSet:
    u, v = _neighbor_pairs(sidx, nbr, inst)
    ru, pu = sidx.route_of[u], sidx.idx_of[u]
    rv, pv = sidx.route_of[v], sidx.idx_of[v]
    ku = sidx.k[ru]
    same = ru == rv
    tgt = pv + 1  # insert right after v

    ub, rb = _boundary_pairs(sidx)
    rub, pub = sidx.route_of[ub], sidx.idx_of[ub]
    kub, kb = sidx.k[rub], sidx.k[rb]
    sameb = rub == rb

    variants = [(1, False), (2, False)] + ([(2, True)] if symmetric else [])
    out = _Builder(Op.RELOCATE)
    for length, rev in variants:
        fits = pu + length <= ku
        inside = same & (tgt > pu) & (tgt <= pu + length)  # v inside the segment
        ok = fits & ~inside & ~(same & (tgt == pu + length))
        if not rev:
            ok &= ~(same & (tgt == pu))
        out.add(int(ok.sum()), r1=ru[ok], p1=pu[ok], r2=rv[ok], p2=tgt[ok],
                len1=length, rev1=rev)
        for front in (True, False):
            tgtb = np.zeros(len(ub), np.int64) if front else kb
            okb = (pub + length <= kub) & ~(sameb & (tgtb == pub + length))
            if not rev:
                okb &= ~(sameb & (tgtb == pub))
            out.add(int(okb.sum()), r1=rub[okb], p1=pub[okb], r2=rb[okb],
                    p2=tgtb[okb], len1=length, rev1=rev)
    return out.build()


def enumerate_swap(sol: Solution, sidx: SolutionIndex, nbr: NeighborLists,
                   inst: Instance, symmetric: bool) -> CandidateSet:
    u, v = _neighbor_pairs(sidx, nbr, inst)
    ok = u != v
    u, v = u[ok], v[ok]
    ru, pu = sidx.route_of[u], sidx.idx_of[u]
    rv, pv = sidx.route_of[v], sidx.idx_of[v]
    same = ru == rv
    flip = same & (pu > pv)  # normalize same-route so segment 1 comes first
    ku, kv = sidx.k[ru], sidx.k[rv]

    if symmetric:
        combos = [(lu, lv, bool(au), bool(av))
                  for lu in (1, 2) for lv in (1, 2)
                  for au in ((0, 1) if lu == 2 else (0,))
                  for av in ((0, 1) if lv == 2 else (0,))]
    else:
        combos = [(1, 1, False, False), (1, 2, False, False),
                  (2, 1, False, False), (2, 2, False, False)]

    out = _Builder(Op.SWAP)
    for lu, lv, revu, revv in combos:
        p1 = np.where(flip, pv, pu)
        p2 = np.where(flip, pu, pv)
        if lu == lv:
            l1 = l2 = lu
        else:
            l1 = np.where(flip, lv, lu)
            l2 = np.where(flip, lu, lv)
        if revu == revv:
            b1 = revu
            b2 = revv
        else:
            b1 = np.where(flip, revv, revu)
            b2 = np.where(flip, revu, revv)
        fits = (p1 + l1 <= ku) & (p2 + l2 <= kv)
        ok = fits & (~same | (p2 >= p1 + l1))
        n = int(ok.sum())
        kw = dict(r1=ru[ok], p1=p1[ok], r2=rv[ok], p2=p2[ok])
        kw["len1"] = l1[ok] if isinstance(l1, np.ndarray) else l1
        kw["len2"] = l2[ok] if isinstance(l2, np.ndarray) else l2
        kw["rev1"] = b1[ok] if isinstance(b1, np.ndarray) else b1
        kw["rev2"] = b2[ok] if isinstance(b2, np.ndarray) else b2
        out.add(n, **kw)
    return out.build()


def enumerate_two_opt(sol: Solution, sidx: SolutionIndex, nbr: NeighborLists,
                      inst: Instance) -> CandidateSet:
    u, v = _neighbor_pairs(sidx, nbr, inst)
    ru, pu = sidx.route_of[u], sidx.idx_of[u]
    rv, pv = sidx.route_of[v], sidx.idx_of[v]
    same = ru == rv
    out = _Builder(Op.TWO_OPT)
    fwd = same & (pv >= pu + 2)  # reverse customers[pu+1 .. pv], new edge (u, v)
    out.add(int(fwd.sum()), r1=ru[fwd], p1=pu[fwd] + 1, p2=pv[fwd])
    bwd = same & (pu >= pv + 2)
    out.add(int(bwd.sum()), r1=ru[bwd], p1=pv[bwd] + 1, p2=pu[bwd])
    return out.build()


def enumerate_two_opt_star(sol: Solution, sidx: SolutionIndex, nbr: NeighborLists,
                           inst: Instance) -> CandidateSet:
    if sidx.n_routes < 2:
        return CandidateSet(Op.TWO_OPT_STAR)
    u, v = _neighbor_pairs(sidx, nbr, inst)
    ru, pu = sidx.route_of[u], sidx.idx_of[u]
    rv, pv = sidx.route_of[v], sidx.idx_of[v]
    diff = ru != rv
    arrive = sidx.arrive
    k = sidx.k
    out = _Builder(Op.TWO_OPT_STAR)
    # cut so the new arc is u -> v: keep u's head, attach v's tail
    out.add(int(diff.sum()), r1=ru[diff], p1=pu[diff] + 1, r2=rv[diff], p2=pv[diff])
    # boundary cuts: move u's tail to the end of another route / give a tail
    # starting at v to a bare depot head / merge one route into another
    ub, rb = _boundary_pairs(sidx)
    rub, pub = sidx.route_of[ub], sidx.idx_of[ub]
    okb = rub != rb
    p1b, p2b = pub[okb] + 1, k[rb][okb]
    dropb = (p1b == k[rub][okb]) & (p2b == k[rb][okb])  # both tails empty
    if not inst.open_routes:
        dropb &= arrive[rub][okb] == arrive[rb][okb]
    sel = ~dropb
    out.add(int(sel.sum()), r1=rub[okb][sel], p1=p1b[sel], r2=rb[okb][sel], p2=p2b[sel])
    okc = rub != rb
    out.add(int(okc.sum()), r1=rb[okc], p1=0, r2=rub[okc], p2=pub[okc])
    ra = np.repeat(np.arange(sidx.n_routes, dtype=np.int64), sidx.n_routes)
    rb3 = np.tile(np.arange(sidx.n_routes, dtype=np.int64), sidx.n_routes)
    okd = ra != rb3
    out.add(int(okd.sum()), r1=ra[okd], p1=0, r2=rb3[okd], p2=k[rb3][okd])
    return out.build()


def enumerate_depot_insert(sol: Solution, sidx: SolutionIndex, inst: Instance) -> CandidateSet:
    routes = np.flatnonzero(sidx.k > 0).astype(np.int64)
    if len(routes) == 0:
        return CandidateSet(Op.DEPOT_INSERT)
    ks = sidx.k[routes]
    r = np.repeat(routes, ks * inst.n_depots)
    p = np.concatenate([np.repeat(np.arange(kk, dtype=np.int64), inst.n_depots)
                        for kk in ks])
    d = np.tile(np.arange(inst.n_depots, dtype=np.int64), int(ks.sum()))
    closes_same = inst.open_routes | (sidx.arrive[r] == sidx.depart[r])
    noop = (p == 0) & (d == sidx.depart[r]) & closes_same
    ok = ~noop
    out = _Builder(Op.DEPOT_INSERT)
    out.add(int(ok.sum()), r1=r[ok], p1=p[ok], depot=d[ok])
    return out.build()


def enumerate_depot_replace(sol: Solution, sidx: SolutionIndex, inst: Instance) -> CandidateSet:
    modes = (MODE_DEPART,) if inst.open_routes else (MODE_DEPART, MODE_ARRIVE, MODE_BOTH)
    n_routes = sidx.n_routes
    if n_routes == 0:
        return CandidateSet(Op.DEPOT_REPLACE)
    r = np.repeat(np.arange(n_routes, dtype=np.int64), inst.n_depots)
    d = np.tile(np.arange(inst.n_depots, dtype=np.int64), n_routes)
    out = _Builder(Op.DEPOT_REPLACE)
    for mode in modes:
        if mode == MODE_DEPART:
            ok = d != sidx.depart[r]
        elif mode == MODE_ARRIVE:
            ok = d != sidx.arrive[r]
        else:
            ok = ~((d == sidx.depart[r]) & (d == sidx.arrive[r]))
        out.add(int(ok.sum()), r1=r[ok], depot=d[ok], mode=mode, p1=0)
    return out.build()


def enumerate_candidates(sol: Solution, op: Op, nbr: NeighborLists, inst: Instance,
                         sidx: Optional[SolutionIndex] = None) -> CandidateSet:
    """All structurally valid candidates of one operator for the current solution."""
    if sidx is None:
        sidx = SolutionIndex(sol, inst)
    symmetric = not inst.has_windows
    if op == Op.RELOCATE:
        return enumerate_relocate(sol, sidx, nbr, inst, symmetric)
    if op == Op.SWAP:
        return enumerate_swap(sol, sidx, nbr, inst, symmetric)
    if op == Op.TWO_OPT:
        if inst.has_windows:
            return CandidateSet(Op.TWO_OPT)  # asymmetric evaluation: operator disabled
        return enumerate_two_opt(sol, sidx, nbr, inst)
    if op == Op.TWO_OPT_STAR:
        return enumerate_two_opt_star(sol, sidx, nbr, inst)
    if op == Op.DEPOT_INSERT:
        return enumerate_depot_insert(sol, sidx, inst)
    if op == Op.DEPOT_REPLACE:
        return enumerate_depot_replace(sol, sidx, inst)
    raise ValueError(f"unknown operator {op}")
