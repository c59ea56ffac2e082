"""Subset selection: choose few shared normals for many regions.

The region representatives form a facility-location style objective,

    F(V) = sum_r w_r * (4 - min_{v in V} ||n_r - v||^2) - lambda_eff * |V|,

with F(empty) = 0. The cap of 4 is the largest possible squared distance
between unit directions, so maximizing F is the same as minimizing the
weighted assignment cost plus a cardinality penalty over nonempty
selections. F is submodular and is maximized with the deterministic
double-greedy sweep, which carries a 1/3 approximation guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fusion import RegionPartition

DISTANCE_CAP = 4.0


class NoPlaneSupportError(RuntimeError):
    """No region has enough points to anchor a plane."""


@dataclass(frozen=True)
class Candidate:
    """One distinct region normal with its pooled support."""

    normal: tuple
    weight: int
    region_id: int
    member_ids: tuple[int, ...]


@dataclass(frozen=True)
class CandidateSet:
    """Region representatives split by the support threshold tau.

    ``candidates`` hold at least tau points each and drive the objective;
    ``below_tau`` entries are excluded from it (treated as outliers) but
    still receive a normal assignment afterwards.
    """

    candidates: list[Candidate]
    below_tau: list[Candidate]
    tau: int


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selection round."""

    selected: np.ndarray
    assignment: dict[int, int]
    energy: float


def build_candidates(partition: RegionPartition, tau: int) -> CandidateSet:
    """Pool live regions into candidates, one per distinct normal.

    Regions with bitwise identical normals merge into a single entry whose
    weight is their combined point count and whose region_id is the
    smallest member id. Entries are sorted by weight descending, ties by
    region_id ascending.
    """
    if tau < 1:
        raise ValueError("tau must be a positive integer")
    groups: dict[tuple, list] = {}
    for rid in partition.live_ids():
        key = partition._normals[rid]
        entry = groups.get(key)
        if entry is None:
            groups[key] = [partition._weights[rid], [rid]]
        else:
            entry[0] += partition._weights[rid]
            entry[1].append(rid)
    pooled = [Candidate(normal=key, weight=w, region_id=members[0],
                        member_ids=tuple(members))
              for key, (w, members) in groups.items()]
    pooled.sort(key=lambda c: (-c.weight, c.region_id))
    retained = [c for c in pooled if c.weight >= tau]
    below = [c for c in pooled if c.weight < tau]
    return CandidateSet(candidates=retained, below_tau=below, tau=tau)


def selection_cost(selected, cands: CandidateSet, lambda_eff: float) -> float:
    """Value of F for a selected normal set; the empty set scores 0.

    Only candidates at or above tau enter the sum; ``below_tau`` entries
    are ignored here by construction.
    """
    sel = np.asarray(selected, dtype=float)
    if sel.size == 0:
        return 0.0
    sel = np.atleast_2d(sel)
    if not cands.candidates:
        return -lambda_eff * len(sel)
    normals = np.array([c.normal for c in cands.candidates])
    weights = np.array([c.weight for c in cands.candidates], dtype=float)
    diffs = normals[:, None, :] - sel[None, :, :]
    d2 = np.einsum("rsd,rsd->rs", diffs, diffs)
    covered = DISTANCE_CAP - d2.min(axis=1)
    return float(weights @ covered) - lambda_eff * len(sel)


def _top2_masked(val: np.ndarray, in_y: np.ndarray,
                 rows: np.ndarray | None = None):
    """Best and second-best column value per row over the masked columns.

    Missing entries (fewer than one or two live columns) default to value
    0 and index -1, matching the empty-selection coverage convention.
    """
    cols = np.flatnonzero(in_y)
    n_rows = val.shape[0] if rows is None else len(rows)
    b1v = np.zeros(n_rows)
    b2v = np.zeros(n_rows)
    b1i = np.full(n_rows, -1, dtype=np.int64)
    b2i = np.full(n_rows, -1, dtype=np.int64)
    if len(cols) == 0:
        return b1v, b1i, b2v, b2i
    sub = val[:, cols] if rows is None else val[np.ix_(rows, cols)]
    if len(cols) == 1:
        b1v[:] = sub[:, 0]
        b1i[:] = cols[0]
        return b1v, b1i, b2v, b2i
    top2 = np.argpartition(sub, -2, axis=1)[:, -2:]
    r = np.arange(sub.shape[0])
    va = sub[r, top2[:, 0]]
    vb = sub[r, top2[:, 1]]
    first_is_b = vb >= va
    b1v[:] = np.where(first_is_b, vb, va)
    b1i[:] = cols[np.where(first_is_b, top2[:, 1], top2[:, 0])]
    b2v[:] = np.where(first_is_b, va, vb)
    b2i[:] = cols[np.where(first_is_b, top2[:, 0], top2[:, 1])]
    return b1v, b1i, b2v, b2i


def double_greedy(cands: CandidateSet, lambda_eff: float) -> SelectionResult:
    """Deterministic double-greedy sweep over the retained candidates.

    X grows from nothing while Y shrinks from everything; candidate i is
    kept when its marginal gain for X at least matches the gain of
    deleting it from Y. Should the sweep end with X empty, the heaviest
    candidate is force-selected so the pipeline always has one direction
    to assign. Every region, including below-tau ones, is then mapped to
    its nearest selected normal (ties to the lower selected index).
    """
    if lambda_eff < 0.0:
        raise ValueError("lambda_eff must be nonnegative")
    retained = cands.candidates
    if not retained:
        raise NoPlaneSupportError(
            f"no region reaches the support threshold tau={cands.tau}")
    normals = np.array([c.normal for c in retained])
    weights = np.array([c.weight for c in retained], dtype=float)
    n = len(retained)

    diffs = normals[:, None, :] - normals[None, :, :]
    val = DISTANCE_CAP - np.einsum("rcd,rcd->rc", diffs, diffs)

    in_y = np.ones(n, dtype=bool)
    best_x = np.zeros(n)
    b1v, b1i, b2v, b2i = _top2_masked(val, in_y)
    chosen: list[int] = []
    for i in range(n):
        gain_add = float(weights @ np.maximum(val[:, i] - best_x, 0.0)) - lambda_eff
        owners = b1i == i
        loss = float((weights[owners] * (b1v[owners] - b2v[owners])).sum())
        gain_del = lambda_eff - loss
        if gain_add >= gain_del:
            chosen.append(i)
            np.maximum(best_x, val[:, i], out=best_x)
        else:
            in_y[i] = False
            touched = np.flatnonzero((b1i == i) | (b2i == i))
            if len(touched):
                nb1v, nb1i, nb2v, nb2i = _top2_masked(val, in_y, touched)
                b1v[touched] = nb1v
                b1i[touched] = nb1i
                b2v[touched] = nb2v
                b2i[touched] = nb2i

    if not chosen:
        chosen = [0]
    selected = normals[chosen]

    assignment: dict[int, int] = {}
    for group in (retained, cands.below_tau):
        if not group:
            continue
        gn = np.array([c.normal for c in group])
        gd = gn[:, None, :] - selected[None, :, :]
        d2 = np.einsum("gsd,gsd->gs", gd, gd)
        nearest = d2.argmin(axis=1)
        for c, si in zip(group, nearest):
            for rid in c.member_ids:
                assignment[rid] = int(si)

    energy = selection_cost(selected, cands, lambda_eff)
    return SelectionResult(selected=selected, assignment=assignment, energy=energy)


def assign_regions(partition: RegionPartition, result: SelectionResult,
                   in_place: bool = False) -> RegionPartition:
    """Rewrite every live region's normal to its assigned selected normal.

    Regions that end up sharing a normal stay distinct; spatial fusion is
    the next sweep's job.
    """
    live = partition.live_ids()
    missing = [rid for rid in live if rid not in result.assignment]
    if missing:
        raise ValueError(f"assignment misses regions {missing[:5]}")
    part = partition if in_place else partition.copy()
    as_tuples = [tuple(row) for row in result.selected]
    for rid in live:
        part._normals[rid] = as_tuples[result.assignment[rid]]
    return part
