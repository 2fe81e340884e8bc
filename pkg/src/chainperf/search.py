"""Feasible-configuration search over NR redundancy layouts.

Candidate generation enumerates, per node, every multiset of NRs within
the configured caps whose availability meets the target on its own.
The chain search then walks the candidate lists in node order with
cost-share and partial-availability pruning against the best complete
configuration found so far, keeping every feasible configuration it
completes, not only the cheapest.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from . import deploy, qnet
from ._format import fmt10
from ._parallel import pmap
from .errors import EmptyCandidateSet, NoFeasibleConfig

DIAGNOSTIC_LIMIT = 20_000


@dataclass(frozen=True)
class SearchParams:
    """Targets, thresholds and caps steering the configuration search."""

    availability_target: float
    thresholds: tuple[tuple[str, int], ...]
    deployment_type: str = deploy.HOMOGENEOUS
    pair: tuple[str, str] | None = None
    max_nrs_per_node: int = 4
    max_containers_per_nr: int = 6
    cost_share_first: float = 0.5
    cost_share_first_two: float = 0.75

    def __post_init__(self):
        if not 0 <= self.availability_target < 1:
            raise ValueError("availability target must lie in [0, 1)")
        if not 0 < self.cost_share_first <= self.cost_share_first_two <= 1:
            raise ValueError("cost-share multipliers must satisfy 0 < m1 <= m2 <= 1")
        if self.max_nrs_per_node < 1 or self.max_containers_per_nr < 1:
            raise ValueError("caps must be >= 1")
        if self.deployment_type not in (deploy.HOMOGENEOUS, deploy.COLOCATED):
            raise ValueError(f"unknown deployment type {self.deployment_type!r}")
        if (self.deployment_type == deploy.COLOCATED) != (self.pair is not None):
            raise ValueError("co-located search needs a node pair, homogeneous must not have one")
        names = [name for name, _ in self.thresholds]
        if len(set(names)) != len(names):
            raise ValueError("duplicate node in thresholds")
        if self.pair is not None:
            missing = [n for n in self.pair if n not in names]
            if missing:
                raise ValueError(f"pair nodes {missing} not covered by thresholds")

    def threshold(self, node: str) -> int:
        for name, value in self.thresholds:
            if name == node:
                return value
        raise KeyError(node)


@dataclass(frozen=True)
class NodeCandidate:
    """One admissible NR multiset for a node or the co-located group."""

    node: str
    nrs: tuple
    availability: float
    cost: int


@dataclass(frozen=True)
class CandidateSets:
    """Per-node candidate lists, each sorted by cost then structure."""

    nodes: tuple[tuple[str, tuple[NodeCandidate, ...]], ...]
    group: tuple[NodeCandidate, ...] | None = None
    group_label: str | None = None

    @property
    def levels(self) -> tuple[tuple[str, tuple[NodeCandidate, ...]], ...]:
        out = list(self.nodes)
        if self.group is not None:
            out.append((self.group_label or "group", self.group))
        return tuple(out)


def _homog_candidates(node: str, c_star: int, rates: deploy.LayerRates,
                      params: SearchParams) -> list[NodeCandidate]:
    pmfs = {c: deploy.homog_nr_pmf(c, rates, params.max_containers_per_nr)
            for c in range(1, params.max_containers_per_nr + 1)}
    target = params.availability_target
    found: list[NodeCandidate] = []
    for k in range(1, params.max_nrs_per_node + 1):
        for combo in combinations_with_replacement(
                range(1, params.max_containers_per_nr + 1), k):
            total = sum(combo)
            if total < c_star:
                continue
            a = deploy.node_availability([pmfs[c] for c in combo], c_star)
            if a >= target:
                found.append(NodeCandidate(node, combo, a, 2 * k + total))
    found.sort(key=lambda c: (c.cost, c.nrs))
    return found


def _group_candidates(label: str, c_star_first: int, c_star_second: int,
                      rates: deploy.LayerRates, params: SearchParams) -> list[NodeCandidate]:
    cap = params.max_containers_per_nr
    kinds = [(i, j) for i in range(cap + 1) for j in range(cap + 1) if i + j >= 1]
    kind_pmfs = pmap(lambda kind: deploy.coloc_nr_pmf(kind[0], kind[1], rates, cap), kinds)
    target = params.availability_target
    found: list[NodeCandidate] = []

    # Joint pmfs are flattened with a second-axis stride wide enough that
    # token sums never collide, so adding an NR is a single 1-D convolution.
    base = params.max_nrs_per_node * cap + 1
    flats = {}
    for kind, pmf in zip(kinds, kind_pmfs):
        buf = np.zeros((pmf.shape[0], base))
        buf[:, : pmf.shape[1]] = pmf
        flats[kind] = buf.ravel()[: (pmf.shape[0] - 1) * base + pmf.shape[1]]

    def tail_mass(flat: np.ndarray) -> float:
        padded = np.zeros(((flat.size + base - 1) // base) * base)
        padded[: flat.size] = flat
        return float(padded.reshape(-1, base)[c_star_first:, c_star_second:].sum())

    # Depth-first multiset enumeration sharing prefix convolutions, so each
    # visited multiset costs one convolution instead of k.
    def grow(start: int, chosen: list, joint: np.ndarray,
             total_first: int, total_second: int) -> None:
        for t in range(start, len(kinds)):
            i, j = kinds[t]
            nxt = np.convolve(joint, flats[(i, j)])
            chosen.append((i, j))
            tf, ts = total_first + i, total_second + j
            if tf >= c_star_first and ts >= c_star_second:
                a = tail_mass(nxt)
                if a >= target:
                    nrs = tuple(chosen)
                    found.append(NodeCandidate(
                        label, nrs, a, 2 * len(nrs) + tf + ts))
            if len(chosen) < params.max_nrs_per_node:
                grow(t, chosen, nxt, tf, ts)
            chosen.pop()

    grow(0, [], np.ones(1), 0, 0)
    found.sort(key=lambda c: (c.cost, c.nrs))
    return found


def srneval(rates: deploy.LayerRates, params: SearchParams) -> CandidateSets:
    """Enumerate per-node NR multisets that individually meet the target.

    Candidates are deduplicated up to NR permutation and sorted by cost
    then structure. Raises EmptyCandidateSet if any node ends up with no
    admissible combination inside the caps.
    """
    pair = set(params.pair or ())
    standalone = [(name, thr) for name, thr in params.thresholds if name not in pair]
    node_lists = pmap(
        lambda item: (item[0], tuple(_homog_candidates(item[0], item[1], rates, params))),
        standalone,
    )
    group = None
    label = None
    if params.pair is not None:
        first, second = params.pair
        label = f"{first}+{second}"
        group = tuple(_group_candidates(
            label, params.threshold(first), params.threshold(second), rates, params))
        if not group:
            raise EmptyCandidateSet(
                f"group {label}: no NR combination reaches "
                f"{params.availability_target} within the caps")
    for name, cands in node_lists:
        if not cands:
            raise EmptyCandidateSet(
                f"node {name}: no NR combination reaches "
                f"{params.availability_target} within the caps")
    return CandidateSets(tuple(node_lists), group, label)


@dataclass(frozen=True)
class ConfigRecord:
    """One feasible chain configuration discovered by the search."""

    choices: tuple[NodeCandidate, ...]
    availability: float
    csd: float | None
    cost: int


@dataclass
class SearchResult:
    records: tuple[ConfigRecord, ...]
    c_min: float
    pruning_diagnostic: str | None = None


def _allocation_for(choices: Sequence[NodeCandidate], chain: qnet.ChainSpec,
                    params: SearchParams) -> list[int]:
    totals: dict[str, int] = {}
    for cand in choices:
        if params.pair is not None and cand.node not in dict(params.thresholds):
            first, second = params.pair
            totals[first] = sum(i for i, _ in cand.nrs)
            totals[second] = sum(j for _, j in cand.nrs)
        else:
            totals[cand.node] = sum(cand.nrs)
    return [totals[node.name] for node in chain.nodes]


def optsearchchain(candidates: CandidateSets, params: SearchParams,
                   chain: qnet.ChainSpec | None = None, prune: bool = True,
                   verify_pruning: bool | str = "auto") -> SearchResult:
    """Walk the candidate lists node by node, pruning against C_min.

    The first node is cut when its cost alone exceeds m1 * C_min, the
    first two when their cost exceeds m2 * C_min or their availability
    product already misses the target, and deeper levels when the
    running cost exceeds C_min outright or availability falls short.
    C_min starts at infinity, so nothing is cut before the first
    complete configuration. All comparisons are strict, keeping
    equal-cost alternatives. With `prune` false the cost cuts and C_min
    updates are disabled and the walk degenerates to exhaustive
    filtering by availability.

    Every completed record is re-checked: availability at least the
    target and, when `chain` is given, CSD within the chain's target
    using the per-node container totals.
    """
    levels = candidates.levels
    if not levels or any(not cands for _, cands in levels):
        raise NoFeasibleConfig("empty candidate list")
    group_last = candidates.group is not None
    m1, m2 = params.cost_share_first, params.cost_share_first_two
    target = params.availability_target
    depth = len(levels)

    last_cands = levels[-1][1]
    last_costs = np.array([c.cost for c in last_cands], dtype=float)
    last_avails = np.array([c.availability for c in last_cands])

    c_min = math.inf
    saved: list[tuple[NodeCandidate, ...]] = []

    def walk(level: int, chosen: list[NodeCandidate], run_cost: int, run_avail: float) -> None:
        nonlocal c_min
        if level == depth - 1:
            # Innermost level, vectorized; candidate order is cost-ascending,
            # which makes the batched C_min handling below equivalent to the
            # one-at-a-time walk.
            feasible = run_avail * last_avails >= target
            totals = run_cost + last_costs
            if group_last and prune:
                feasible &= totals <= c_min
                if feasible.any():
                    cheapest = totals[feasible].min()
                    feasible &= totals == cheapest
            if not feasible.any():
                return
            for idx in np.flatnonzero(feasible):
                saved.append(tuple(chosen) + (last_cands[idx],))
            if prune:
                c_min = min(c_min, float(totals[feasible].min()))
            return
        for cand in levels[level][1]:
            total = run_cost + cand.cost
            if prune and level == 0 and total > m1 * c_min:
                continue
            avail = run_avail * cand.availability
            if level >= 1:
                bound = m2 * c_min if level == 1 else c_min
                if (prune and total > bound) or avail < target:
                    continue
            chosen.append(cand)
            walk(level + 1, chosen, total, avail)
            chosen.pop()

    walk(0, [], 0, 1.0)

    records = []
    # CSD depends only on the per-node container totals, which repeat
    # heavily across records, so the qnet solves are memoized.
    csd_by_totals: dict[tuple[int, ...], float] = {}
    for choices in saved:
        availability = math.prod(c.availability for c in choices)
        total_cost = sum(c.cost for c in choices)
        csd_value = None
        if chain is not None:
            totals = tuple(_allocation_for(choices, chain, params))
            csd_value = csd_by_totals.get(totals)
            if csd_value is None:
                csd_value = qnet.csd(chain, list(totals))
                csd_by_totals[totals] = csd_value
            if csd_value > chain.csd_target:
                continue
        records.append(ConfigRecord(tuple(choices), availability, csd_value, total_cost))
    if not records:
        raise NoFeasibleConfig(
            f"no configuration meets availability {target} within the caps")
    records.sort(key=lambda r: (r.cost, -r.availability))

    diagnostic = None
    space = math.prod(len(cands) for _, cands in levels)
    want_diag = verify_pruning is True or (verify_pruning == "auto" and space <= DIAGNOSTIC_LIMIT)
    if prune and want_diag:
        unpruned = optsearchchain(candidates, params, chain, prune=False,
                                  verify_pruning=False)
        if unpruned.records[0].cost < records[0].cost:
            diagnostic = (
                f"pruning discarded the optimum: cheapest kept record costs "
                f"{records[0].cost}, unpruned search finds {unpruned.records[0].cost}")
    return SearchResult(tuple(records), c_min, diagnostic)


def _nr_text(cand: NodeCandidate, params: SearchParams) -> str:
    if params.pair is not None and cand.node == f"{params.pair[0]}+{params.pair[1]}":
        tag_first = params.pair[0][0].upper()
        tag_second = params.pair[1][0].upper()
        parts = []
        for i, j in cand.nrs:
            inner = ",".join(
                f"{count}{tag}" for count, tag in ((i, tag_first), (j, tag_second)) if count
            )
            parts.append(f"NR^({inner})")
        return " ".join(parts)
    return " ".join(f"NR^({c})" for c in cand.nrs)


def _float_csv(value: float) -> str:
    return fmt10(value)


def records_to_csv(result: SearchResult, params: SearchParams) -> str:
    """Fixed-format CSV with one row per configuration record."""
    if not result.records:
        raise NoFeasibleConfig("nothing to emit")
    node_names = [c.node for c in result.records[0].choices]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["config_id", *node_names, "availability", "csd_s", "cost"])
    for idx, record in enumerate(result.records, start=1):
        row = [f"C{idx}"]
        row.extend(_nr_text(c, params) for c in record.choices)
        row.append(_float_csv(record.availability))
        row.append("" if record.csd is None else _float_csv(record.csd))
        row.append(str(record.cost))
        writer.writerow(row)
    return out.getvalue()


def records_to_json(result: SearchResult, params: SearchParams) -> str:
    """JSON list of records with shortest round-trip float formatting."""
    items = []
    for idx, record in enumerate(result.records, start=1):
        nodes = {}
        for cand in record.choices:
            counts = [list(nr) if isinstance(nr, tuple) else nr for nr in cand.nrs]
            nodes[cand.node] = {
                "nrs": counts,
                "availability": cand.availability,
                "cost": cand.cost,
            }
        items.append({
            "config_id": f"C{idx}",
            "nodes": nodes,
            "availability": record.availability,
            "csd_s": record.csd,
            "cost": record.cost,
        })
    return json.dumps(items, indent=2) + "\n"
