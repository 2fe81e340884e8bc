"""Greedy container allocation against a chain service delay target.

Starting from the per-node stability floor, containers are added one at
a time to whichever node currently buys the largest drop in response
time, until the chain service delay meets the target. With convex
per-node response times the greedy schedule is optimal in total
container count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import qnet
from .errors import Infeasible, Unstable

Allocation = tuple[int, ...]


@dataclass(frozen=True)
class GreedyStep:
    """One greedy iteration: which node grew and what it bought."""

    node_index: int
    node: str
    containers_after: int
    response_drop: float


@dataclass(frozen=True)
class AllocationResult:
    allocation: Allocation
    csd: float
    iterations: int
    trace: tuple[GreedyStep, ...]
    floors: Allocation
    convex: bool

    @property
    def total_containers(self) -> int:
        return sum(self.allocation)


def stability_floor(chain: qnet.ChainSpec) -> Allocation:
    """Minimum container count per node for a stable operating point."""
    alpha = qnet.solve_arrival_rates(chain)
    floors = []
    for node, rate in zip(chain.nodes, alpha):
        floors.append(int(math.floor(rate * node.mean_service_time)) + 1)
    return tuple(floors)


def optcnt(chain: qnet.ChainSpec) -> AllocationResult:
    """Smallest-cost container allocation meeting the chain delay target.

    Greedy ascent from the stability floor; each step adds one container
    to the node with the largest response-time drop, breaking ties by
    lowest node index. The result is labeled non-convex (heuristic) when
    any node's response time fails the discrete convexity check over the
    explored range.
    """
    alpha = qnet.solve_arrival_rates(chain)
    floors = stability_floor(chain)
    c_max = chain.c_max
    for node, floor in zip(chain.nodes, floors):
        if floor > c_max:
            raise Unstable(
                f"node {node.name} needs {floor} containers for stability, cap is {c_max}"
            )

    def node_response(i: int, c: int) -> float:
        load = qnet.node_load(chain.nodes[i], float(alpha[i]), c)
        return qnet.response_time(chain.nodes[i], load)

    n = len(chain.nodes)
    target = chain.csd_target
    ceiling = qnet.csd(chain, [c_max] * n)
    if ceiling > target:
        raise Infeasible(
            f"CSD {ceiling:.6f} s at the {c_max}-container cap still exceeds "
            f"the target {target:.6f} s"
        )

    counts = list(floors)
    responses = [node_response(i, counts[i]) for i in range(n)]
    current = math.fsum(responses) + chain.propagation_delay
    trace: list[GreedyStep] = []
    while current > target:
        best, best_drop = -1, 0.0
        for i in range(n):
            if counts[i] >= c_max:
                continue
            drop = responses[i] - node_response(i, counts[i] + 1)
            if drop > best_drop:
                best, best_drop = i, drop
        if best < 0:
            raise Infeasible("no node can grow further")  # guarded by the cap check
        counts[best] += 1
        responses[best] = node_response(best, counts[best])
        current = math.fsum(responses) + chain.propagation_delay
        trace.append(GreedyStep(best, chain.nodes[best].name, counts[best], best_drop))

    convex = True
    for i in range(n):
        lo, hi = floors[i] + 1, max(counts[i], floors[i] + 1)
        report = qnet.convexity_check(chain.nodes[i], float(alpha[i]), range(lo, hi + 1))
        convex = convex and report.convex
    current = qnet.csd(chain, counts)
    return AllocationResult(tuple(counts), current, len(trace), tuple(trace), floors, convex)
