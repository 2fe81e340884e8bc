"""Open queueing-network analysis for a chain of multi-server service nodes.

Each node is an M/G/c station fed by the chain's routing structure. The
module solves the arrival-rate balance equations, evaluates per-node
waiting times with the Cosmetatos interpolation between the M/M/c and
M/D/c queues, and sums per-node response times into the end-to-end
chain service delay (CSD).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ApproximationWarning, SingularRouting, Unstable

# A node counts as saturated once rho crosses this; avoids dividing by a
# denominator that is zero up to roundoff.
STABILITY_EPS = 1e-9

_BALANCE_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class NodeSpec:
    """One service node: mean service time in seconds and its CV."""

    name: str
    mean_service_time: float
    cv: float = 1.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("node name must be non-empty")
        if not (self.mean_service_time > 0):
            raise ValueError(f"node {self.name}: mean_service_time must be > 0")
        if self.cv < 0:
            raise ValueError(f"node {self.name}: cv must be >= 0")


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """A service chain: nodes, substochastic routing and external traffic.

    `routing[i][j]` is the probability that a request leaving node i
    proceeds to node j; row sums below one send the remainder out of the
    chain. `external_arrivals[i]` is the exogenous rate into node i in
    requests per second.
    """

    nodes: tuple[NodeSpec, ...]
    routing: np.ndarray
    external_arrivals: np.ndarray
    csd_target: float
    c_max: int = 10
    propagation_delay: float = 0.0

    def __post_init__(self):
        n = len(self.nodes)
        if n == 0:
            raise ValueError("chain needs at least one node")
        routing = np.asarray(self.routing, dtype=float)
        ext = np.asarray(self.external_arrivals, dtype=float)
        object.__setattr__(self, "routing", routing)
        object.__setattr__(self, "external_arrivals", ext)
        if routing.shape != (n, n):
            raise ValueError(f"routing must be {n}x{n}, got {routing.shape}")
        if (routing < 0).any():
            raise ValueError("routing probabilities must be >= 0")
        row_sums = routing.sum(axis=1)
        if (row_sums > 1 + 1e-12).any():
            bad = int(np.argmax(row_sums))
            raise ValueError(
                f"routing row {self.nodes[bad].name} sums to {row_sums[bad]:.6f} > 1"
            )
        if ext.shape != (n,):
            raise ValueError(f"external_arrivals must have length {n}")
        if (ext < 0).any():
            raise ValueError("external arrival rates must be >= 0")
        if not (self.csd_target > 0):
            raise ValueError("csd_target must be > 0")
        if self.c_max < 1:
            raise ValueError("c_max must be >= 1")
        if self.propagation_delay < 0:
            raise ValueError("propagation_delay must be >= 0")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(node.name for node in self.nodes)

    @property
    def alpha_ext(self) -> float:
        """Total exogenous arrival rate into the chain."""
        return float(self.external_arrivals.sum())

    def scaled_to(self, alpha_ext: float) -> "ChainSpec":
        """Chain with the external-arrival pattern rescaled to `alpha_ext`."""
        current = self.alpha_ext
        if current <= 0:
            raise ValueError("cannot rescale a chain with zero external traffic")
        return replace(self, external_arrivals=self.external_arrivals * (alpha_ext / current))

    @staticmethod
    def tandem(
        nodes: Sequence[NodeSpec],
        alpha_ext: float,
        csd_target: float,
        c_max: int = 10,
        propagation_delay: float = 0.0,
    ) -> "ChainSpec":
        """Chain where all traffic enters node 0 and flows node-to-node."""
        n = len(nodes)
        routing = np.zeros((n, n))
        for i in range(n - 1):
            routing[i, i + 1] = 1.0
        ext = np.zeros(n)
        ext[0] = alpha_ext
        return ChainSpec(tuple(nodes), routing, ext, csd_target, c_max, propagation_delay)


@dataclass(frozen=True)
class NodeLoad:
    """Operating point of one node: arrival rate against c containers."""

    arrival_rate: float
    containers: int
    utilization: float
    stable: bool


def node_load(node: NodeSpec, arrival_rate: float, containers: int) -> NodeLoad:
    if containers < 1:
        raise ValueError(f"node {node.name}: containers must be >= 1")
    if arrival_rate < 0:
        raise ValueError(f"node {node.name}: arrival rate must be >= 0")
    rho = arrival_rate * node.mean_service_time / containers
    return NodeLoad(arrival_rate, containers, rho, rho < 1 - STABILITY_EPS)


def solve_arrival_rates(chain: ChainSpec) -> np.ndarray:
    """Per-node total arrival rates from the flow balance equations.

    Solves alpha = alpha_ext + P^T alpha. The routing must be strictly
    substochastic in spectrum so the solution exists and is unique.
    """
    p = chain.routing
    n = p.shape[0]
    if n > 1:
        radius = max(abs(np.linalg.eigvals(p)))
        if radius >= 1 - 1e-12:
            raise SingularRouting(
                f"routing spectral radius {radius:.6f} >= 1; traffic never leaves the chain"
            )
    elif p[0, 0] >= 1 - 1e-12:
        raise SingularRouting("single node routes all traffic back to itself")
    try:
        alpha = np.linalg.solve(np.eye(n) - p.T, chain.external_arrivals)
    except np.linalg.LinAlgError as exc:
        raise SingularRouting(f"balance equations are singular: {exc}") from exc
    residual = np.abs(alpha - chain.external_arrivals - p.T @ alpha).max()
    scale = max(1.0, float(np.abs(alpha).max()))
    if residual > _BALANCE_RESIDUAL_TOL * scale:
        raise SingularRouting(f"balance residual {residual:.3e} too large")
    if (alpha < -1e-12 * scale).any():
        raise SingularRouting("balance solution has negative arrival rates")
    return np.maximum(alpha, 0.0)


def erlang_c(c: int, offered_load: float) -> float:
    """Probability that an arrival to an M/M/c queue must wait.

    Evaluated through the Erlang-B recurrence, which stays well
    conditioned for large c where the factorial form overflows.
    """
    if c < 1 or c != int(c):
        raise ValueError("server count must be a positive integer")
    if offered_load < 0:
        raise ValueError("offered load must be >= 0")
    if offered_load == 0:
        return 0.0
    rho = offered_load / c
    if rho >= 1 - STABILITY_EPS:
        raise Unstable(f"offered load {offered_load:g} saturates {c} servers")
    b = 1.0
    for k in range(1, int(c) + 1):
        b = offered_load * b / (k + offered_load * b)
    return b / (1 - rho * (1 - b))


def wait_mmc(arrival_rate: float, mean_service_time: float, c: int) -> float:
    """Mean waiting time in an M/M/c queue, seconds."""
    if arrival_rate == 0:
        return 0.0
    a = arrival_rate * mean_service_time
    rho = a / c
    if rho >= 1 - STABILITY_EPS:
        raise Unstable(f"utilization {rho:.4f} with {c} servers")
    pi_wait = erlang_c(c, a)
    return pi_wait * rho / (arrival_rate * (1 - rho))


def cosmetatos_factor(c: int, rho: float) -> float:
    """Correction factor relating the M/M/c and M/D/c waiting times."""
    if c < 1:
        raise ValueError("server count must be >= 1")
    if not (0 < rho < 1):
        raise ValueError("utilization must lie in (0, 1)")
    return 1.0 / (1.0 + (1 - rho) * (c - 1) * (math.sqrt(4 + 5 * c) - 2) / (16 * rho * c))


def wait_mdc(arrival_rate: float, mean_service_time: float, c: int) -> float:
    """Mean waiting time in an M/D/c queue via the Cosmetatos correction."""
    if arrival_rate == 0:
        return 0.0
    rho = arrival_rate * mean_service_time / c
    if rho >= 1 - STABILITY_EPS:
        raise Unstable(f"utilization {rho:.4f} with {c} servers")
    return wait_mmc(arrival_rate, mean_service_time, c) / (2 * cosmetatos_factor(c, rho))


def wait_mgc(arrival_rate: float, mean_service_time: float, cv: float, c: int) -> float:
    """Approximate mean waiting time in an M/G/c queue.

    Interpolates between the exponential and deterministic queues on the
    squared coefficient of variation of the service time. The fit is
    calibrated for utilization >= 0.6 and c <= 10; outside that range a
    warning is emitted and the value is still returned.
    """
    if cv < 0:
        raise ValueError("cv must be >= 0")
    if arrival_rate == 0:
        return 0.0
    rho = arrival_rate * mean_service_time / c
    if rho >= 1 - STABILITY_EPS:
        raise Unstable(f"utilization {rho:.4f} with {c} servers")
    if rho < 0.6 or c > 10:
        warnings.warn(
            "M/G/c interpolation used outside its calibrated range "
            "(utilization below 0.6 or more than 10 servers)",
            ApproximationWarning,
            stacklevel=2,
        )
    cv2 = cv * cv
    w_exp = wait_mmc(arrival_rate, mean_service_time, c)
    w_det = w_exp / (2 * cosmetatos_factor(c, rho))
    return cv2 * w_exp + (1 - cv2) * w_det


def response_time(node: NodeSpec, load: NodeLoad) -> float:
    """Mean response time (service plus waiting) of one node, seconds."""
    if not load.stable:
        raise Unstable(
            f"node {node.name}: utilization {load.utilization:.4f} "
            f"with {load.containers} containers"
        )
    wait = wait_mgc(load.arrival_rate, node.mean_service_time, node.cv, load.containers)
    return node.mean_service_time + wait


@dataclass(frozen=True)
class NodeReport:
    """Per-node operating point and delay figures for one allocation."""

    name: str
    arrival_rate: float
    containers: int
    utilization: float
    wait: float
    response: float


@dataclass(frozen=True)
class ChainReport:
    nodes: tuple[NodeReport, ...]
    csd: float


def analyze(chain: ChainSpec, allocation: Sequence[int]) -> ChainReport:
    """Evaluate every node of the chain under a container allocation."""
    counts = list(allocation)
    if len(counts) != len(chain.nodes):
        raise ValueError(
            f"allocation has {len(counts)} entries for {len(chain.nodes)} nodes"
        )
    alpha = solve_arrival_rates(chain)
    rows = []
    for node, rate, c in zip(chain.nodes, alpha, counts):
        load = node_load(node, float(rate), int(c))
        if not load.stable:
            raise Unstable(
                f"node {node.name}: utilization {load.utilization:.4f} with {c} containers"
            )
        resp = response_time(node, load)
        rows.append(
            NodeReport(node.name, load.arrival_rate, load.containers,
                       load.utilization, resp - node.mean_service_time, resp)
        )
    total = math.fsum(r.response for r in rows) + chain.propagation_delay
    return ChainReport(tuple(rows), total)


def csd(chain: ChainSpec, allocation: Sequence[int]) -> float:
    """End-to-end chain service delay under an allocation, seconds."""
    return analyze(chain, allocation).csd


@dataclass(frozen=True)
class ConvexityReport:
    """Second differences of E[T](c) over a container range."""

    node: str
    arrival_rate: float
    points: tuple[tuple[int, float], ...]
    convex: bool

    @property
    def negative_points(self) -> tuple[int, ...]:
        return tuple(c for c, d2 in self.points if d2 < -1e-15)


def convexity_check(node: NodeSpec, arrival_rate: float, c_values: Iterable[int]) -> ConvexityReport:
    """Check discrete convexity of the response time in the server count.

    For each c in `c_values` computes E[T](c-1) - 2 E[T](c) + E[T](c+1);
    all three points must be stable. A negative value means the greedy
    allocation loses its optimality guarantee at that point.
    """
    points = []
    for c in c_values:
        vals = []
        for k in (c - 1, c, c + 1):
            load = node_load(node, arrival_rate, k)
            vals.append(response_time(node, load))
        points.append((int(c), vals[0] - 2 * vals[1] + vals[2]))
    convex = all(d2 >= -1e-15 for _, d2 in points)
    return ConvexityReport(node.name, arrival_rate, tuple(points), convex)
