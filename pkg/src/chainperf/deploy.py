"""Availability models for containerized node deployments.

A network redundancy unit (NR) is a five-layer stack: hardware,
hypervisor, virtual machine, docker daemon and a bounded number of
service containers. A failed layer instantly pulls down every layer
above it, and a layer can only be repaired while the layer underneath
is up, so recovery proceeds bottom-up through the stack. Co-located
NRs run two container families in sibling VM stacks over one shared
hypervisor and hardware.

NRs inside a node fail independently, so the node's distribution of up
containers is the convolution of per-NR distributions and the node is
available when at least the reward threshold of containers survives.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import srn
from .errors import DegenerateDeploymentWarning

NR_CONTAINER_CAP = 6
HOMOGENEOUS = "homogeneous"
COLOCATED = "co-located"

_STACK = ("phy", "hyp", "vm", "dck", "cnt")  # bottom-up


@dataclass(frozen=True)
class LayerParams:
    """Failure and repair behaviour of one stack layer, in hours."""

    mttf_h: float
    mttr_h: float

    def __post_init__(self):
        if not (self.mttf_h > 0 and self.mttr_h > 0):
            raise ValueError("MTTF and MTTR must be > 0")

    @property
    def failure_rate(self) -> float:
        return 1.0 / self.mttf_h

    @property
    def repair_rate(self) -> float:
        return 1.0 / self.mttr_h


@dataclass(frozen=True)
class LayerRates:
    """Per-layer failure and repair parameters for a full NR stack."""

    cnt: LayerParams
    dck: LayerParams
    vm: LayerParams
    hyp: LayerParams
    phy: LayerParams

    def layer(self, name: str) -> LayerParams:
        return getattr(self, name)


def _add_stack(model: srn.SrnModel, rates: LayerRates, layers: Sequence[str],
               below: dict[str, str | None], n_cnt: int, suffix: str = "",
               active: bool = True) -> None:
    for layer in layers:
        tokens = n_cnt if layer == "cnt" else 1
        model.add_place(f"{layer}{suffix}_up", tokens)
        model.add_place(f"{layer}{suffix}_dn", 0)
    if not active:
        return
    for layer in layers:
        params = rates.layer(layer)
        tag = f"{layer}{suffix}"
        under = below[layer]
        dependent = layer == "cnt"
        model.add_timed(f"fail_{tag}", params.failure_rate,
                        inputs=[f"{tag}_up"], outputs=[f"{tag}_dn"],
                        marking_dependent=dependent)
        repair_inh = [] if under is None else [(f"{under}_dn", 1)]
        model.add_timed(f"repair_{tag}", params.repair_rate,
                        inputs=[f"{tag}_dn"], outputs=[f"{tag}_up"],
                        inhibitors=repair_inh, marking_dependent=dependent)
        if under is not None:
            # An empty up-place underneath means that layer is down, which
            # instantly drags this layer's tokens down with it.
            model.add_immediate(f"drop_{tag}", inputs=[f"{tag}_up"],
                                outputs=[f"{tag}_dn"],
                                inhibitors=[(f"{under}_up", 1)])


def build_homog_nr(n_cnt: int, rates: LayerRates,
                   cap: int = NR_CONTAINER_CAP) -> srn.SrnModel:
    """Net for one NR hosting `n_cnt` containers of a single service."""
    if not 1 <= n_cnt <= cap:
        raise ValueError(f"container count {n_cnt} outside 1..{cap}")
    model = srn.SrnModel(f"nr_homog_{n_cnt}")
    below = {"phy": None, "hyp": "phy", "vm": "hyp", "dck": "vm", "cnt": "dck"}
    _add_stack(model, rates, _STACK, below, n_cnt)
    return model


def build_coloc_nr(n_first: int, n_second: int, rates: LayerRates,
                   cap: int = NR_CONTAINER_CAP) -> srn.SrnModel:
    """Net for one co-located NR hosting two container families.

    Each family gets its own VM/docker/container stack; hypervisor and
    hardware are shared. A family with a zero count keeps its places
    but has no transitions, leaving the rest of the net untouched.
    """
    for n in (n_first, n_second):
        if not 0 <= n <= cap:
            raise ValueError(f"container count {n} outside 0..{cap}")
    if n_first + n_second < 1:
        raise ValueError("a co-located NR needs at least one container")
    model = srn.SrnModel(f"nr_coloc_{n_first}_{n_second}")
    shared_below = {"phy": None, "hyp": "phy"}
    _add_stack(model, rates, ("phy", "hyp"), shared_below, 0)
    for suffix, count in (("", n_first), ("2", n_second)):
        below = {"vm": "hyp", "dck": f"vm{suffix}", "cnt": f"dck{suffix}"}
        _add_stack(model, rates, ("vm", "dck", "cnt"), below, count,
                   suffix=suffix, active=count > 0)
    return model


def nr_up_pmf(state: srn.SteadyState) -> np.ndarray:
    """Distribution of up containers in a solved NR.

    Returns a vector P(k up) for a homogeneous NR and a matrix
    P(i up, j up) over the two families for a co-located NR.
    """
    if "cnt2_up" in state.place_names:
        return state.joint_token_pmf("cnt_up", "cnt2_up")
    return state.token_pmf("cnt_up")


@lru_cache(maxsize=None)
def _homog_pmf_cached(n_cnt: int, rates: LayerRates, cap: int) -> tuple[float, ...]:
    state = srn.solve(build_homog_nr(n_cnt, rates, cap))
    pmf = nr_up_pmf(state)
    full = np.zeros(n_cnt + 1)
    full[: pmf.size] = pmf
    return tuple(full)


@lru_cache(maxsize=None)
def _coloc_pmf_cached(n_first: int, n_second: int, rates: LayerRates,
                      cap: int) -> tuple[tuple[float, ...], ...]:
    state = srn.solve(build_coloc_nr(n_first, n_second, rates, cap))
    pmf = nr_up_pmf(state)
    full = np.zeros((n_first + 1, n_second + 1))
    full[: pmf.shape[0], : pmf.shape[1]] = pmf
    return tuple(map(tuple, full))


def homog_nr_pmf(n_cnt: int, rates: LayerRates, cap: int = NR_CONTAINER_CAP) -> np.ndarray:
    """Up-container pmf of a homogeneous NR, indexed 0..n_cnt."""
    return np.array(_homog_pmf_cached(n_cnt, rates, cap))


def coloc_nr_pmf(n_first: int, n_second: int, rates: LayerRates,
                 cap: int = NR_CONTAINER_CAP) -> np.ndarray:
    """Joint up-container pmf of a co-located NR, shape (n1+1, n2+1)."""
    return np.array(_coloc_pmf_cached(n_first, n_second, rates, cap))


def _convolve2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for (i, j), v in np.ndenumerate(a):
        if v:
            out[i : i + b.shape[0], j : j + b.shape[1]] += v * b
    return out


def node_availability(pmfs: Sequence[np.ndarray], threshold: int) -> float:
    """P(total up containers >= threshold) across independent NRs."""
    total = np.ones(1)
    for pmf in pmfs:
        total = np.convolve(total, pmf)
    if threshold <= 0:
        return 1.0
    if threshold >= total.size:
        warnings.warn(
            f"threshold {threshold} exceeds deployed capacity {total.size - 1}",
            DegenerateDeploymentWarning, stacklevel=2,
        )
        return 0.0
    return float(total[threshold:].sum())


def coloc_availability(pmfs: Sequence[np.ndarray], threshold_first: int,
                       threshold_second: int) -> float:
    """P(both families meet their thresholds) in a co-located node group."""
    total = np.ones((1, 1))
    for pmf in pmfs:
        total = _convolve2(total, pmf)
    t1, t2 = max(threshold_first, 0), max(threshold_second, 0)
    if t1 >= total.shape[0] or t2 >= total.shape[1]:
        warnings.warn(
            f"thresholds ({threshold_first}, {threshold_second}) exceed deployed "
            f"capacity ({total.shape[0] - 1}, {total.shape[1] - 1})",
            DegenerateDeploymentWarning, stacklevel=2,
        )
        return 0.0
    return float(total[t1:, t2:].sum())


@dataclass(frozen=True)
class DeploymentConfig:
    """Redundancy layout of a whole chain.

    `node_nrs` lists, per standalone node in chain order, the container
    count of each of its NRs. For a co-located deployment the `pair`
    nodes are served by the shared `pair_nrs` group instead, each entry
    giving that NR's container counts for (first, second) pair node.
    `thresholds` holds every node's reward threshold.
    """

    deployment_type: str
    node_nrs: tuple[tuple[str, tuple[int, ...]], ...]
    thresholds: tuple[tuple[str, int], ...]
    pair: tuple[str, str] | None = None
    pair_nrs: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.deployment_type not in (HOMOGENEOUS, COLOCATED):
            raise ValueError(f"unknown deployment type {self.deployment_type!r}")
        if (self.deployment_type == COLOCATED) != (self.pair is not None):
            raise ValueError("co-located deployments need a node pair, others must not have one")
        if (self.pair is None) != (self.pair_nrs is None):
            raise ValueError("pair and pair_nrs go together")
        for node, counts in self.node_nrs:
            if any(c < 1 for c in counts):
                raise ValueError(f"node {node}: NR container counts must be >= 1")
        if self.pair_nrs:
            for first, second in self.pair_nrs:
                if first < 0 or second < 0 or first + second < 1:
                    raise ValueError("each co-located NR needs at least one container")
        names = [node for node, _ in self.node_nrs]
        if self.pair:
            names.extend(self.pair)
        thr_names = [node for node, _ in self.thresholds]
        if sorted(names) != sorted(thr_names):
            raise ValueError("thresholds must cover exactly the deployed nodes")

    def threshold(self, node: str) -> int:
        for name, value in self.thresholds:
            if name == node:
                return value
        raise KeyError(node)

    @property
    def nr_count(self) -> int:
        count = sum(len(counts) for _, counts in self.node_nrs)
        if self.pair_nrs:
            count += len(self.pair_nrs)
        return count

    @property
    def container_count(self) -> int:
        total = sum(sum(counts) for _, counts in self.node_nrs)
        if self.pair_nrs:
            total += sum(a + b for a, b in self.pair_nrs)
        return total


def cost(config: DeploymentConfig) -> int:
    """Deployment cost: two units per NR plus one per container."""
    return 2 * config.nr_count + config.container_count


@dataclass(frozen=True)
class AvailabilityReport:
    """Chain availability with its per-node breakdown."""

    per_node: tuple[tuple[str, float], ...]
    group: float | None
    chain: float
    cost: int

    def node(self, name: str) -> float:
        for node, value in self.per_node:
            if node == name:
                return value
        raise KeyError(name)


def chain_availability(config: DeploymentConfig, rates: LayerRates,
                       cap: int = NR_CONTAINER_CAP) -> AvailabilityReport:
    """Steady-state availability of a deployed chain.

    Nodes fail independently given the NR independence, so the chain is
    available when every node (and the co-located group, if any) meets
    its threshold simultaneously.
    """
    per_node = []
    factors = []
    for node, counts in config.node_nrs:
        pmfs = [homog_nr_pmf(c, rates, cap) for c in counts]
        a = node_availability(pmfs, config.threshold(node))
        per_node.append((node, a))
        factors.append(a)
    group = None
    if config.pair is not None:
        pmfs = [coloc_nr_pmf(a, b, rates, cap) for a, b in config.pair_nrs]
        group = coloc_availability(
            pmfs, config.threshold(config.pair[0]), config.threshold(config.pair[1])
        )
        factors.append(group)
    chain = math.prod(factors)
    return AvailabilityReport(tuple(per_node), group, chain, cost(config))


def leading_nines(availability: float) -> int:
    """Number of leading nines, e.g. 0.99991 has four."""
    if availability >= 1.0:
        raise ValueError("availability must be < 1")
    if availability <= 0.0:
        return 0
    gap = 1.0 - availability
    return max(0, int(math.floor(-math.log10(gap) + 1e-9)))
