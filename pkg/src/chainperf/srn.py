"""Stochastic reward net engine.

Nets are built from places, exponential timed transitions and
prioritized immediate transitions, with inhibitor arcs on both kinds.
`reachability` explores the tangible markings, eliminating vanishing
markings on the fly, and `steady_state` solves the resulting CTMC with
the Grassmann-Taksar-Heyman elimination, which uses no subtractions and
therefore keeps tiny probabilities accurate.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ImmediateCycle, NumericalError, Reducible, StateSpaceOverflow

Marking = tuple[int, ...]
_Arc = tuple[int, int]

DEFAULT_MARKING_CAP = 1_000_000
_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class TimedTransition:
    name: str
    rate: float
    inputs: tuple[_Arc, ...]
    outputs: tuple[_Arc, ...]
    inhibitors: tuple[_Arc, ...]
    marking_dependent: bool


@dataclass(frozen=True)
class ImmediateTransition:
    name: str
    priority: int
    weight: float
    inputs: tuple[_Arc, ...]
    outputs: tuple[_Arc, ...]
    inhibitors: tuple[_Arc, ...]


class SrnModel:
    """Mutable builder for a stochastic reward net.

    Arcs are given as place names or (name, multiplicity) pairs. An
    inhibitor (p, k) disables its transition whenever place p holds at
    least k tokens. A marking-dependent timed transition must have a
    single unit-weight input place; its effective rate is the base rate
    times the tokens in that place.
    """

    def __init__(self, name: str = "srn"):
        self.name = name
        self.places: list[str] = []
        self.initial: list[int] = []
        self._index: dict[str, int] = {}
        self.timed: list[TimedTransition] = []
        self.immediate: list[ImmediateTransition] = []

    def add_place(self, name: str, tokens: int = 0) -> None:
        if name in self._index:
            raise ValueError(f"duplicate place {name!r}")
        if tokens < 0:
            raise ValueError(f"place {name!r}: initial tokens must be >= 0")
        self._index[name] = len(self.places)
        self.places.append(name)
        self.initial.append(int(tokens))

    def place_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValueError(f"unknown place {name!r}") from None

    def _arcs(self, specs: Iterable) -> tuple[_Arc, ...]:
        arcs = []
        for spec in specs:
            if isinstance(spec, str):
                name, mult = spec, 1
            else:
                name, mult = spec
            if mult < 1:
                raise ValueError(f"arc on {name!r}: multiplicity must be >= 1")
            arcs.append((self.place_index(name), int(mult)))
        return tuple(arcs)

    def add_timed(self, name: str, rate: float, inputs: Iterable = (),
                  outputs: Iterable = (), inhibitors: Iterable = (),
                  marking_dependent: bool = False) -> None:
        if not (rate > 0):
            raise ValueError(f"transition {name!r}: rate must be > 0")
        t = TimedTransition(name, float(rate), self._arcs(inputs),
                            self._arcs(outputs), self._arcs(inhibitors),
                            marking_dependent)
        if marking_dependent and (len(t.inputs) != 1 or t.inputs[0][1] != 1):
            raise ValueError(
                f"transition {name!r}: marking dependence needs exactly one unit input"
            )
        self.timed.append(t)

    def add_immediate(self, name: str, inputs: Iterable = (), outputs: Iterable = (),
                      inhibitors: Iterable = (), priority: int = 1,
                      weight: float = 1.0) -> None:
        if priority < 1:
            raise ValueError(f"transition {name!r}: priority must be >= 1")
        if not (weight > 0):
            raise ValueError(f"transition {name!r}: weight must be > 0")
        self.immediate.append(
            ImmediateTransition(name, int(priority), float(weight),
                                self._arcs(inputs), self._arcs(outputs),
                                self._arcs(inhibitors))
        )

    def initial_marking(self) -> Marking:
        return tuple(self.initial)


def _enabled(marking: Marking, inputs: tuple[_Arc, ...], inhibitors: tuple[_Arc, ...]) -> bool:
    for place, mult in inputs:
        if marking[place] < mult:
            return False
    for place, threshold in inhibitors:
        if marking[place] >= threshold:
            return False
    return True


def _fire(marking: Marking, inputs: tuple[_Arc, ...], outputs: tuple[_Arc, ...]) -> Marking:
    m = list(marking)
    for place, mult in inputs:
        m[place] -= mult
    for place, mult in outputs:
        m[place] += mult
    return tuple(m)


@dataclass
class Ctmc:
    """Tangible continuous-time Markov chain extracted from a net."""

    place_names: tuple[str, ...]
    markings: tuple[Marking, ...]
    rates: dict[tuple[int, int], float]
    initial: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.markings)

    def generator(self) -> np.ndarray:
        q = np.zeros((self.n, self.n))
        for (i, j), rate in self.rates.items():
            q[i, j] += rate
        np.fill_diagonal(q, 0.0)
        q[np.diag_indices(self.n)] = -q.sum(axis=1)
        return q

    def edge_list_text(self) -> str:
        """Plain-text edges, one `src dst rate` per line, for diffing."""
        lines = [f"{i} {j} {rate:.12g}" for (i, j), rate in sorted(self.rates.items())]
        return "\n".join(lines) + "\n"

    def marking_table_text(self) -> str:
        lines = []
        for i, marking in enumerate(self.markings):
            tokens = " ".join(
                f"{name}={count}"
                for name, count in zip(self.place_names, marking) if count
            )
            lines.append(f"{i}: {tokens or '-'}")
        return "\n".join(lines) + "\n"


def reachability(model: SrnModel, max_markings: int = DEFAULT_MARKING_CAP) -> Ctmc:
    """Explore the tangible state space of a net.

    Vanishing markings (any immediate transition enabled) are resolved
    into distributions over tangible successors; only the highest
    enabled priority fires, with weights splitting equal-priority
    conflicts. Cycles of immediate firings raise ImmediateCycle, and
    exploring past `max_markings` raises StateSpaceOverflow.
    """
    closure_cache: dict[Marking, dict[Marking, float]] = {}
    seen = 0

    def resolve(marking: Marking, path: frozenset) -> dict[Marking, float]:
        cached = closure_cache.get(marking)
        if cached is not None:
            return cached
        enabled = [t for t in model.immediate
                   if _enabled(marking, t.inputs, t.inhibitors)]
        if not enabled:
            result = {marking: 1.0}
            closure_cache[marking] = result
            return result
        if marking in path:
            raise ImmediateCycle(
                f"immediate transitions cycle through marking {marking}"
            )
        nonlocal seen
        seen += 1
        if seen > max_markings:
            raise StateSpaceOverflow(f"more than {max_markings} markings explored")
        top = max(t.priority for t in enabled)
        firing = [t for t in enabled if t.priority == top]
        total_weight = math.fsum(t.weight for t in firing)
        result: dict[Marking, float] = {}
        down = path | {marking}
        for t in firing:
            share = t.weight / total_weight
            for tangible, p in resolve(_fire(marking, t.inputs, t.outputs), down).items():
                result[tangible] = result.get(tangible, 0.0) + share * p
        closure_cache[marking] = result
        return result

    index: dict[Marking, int] = {}
    markings: list[Marking] = []
    queue: deque[Marking] = deque()

    def intern(marking: Marking) -> int:
        idx = index.get(marking)
        if idx is None:
            if len(markings) >= max_markings:
                raise StateSpaceOverflow(f"more than {max_markings} tangible markings")
            idx = len(markings)
            index[marking] = idx
            markings.append(marking)
            queue.append(marking)
        return idx

    initial = resolve(model.initial_marking(), frozenset())
    init_probs: dict[int, float] = {}
    for marking, p in initial.items():
        init_probs[intern(marking)] = p

    rates: dict[tuple[int, int], float] = {}
    while queue:
        marking = queue.popleft()
        i = index[marking]
        for t in model.timed:
            if not _enabled(marking, t.inputs, t.inhibitors):
                continue
            rate = t.rate
            if t.marking_dependent:
                rate *= marking[t.inputs[0][0]]
            successor = _fire(marking, t.inputs, t.outputs)
            for tangible, p in resolve(successor, frozenset()).items():
                j = intern(tangible)
                if j == i:
                    continue
                key = (i, j)
                rates[key] = rates.get(key, 0.0) + rate * p

    init = [0.0] * len(markings)
    for idx, p in init_probs.items():
        init[idx] = p
    return Ctmc(tuple(model.places), tuple(markings), rates, tuple(init))


def _bottom_scc(n: int, rates: dict[tuple[int, int], float]) -> list[int]:
    """States of the unique recurrent class; Reducible if there are two."""
    succ: list[list[int]] = [[] for _ in range(n)]
    for (i, j), rate in rates.items():
        if rate > 0 and i != j:
            succ[i].append(j)

    # Tarjan's algorithm, iterative to keep large chains off the Python stack.
    order = [0] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 1
    ncomp = 0
    for root in range(n):
        if order[root]:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                order[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while pi < len(succ[v]):
                w = succ[v][pi]
                pi += 1
                if not order[w]:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], order[w])
            if advanced:
                continue
            work.pop()
            if low[v] == order[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
            if work:
                u, _ = work[-1]
                low[u] = min(low[u], low[v])

    leaves = [True] * ncomp
    for (i, j), rate in rates.items():
        if rate > 0 and comp[i] != comp[j]:
            leaves[comp[i]] = False
    bottoms = [c for c in range(ncomp) if leaves[c]]
    if len(bottoms) != 1:
        raise Reducible(f"tangible chain has {len(bottoms)} recurrent classes")
    return [i for i in range(n) if comp[i] == bottoms[0]]


def _gth(rate_matrix: np.ndarray) -> np.ndarray:
    """Steady state of an irreducible CTMC given off-diagonal rates.

    Grassmann-Taksar-Heyman elimination: censors states from the last
    to the first using only additions, multiplications and divisions,
    then unrolls the censored probabilities by back substitution.
    """
    r = np.array(rate_matrix, dtype=float)
    np.fill_diagonal(r, 0.0)
    n = r.shape[0]
    if n == 1:
        return np.ones(1)
    departures = np.empty(n)
    for k in range(n - 1, 0, -1):
        s = r[k, :k].sum()
        if s <= 0:
            raise Reducible(f"state {k} cannot reach the states below it")
        departures[k] = s
        r[:k, :k] += np.outer(r[:k, k], r[k, :k]) / s
        np.fill_diagonal(r[:k, :k], 0.0)
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = (pi[:k] @ r[:k, k]) / departures[k]
    return pi / pi.sum()


@dataclass
class SteadyState:
    """Steady-state distribution over tangible markings."""

    place_names: tuple[str, ...]
    markings: tuple[Marking, ...]
    probabilities: np.ndarray

    def _place(self, name: str) -> int:
        try:
            return self.place_names.index(name)
        except ValueError:
            raise ValueError(f"unknown place {name!r}") from None

    def token_pmf(self, place: str) -> np.ndarray:
        """P(tokens in place = k) as a dense vector over k."""
        idx = self._place(place)
        top = max(m[idx] for m in self.markings)
        pmf = np.zeros(top + 1)
        for marking, p in zip(self.markings, self.probabilities):
            pmf[marking[idx]] += p
        return pmf

    def joint_token_pmf(self, place_a: str, place_b: str) -> np.ndarray:
        ia, ib = self._place(place_a), self._place(place_b)
        top_a = max(m[ia] for m in self.markings)
        top_b = max(m[ib] for m in self.markings)
        pmf = np.zeros((top_a + 1, top_b + 1))
        for marking, p in zip(self.markings, self.probabilities):
            pmf[marking[ia], marking[ib]] += p
        return pmf


def steady_state(ctmc: Ctmc) -> SteadyState:
    """Solve the tangible chain for its stationary distribution.

    The chain must have a single recurrent class; transient states get
    probability zero. The result is verified against the generator to
    an infinity-norm residual below 1e-10.
    """
    n = ctmc.n
    if n == 0:
        raise ValueError("empty chain")
    probs = np.zeros(n)
    if n == 1:
        probs[0] = 1.0
    else:
        recurrent = _bottom_scc(n, ctmc.rates)
        sub = np.zeros((len(recurrent), len(recurrent)))
        pos = {s: i for i, s in enumerate(recurrent)}
        for (i, j), rate in ctmc.rates.items():
            if i in pos and j in pos:
                sub[pos[i], pos[j]] += rate
        probs[recurrent] = _gth(sub)
    residual = float(np.abs(probs @ ctmc.generator()).max())
    if residual > _RESIDUAL_TOL:
        raise NumericalError(f"steady-state residual {residual:.3e} exceeds {_RESIDUAL_TOL}")
    return SteadyState(ctmc.place_names, ctmc.markings, probs)


def solve(model: SrnModel, max_markings: int = DEFAULT_MARKING_CAP) -> SteadyState:
    """Reachability plus steady state in one call."""
    return steady_state(reachability(model, max_markings))


def expected_reward(state: SteadyState, reward: Callable[[Marking], float]) -> float:
    """Expectation of a marking-level reward under the steady state."""
    return math.fsum(
        reward(m) * float(p) for m, p in zip(state.markings, state.probabilities)
    )
