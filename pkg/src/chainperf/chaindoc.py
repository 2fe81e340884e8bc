"""Chain document parsing, validation and round-trip serialization.

A chain document is a YAML key tree with explicit unit suffixes on
every dimensioned key (`_s` seconds, `_h` hours, `_per_s` rate). The
schema is closed: unknown keys anywhere are rejected, with the error
naming the offending path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import deploy, qnet, search
from .errors import SchemaError

_LAYER_NAMES = ("cnt", "dck", "vm", "hyp", "phy")


def _require(mapping: dict, path: str, required: tuple[str, ...],
             optional: tuple[str, ...] = ()) -> None:
    if not isinstance(mapping, dict):
        raise SchemaError(f"{path}: expected a mapping")
    for key in mapping:
        if key not in required and key not in optional:
            raise SchemaError(f"{path}.{key}: unknown key")
    for key in required:
        if key not in mapping:
            raise SchemaError(f"{path}.{key}: missing required field")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}: expected a number")
    return float(value)


def _positive(value, path: str) -> float:
    number = _number(value, path)
    if not number > 0:
        raise SchemaError(f"{path}: must be > 0")
    return number


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}: expected an integer")
    return value


@dataclass(frozen=True)
class SearchSettings:
    """Search block of a document; caps and pruning multipliers."""

    max_nrs_per_node: int = 4
    max_containers_per_nr: int = 6
    cost_share_first: float = 0.5
    cost_share_first_two: float = 0.75
    pair: tuple[str, str] | None = None


@dataclass(frozen=True, eq=False)
class ChainDocument:
    """Parsed, validated chain document."""

    chain: qnet.ChainSpec
    rates: deploy.LayerRates
    availability_target: float
    thresholds: tuple[tuple[str, int], ...] | None
    deployments: tuple[tuple[str, deploy.DeploymentConfig], ...]
    search: SearchSettings

    def deployment(self, name: str) -> deploy.DeploymentConfig:
        for key, config in self.deployments:
            if key == name:
                return config
        raise SchemaError(f"deployments.{name}: no such deployment block")

    def search_params(self, thresholds: tuple[tuple[str, int], ...],
                      deployment_type: str) -> search.SearchParams:
        pair = self.search.pair if deployment_type == deploy.COLOCATED else None
        return search.SearchParams(
            availability_target=self.availability_target,
            thresholds=thresholds,
            deployment_type=deployment_type,
            pair=pair,
            max_nrs_per_node=self.search.max_nrs_per_node,
            max_containers_per_nr=self.search.max_containers_per_nr,
            cost_share_first=self.search.cost_share_first,
            cost_share_first_two=self.search.cost_share_first_two,
        )


def _parse_nodes(raw, path: str) -> tuple[qnet.NodeSpec, ...]:
    if not isinstance(raw, list) or not raw:
        raise SchemaError(f"{path}: expected a non-empty list")
    nodes = []
    for i, entry in enumerate(raw):
        here = f"{path}[{i}]"
        _require(entry, here, ("name", "mean_service_time_s", "cv"))
        name = entry["name"]
        if not isinstance(name, str) or not name:
            raise SchemaError(f"{here}.name: expected a non-empty string")
        nodes.append(qnet.NodeSpec(
            name,
            _positive(entry["mean_service_time_s"], f"{here}.mean_service_time_s"),
            _number(entry["cv"], f"{here}.cv"),
        ))
    names = [n.name for n in nodes]
    if len(set(names)) != len(names):
        raise SchemaError(f"{path}: duplicate node names")
    return tuple(nodes)


def _parse_routing(raw, n: int, path: str) -> np.ndarray:
    if raw == "tandem":
        routing = np.zeros((n, n))
        for i in range(n - 1):
            routing[i, i + 1] = 1.0
        return routing
    if not isinstance(raw, list) or len(raw) != n:
        raise SchemaError(f"{path}: expected \"tandem\" or an {n}x{n} matrix")
    routing = np.zeros((n, n))
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != n:
            raise SchemaError(f"{path}[{i}]: expected {n} entries")
        for j, value in enumerate(row):
            routing[i, j] = _number(value, f"{path}[{i}][{j}]")
    return routing


def _parse_layer(raw, path: str) -> deploy.LayerParams:
    _require(raw, path, ("mttf_h",), ("mttr_s", "mttr_h"))
    keys = [k for k in ("mttr_s", "mttr_h") if k in raw]
    if len(keys) != 1:
        raise SchemaError(f"{path}: exactly one of mttr_s or mttr_h is required")
    mttr_h = _positive(raw[keys[0]], f"{path}.{keys[0]}")
    if keys[0] == "mttr_s":
        mttr_h /= 3600.0
    return deploy.LayerParams(_positive(raw["mttf_h"], f"{path}.mttf_h"), mttr_h)


def _parse_nr_counts(raw, path: str) -> tuple[int, ...]:
    if not isinstance(raw, list):
        raise SchemaError(f"{path}: expected a list of container counts")
    counts = []
    for i, value in enumerate(raw):
        count = _integer(value, f"{path}[{i}]")
        if count < 1:
            raise SchemaError(f"{path}[{i}]: container count must be >= 1")
        counts.append(count)
    return tuple(counts)


def _parse_deployment(name: str, raw, node_names: tuple[str, ...],
                      thresholds: tuple[tuple[str, int], ...] | None,
                      path: str) -> deploy.DeploymentConfig:
    _require(raw, path, ("type",), ("nodes", "pair", "pair_nrs"))
    kind = raw.get("type")
    if kind not in (deploy.HOMOGENEOUS, deploy.COLOCATED):
        raise SchemaError(
            f"{path}.type: expected {deploy.HOMOGENEOUS!r} or {deploy.COLOCATED!r}")
    if thresholds is None:
        raise SchemaError(f"{path}: deployments need a top-level thresholds block")
    node_raw = raw.get("nodes", {})
    if not isinstance(node_raw, dict):
        raise SchemaError(f"{path}.nodes: expected a mapping")
    pair = None
    pair_nrs = None
    if kind == deploy.COLOCATED:
        if "pair" not in raw or "pair_nrs" not in raw:
            raise SchemaError(f"{path}: co-located deployments need pair and pair_nrs")
        pair_raw = raw["pair"]
        if (not isinstance(pair_raw, list) or len(pair_raw) != 2
                or any(p not in node_names for p in pair_raw)):
            raise SchemaError(f"{path}.pair: expected two chain node names")
        pair = (pair_raw[0], pair_raw[1])
        entries = raw["pair_nrs"]
        if not isinstance(entries, list):
            raise SchemaError(f"{path}.pair_nrs: expected a list")
        parsed = []
        for i, entry in enumerate(entries):
            here = f"{path}.pair_nrs[{i}]"
            if not isinstance(entry, dict):
                raise SchemaError(f"{here}: expected a mapping of node to count")
            for key in entry:
                if key not in pair:
                    raise SchemaError(f"{here}.{key}: not a pair node")
            first = entry.get(pair[0], 0)
            second = entry.get(pair[1], 0)
            parsed.append((
                _integer(first, f"{here}.{pair[0]}") if pair[0] in entry else 0,
                _integer(second, f"{here}.{pair[1]}") if pair[1] in entry else 0,
            ))
        pair_nrs = tuple(parsed)
    elif "pair" in raw or "pair_nrs" in raw:
        raise SchemaError(f"{path}: homogeneous deployments take no pair keys")

    node_nrs = []
    standalone = [n for n in node_names if pair is None or n not in pair]
    for key in node_raw:
        if key not in standalone:
            raise SchemaError(f"{path}.nodes.{key}: not a standalone chain node here")
    for node in standalone:
        if node not in node_raw:
            raise SchemaError(f"{path}.nodes.{node}: missing required field")
        node_nrs.append((node, _parse_nr_counts(node_raw[node], f"{path}.nodes.{node}")))

    deployed = list(node_names) if pair else standalone
    thr = tuple((n, t) for n, t in thresholds if n in deployed)
    try:
        return deploy.DeploymentConfig(kind, tuple(node_nrs), thr, pair, pair_nrs)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


_TOP_REQUIRED = ("nodes", "routing", "alpha_ext_per_s", "csd_target_s",
                 "availability_target", "layers")
_TOP_OPTIONAL = ("c_max", "propagation_delay_s", "thresholds", "deployments", "search")


def parse(text: str) -> ChainDocument:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"document is not valid YAML: {exc}") from exc
    _require(raw, "document", _TOP_REQUIRED, _TOP_OPTIONAL)

    nodes = _parse_nodes(raw["nodes"], "nodes")
    names = tuple(n.name for n in nodes)
    routing = _parse_routing(raw["routing"], len(nodes), "routing")

    alpha_raw = raw["alpha_ext_per_s"]
    if isinstance(alpha_raw, list):
        if len(alpha_raw) != len(nodes):
            raise SchemaError(
                f"alpha_ext_per_s: expected {len(nodes)} entries, got {len(alpha_raw)}")
        alpha = np.array([
            _number(v, f"alpha_ext_per_s[{i}]") for i, v in enumerate(alpha_raw)])
    else:
        value = _number(alpha_raw, "alpha_ext_per_s")
        alpha = np.zeros(len(nodes))
        alpha[0] = value
    if (alpha < 0).any():
        raise SchemaError("alpha_ext_per_s: rates must be >= 0")

    csd_target = _positive(raw["csd_target_s"], "csd_target_s")
    c_max = _integer(raw.get("c_max", 10), "c_max")
    if c_max < 1:
        raise SchemaError("c_max: must be >= 1")
    prop = _number(raw.get("propagation_delay_s", 0.0), "propagation_delay_s")
    if prop < 0:
        raise SchemaError("propagation_delay_s: must be >= 0")
    try:
        chain = qnet.ChainSpec(nodes, routing, alpha, csd_target, c_max, prop)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc

    target = _number(raw["availability_target"], "availability_target")
    if not 0 <= target < 1:
        raise SchemaError("availability_target: must lie in [0, 1)")

    layers_raw = raw["layers"]
    _require(layers_raw, "layers", _LAYER_NAMES)
    rates = deploy.LayerRates(**{
        layer: _parse_layer(layers_raw[layer], f"layers.{layer}")
        for layer in _LAYER_NAMES
    })

    thresholds = None
    if "thresholds" in raw:
        thr_raw = raw["thresholds"]
        _require(thr_raw, "thresholds", names)
        thresholds = tuple(
            (name, _integer(thr_raw[name], f"thresholds.{name}")) for name in names)
        for name, value in thresholds:
            if value < 1:
                raise SchemaError(f"thresholds.{name}: must be >= 1")

    deployments = []
    if "deployments" in raw:
        dep_raw = raw["deployments"]
        if not isinstance(dep_raw, dict):
            raise SchemaError("deployments: expected a mapping")
        for name, block in dep_raw.items():
            deployments.append((
                name,
                _parse_deployment(name, block, names, thresholds, f"deployments.{name}"),
            ))

    settings = SearchSettings()
    if "search" in raw:
        s_raw = raw["search"]
        _require(s_raw, "search", (),
                 ("max_nrs_per_node", "max_containers_per_nr",
                  "cost_share_first", "cost_share_first_two", "pair"))
        pair = None
        if "pair" in s_raw:
            pair_raw = s_raw["pair"]
            if (not isinstance(pair_raw, list) or len(pair_raw) != 2
                    or any(p not in names for p in pair_raw)):
                raise SchemaError("search.pair: expected two chain node names")
            pair = (pair_raw[0], pair_raw[1])
        settings = SearchSettings(
            max_nrs_per_node=_integer(s_raw.get("max_nrs_per_node", 4),
                                      "search.max_nrs_per_node"),
            max_containers_per_nr=_integer(s_raw.get("max_containers_per_nr", 6),
                                           "search.max_containers_per_nr"),
            cost_share_first=_number(s_raw.get("cost_share_first", 0.5),
                                     "search.cost_share_first"),
            cost_share_first_two=_number(s_raw.get("cost_share_first_two", 0.75),
                                         "search.cost_share_first_two"),
            pair=pair,
        )
        if settings.max_nrs_per_node < 1 or settings.max_containers_per_nr < 1:
            raise SchemaError("search: caps must be >= 1")
        if not 0 < settings.cost_share_first <= settings.cost_share_first_two <= 1:
            raise SchemaError("search: need 0 < cost_share_first <= cost_share_first_two <= 1")

    return ChainDocument(chain, rates, target, thresholds, tuple(deployments), settings)


def load(path: str | Path) -> ChainDocument:
    return parse(Path(path).read_text())


def canonical_dict(doc: ChainDocument) -> dict:
    """Plain-data form of a document; parsing its YAML dump reproduces it."""
    out: dict = {
        "nodes": [
            {"name": n.name, "mean_service_time_s": n.mean_service_time, "cv": n.cv}
            for n in doc.chain.nodes
        ],
        "routing": [[float(v) for v in row] for row in doc.chain.routing],
        "alpha_ext_per_s": [float(v) for v in doc.chain.external_arrivals],
        "csd_target_s": doc.chain.csd_target,
        "availability_target": doc.availability_target,
        "c_max": doc.chain.c_max,
        "propagation_delay_s": doc.chain.propagation_delay,
        "layers": {
            layer: {"mttf_h": doc.rates.layer(layer).mttf_h,
                    "mttr_h": doc.rates.layer(layer).mttr_h}
            for layer in _LAYER_NAMES
        },
    }
    if doc.thresholds is not None:
        out["thresholds"] = {name: value for name, value in doc.thresholds}
    if doc.deployments:
        blocks = {}
        for name, config in doc.deployments:
            block: dict = {"type": config.deployment_type}
            if config.node_nrs:
                block["nodes"] = {node: list(counts) for node, counts in config.node_nrs}
            if config.pair is not None:
                block["pair"] = list(config.pair)
                block["pair_nrs"] = [
                    {config.pair[0]: a, config.pair[1]: b} for a, b in config.pair_nrs
                ]
            blocks[name] = block
        out["deployments"] = blocks
    out["search"] = {
        "max_nrs_per_node": doc.search.max_nrs_per_node,
        "max_containers_per_nr": doc.search.max_containers_per_nr,
        "cost_share_first": doc.search.cost_share_first,
        "cost_share_first_two": doc.search.cost_share_first_two,
    }
    if doc.search.pair is not None:
        out["search"]["pair"] = list(doc.search.pair)
    return out


def dump(doc: ChainDocument) -> str:
    return yaml.safe_dump(canonical_dict(doc), sort_keys=False)
