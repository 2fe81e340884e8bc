"""Command-line front end: document ingestion, analysis commands, reports.

Exit codes: 0 success, 2 document or argument validation, 3 infeasible
or unstable model, 4 internal numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import alloc, chaindoc, deploy, qnet, search, srn
from ._format import fmt10 as _fmt10
from .errors import (ChainperfError, EmptyCandidateSet, ImmediateCycle, Infeasible,
                     NoFeasibleConfig, NumericalError, Reducible, SchemaError,
                     SingularRouting, StateSpaceOverflow, Unstable)

_VALIDATION = (SchemaError,)
_INFEASIBLE = (Unstable, Infeasible, SingularRouting, EmptyCandidateSet, NoFeasibleConfig)
_NUMERICAL = (NumericalError, StateSpaceOverflow, ImmediateCycle, Reducible)


def _write_out(args, text: str) -> None:
    if args.out_file:
        Path(args.out_file).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_alloc(raw: str, n: int) -> list[int]:
    try:
        counts = [int(part) for part in raw.split(",")]
    except ValueError:
        raise SchemaError(f"--alloc: expected comma-separated integers, got {raw!r}") from None
    if len(counts) != n:
        raise SchemaError(f"--alloc: expected {n} entries, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise SchemaError("--alloc: container counts must be >= 1")
    return counts


def _parse_alpha_range(raw: str) -> list[float]:
    parts = raw.split(":")
    if len(parts) != 3:
        raise SchemaError(f"--alpha-range: expected lo:hi:step, got {raw!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise SchemaError(f"--alpha-range: expected numbers, got {raw!r}") from None
    if step <= 0 or lo < 0 or hi < lo:
        raise SchemaError("--alpha-range: need 0 <= lo <= hi and step > 0")
    alphas = []
    k = 0
    while True:
        alpha = lo + k * step
        if alpha > hi + 1e-9 * step:
            break
        alphas.append(alpha)
        k += 1
    return alphas


def _sweep_rows(doc: chaindoc.ChainDocument, counts: list[int],
                alphas: list[float]) -> list[dict]:
    rows = []
    for alpha in alphas:
        if alpha == doc.chain.alpha_ext:
            chain = doc.chain
        elif alpha == 0:
            chain = replace(doc.chain, external_arrivals=doc.chain.external_arrivals * 0.0)
        elif doc.chain.alpha_ext <= 0:
            raise SchemaError(
                "--alpha-range: document has no external traffic to rescale")
        else:
            chain = doc.chain.scaled_to(alpha)
        arrivals = qnet.solve_arrival_rates(chain)
        loads = [qnet.node_load(node, float(rate), int(c))
                 for node, rate, c in zip(chain.nodes, arrivals, counts)]
        stable = all(load.stable for load in loads)
        csd_value = qnet.csd(chain, counts) if stable else None
        for node, load in zip(chain.nodes, loads):
            row = {
                "alpha_per_s": alpha,
                "node": node.name,
                "containers": load.containers,
                "utilization": load.utilization,
                "wait_s": None,
                "response_s": None,
                "csd_s": csd_value,
                "stable": load.stable,
            }
            if load.stable:
                resp = qnet.response_time(node, load)
                row["wait_s"] = resp - node.mean_service_time
                row["response_s"] = resp
            rows.append(row)
    return rows


_SWEEP_COLUMNS = ("alpha_per_s", "node", "containers", "utilization",
                  "wait_s", "response_s", "csd_s", "stable")


def _sweep_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_SWEEP_COLUMNS)
    for row in rows:
        record = []
        for col in _SWEEP_COLUMNS:
            value = row[col]
            if value is None:
                record.append("")
            elif col == "node":
                record.append(value)
            elif col == "stable":
                record.append("yes" if value else "no")
            elif col == "containers":
                record.append(str(value))
            else:
                record.append(_fmt10(value))
        writer.writerow(record)
    return out.getvalue()


def _sweep_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2) + "\n"


def _sweep_table(rows: list[dict]) -> str:
    header = (f"{'alpha':>10} {'node':<12} {'c':>3} {'rho':>9} "
              f"{'E[W] s':>13} {'E[T] s':>13} {'CSD s':>13} stable")
    lines = [header]
    for row in rows:
        wait = "-" if row["wait_s"] is None else f"{row['wait_s']:.7f}"
        resp = "-" if row["response_s"] is None else f"{row['response_s']:.7f}"
        csd_s = "-" if row["csd_s"] is None else f"{row['csd_s']:.7f}"
        lines.append(
            f"{row['alpha_per_s']:>10.3f} {row['node']:<12} {row['containers']:>3} "
            f"{row['utilization']:>9.4f} {wait:>13} {resp:>13} {csd_s:>13} "
            f"{'yes' if row['stable'] else 'no'}")
    return "\n".join(lines) + "\n"


def _render_figures(rows: list[dict], directory: str) -> list[str]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    nodes = []
    for row in rows:
        if row["node"] not in nodes:
            nodes.append(row["node"])
    written = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for node in nodes:
        pts = [(r["alpha_per_s"], r["wait_s"]) for r in rows
               if r["node"] == node and r["wait_s"] is not None]
        if pts:
            ax.semilogy([p[0] for p in pts], [p[1] for p in pts],
                        marker="o", markersize=3, label=node)
    ax.set_xlabel("external arrival rate (1/s)")
    ax.set_ylabel("mean waiting time (s)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    path = out_dir / "waiting_times.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(str(path))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for node in nodes:
        pts = [(r["alpha_per_s"], r["response_s"]) for r in rows
               if r["node"] == node and r["response_s"] is not None]
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", markersize=3, label=node)
    csd_pts = {}
    for r in rows:
        if r["csd_s"] is not None:
            csd_pts[r["alpha_per_s"]] = r["csd_s"]
    if csd_pts:
        ax.plot(list(csd_pts), list(csd_pts.values()), "k--", label="CSD")
    ax.set_xlabel("external arrival rate (1/s)")
    ax.set_ylabel("mean response time (s)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    path = out_dir / "response_times.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(str(path))
    return written


def cmd_analyze(args) -> int:
    doc = chaindoc.load(args.spec)
    counts = _parse_alloc(args.alloc, len(doc.chain.nodes))
    report = qnet.analyze(doc.chain, counts)
    rows = _sweep_rows(doc, counts, [doc.chain.alpha_ext])
    if args.out == "csv":
        _write_out(args, _sweep_csv(rows))
    elif args.out == "json":
        _write_out(args, _sweep_json(rows))
    else:
        _write_out(args, _sweep_table(rows) + f"CSD: {report.csd:.10f} s\n")
    return 0


def cmd_optimize(args) -> int:
    doc = chaindoc.load(args.spec)
    result = alloc.optcnt(doc.chain)
    if args.out == "json":
        payload = {
            "floors": list(result.floors),
            "allocation": list(result.allocation),
            "csd_s": result.csd,
            "iterations": result.iterations,
            "convex": result.convex,
            "trace": [
                {"node": step.node, "containers_after": step.containers_after,
                 "response_drop_s": step.response_drop}
                for step in result.trace
            ],
        }
        _write_out(args, json.dumps(payload, indent=2) + "\n")
    elif args.out == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["step", "node", "containers_after", "response_drop_s"])
        for i, step in enumerate(result.trace, start=1):
            writer.writerow([str(i), step.node, str(step.containers_after),
                             _fmt10(step.response_drop)])
        _write_out(args, out.getvalue())
    else:
        names = doc.chain.names
        lines = [
            "floors:     " + ",".join(str(c) for c in result.floors),
            "allocation: " + ",".join(str(c) for c in result.allocation),
            f"csd: {result.csd:.10f} s (target {doc.chain.csd_target:g} s)",
            f"iterations: {result.iterations}",
            "convex: " + ("yes" if result.convex
                          else "no (greedy optimality not guaranteed)"),
        ]
        for i, step in enumerate(result.trace, start=1):
            lines.append(f"  step {i}: {step.node} -> {step.containers_after} "
                         f"(response drop {step.response_drop:.3e} s)")
        lines.append("nodes: " + ",".join(names))
        _write_out(args, "\n".join(lines) + "\n")
    return 0


def _dump_ctmcs(doc: chaindoc.ChainDocument, configs, directory: str) -> None:
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    models = {}
    for _, config in configs:
        for _, counts in config.node_nrs:
            for count in counts:
                model = deploy.build_homog_nr(count, doc.rates)
                models[model.name] = model
        for first, second in config.pair_nrs or ():
            model = deploy.build_coloc_nr(first, second, doc.rates)
            models[model.name] = model
    for name in sorted(models):
        ctmc = srn.reachability(models[name])
        (out_dir / f"{name}.edges").write_text(ctmc.edge_list_text())
        (out_dir / f"{name}.markings").write_text(ctmc.marking_table_text())


def cmd_availability(args) -> int:
    doc = chaindoc.load(args.spec)
    if not doc.deployments:
        raise SchemaError("document has no deployments block")
    if args.deployment:
        configs = [(args.deployment, doc.deployment(args.deployment))]
    else:
        configs = list(doc.deployments)
    if args.dump_ctmc:
        _dump_ctmcs(doc, configs, args.dump_ctmc)
    reports = [(name, deploy.chain_availability(config, doc.rates))
               for name, config in configs]
    if args.out == "json":
        payload = {}
        for name, rep in reports:
            payload[name] = {
                "per_node": {node: a for node, a in rep.per_node},
                "group": rep.group,
                "chain": rep.chain,
                "nines": deploy.leading_nines(rep.chain) if rep.chain < 1 else None,
                "cost": rep.cost,
            }
        _write_out(args, json.dumps(payload, indent=2) + "\n")
    elif args.out == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["deployment", "component", "availability", "nines", "cost"])
        for name, rep in reports:
            rows = list(rep.per_node)
            if rep.group is not None:
                rows.append(("group", rep.group))
            rows.append(("chain", rep.chain))
            for component, value in rows:
                nines = deploy.leading_nines(value) if value < 1 else ""
                writer.writerow([name, component, _fmt10(value), str(nines), str(rep.cost)])
        _write_out(args, out.getvalue())
    else:
        lines = []
        for name, rep in reports:
            lines.append(f"deployment {name} (cost {rep.cost})")
            for node, value in rep.per_node:
                lines.append(f"  {node:<14} {value:.12f}")
            if rep.group is not None:
                lines.append(f"  {'group':<14} {rep.group:.12f}")
            nines = deploy.leading_nines(rep.chain) if rep.chain < 1 else "all"
            lines.append(f"  {'chain':<14} {rep.chain:.12f}  ({nines} nines)")
        _write_out(args, "\n".join(lines) + "\n")
    return 0


def cmd_search(args) -> int:
    doc = chaindoc.load(args.spec)
    if args.thresholds:
        raw = _parse_alloc(args.thresholds, len(doc.chain.nodes))
        thresholds = tuple(zip(doc.chain.names, raw))
    elif doc.thresholds is not None:
        thresholds = doc.thresholds
    else:
        thresholds = tuple(zip(doc.chain.names, alloc.optcnt(doc.chain).allocation))
    deployment_type = args.type
    if deployment_type == deploy.COLOCATED and doc.search.pair is None:
        raise SchemaError("search.pair: required in the document for co-located search")
    params = doc.search_params(thresholds, deployment_type)
    if args.availability_target is not None:
        if not 0 <= args.availability_target < 1:
            raise SchemaError("--availability-target: must lie in [0, 1)")
        params = search.SearchParams(
            availability_target=args.availability_target,
            thresholds=params.thresholds,
            deployment_type=params.deployment_type,
            pair=params.pair,
            max_nrs_per_node=params.max_nrs_per_node,
            max_containers_per_nr=params.max_containers_per_nr,
            cost_share_first=params.cost_share_first,
            cost_share_first_two=params.cost_share_first_two,
        )
    candidates = search.srneval(doc.rates, params)
    result = search.optsearchchain(candidates, params, doc.chain)
    if result.pruning_diagnostic:
        print(f"warning: {result.pruning_diagnostic}", file=sys.stderr)
    if args.out == "json":
        _write_out(args, search.records_to_json(result, params))
    elif args.out == "csv":
        _write_out(args, search.records_to_csv(result, params))
    else:
        cells = list(csv.reader(io.StringIO(search.records_to_csv(result, params))))
        widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                 for row in cells]
        _write_out(args, "\n".join(lines) + "\n")
    return 0


def cmd_sweep(args) -> int:
    doc = chaindoc.load(args.spec)
    counts = _parse_alloc(args.alloc, len(doc.chain.nodes))
    alphas = _parse_alpha_range(args.alpha_range)
    rows = _sweep_rows(doc, counts, alphas)
    if args.figures:
        written = _render_figures(rows, args.figures)
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    if args.out == "json":
        _write_out(args, _sweep_json(rows))
    elif args.out == "csv":
        _write_out(args, _sweep_csv(rows))
    else:
        _write_out(args, _sweep_table(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainperf",
        description="Performability analysis of containerized service chains.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--spec", required=True, help="chain document path")
        p.add_argument("--out", choices=("table", "csv", "json"), default="table")
        p.add_argument("--out-file", help="write the report here instead of stdout")

    p = sub.add_parser("analyze", help="per-node delays and CSD for one allocation")
    common(p)
    p.add_argument("--alloc", required=True, help="containers per node, e.g. 2,2,2,3")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("optimize", help="greedy minimum-container allocation")
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("availability", help="steady-state availability of deployments")
    common(p)
    p.add_argument("--deployment", help="evaluate one named block (default: all)")
    p.add_argument("--dump-ctmc", metavar="DIR",
                   help="write tangible CTMC edge lists and marking tables here")
    p.set_defaults(func=cmd_availability)

    p = sub.add_parser("search", help="feasible redundancy configurations")
    common(p)
    p.add_argument("--type", choices=(deploy.HOMOGENEOUS, deploy.COLOCATED),
                   default=deploy.HOMOGENEOUS)
    p.add_argument("--availability-target", type=float, default=None)
    p.add_argument("--thresholds", help="override thresholds, e.g. 2,2,2,3")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sweep", help="delay curves over an arrival-rate range")
    common(p)
    p.add_argument("--alloc", required=True, help="containers per node, e.g. 2,2,2,3")
    p.add_argument("--alpha-range", required=True, help="lo:hi:step, inclusive")
    p.add_argument("--figures", metavar="DIR", help="render plots into this directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    import warnings

    from .errors import ApproximationWarning

    warnings.filterwarnings("once", category=ApproximationWarning)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _INFEASIBLE as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _NUMERICAL as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ChainperfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
