"""Command-line entry point: gen, partition, color, run, audit, metrics."""
from __future__ import annotations

import argparse
import base64
import csv
import json
import logging
import os
import pickle
import subprocess
import sys
import time

from .apps import KINDS, load_dataset, make_dataset
from .apps.registry import APPS, build_app, get_app
from .coloring import (Coloring, color_for_model, constant_color, greedy_color, read_coloring,
                       required_order, square_color, validate_coloring, write_coloring)
from .engines.audit import audit_serializability
from .engines.cluster import RunResult, run_chromatic, run_locking
from .engines.log import LogFormatError, read_log, write_log
from .engines.runtime import METRIC_COLUMNS
from .errors import EngineAborted, GraphLiteError, InvalidColoring
from .partition import (load_atoms, load_local, load_placement, meta_graph, overpartition,
                        place, read_assignment, save_atoms, save_placement)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_AUDIT_FAIL = 0, 2, 3, 4

log = logging.getLogger("graphlite")


class UsageError(Exception):
    """Bad input detected before any work starts (exit 2)."""


def _seed(args):
    env = os.environ.get("GRAPHLITE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"GRAPHLITE_SEED must be an integer, got {env!r}") from None
    return args.seed


def _kv(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if hasattr(x, "_asdict"):
        return {k: _jsonable(v) for k, v in x._asdict().items()}
    return repr(x)


# -- gen ----------------------------------------------------------------------------

def cmd_gen(args):
    tsv, side = make_dataset(args.kind, _kv(args.param), _seed(args), args.out)
    print(f"wrote {tsv} and {side}")
    return EXIT_OK


# -- color ---------------------------------------------------------------------------

def _input_graph(args, seed):
    meta, n, rows = load_dataset(args.input)
    app_name = getattr(args, "app", None) or _app_for_kind(meta.get("kind"))
    return build_app(app_name, meta, n, rows, _kv(getattr(args, "param", None)), seed)


def _app_for_kind(kind):
    for app in APPS.values():
        if app.dataset == kind:
            return app.name
    raise UsageError(f"cannot infer an app for dataset kind {kind!r}; pass --app")


def cmd_color(args):
    _, g, _, _ = _input_graph(args, _seed(args))
    if args.validate:
        c = read_coloring(args.validate)
        if len(c) != g.num_vertices:
            print(f"invalid: {len(c)} colors for {g.num_vertices} vertices")
            return EXIT_INVALID
        ok = validate_coloring(g, c, args.order)
        print(f"{'valid' if ok else 'invalid'} at {args.order} order ({c.num_colors} colors)")
        return EXIT_OK if ok else EXIT_INVALID
    c = {"first": greedy_color, "second": square_color, "zero": constant_color}[args.order](g)
    write_coloring(args.out, c)
    print(f"{c.num_colors} colors written to {args.out}")
    return EXIT_OK


# -- partition ------------------------------------------------------------------------

def _coloring_for(args, g, model, app_coloring):
    if args.coloring:
        c = read_coloring(args.coloring)
        if len(c) != g.num_vertices:
            raise InvalidColoring(f"coloring has {len(c)} entries for {g.num_vertices} vertices")
    elif app_coloring is not None and required_order(model) == "first":
        c = Coloring.from_list(app_coloring)
    else:
        c = color_for_model(g, model)
    order = required_order(model)
    if not validate_coloring(g, c, order):
        raise InvalidColoring(f"coloring is not valid at {order} order for the {model} model")
    return c


def cmd_partition(args):
    seed = _seed(args)
    _, g, _, app_coloring = _input_graph(args, seed)
    coloring = _coloring_for(args, g, args.model, app_coloring)
    assignment = read_assignment(args.assignment, g.num_vertices) if args.assignment else None
    atoms, mg = overpartition(g, args.k, method=args.method, assignment=assignment,
                              coloring=coloring)
    save_atoms(args.out, atoms, mg)
    if args.machines:
        save_placement(os.path.join(args.out, "placement.json"), place(mg, args.machines))
    print(f"{len(atoms)} atoms written to {args.out}")
    return EXIT_OK


# -- run ---------------------------------------------------------------------------------

def _validate_run(args):
    if args.model == "none" and not args.unsafe:
        raise UsageError("--model none disables consistency; pass --unsafe to allow it")
    if args.machines < 1 or args.workers < 1:
        raise UsageError("--machines and --workers must be >= 1")
    if args.maxpending < 0:
        raise UsageError("--maxpending must be >= 0")
    if args.tau < 1:
        raise UsageError("--tau must be >= 1")
    app = get_app(args.app)
    if args.engine == "locking" and args.scheduler == "priority" and not app.uses_priority:
        raise UsageError(f"app {app.name} does not emit priorities; pick another scheduler")
    if not os.path.isdir(args.input):
        raise UsageError(f"input directory {args.input} does not exist")


def _run_config(args, seed):
    app = get_app(args.app)
    return {
        "app": args.app,
        "input": os.path.abspath(args.input),
        "engine": args.engine or app.engine,
        "model": args.model or app.model,
        "machines": args.machines,
        "workers": args.workers,
        "scheduler": args.scheduler or app.scheduler,
        "maxpending": args.maxpending,
        "tau": args.tau,
        "syncs": list(args.sync or []),
        "seed": seed,
        "transport": args.transport,
        "coloring": os.path.abspath(args.coloring) if args.coloring else None,
        "atoms": os.path.abspath(args.atoms) if args.atoms else None,
        "k": args.k,
        "method": args.method,
        "max_sweeps": args.max_sweeps,
        "time_budget": args.time_budget,
        "params": _kv(args.param),
    }


def _build_from_config(cfg):
    meta, n, rows = load_dataset(cfg["input"])
    return build_app(cfg["app"], meta, n, rows, cfg["params"], cfg["seed"], cfg["syncs"], cfg["tau"])


def _sources(cfg, g, app_coloring, out):
    """Atoms for the run: given atom directory or a fresh over-partition of ``g``."""
    if cfg["atoms"]:
        atoms, _ = load_atoms(cfg["atoms"])
        if cfg["engine"] == "chromatic":
            colors = [0] * g.num_vertices
            for atom in atoms:
                for v, c, _ in atom.vertices:
                    colors[v] = c
            order = required_order(cfg["model"])
            if not validate_coloring(g, Coloring.from_list(colors), order):
                raise InvalidColoring(f"atom colors are not valid at {order} order")
        return atoms
    ns = argparse.Namespace(coloring=cfg["coloring"])
    model = cfg["model"] if cfg["engine"] == "chromatic" else "vertex"
    coloring = _coloring_for(ns, g, model, app_coloring if cfg["engine"] == "chromatic" else None)
    m = cfg["machines"]
    k = cfg["k"] or max(m, min(g.num_vertices, 4 * m))
    atoms, mg = overpartition(g, k, method=cfg["method"], coloring=coloring)
    if cfg["transport"] == "socket":
        save_atoms(os.path.join(out, "atoms"), atoms, mg)
    return atoms


def _engine_kwargs(cfg):
    if cfg["engine"] == "chromatic":
        return dict(max_sweeps=cfg["max_sweeps"], time_budget=cfg["time_budget"])
    return dict(scheduler=cfg["scheduler"], maxpending=cfg["maxpending"])


def _run_inproc(cfg, atoms, prog, codec):
    common = dict(machines=cfg["machines"], workers=cfg["workers"], seed=cfg["seed"],
                  codec=codec, model=cfg["model"])
    if cfg["engine"] == "chromatic":
        return run_chromatic(atoms, prog, **common, **_engine_kwargs(cfg))
    return run_locking(atoms, prog, **common, **_engine_kwargs(cfg))


def _run_socket(cfg, atoms, out):
    from .comm.transport import free_ports, write_hosts
    m = cfg["machines"]
    hosts_path = cfg.get("hosts") or os.path.join(out, "hosts.txt")
    if not cfg.get("hosts"):
        write_hosts(hosts_path, [("127.0.0.1", p) for p in free_ports(m)])
    placement = place(meta_graph(atoms), m)
    save_placement(os.path.join(out, "placement.json"), placement)
    cfg_path = os.path.join(out, "config.json")
    procs = [subprocess.Popen([sys.executable, "-m", "graphlite", "_machine", "--config", cfg_path,
                               "--me", str(i), "--hosts", hosts_path])
             for i in range(m)]
    t0 = time.monotonic()
    codes = [p.wait() for p in procs]
    if any(codes):
        raise EngineAborted(f"machine processes exited with {codes}")
    outs = []
    for i in range(m):
        with open(os.path.join(out, f"machine_{i}.pkl"), "rb") as fh:
            outs.append(pickle.load(fh))
    n = len(outs[0]["owners"])
    vertex, edge = [None] * n, {}
    for o in outs:
        for v, x in o["vertex"].items():
            vertex[v] = x
        edge.update(o["edge"])
    records = sorted((r for o in outs for r in o["records"]),
                     key=lambda r: (r.commit_ns, r.machine, r.seq))
    return RunResult(vertex, [edge[s] for s in range(len(edge))], outs[0]["globals"], records,
                     outs[0]["sync_records"], sorted(r for o in outs for r in o["metrics"]),
                     [o["counters"] for o in outs], m, time.monotonic() - t0,
                     sweeps=outs[0].get("sweeps", 0), owners=outs[0]["owners"])


def cmd_machine(args):
    """One machine of a socket-transport run (spawned by ``run``)."""
    from .comm.transport import SocketEndpoint, read_hosts
    from .engines.chromatic import ChromaticMachine
    from .engines.locking import LockingMachine
    with open(args.config) as fh:
        cfg = json.load(fh)
    out = os.path.dirname(os.path.abspath(args.config))
    _, g, prog, _ = _build_from_config(cfg)
    atoms, _ = load_atoms(cfg["atoms"] or os.path.join(out, "atoms"))
    placement = load_placement(os.path.join(out, "placement.json"))
    lg = load_local(atoms, placement, args.me, g.codec)
    ep = SocketEndpoint(args.me, read_hosts(args.hosts))
    cls = ChromaticMachine if cfg["engine"] == "chromatic" else LockingMachine
    mc = cls(lg, ep, prog, cfg["model"], workers=cfg["workers"], **_engine_kwargs(cfg))
    try:
        mc.run()
        mc.barrier.enter(("shutdown",))
    except BaseException:
        if mc.error is not None:
            raise mc.error
        raise
    finally:
        time.sleep(0.05)
        ep.close()
    vertex, edge = mc.owned_state()
    with open(os.path.join(out, f"machine_{args.me}.pkl"), "wb") as fh:
        pickle.dump({"vertex": vertex, "edge": edge, "records": mc.records,
                     "sync_records": mc.sync_records, "metrics": mc.metrics_rows,
                     "counters": mc.counters, "globals": mc.globals.as_dict(),
                     "owners": lg.vertex_owner, "sweeps": getattr(mc, "sweeps", 0)}, fh)
    return EXIT_OK


def write_final(path, g, vertex_data, edge_data):
    enc = g.codec.encode
    with open(path, "w") as fh:
        for v, x in enumerate(vertex_data):
            fh.write(json.dumps({"datum": ["v", v], "bytes": base64.b64encode(enc(x)).decode()}) + "\n")
        for s, x in enumerate(edge_data):
            fh.write(json.dumps({"datum": ["e", s], "bytes": base64.b64encode(enc(x)).decode()}) + "\n")


def read_final(path, g):
    vertex, edge = [None] * g.num_vertices, [None] * (2 * g.num_edges)
    with open(path) as fh:
        for line in fh:
            obj = json.loads(line)
            kind, i = obj["datum"]
            val = g.codec.decode(base64.b64decode(obj["bytes"]))
            (vertex if kind == "v" else edge)[i] = val
    if any(x is None for x in vertex) or any(x is None for x in edge):
        raise LogFormatError(f"{path}: final data incomplete")
    return vertex, edge


def write_metrics(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        w.writerows(rows)


def cmd_run(args):
    _validate_run(args)
    seed = _seed(args)
    cfg = _run_config(args, seed)
    cfg["hosts"] = os.path.abspath(args.hosts) if args.hosts else None
    os.makedirs(args.out, exist_ok=True)
    app, g, prog, app_coloring = _build_from_config(cfg)
    atoms = _sources(cfg, g, app_coloring, args.out)
    if cfg["transport"] == "socket" and not cfg["atoms"]:
        cfg["atoms"] = os.path.abspath(os.path.join(args.out, "atoms"))
    _dump_json(os.path.join(args.out, "config.json"), cfg)
    try:
        if cfg["transport"] == "socket":
            res = _run_socket(cfg, atoms, args.out)
        else:
            res = _run_inproc(cfg, atoms, prog, g.codec)
    except GraphLiteError as exc:
        if isinstance(exc, InvalidColoring):
            raise
        raise RuntimeError(str(exc)) from exc
    write_final(os.path.join(args.out, "final.ndjson"), g, res.vertex_data, res.edge_data)
    app.write_result(os.path.join(args.out, app.result_file), res.vertex_data)
    _dump_json(os.path.join(args.out, "syncs.json"),
               {"values": res.globals,
                "history": [{"key": s.key, "value": s.value, "round": str(s.round)}
                            for s in res.sync_records]})
    write_metrics(os.path.join(args.out, "metrics.csv"), res.metrics)
    write_log(os.path.join(args.out, "log.ndjson"), res.records, res.sync_records,
              {"app": cfg["app"], "model": cfg["model"], "engine": cfg["engine"],
               "owners": res.owners, "machines": res.num_machines})
    print(f"{res.updates} updates on {res.num_machines} machine(s) in {res.wall_s:.2f}s; "
          f"outputs in {args.out}")
    return EXIT_OK


# -- audit --------------------------------------------------------------------------------

def cmd_audit(args):
    run_dir = args.run
    cfg_path = os.path.join(run_dir, "config.json")
    log_path = args.log or os.path.join(run_dir, "log.ndjson")
    final_path = os.path.join(run_dir, "final.ndjson")
    for p in (cfg_path, log_path, final_path):
        if not os.path.exists(p):
            raise UsageError(f"missing run artifact {p}")
    with open(cfg_path) as fh:
        cfg = json.load(fh)
    try:
        header, records, syncs = read_log(log_path)
    except LogFormatError as exc:
        raise UsageError(f"unreadable execution log: {exc}") from exc
    _, g0, prog, _ = _build_from_config(cfg)
    vertex, edge = read_final(final_path, g0)
    verdict = audit_serializability(records, syncs, prog, g0, vertex, edge,
                                    header.get("model", cfg["model"]), header.get("owners"))
    if verdict.ok:
        print(f"PASS: {verdict.replayed} commits replayed, {verdict.syncs_checked} sync values matched")
        return EXIT_OK
    print(f"FAIL: {verdict.first_violation}")
    if verdict.conflicts:
        print(f"  {len(verdict.conflicts)} overlapping conflicting task pairs")
    if verdict.mismatch is not None:
        print(f"  replay diverged at {verdict.mismatch.datum}")
    return EXIT_AUDIT_FAIL


# -- metrics ------------------------------------------------------------------------------

def cmd_metrics(args):
    path = os.path.join(args.run, "metrics.csv")
    if not os.path.exists(path):
        raise UsageError(f"missing {path}")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    last = {}
    for r in rows:
        last[int(r["machine"])] = r
    summary = {m: {k: int(v) for k, v in r.items() if k != "machine"} for m, r in sorted(last.items())}
    total = {k: sum(s[k] for s in summary.values())
             for k in ("updates", "envelopes", "bytes_pushed")}
    total["wall_ms"] = max((s["wall_ms"] for s in summary.values()), default=0)
    if args.json:
        print(json.dumps({"machines": summary, "total": total}, indent=1, sort_keys=True))
    else:
        print("\t".join(METRIC_COLUMNS))
        for m, s in summary.items():
            print("\t".join([str(m)] + [str(s[c]) for c in METRIC_COLUMNS[1:]]))
        print(f"total\t{total['wall_ms']}\t{total['updates']}\t{total['envelopes']}\t"
              f"{total['bytes_pushed']}\t-")
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="graphlite", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def seed_arg(sp):
        sp.add_argument("--seed", type=int, default=0,
                        help="random seed (GRAPHLITE_SEED overrides)")

    def param_arg(sp, what):
        sp.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help=f"override one {what} parameter (repeatable)")

    g = sub.add_parser("gen", help="generate a dataset (graph.tsv + graph.json)")
    g.add_argument("--kind", required=True, choices=KINDS, help="dataset kind")
    g.add_argument("--out", required=True, help="output directory")
    seed_arg(g)
    param_arg(g, "generator")
    g.set_defaults(fn=cmd_gen)

    c = sub.add_parser("color", help="compute or validate a vertex coloring")
    c.add_argument("--input", required=True, help="dataset directory")
    c.add_argument("--app", choices=sorted(APPS), help="app interpreting the dataset")
    c.add_argument("--order", choices=("first", "second", "zero"), default="first",
                   help="coloring order: first (edge model), second (full), zero (vertex)")
    c.add_argument("--out", help="coloring file to write (one color per line)")
    c.add_argument("--validate", metavar="FILE", help="validate FILE instead of computing")
    seed_arg(c)
    param_arg(c, "app")
    c.set_defaults(fn=cmd_color)

    pa = sub.add_parser("partition", help="over-partition a dataset into atom files")
    pa.add_argument("--input", required=True, help="dataset directory")
    pa.add_argument("--app", choices=sorted(APPS), help="app interpreting the dataset")
    pa.add_argument("--k", type=int, required=True, help="number of atoms")
    pa.add_argument("--method", choices=("bfs", "range"), default="bfs",
                    help="built-in over-partition heuristic")
    pa.add_argument("--assignment", help="TSV 'vertex<TAB>atom' file overriding the heuristic")
    pa.add_argument("--model", choices=("vertex", "edge", "full", "none"), default="edge",
                    help="consistency model the shipped colors must support")
    pa.add_argument("--coloring", help="coloring file to ship instead of computing one")
    pa.add_argument("--machines", type=int, help="also write placement.json for this many machines")
    pa.add_argument("--out", required=True, help="atom directory")
    seed_arg(pa)
    param_arg(pa, "app")
    pa.set_defaults(fn=cmd_partition)

    r = sub.add_parser("run", help="run an app on either engine")
    r.add_argument("--app", required=True, choices=sorted(APPS), help="application")
    r.add_argument("--input", required=True, help="dataset directory")
    r.add_argument("--out", required=True, help="run directory for all outputs")
    r.add_argument("--engine", choices=("chromatic", "locking"), help="engine (app default if omitted)")
    r.add_argument("--model", choices=("vertex", "edge", "full", "none"),
                   help="consistency model (app default if omitted)")
    r.add_argument("--unsafe", action="store_true", help="required to run with --model none")
    r.add_argument("--machines", type=int, default=1, help="logical machines")
    r.add_argument("--workers", type=int, default=1, help="workers per machine")
    r.add_argument("--scheduler", choices=("sweep", "fifo", "priority"),
                   help="locking-engine scheduler (app default if omitted)")
    r.add_argument("--maxpending", type=int, default=100,
                   help="in-flight scope acquisitions per worker (0 = synchronous)")
    r.add_argument("--sync", action="append", metavar="KEY", help="enable an app sync (repeatable)")
    r.add_argument("--tau", type=int, default=1000, help="sync interval in updates")
    r.add_argument("--coloring", help="coloring file for the chromatic engine")
    r.add_argument("--atoms", help="reuse a partition directory instead of partitioning")
    r.add_argument("--k", type=int, help="atoms to create when partitioning on the fly")
    r.add_argument("--method", choices=("bfs", "range"), default="bfs", help="partition heuristic")
    r.add_argument("--max-sweeps", type=int, default=1000, help="chromatic sweep limit")
    r.add_argument("--time-budget", type=float, help="chromatic wall-clock budget in seconds")
    r.add_argument("--transport", choices=("inproc", "socket"), default="inproc",
                   help="in-process channels or one OS process per machine over TCP")
    r.add_argument("--hosts", help="host:port list file for the socket transport")
    seed_arg(r)
    param_arg(r, "app")
    r.set_defaults(fn=cmd_run)

    a = sub.add_parser("audit", help="check a run for serializability")
    a.add_argument("--run", required=True, help="run directory produced by 'run'")
    a.add_argument("--log", help="execution log (default RUN/log.ndjson)")
    a.set_defaults(fn=cmd_audit)

    mt = sub.add_parser("metrics", help="summarize a run's metrics CSV")
    mt.add_argument("--run", required=True, help="run directory produced by 'run'")
    mt.add_argument("--json", action="store_true", help="print JSON instead of a table")
    mt.set_defaults(fn=cmd_metrics)

    w = sub.add_parser("_machine", help=argparse.SUPPRESS)
    w.add_argument("--config", required=True, help="config.json of the parent run")
    w.add_argument("--me", type=int, required=True, help="this machine's id")
    w.add_argument("--hosts", required=True, help="host:port list file")
    w.set_defaults(fn=cmd_machine)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (UsageError, InvalidColoring, FileNotFoundError, ValueError, GraphLiteError) as exc:
        if isinstance(exc, (EngineAborted,)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # runtime failure inside the engines
        log.debug("run failed", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
