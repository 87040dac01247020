"""Command-line drivers: scenario configs, result files, exit-code contract.

Commands
    lattice   per-node bubble decomposition of a tree fixture
    sweep     root bubble across an ascending cost-rate list
    simulate  path ensembles for the continuous-time example models
    figure1   the pinned single-path bubble-birth table

Exit codes: 0 success, 1 configuration error, 2 no consistent price system
or martingale measure, 3 internal certification failure.

Every output embeds its fully resolved configuration (and seed), carries no
timestamps, and is byte-identical across reruns; a lattice or sweep output
even embeds the tree itself, so the file regenerates from its own header.
Exact quantities serialize as integer-ratio strings like "3/4".
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from ._rational import coerce_number, is_exact, rat_str
from . import analytics, cps, processes
from .errors import (BadConfig, BandViolation, CertificationFailure, EmbeddingFailure,
                     EmptySample, InvalidTree, NoCps, NoEmm, NotMartingale,
                     NumericalFailure, ShapeMismatch, TcBubblesError)
from .lattice import EventTree, TransactionCost, bid_ask, build_tree

OUT_DIR_ENV = "TCBUBBLES_OUT"

FIGURE1_DEFAULTS = {"steps": 253, "mu": 0.3, "v0": 0.4, "lam": "1/10", "seed": 0}

_CONFIG_ERRORS = (BadConfig, InvalidTree, ShapeMismatch, BandViolation,
                  NotMartingale, EmptySample, EmbeddingFailure)


def _fixture_value(x):
    """Fixture numbers: strings and ints are exact, floats stay floats."""
    if isinstance(x, bool):
        raise BadConfig(f"booleans are not numbers: {x!r}")
    if isinstance(x, str) or isinstance(x, int):
        return coerce_number(x)
    if isinstance(x, float):
        return x
    raise BadConfig(f"cannot read {x!r} as a price or probability")


def load_tree(fixture) -> EventTree:
    """Build an EventTree from a fixture dict or a JSON file path.

    Schema: {"levels": [[price, ...], ...], "edges": [[parent, child, prob], ...]}
    with numbers given as "p/q" strings, integers, or floats.  A fixture that
    mixes floats with exact values is homogenized to floats, so the tree's
    numeric mode is unambiguous.
    """
    if isinstance(fixture, str):
        with open(fixture, "r", encoding="utf-8") as fp:
            fixture = json.load(fp)
    if not isinstance(fixture, dict):
        raise BadConfig("tree fixture must be an object or a path to one")
    unknown = set(fixture) - {"levels", "edges"}
    if unknown:
        raise BadConfig(f"unknown tree fixture keys: {sorted(unknown)}")
    try:
        levels = [[_fixture_value(p) for p in level] for level in fixture["levels"]]
        edges = [(int(p), int(c), _fixture_value(q)) for p, c, q in fixture["edges"]]
    except (KeyError, TypeError) as exc:
        raise BadConfig(f"malformed tree fixture: {exc}") from exc
    vals = [p for level in levels for p in level] + [q for _, _, q in edges]
    if any(isinstance(v, float) for v in vals):
        levels = [[float(p) for p in level] for level in levels]
        edges = [(p, c, float(q)) for p, c, q in edges]
    return build_tree(levels, edges)


def _tree_to_fixture(tree: EventTree) -> dict:
    levels = [[_num_to_json(tree.price[m]) for m in stage] for stage in tree.stages]
    edges = []
    for m in range(tree.n_nodes):
        for c in tree.children[m]:
            edges.append([m, c, _num_to_json(tree.prob[c])])
    return {"levels": levels, "edges": edges}


def _num_to_json(x):
    """Exact values as "p/q" strings (round-trippable), floats as floats."""
    if x is None:
        return None
    if isinstance(x, float):
        return x
    if is_exact(x):
        return rat_str(x)
    return float(x)


def _num_to_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if is_exact(x):
        return rat_str(x)
    return str(x)


def _parse_lam(text):
    """Command-line rates are decimal or ratio literals, hence exact."""
    lam = coerce_number(str(text))
    return TransactionCost(lam).lam


def _resolve_out(cfg: dict, flag_out: Optional[str], default_name: str) -> str:
    out = flag_out or cfg.get("out") or default_name
    if not os.path.isabs(out):
        base = os.environ.get(OUT_DIR_ENV)
        if base:
            out = os.path.join(base, out)
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return out


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fp:
        try:
            cfg = json.load(fp)
        except json.JSONDecodeError as exc:
            raise BadConfig(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise BadConfig("config must be a JSON object")
    return cfg


def _check_keys(cfg: dict, allowed: set, where: str):
    unknown = set(cfg) - allowed
    if unknown:
        raise BadConfig(f"unknown {where} config keys: {sorted(unknown)}")


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(text)
    print(f"wrote {path}")


def _config_line(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True, separators=(",", ":"))


def _json_doc(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def run_lattice(cfg: dict, out: Optional[str] = None) -> int:
    _check_keys(cfg, {"kind", "tree", "lam", "format", "out", "exact"}, "lattice")
    if "tree" not in cfg:
        raise BadConfig("lattice needs a tree fixture (config key 'tree')")
    if "lam" not in cfg:
        raise BadConfig("lattice needs a cost rate (config key 'lam' or --lambda)")
    tree = load_tree(cfg["tree"])
    lam = cfg["lam"] if not isinstance(cfg["lam"], str) else coerce_number(cfg["lam"])
    tc = TransactionCost(lam)
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise BadConfig(f"format must be csv or json, got {fmt!r}")
    if cfg.get("exact") and not (tree.is_exact and tc.is_exact):
        raise BadConfig("--exact demands a rational tree fixture and rate")

    report = cps.bubble_report(tree, tc, certify=True)
    resolved = {"command": "lattice", "tree": _tree_to_fixture(tree),
                "lam": _num_to_json(tc.lam), "format": fmt}
    summary = {
        "mode": report.mode,
        "n_nodes": tree.n_nodes,
        "has_emm": report.has_emm,
        "root_fundamental": _num_to_json(report.fundamental[tree.root]),
        "root_beta": _num_to_json(report.beta[tree.root]),
        "all_certified": all(report.certified),
    }
    cols = ("node", "stage", "price", "bid", "ask", "fundamental", "beta",
            "s_star", "beta_notc", "delta", "certified")
    rows = []
    for m in range(tree.n_nodes):
        bid, ask = bid_ask(tree.price[m], tc)
        rows.append({
            "node": m, "stage": tree.stage[m], "price": tree.price[m],
            "bid": bid, "ask": ask,
            "fundamental": report.fundamental[m], "beta": report.beta[m],
            "s_star": None if report.s_star is None else report.s_star[m],
            "beta_notc": None if report.beta_notc is None else report.beta_notc[m],
            "delta": None if report.delta is None else report.delta[m],
            "certified": report.certified[m],
        })
    out = _resolve_out(cfg, out, f"lattice.{fmt}")
    if fmt == "csv":
        lines = ["# tcbubbles lattice report", _config_line(resolved),
                 "# summary: " + json.dumps(summary, sort_keys=True, separators=(",", ":")),
                 ",".join(cols)]
        for r in rows:
            lines.append(",".join(_num_to_cell(r[c]) for c in cols))
        _write(out, "\n".join(lines) + "\n")
    else:
        doc = {"config": resolved, "summary": summary,
               "rows": [{c: (_num_to_json(r[c]) if c not in ("node", "stage", "certified") else r[c])
                         for c in cols} for r in rows]}
        _write(out, _json_doc(doc))
    return 0


def run_sweep(cfg: dict, out: Optional[str] = None) -> int:
    _check_keys(cfg, {"kind", "tree", "lambdas", "format", "out", "exact"}, "sweep")
    if "tree" not in cfg:
        raise BadConfig("sweep needs a tree fixture (config key 'tree')")
    lams = cfg.get("lambdas")
    if not lams:
        raise BadConfig("sweep needs a nonempty ascending 'lambdas' list")
    rates = [coerce_number(l) if isinstance(l, str) else l for l in lams]
    if any(float(a) >= float(b) for a, b in zip(rates, rates[1:])):
        raise BadConfig("lambdas must be strictly ascending")
    tree = load_tree(cfg["tree"])
    costs = [TransactionCost(l) for l in rates]
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise BadConfig(f"format must be csv or json, got {fmt!r}")
    if cfg.get("exact") and not (tree.is_exact and all(c.is_exact for c in costs)):
        raise BadConfig("--exact demands a rational tree fixture and rates")

    entries = cps.lambda_sweep(tree, [c.lam for c in costs])
    resolved = {"command": "sweep", "tree": _tree_to_fixture(tree),
                "lambdas": [_num_to_json(c.lam) for c in costs], "format": fmt}
    cols = ("lam", "cps_exists", "fundamental_root", "beta_root")
    rows = [{"lam": e.lam, "cps_exists": e.cps_exists,
             "fundamental_root": e.fundamental_root, "beta_root": e.beta_root}
            for e in entries]
    out = _resolve_out(cfg, out, f"sweep.{fmt}")
    if fmt == "csv":
        lines = ["# tcbubbles sweep report", _config_line(resolved), ",".join(cols)]
        for r in rows:
            lines.append(",".join(_num_to_cell(r[c]) for c in cols))
        _write(out, "\n".join(lines) + "\n")
    else:
        doc = {"config": resolved,
               "rows": [{c: (_num_to_json(r[c]) if c != "cps_exists" else r[c]) for c in cols}
                        for r in rows]}
        _write(out, _json_doc(doc))
    return 0


_SIM_KEYS = {
    "gbm": {"mu", "sigma", "s0"},
    "fbm": {"hurst", "mu", "time_change"},
    "inverse_bessel": set(),
    "bubble_birth": {"mu", "v0"},
}


def _build_grid(cfg: dict) -> processes.TimeGrid:
    g = cfg.get("grid")
    if not isinstance(g, dict) or set(g) != {"t0", "t1", "steps"}:
        raise BadConfig("grid must be an object with exactly t0, t1, steps")
    return processes.TimeGrid(float(g["t0"]), float(g["t1"]), int(g["steps"]))


def run_simulate(cfg: dict, out: Optional[str] = None) -> int:
    kind = cfg.get("kind")
    if kind not in _SIM_KEYS:
        raise BadConfig(f"simulate kind must be one of {sorted(_SIM_KEYS)}, got {kind!r}")
    allowed = {"kind", "grid", "n_paths", "seed", "format", "out"} | _SIM_KEYS[kind]
    _check_keys(cfg, allowed, f"simulate[{kind}]")
    for key in ("n_paths", "seed"):
        if key not in cfg:
            raise BadConfig(f"simulate needs '{key}'")
    grid = _build_grid(cfg)
    n_paths, seed = int(cfg["n_paths"]), int(cfg["seed"])
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise BadConfig(f"format must be csv or json, got {fmt!r}")

    if kind == "gbm":
        ens = processes.simulate_gbm(cfg.get("mu", 0.0), cfg.get("sigma", 0.2),
                                     cfg.get("s0", 1.0), grid, n_paths, seed)
    elif kind == "fbm":
        sim = (processes.simulate_fbm_time_changed if cfg.get("time_change")
               else processes.simulate_fbm_model)
        ens = sim(cfg.get("hurst", 0.5), cfg.get("mu", 0.0), grid, n_paths, seed)
    elif kind == "inverse_bessel":
        ens = processes.simulate_inverse_bessel(grid, n_paths, seed)
    else:
        ens = processes.simulate_bubble_birth(cfg.get("mu", 0.0), cfg.get("v0", 0.4),
                                              None, grid, n_paths, seed)

    config = dict(ens.config)
    config["format"] = fmt
    out = _resolve_out(cfg, out, f"ensemble.{fmt}")
    times = ens.grid.times()
    aux_items = {k: v for k, v in ens.aux.items() if hasattr(v, "__len__")}
    aux_scalars = {k: v for k, v in ens.aux.items() if not hasattr(v, "__len__")}
    if fmt == "csv":
        lines = ["# tcbubbles ensemble", _config_line(config),
                 ",".join(["t"] + [f"path{i}" for i in range(ens.n_paths)])]
        for k in range(len(times)):
            lines.append(",".join([repr(float(times[k]))]
                                  + [repr(float(v)) for v in ens.paths[:, k]]))
        _write(out, "\n".join(lines) + "\n")
        if aux_items or aux_scalars:
            alines = ["# tcbubbles ensemble aux", _config_line(config)]
            for k, v in sorted(aux_scalars.items()):
                alines.append(f"# {k}: {v}")
            names = sorted(aux_items)
            alines.append(",".join(["path"] + names))
            for i in range(ens.n_paths):
                alines.append(",".join([str(i)] + [_num_to_cell(_py_scalar(aux_items[k][i]))
                                                   for k in names]))
            _write(out + ".aux", "\n".join(alines) + "\n")
    else:
        doc = {"config": config,
               "times": [float(t) for t in times],
               "paths": [[float(v) for v in row] for row in ens.paths],
               "aux": {**{k: [_py_scalar(x) for x in v] for k, v in aux_items.items()},
                       **aux_scalars}}
        _write(out, _json_doc(doc))
    return 0


def _py_scalar(x):
    if hasattr(x, "item"):
        x = x.item()
    return x


def run_figure1(cfg: dict, out: Optional[str] = None) -> int:
    _check_keys(cfg, {"kind", "steps", "mu", "v0", "lam", "seed", "format", "out"}, "figure1")
    steps = int(cfg.get("steps", FIGURE1_DEFAULTS["steps"]))
    mu = float(cfg.get("mu", FIGURE1_DEFAULTS["mu"]))
    v0 = float(cfg.get("v0", FIGURE1_DEFAULTS["v0"]))
    lam_in = cfg.get("lam", FIGURE1_DEFAULTS["lam"])
    lam = coerce_number(lam_in) if isinstance(lam_in, str) else lam_in
    lam_f = float(TransactionCost(lam).lam)
    seed = int(cfg.get("seed", FIGURE1_DEFAULTS["seed"]))
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise BadConfig(f"format must be csv or json, got {fmt!r}")
    if steps < 1:
        raise BadConfig(f"steps must be positive, got {steps}")

    # the final day sits one spacing short of the volatility singularity at 1
    grid = processes.TimeGrid(0.0, steps / (steps + 1), steps)
    ens = processes.simulate_bubble_birth(mu, v0, None, grid, 1, seed)
    gamma = float(ens.aux["gamma"][0])
    times = grid.times()
    s = ens.paths[0]
    resolved = {"command": "figure1", "kind": "bubble_birth", "steps": steps,
                "mu": mu, "v0": v0, "lam": _num_to_json(lam), "seed": seed,
                "format": fmt}
    rows = []
    for k in range(len(times)):
        t_k = float(times[k])
        s_k = float(s[k])
        ask = (1.0 + lam_f) * s_k
        f = float(analytics.bubble_birth_fundamental(s_k, lam_f, gamma, t_k))
        rows.append((t_k, s_k, ask, f, ask - f))
    out = _resolve_out(cfg, out, f"figure1.{fmt}")
    if fmt == "csv":
        lines = ["# tcbubbles figure1", _config_line(resolved),
                 f"# gamma: {repr(gamma)}", "t,price,ask,fundamental,beta"]
        for r in rows:
            lines.append(",".join(repr(v) for v in r))
        _write(out, "\n".join(lines) + "\n")
    else:
        doc = {"config": resolved, "gamma": gamma,
               "rows": [{"t": r[0], "price": r[1], "ask": r[2],
                         "fundamental": r[3], "beta": r[4]} for r in rows]}
        _write(out, _json_doc(doc))
    return 0


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcbubbles",
        description="Bubble analysis on event trees under proportional transaction costs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, exact=False, lam=False, lambdas=False, sim=False):
        p.add_argument("--config", help="JSON scenario config")
        p.add_argument("--out", help="output path (joined with $%s if relative)" % OUT_DIR_ENV)
        p.add_argument("--format", choices=("csv", "json"), help="output format")
        if lam:
            p.add_argument("--lambda", dest="lam", help="cost rate, e.g. 0.1 or 1/10")
        if lambdas:
            p.add_argument("--lambda", dest="lam", help="comma-separated ascending rates")
        if exact:
            p.add_argument("--exact", action="store_true",
                           help="require exact rational arithmetic end to end")
        if sim:
            p.add_argument("--seed", type=int, help="RNG seed")
            p.add_argument("--paths", type=int, help="number of paths")

    p = sub.add_parser("lattice", help="per-node bubble report for a tree fixture")
    p.add_argument("--tree", help="tree fixture JSON path")
    common(p, exact=True, lam=True)

    p = sub.add_parser("sweep", help="root bubble across ascending cost rates")
    p.add_argument("--tree", help="tree fixture JSON path")
    common(p, exact=True, lambdas=True)

    p = sub.add_parser("simulate", help="simulate a path ensemble")
    p.add_argument("--kind", choices=sorted(_SIM_KEYS), help="process family")
    common(p, sim=True)

    p = sub.add_parser("figure1", help="single-path bubble-birth table (pinned defaults)")
    common(p, lam=True, sim=True)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    if args.format:
        cfg["format"] = args.format
    if args.command == "lattice":
        if args.tree:
            cfg["tree"] = args.tree
        if args.lam:
            cfg["lam"] = _parse_lam(args.lam)
        if args.exact:
            cfg["exact"] = True
        return run_lattice(cfg, args.out)
    if args.command == "sweep":
        if args.tree:
            cfg["tree"] = args.tree
        if args.lam:
            cfg["lambdas"] = [_parse_lam(s) for s in args.lam.split(",")]
        if args.exact:
            cfg["exact"] = True
        return run_sweep(cfg, args.out)
    if args.command == "simulate":
        if args.kind:
            cfg["kind"] = args.kind
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.paths is not None:
            cfg["n_paths"] = args.paths
        return run_simulate(cfg, args.out)
    if args.lam:
        cfg["lam"] = _parse_lam(args.lam)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.paths is not None and args.paths != 1:
        raise BadConfig("figure1 draws a single path")
    return run_figure1(cfg, args.out)


def main(argv=None) -> int:
    try:
        args = _make_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return _dispatch(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NoCps, NoEmm) as exc:
        note = " (Farkas certificate attached)" if getattr(exc, "certificate", None) else ""
        print(f"no price system: {exc}{note}", file=sys.stderr)
        return 2
    except (CertificationFailure, NumericalFailure) as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return 3
    except TcBubblesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
