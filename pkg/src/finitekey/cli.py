"""Command-line front end.

Commands: ``rate``, ``optimize``, ``table``, ``validate``.  Every command
reads an optional JSON config (``--config``); flags override config values.

Exit codes: 0 success, 1 validation checks failed, 2 configuration error,
3 numerical non-convergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import ALL_METHODS, Method, rhat_method4
from .channel import ChannelModel, ProtocolParams
from .exceptions import ConfigError, DomainError, FiniteKeyError, NonConvergenceError
from .keyrate import SecurityBudget, evaluate
from .mcvalidate import random_centering_config, rhat_direct, run_centering_suite, run_tail_suite
from .optimize import SearchSpace, optimize_rate

log = logging.getLogger("finitekey")

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_NONCONV, EXIT_IO = 0, 1, 2, 3, 4
LETTERS = {Method.M1: "A", Method.M2: "B", Method.M3: "C", Method.M4: "D"}

DEFAULT_TABLE = {"k": [3, 4], "s_X": [1e8, 1e9]}


# -- config ------------------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _section(cfg, key):
    sec = cfg.get(key, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {key!r} must be an object")
    return sec


def _build(cls, sec, key):
    try:
        return cls(**sec)
    except TypeError as exc:
        raise ConfigError(f"bad {key!r} section: {exc}") from exc
    except DomainError as exc:
        raise ConfigError(f"bad {key!r} section: {exc}") from exc


def channel_from(cfg) -> ChannelModel:
    return _build(ChannelModel, _section(cfg, "channel"), "channel")


def security_from(cfg) -> SecurityBudget:
    return _build(SecurityBudget, _section(cfg, "security"), "security")


def protocol_from(cfg) -> ProtocolParams:
    sec = dict(_section(cfg, "protocol"))
    if not sec:
        raise ConfigError("the rate command needs a 'protocol' section")
    for key in ("mus", "p_mu"):
        if key in sec:
            sec[key] = tuple(sec[key])
    return _build(ProtocolParams, sec, "protocol")


def space_from(cfg, k) -> SearchSpace:
    sec = dict(_section(cfg, "search"))
    sec.pop("k", None)
    if "bounds" in sec:
        merged = SearchSpace(k).bounds
        merged.update({b: tuple(v) for b, v in sec["bounds"].items()})
        sec["bounds"] = merged
    try:
        return SearchSpace(k, **sec)
    except TypeError as exc:
        raise ConfigError(f"bad 'search' section: {exc}") from exc


def methods_from(args, cfg) -> list[Method]:
    raw = args.method or cfg.get("methods", "all")
    if raw == "all":
        return list(ALL_METHODS)
    if isinstance(raw, str):
        raw = [raw]
    try:
        return [Method.parse(m) for m in raw]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _pick(flag, cfg, key, default):
    if flag is not None:
        return flag
    return cfg.get(key, default)


# -- output ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, Method):
        return o.value
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def emit(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise _OutputError(f"cannot write {out}: {exc}") from exc


class _OutputError(Exception):
    pass


def _params_dict(p: ProtocolParams) -> dict:
    return {"mus": list(p.mus), "p_mu": list(p.p_mu), "p_X": p.p_X, "s_X": p.s_X}


# -- commands ----------------------------------------------------------------

def cmd_rate(args, cfg) -> int:
    params = protocol_from(cfg)
    channel, budget = channel_from(cfg), security_from(cfg)
    results = [evaluate(params, m, channel, budget, strict=args.strict_feasibility)
               for m in methods_from(args, cfg)]
    if args.format == "json":
        emit(to_json({"protocol": _params_dict(params),
                      "results": [r.to_dict() for r in results]}), args.out)
    else:
        emit(to_csv([{"method": r.method.value, "R": r.R, "feasible": r.feasible,
                      "e_Z1": r.e_Z1, "e_p": r.e_p, "eps_sec": r.eps_sec,
                      "iterations": r.iterations} for r in results]), args.out)
    return EXIT_OK


def _seed_for(seed, *keys) -> int:
    return int(np.random.SeedSequence([int(seed), *keys]).generate_state(1)[0])


def _run_cell(job):
    k, s_X, method, channel, budget, space, evaluations, seed, strict = job
    res = optimize_rate(k, s_X, method, channel, budget, evaluations=evaluations,
                        seed=seed, space=space, strict=strict)
    return res


def _trace_steps(trace) -> list:
    """Lossless encoding of a best-so-far trace as ``[evaluation, value]`` change points."""
    steps, last = [], None
    for i, v in enumerate(trace):
        if v != last:
            steps.append([i + 1, v])
            last = v
    return steps


def _cell_record(k, s_X, res) -> dict:
    r = res.result
    return {"k": k, "s_X": s_X, "method": res.method.value,
            "R": r.R, "R_1e5": float(f"{r.R * 1e5:.6g}"), "feasible": r.feasible,
            "e_Z1": r.e_Z1, "e_p": r.e_p, "eps_sec": r.eps_sec,
            "params": _params_dict(res.params), "seed": res.seed,
            "evaluations": res.anneal.evaluations, "T0": res.anneal.T0,
            "trace": _trace_steps(res.anneal.trace)}


def _row(rec) -> dict:
    p = rec["params"]
    return {"k": rec["k"], "s_X": rec["s_X"], "method": rec["method"],
            "R_1e5": f"{rec['R'] * 1e5:.6g}", "p_X": p["p_X"], "mus": p["mus"],
            "p_mu": p["p_mu"]}


def _optimize_jobs(cells, args, cfg):
    channel, budget = channel_from(cfg), security_from(cfg)
    evaluations = int(_pick(args.budget, cfg, "budget", 200_000))
    seed = int(_pick(args.seed, cfg, "seed", 0))
    methods = methods_from(args, cfg)
    jobs = []
    for i, (k, s_X) in enumerate(cells):
        space = space_from(cfg, k)
        for m in methods:
            jobs.append((k, s_X, m, channel, budget, space, evaluations,
                         _seed_for(seed, k, i, ALL_METHODS.index(m)), args.strict_feasibility))
    return jobs


def _run_jobs(jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell, jobs))
    out = []
    for job in jobs:
        log.info("optimizing k=%s s_X=%g %s", job[0], job[1], job[2].value)
        out.append(_run_cell(job))
    return out


def cmd_optimize(args, cfg) -> int:
    k = int(_pick(args.k, cfg, "k", 3))
    s_X = float(_pick(args.s_x, cfg, "s_X", 1e9))
    jobs = _optimize_jobs([(k, s_X)], args, cfg)
    records = [_cell_record(k, s_X, res) for res in _run_jobs(jobs, args.workers)]
    if args.format == "json":
        doc = {"k": k, "s_X": s_X, "cells": records}
        for rec in records:
            doc[f"R_{LETTERS[Method.parse(rec['method'])]}"] = rec["R"]
        emit(to_json(doc), args.out)
    else:
        emit(to_csv([_row(rec) for rec in records]), args.out)
    return EXIT_OK


def cmd_table(args, cfg) -> int:
    table = _section(cfg, "table") or DEFAULT_TABLE
    ks = [int(k) for k in table.get("k", DEFAULT_TABLE["k"])]
    sxs = [float(s) for s in table.get("s_X", DEFAULT_TABLE["s_X"])]
    cells = [(k, s) for k in ks for s in sxs]
    jobs = _optimize_jobs(cells, args, cfg)
    records = [_cell_record(job[0], job[1], res)
               for job, res in zip(jobs, _run_jobs(jobs, args.workers))]
    if args.format == "json":
        emit(to_json({"cells": records}), args.out)
    else:
        emit(to_csv([_row(rec) for rec in records]), args.out)
        if args.out not in (None, "-"):
            emit(to_json({"cells": records}), str(args.out) + ".json")
    if args.series_dir:
        _write_series(records, Path(args.series_dir))
    return EXIT_OK


def _write_series(records, directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _OutputError(f"cannot create {directory}: {exc}") from exc
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec["k"], rec["method"]), []).append(rec)
    for (k, method), recs in sorted(groups.items()):
        rows = [{"s_X": r["s_X"], "R": r["R"]} for r in sorted(recs, key=lambda r: r["s_X"])]
        emit(to_csv(rows), directory / f"series_k{k}_{method}.csv")


def cmd_validate(args, cfg) -> int:
    sec = _section(cfg, "validate")
    seed = int(_pick(args.seed, cfg, "seed", 0))
    trials = int(_pick(args.budget, sec, "trials", 100_000))
    eps = tuple(float(e) for e in sec.get("eps", (1e-2, 1e-3)))
    max_M = int(sec.get("max_M", 8))
    rows = run_tail_suite(eps_targets=eps, trials=trials, seed=seed)
    centering = run_centering_suite(max_M)
    rows.append({"check": "centering_sum", "fixture": f"all populations M<={max_M}",
                 "t": "", "eps": "", "delta": "", "observed": len(centering),
                 "bound": sum(not r["passed"] for r in centering),
                 "passed": all(r["passed"] for r in centering)})
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = 0.0
    for _ in range(int(sec.get("rhat_configs", 100))):
        cfg_r = random_centering_config(rng, int(rng.integers(2, 1001)))
        direct = rhat_direct(cfg_r)
        if direct > 0:
            worst = max(worst, abs(rhat_method4(cfg_r) / direct - 1.0))
    rows.append({"check": "rhat_integral", "fixture": "random t<=1000", "t": "", "eps": "",
                 "delta": "", "observed": worst, "bound": 0.01, "passed": worst <= 0.01})
    if args.format == "json":
        emit(to_json({"rows": rows}), args.out)
    else:
        emit(to_csv(rows), args.out)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_CHECKS


COMMANDS = {"rate": cmd_rate, "optimize": cmd_optimize, "table": cmd_table,
            "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finitekey", description="Finite-key decoy-state BB84 key rates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("rate", "key rate for fixed protocol parameters"),
                        ("optimize", "anneal protocol parameters for one (k, s_X)"),
                        ("table", "optimized rates over a grid of k and s_X"),
                        ("validate", "certify the concentration inequalities")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--budget", type=int,
                       help="objective evaluations per run (trials for validate)")
        p.add_argument("--method", help="M1..M4 or all")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--strict-feasibility", action="store_true",
                       help="check the centering conditions for methods 3 and 4")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "optimize":
            p.add_argument("--k", type=int)
            p.add_argument("--s-x", type=float, dest="s_x")
        if name in ("optimize", "table"):
            p.add_argument("--workers", type=int, default=1)
        if name == "table":
            p.add_argument("--series-dir", help="write one s_X-vs-R CSV per (k, method)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if not hasattr(args, "workers"):
        args.workers = 1
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, DomainError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        log.error("numerical non-convergence: %s", exc)
        return EXIT_NONCONV
    except _OutputError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except FiniteKeyError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
