"""Command-line front door: one subcommand per pipeline stage plus full runs.

Exit codes: 0 success, 1 pipeline error, 2 usage error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .allocation import SolverError, optimize, uniform
from .codebook import tune_profile, tuned_profile
from .config import ConfigError, ExperimentConfig, load_config
from .harness import (PipelineError, Scheme, Variant, build_scene, colluding_protocol, compare,
                      heatmap_rows, pair_dict, run, scheme_pairs, trace)
from .scenario import GeometryError, Point2D, relative_gain_db
from .secrecy import location_rates
from .selection import NoSecureBeamsError

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3

SUBCOMMANDS = ("trace", "train", "select", "allocate", "secrecy", "run", "sweep-colluding")
STOCHASTIC = frozenset({"select", "secrecy", "run", "sweep-colluding"})

log = logging.getLogger("beamsec")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliInvocation:
    subcommand: str
    config: Path
    out: Path
    seed: Optional[int]
    threads: int
    verbosity: int = 0
    q_max: Optional[int] = None


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="experiment TOML file")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="root seed (required for stochastic stages)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads (default: available CPUs)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="beamsec",
                                     description="mmWave beam-pair secrecy simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    helps = {
        "trace": "trace Alice-Bob propagation paths (paths.csv)",
        "train": "beam sweep and gain tuning (acp.csv)",
        "select": "beam pairs for every scheme (pairs.json)",
        "allocate": "time allocation for the [allocate] csl matrix or the pipeline (allocation.json)",
        "secrecy": "secrecy heatmaps and leakage curves (heatmap.csv, leakage.csv)",
        "run": "full experiment with every output file",
        "sweep-colluding": "colluding-eavesdropper curves (colluding.csv, colluding.json)",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "sweep-colluding":
            p.add_argument("--q-max", type=int, help="largest coalition (default from config)")
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> CliInvocation:
    """Parse and validate; argparse exits with status 2 on usage errors."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.subcommand in STOCHASTIC and ns.seed is None:
        parser.error(f"{ns.subcommand} requires --seed")
    if ns.seed is not None and ns.seed < 0:
        parser.error("--seed must be >= 0")
    if ns.threads < 1:
        parser.error("--threads must be >= 1")
    q_max = getattr(ns, "q_max", None)
    if q_max is not None and q_max < 1:
        parser.error("--q-max must be >= 1")
    return CliInvocation(ns.subcommand, ns.config, ns.out, ns.seed, ns.threads, ns.verbose, q_max)


# -- output formatting -------------------------------------------------------

def fmt(value) -> str:
    """Fixed-decimal, 9 significant digits; integers and strings verbatim."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    x = float(value) + 0.0
    if x == 0:
        return "0"
    return np.format_float_positional(x, precision=9, unique=False, fractional=False, trim="-")


def _meta(digest: str, seed: Optional[int]) -> dict:
    return {"config_digest": digest, "seed": seed, "version": __version__}


def write_csv(path: Path, header: Sequence[str], rows, meta: dict) -> None:
    lines = [f"# {k}={'none' if v is None else v}" for k, v in meta.items()]
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path: Path, payload: dict, meta: dict) -> None:
    text = json.dumps({"meta": meta, **payload}, sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


# -- stages ------------------------------------------------------------------

def _trace(cfg: ExperimentConfig, inv: CliInvocation, meta: dict) -> None:
    paths = trace(cfg, Point2D(*cfg.scenario.tx), Point2D(*cfg.scenario.rx))
    carrier = cfg.scenario.carrier_ghz * 1e9
    rows = [(c.order, c.aod, c.aoa, c.delay, c.length, relative_gain_db(c, carrier),
             "-".join(str(b) for b in c.bounces) or "los") for c in paths]
    write_csv(inv.out / "paths.csv",
              ("order", "aod_deg", "aoa_deg", "delay_ns", "length_m", "gain_db", "bounces"),
              rows, meta)


def _acp_rows(scene):
    cb = scene.config.codebook
    _, backoff, _ = tune_profile(scene.acp, scene.tau_acp, cb.backoff_step_db, cb.max_backoff_db)
    tuned = tuned_profile(scene.acp, backoff).magnitude
    acp = scene.acp
    for l in range(len(acp.tx_angles)):
        for lp in range(len(acp.rx_angles)):
            yield (l, lp, acp.tx_angles[l], acp.rx_angles[lp], acp.magnitude[l, lp],
                   backoff[l], tuned[l, lp], acp.magnitude[l, lp] >= scene.tau_acp)


ACP_HEADER = ("tx_index", "rx_index", "tx_angle", "rx_angle", "magnitude", "backoff_db",
              "tuned_magnitude", "decodable")


def _train(cfg, inv, meta) -> None:
    scene = build_scene(cfg)
    write_csv(inv.out / "acp.csv", ACP_HEADER, _acp_rows(scene), meta)


def _select(cfg, inv, meta) -> None:
    scene = build_scene(cfg)
    hop = Scheme(Variant.RANDOM_HOP, cfg.schemes.random_hop_paths)
    payload = {
        "tau_acp": scene.tau_acp,
        "schemes": {
            "legacy": [pair_dict(p) for p in scheme_pairs(scene, Scheme(Variant.LEGACY), inv.seed)],
            "random_hop": [pair_dict(p) for p in scheme_pairs(scene, hop, inv.seed)],
            "beamsec": [pair_dict(p) for p in
                        scheme_pairs(scene, Scheme(Variant.BEAMSEC_UNIFORM), inv.seed)],
        },
    }
    write_json(inv.out / "pairs.json", payload, meta)


def _alloc_entry(alloc) -> dict:
    return {"T": [float(t) for t in alloc.fractions], "t": float(alloc.objective)}


def _allocate(cfg, inv, meta) -> None:
    if cfg.allocate is not None:
        csl = np.asarray(cfg.allocate.csl, dtype=float)
        uni = uniform(csl.shape[1])
        payload = {
            "csl": csl.tolist(),
            "optimized": _alloc_entry(optimize(csl)),
            "uniform": {"T": uni.fractions.tolist(),
                        "t": float(np.min(location_rates(uni, csl)))},
        }
        write_json(inv.out / "allocation.json", payload, meta)
        return
    if inv.seed is None:
        raise UsageError("allocate needs --seed when the config has no [allocate] csl matrix")
    result = run(cfg, inv.seed, inv.threads)
    _write_allocation(result, inv.out, meta)


def _write_allocation(result, out: Path, meta: dict) -> None:
    payload = {"schemes": {v.value: {**_alloc_entry(r.allocation),
                                     "csl": r.report.csl.tolist()}
                           for v, r in result.schemes.items()}}
    write_json(out / "allocation.json", payload, meta)


def _write_secrecy(result, out: Path, meta: dict) -> None:
    write_csv(out / "heatmap.csv", ("x", "y", "scheme", "metric", "value"),
              heatmap_rows(result), meta)
    rows = [(v.value, rate, prob) for v, r in result.schemes.items()
            for rate, prob in zip(r.report.leakage_rates, r.report.leakage)]
    write_csv(out / "leakage.csv", ("scheme", "rate", "probability"), rows, meta)


def _write_colluding(result, out: Path, meta: dict, protocol: str) -> None:
    rows = [(v.value, c.q, c.mean, c.worst, c.n_subsets)
            for v, curve in result.colluding.items() for c in curve]
    write_csv(out / "colluding.csv", ("scheme", "q", "mean_rate", "worst_rate", "subsets"),
              rows, {**meta, "protocol": protocol})


def _secrecy(cfg, inv, meta) -> None:
    _write_secrecy(run(cfg, inv.seed, inv.threads), inv.out, meta)


def _run(cfg, inv, meta) -> None:
    scene = build_scene(cfg)
    result = run(cfg, inv.seed, inv.threads, scene=scene)
    write_csv(inv.out / "acp.csv", ACP_HEADER, _acp_rows(scene), meta)
    pairs = {v.value: [pair_dict(p) for p in r.pairs] for v, r in result.schemes.items()}
    write_json(inv.out / "pairs.json", {"tau_acp": scene.tau_acp, "schemes": pairs}, meta)
    _write_allocation(result, inv.out, meta)
    _write_secrecy(result, inv.out, meta)
    _write_colluding(result, inv.out, meta, result.colluding_protocol)
    write_json(inv.out / "run_summary.json",
               {"result": result.to_dict(), "summary": compare(result)}, meta)


def _sweep(cfg, inv, meta) -> None:
    q_max = inv.q_max or cfg.colluding.q_max
    result = run(cfg, inv.seed, inv.threads, q_max=q_max)
    protocol = colluding_protocol(cfg, len(result.locations))
    _write_colluding(result, inv.out, meta, protocol)
    curves = {v.value: [{"q": c.q, "mean": c.mean, "worst": c.worst, "n_subsets": c.n_subsets}
                        for c in curve] for v, curve in result.colluding.items()}
    write_json(inv.out / "colluding.json", {"protocol": protocol, "curves": curves}, meta)


STAGES = {"trace": _trace, "train": _train, "select": _select, "allocate": _allocate,
          "secrecy": _secrecy, "run": _run, "sweep-colluding": _sweep}


def _error(kind: str, exc: BaseException) -> None:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)


def execute(inv: CliInvocation) -> int:
    logging.basicConfig(level=logging.WARNING - 10 * min(inv.verbosity, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if not inv.config.is_file():
        _error("usage", FileNotFoundError(f"config file not found: {inv.config}"))
        return EXIT_USAGE
    try:
        cfg = load_config(inv.config)
    except ConfigError as exc:
        _error("config", exc)
        return EXIT_CONFIG
    meta = _meta(cfg.digest(), inv.seed)
    log.info("%s: config %s digest %s seed %s", inv.subcommand, inv.config, meta["config_digest"],
             inv.seed)
    try:
        inv.out.mkdir(parents=True, exist_ok=True)
        STAGES[inv.subcommand](cfg, inv, meta)
    except UsageError as exc:
        _error("usage", exc)
        return EXIT_USAGE
    except (PipelineError, NoSecureBeamsError, SolverError, GeometryError, ValueError,
            OSError) as exc:
        _error("pipeline", exc)
        return EXIT_PIPELINE
    log.info("wrote outputs to %s", inv.out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        inv = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return execute(inv)
