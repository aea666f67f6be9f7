"""Command-line front end.

    truncem converge --config vq2_fig1.json --out runs/fig1 --workers 4

Exit codes: 0 ok, 2 config error, 3 simulation fault, 4 validation failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__, _backend
from .brownian import GENERATOR_NAME, BrownianDriver
from .engine import SimulationFault, simulate_batch
from .grid import build_grid
from .lab import (METRICS, estimate_moment, estimate_step_gap, exit_probabilities, fit_rate,
                  strong_errors)
from .model import ModelSpec, check_assumptions, model_by_name
from .truncation import (TruncationPolicy, default_policy, gamma, hypothesis_holds, cubic_policy,
                         truncation_bound)
from .yamada_watanabe import YWParams, property_violations

log = logging.getLogger("truncem")

EXIT_OK, EXIT_CONFIG, EXIT_FAULT, EXIT_VALIDATION = 0, 2, 3, 4
VALIDATION_TOL = 1e-9
YW_TOL = 1e-10
COMMANDS = ("converge", "simulate", "moments", "gap", "exit-prob", "validate", "yw-check")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int
    model: Optional[str] = None
    models: Optional[list] = None
    model_params: dict = field(default_factory=dict)
    policy: Any = None
    T: float = 2.0
    deltas: Optional[list] = None
    delta_ref: Any = None
    delta: Any = None
    n_paths: int = 500
    metric: str = "l1_terminal"
    scheme: str = "truncated"
    p: float = 2.0
    K: Any = None
    box: list = field(default_factory=lambda: [-10.0, 10.0])
    n_samples: int = 10_000
    thetas: list = field(default_factory=lambda: [2.0, 10.0, 2 ** 1.5])
    eps: list = field(default_factory=lambda: [0.1, 0.001])
    n_x: int = 10_000
    out: Optional[str] = None

    def model_names(self) -> list[str]:
        if self.models:
            return list(self.models)
        if self.model:
            return [self.model]
        raise ConfigError("config needs 'model' or 'models'")


_POW2 = re.compile(r"^\s*2\s*(\^|\*\*)\s*(-?\d+)\s*$")


def parse_step(v) -> float:
    """A step size given as a number or as ``"2^-9"``."""
    if isinstance(v, bool):
        raise ConfigError(f"bad step size {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        m = _POW2.match(v)
        if m:
            return 2.0 ** int(m.group(2))
        try:
            return float(v)
        except ValueError:
            pass
    raise ConfigError(f"bad step size {v!r}")


def load_config(source) -> tuple[RunConfig, dict]:
    """Parse a JSON config, rejecting unknown keys.  Returns the config and the raw dict."""
    if isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        if not path.exists():
            packaged = resources.files("truncem") / "configs" / path.name
            if not packaged.is_file():
                raise ConfigError(f"config file {source!s} not found")
            text = packaged.read_text()
        else:
            text = path.read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {source}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "seed" not in raw:
        raise ConfigError("config needs 'seed'")
    if isinstance(raw["seed"], bool) or not isinstance(raw["seed"], int) or raw["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    return RunConfig(**raw), raw


def resolve_policy(spec, model: ModelSpec) -> TruncationPolicy:
    if spec is None or spec == "default":
        return default_policy(model)
    if spec == "cubic":
        return cubic_policy()
    if isinstance(spec, dict):
        allowed = {"L", "upsilon", "epsilon", "L0", "strict"}
        bad = sorted(set(spec) - allowed)
        if bad:
            raise ConfigError(f"unknown policy keys: {', '.join(bad)}")
        base = dataclasses.asdict(default_policy(model))
        base.update(spec)
        return TruncationPolicy(**base)
    raise ConfigError(f"bad policy {spec!r}")


def manifest(cfg_raw: dict, command: str) -> dict:
    canon = {k: v for k, v in cfg_raw.items() if k != "out"}
    digest = hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()
    return {
        "artifact_version": __version__,
        "command": command,
        "seed": cfg_raw.get("seed"),
        "generator": GENERATOR_NAME,
        "config_hash": digest,
    }


def fmt(v) -> str:
    """Shortest round-trip float text."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: list[str], rows, meta: dict):
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path: Path, obj):
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=default, allow_nan=True)
        fh.write("\n")


# ------------------------------------------------------------------ commands

def _models(cfg: RunConfig, override: Optional[ModelSpec]) -> list[ModelSpec]:
    if override is not None:
        return [override]
    try:
        names = cfg.model_names()
        params = cfg.model_params if len(names) == 1 else {}
        return [model_by_name(n, params) for n in names]
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _prepare(fn):
    """Wrap config-stage errors from the library as ConfigError."""
    try:
        return fn()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_converge(cfg, raw, out: Path, workers=1, model=None) -> dict:
    models = _models(cfg, model)
    if cfg.metric not in METRICS:
        raise ConfigError(f"unknown metric {cfg.metric!r}")
    if not cfg.deltas or cfg.delta_ref is None:
        raise ConfigError("converge needs 'deltas' and 'delta_ref'")
    deltas = [parse_step(d) for d in cfg.deltas]
    delta_ref = parse_step(cfg.delta_ref)

    def check():
        plans = []
        for m in models:
            pol = resolve_policy(cfg.policy, m)
            for d in deltas + [delta_ref]:
                build_grid(cfg.T, m.delays, d)
                truncation_bound(pol, d)
            if delta_ref >= min(deltas):
                raise ConfigError("delta_ref must be smaller than every delta")
            if cfg.n_paths < 2:
                raise ConfigError("n_paths must be >= 2")
            plans.append((m, pol))
        return plans

    plans = _prepare(check)
    meta = manifest(raw, "converge")
    summary = {"manifest": meta, "metric": cfg.metric, "reports": []}
    for m, pol in plans:
        rep = strong_errors(m, pol, cfg.T, deltas, delta_ref, cfg.n_paths, cfg.seed, workers)[cfg.metric]
        name = "errors.csv" if len(plans) == 1 else f"errors_{m.name}.csv"
        write_csv(out / name, ["delta", "error", "stderr", "n_paths"],
                  ([p.delta, p.error, p.stderr, p.n_paths] for p in rep.points), meta)
        d = rep.as_dict()
        d["policy"] = dataclasses.asdict(pol)
        d["hypothesis"] = [{"delta": x, "gamma": gamma(pol, x), "holds": hypothesis_holds(pol, x)}
                           for x in deltas]
        summary["reports"].append(d)
        log.info("%s: p* = %s", m.name, rep.p_star)
    rates = [r["p_star"] for r in summary["reports"] if r["p_star"] is not None]
    if len(rates) > 1:
        summary["max_rate_spread"] = max(rates) - min(rates)
    write_json(out / "summary.json", summary)
    return summary


def _single_grid(cfg, m):
    if cfg.delta is None:
        raise ConfigError("this command needs 'delta'")
    return build_grid(cfg.T, m.delays, parse_step(cfg.delta))


def cmd_simulate(cfg, raw, out: Path, workers=1, model=None) -> dict:
    (m,) = _models(cfg, model)[:1]
    if cfg.scheme not in ("truncated", "classical"):
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")

    def check():
        g = _single_grid(cfg, m)
        pol = resolve_policy(cfg.policy, m)
        if cfg.scheme == "truncated":
            truncation_bound(pol, g.delta)
        if cfg.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        return g, pol

    g, pol = _prepare(check)
    inc = BrownianDriver(cfg.seed, g.delta, g.M_T).block(range(cfg.n_paths))
    paths, fault = simulate_batch(m, g, inc, pol, scheme=cfg.scheme)
    if cfg.scheme == "truncated" and np.any(fault >= 0):
        i = int(np.flatnonzero(fault >= 0)[0])
        raise SimulationFault(f"non-finite state in path {i} at step {fault[i]}", i, int(fault[i]))
    t = g.forward_times()
    meta = manifest(raw, "simulate")

    def rows():
        for i in range(paths.shape[0]):
            for k in range(g.M_T + 1):
                yield i, k, t[k], paths[i, g.M + k], 0 <= fault[i] <= k

    write_csv(out / "paths.csv", ["path", "k", "t", "value", "exploded"], rows(), meta)
    summary = {"manifest": meta, "scheme": cfg.scheme, "n_paths": cfg.n_paths,
               "explosion_fraction": float(np.mean(fault >= 0))}
    write_json(out / "summary.json", summary)
    return summary


def cmd_moments(cfg, raw, out: Path, workers=1, model=None) -> dict:
    (m,) = _models(cfg, model)[:1]

    def check():
        g = _single_grid(cfg, m)
        pol = resolve_policy(cfg.policy, m)
        if cfg.scheme == "truncated":
            truncation_bound(pol, g.delta)
        elif cfg.scheme != "classical":
            raise ConfigError(f"unknown scheme {cfg.scheme!r}")
        if cfg.p < 1:
            raise ConfigError("p must be >= 1")
        return g, pol

    g, pol = _prepare(check)
    est = estimate_moment(m, pol, g, cfg.n_paths, cfg.seed, cfg.p, cfg.scheme, workers)
    meta = manifest(raw, "moments")
    write_csv(out / "moments.csv", ["k", "t", "moment"],
              ((k, t, v) for k, (t, v) in enumerate(zip(est.times, est.moments))), meta)
    summary = {"manifest": meta, "p": cfg.p, "max_moment": est.max,
               "explosion_fraction": est.explosion_fraction, "scheme": cfg.scheme}
    write_json(out / "summary.json", summary)
    return summary


def cmd_gap(cfg, raw, out: Path, workers=1, model=None) -> dict:
    (m,) = _models(cfg, model)[:1]
    if not cfg.deltas:
        raise ConfigError("gap needs 'deltas'")
    deltas = [parse_step(d) for d in cfg.deltas]

    def check():
        pol = resolve_policy(cfg.policy, m)
        for d in deltas:
            build_grid(cfg.T, m.delays, d)
            truncation_bound(pol, d)
        return pol

    pol = _prepare(check)
    gaps = [estimate_step_gap(m, pol, d, cfg.n_paths, cfg.seed, cfg.p, cfg.T, workers) for d in deltas]
    meta = manifest(raw, "gap")
    write_csv(out / "gap.csv", ["delta", "gap"], zip(deltas, gaps), meta)
    summary = {"manifest": meta, "p": cfg.p, "gaps": gaps, "deltas": deltas}
    try:
        summary["log_C"], summary["slope"] = fit_rate(list(zip(deltas, gaps)))
    except ValueError:
        summary["slope"] = None
    write_json(out / "summary.json", summary)
    return summary


def cmd_exit_prob(cfg, raw, out: Path, workers=1, model=None) -> dict:
    (m,) = _models(cfg, model)[:1]
    if cfg.K is None:
        raise ConfigError("exit-prob needs 'K'")
    Ks = [float(k) for k in (cfg.K if isinstance(cfg.K, list) else [cfg.K])]

    def check():
        g = _single_grid(cfg, m)
        pol = resolve_policy(cfg.policy, m)
        truncation_bound(pol, g.delta)
        sup_xi = float(np.max(np.abs(m.xi(np.arange(-g.M, 1) * g.delta))))
        for K in Ks:
            if not K > sup_xi:
                raise ConfigError(f"K={K} must exceed sup|xi|={sup_xi}")
        return g, pol

    g, pol = _prepare(check)
    probs = exit_probabilities(m, pol, g, cfg.n_paths, cfg.seed, Ks, workers)
    meta = manifest(raw, "exit-prob")
    write_csv(out / "exit.csv", ["K", "probability", "K2P"],
              ((K, P, K * K * P) for K, P in zip(Ks, probs)), meta)
    summary = {"manifest": meta, "K": Ks, "probability": probs}
    write_json(out / "summary.json", summary)
    return summary


def cmd_validate(cfg, raw, out: Path, workers=1, model=None) -> dict:
    (m,) = _models(cfg, model)[:1]
    box = cfg.box
    if not isinstance(box, list) or len(box) != 2:
        raise ConfigError("box must be [lo, hi]")
    report = _prepare(lambda: check_assumptions(m, tuple(box), cfg.n_samples, cfg.seed))
    summary = {"manifest": manifest(raw, "validate"), "report": report.as_dict(),
               "tolerance": VALIDATION_TOL, "passed": report.max_violation <= VALIDATION_TOL}
    write_json(out / "report.json", summary)
    return summary


def cmd_yw_check(cfg, raw, out: Path, workers=1, model=None) -> dict:
    rows = []
    for th in cfg.thetas:
        for e in cfg.eps:
            params = _prepare(lambda: YWParams(float(th), float(e)))
            v = property_violations(params, cfg.n_x, cfg.seed)
            rows.append({"theta": float(th), "eps": float(e), **v, "max": max(v.values())})
    worst = max(r["max"] for r in rows)
    summary = {"manifest": manifest(raw, "yw-check"), "results": rows, "tolerance": YW_TOL,
               "passed": worst <= YW_TOL}
    write_json(out / "yw.json", summary)
    return summary


HANDLERS = {
    "converge": cmd_converge,
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "gap": cmd_gap,
    "exit-prob": cmd_exit_prob,
    "validate": cmd_validate,
    "yw-check": cmd_yw_check,
}


def run(command: str, config, out=None, workers: int = 1, model: Optional[ModelSpec] = None) -> int:
    """Run one subcommand; returns the process exit code.

    ``model`` substitutes a library-defined model for the config's named one.
    """
    try:
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg, raw = load_config(config)
        out_dir = Path(out or cfg.out or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[command](cfg, raw, out_dir, workers, model)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    if command in ("validate", "yw-check") and not summary["passed"]:
        print(f"{command}: violation above tolerance", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="truncem", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file or packaged config name")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    log.info("kernel backend: %s", _backend.BACKEND)
    return run(args.command, args.config, args.out, args.workers)


if __name__ == "__main__":
    sys.exit(main())
