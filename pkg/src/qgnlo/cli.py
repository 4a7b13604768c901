"""Command-line front end: solve, ensemble, scan, report.

Every run directory gets a manifest (resolved configuration, package
version, RNG seed, kernel path) sufficient to reproduce the outputs
byte-for-byte.  Numeric output files carry full round-trip precision;
human-readable summaries use three significant figures.

Exit codes: 0 success, 2 configuration error, 3 solver failure budget
exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, ensemble
from ._kernels import kernel_path
from .graphs import GraphError, GraphSpec
from .secular import SolverError, solve_graph
from .states import normalize, sum_rule_diagnostics, transition_moments
from .tensors import compute_tensor_set

ENV_OUTDIR = "QGNLO_OUTDIR"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    graph_file: Optional[str] = None
    topology_class: Optional[str] = None
    n_samples: int = 10000
    seed: int = 0
    n_states: int = 30
    k_max: Optional[float] = None
    workers: int = 1
    out_dir: Optional[str] = None
    formats: tuple[str, ...] = ("csv", "json")
    max_failure_rate: float = 0.02
    scan_kind: Optional[str] = None
    scan_points: int = 20
    scan_angles: int = 300
    run_dirs: tuple[str, ...] = ()

    def resolved_out_dir(self) -> Path:
        base = self.out_dir or os.environ.get(ENV_OUTDIR) or "qgnlo-runs"
        return Path(base)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(run_dir: Path, config: RunConfig) -> None:
    payload = {
        "tool": "qgnlo",
        "version": __version__,
        "kernel_path": kernel_path(),
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in asdict(config).items()},
    }
    _atomic_write(run_dir / "manifest.json",
                  json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(run_dir: Path) -> RunConfig:
    with open(run_dir / "manifest.json", encoding="utf-8") as fh:
        payload = json.load(fh)
    cfg = payload["config"]
    known = {f.name for f in fields(RunConfig)}
    kwargs = {k: v for k, v in cfg.items() if k in known}
    for key in ("formats", "run_dirs"):
        if key in kwargs and kwargs[key] is not None:
            kwargs[key] = tuple(kwargs[key])
    return RunConfig(**kwargs)


def _sig3(x: float) -> str:
    if x == 0 or not math.isfinite(x):
        return f"{x:g}"
    return f"{x:.3g}"


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(config: RunConfig) -> int:
    if not config.graph_file:
        raise ConfigError("solve requires --graph FILE")
    try:
        text = Path(config.graph_file).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read graph file: {exc}") from exc
    try:
        graph = GraphSpec.from_json(text)
    except (json.JSONDecodeError, GraphError) as exc:
        raise ConfigError(
            f"malformed graph file {config.graph_file}: {exc}") from exc

    sol = normalize(solve_graph(graph, config.n_states + 2, config.k_max))
    table = transition_moments(sol)
    tensors = compute_tensor_set(table, config.n_states)
    trk = sum_rule_diagnostics(table)

    report = {
        "graph": graph.to_dict(),
        "n_states": config.n_states,
        "wavenumbers": [float(k) for k in sol.ks[:10]],
        "mode_families": list(sol.families[:10]),
        "energies": [float(e) for e in sol.energies[:10]],
        "moments_excerpt": {
            "x01": float(table.x[0, 1]),
            "y01": float(table.y[0, 1]),
            "x00": float(table.x[0, 0]),
            "y00": float(table.y[0, 0]),
        },
        "tensors": tensors.to_dict(),
        "sum_rule_S00": {"combined": trk.combined, "x": trk.x_channel,
                         "y": trk.y_channel},
    }

    out_dir = config.resolved_out_dir()
    _write_manifest(out_dir, config)
    _atomic_write(out_dir / "solve_report.json",
                  json.dumps(report, indent=2, sort_keys=True) + "\n")

    print(f"topology class : {graph.topology_class}"
          + (" (closed)" if graph.closed else ""))
    print(f"lowest k       : "
          + " ".join(_sig3(k) for k in sol.ks[:6]))
    b = tensors.beta
    print(f"beta (xxx,xxy,xyy,yyy) : "
          + " ".join(_sig3(v) for v in (b.xxx, b.xxy, b.xyy, b.yyy)))
    print(f"beta_xxx at phi*       : {_sig3(tensors.beta_xxx_opt)}"
          f"   (phi* = {_sig3(tensors.phi_star)} rad)")
    print(f"beta_norm              : {_sig3(tensors.beta_norm)}")
    print(f"gamma_xxxx range       : [{_sig3(tensors.gamma_xxxx_min)}, "
          f"{_sig3(tensors.gamma_xxxx_max)}]")
    print(f"three-level E, X       : {_sig3(tensors.three_level.e_ratio)}, "
          f"{_sig3(tensors.three_level.x_ratio)}")
    print(f"S00 (x+y, {config.n_states} states) : {_sig3(trk.combined)}")
    print(f"report written to {out_dir / 'solve_report.json'}")
    return 0


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------

def cmd_ensemble(config: RunConfig) -> int:
    if not config.topology_class:
        raise ConfigError("ensemble requires --class NAME")
    if config.topology_class not in ensemble.GEOMETRY_BUILDERS:
        raise ConfigError(
            f"unknown class {config.topology_class!r}; known: "
            + ", ".join(sorted(ensemble.GEOMETRY_BUILDERS)))
    result = ensemble.sample_topology(config.topology_class,
                                      config.n_samples, config.seed,
                                      config.n_states, config.workers)
    out_dir = config.resolved_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, config)
    if "csv" in config.formats:
        tmp = out_dir / "records.csv"
        ensemble.write_records_csv(tmp, result.records)
    if "json" in config.formats:
        ensemble.write_summary_json(out_dir / "summary.json", result.summary)

    s = result.summary
    print(f"class {s.class_name}: {s.n_samples} samples, "
          f"{s.n_failed} failed")
    print(f"max |beta_xxx(phi*)| : {_sig3(s.max_abs_beta_xxx)} "
          f"(sample {s.argmax_id})")
    print(f"max beta_norm        : {_sig3(s.max_beta_norm)}")
    print(f"gamma_xxxx range     : [{_sig3(s.gamma_min)}, "
          f"{_sig3(s.gamma_max)}]")
    rate = s.n_failed / max(s.n_samples, 1)
    if rate > config.max_failure_rate:
        print(f"failure rate {rate:.2%} exceeds budget "
              f"{config.max_failure_rate:.2%}", file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

def cmd_scan(config: RunConfig) -> int:
    out_dir = config.resolved_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, config)
    if config.scan_kind == "prong":
        middle = np.linspace(0.1, 1.0, config.scan_points)
        short = np.linspace(0.02, 1.0, config.scan_points)
        res = ensemble.prong_scan_3star(middle, short,
                                        n_angles=config.scan_angles,
                                        seed=config.seed,
                                        n_states=config.n_states)
        lines = ["middle,short,max_beta_xxx"]
        lines += [f"{m!r},{s!r},{b!r}" for m, s, b in res.rows()]
        _atomic_write(out_dir / "prong_scan.csv", "\n".join(lines) + "\n")
        print(f"peak max|beta_xxx| at (middle, short) = "
              f"({_sig3(res.peak[0])}, {_sig3(res.peak[1])})")
    elif config.scan_kind == "angle":
        swept = np.linspace(0.0, 2.0 * math.pi, max(config.scan_points, 4))
        res = ensemble.angle_scan((1.0, 0.6, 0.13), swept,
                                  n_draws=max(config.scan_angles // 10, 4),
                                  seed=config.seed,
                                  n_states=config.n_states)
        lines = ["middle_angle,draw,beta_xxx_opt,beta_xxx_raw,short_angle"]
        for i, th in enumerate(res.swept):
            for d in range(res.beta_opt.shape[1]):
                lines.append(f"{th!r},{d},{res.beta_opt[i, d]!r},"
                             f"{res.beta_raw[i, d]!r},"
                             f"{res.short_angles[i, d]!r}")
        _atomic_write(out_dir / "angle_scan.csv", "\n".join(lines) + "\n")
        best = res.swept[int(np.argmax(res.beta_opt.max(axis=1)))]
        print(f"best middle-prong angle: {_sig3(float(best))} rad")
    elif config.scan_kind == "delta":
        res = ensemble.delta_wire_scan(n_states=config.n_states)
        cols = list(res.rows[0].keys())
        lines = [",".join(cols)]
        lines += [",".join(repr(r[c]) for c in cols) for r in res.rows]
        _atomic_write(out_dir / "delta_scan.csv", "\n".join(lines) + "\n")
        print(f"max |beta| = {_sig3(res.max_abs_beta)} at g = "
              f"{_sig3(res.arg_g)}, s0 = {_sig3(res.arg_s0)}")
    else:
        raise ConfigError("scan requires --kind prong|angle|delta")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(config: RunConfig) -> int:
    if not config.run_dirs:
        raise ConfigError("report requires at least one run directory")
    rows = []
    for d in config.run_dirs:
        path = Path(d) / "summary.json"
        if not path.exists():
            raise ConfigError(f"no summary.json in {d}; not an ensemble run "
                              "directory or the run is incomplete")
        with open(path, encoding="utf-8") as fh:
            s = json.load(fh)
        if s.get("n_samples", 0) == 0:
            raise ConfigError(f"empty ensemble in {d}")
        rows.append(s)
    rows.sort(key=lambda s: s["class"])
    header = f"{'class':20s} {'samples':>8s} {'max|b_xxx|':>11s} " \
             f"{'b_norm':>8s} {'gamma range':>18s}"
    print(header)
    print("-" * len(header))
    for s in rows:
        grange = f"[{_sig3(s['gamma_min'])}, {_sig3(s['gamma_max'])}]"
        print(f"{s['class']:20s} {s['n_samples']:8d} "
              f"{_sig3(s['max_abs_beta_xxx']):>11s} "
              f"{_sig3(s['max_beta_norm']):>8s} {grange:>18s}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qgnlo",
        description="Metric-graph spectra, moments, and intrinsic "
                    "hyperpolarizabilities")
    p.add_argument("--config", help="JSON config file; flags override")
    sub = p.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--states", type=int, dest="n_states")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", dest="out_dir")

    sp = sub.add_parser("solve", help="solve one graph file")
    sp.add_argument("--graph", dest="graph_file")
    sp.add_argument("--k-max", type=float, dest="k_max")
    common(sp)

    sp = sub.add_parser("ensemble", help="Monte Carlo over a topology class")
    sp.add_argument("--class", dest="topology_class")
    sp.add_argument("--samples", type=int, dest="n_samples")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--formats", type=lambda s: tuple(s.split(",")))
    sp.add_argument("--max-failure-rate", type=float,
                    dest="max_failure_rate")
    common(sp)

    sp = sub.add_parser("scan", help="parameter scans (prong, angle, delta)")
    sp.add_argument("--kind", dest="scan_kind",
                    choices=["prong", "angle", "delta"])
    sp.add_argument("--points", type=int, dest="scan_points")
    sp.add_argument("--angles", type=int, dest="scan_angles")
    common(sp)

    sp = sub.add_parser("report", help="aggregate ensemble run directories")
    sp.add_argument("run_dirs", nargs="*")
    return p


def build_config(argv) -> RunConfig:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        raise ConfigError("a command is required")
    base = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad config file: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    merged = {k: v for k, v in base.items() if k in known}
    for key, val in vars(args).items():
        if key in ("config",):
            continue
        if key in known and val not in (None, []):
            merged[key] = val
    merged["command"] = args.command
    if "run_dirs" in merged:
        merged["run_dirs"] = tuple(merged["run_dirs"])
    if "formats" in merged:
        merged["formats"] = tuple(merged["formats"])
    return RunConfig(**merged)


HANDLERS = {
    "solve": cmd_solve,
    "ensemble": cmd_ensemble,
    "scan": cmd_scan,
    "report": cmd_report,
}


def main(argv=None) -> int:
    try:
        config = build_config(sys.argv[1:] if argv is None else argv)
        return HANDLERS[config.command](config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
