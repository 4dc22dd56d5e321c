"""Command-line interface: ``relgs solve | scan-mass | verify | extend-check | rearrange``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checks import CHECKS, EXTENSION_CHECKS, CheckContext, run_check
from .config import ConfigError, RunConfig, load_config
from .minimizer import (
    COLLAPSING,
    CONVERGED,
    BracketError,
    initial_guess,
    problem_dict,
    scan_mass,
    solve,
)
from .spectral import (
    lp_norm,
    mass,
    read_snapshot,
    set_strict_deterministic,
    write_snapshot,
)
from .verify import kinetic_energy, radial_profile, rearrange

log = logging.getLogger("relgs")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_COLLAPSING = 2
EXIT_STALLED = 3
EXIT_CONFIG = 64


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _clean(x):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)) and not math.isfinite(x):
        return str(float(x))
    return x


def write_json(path: Path, obj) -> None:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default)
    path.write_text(text + "\n")


def _prepare(cfg: RunConfig) -> None:
    set_strict_deterministic(bool(cfg.get("run", "strict_deterministic")))


def _run_record(cfg: RunConfig, command: str, t0: float, outputs: dict, extra: dict = None) -> dict:
    rec = {
        "command": command,
        "config_hash": cfg.hash,
        "config": cfg.values,
        "config_path": str(cfg.source) if cfg.source else None,
        "version": version_string(),
        "wall_time_s": time.perf_counter() - t0,
        "outputs": outputs,
    }
    if extra:
        rec.update(extra)
    return rec


def _outdir(cfg: RunConfig) -> Path:
    d = cfg.output_dir()
    d.mkdir(parents=True, exist_ok=True)
    return d


def _initial(cfg: RunConfig, pb, g):
    kind = cfg.get("minimizer", "init")
    if kind == "snapshot":
        f = read_snapshot(cfg.resolve(cfg.require("minimizer", "init_file")))
        if f.grid != g:
            raise ConfigError("init snapshot grid does not match [grid]")
        return initial_guess(pb, g, "custom", custom=f)
    if kind not in ("gaussian", "seeded-random"):
        raise ConfigError(f"[minimizer] init must be gaussian, seeded-random or snapshot, got {kind!r}")
    try:
        return initial_guess(pb, g, kind, width=cfg.get("minimizer", "init_width"), seed=cfg.get("run", "seed"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- commands ------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    _prepare(cfg)
    pb = cfg.problem()
    g = cfg.grid()
    w0 = _initial(cfg, pb, g)
    rep = solve(pb, w0, cfg.solve_options(), seed=cfg.get("run", "seed"))
    out = _outdir(cfg)
    prefix = cfg.prefix("solve")
    snap = out / f"{prefix}.rgs"
    report = out / f"{prefix}.json"
    radial = out / f"{prefix}_radial.csv"
    write_snapshot(snap, rep.w)
    body = rep.to_dict()
    body["config_hash"] = cfg.hash
    body["snapshot"] = snap.name
    write_json(report, body)
    prof = radial_profile(rep.w)
    with open(radial, "w", newline="") as fh:
        fh.write(f"# config_sha256={cfg.hash}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["radius", "shell_average"])
        for r, a in zip(prof.radius, prof.average):
            wr.writerow([repr(float(r)), repr(float(a))])
    outputs = {"snapshot": snap.name, "report": report.name, "radial": radial.name}
    write_json(out / f"{prefix}_run.json", _run_record(cfg, "solve", t0, outputs, {"status": rep.status}))
    print(f"{rep.status}: I={rep.I_value:.12g} mu={rep.mu:.12g} residual={rep.residual:.3g} "
          f"iterations={rep.iterations} -> {report}")
    if rep.status == CONVERGED:
        return EXIT_OK
    if rep.status == COLLAPSING:
        return EXIT_COLLAPSING
    return EXIT_STALLED


SCAN_HEADER = ["M", "classification", "I", "mu", "residual"]


def cmd_scan_mass(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    _prepare(cfg)
    M_lo = cfg.require("scan", "M_lo")
    M_hi = cfg.require("scan", "M_hi")
    if not 0 < M_lo < M_hi:
        raise ConfigError(f"empty mass range: need 0 < M_lo < M_hi, got [{M_lo}, {M_hi}]")
    pb = cfg.problem(M=M_lo)
    if not pb.mass_critical:
        raise ConfigError(
            "scan-mass needs a mass-critical problem (eta = 0 and q = N); "
            f"got eta={pb.eta:g}, q={pb.q:g}, N={pb.N}: minimizers exist for every mass"
        )
    g = cfg.grid()
    try:
        res = scan_mass(pb, g, M_lo, M_hi, cfg.scan_options())
    except BracketError as exc:
        print(f"scan failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = _outdir(cfg)
    prefix = cfg.prefix("scan")
    table = out / f"{prefix}.csv"
    buf = io.StringIO()
    buf.write(f"# config_sha256={cfg.hash}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SCAN_HEADER)
    for e in res.entries:
        M, cls, I, mu, r = e.row()
        wr.writerow([repr(float(M)), cls, repr(float(I)), repr(float(mu)), repr(float(r))])
    table.write_text(buf.getvalue())
    bracket = out / f"{prefix}_bracket.json"
    write_json(bracket, {
        "config_hash": cfg.hash,
        "bracket": list(res.bracket),
        "midpoint": res.midpoint,
        "relative_width": res.relative_width,
        "tol_M": cfg.get("scan", "tol_M"),
        "grid": {"N": g.N, "L": g.L, "n": g.n},
        "problem": problem_dict(pb),
    })
    outputs = {"table": table.name, "bracket": bracket.name}
    write_json(out / f"{prefix}_run.json", _run_record(cfg, "scan-mass", t0, outputs))
    print(f"M_c in [{res.bracket[0]:.6g}, {res.bracket[1]:.6g}] -> {table}")
    return EXIT_OK


def _parse_checks(spec: str | None, default) -> list:
    if spec is None or spec == "all":
        return list(default)
    names = [s.strip() for s in spec.split(",") if s.strip()]
    bad = [s for s in names if s not in CHECKS]
    if bad:
        raise ConfigError(f"unknown check(s) {', '.join(bad)}; known: {', '.join(CHECKS)}")
    if not names:
        raise ConfigError("empty check list")
    return names


def _run_checks(cfg: RunConfig, names: list, command: str) -> int:
    t0 = time.perf_counter()
    _prepare(cfg)
    pb = cfg.problem(M=cfg.get("problem", "M", 1.0))
    g = cfg.grid()
    ctx = CheckContext(
        pb, g,
        corpus_size=cfg.get("verify", "corpus_size"),
        seed=cfg.get("verify", "corpus_seed"),
        solve_options=cfg.solve_options(),
        init_width=cfg.get("minimizer", "init_width"),
    )
    out = _outdir(cfg)
    prefix = cfg.prefix(command)
    outputs, all_ok = {}, True
    for name in names:
        rep = run_check(name, ctx)
        body = rep.to_json()
        body["config_hash"] = cfg.hash
        body["details"] = {k: v for k, v in rep.details.items() if k != "ratios"}
        if not rep.passed and rep.worst_instance is not None:
            snap = out / f"{prefix}_{name}_worst.rgs"
            write_snapshot(snap, rep.worst_instance)
            body["worst_instance"] = snap.name
        path = out / f"{prefix}_{name}.json"
        write_json(path, body)
        outputs[name] = path.name
        all_ok = all_ok and rep.passed
        print(f"{name}: {'pass' if rep.passed else 'FAIL'} worst_margin={body['worst_margin']}")
    write_json(out / f"{prefix}_run.json", _run_record(cfg, command, t0, outputs, {"pass": all_ok}))
    return EXIT_OK if all_ok else EXIT_FAIL


def cmd_verify(cfg: RunConfig, checks: str | None) -> int:
    return _run_checks(cfg, _parse_checks(checks, CHECKS), "verify")


def cmd_extend_check(cfg: RunConfig) -> int:
    return _run_checks(cfg, list(EXTENSION_CHECKS), "extend-check")


def cmd_rearrange(snapshot: Path, output: Path | None, m: float) -> int:
    f = read_snapshot(snapshot)
    out = output or snapshot.with_name(snapshot.stem + ".rearranged.rgs")
    if out.resolve() == snapshot.resolve():
        raise ConfigError("refusing to overwrite the input snapshot")
    fs = rearrange(f)
    write_snapshot(out, fs)
    summary = {
        "input": str(snapshot),
        "output": str(out),
        "mass": mass(f),
        "mass_rearranged": mass(fs),
        "L4": lp_norm(f, 4.0),
        "L4_rearranged": lp_norm(fs, 4.0),
        "kinetic": kinetic_energy(m, f),
        "kinetic_rearranged": kinetic_energy(m, fs),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


# -- entry point ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relgs", description=__doc__)
    ap.add_argument("--version", action="version", version=f"relgs {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="minimise the energy at the configured mass")
    p.add_argument("config", type=Path)
    p = sub.add_parser("scan-mass", help="bracket the critical mass (eta = 0, q = N)")
    p.add_argument("config", type=Path)
    p = sub.add_parser("verify", help="run numerical property checks")
    p.add_argument("config", type=Path)
    p.add_argument("--checks", default="all", help=f"comma list or 'all' ({', '.join(CHECKS)})")
    p = sub.add_parser("extend-check", help="half-space extension identities and trace inequality")
    p.add_argument("config", type=Path)
    p = sub.add_parser("rearrange", help="symmetric decreasing rearrangement of a snapshot")
    p.add_argument("snapshot", type=Path)
    p.add_argument("-o", "--output", type=Path, default=None)
    p.add_argument("--m", type=float, default=1.0, help="particle mass for the kinetic summary")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse usage errors share the configuration exit code
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "rearrange":
            return cmd_rearrange(args.snapshot, args.output, args.m)
        cfg = load_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "scan-mass":
            return cmd_scan_mass(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.checks)
        return cmd_extend_check(cfg)
    except ConfigError as exc:
        print(f"relgs: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        if args.command == "rearrange":
            print(f"relgs: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
