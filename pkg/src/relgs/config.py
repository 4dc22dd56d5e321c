"""Run configuration: an INI-style key/value file.

Schema (every key optional unless noted)::

    [problem]
    N = 3            ; required
    m = 1.0
    eta = 0.0
    sigma = 1.0
    p = 3.0          ; required
    M = 2.0          ; required for solve
    q =              ; defaults to the weak exponent of the potential

    [potential]
    kind = power     ; power | yukawa | tabulated
    alpha = 1.0      ; power
    mu = 1.0         ; yukawa
    file = w.csv     ; tabulated (radius,value), relative to the config file
    q = inf          ; tabulated

    [grid]
    L = 8.0          ; required
    n = 48           ; required, even
    dealias = false

    [minimizer]
    tol_res =        ; default 1e-8 max(1, |E|)
    max_iter = 4000
    tau0 =
    collapse_floor = ; default -1e6 m M
    concentration_guard = 0.8
    preconditioned = true
    init = gaussian  ; gaussian | seeded-random | snapshot
    init_width =     ; gaussian width, default L/4
    init_file =      ; RGS1 snapshot for init = snapshot

    [scan]
    M_lo = 1.5
    M_hi = 3.5
    tol_M = 0.05
    lambda_max = 64
    max_expand = 4
    workers = 1      ; concurrent endpoint classifications

    [verify]
    corpus_size = 20
    corpus_seed = 0

    [output]
    dir = out        ; relative to the working directory
    prefix =         ; default <command>-<first 12 hex digits of the config hash>

    [run]
    seed = 0
    strict_deterministic = false
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .hamiltonian import Problem, ProblemError
from .minimizer import ScanOptions, SolveOptions
from .potentials import PowerLaw, Yukawa, load_tabulated
from .spectral import make_grid


class ConfigError(ValueError):
    pass


SCHEMA = {
    "problem": {"N": int, "m": float, "eta": float, "sigma": float, "p": float, "M": float, "q": float},
    "potential": {"kind": str, "alpha": float, "mu": float, "file": str, "q": float},
    "grid": {"L": float, "n": int, "dealias": bool},
    "minimizer": {
        "tol_res": float, "max_iter": int, "tau0": float, "collapse_floor": float,
        "concentration_guard": float, "preconditioned": bool, "init": str,
        "init_width": float, "init_file": str,
    },
    "scan": {"M_lo": float, "M_hi": float, "tol_M": float, "lambda_max": float, "max_expand": int, "workers": int},
    "verify": {"corpus_size": int, "corpus_seed": int},
    "output": {"dir": str, "prefix": str},
    "run": {"seed": int, "strict_deterministic": bool},
}

DEFAULTS = {
    "problem": {"m": 1.0, "eta": 0.0, "sigma": 1.0},
    "potential": {"kind": "power", "alpha": 1.0},
    "grid": {"dealias": False},
    "minimizer": {"max_iter": 4000, "concentration_guard": 0.8, "preconditioned": True, "init": "gaussian"},
    "scan": {"tol_M": 0.05, "lambda_max": 64.0, "max_expand": 4, "workers": 1},
    "verify": {"corpus_size": 20, "corpus_seed": 0},
    "output": {"dir": "out"},
    "run": {"seed": 0, "strict_deterministic": False},
}


def _convert(section: str, key: str, raw: str, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {typ.__name__}") from None


@dataclass
class RunConfig:
    values: dict
    source: Path | None = None
    hash: str = field(default="")

    def __post_init__(self):
        if not self.hash:
            blob = json.dumps(self.values, sort_keys=True, separators=(",", ":"))
            h = hashlib.sha256(blob.encode())
            tab = self.get("potential", "file")
            if self.get("potential", "kind") == "tabulated" and tab:
                try:
                    h.update(self.resolve(tab).read_bytes())
                except OSError:
                    pass  # reported when the potential is built
            self.hash = h.hexdigest()

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        v = self.get(section, key)
        if v is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return v

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        if not p.is_absolute() and self.source is not None:
            p = self.source.parent / p
        return p

    # -- builders --------------------------------------------------------------

    def potential(self):
        kind = self.get("potential", "kind")
        if kind == "power":
            return PowerLaw(self.require("potential", "alpha"))
        if kind == "yukawa":
            return Yukawa(self.require("potential", "mu"))
        if kind == "tabulated":
            q = self.get("potential", "q", math.inf)
            return load_tabulated(self.resolve(self.require("potential", "file")), q=q)
        raise ConfigError(f"[potential] kind must be power, yukawa or tabulated, got {kind!r}")

    def problem(self, M: float = None) -> Problem:
        M = self.require("problem", "M") if M is None else M
        try:
            return Problem(
                N=self.require("problem", "N"),
                m=self.get("problem", "m"),
                eta=self.get("problem", "eta"),
                sigma=self.get("problem", "sigma"),
                p=self.require("problem", "p"),
                W=self.potential(),
                M=M,
                q=self.get("problem", "q"),
            )
        except (ProblemError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self):
        try:
            return make_grid(self.require("problem", "N"), self.require("grid", "L"), self.require("grid", "n"))
        except (ValueError, MemoryError) as exc:
            raise ConfigError(f"invalid grid: {exc}") from exc

    def solve_options(self) -> SolveOptions:
        return SolveOptions(
            tol_res=self.get("minimizer", "tol_res"),
            max_iter=self.get("minimizer", "max_iter"),
            tau0=self.get("minimizer", "tau0"),
            collapse_floor=self.get("minimizer", "collapse_floor"),
            concentration_guard=self.get("minimizer", "concentration_guard"),
            preconditioned=self.get("minimizer", "preconditioned"),
            dealias=self.get("grid", "dealias"),
        )

    def scan_options(self) -> ScanOptions:
        return ScanOptions(
            tol_M=self.get("scan", "tol_M"),
            lam_max=self.get("scan", "lambda_max"),
            init_width=self.get("minimizer", "init_width"),
            max_expand=self.get("scan", "max_expand"),
            workers=self.get("scan", "workers"),
            solve=self.solve_options(),
        )

    def prefix(self, command: str) -> str:
        return self.get("output", "prefix") or f"{command}-{self.hash[:12]}"

    def output_dir(self) -> Path:
        return Path(self.get("output", "dir"))


def parse_config(text: str, source: Path = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (M vs m)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    values = {s: dict(d) for s, d in DEFAULTS.items()}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]; known: {', '.join(SCHEMA)}")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key [{section}] {key}")
            if raw.strip() == "":
                continue
            values[section][key] = _convert(section, key, raw, SCHEMA[section][key])
    return RunConfig(values, source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path)
