"""Command-line front end.

Every subcommand writes CSV or JSON data with the resolved configuration and
the package version embedded, so a file can be regenerated byte for byte:

    plwishart density-macro --config previous_output.csv

Settings resolve as flags > config file > defaults.  The config file holds
``key=value`` lines, or is any earlier output carrying a ``# config:`` line.
Exit codes: 0 success, 1 numerical or convergence failure during the
computation, 2 usage error (bad flag, value or parameter domain).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import __version__
from .errors import PLWishartError
from .finite_n import EnsembleParams, finite_density_xi, gen_finite_density
from .macrolaw import DensityCurve, ScalingParams, gen_density, mp_density
from .mcsampler import RngContract, sample_spectra
from .microlaw import (
    MicroParams,
    _check_first_eig,
    first_eigenvalue_pdf,
    gap_probability,
    micro_density,
)
from .specfit import fit_alpha, ingest_timeseries, overlay_csv, read_eigenvalues, read_table
from .surmise import SpacingParams, mean_spacing, rescaled_spacing_pdf, spacing_pdf

__all__ = ["main", "run", "THREADS_ENV"]

THREADS_ENV = "PLWISHART_THREADS"
ARTIFACT = f"plwishart {__version__}"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- value parsers


def _float(s: str) -> float:
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _int(s: str) -> int:
    f = float(s)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {s}")
    return int(f)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true or false, got {s}")


def _optional(parse):
    def inner(s: str):
        return None if s.lower() in ("", "none") else parse(s)

    return inner


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    points: int
    spacing: str

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.points)
        return np.linspace(self.lo, self.hi, self.points)


def _grid(s: str) -> Grid:
    parts = s.split(":")
    if len(parts) != 4:
        raise ValueError("grid must read min:max:points:linear|log")
    lo, hi, pts, spacing = _float(parts[0]), _float(parts[1]), _int(parts[2]), parts[3]
    if spacing not in ("linear", "log"):
        raise ValueError("grid spacing must be linear or log")
    if pts < 2 or not hi > lo:
        raise ValueError("grid needs at least 2 points and max > min")
    if spacing == "log" and lo <= 0:
        raise ValueError("log grid needs min > 0")
    return Grid(lo, hi, pts, spacing)


# ---------------------------------------------------------------- subcommand table
# name -> (parser, default as text, help)

_CURVE_FORMATS = _choice("csv", "json")

SUBCOMMANDS: dict[str, dict] = {
    "density-macro": {
        "help": "macroscopic density rho_alpha(x) (c = 1 closed form, c < 1 quadrature) or MP",
        "params": {
            "alpha": (_float, "1", "deformation parameter, -1 < alpha, alpha != 0"),
            "c": (_float, "1", "aspect ratio N/M in (0, 1]"),
            "law": (_choice("generalized", "mp"), "generalized", "generalized or mp"),
            "grid": (_grid, "0.001:8:512:log", "min:max:points:linear|log"),
            "format": (_CURVE_FORMATS, "csv", "csv or json"),
        },
    },
    "density-micro": {
        "help": "hard-edge microscopic density in the squared variable y",
        "params": {
            "alpha": (_float, "1", "deformation parameter (inf for Wishart-Laguerre)"),
            "beta": (_int, "2", "Dyson index 1, 2 or 4"),
            "nu": (_int, "0", "M - N"),
            "variant": (_choice("generalized", "standard"), "generalized", "generalized or standard"),
            "grid": (_grid, "0:20:401:linear", "min:max:points:linear|log"),
            "format": (_CURVE_FORMATS, "csv", "csv or json"),
        },
    },
    "first-eig": {
        "help": "smallest-eigenvalue distribution in the squared microscopic variable",
        "params": {
            "alpha": (_float, "1", "deformation parameter (inf for Wishart-Laguerre)"),
            "beta": (_int, "2", "Dyson index 1, 2 or 4"),
            "nu": (_int, "0", "M - N"),
            "variant": (_choice("generalized", "standard"), "generalized", "generalized or standard"),
            "grid": (_grid, "0:10:401:linear", "min:max:points:linear|log"),
            "format": (_CURVE_FORMATS, "csv", "csv or json"),
        },
    },
    "gap": {
        "help": "probability that (0, x] is free of eigenvalues (beta = 2, nu = 0)",
        "params": {
            "mode": (_choice("micro", "finite"), "micro", "micro (x = y^2) or finite (x = lambda)"),
            "alpha": (_float, "1", "deformation parameter"),
            "N": (_int, "10", "matrix size (finite mode)"),
            "n": (_float, "1", "variance parameter (finite mode)"),
            "gamma": (_optional(_float), "none", "overrides alpha in finite mode"),
            "variant": (_choice("generalized", "standard"), "generalized", "generalized or standard"),
            "grid": (_grid, "0:20:401:linear", "min:max:points:linear|log"),
            "format": (_CURVE_FORMATS, "csv", "csv or json"),
        },
    },
    "spacing": {
        "help": "two-eigenvalue nearest-neighbour spacing law",
        "params": {
            "beta": (_int, "2", "Dyson index 1, 2 or 4"),
            "nubar": (_float, "0", "(beta/2)(nu+1) - 1"),
            "n": (_float, "1", "variance parameter"),
            "gamma": (_float, "inf", "deformation parameter gamma (inf for Wishart-Laguerre)"),
            "varpi": (_optional(_float), "none", "fixes gamma = varpi + beta + 2 nubar + 2"),
            "variant": (_choice("generalized", "standard"), "generalized", "generalized or standard"),
            "rescaled": (_bool, "false", "unit-mean form"),
            "grid": (_grid, "0:6:601:linear", "min:max:points:linear|log"),
            "format": (_CURVE_FORMATS, "csv", "csv or json"),
        },
    },
    "finite-n": {
        "help": "exact finite-N one-point density (beta = 2), normalized to N",
        "params": {
            "N": (_int, "4", "matrix size"),
            "nu": (_int, "0", "M - N"),
            "n": (_float, "1", "variance parameter"),
            "alpha": (_float, "14", "mixture exponent gamma - 1 - N(N+nu)"),
            "gamma": (_optional(_float), "none", "overrides alpha"),
            "variant": (_choice("generalized", "standard"), "generalized", "generalized or standard"),
            "grid": (_grid, "0:10:401:linear", "min:max:points:linear|log"),
            "format": (_CURVE_FORMATS, "csv", "csv or json"),
        },
    },
    "sample": {
        "help": "Monte Carlo eigenvalue spectra (columns draw,index,eigenvalue)",
        "params": {
            "beta": (_int, "2", "Dyson index 1, 2 or 4"),
            "N": (_int, "10", "matrix size"),
            "nu": (_int, "0", "M - N"),
            "n": (_float, "1", "variance parameter"),
            "alpha": (_float, "1", "mixture exponent"),
            "gamma": (_optional(_float), "none", "overrides alpha"),
            "draws": (_int, "1000", "number of matrices"),
            "seed": (_int, "0", "64-bit seed"),
            "stream": (_int, "0", "stream id"),
            "xi": (_optional(_float), "none", "pin the scale variable"),
            "format": (_CURVE_FORMATS, "csv", "csv or json"),
        },
    },
    "fit": {
        "help": "fit alpha of the deformed Marchenko-Pastur law to data",
        "params": {
            "input": (str, "", "CSV table (rows = observations) or eigenvalue list"),
            "input_kind": (_choice("auto", "table", "eigenvalues"), "auto", "how to read --input"),
            "c": (_optional(_float), "none", "aspect ratio; defaults to columns/rows for tables"),
            "method": (_choice("mle", "least_squares"), "mle", "mle or least_squares"),
            "overlay": (str, "", "also write x,empirical,fitted CSV here"),
            "format": (_choice("json"), "json", "json"),
        },
    },
    "selfcheck": {
        "help": "fast invariant suite; exit 0 when every check passes",
        "params": {
            "format": (_choice("text", "json"), "text", "text or json"),
        },
    },
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plwishart",
        description=(
            "Spectral laws of power-law deformed Wishart-Laguerre ensembles.  "
            "density-macro: global density; density-micro, first-eig, gap: hard edge; "
            "spacing: N = 2 surmise; finite-n: exact finite N; sample: Monte Carlo; "
            "fit: alpha from data; selfcheck: invariant suite."
        ),
    )
    parser.add_argument("--version", action="version", version=ARTIFACT)
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for name, spec in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=spec["help"], description=spec["help"])
        for key, (_, default, text) in spec["params"].items():
            p.add_argument(_flag(key), dest=key, default=None, metavar="VALUE", help=f"{text} [{default}]")
        p.add_argument("--config", default=None, help="key=value file or an earlier output")
        p.add_argument("--output", "-o", default="-", help="output path, '-' for stdout")
    return parser


def _read_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except ValueError:
        data = None
    if isinstance(data, dict):
        cfg = data.get("config", data.get("meta", {}).get("config"))
        if not isinstance(cfg, dict):
            raise UsageError(f"{path} is JSON but carries no config object")
        return {str(k): str(v) for k, v in cfg.items()}
    lines = text.splitlines()
    for line in lines:
        if line.startswith("# config:"):
            return {str(k): str(v) for k, v in json.loads(line.partition(":")[2]).items()}
    out = {}
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"config line is not key=value: {raw!r}")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _resolve(name: str, args: argparse.Namespace) -> tuple[dict, dict]:
    """Typed settings and their canonical text form."""
    spec = SUBCOMMANDS[name]["params"]
    text = {k: d for k, (_, d, _) in spec.items()}
    if args.config:
        cfg = _read_config(args.config)
        sub = cfg.pop("subcommand", name)
        if sub != name:
            raise UsageError(f"config file is for {sub!r}, not {name!r}")
        unknown = set(cfg) - set(spec)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        text.update(cfg)
    for key in spec:
        val = getattr(args, key)
        if val is not None:
            text[key] = val
    typed = {}
    for key, (parse, _, _) in spec.items():
        try:
            typed[key] = parse(text[key])
        except ValueError as exc:
            raise UsageError(f"{_flag(key)}: {exc}") from exc
    canon = {"subcommand": name, **{k: text[k] for k in sorted(spec)}}
    return typed, canon


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------- commands
# Each builder validates parameters (failures are usage errors) and returns a
# thunk that does the computation (failures exit with status 1).


def _curve(law_id: str, params: dict, grid: Grid, fn, cfg: dict, fmt: str):
    def compute() -> str:
        x = grid.values()
        vals = np.asarray(fn(x), dtype=float)
        curve = DensityCurve(law_id, params, x, vals, {"artifact": ARTIFACT, "config": cfg})
        return curve.to_csv() if fmt == "csv" else curve.to_json() + "\n"

    return compute


def _micro_params(t: dict) -> MicroParams:
    return MicroParams(t["alpha"], t["nu"], t["beta"])


def _ensemble(t: dict, beta: int) -> EnsembleParams:
    if t.get("gamma") is not None:
        return EnsembleParams(beta, t["N"], t.get("nu", 0), t["n"], t["gamma"])
    return EnsembleParams.from_alpha(beta, t["N"], t.get("nu", 0), t["alpha"], t["n"])


def _build_density_macro(t, cfg):
    if t["law"] == "mp":
        if not 0 < t["c"] <= 1:
            raise UsageError("c must lie in (0, 1]")
        return _curve("mp", {"c": t["c"]}, t["grid"], lambda x: mp_density(x, t["c"]), cfg, t["format"])
    p = ScalingParams(t["alpha"], t["c"])
    return _curve("rho_alpha", p.as_dict(), t["grid"], lambda x: gen_density(x, p), cfg, t["format"])


def _build_density_micro(t, cfg):
    p = _micro_params(t)
    gen = t["variant"] == "generalized"
    return _curve(f"micro_density_b{p.beta}", p.as_dict(), t["grid"], lambda y: micro_density(y, p, gen), cfg, t["format"])


def _build_first_eig(t, cfg):
    p = _micro_params(t)
    gen = t["variant"] == "generalized"
    _check_first_eig(p)
    return _curve(f"first_eig_b{p.beta}", p.as_dict(), t["grid"], lambda y: first_eigenvalue_pdf(y, p, gen), cfg, t["format"])


def _build_gap(t, cfg):
    gen = t["variant"] == "generalized"
    if t["mode"] == "micro":
        p = MicroParams(t["alpha"], 0, 2)
    else:
        p = _ensemble(t, 2)
    if t["grid"].lo < 0:
        raise UsageError("gap lengths must be nonnegative")
    return _curve(f"gap_{t['mode']}", p.as_dict(), t["grid"], lambda x: gap_probability(x, p, t["mode"], gen), cfg, t["format"])


def _build_spacing(t, cfg):
    if t["varpi"] is not None:
        p = SpacingParams.from_varpi(t["beta"], t["varpi"], t["nubar"], t["n"])
    else:
        p = SpacingParams.from_nubar(t["beta"], t["nubar"], t["n"], t["gamma"])
    gen = t["variant"] == "generalized"
    if t["grid"].lo < 0:
        raise UsageError("spacings must be nonnegative")
    if t["rescaled"]:
        mean_spacing(p, gen)  # fails early when the mean diverges
        fn = lambda x: rescaled_spacing_pdf(x, p, gen)
    else:
        fn = lambda x: spacing_pdf(x, p, gen)
    return _curve("spacing", p.as_dict(), t["grid"], fn, cfg, t["format"])


def _build_finite_n(t, cfg):
    p = _ensemble(t, 2)
    if t["grid"].lo < 0:
        raise UsageError("eigenvalues are nonnegative")
    if t["variant"] == "generalized":
        fn = lambda x: gen_finite_density(x, p)
    else:
        fn = lambda x: finite_density_xi(x, p, p.gamma)
    return _curve("finite_density", p.as_dict(), t["grid"], fn, cfg, t["format"])


def _build_sample(t, cfg):
    p = _ensemble(t, t["beta"])
    contract = RngContract(t["seed"], t["stream"])
    if t["draws"] < 1:
        raise UsageError("--draws must be positive")
    if t["xi"] is not None and not t["xi"] > 0:
        raise UsageError("--xi must be positive")
    workers = _threads()

    def compute() -> str:
        s = sample_spectra(p, t["draws"], contract, xi=t["xi"], workers=workers)
        if t["format"] == "csv":
            s = type(s)(s.eigenvalues, s.params, s.seed, s.stream_id, s.xi, {"artifact": ARTIFACT, "config": cfg})
            return s.to_csv()
        return json.dumps(
            {
                "artifact": ARTIFACT,
                "config": cfg,
                "params": p.as_dict(),
                "seed": contract.seed,
                "stream_id": contract.stream_id,
                "eigenvalues": [[float(v) for v in row] for row in s.eigenvalues],
            },
            sort_keys=True,
        ) + "\n"

    return compute


def _build_fit(t, cfg):
    path = t["input"]
    if not path:
        raise UsageError("--input is required")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    kind = t["input_kind"]
    if kind == "auto":
        body = [l for l in text.splitlines() if l.strip() and not l.startswith("#")]
        kind = "eigenvalues" if body and all("," not in l for l in body) else "table"
    if kind == "eigenvalues" and t["c"] is None:
        raise UsageError("--c is required when fitting a bare eigenvalue list")
    if t["c"] is not None and not 0 < t["c"] <= 1:
        raise UsageError("c must lie in (0, 1]")
    workers = _threads()

    def compute() -> str:
        data = ingest_timeseries(read_table(text)) if kind == "table" else read_eigenvalues(text)
        report = fit_alpha(data, t["c"], t["method"], workers=workers)
        if t["overlay"]:
            with open(t["overlay"], "w", encoding="utf-8", newline="\n") as fh:
                fh.write(overlay_csv(np.asarray(data), report))
        payload = {"artifact": ARTIFACT, "config": cfg, "report": json.loads(report.to_json())}
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"

    return compute


def _build_selfcheck(t, cfg):
    def compute() -> str:
        from .selfcheck import run_checks

        results = run_checks()
        if t["format"] == "json":
            text = json.dumps({"artifact": ARTIFACT, "checks": results}, sort_keys=True, indent=1) + "\n"
        else:
            text = "".join(
                f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}  ({r['detail']})\n" for r in results
            )
        if not all(r["passed"] for r in results):
            raise _ChecksFailed(text)
        return text

    return compute


class _ChecksFailed(Exception):
    def __init__(self, text):
        super().__init__("self-check failed")
        self.text = text


_BUILDERS = {
    "density-macro": _build_density_macro,
    "density-micro": _build_density_micro,
    "first-eig": _build_first_eig,
    "gap": _build_gap,
    "spacing": _build_spacing,
    "finite-n": _build_finite_n,
    "sample": _build_sample,
    "fit": _build_fit,
    "selfcheck": _build_selfcheck,
}


def _write(path: str, text: str, stdout) -> None:
    if path == "-":
        stdout.write(text)
        stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return int(exc.code or 0)
    if args.subcommand is None:
        parser.print_usage(stderr)
        stderr.write("plwishart: error: a subcommand is required\n")
        return 2
    name = args.subcommand
    try:
        typed, cfg = _resolve(name, args)
        compute = _BUILDERS[name](typed, cfg)
    except (UsageError, PLWishartError) as exc:
        stderr.write(f"plwishart {name}: usage error: {exc}\n")
        return 2
    try:
        text = compute()
    except _ChecksFailed as exc:
        _write(args.output, exc.text, stdout)
        return 1
    except PLWishartError as exc:
        stderr.write(f"plwishart {name}: {type(exc).__name__}: {exc}\n")
        return 1
    except OSError as exc:
        stderr.write(f"plwishart {name}: cannot write output: {exc}\n")
        return 1
    try:
        _write(args.output, text, stdout)
    except OSError as exc:
        stderr.write(f"plwishart {name}: cannot write output: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
