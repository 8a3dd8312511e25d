"""Command-line entry point: ``lgi {eval,maximize,sweep,trajectory,check}``.

Settings come from a JSON config file (``--config``) and/or flags; flags win.
A human-readable table goes to stdout, and ``--out`` (or ``$LGI_OUTPUT_DIR``)
receives CSV or JSON with every float written to 17 significant digits.

Exit codes: 0 ok, 1 I/O failure, 2 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .channels import (
    AffineQubitMap,
    InvalidMapError,
    UnitalMap,
    classify,
    euler_zyz,
    make_unital_rdr,
)
from .correlators import correlators_from_maps, k3_algebraic, params_from_maps
from .explorer import (
    LuedersFamilyPoint,
    SearchConfig,
    SearchError,
    bloch_trajectory,
    make_lueders_pair,
    maximize_k3,
    shrink_sweep,
    threshold_certificate,
)
from .qubit import MeasurementAxis

OUTPUT_DIR_ENV = "LGI_OUTPUT_DIR"
COMMANDS = ("eval", "maximize", "sweep", "trajectory", "check")
DEFAULT_S_VALUES = (0.2, 0.4, 0.6, 0.8, 1.0)

TRAJECTORY_COLUMNS = ("leg", "step", "x", "y", "z")
EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# --------------------------------------------------------------------------- parsing

_PI_FORM = re.compile(r"^\s*([+-]?)\s*(\d*(?:\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+))?\s*$", re.IGNORECASE)


def parse_real(value: Any) -> float:
    """Float from a number or a string; ``"pi/3"``, ``"-2pi/3"``, ``"2*pi"`` are pi fractions."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected a number, got {value!r}")
    m = _PI_FORM.match(value)
    if m:
        sign, coeff, den = m.groups()
        frac = Fraction(coeff or "1") / Fraction(den or "1")
        if sign == "-":
            frac = -frac
        return frac.numerator * math.pi / frac.denominator
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"cannot parse {value!r} as a real number") from None


def _reals(values, n: int, what: str) -> list[float]:
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    values = [parse_real(v) for v in values]
    if len(values) != n:
        raise ConfigError(f"{what} needs {n} values, got {len(values)}")
    return values


def parse_map(spec: Any) -> AffineQubitMap:
    """Map from a compact string or a JSON object.

    Strings: ``identity``, ``diag:c1,c2,c3``, ``matrix:<9 reals row-major>``,
    ``record:<12 reals, b then Delta>``. Objects carry ``kind`` plus
    ``delta``/``b`` (matrix), ``d`` (diag), ``r1``/``d``/``r2`` with z-y-z Euler
    triples (rdr) or ``values`` (record).
    """
    if isinstance(spec, str):
        kind, _, rest = spec.partition(":")
        kind = kind.strip().lower()
        if kind == "identity":
            return UnitalMap.identity()
        if kind == "diag":
            return UnitalMap(np.diag(_reals(rest, 3, "diag")))
        if kind == "matrix":
            return UnitalMap(np.array(_reals(rest, 9, "matrix")).reshape(3, 3))
        if kind == "record":
            return AffineQubitMap.from_record(_reals(rest, 12, "record"))
        raise ConfigError(f"unknown map spec {spec!r}")
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"map spec must be a string or an object with 'kind', got {spec!r}")
    try:
        return _map_from_object(spec)
    except KeyError as exc:
        raise ConfigError(f"{spec['kind']} map needs key {exc}") from None


def _map_from_object(spec: dict) -> AffineQubitMap:
    kind = spec["kind"]
    if kind == "identity":
        return UnitalMap.identity()
    if kind == "diag":
        return UnitalMap(np.diag(_reals(spec["d"], 3, "diag")))
    if kind == "matrix":
        rows = spec["delta"]
        delta = np.array([_reals(r, 3, "matrix row") for r in rows])
        if delta.shape != (3, 3):
            raise ConfigError("matrix delta must be 3x3")
        b = _reals(spec.get("b", [0, 0, 0]), 3, "b")
        return AffineQubitMap(delta, b) if any(b) else UnitalMap(delta)
    if kind == "rdr":
        return make_unital_rdr(euler_zyz(*_reals(spec["r1"], 3, "r1")),
                               _reals(spec["d"], 3, "d"),
                               euler_zyz(*_reals(spec["r2"], 3, "r2")))
    if kind == "record":
        return AffineQubitMap.from_record(_reals(spec["values"], 12, "record"))
    raise ConfigError(f"unknown map kind {kind!r}")


def parse_lueders(spec: Any) -> LuedersFamilyPoint:
    if isinstance(spec, str):
        phi, gamma, gamma_prime, c, c_prime = _reals(spec, 5, "lueders point")
    elif isinstance(spec, dict):
        try:
            phi, gamma, gamma_prime, c, c_prime = (parse_real(spec[k]) for k in
                                                   ("phi", "gamma", "gamma_prime", "c", "c_prime"))
        except KeyError as exc:
            raise ConfigError(f"lueders point needs key {exc}") from None
    else:
        raise ConfigError(f"cannot parse lueders point {spec!r}")
    try:
        return LuedersFamilyPoint(phi, gamma, gamma_prime, c, c_prime)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------- serialisation


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def dump_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits; key order is preserved."""
    obj = _plain(obj)
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dump_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dump_json(v) for v in obj) + "]"
        items = [inner + dump_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------- commands


def _maps_from_config(cfg: dict) -> tuple[AffineQubitMap, AffineQubitMap]:
    if "lueders" in cfg:
        d12, d23 = make_lueders_pair(parse_lueders(cfg["lueders"]))
    else:
        if "map12" not in cfg or "map23" not in cfg:
            raise ConfigError("two maps required: give map12 and map23, or a lueders point")
        d12, d23 = parse_map(cfg["map12"]), parse_map(cfg["map23"])
    if cfg.get("order", "forward") == "reversed":
        return d23, d12
    return d12, d23


def _validate(name: str, m: AffineQubitMap, tol: float):
    report = classify(m, tol)
    failed = report.failed_checks()
    if failed:
        raise InvalidMapError(f"{name}: {failed[0]} check failed", check=failed[0])
    return report


def _axis(cfg: dict) -> MeasurementAxis:
    if "axis" not in cfg:
        return MeasurementAxis()
    v = np.array(_reals(cfg["axis"], 3, "axis"))
    return MeasurementAxis(tuple(v / np.linalg.norm(v)))


def cmd_eval(cfg: dict) -> dict:
    tol = parse_real(cfg.get("tol", 1e-9))
    first, second = _maps_from_config(cfg)
    reports = {"first": _validate("first map", first, tol).as_dict(),
               "second": _validate("second map", second, tol).as_dict()}
    lg = correlators_from_maps(first, second, axis=_axis(cfg), tol=tol)
    params = params_from_maps(first, second)
    payload = dict(lg.as_dict())
    payload["k3_algebraic"] = k3_algebraic(params)
    payload["params"] = dict(zip(("r1", "theta1", "phi1", "r2", "theta2", "phi2"), params.as_tuple()))
    return {"payload": payload, "reports": reports}


def _search_config(cfg: dict) -> SearchConfig:
    constraint = str(cfg.get("constraint", "positive"))
    if cfg.get("order", "forward") == "reversed":
        if constraint not in ("cptp", "cptp-divisible", "reversed"):
            raise ConfigError("reversed order is defined for the cptp family only")
        constraint = "reversed"
    opt = {}
    for key in ("c", "c_prime", "transverse"):
        if key in cfg:
            opt[key] = parse_real(cfg[key])
    try:
        return SearchConfig(constraint=constraint, grid=int(cfg.get("grid", 25)),
                            tol=parse_real(cfg.get("tol", 1e-8)), seed=int(cfg.get("seed", 0)),
                            top_k=int(cfg.get("top_k", 8)), **opt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_maximize(cfg: dict) -> dict:
    res = maximize_k3(_search_config(cfg))
    payload = res.as_dict()
    payload["certificate"] = threshold_certificate([res]).as_dict()
    return {"payload": payload}


def cmd_sweep(cfg: dict) -> dict:
    s_values = cfg.get("s_values", list(DEFAULT_S_VALUES))
    s_values = [parse_real(s) for s in (s_values.split(",") if isinstance(s_values, str) else s_values)]
    if any(not 0.0 < s <= 1.0 for s in s_values):
        raise ConfigError("every shrink factor must lie in (0, 1]")
    base = _search_config({**cfg, "constraint": "shrink=1.0", "order": "forward"})
    rows = shrink_sweep(s_values, base)
    return {"payload": {"rows": [{"s": r.s, "max_k3": r.max_k3, "expected": 1.0 + r.s ** 2 / 2,
                                  "argmax": r.argmax} for r in rows]}}


def cmd_trajectory(cfg: dict) -> dict:
    first, second = _maps_from_config(cfg)
    start = _reals(cfg.get("start", [0, 0, 1]), 3, "start")
    samples = int(cfg.get("samples", 17))
    if samples < 2:
        raise ConfigError("samples must be at least 2")
    points = bloch_trajectory([first, second], start, samples)
    return {"payload": {"points": [p._asdict() for p in points]}}


def cmd_check(cfg: dict) -> dict:
    tol = parse_real(cfg.get("tol", 1e-9))
    spec = cfg.get("map", cfg.get("map12"))
    if spec is None:
        raise ConfigError("check needs a map")
    m = parse_map(spec)
    return {"payload": {"map": m.to_record(), "report": classify(m, tol).as_dict()}}


RUNNERS = {"eval": cmd_eval, "maximize": cmd_maximize, "sweep": cmd_sweep,
           "trajectory": cmd_trajectory, "check": cmd_check}


def run(command: str, cfg: dict) -> dict:
    """Execute one command and build the ResultRecord."""
    out = RUNNERS[command](cfg)
    record = {"tool": "unital-lgi", "version": __version__, "command": command,
              "seed": int(cfg.get("seed", 0)), "input": cfg, "payload": out["payload"]}
    if "reports" in out:
        record["reports"] = out["reports"]
    return record


def render_csv(record: dict) -> str:
    command, p = record["command"], record["payload"]
    if command == "trajectory":
        return _csv_text(list(TRAJECTORY_COLUMNS), [[pt[c] for c in TRAJECTORY_COLUMNS] for pt in p["points"]])
    if command == "sweep":
        names = list(p["rows"][0]["argmax"]) if p["rows"] else []
        return _csv_text(["s", "max_k3"] + names,
                         [[r["s"], r["max_k3"]] + [r["argmax"][n] for n in names] for r in p["rows"]])
    if command == "maximize":
        names = list(p["argmax"])
        return _csv_text(["best_k3", "evaluations", "constraint_violations"] + names,
                         [[p["best_k3"], p["evaluations"], p["constraint_violations"]]
                          + [p["argmax"][n] for n in names]])
    if command == "eval":
        return _csv_text(["c12", "c23", "c13", "k3"], [[p["c12"], p["c23"], p["c13"], p["k3"]]])
    rep = p["report"]
    keys = [k for k in rep if k != "choi_eigenvalues"]
    return _csv_text(keys + ["choi_0", "choi_1", "choi_2", "choi_3"],
                     [[int(rep[k]) if isinstance(rep[k], bool) else rep[k] for k in keys]
                      + list(rep["choi_eigenvalues"])])


def render_table(record: dict) -> str:
    command, p = record["command"], record["payload"]
    lines = [f"# {command}  (unital-lgi {record['version']}, seed {record['seed']})"]

    def kv(key, val):
        lines.append(f"{key:<24} {format(val, '.12g') if isinstance(val, float) else val}")

    if command == "eval":
        for key in ("c12", "c23", "c13", "k3", "k3_algebraic"):
            kv(key, p[key])
        for name, rep in record["reports"].items():
            lines.append(f"-- {name} map")
            for k, v in rep.items():
                kv(k, [round(e, 12) + 0.0 for e in v] if isinstance(v, list) else v)
    elif command == "maximize":
        for key in ("constraint", "best_k3", "evaluations", "constraint_violations"):
            kv(key, p[key])
        for k, v in p["argmax"].items():
            kv(f"argmax.{k}", v)
        kv("certificate.passed", p["certificate"]["passed"])
    elif command == "sweep":
        lines.append(f"{'s':>8} {'max_k3':>18} {'1 + s^2/2':>18}")
        for r in p["rows"]:
            lines.append(f"{r['s']:>8.4g} {r['max_k3']:>18.12f} {r['expected']:>18.12f}")
    elif command == "trajectory":
        lines.append(f"{'leg':>4} {'step':>5} {'x':>16} {'y':>16} {'z':>16}  kind")
        for pt in p["points"]:
            kind = "endpoint" if pt["endpoint"] else "interpolated (display only)"
            lines.append(f"{pt['leg']:>4} {pt['step']:>5} {pt['x']:>16.12f} {pt['y']:>16.12f} "
                         f"{pt['z']:>16.12f}  {kind}")
    else:
        for k, v in p["report"].items():
            kv(k, [round(e, 12) + 0.0 for e in v] if isinstance(v, list) else v)
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgi", description="Leggett-Garg K3 for unital qubit maps")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="output file (CSV or JSON)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--grid", type=int)
        p.add_argument("--tol", type=str)
        p.add_argument("--order", choices=("forward", "reversed"))
        p.add_argument("--constraint", help="positive | cptp | shrink=S")
        p.add_argument("--map12", help="first map, e.g. identity, diag:1,1,-1, matrix:<9 reals>")
        p.add_argument("--map23", help="second map")
        p.add_argument("--map", help="map for the check command")
        p.add_argument("--lueders", help="family point phi,gamma,gamma_prime,c,c_prime")
        p.add_argument("--c", dest="c", help="pinned first-map scaling (reversed search)")
        p.add_argument("--c-prime", dest="c_prime", help="pinned second-map scaling (reversed search)")
        p.add_argument("--transverse", help="transverse scaling of cptp search maps")
        p.add_argument("--s-values", dest="s_values", help="comma-separated shrink factors")
        p.add_argument("--samples", type=int, help="trajectory samples per leg")
    return parser


def load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    # a ResultRecord can be fed back in: use its echoed input
    if "input" in cfg and "payload" in cfg:
        cfg = cfg["input"]
    return dict(cfg)


def _merge(args: argparse.Namespace, cfg: dict) -> dict:
    cfg = dict(cfg)
    cfg.pop("command", None)
    for key in ("seed", "grid", "tol", "order", "constraint", "map12", "map23", "map", "lueders",
                "c", "c_prime", "transverse", "s_values", "samples"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
            if key in ("map12", "map23"):
                cfg.pop("lueders", None)
            if key == "lueders":
                cfg.pop("map12", None), cfg.pop("map23", None)
    if args.format is not None:
        cfg["format"] = args.format
    if args.out is not None:
        cfg["out"] = str(args.out)
    return cfg


def _output_path(command: str, cfg: dict) -> Path | None:
    fmt = cfg.get("format", "json")
    if "out" in cfg:
        return Path(cfg["out"])
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env) / f"{command}.{fmt}"
    return None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except (json.JSONDecodeError, ConfigError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if file_cfg.get("command", args.command) != args.command:
        print(f"error: config is for command {file_cfg['command']!r}, not {args.command!r}", file=sys.stderr)
        return EXIT_INVALID
    cfg = _merge(args, file_cfg)
    fmt = cfg.get("format", "json")
    if fmt not in ("csv", "json"):
        print(f"error: unknown format {fmt!r}", file=sys.stderr)
        return EXIT_INVALID
    echo = {k: v for k, v in cfg.items() if k not in ("out", "format")}
    try:
        record = run(args.command, echo)
    except InvalidMapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, ValueError, SearchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    sys.stdout.write(render_table(record))
    path = _output_path(args.command, cfg)
    if path is not None:
        text = render_csv(record) if fmt == "csv" else dump_json(record) + "\n"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        except OSError as exc:
            print(f"error: cannot write output: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
