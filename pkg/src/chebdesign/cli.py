"""Command-line front end.

Usage:
    chebdesign solve  --config job.json           # design + verification
    chebdesign table1 [--config z.json] --round   # E-optimal designs, two-term rational model
    chebdesign table2 [--config z.json] --round   # efficiencies of those designs
    chebdesign sweep  --config sweep.json         # efficiency curves or eigenvalue ratios
    chebdesign asympt --config asympt.json        # collapsing-parameter diagnostics
    chebdesign check  --config check.json         # verify a given design

Configuration files are JSON.  The string "inf" stands for an unbounded
right end of the design interval.  Unknown keys are rejected.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure.  Errors are
reported as a JSON object on standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .asympt import DEFAULT_DELTAS, CollapseSpec, convergence_check_designs, expansion_check, limiting_design
from .cheb import is_chebyshev_system, remez
from .design import Design, design_c, design_estar
from .errors import ChebDesignError, DomainError, EstimabilityError, ParameterError, PreconditionError
from .model import Basis, Interval, ModelSpec, linearized_system
from .optimal import (
    VERIFY_GRID,
    Verdict,
    efficiency,
    eig_ratio_sweep,
    optimal_reference,
    verify_c,
    verify_E,
)

__all__ = ["main", "ConfigError", "load_config", "TABLE1_Z", "TABLE2_Z"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

TABLE1_Z = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
# the reference efficiency values correspond to these values of z
TABLE2_Z = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95)
FIG1_RANGE = (-2.5, -1.0, 31)
FIG2_B1 = -1.0
FIG2_STEPS = 50


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Configuration

TOP_KEYS = {"command", "model", "criterion", "numeric", "output", "z", "x", "sweep", "asympt", "design", "design_file"}
MODEL_KEYS = {"basis", "s", "k", "b", "a", "interval"}
CRITERION_KEYS = {"type", "c"}
NUMERIC_KEYS = {"grid_size", "tol", "seed"}
OUTPUT_KEYS = {"format", "path"}
SWEEP_KEYS = {"figure", "b_values", "b_min", "b_max", "steps", "b1"}
ASYMPT_KEYS = {"x", "r", "deltas", "c", "mode"}


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = sorted(set(block) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _reject_unknown(cfg, TOP_KEYS, "config")
    for key, allowed in (
        ("model", MODEL_KEYS),
        ("criterion", CRITERION_KEYS),
        ("numeric", NUMERIC_KEYS),
        ("output", OUTPUT_KEYS),
        ("sweep", SWEEP_KEYS),
        ("asympt", ASYMPT_KEYS),
    ):
        if key in cfg:
            _reject_unknown(cfg[key], allowed, key)
    return cfg


def _number(value: Any, name: str) -> float:
    if value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number or \"inf\"")
    return float(value)


def parse_interval(value: Any) -> Interval:
    if value is None:
        return Interval(0.0, math.inf)
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError("interval must be a list [lower, upper]")
    lo, hi = _number(value[0], "interval lower"), _number(value[1], "interval upper")
    try:
        return Interval(lo, hi)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def parse_model(block: Optional[dict], b: Optional[tuple] = None) -> ModelSpec:
    if block is None:
        raise ConfigError("missing model block")
    try:
        basis = Basis(block.get("basis", "rational"))
    except ValueError as exc:
        raise ConfigError(f"unknown basis {block.get('basis')!r}") from exc
    if basis is Basis.CUSTOM:
        raise ConfigError("the custom basis is available from Python only")
    s, k = block.get("s", 0), block.get("k")
    if not isinstance(s, int) or isinstance(s, bool):
        raise ConfigError("s must be an integer")
    if b is None:
        if "b" not in block:
            raise ConfigError("model.b is required")
        b = tuple(_number(v, "b") for v in block["b"])
    if k is None:
        k = len(b)
    if not isinstance(k, int) or isinstance(k, bool):
        raise ConfigError("k must be an integer")
    a = block.get("a")
    if a is not None:
        a = tuple(_number(v, "a") for v in a)
    try:
        return ModelSpec(basis, s, k, b, parse_interval(block.get("interval")), a)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def parse_criterion(block: Optional[dict], m: int):
    block = block or {"type": "E"}
    kind = block.get("type", "E")
    if kind == "E":
        if "c" in block:
            raise ConfigError("criterion E takes no c vector")
        return "E", None
    if kind == "c":
        c = block.get("c")
        if not isinstance(c, list) or len(c) != m:
            raise ConfigError(f"criterion c needs a vector c of length m = {m}")
        c = np.array([_number(v, "c") for v in c])
        if not np.any(c):
            raise ConfigError("c must be nonzero")
        return "c", c
    raise ConfigError(f"unknown criterion {kind!r}")


def parse_numeric(block: Optional[dict]) -> dict:
    block = block or {}
    out = {"grid_size": VERIFY_GRID, "tol": 1e-8, "seed": 0}
    out.update(block)
    if not isinstance(out["grid_size"], int) or out["grid_size"] < 10:
        raise ConfigError("numeric.grid_size must be an integer >= 10")
    if not isinstance(out["seed"], int):
        raise ConfigError("numeric.seed must be an integer")
    out["tol"] = _number(out["tol"], "numeric.tol")
    if not out["tol"] > 0:
        raise ConfigError("numeric.tol must be positive")
    return out


def _z_list(cfg: dict, default) -> list:
    z = cfg.get("z", list(default))
    if not isinstance(z, list):
        raise ConfigError("z must be a list")
    z = [_number(v, "z") for v in z]
    if any(not 0 < v < 1 for v in z):
        raise ConfigError("every z must lie in (0, 1)")
    return z


# ---------------------------------------------------------------------------
# Output


def _fmt(x: float, digits: Optional[int] = None) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if digits is not None:
        return f"{x:.{digits}f}"
    return format(x, ".17g")


def to_json(obj: Any, indent: int = 2, level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [inner + to_json(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return json.dumps(_fmt(x)) if not math.isfinite(x) else _fmt(x)
    return json.dumps(str(obj))


def to_csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _model_json(model: ModelSpec) -> dict:
    return {
        "basis": model.basis.value,
        "s": model.s,
        "k": model.k,
        "b": list(model.b),
        "a": list(model.a) if model.a is not None else None,
        "interval": model.interval.to_json(),
    }


# ---------------------------------------------------------------------------
# Commands


def _efficiency_or_none(model: ModelSpec, design: Design, i: int) -> Optional[float]:
    """None when the design cannot estimate coefficient i."""
    try:
        return efficiency(model, design, i)
    except EstimabilityError:
        return None


def cmd_solve(cfg: dict, fmt: str, digits: Optional[int]) -> str:
    model = parse_model(cfg.get("model"))
    kind, c = parse_criterion(cfg.get("criterion"), model.m)
    num = parse_numeric(cfg.get("numeric"))
    system = linearized_system(model)
    sol = remez(system, tol=num["tol"])
    if kind == "E":
        design = design_estar(model, sol)
        report = verify_E(model, design, grid_size=num["grid_size"], solution=sol)
    else:
        design = design_c(model, c, sol)
        report = verify_c(model, design, c, grid_size=num["grid_size"])
        if report.verdict is not Verdict.OPTIMAL:
            design = optimal_reference(model, c)
            report = verify_c(model, design, c, grid_size=num["grid_size"])
    cheb = is_chebyshev_system(system, seed=num["seed"])
    effs = [_efficiency_or_none(model, design, i) for i in range(1, model.m + 1)]
    if fmt == "csv":
        rows = [[_fmt(t, digits), _fmt(w, digits)] for t, w in zip(design.support, design.weights)]
        return to_csv(["support", "weight"], rows)
    return to_json(
        {
            "model": _model_json(model),
            "criterion": {"type": kind, "c": None if c is None else list(c)},
            "design": design.to_dict(),
            "chebyshev_points": list(sol.points),
            "chebyshev_coefficients": list(sol.coeffs),
            "chebyshev_system": cheb.verdict.value,
            "verification": report.to_dict(),
            "lambda_min": report.lambda_min,
            "efficiencies": effs,
        }
    )


def _table_model(z: float) -> ModelSpec:
    return ModelSpec(Basis.RATIONAL, 0, 2, (-1.0 - z, -1.0 + z))


def table1_columns(z_values) -> list:
    cols = []
    for z in z_values:
        model = _table_model(z)
        d = design_estar(model)
        rep = verify_E(model, d)
        cols.append((z, d, rep.verdict.value))
    return cols


def cmd_table1(cfg: dict, fmt: str, digits: Optional[int]) -> str:
    cols = table1_columns(_z_list(cfg, TABLE1_Z))
    if fmt == "json":
        return to_json([{"z": z, "design": d.to_dict(), "verdict": v} for z, d, v in cols])
    header = ["row"] + [f"z={float(z)!r}" for z, _, _ in cols]
    if not cols:
        return to_csv(header, [])
    rows = []
    names = [f"t{i}" for i in range(1, 5)] + [f"w{i}" for i in range(1, 5)]
    for j, name in enumerate(names):
        row = [name]
        for _, d, _ in cols:
            vec = d.support if j < 4 else d.weights
            i = j % 4
            row.append(_fmt(vec[i], digits) if i < len(vec) else "")
        rows.append(row)
    rows.append(["verdict"] + [v for _, _, v in cols])
    return to_csv(header, rows)


def table2_columns(z_values, x: float = -1.0) -> list:
    cols = []
    limit = None
    for z in z_values:
        model = _table_model(z)
        if limit is None:
            limit = limiting_design(model, x)
        d = design_estar(model)
        m = model.m
        refs = [optimal_reference(model, np.eye(m)[i]) for i in range(m)]
        eff = [efficiency(model, d, i + 1, refs[i]) for i in range(m)]
        eff_bar = [efficiency(model, limit, i + 1, refs[i]) for i in range(m)]
        cols.append((z, eff, eff_bar))
    return cols


def cmd_table2(cfg: dict, fmt: str, digits: Optional[int]) -> str:
    x = _number(cfg.get("x", -1.0), "x")
    cols = table2_columns(_z_list(cfg, TABLE2_Z), x)
    if fmt == "json":
        return to_json([{"z": z, "eff": e, "eff_limit": eb} for z, e, eb in cols])
    header = ["row"] + [f"z={float(z)!r}" for z, _, _ in cols]
    if not cols:
        return to_csv(header, [])
    rows = [[f"eff{i + 1}"] + [_fmt(e[i], digits) for _, e, _ in cols] for i in range(4)]
    rows += [[f"eff{i + 1}_limit"] + [_fmt(eb[i], digits) for _, _, eb in cols] for i in range(4)]
    return to_csv(header, rows)


def _linspace(block: dict, lo: float, hi: float, steps: int) -> list:
    lo = _number(block.get("b_min", lo), "sweep.b_min")
    hi = _number(block.get("b_max", hi), "sweep.b_max")
    steps = block.get("steps", steps)
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError("sweep.steps must be a positive integer")
    return list(np.linspace(lo, hi, steps)) if steps > 1 else [lo]


def cmd_sweep(cfg: dict, fmt: str, digits: Optional[int]) -> str:
    block = cfg.get("sweep", {})
    figure = block.get("figure", 1)
    num = parse_numeric(cfg.get("numeric"))
    if figure == 1:
        if "b_values" in block:
            bs = [_number(v, "b") for v in block["b_values"]]
        else:
            bs = _linspace(block, *FIG1_RANGE)
        rows = []
        for b in bs:
            try:
                model = ModelSpec(Basis.RATIONAL, 0, 1, (b,))
            except ParameterError as exc:
                raise ConfigError(str(exc)) from exc
            d = design_estar(model)
            rows.append((b, efficiency(model, d, 1), efficiency(model, d, 2)))
        if fmt == "json":
            return to_json([{"b": b, "eff1": e1, "eff2": e2} for b, e1, e2 in rows])
        return to_csv(["b", "eff1", "eff2"], [[_fmt(b), _fmt(e1, digits), _fmt(e2, digits)] for b, e1, e2 in rows])
    if figure == 2:
        b1 = _number(block.get("b1", FIG2_B1), "sweep.b1")
        if "b_values" in block:
            b2s = [_number(v, "b") for v in block["b_values"]]
        else:
            lo = _number(block.get("b_min", -1.0), "sweep.b_min")
            hi = _number(block.get("b_max", -0.02), "sweep.b_max")
            steps = block.get("steps", FIG2_STEPS)
            if not isinstance(steps, int) or steps < 1:
                raise ConfigError("sweep.steps must be a positive integer")
            # open interval (lo, hi)
            b2s = list(np.linspace(lo, hi, steps + 2)[1:-1])
        base = ModelSpec(Basis.RATIONAL, 0, 2, (b1, b1 - 1.0))
        rows = eig_ratio_sweep(base, [(b1, b2) for b2 in b2s], grid_size=num["grid_size"])
        if fmt == "json":
            return to_json(
                [
                    {
                        "b2": r.b[1],
                        "ratio": r.ratio,
                        "lambda_min": r.lambda_min,
                        "lambda_2": r.lambda_2,
                        "lambda_cstar": r.lambda_cstar,
                        "verdict": r.verdict,
                        "error": r.error,
                    }
                    for r in rows
                ]
            )
        return to_csv(
            ["b2", "ratio", "lambda_min", "lambda_2", "lambda_cstar", "verdict"],
            [
                [_fmt(r.b[1]), _fmt(r.ratio, digits), _fmt(r.lambda_min), _fmt(r.lambda_2), _fmt(r.lambda_cstar), r.verdict]
                for r in rows
            ],
        )
    raise ConfigError("sweep.figure must be 1 or 2")


def cmd_asympt(cfg: dict, fmt: str, digits: Optional[int]) -> str:
    block = cfg.get("asympt")
    if block is None:
        raise ConfigError("missing asympt block")
    x = _number(block.get("x", -1.0), "asympt.x")
    r = block.get("r")
    if not isinstance(r, list) or not r:
        raise ConfigError("asympt.r must be a non-empty list")
    r = tuple(_number(v, "asympt.r") for v in r)
    deltas = tuple(_number(v, "asympt.deltas") for v in block.get("deltas", DEFAULT_DELTAS))
    mode = block.get("mode", "expansion")
    if mode not in ("expansion", "convergence"):
        raise ConfigError("asympt.mode must be expansion or convergence")
    try:
        spec = CollapseSpec(x, r, max(deltas))
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    model = parse_model(cfg.get("model", {"basis": "rational", "k": len(r)}), b=spec.b)
    if not all(CollapseSpec(x, r, d).valid_for(model) for d in deltas):
        raise ConfigError("some delta puts a parameter inside the design interval")
    if mode == "expansion":
        design = limiting_design(model, x)
        rows = expansion_check(model, x, r, design, deltas)
        if fmt == "json":
            return to_json([{"delta": row.delta, "error": row.error, "flagged": row.flagged} for row in rows])
        return to_csv(["delta", "error"], [[_fmt(row.delta), _fmt(row.error, digits)] for row in rows])
    c = block.get("c")
    if c is not None:
        if not isinstance(c, list) or len(c) != model.m:
            raise ConfigError(f"asympt.c must have length m = {model.m}")
        c = [_number(v, "asympt.c") for v in c]
    rows = convergence_check_designs(model, x, r, deltas, c)
    if fmt == "json":
        return to_json(
            [{"delta": row.delta, "dist_estar": row.dist_estar, "dist_c": row.dist_c, "error": row.error} for row in rows]
        )
    return to_csv(
        ["delta", "dist_estar", "dist_c"],
        [[_fmt(row.delta), _fmt(row.dist_estar, digits), _fmt(row.dist_c, digits)] for row in rows],
    )


def _load_design(cfg: dict) -> Design:
    try:
        if "design" in cfg:
            return Design.from_dict(cfg["design"])
        if "design_file" in cfg:
            path = Path(cfg["design_file"])
            text = path.read_text()
            return Design.from_csv(text) if path.suffix == ".csv" else Design.from_json(text)
    except (OSError, KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read design: {exc}") from exc
    raise ConfigError("check needs a design or design_file entry")


def cmd_check(cfg: dict, fmt: str, digits: Optional[int]) -> str:
    model = parse_model(cfg.get("model"))
    kind, c = parse_criterion(cfg.get("criterion"), model.m)
    num = parse_numeric(cfg.get("numeric"))
    design = _load_design(cfg)
    if kind == "E":
        report = verify_E(model, design, grid_size=num["grid_size"])
    else:
        report = verify_c(model, design, c, grid_size=num["grid_size"])
    if fmt == "csv":
        d = report.to_dict()
        return to_csv(list(d), [[_fmt(v, digits) if isinstance(v, float) else v for v in d.values()]])
    return to_json({"design": design.to_dict(), "verification": report.to_dict()})


COMMANDS = {
    "solve": cmd_solve,
    "table1": cmd_table1,
    "table2": cmd_table2,
    "sweep": cmd_sweep,
    "asympt": cmd_asympt,
    "check": cmd_check,
}

DEFAULT_FORMAT = {"solve": "json", "check": "json", "table1": "csv", "table2": "csv", "sweep": "csv", "asympt": "csv"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chebdesign", description="E- and c-optimal designs via Chebyshev systems")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON job configuration")
    parser.add_argument("--out", help="write output to this file instead of standard output")
    parser.add_argument("--format", choices=("json", "csv"), help="output format")
    parser.add_argument("--round", action="store_true", help="round table entries to 2 decimals")
    return parser


def _error(kind: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if "command" in cfg and cfg["command"] != args.command:
            raise ConfigError(f"config is for command {cfg['command']!r}, not {args.command!r}")
        out_block = cfg.get("output", {})
        fmt = args.format or out_block.get("format") or DEFAULT_FORMAT[args.command]
        if fmt not in ("json", "csv"):
            raise ConfigError("output.format must be json or csv")
        out = args.out or out_block.get("path")
        text = COMMANDS[args.command](cfg, fmt, 2 if args.round else None)
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG)
    except (ParameterError, DomainError, PreconditionError) as exc:
        return _error("config", exc, EXIT_CONFIG)
    except (ChebDesignError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _error("numeric", exc, EXIT_NUMERIC)
    _emit(text, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
