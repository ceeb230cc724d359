"""Command-line interface: ``qdiv div|recover|check|measured|scan-az|repro``.

Exit codes: 0 on success, 1 when a reproduction or assertion fails, 2 on
input errors (unreadable or malformed JSON, dimension mismatch, bad flags).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .azrenyi import AzParams, d_az, d_max, monotonicity_region, sample_violation, sandwiched_renyi
from .channels import ClassicalQuantumChannel, QuantumChannel, petz_pair
from .config import DEFAULT_TOLERANCES, Tolerances
from .extended import INF
from .fdiv import build_function, maximal_f_div, renyi_alpha, standard_f_div
from .measured import measured_projective_opt, measured_renyi, variational_measured_renyi
from .operators import OperatorError, PsdOperator, trace_norm
from .paperlab import EXAMPLE_IDS, reproduce_example
from .reversibility import maximal_preservation_report, standard_preservation_report

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    """Bad user input; reported with exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    tolerances: Tolerances = DEFAULT_TOLERANCES
    seed: int = 0
    output: str = "json"


# ---------------------------------------------------------------------------
# JSON forms


def matrix_to_json(A: np.ndarray) -> dict:
    A = np.asarray(A, dtype=complex)
    return {
        "dim": int(A.shape[0]),
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in A],
    }


def matrix_from_json(obj: Any, where: str) -> np.ndarray:
    """Parse ``{"dim": d, "entries": [[[re, im], ...], ...]}``."""
    if not isinstance(obj, dict) or "entries" not in obj:
        raise InputError(f"{where}: expected an object with 'dim' and 'entries'")
    try:
        A = np.array([[complex(re, im) for re, im in row] for row in obj["entries"]], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: entries must be rows of [re, im] pairs ({exc})") from None
    d = obj.get("dim", A.shape[0])
    if A.ndim != 2 or A.shape != (d, d):
        raise InputError(f"{where}: entries do not form a {d}x{d} matrix")
    return A


def channel_to_json(phi: QuantumChannel) -> dict:
    return {"kraus": [matrix_to_json(K) for K in phi.kraus], "pre_transpose": phi.pre_transpose}


def channel_from_json(obj: Any, where: str) -> QuantumChannel | ClassicalQuantumChannel:
    if isinstance(obj, dict) and "outputs" in obj:
        outs = [matrix_from_json(m, f"{where}.outputs[{i}]") for i, m in enumerate(obj["outputs"])]
        return ClassicalQuantumChannel(outs)
    if not isinstance(obj, dict) or "kraus" not in obj:
        raise InputError(f"{where}: expected 'kraus' or 'outputs'")
    kraus = [matrix_from_json(m, f"{where}.kraus[{i}]") for i, m in enumerate(obj["kraus"])]
    shapes = {K.shape for K in kraus}
    if len(shapes) != 1:
        raise InputError(f"{where}: Kraus operators have different shapes")
    return QuantumChannel(np.array(kraus), bool(obj.get("pre_transpose", False)))


def jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars and infinities to JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    return value


def _load(path: str) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_operator(path: str, tol: Tolerances) -> PsdOperator:
    A = matrix_from_json(_load(path), path)
    try:
        return PsdOperator(A, tol)
    except OperatorError as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_vector(path: str) -> np.ndarray:
    obj = _load(path)
    if isinstance(obj, dict) and "vector" in obj:
        obj = obj["vector"]
    try:
        return np.asarray(obj, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise InputError(f"{path}: expected a list of numbers for a classical input") from None


def _emit(payload: dict, cfg: RunConfig, table: str | None = None) -> None:
    if cfg.output == "table" and table is not None:
        print(table)
    else:
        print(json.dumps(jsonable(payload), indent=2, sort_keys=True))


def _same_dim(*ops: PsdOperator) -> None:
    dims = {op.dim for op in ops}
    if len(dims) != 1:
        raise InputError(f"dimension mismatch: {sorted(dims)}")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_div(args, cfg: RunConfig) -> int:
    rho = _load_operator(args.rho, cfg.tolerances)
    sigma = _load_operator(args.sigma, cfg.tolerances)
    _same_dim(rho, sigma)
    f = build_function(args.f)
    out: dict[str, Any] = {"f": f.name, "S_f": standard_f_div(f, rho, sigma)}
    out["S_max_f"] = maximal_f_div(f, rho, sigma) if f.operator_convex else None
    out["D_max"] = d_max(rho, sigma) if rho.rank else None
    if args.alpha is not None:
        out["alpha"] = args.alpha
        out["D_alpha"] = renyi_alpha(args.alpha, rho, sigma)
        out["D_star_alpha"] = sandwiched_renyi(args.alpha, rho, sigma)
        if args.z is not None:
            out["z"] = args.z
            out["D_alpha_z"] = d_az(AzParams(args.alpha, args.z), rho, sigma)
    table = "\n".join(f"{k:>14}: {jsonable(v)}" for k, v in out.items())
    _emit(out, cfg, table)
    return EXIT_OK


def _cmd_recover(args, cfg: RunConfig) -> int:
    phi = channel_from_json(_load(args.channel), args.channel)
    if isinstance(phi, ClassicalQuantumChannel):
        phi = phi.as_channel()
    sigma = _load_operator(args.sigma, cfg.tolerances)
    if sigma.dim != phi.in_dim:
        raise InputError(f"sigma has dimension {sigma.dim}, channel input dimension is {phi.in_dim}")
    try:
        _, back = petz_pair(phi, sigma, cfg.tolerances.operator_tol)
    except OperatorError as exc:
        raise InputError(str(exc)) from None
    out: dict[str, Any] = {"recovery": channel_to_json(back)}
    s_rec = back(phi(sigma.matrix))
    out["recovered_sigma"] = matrix_to_json(s_rec)
    out["sigma_residual"] = trace_norm(s_rec - sigma.matrix)
    if args.rho:
        rho = _load_operator(args.rho, cfg.tolerances)
        _same_dim(rho, sigma)
        r_rec = back(phi(rho.matrix))
        out["recovered_rho"] = matrix_to_json(r_rec)
        out["rho_residual"] = trace_norm(r_rec - rho.matrix)
    table = "\n".join(f"{k}: {out[k]:.3e}" for k in ("sigma_residual", "rho_residual") if k in out)
    _emit(out, cfg, table)
    return EXIT_OK


def _cmd_check(args, cfg: RunConfig) -> int:
    phi = channel_from_json(_load(args.channel), args.channel)
    if isinstance(phi, ClassicalQuantumChannel):
        rho, sigma = _load_vector(args.rho), _load_vector(args.sigma)
        if rho.shape != sigma.shape or rho.shape[0] != phi.k:
            raise InputError(f"classical inputs must both have length {phi.k}")
    else:
        rho = _load_operator(args.rho, cfg.tolerances)
        sigma = _load_operator(args.sigma, cfg.tolerances)
        _same_dim(rho, sigma)
        if rho.dim != phi.in_dim:
            raise InputError(f"inputs have dimension {rho.dim}, channel input dimension is {phi.in_dim}")
    try:
        std = standard_preservation_report(phi, rho, sigma, tol=cfg.tolerances)
        mx = maximal_preservation_report(phi, rho, sigma, tol=cfg.tolerances)
    except OperatorError as exc:
        raise InputError(str(exc)) from None
    max_ok = all(c.passed for c in mx.conditions if c.name != "petz recovery")
    std_ok = std.verdict == "reversible"
    summary = f"maximal: {'preserved' if max_ok else 'NOT preserved'}; standard: {'preserved' if std_ok else 'NOT preserved'}"
    out = {"summary": summary, "standard": std.to_dict(), "maximal": mx.to_dict()}
    _emit(out, cfg, "\n".join([summary, std.table(), mx.table()]))
    return EXIT_OK


def _cmd_measured(args, cfg: RunConfig) -> int:
    rho = _load_operator(args.rho, cfg.tolerances)
    sigma = _load_operator(args.sigma, cfg.tolerances)
    _same_dim(rho, sigma)
    if args.alpha is not None:
        if args.alpha == 1 or args.alpha <= 0:
            raise InputError("--alpha must be positive and different from 1")
        var = variational_measured_renyi(args.alpha, rho, sigma)
        proj = measured_projective_opt(f"power:{args.alpha}", rho, sigma, restarts=args.restarts, seed=cfg.seed)
        out = {
            "alpha": args.alpha,
            "value": measured_renyi(args.alpha, rho, sigma),
            "quasi_value": var.value,
            "stationarity": var.stationarity,
            "projective_quasi_value": proj.value,
            "measurement": proj.argument.to_dict(),
        }
    else:
        res = measured_projective_opt(args.f, rho, sigma, restarts=args.restarts, seed=cfg.seed)
        out = {"f": build_function(args.f).name, **res.to_dict()}
    _emit(out, cfg, f"value: {jsonable(out['value'])}\nstationarity: {out['stationarity']:.3e}")
    return EXIT_OK


def _grid(text: str, flag: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"{flag}: expected comma-separated numbers") from None
    if not vals:
        raise InputError(f"{flag}: empty grid")
    return vals


def _cmd_scan_az(args, cfg: RunConfig) -> int:
    alphas = _grid(args.alpha_grid, "--alpha-grid")
    zs = _grid(args.z_grid, "--z-grid")
    rows = []
    for a in alphas:
        for z in zs:
            try:
                params = AzParams(a, z)
            except ValueError as exc:
                raise InputError(str(exc)) from None
            verdict = monotonicity_region(params, args.mode)
            worst = sample_violation(params, args.mode, args.samples, args.dim, cfg.seed)
            rows.append(
                {
                    **verdict.to_dict(),
                    "max_violation": worst,
                    "label": "certified" if verdict.monotone_claimed else "empirical",
                }
            )
    header = "alpha,z,mode,conditions,monotone_claimed,max_violation,label"
    lines = [header] + [
        f"{r['alpha']:g},{r['z']:g},{args.mode},{'+'.join(r['general'] + r['fixed_point']) or '-'},"
        f"{r['monotone_claimed']},{jsonable(r['max_violation'])},{r['label']}"
        for r in rows
    ]
    _emit({"mode": args.mode, "cells": rows}, cfg, "\n".join(lines))
    return EXIT_OK


def _cmd_repro(args, cfg: RunConfig) -> int:
    if args.id != "all" and args.id not in EXAMPLE_IDS:
        raise InputError(f"unknown example {args.id!r}; choose from {', '.join(EXAMPLE_IDS)} or 'all'")
    result = reproduce_example(args.id)
    reports = result if isinstance(result, list) else [result]
    passed = all(r.passed for r in reports)
    _emit({"passed": passed, "reports": [r.to_dict() for r in reports]}, cfg, "\n".join(r.table() for r in reports))
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def _default_seed() -> int:
    raw = os.environ.get("QDIV_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"QDIV_SEED must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", choices=("json", "table"), default="json", help="output format")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: $QDIV_SEED or 0)")
    common.add_argument("--tol", type=float, default=None, help="verdict tolerance")
    common.add_argument("--config", default=None, help="JSON file with tolerance overrides")

    parser = argparse.ArgumentParser(prog="qdiv", description="Quantum divergences and reversibility checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("div", parents=[common], help="evaluate divergences of a pair")
    p.add_argument("--f", default="eta", help="divergence function spec, e.g. eta, power:0.5, gs:1")
    p.add_argument("--rho", required=True)
    p.add_argument("--sigma", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--z", type=float)
    p.set_defaults(run=_cmd_div)

    p = sub.add_parser("recover", parents=[common], help="build the Petz recovery map")
    p.add_argument("--channel", required=True)
    p.add_argument("--sigma", required=True)
    p.add_argument("--rho")
    p.set_defaults(run=_cmd_recover)

    p = sub.add_parser("check", parents=[common], help="run the standard and maximal preservation batteries")
    p.add_argument("--channel", required=True)
    p.add_argument("--rho", required=True)
    p.add_argument("--sigma", required=True)
    p.set_defaults(run=_cmd_check)

    p = sub.add_parser("measured", parents=[common], help="optimize measured divergences")
    p.add_argument("--f", default="eta")
    p.add_argument("--alpha", type=float)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--rho", required=True)
    p.add_argument("--sigma", required=True)
    p.set_defaults(run=_cmd_measured)

    p = sub.add_parser("scan-az", parents=[common], help="grid of alpha-z monotonicity verdicts")
    p.add_argument("--alpha-grid", default="0.3,0.5,0.7,1.5,2,3")
    p.add_argument("--z-grid", default="0.3,0.5,0.7,1,1.5,2,3")
    p.add_argument("--mode", choices=("general", "fixed-sigma", "fixed-rho"), default="general")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--dim", type=int, default=2)
    p.set_defaults(run=_cmd_scan_az)

    p = sub.add_parser("repro", parents=[common], help="reproduce explicit constructions")
    p.add_argument("id", help=f"one of {', '.join(EXAMPLE_IDS)} or 'all'")
    p.set_defaults(run=_cmd_repro)
    return parser


def _config(args) -> RunConfig:
    tol = DEFAULT_TOLERANCES
    if args.config:
        obj = _load(args.config)
        if not isinstance(obj, dict):
            raise InputError(f"{args.config}: expected an object of tolerances")
        known = set(Tolerances.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise InputError(f"{args.config}: unknown tolerance keys {sorted(unknown)}")
        try:
            tol = replace(tol, **{k: float(v) for k, v in obj.items()})
        except (TypeError, ValueError) as exc:
            raise InputError(f"{args.config}: {exc}") from None
    if args.tol is not None:
        try:
            tol = replace(tol, verdict_tol=args.tol)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    seed = args.seed if args.seed is not None else _default_seed()
    return RunConfig(tol, seed, args.out)


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = _config(args)
        return args.run(args, cfg)
    except InputError as exc:
        print(f"qdiv: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        # validation errors raised by the library on user data
        print(f"qdiv: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
