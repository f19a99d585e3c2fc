"""
Command line entry point and experiment orchestration.

    dualbridge run --config exp.json [--seed N] [--horizon N] [--quiet]
    dualbridge check-graph --config universe.json
    dualbridge conjugate-selftest --config function.json [--samples N] [--seed N]

``run`` exits 0 when the run converged, 2 when it did not converge within
the horizon, and 1 on configuration errors (including rejected network
assumptions).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .algorithm import RunResult, StepSchedule, run_reverse_direction, run_theorem1
from .convex import function_from_dict, verify_conjugate_duality_properties
from .duality import ConsensusProblem, ResourceAllocationProblem, fenchel_dual, lagrange_dual
from .errors import DualBridgeError
from .network import (
    certify_a3,
    process_from_dict,
    universe_from_dict,
    validate_a1,
    validate_a2,
)
from .oracle import MAX_GENERAL_VARIABLES, solve_consensus, solve_ra_general, solve_ra_quadratic

log = logging.getLogger("dualbridge")

TRACE_COLUMNS = ["t", "graph_label", "alpha_t", "consensus_residual", "constraint_residual",
                 "dual_error", "mean_inner_iters"]

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_VECTOR = {"type": "array", "items": {"type": "number"}}

_FUNCTION_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["quadratic", "log_sum_exp"]},
        "Q": {"anyOf": [{"type": "number"}, _VECTOR, _MATRIX]},
        "a": {"anyOf": [{"type": "number"}, _VECTOR]},
        "offset": {"type": "number"},
        "B": _MATRIX,
        "c": _VECTOR,
        "rho": {"type": "number", "minimum": 0},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "quadratic"}}}, "then": {"required": ["Q"]}},
        {"if": {"properties": {"kind": {"const": "log_sum_exp"}}}, "then": {"required": ["B"]}},
    ],
}

_UNIVERSE_SCHEMA = {
    "type": "object",
    "required": ["m", "graphs"],
    "properties": {
        "m": {"type": "integer", "minimum": 1},
        "graphs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"label": {"type": "string"}, "weights": _MATRIX, "adjacency": _MATRIX},
                "oneOf": [{"required": ["weights"]}, {"required": ["adjacency"]}],
            },
        },
        "model": {"$ref": "#/$defs/model"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

_MODEL_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["iid", "markov", "cycle", "b_connected_cycle", "gossip"]},
        "probabilities": _VECTOR,
        "transition": _MATRIX,
        "initial": _VECTOR,
        "order": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "m": {"type": "integer", "minimum": 2},
        "pairs": {"type": "array", "items": {"type": "array", "items": {"type": "integer"},
                                             "minItems": 2, "maxItems": 2}},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "markov"}}}, "then": {"required": ["transition"]}},
        {"if": {"properties": {"kind": {"const": "gossip"}}}, "then": {"required": ["pairs"]}},
    ],
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["problem", "network", "algorithm"],
    "additionalProperties": False,
    "$defs": {"function": _FUNCTION_SCHEMA, "model": _MODEL_SCHEMA, "universe": _UNIVERSE_SCHEMA},
    "properties": {
        "problem": {
            "type": "object",
            "required": ["type", "costs"],
            "properties": {
                "type": {"enum": ["resource_allocation", "consensus"]},
                "costs": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/function"}},
                "resources": {"type": "array", "items": {"anyOf": [{"type": "number"}, _VECTOR]}},
            },
            "if": {"properties": {"type": {"const": "resource_allocation"}}},
            "then": {"required": ["resources"]},
        },
        "network": {
            "type": "object",
            "required": ["model"],
            "properties": {
                "universe": {"$ref": "#/$defs/universe"},
                "universe_path": {"type": "string"},
                "model": {"$ref": "#/$defs/model"},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "algorithm": {
            "type": "object",
            "required": ["horizon"],
            "properties": {
                "beta": {"anyOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
                "eta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "step": {"anyOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
                "schedule": {
                    "type": "object",
                    "properties": {
                        "kind": {"enum": ["power_decay", "constant_then_decay", "table"]},
                        "zeta": {"type": "number"},
                        "alpha0": {"type": "number"},
                        "hold": {"type": "integer", "minimum": 0},
                        "table": _VECTOR,
                    },
                },
                "horizon": {"type": "integer", "minimum": 0},
                "inner_tol": {"type": "number", "exclusiveMinimum": 0},
                "convergence_tol": {"type": "number", "exclusiveMinimum": 0},
                "window": {"type": "integer", "minimum": 1},
                "y0": {"type": "array"},
            },
        },
        "outputs": {
            "type": "object",
            "properties": {
                "trace": {"type": "string"},
                "report": {"type": "string"},
                "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            },
        },
    },
}
_UNIVERSE_FILE_SCHEMA = dict(_UNIVERSE_SCHEMA, **{"$defs": {"model": _MODEL_SCHEMA}})
_FUNCTION_FILE_SCHEMA = dict(_FUNCTION_SCHEMA, properties=dict(
    _FUNCTION_SCHEMA["properties"], samples={"type": "integer", "minimum": 1},
    seed={"type": "integer", "minimum": 0}))


class ConfigError(DualBridgeError, ValueError):
    """Unreadable or schema-invalid configuration."""


def _read_json(path, schema) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(data),
                    key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        lines = [f"{path}: field '{'/'.join(map(str, e.absolute_path)) or '<root>'}': {e.message}"
                 for e in errors]
        raise ConfigError("\n".join(lines))
    return data


def _fmt(x) -> str:
    """Full-precision decimal; NaN becomes an empty cell."""
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def write_trace(result: RunResult, path) -> None:
    tr = result.trace
    labels = tr.graph_labels
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for k in range(len(tr)):
            w.writerow([int(tr.t[k]), labels[tr.graph_index[k]], _fmt(tr.alpha[k]),
                        _fmt(tr.consensus_residual[k]), _fmt(tr.constraint_residual[k]),
                        _fmt(tr.dual_error[k]), _fmt(tr.mean_inner_iters[k])])


# -- building blocks from config ----------------------------------------------

def build_problem(spec: dict):
    costs = [function_from_dict(c) for c in spec["costs"]]
    if spec["type"] == "resource_allocation":
        n = costs[0].dim
        R = np.asarray(spec["resources"], dtype=float).reshape(len(costs), n)
        return ResourceAllocationProblem(costs, R)
    return ConsensusProblem(costs)


def build_process(spec: dict, base_dir: Path, seed: Optional[int] = None):
    universe = None
    if "universe" in spec:
        universe = universe_from_dict(spec["universe"])
    elif "universe_path" in spec:
        p = Path(spec["universe_path"])
        upath = p if p.is_absolute() else base_dir / p
        universe = universe_from_dict(_read_json(upath, _UNIVERSE_FILE_SCHEMA))
    elif spec["model"]["kind"] != "gossip":
        raise ConfigError("network needs 'universe' or 'universe_path' unless the model is gossip")
    return process_from_dict(universe, spec["model"], spec.get("seed", 0) if seed is None else seed)


def build_schedule(spec: Optional[dict]) -> StepSchedule:
    spec = dict(spec or {})
    kind = spec.pop("kind", "power_decay")
    if "table" in spec:
        spec["table"] = tuple(spec["table"])
    return StepSchedule(kind, **spec)


def _network_report(process) -> dict:
    a1 = {g.label: validate_a1(g).to_dict() for g in process.universe}
    return {"a1": a1, "a2": validate_a2(process.universe).to_dict(),
            "a3": certify_a3(process).to_dict()}


def _oracle(problem):
    costs = problem.costs
    quadratic = all(getattr(f, "kind", "") == "quadratic" for f in costs)
    if isinstance(problem, ResourceAllocationProblem):
        if quadratic:
            return solve_ra_quadratic(problem), "closed_form"
        if problem.m * problem.n <= MAX_GENERAL_VARIABLES:
            return solve_ra_general(problem), "projected_gradient"
        return None, None
    return solve_consensus(problem), "closed_form" if quadratic else "gradient"


def _execute(problem, process, alg: dict, oracle) -> RunResult:
    common = dict(horizon=alg["horizon"], oracle=oracle,
                  convergence_tol=alg.get("convergence_tol", 1e-2),
                  window=alg.get("window", 100), inner_tol=alg.get("inner_tol", 1e-10))
    y0 = np.asarray(alg["y0"], dtype=float) if "y0" in alg else None
    if isinstance(problem, ResourceAllocationProblem):
        return run_theorem1(problem, process, build_schedule(alg.get("schedule")),
                            beta=alg.get("beta", "auto"), eta=alg.get("eta", 0.5), y0=y0, **common)
    return run_reverse_direction(problem, process, step=alg.get("step", "auto"), y0=y0, **common)


def _final_residuals(result: RunResult) -> dict:
    tr = result.trace
    if not len(tr):
        return {"consensus_residual": None, "constraint_residual": None, "dual_error": None}
    return {"consensus_residual": float(tr.consensus_residual[-1]),
            "constraint_residual": float(tr.constraint_residual[-1]),
            "dual_error": None if math.isnan(tr.dual_error[-1]) else float(tr.dual_error[-1])}


def _checkpoints(horizon: int) -> list[int]:
    pts, k = [], 1
    while k <= horizon:
        pts.append(k)
        k *= 10
    if horizon and (not pts or pts[-1] != horizon):
        pts.append(horizon)
    return pts


def cmd_run(config_path, seed: Optional[int] = None, horizon: Optional[int] = None,
            quiet: bool = False) -> int:
    """Run an experiment end to end; writes the trace CSV and report JSON named in the config."""
    config_path = Path(config_path)
    try:
        cfg = _read_json(config_path, CONFIG_SCHEMA)
        base = config_path.parent
        alg = dict(cfg["algorithm"])
        if horizon is not None:
            alg["horizon"] = int(horizon)
        outputs = cfg.get("outputs", {})
        seeds = [seed] if seed is not None else outputs.get("seeds") or [cfg["network"].get("seed", 0)]
        problem = build_problem(cfg["problem"])
        processes = [build_process(cfg["network"], base, s) for s in seeds]
        dp = lagrange_dual(problem) if isinstance(problem, ResourceAllocationProblem) \
            else fenchel_dual(problem)
        oracle, oracle_method = _oracle(problem)
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(lambda p: _execute(problem, p, alg, oracle), processes))
    except (DualBridgeError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    main = results[0]
    constants = dp.constants()
    report = {
        "direction": dp.direction,
        "converged": all(r.converged for r in results),
        "converged_at": main.converged_at,
        "horizon": alg["horizon"],
        "final_residuals": _final_residuals(main),
        "derived_constants": constants,
        "network": _network_report(processes[0]),
        "seeds": [
            {"seed": p.seed, "converged": r.converged, "converged_at": r.converged_at,
             "final_residuals": _final_residuals(r), "warnings": r.warnings}
            for p, r in zip(processes, results)
        ],
    }
    if isinstance(problem, ResourceAllocationProblem):
        report["beta"] = main.final_state.beta
        report["eta"] = main.final_state.eta
        report["schedule"] = build_schedule(alg.get("schedule")).to_dict()
    else:
        report["step"] = main.final_state.beta
    if oracle is not None:
        comp = {"method": oracle_method, "primal": np.asarray(oracle.primal).tolist(),
                "dual": np.asarray(oracle.dual).tolist(), "objective": oracle.objective,
                "recovered": np.asarray(main.recovered).tolist(),
                "primal_error": float(np.max(np.abs(np.asarray(main.recovered) - oracle.primal)))}
        if isinstance(problem, ResourceAllocationProblem):
            comp["final_mean_dual"] = main.final_state.y.mean(axis=0).tolist()
            comp["max_agent_dual_error"] = float(np.abs(main.final_state.y - oracle.dual).max())
            pts = _checkpoints(alg["horizon"])
            if pts:
                msq = np.mean([r.trace.squared_error[[k - 1 for k in pts]] for r in results], axis=0)
                comp["mean_square_error"] = {"t": pts, "value": msq.tolist(), "seeds": len(results)}
        report["oracle"] = comp

    trace_path = outputs.get("trace")
    if trace_path:
        tp = Path(trace_path)
        write_trace(main, tp if tp.is_absolute() else base / tp)
    report_path = outputs.get("report")
    if report_path:
        rp = Path(report_path)
        (rp if rp.is_absolute() else base / rp).write_text(json.dumps(report, indent=2) + "\n")
    if not quiet:
        status = "converged" if report["converged"] else "not converged"
        res = report["final_residuals"]
        print(f"{status} (horizon {alg['horizon']}, converged_at={main.converged_at}); "
              f"consensus={res['consensus_residual']}, constraint={res['constraint_residual']}, "
              f"dual_error={res['dual_error']}")
    return 0 if report["converged"] else 2


def cmd_check_graph(universe_path, quiet: bool = False) -> int:
    """
    Check A1 for every graph and A2 for the union.  If the file also carries a
    ``model`` entry, A3 is certified for that process.
    """
    try:
        data = _read_json(universe_path, _UNIVERSE_FILE_SCHEMA)
        universe = universe_from_dict(data)
        process = None
        if "model" in data:
            process = process_from_dict(universe, data["model"], data.get("seed", 0))
    except (DualBridgeError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ok = True
    for g in universe:
        rep = validate_a1(g)
        ok &= rep.ok
        if not quiet or not rep.ok:
            print(f"A1 {g.label}: {'pass' if rep.ok else 'FAIL'} ({rep.describe()})")
    a2 = validate_a2(universe)
    ok &= a2.ok
    print(f"A2: {'pass' if a2.ok else 'FAIL'} (lambda_1 = {a2.lambda1.real:.6g}, "
          f"Re lambda_2 = {a2.lambda2.real:.6g})")
    if process is not None:
        cert = certify_a3(process)
        ok &= cert.certified
        print(f"A3 [{cert.family}]: {'certified' if cert.certified else 'REJECTED'} ({cert.reason})")
        for w in cert.warnings:
            print(f"A3 warning: {w}")
    return 0 if ok else 1


def cmd_conjugate_selftest(spec_path, samples: Optional[int] = None, seed: Optional[int] = None,
                           quiet: bool = False) -> int:
    try:
        spec = _read_json(spec_path, _FUNCTION_FILE_SCHEMA)
        f = function_from_dict(spec)
        rep = verify_conjugate_duality_properties(
            f, samples if samples is not None else spec.get("samples", 100),
            seed if seed is not None else spec.get("seed", 0))
    except (DualBridgeError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out = rep.to_dict()
    if quiet:
        print("pass" if rep.passed else "FAIL")
    else:
        print(json.dumps(out, indent=2))
    return 0 if rep.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dualbridge", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True, metavar="PATH")
    p_run.add_argument("--seed", type=int, help="override the network seed")
    p_run.add_argument("--horizon", type=int, help="override the horizon")
    p_run.add_argument("--quiet", action="store_true")

    p_graph = sub.add_parser("check-graph", help="validate a graph universe (A1, A2, optional A3)")
    p_graph.add_argument("--config", required=True, metavar="PATH")
    p_graph.add_argument("--quiet", action="store_true")

    p_conj = sub.add_parser("conjugate-selftest", help="check conjugate properties of a cost")
    p_conj.add_argument("--config", required=True, metavar="PATH")
    p_conj.add_argument("--samples", type=int)
    p_conj.add_argument("--seed", type=int)
    p_conj.add_argument("--quiet", action="store_true")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.seed, args.horizon, args.quiet)
    if args.command == "check-graph":
        return cmd_check_graph(args.config, args.quiet)
    return cmd_conjugate_selftest(args.config, args.samples, args.seed, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
