"""Command-line front end.

Subcommands: bounds, verify-tables, simulate, scalability, oracle, replay.
Every invocation produces a RunReport (command echo, resolved config, seed,
outputs, timing, version).  The default rendering is a short text summary;
``--json`` prints the full report, ``--csv`` prints plot-ready rows where a
command defines them, and ``--out FILE`` additionally writes the report
JSON.  stdout carries only the report; diagnostics go to stderr.

Config precedence is flags > --config file > built-in defaults; the config
file uses the same flat JSON schema as the report's "config" echo, which is
what makes ``replay`` work: it re-runs a command from a stored report and
verifies the outputs reproduce bit-exactly.

Exit codes: 0 success; 1 verification failure or replay mismatch;
2 domain/usage error; 3 resource guard; 4 missing or malformed data file;
5 stale or missing bound table.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DataFileError,
    DomainError,
    EstimationError,
    ResourceLimitError,
    StaleTableError,
)
from .optimize import OptimizerConfig, config_hash, maximize, refine, set_workers
from .oracle import exact_classical_max
from .scaling import certifiable_table, load_bound_table, max_certifiable_dimension
from .simulate import (
    DEMO_DARK_RATE,
    DEMO_SIGNAL_RATE,
    CountRecord,
    NoiseModel,
    estimate_witness,
    simulate_counts,
)
from .states import (
    data_dir,
    ensemble_from_dict,
    load_classical_reference,
    load_reference_angles,
    quantum_correlators,
)
from .witness import certify, classical_bound, evaluate, make_witness

# published quantum limits of the 7-preparation witness, 4 decimals
N7_QUANTUM_LIMITS = {2: 17.3976, 3: 20.7085, 4: 23.2167, 5: 24.8987, 6: 26.1017}
REFERENCE_D6_VALUE = 26.1017

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_DOMAIN = 2
EXIT_RESOURCE = 3
EXIT_DATA = 4
EXIT_STALE = 5


def _optimizer_config(config: dict) -> OptimizerConfig:
    return OptimizerConfig(
        restarts=int(config["restarts"]),
        max_iterations=int(config["max_iterations"]),
        gradient_tolerance=float(config["gradient_tolerance"]),
        seed=int(config["seed"]),
    )


# ---------------------------------------------------------------- bounds

BOUNDS_DEFAULTS = {
    "N": 7,
    "d": 6,
    "model": "all",
    "restarts": 2000,
    "max_iterations": 5000,
    "gradient_tolerance": 1e-9,
    "seed": 0,
    "workers": None,
}


def run_bounds(config: dict) -> dict:
    spec = make_witness(int(config["N"]))
    d = int(config["d"])
    model = config["model"]
    if model not in ("quantum", "classical-diagonal", "classical-exact", "all"):
        raise DomainError(f"unknown model {model!r}")
    set_workers(config.get("workers"))
    outputs: dict = {"N": spec.N, "d": d}
    if model in ("quantum", "all"):
        outputs["quantum"] = maximize(spec, "quantum", d, _optimizer_config(config)).to_dict()
    if model in ("classical-diagonal", "all"):
        outputs["classical_diagonal"] = maximize(
            spec, "classical_diagonal", d, _optimizer_config(config)
        ).to_dict()
    if model in ("classical-exact", "all"):
        value, strategy = exact_classical_max(spec.N, d)
        outputs["classical_exact"] = {
            "value": value,
            "formula_value": classical_bound(spec.N, d) if d <= spec.N - 1 else None,
            "strategy": strategy.to_dict(),
        }
    return outputs


def _render_bounds(outputs: dict, out) -> None:
    print(f"I_{outputs['N']} bounds at d={outputs['d']}", file=out)
    for key in ("quantum", "classical_diagonal"):
        if key in outputs:
            est = outputs[key]
            print(
                f"  {key:20s} {est['best_value']:.6f}   "
                f"(restarts {est['config']['restarts']}, converged {est['converged_fraction']:.1%})",
                file=out,
            )
    if "classical_exact" in outputs:
        ce = outputs["classical_exact"]
        formula = ce["formula_value"]
        tail = f"   formula {formula}" if formula is not None else ""
        print(f"  {'classical_exact':20s} {ce['value']:.6f}{tail}", file=out)


def _csv_bounds(outputs: dict) -> str:
    lines = ["model,best_value"]
    for key in ("quantum", "classical_diagonal"):
        if key in outputs:
            lines.append(f"{key},{outputs[key]['best_value']!r}")
    if "classical_exact" in outputs:
        lines.append(f"classical_exact,{outputs['classical_exact']['value']!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------- verify-tables

VERIFY_DEFAULTS = {
    "tolerance": 5e-4,
    "stationarity_tolerance": 1e-4,
}


def run_verify_tables(config: dict) -> dict:
    spec = make_witness(7)
    ensemble = load_reference_angles()
    value = evaluate(spec, quantum_correlators(ensemble))
    target = REFERENCE_D6_VALUE
    value_ok = abs(value - target) <= float(config["tolerance"])
    # the bundled angles are rounded to 4 decimals; polish locally before
    # asking for stationarity
    polished = refine(spec, ensemble.flat_angles(), "quantum", 6)
    stationary_ok = polished.gradient_norm < float(config["stationarity_tolerance"])
    adjustment = float(np.max(np.abs(polished.params - ensemble.flat_angles())))
    return {
        "value": value,
        "target": target,
        "tolerance": float(config["tolerance"]),
        "value_ok": value_ok,
        "polished_value": polished.value,
        "polished_gradient_norm": polished.gradient_norm,
        "stationarity_tolerance": float(config["stationarity_tolerance"]),
        "stationarity_ok": stationary_ok,
        "max_angle_adjustment": adjustment,
        "passed": value_ok and stationary_ok,
    }


def _render_verify(outputs: dict, out) -> None:
    state = "PASS" if outputs["passed"] else "FAIL"
    print(
        f"{state}: bundled angles give {outputs['value']:.6f} "
        f"(target {outputs['target']} +- {outputs['tolerance']}), "
        f"polished gradient norm {outputs['polished_gradient_norm']:.2e} "
        f"(< {outputs['stationarity_tolerance']})",
        file=out,
    )


# ---------------------------------------------------------------- simulate

SIMULATE_DEFAULTS = {
    "ensemble": "bundled:quantum-d6",
    "fidelity": 0.991,
    "dark_rate": DEMO_DARK_RATE,
    "signal_rate": DEMO_SIGNAL_RATE,
    "seed": 0,
    "repetitions": 1,
    "dark_correction": True,
    "dump_counts": None,
}


def _load_ensemble_arg(name: str):
    if name == "bundled:quantum-d6":
        return load_reference_angles()
    if name == "bundled:classical-d6":
        return load_classical_reference()
    path = Path(name)
    if not path.exists():
        raise DomainError(f"ensemble file not found: {name}")
    try:
        return ensemble_from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DomainError(f"malformed ensemble file {name}: {exc}") from exc


def _quantum_bounds_for(N: int):
    if N == 7:
        return sorted(N7_QUANTUM_LIMITS.items())
    try:
        table, _ = load_bound_table(data_dir() / "quantum_bounds.json", allow_stale=True)
    except DataFileError:
        return None
    if all((N, d) in table for d in range(2, N)):
        return [(d, table[(N, d)]) for d in range(2, N)]
    return None


def run_simulate(config: dict) -> dict:
    ensemble = _load_ensemble_arg(config["ensemble"])
    noise = NoiseModel(
        fidelity=float(config["fidelity"]),
        dark_rate=float(config["dark_rate"]),
        signal_rate=float(config["signal_rate"]),
    )
    spec = make_witness(ensemble.N)
    bounds = _quantum_bounds_for(ensemble.N)
    if bounds is None:
        print(
            f"note: no quantum bounds cover N={ensemble.N}; verdicts omitted",
            file=sys.stderr,
        )
    base_seed = int(config["seed"])
    reps = int(config["repetitions"])
    dump_dir = config.get("dump_counts")
    per_rep = []
    values = []
    for rep in range(reps):
        seed = base_seed + rep
        record = simulate_counts(ensemble, noise, seed)
        value, sigma = estimate_witness(record, spec, bool(config["dark_correction"]))
        row = {"repetition": rep, "seed": seed, "value": value, "sigma": sigma}
        if bounds is not None:
            row["verdict"] = certify(value, ensemble.N, bounds).to_dict()
        per_rep.append(row)
        values.append(value)
        if dump_dir:
            directory = Path(dump_dir)
            directory.mkdir(parents=True, exist_ok=True)
            (directory / f"counts_rep{rep:04d}.csv").write_text(record.to_csv())
    values = np.asarray(values)
    outputs = {
        "ensemble": config["ensemble"],
        "model": ensemble.model,
        "N": ensemble.N,
        "d": ensemble.d,
        "noise": noise.to_dict(),
        "dark_correction": bool(config["dark_correction"]),
        "repetitions": per_rep,
        "mean_value": float(values.mean()),
        "std_value": float(values.std(ddof=1)) if reps > 1 else 0.0,
        "mean_sigma": float(np.mean([r["sigma"] for r in per_rep])),
    }
    if bounds is not None and ensemble.N - 1 >= 1:
        top_classical = classical_bound(ensemble.N, ensemble.N - 1)
        outputs["fraction_above_top_classical"] = float(np.mean(values > top_classical))
    return outputs


def _render_simulate(outputs: dict, out) -> None:
    print(
        f"simulated {outputs['model']} ensemble N={outputs['N']} d={outputs['d']} "
        f"(F={outputs['noise']['fidelity']}, dark={outputs['noise']['dark_rate']}, "
        f"rate={outputs['noise']['signal_rate']:g})",
        file=out,
    )
    print(
        f"  witness estimate {outputs['mean_value']:.4f} "
        f"(mean sigma {outputs['mean_sigma']:.4f}, {len(outputs['repetitions'])} repetitions)",
        file=out,
    )
    if "fraction_above_top_classical" in outputs:
        print(
            f"  fraction above top classical bound: {outputs['fraction_above_top_classical']:.1%}",
            file=out,
        )
    first = outputs["repetitions"][0]
    if "verdict" in first:
        v = first["verdict"]
        print(
            f"  first repetition verdict: min quantum dimension {v['min_quantum_dimension']}, "
            f"beats classical bounds up to d={v['exceeds_classical_at']}",
            file=out,
        )


def _csv_simulate(outputs: dict) -> str:
    lines = ["repetition,seed,value,sigma,min_quantum_dimension,exceeds_classical_at"]
    for row in outputs["repetitions"]:
        verdict = row.get("verdict") or {}
        lines.append(
            f"{row['repetition']},{row['seed']},{row['value']!r},{row['sigma']!r},"
            f"{verdict.get('min_quantum_dimension', '')},{verdict.get('exceeds_classical_at', '')}"
        )
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------- scalability

SCALABILITY_DEFAULTS = {
    "fidelities": [0.991],
    "bound_table": None,  # default: bundled quantum_bounds.json
    "allow_stale": False,
    "d_min": 3,
    "d_max": 19,
}


def run_scalability(config: dict) -> dict:
    path = Path(config["bound_table"]) if config.get("bound_table") else data_dir() / "quantum_bounds.json"
    try:
        bounds, payload = load_bound_table(
            path,
            expected_config=OptimizerConfig(),
            allow_stale=bool(config["allow_stale"]),
        )
    except DataFileError as exc:
        raise StaleTableError(
            f"{exc}; regenerate with scripts/generate_bound_table.py"
        ) from exc
    d_range = range(int(config["d_min"]), int(config["d_max"]) + 1)
    fidelities = [float(f) for f in config["fidelities"]]
    per_fidelity = []
    for F in fidelities:
        rows = certifiable_table(F, bounds, d_range)
        per_fidelity.append(
            {
                "fidelity": F,
                "max_certifiable_dimension": max_certifiable_dimension(F, bounds, d_range),
                "rows": rows,
            }
        )
    return {
        "bound_table": str(path),
        "bound_table_hash": payload.get("config_hash"),
        "d_min": int(config["d_min"]),
        "d_max": int(config["d_max"]),
        "per_fidelity": per_fidelity,
    }


def _render_scalability(outputs: dict, out) -> None:
    for block in outputs["per_fidelity"]:
        print(
            f"F={block['fidelity']}: max certifiable dimension "
            f"{block['max_certifiable_dimension']}",
            file=out,
        )
        for row in block["rows"]:
            mark = "yes" if row["separable"] else "no "
            print(
                f"  d={row['d']:2d} (N={row['N']:2d})  I_min(d)={row['I_min_d']:9.4f}  "
                f"I_max(d-1)={row['I_max_dm1']:9.4f}  margin={row['margin']:+8.4f}  {mark}",
                file=out,
            )


def _csv_scalability(outputs: dict) -> str:
    lines = ["fidelity,d,N,i_min_d,i_max_dm1,margin,separable"]
    for block in outputs["per_fidelity"]:
        for row in block["rows"]:
            lines.append(
                f"{block['fidelity']!r},{row['d']},{row['N']},{row['I_min_d']!r},"
                f"{row['I_max_dm1']!r},{row['margin']!r},{int(row['separable'])}"
            )
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ oracle

ORACLE_DEFAULTS = {"N": 7, "d": 6, "use_symmetry": False}


def run_oracle(config: dict) -> dict:
    N, d = int(config["N"]), int(config["d"])
    value, strategy = exact_classical_max(N, d, use_symmetry=bool(config["use_symmetry"]))
    formula = classical_bound(N, d) if d <= N - 1 else None
    return {
        "N": N,
        "d": d,
        "value": value,
        "formula_value": formula,
        "matches_formula": None if formula is None else value == formula,
        "strategy": strategy.to_dict(),
    }


def _render_oracle(outputs: dict, out) -> None:
    formula = outputs["formula_value"]
    tail = f" (formula {formula}, match={outputs['matches_formula']})" if formula is not None else ""
    print(f"exact classical max I_{outputs['N']} at d={outputs['d']}: {outputs['value']}{tail}", file=out)
    print(f"  emission map: {outputs['strategy']['emission']}", file=out)


# ------------------------------------------------------------------ replay

RUNNERS = {
    "bounds": run_bounds,
    "verify-tables": run_verify_tables,
    "simulate": run_simulate,
    "scalability": run_scalability,
    "oracle": run_oracle,
}


def run_replay(config: dict) -> dict:
    report_path = Path(config["report"])
    if not report_path.exists():
        raise DataFileError(f"report not found: {report_path}")
    try:
        report = json.loads(report_path.read_text())
        command = report["command"]
        stored_outputs = report["outputs"]
        stored_config = report["config"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataFileError(f"malformed report {report_path}: {exc}") from exc
    runner = RUNNERS.get(command)
    if runner is None:
        raise DomainError(f"cannot replay command {command!r}")
    outputs = runner(stored_config)
    match = json.dumps(outputs, sort_keys=True) == json.dumps(stored_outputs, sort_keys=True)
    return {
        "replayed_command": command,
        "report": str(report_path),
        "match": match,
        "outputs": outputs,
    }


def _render_replay(outputs: dict, out) -> None:
    state = "MATCH" if outputs["match"] else "MISMATCH"
    print(f"replay of {outputs['replayed_command']} from {outputs['report']}: {state}", file=out)


# ------------------------------------------------------------------- main

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--json", action="store_true", help="print the full RunReport JSON")
    parser.add_argument("--csv", action="store_true", help="print plot-ready CSV rows")
    parser.add_argument("--out", type=str, default=None, help="also write the report JSON here")
    parser.add_argument("--config", type=str, default=None, help="JSON config file (same schema as the report config echo)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dimwit", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"dimwit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="estimate quantum/classical maxima of I_N")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument(
        "--model",
        choices=["quantum", "classical-diagonal", "classical-exact", "all"],
        default=None,
    )
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=None)
    p.add_argument("--gradient-tolerance", dest="gradient_tolerance", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("verify-tables", help="check the bundled optimal angles")
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument(
        "--stationarity-tolerance", dest="stationarity_tolerance", type=float, default=None
    )
    _add_common(p)

    p = sub.add_parser("simulate", help="simulate a counting experiment end to end")
    p.add_argument(
        "--ensemble",
        type=str,
        default=None,
        help="ensemble JSON path, or bundled:quantum-d6 / bundled:classical-d6",
    )
    p.add_argument("--fidelity", type=float, default=None)
    p.add_argument("--dark-rate", dest="dark_rate", type=float, default=None)
    p.add_argument("--signal-rate", dest="signal_rate", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument(
        "--dark-correction",
        dest="dark_correction",
        action=argparse.BooleanOptionalAction,
        default=None,
    )
    p.add_argument("--dump-counts", dest="dump_counts", type=str, default=None)
    _add_common(p)

    p = sub.add_parser("scalability", help="fidelity-interval separability analysis")
    p.add_argument(
        "--fidelity",
        dest="fidelities",
        type=float,
        action="append",
        default=None,
        help="repeatable; e.g. --fidelity 0.991 --fidelity 0.98",
    )
    p.add_argument("--bound-table", dest="bound_table", type=str, default=None)
    p.add_argument(
        "--allow-stale", dest="allow_stale", action=argparse.BooleanOptionalAction, default=None
    )
    p.add_argument("--d-min", dest="d_min", type=int, default=None)
    p.add_argument("--d-max", dest="d_max", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("oracle", help="exact classical maximum by enumeration")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument(
        "--use-symmetry", dest="use_symmetry", action=argparse.BooleanOptionalAction, default=None
    )
    _add_common(p)

    p = sub.add_parser("replay", help="re-run a command from its RunReport")
    p.add_argument("report", type=str)
    _add_common(p)

    return parser


DEFAULTS = {
    "bounds": BOUNDS_DEFAULTS,
    "verify-tables": VERIFY_DEFAULTS,
    "simulate": SIMULATE_DEFAULTS,
    "scalability": SCALABILITY_DEFAULTS,
    "oracle": ORACLE_DEFAULTS,
    "replay": {"report": None},
}

RENDERERS = {
    "bounds": _render_bounds,
    "verify-tables": _render_verify,
    "simulate": _render_simulate,
    "scalability": _render_scalability,
    "oracle": _render_oracle,
    "replay": _render_replay,
}

CSV_RENDERERS = {
    "bounds": _csv_bounds,
    "simulate": _csv_simulate,
    "scalability": _csv_scalability,
}


def _resolve_config(command: str, args: argparse.Namespace) -> dict:
    config = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise DomainError(f"config file not found: {path}")
        try:
            file_config = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed config file {path}: {exc}") from exc
        for key, value in file_config.items():
            if key in config:
                config[key] = value
    for key in config:
        flag = getattr(args, key, None)
        if flag is not None:
            config[key] = flag
    return config


def _exit_code_for(exc: Exception, command: str) -> int:
    if isinstance(exc, StaleTableError):
        return EXIT_STALE
    if isinstance(exc, (DomainError, EstimationError)):
        return EXIT_DOMAIN
    if isinstance(exc, ResourceLimitError):
        return EXIT_RESOURCE
    if isinstance(exc, (DataFileError, FileNotFoundError)):
        return EXIT_STALE if command == "scalability" else EXIT_DATA
    raise exc


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        config = _resolve_config(command, args)
        started = time.perf_counter()
        outputs = RUNNERS[command](config) if command != "replay" else run_replay(config)
        elapsed = time.perf_counter() - started
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = _exit_code_for(exc, command)
        print(f"error: {exc}", file=sys.stderr)
        return code

    report = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "outputs": outputs,
        "elapsed_seconds": elapsed,
        "version": __version__,
    }
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=1))
    if args.json:
        print(json.dumps(report, indent=1))
    elif args.csv:
        renderer = CSV_RENDERERS.get(command)
        if renderer is None:
            print(f"error: {command} has no CSV view", file=sys.stderr)
            return EXIT_DOMAIN
        sys.stdout.write(renderer(outputs))
    else:
        RENDERERS[command](outputs, sys.stdout)

    if command == "verify-tables" and not outputs["passed"]:
        return EXIT_FAIL
    if command == "replay" and not outputs["match"]:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
