"""Command-line drivers writing deterministic CSV outputs.

Exit codes: 0 success, 1 configuration error, 2 integration failure,
3 unreadable or mismatched optimizer checkpoint.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from rydsim.analytic import sensitivity_surface
from rydsim.config import KHZ, MHZ, RunConfig, bundled_configs, load_config
from rydsim.errors import CheckpointError, ConfigurationError, IntegrationError
from rydsim.gates import blockade_sweep, bell_sequence, robustness_grid
from rydsim.optimize import optimize

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_CHECKPOINT = 0, 1, 2, 3


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _apply_overrides(cfg: RunConfig, args) -> None:
    if args.seed is not None:
        cfg.set("optimize", "seed", args.seed)
    if args.integrator_tol is not None:
        if args.integrator_tol <= 0:
            raise ConfigurationError("--integrator-tol must be positive")
        cfg.set("integrator", "rel_tol", args.integrator_tol)
        cfg.set("integrator", "abs_tol", args.integrator_tol * 1e-2)


def _robustness_rows(grid):
    for dd, di, f in grid.rows():
        yield dd / KHZ, di, f


def cmd_simulate(cfg: RunConfig, out: str, workers) -> None:
    gate = cfg.gate()
    res = bell_sequence(gate, with_phases=True)
    write_csv(
        os.path.join(out, "summary.csv"),
        ["protocol", "T_us", "B_MHz", "fidelity", "phi1_deg", "phi2_deg", "leak_d", "phase_warning"],
        [[gate.protocol, float(gate.T), gate.B / MHZ, res.fidelity, res.phases.phi1, res.phases.phi2,
          float(res.leak_d), int(res.phases.ill_defined)]],
    )
    if cfg.get("output", "traces", True):
        write_csv(os.path.join(out, "traces.csv"), ["time_us"] + res.traces.labels, res.traces.rows())
    print(f"{gate.protocol}: F = {res.fidelity:.6f}, phases = ({res.phases.phi1:.2f}, {res.phases.phi2:.2f}) deg")


def cmd_sweep(cfg: RunConfig, out: str, workers) -> None:
    B_list, weighting = cfg.sweep()
    res = blockade_sweep(cfg.gate(), B_list, workers, weighting)
    write_csv(os.path.join(out, "sweep.csv"), ["B_MHz", "infidelity"], ((b / MHZ, e) for b, e in res.rows()))
    fit_rows = [] if res.fit is None else [[res.fit.b, res.fit.c, res.peak_rabi / MHZ, weighting]]
    write_csv(os.path.join(out, "sweep_fit.csv"), ["b", "c", "omega_max_MHz", "weighting"], fit_rows)
    if res.fit is None:
        print("fewer than three points: fit skipped")
    else:
        print(f"1 - F = {res.fit.b:.3e} + {res.fit.c:.3f} (Omega_max/B)^2")


def cmd_robustness(cfg: RunConfig, out: str, workers) -> None:
    dd, di = cfg.robustness()
    grid = robustness_grid(cfg.gate(), dd, di, workers)
    write_csv(os.path.join(out, "robustness.csv"), ["dDelta_kHz", "dI_frac", "fidelity"], _robustness_rows(grid))
    print(f"min F = {grid.minimum:.6f}, spread = {grid.spread:.3e}")


def cmd_optimize(cfg: RunConfig, out: str, workers) -> None:
    problem, de = cfg.optimization()
    de = de.__class__(de.population, de.weight, de.crossover, de.generations, de.seed, workers)
    checkpoint = cfg.get("optimize", "checkpoint", None) or os.path.join(out, "checkpoint.json")
    res = optimize(problem, de, checkpoint)
    write_csv(os.path.join(out, "history.csv"), ["generation", "best_fitness"], enumerate(res.history))
    pulses = res.drive.pulses(problem.template.T)
    n = 2 * problem.n_half_segments
    write_csv(
        os.path.join(out, "segments.csv"),
        ["function"] + [f"seg{i + 1}" for i in range(n)],
        ([name] + [float(v) / MHZ for v in pulses[name].values] for name in ("omega1", "omega2", "delta1")),
    )
    write_csv(
        os.path.join(out, "optimize_summary.csv"),
        ["fitness", "search_fitness", "slew_MHz_per_us", "slew_metric"],
        [[res.fitness, res.search_fitness, problem.slew(res.x), problem.slew_metric]],
    )
    print(f"best fitness {res.fitness:.6f} after {len(res.history) - 1} generations")


def cmd_analytic(cfg: RunConfig, out: str, workers) -> None:
    dd, di = cfg.robustness()
    grid = sensitivity_surface(cfg.analytic_omega0(), dd, di)
    write_csv(os.path.join(out, "analytic.csv"), ["dDelta_kHz", "dI_frac", "fidelity"], _robustness_rows(grid))
    print(f"min F = {grid.minimum:.6f}")


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "robustness": cmd_robustness,
    "optimize": cmd_optimize,
    "analytic": cmd_analytic,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydsim", description="Rydberg CZ gate simulations")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "Bell-sequence fidelity, phases and population traces",
        "sweep": "infidelity versus blockade strength with fit",
        "robustness": "fidelity over detuning and intensity offsets",
        "optimize": "differential-evolution search for segmented pulses",
        "analytic": "closed-form sensitivity surface of the constant-pulse gate",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True,
                       help=f"INI file, or a bundled name: {', '.join(bundled_configs())}")
        p.add_argument("--output", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override [optimize] seed")
        p.add_argument("--workers", type=int, default=None, help="worker processes (default $RYDSIM_WORKERS or 1)")
        p.add_argument("--integrator-tol", type=float, default=None, help="override integrator relative tolerance")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        if args.workers is not None and args.workers < 1:
            raise ConfigurationError("--workers must be >= 1")
        os.makedirs(args.output, exist_ok=True)
        COMMANDS[args.command](cfg, args.output, args.workers)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
