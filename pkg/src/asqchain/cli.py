"""Command-line entry point: ``asqchain <command> [options]``.

Exit codes: 0 on success, 2 for invalid input (including bad command-line
arguments), 3 when a numerical routine fails to converge. Qubit labels on
the command line are 1-based, like in the configuration files.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, io
from .coupling import compare_with_oracle, coupling_report
from .dynamics import cphase_gate, ising_quench
from .errors import ConvergenceError, ValidationError
from .planner import (
    READOUT_MODES,
    crosstalk_monte_carlo,
    plan_all_to_all,
    plan_idle,
    plan_pair,
    plan_readout,
)
from .readout import circuit_levels, dispersive_sweep, dressed_resonator_freq
from .scenarios import build_device, list_scenarios, load_scenario, run_scenario, scenario_path, tuneup_table
from .tuneup import run_tuneup

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE = 0, 2, 3
U64_MAX = 2**64 - 1


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


class _Output:
    """Routes a result either to stdout or to ``<out>/<stem>.<ext>``."""

    def __init__(self, args):
        self.out = Path(args.out) if args.out else None
        self.format = args.format
        self.command = args.command

    def emit(self, document: dict, table: tuple | None = None) -> None:
        if self.format == "csv" and table is not None:
            columns, rows, units = table
            text = io.csv_text(columns, rows, units=units)
            ext = "csv"
        else:
            text, ext = io.dumps(document), "json"
        if self.out is None:
            sys.stdout.write(text)
        else:
            self.out.mkdir(parents=True, exist_ok=True)
            path = self.out / f"{self.command}.{ext}"
            path.write_text(text)
            print(path)


def _spec(args, need=True) -> io.ScenarioSpec | None:
    if args.config is None:
        if need:
            raise ValidationError(f"{args.command} needs --config")
        return None
    return io.load_config(args.config)


def _label(q: int) -> int:
    return q + 1


def _zero_based(pair, n):
    i, j = (p - 1 for p in pair)
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"invalid pair {pair} for N={n}")
    return i, j


# -- commands ------------------------------------------------------------------------------


def cmd_couplings(args, out: _Output) -> None:
    spec = _spec(args)
    report = coupling_report(spec.config, include_appendix_a=args.three_body)
    doc = {"config": io.config_to_dict(spec.config), "report": report.to_dict()}
    if args.oracle:
        cmp = compare_with_oracle(spec.config)
        doc["oracle"] = {
            "pair_error": cmp.pair_error,
            "triple_error": cmp.triple_error,
            "energy_error": cmp.energy_error,
            "bound": cmp.bound,
            "passed": cmp.passed,
        }
    n = spec.config.n
    rows = [(_label(i), _label(j), "", float(report.pair_couplings[i, j]))
            for i in range(n) for j in range(i + 1, n)]
    rows += [(_label(i), _label(j), _label(k), float(v)) for i, j, k, v in report.triple_couplings]
    out.emit(doc, (["i", "j", "k", "J_GHz"], rows, {"J_GHz": "GHz"}))


def cmd_plan(args, out: _Output) -> None:
    spec = _spec(args, need=False)
    config = spec.config if spec else None
    n = config.n if config else args.n
    if n is None:
        raise ValidationError("plan needs --n or --config")
    if args.kind == "idle":
        plan = plan_idle(n, config, args.pattern)
    elif args.kind == "pair":
        if args.pair is None:
            raise ValidationError("--kind pair needs --pair I J")
        i, j = _zero_based(args.pair, n)
        plan = plan_pair(i, j, config if config else n)
    elif args.kind == "all-to-all":
        plan = plan_all_to_all(n, args.variant, config)
    else:
        if args.target is None:
            raise ValidationError("--kind readout needs --target")
        plan = plan_readout(args.target - 1, args.mode, n, config)
    rows = [(_label(q), plan.tags[q], float(plan.targets[q]), float(plan.fluxes[q])) for q in range(n)]
    out.emit(plan.to_dict(), (["qubit", "tag", "target_rad", "flux_Phi0"], rows, {"flux_Phi0": "Phi_0"}))


def cmd_crosstalk(args, out: _Output) -> None:
    spec = _spec(args)
    config = spec.config
    pair = args.pair or spec.params.get("pair", (1, 2))
    i, j = _zero_based(pair, config.n)
    delta = args.delta if args.delta is not None else spec.params.get("delta", 1e-3)
    samples = args.samples if args.samples is not None else spec.params.get("samples", 1000)
    seed = spec.seed if args.seed is None else args.seed
    plan = plan_pair(i, j, config)
    stats = crosstalk_monte_carlo(config, plan, delta, samples, seed)
    doc = {"pair": [i + 1, j + 1], "delta_Phi0": delta, "samples": samples, "seed": seed,
           "summary": stats.summary(), "plan": plan.to_dict()}
    out.emit(doc, (["sample", "i", "j", "class", "J_GHz"], stats.rows(), {"J_GHz": "GHz (signed)"}))


def _readout_spec(args):
    spec = _spec(args)
    if spec.readout is None:
        raise ValidationError(f"{args.command} needs a readout section in the config")
    return spec


def cmd_readout(args, out: _Output) -> None:
    spec = _readout_spec(args)
    circuit, resonator = spec.readout
    config = spec.config
    if config.n > 10:
        raise ValidationError("readout enumerates all spin configurations; use N <= 10")
    rows, doc = [], {"spin_configurations": []}
    for b in range(1 << config.n):
        spins = [1 - 2 * ((b >> (config.n - 1 - q)) & 1) for q in range(config.n)]
        label = "".join("u" if s > 0 else "d" for s in spins)
        levels = circuit_levels(circuit, config, spins, n_levels=args.levels)
        f_r = dressed_resonator_freq(circuit, config, spins, resonator)
        for k, f in enumerate(levels.transitions, start=1):
            rows.append((label, f"f0{k}", float(f)))
        rows.append((label, "resonator", float(f_r)))
        doc["spin_configurations"].append(
            {"spins": label, "transitions_GHz": levels.transitions.tolist(), "resonator_GHz": f_r}
        )
    out.emit(doc, (["spin_config", "branch", "f_GHz"], rows, {"f_GHz": "GHz"}))


def cmd_dispersive(args, out: _Output) -> None:
    spec = _readout_spec(args)
    circuit, resonator = spec.readout
    config = spec.config
    if spec.sweep is not None and spec.sweep.loop is not None and args.qubit is None:
        q, fluxes = spec.sweep.loop, spec.sweep.values()
    else:
        q = (args.qubit or 1) - 1
        if args.points < 2:
            raise ValidationError("--points needs at least 2")
        if not 0 <= q < config.n:
            raise ValidationError(f"qubit {q + 1} does not exist (N={config.n})")
        fluxes = np.linspace(0.0, 1.0, args.points)
    fluxes, up, down = dispersive_sweep(circuit, config, resonator, q, fluxes)
    rows = []
    for k, f in enumerate(fluxes):
        rows.append((float(f), "u", "resonator", float(up[k])))
        rows.append((float(f), "d", "resonator", float(down[k])))
    shift = np.abs(up - down)
    k = int(np.argmax(shift))
    doc = {"qubit": q + 1, "max_dispersive_shift_MHz": float(shift[k] * 1e3),
           "flux_at_max_Phi0": float(fluxes[k]),
           "sweep": {"flux_Phi0": fluxes.tolist(), "f_up_GHz": up.tolist(), "f_down_GHz": down.tolist()}}
    out.emit(doc, (["sweep_var", "spin_config", "branch", "f_GHz"], rows,
                   {"sweep_var": f"flux through loop {q + 1} (Phi_0)", "f_GHz": "GHz"}))


def cmd_dynamics(args, out: _Output) -> None:
    spec = _spec(args)
    config = spec.config
    if args.quench is not None:
        t_final, steps = args.quench
        report = coupling_report(config, include_appendix_a=args.three_body)
        text = args.initial if args.initial else "u" * config.n
        if len(text) != config.n or set(text) - set("ud"):
            raise ValidationError(f"--initial needs {config.n} characters from 'ud'")
        initial = [1 if c == "u" else -1 for c in text]
        if steps < 1 or steps != int(steps):
            raise ValidationError("--quench STEPS must be a positive integer")
        res = ising_quench(config, report, initial, float(t_final), int(steps))
        doc = {"times_ns": res.times.tolist(), "z": res.z.tolist(), "energy_GHz": res.energy}
        out.emit(doc, (["t_ns", "observable", "value"], res.rows(), {"t_ns": "ns"}))
        return
    pair = args.pair or spec.params.get("pair", (1, 2))
    i, j = _zero_based(pair, config.n)
    if not args.as_configured:
        config = plan_pair(i, j, config).apply(config)
    gate = cphase_gate(config, (i, j), spectators=args.spectators, gate_time=args.time,
                       include_triples=args.three_body)
    phases = np.angle(np.diag(gate.pair_block))
    doc = {"pair": [i + 1, j + 1], "gate_time_ns": gate.gate_time,
           "conditional_phase_rad": gate.conditional_phase,
           "average_gate_fidelity": gate.avg_fidelity, "fluxes_Phi0": list(config.fluxes)}
    rows = list(zip(("00", "01", "10", "11"), map(float, phases)))
    out.emit(doc, (["basis", "phase_rad"], rows, {"phase_rad": "rad"}))


def cmd_tuneup(args, out: _Output) -> None:
    spec = _readout_spec(args)
    if args.noise is not None:
        spec = replace(spec, params={**spec.params, "noise": args.noise})
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    device = build_device(spec)
    cal = run_tuneup(device)
    out.emit(cal.to_dict(), tuneup_table(device, cal))


def cmd_scenario(args, out: _Output) -> None:
    if args.action == "list":
        for name in list_scenarios():
            print(name)
        return
    if args.name is None:
        raise ValidationError("scenario run needs a scenario name or a path to a scenario file")
    candidate = Path(args.name)
    if candidate.suffix == ".json" and candidate.exists():
        spec = io.load_config(candidate)
    else:
        scenario_path(args.name)
        spec = load_scenario(args.name)
    target = Path(args.out) if args.out else Path("out") / spec.name
    result = run_scenario(spec, target, seed=args.seed)
    if args.format == "json":
        sys.stdout.write(io.dumps(result.summary))
    else:
        for f in (*result.files, result.summary_path):
            print(f)


COMMANDS = {
    "couplings": cmd_couplings,
    "plan": cmd_plan,
    "crosstalk-mc": cmd_crosstalk,
    "readout": cmd_readout,
    "dispersive": cmd_dispersive,
    "dynamics": cmd_dynamics,
    "tuneup": cmd_tuneup,
    "scenario": cmd_scenario,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario/configuration JSON file")
    common.add_argument("--seed", type=_seed, help="unsigned 64-bit seed (overrides the file)")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="json")

    parser = argparse.ArgumentParser(prog="asqchain", description="Andreev spin qubit chain toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("couplings", parents=[common], help="pair and three-body couplings of a chain")
    p.add_argument("--three-body", action="store_true", help="include next-order three-body terms")
    p.add_argument("--oracle", action="store_true", help="also compare with the classical minimization oracle")

    p = sub.add_parser("plan", parents=[common], help="flux setpoints for a coupling pattern")
    p.add_argument("--n", type=int, help="number of qubits (if no --config)")
    p.add_argument("--kind", choices=("idle", "pair", "all-to-all", "readout"), default="idle")
    p.add_argument("--pair", type=int, nargs=2, metavar=("I", "J"))
    p.add_argument("--pattern", choices=("alternating", "uniform"), default="alternating")
    p.add_argument("--variant", choices=("uniform", "alternating"), default="uniform")
    p.add_argument("--target", type=int)
    p.add_argument("--mode", choices=READOUT_MODES, default="off-target")

    p = sub.add_parser("crosstalk-mc", parents=[common], help="Monte Carlo of couplings under flux offsets")
    p.add_argument("--pair", type=int, nargs=2, metavar=("I", "J"))
    p.add_argument("--delta", type=float, help="offset half-width (Phi_0)")
    p.add_argument("--samples", type=int)

    p = sub.add_parser("readout", parents=[common], help="circuit spectra and resonator for every spin configuration")
    p.add_argument("--levels", type=int, default=4)

    p = sub.add_parser("dispersive", parents=[common], help="resonator frequency versus one loop flux")
    p.add_argument("--qubit", type=int)
    p.add_argument("--points", type=int, default=101)

    p = sub.add_parser("dynamics", parents=[common], help="CPHASE gate or Ising quench")
    p.add_argument("--pair", type=int, nargs=2, metavar=("I", "J"))
    p.add_argument("--time", type=float, help="gate time in ns (default 1/(4|J|))")
    p.add_argument("--spectators", choices=("up", "average"), default="up")
    p.add_argument("--three-body", action="store_true")
    p.add_argument("--as-configured", action="store_true", help="use the config fluxes instead of a pair plan")
    p.add_argument("--quench", type=float, nargs=2, metavar=("T_NS", "STEPS"))
    p.add_argument("--initial", help="initial spins as a string over 'ud'")

    p = sub.add_parser("tuneup", parents=[common], help="sequential tune-up of a virtual device")
    p.add_argument("--noise", type=float, help="readout noise (GHz)")

    p = sub.add_parser("scenario", parents=[common], help="run a shipped scenario")
    p.add_argument("action", choices=("run", "list"))
    p.add_argument("name", nargs="?")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args, _Output(args))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
