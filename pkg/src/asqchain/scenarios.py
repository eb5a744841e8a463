"""Scenario runners that regenerate the figure data as CSV tables.

Each scenario file in ``data/scenarios`` names a ``task``; :func:`run_scenario`
dispatches on it, writes the tables into an output directory and returns a
schema-valid JSON summary with the headline numbers. All randomness is
driven by the explicit ``seed`` of the spec.

Tables per task (qubit labels 1-based):

``supercurrent``
    ``supercurrent.csv``: ``phi_rad, I_up_uA, I_down_uA``
``coupling``
    ``coupling.csv``: ``phi_rad, J_GHz``
``crosstalk``
    ``couplings.csv``: ``sample, i, j, class, J_GHz``; with a ``delta``
    sweep also ``scaling.csv``: ``delta_Phi0, on_on_median_GHz,
    on_off_median_GHz, off_off_median_GHz``
``dispersive``
    ``dispersive.csv``: ``sweep_var, spin_config, branch, f_GHz``
``avoided_crossing``
    ``crossing.csv``: ``loop_flux_Phi0, setpoint, spin, branch, f_GHz``
``cphase``
    ``cphase.csv``: ``basis, phase_rad``
``tuneup``
    ``tuneup.csv``: ``quantity, qubit, truth, estimate``
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from .coupling import pairwise_coupling
from .dynamics import cphase_gate
from .errors import AsqChainError, ValidationError
from .planner import BiasModel, crosstalk_monte_carlo, plan_pair
from .readout import avoided_crossing_scan, dispersive_sweep
from .spin import supercurrent_amplitudes
from .tuneup import VirtualDevice, run_tuneup, tuneup_report

MICROAMP = 1e6


def list_scenarios() -> list[str]:
    folder = resources.files("asqchain").joinpath("data", "scenarios")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def scenario_path(name: str):
    if name not in list_scenarios():
        raise ValidationError(f"unknown scenario {name!r}; available: {', '.join(list_scenarios())}")
    return resources.files("asqchain").joinpath("data", "scenarios", f"{name}.json")


def load_scenario(name: str) -> io.ScenarioSpec:
    with resources.as_file(scenario_path(name)) as path:
        return io.load_config(path)


@dataclass(frozen=True)
class ScenarioResult:
    summary: dict
    files: tuple[Path, ...]
    summary_path: Path


def _phase_fluxes(n: int, target: int, phi: float) -> np.ndarray:
    """Loop fluxes that put phase ``phi`` on ``target`` and 0 on every other ASQ."""
    phases = np.zeros(n)
    phases[target] = phi / (2.0 * math.pi)
    return np.diff(np.concatenate(([0.0], phases)))


def _sign_changes(x, y) -> list[float]:
    out = []
    for k in range(len(x) - 1):
        if y[k] == 0:
            out.append(float(x[k]))
        elif y[k] * y[k + 1] < 0:
            out.append(float(x[k] - y[k] * (x[k + 1] - x[k]) / (y[k + 1] - y[k])))
    return out


def _sweep_values(spec, default_variable, default=(0.0, 1.0, 101)):
    sweep = spec.sweep or io.Sweep(default_variable, *default)
    if sweep.variable != default_variable and not (
        default_variable.startswith("flux:") and sweep.loop is not None
    ):
        raise ValidationError(f"task {spec.task} cannot sweep {sweep.variable!r}")
    return sweep, sweep.values()


# -- tasks ---------------------------------------------------------------------------------


def _supercurrent(spec, out):
    _, phis = _sweep_values(spec, "phi", (-math.pi, math.pi, 201))
    asq = spec.config.asqs[spec.params.get("target", 1) - 1]
    rows, split = [], []
    for phi in phis:
        i_s, i_0 = supercurrent_amplitudes(asq, float(phi))
        up, down = -(0.5 * i_s) - i_0, 0.5 * i_s - i_0
        rows.append((float(phi), up * MICROAMP, down * MICROAMP))
        split.append(up - down)
    path = io.write_csv(
        out / "supercurrent.csv", ["phi_rad", "I_up_uA", "I_down_uA"], rows,
        units={"phi_rad": "rad", "I_up_uA": "uA", "I_down_uA": "uA"},
    )
    headline = {
        "spin_splitting_zeros_rad": _sign_changes(phis, split),
        "max_spin_splitting_nA": float(np.max(np.abs(split)) * 1e9),
    }
    return headline, [path]


def _coupling(spec, out):
    _, phis = _sweep_values(spec, "phi", (-math.pi, math.pi, 201))
    cfg = spec.config
    i, j = spec.pair()
    rows = []
    for phi in phis:
        c = cfg.with_fluxes(_phase_fluxes(cfg.n, i, float(phi)))
        rows.append((float(phi), pairwise_coupling(c, i, j)))
    js = np.array([r[1] for r in rows])
    path = io.write_csv(out / "coupling.csv", ["phi_rad", "J_GHz"], rows,
                        units={"phi_rad": "rad", "J_GHz": "GHz"},
                        comments=[f"pair ({i + 1}, {j + 1}), phase swept on qubit {i + 1}"])
    k = int(np.argmax(np.abs(js)))
    headline = {
        "max_abs_J_MHz": float(abs(js[k]) * 1e3),
        "phi_at_max_rad": float(phis[k]),
        "zeros_rad": _sign_changes(phis, js),
    }
    return headline, [path]


def _crosstalk(spec, out):
    cfg = spec.config
    i, j = spec.pair()
    plan = plan_pair(i, j, cfg)
    samples = spec.params.get("samples", 1000)
    delta = spec.params.get("delta", 1e-3)
    stats = crosstalk_monte_carlo(cfg, plan, delta, samples, spec.seed)
    files = [io.write_csv(
        out / "couplings.csv", ["sample", "i", "j", "class", "J_GHz"], stats.rows(),
        units={"J_GHz": "GHz (signed)"},
        comments=[f"pair ({i + 1}, {j + 1}), uniform flux offsets in +-{delta!r} Phi_0, seed {spec.seed}"],
    )]
    summary = stats.summary()
    headline = {
        "delta_Phi0": delta,
        "samples": samples,
        "on_on_median_MHz": summary["on_on"]["median_GHz"] * 1e3,
        "on_off_over_on_on": summary["on_off_over_on_on"],
        "off_off_over_on_on": summary["off_off_over_on_on"],
        "plan_fluxes_Phi0": list(plan.fluxes),
    }
    if spec.sweep is not None:
        if spec.sweep.variable != "delta":
            raise ValidationError(f"task crosstalk cannot sweep {spec.sweep.variable!r}")
        deltas = spec.sweep.values()
        med = []
        for d in deltas:
            s = crosstalk_monte_carlo(cfg, plan, float(d), samples, spec.seed)
            med.append((float(d), float(np.median(s.on_on)), float(np.median(s.on_off)), float(np.median(s.off_off))))
        files.append(io.write_csv(
            out / "scaling.csv",
            ["delta_Phi0", "on_on_median_GHz", "on_off_median_GHz", "off_off_median_GHz"], med,
            units={"delta_Phi0": "Phi_0"},
        ))
        m = np.array(med)
        for col, name in ((2, "on_off"), (3, "off_off")):
            headline[f"{name}_slope"] = float(np.polyfit(np.log(m[:, 0]), np.log(m[:, col]), 1)[0])
    return headline, files


def _spin_label(spins) -> str:
    return "".join("u" if s > 0 else "d" for s in spins)


def _dispersive(spec, out):
    circuit, resonator = _need_readout(spec)
    sweep, fluxes = _sweep_values(spec, "flux:1")
    q = sweep.loop
    cfg = spec.config
    others = [1] * cfg.n
    fluxes, up, down = dispersive_sweep(circuit, cfg, resonator, q, fluxes, others)
    rows = []
    for k, f in enumerate(fluxes):
        for s, freq in ((1, up[k]), (-1, down[k])):
            spins = list(others)
            spins[q] = s
            rows.append((float(f), _spin_label(spins), "resonator", float(freq)))
    path = io.write_csv(out / "dispersive.csv", ["sweep_var", "spin_config", "branch", "f_GHz"], rows,
                        units={"sweep_var": f"flux through loop {q + 1} (Phi_0)", "f_GHz": "GHz"},
                        comments=["spin_config lists qubits 1..N, u = spin up, d = spin down"])
    shift = np.abs(up - down)
    k = int(np.argmax(shift))
    # ON setpoint: cumulative phase of the swept qubit at 0
    on_flux = float((-np.sum(cfg.fluxes[:q])) % 1.0)
    _, on_up, on_down = dispersive_sweep(circuit, cfg, resonator, q, [on_flux], others)
    headline = {
        "max_dispersive_shift_MHz": float(shift[k] * 1e3),
        "flux_at_max_Phi0": float(fluxes[k]),
        "on_setpoint_flux_Phi0": on_flux,
        "on_setpoint_degeneracy_kHz": float(abs(on_up[0] - on_down[0]) * 1e6),
    }
    return headline, [path]


def _avoided_crossing(spec, out):
    circuit, resonator = _need_readout(spec)
    _, loop_fluxes = _sweep_values(spec, "loop_flux", (0.0, 0.5, 101))
    target = spec.params.get("target", 1) - 1
    scan = avoided_crossing_scan(circuit, spec.config, resonator, loop_fluxes, target=target,
                                 min_overlap=spec.params.get("min_overlap", 0.9))
    path = io.write_csv(out / "crossing.csv", ["loop_flux_Phi0", "setpoint", "spin", "branch", "f_GHz"],
                        scan.rows(), units={"loop_flux_Phi0": "Phi_0", "f_GHz": "GHz"})
    headline = {
        "has_anticrossing": scan.has_anticrossing,
        "crossing_flux_Phi0": scan.crossing_flux,
        "crossing_gap_MHz": scan.crossing_gap * 1e3,
        "setpoint_Phi0": scan.setpoint,
        "off_contrast_kHz": abs(scan.setpoint_contrast_off) * 1e6,
        "on_contrast_MHz": abs(scan.setpoint_contrast_on) * 1e3,
    }
    return headline, [path]


def _cphase(spec, out):
    i, j = spec.pair()
    cfg = plan_pair(i, j, spec.config).apply(spec.config)
    gate = cphase_gate(cfg, (i, j))
    phases = np.angle(np.diag(gate.pair_block))
    rows = [(label, float(p)) for label, p in zip(("00", "01", "10", "11"), phases)]
    path = io.write_csv(out / "cphase.csv", ["basis", "phase_rad"], rows,
                        comments=[f"pair ({i + 1}, {j + 1}) after local-Z correction"])
    headline = {
        "J_MHz": pairwise_coupling(cfg, i, j) * 1e3,
        "gate_time_ns": gate.gate_time,
        "conditional_phase_rad": gate.conditional_phase,
        "average_gate_fidelity": gate.avg_fidelity,
    }
    return headline, [path]


def build_device(spec: io.ScenarioSpec) -> VirtualDevice:
    """Virtual device whose hidden truth is the spec's chain and bias parameters."""
    circuit, resonator = _need_readout(spec)
    n = spec.config.n
    p = spec.params
    slope = p.get("design_slope", 0.01)
    mutual = np.asarray(p.get("mutual", np.diag(np.full(n, slope))), dtype=float)
    offsets = np.asarray(p.get("offsets", np.zeros(n)), dtype=float)
    return VirtualDevice(spec.config, BiasModel(mutual, offsets), circuit, resonator,
                         noise=p.get("noise", 0.0), seed=spec.seed, design_slope=slope)


def tuneup_table(device, cal):
    rows = [(r["quantity"], r["qubit"], r["truth"], r["estimate"]) for r in tuneup_report(device, cal)]
    units = {"E_J": "GHz", "slope": "Phi_0/uA", "phase_at_setpoint": "turns"}
    return ["quantity", "qubit", "truth", "estimate"], rows, units


def _tuneup(spec, out):
    device = build_device(spec)
    cal = run_tuneup(device)
    columns, rows, units = tuneup_table(device, cal)
    path = io.write_csv(out / "tuneup.csv", columns, rows, units=units,
                        comments=["qubit 0 marks the coupling junction"])
    headline = {"calibration": cal.to_dict(),
                "max_setpoint_phase_error_turns": max(abs(r[3]) for r in rows if r[0] == "phase_at_setpoint")}
    return headline, [path]


def _need_readout(spec):
    if spec.readout is None:
        raise ValidationError(f"task {spec.task} needs a readout section")
    return spec.readout


TASKS: dict[str, Callable] = {
    "supercurrent": _supercurrent,
    "coupling": _coupling,
    "crosstalk": _crosstalk,
    "dispersive": _dispersive,
    "avoided_crossing": _avoided_crossing,
    "cphase": _cphase,
    "tuneup": _tuneup,
}


def run_scenario(spec: io.ScenarioSpec, out_dir, *, seed: int | None = None) -> ScenarioResult:
    """Run ``spec`` and write its tables plus ``summary.json`` into ``out_dir``.

    Errors from the numerical modules are re-raised with the scenario name
    prepended, keeping their type (and hence the CLI exit code).
    """
    if seed is not None:
        spec = replace(spec, seed=int(seed))
    if spec.task not in TASKS:
        raise ValidationError(f"scenario {spec.name}: no task given (one of {', '.join(TASKS)})")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        headline, files = TASKS[spec.task](spec, out)
    except AsqChainError as exc:
        raise type(exc)(f"scenario {spec.name}: {exc}") from exc
    if spec.outputs:
        wanted = set(spec.outputs)
        unknown = wanted - {f.stem for f in files}
        if unknown:
            raise ValidationError(f"scenario {spec.name}: unknown outputs {sorted(unknown)}")
        for f in files:
            if f.stem not in wanted:
                f.unlink()
        files = [f for f in files if f.stem in wanted]
    summary = io.make_summary(spec.name, spec.seed, headline, [f.name for f in files])
    path = io.write_summary(out / "summary.json", summary)
    return ScenarioResult(summary, tuple(files), path)
