"""Flux assignments for idling, selective coupling, all-to-all and readout.

A plan fixes the phase of every ASQ relative to the network phase offset
``phi_E``: ON qubits sit at 0 or pi (maximal spin-dependent supercurrent),
OFF qubits at +-pi/2 (none). Loop fluxes follow from successive phase
differences, ``Phi_1 = theta_1 / 2 pi`` and
``Phi_i = (theta_i - theta_{i-1}) / 2 pi`` (mod 1).

Internally target phases are kept in turns (fractions of 2 pi), so that
quarter-flux setpoints are represented exactly in binary floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .coupling import DEGENERATE_FRACTION
from .errors import ConvergenceError, DegenerateCouplingError, ValidationError
from .spin import ChainConfig, wrap_phase

ON_0, ON_PI, OFF_PLUS, OFF_MINUS, FREE = "ON-0", "ON-pi", "OFF+", "OFF-", "free"
TAG_TURNS = {ON_0: 0.0, ON_PI: 0.5, OFF_PLUS: 0.25, OFF_MINUS: 0.75}
TURN_TAGS = {v: k for k, v in TAG_TURNS.items()}
CHOICES = {"ON": (0.0, 0.5), "OFF": (0.25, 0.75)}

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 100


@dataclass(frozen=True)
class FluxPlan:
    """Target relative phases, their tags, and the fluxes realising them.

    ``targets`` are phases measured from ``phase_offset_used``; the actual
    cumulative phase of qubit ``i`` is ``targets[i] + phase_offset_used``.
    """

    targets: tuple[float, ...]
    tags: tuple[str, ...]
    fluxes: tuple[float, ...]
    phase_offset_used: float = 0.0
    converged: bool = True
    iterations: int = 0

    @property
    def n(self) -> int:
        return len(self.fluxes)

    @property
    def on_qubits(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.tags) if t.startswith("ON"))

    @property
    def off_qubits(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.tags) if not t.startswith("ON"))

    def apply(self, config: ChainConfig) -> ChainConfig:
        if config.n != self.n:
            raise ValidationError(f"plan is for {self.n} qubits, config has {config.n}")
        return config.with_fluxes(self.fluxes)

    def to_dict(self) -> dict:
        return {
            "targets_rad": [float(t) for t in self.targets],
            "tags": list(self.tags),
            "fluxes_phi0": [float(f) for f in self.fluxes],
            "phase_offset_rad": float(self.phase_offset_used),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }


def _circular(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def _fluxes_from_turns(turns: Sequence[float]) -> list[float]:
    out, prev = [], 0.0
    for t in turns:
        out.append((t - prev) % 1.0)
        prev = t
    return out


def _choose_turns(kinds: Sequence[str], reference: Sequence[float], free_turns: Sequence[float]):
    """Pick one candidate phase per qubit with minimal total flux change.

    Exact dynamic programming over the (at most two) candidates per qubit.
    Among optimal assignments the one with lexicographically smallest
    phases (ON-0 before ON-pi, OFF+ before OFF-) is returned.
    """
    n = len(kinds)
    cands = []
    for q, kind in enumerate(kinds):
        if kind == FREE:
            cands.append((free_turns[q] % 1.0,))
        else:
            cands.append(CHOICES[kind])
    # cost_to_go[q][a]: best cost of loops q+1.. given qubit q at candidate a
    cost_to_go = [np.zeros(len(c)) for c in cands]
    for q in range(n - 2, -1, -1):
        for a, ta in enumerate(cands[q]):
            cost_to_go[q][a] = min(
                _circular((tb - ta) % 1.0, reference[q + 1]) + cost_to_go[q + 1][b]
                for b, tb in enumerate(cands[q + 1])
            )
    turns, prev = [], 0.0
    for q in range(n):
        best, pick = math.inf, None
        for b, tb in enumerate(cands[q]):
            cost = _circular((tb - prev) % 1.0, reference[q]) + cost_to_go[q][b]
            if cost < best - 1e-12:
                best, pick = cost, tb
        turns.append(pick)
        prev = pick
    return turns


def _offset_fixed_point(config: ChainConfig | None, turns: Sequence[float]):
    """Solve ``phi_E = arg(E_J - sum_l E_J,l exp(i (psi_l + phi_E)))``."""
    if config is None or not np.any(config.e_j_asq > 0):
        return 0.0, True, 1
    psi = 2.0 * np.pi * np.asarray(turns)
    c = np.sum(config.e_j_asq * np.exp(1j * psi))
    offset, last_step = 0.0, math.inf
    for it in range(1, FIXED_POINT_MAX_ITER + 1):
        total = config.e_j_coupling - np.exp(1j * offset) * c
        if abs(total) < DEGENERATE_FRACTION * config.e_j_coupling:
            raise DegenerateCouplingError("effective Josephson energy vanishes for this plan")
        new = float(np.angle(total))
        step = abs(new - offset) / (2.0 * np.pi)
        offset = new
        if step == 0.0 or (step < FIXED_POINT_TOL and step >= last_step):
            return offset, True, it
        if it > 10 and step > 2.0 * last_step:
            raise ConvergenceError(f"phase-offset iteration diverges (step {step:.3g} turns)")
        last_step = step
    if last_step < FIXED_POINT_TOL:
        return offset, True, FIXED_POINT_MAX_ITER
    raise ConvergenceError(f"phase-offset iteration stalled at step {last_step:.3g} turns")


def _build(turns, kinds, config, n) -> FluxPlan:
    offset, converged, iterations = _offset_fixed_point(config, turns)
    fluxes = _fluxes_from_turns(turns)
    fluxes[0] = (fluxes[0] + offset / (2.0 * np.pi)) % 1.0
    tags = tuple(FREE if k == FREE else TURN_TAGS[t] for k, t in zip(kinds, turns))
    targets = tuple(float(wrap_phase(2.0 * np.pi * t)) for t in turns)
    return FluxPlan(targets, tags, tuple(fluxes), float(offset), converged, iterations)


def _resolve_n(config, n):
    if isinstance(config, ChainConfig):
        if n is not None and n != config.n:
            raise ValidationError(f"n={n} does not match the config's {config.n} qubits")
        return config, config.n
    if n is None:
        raise ValidationError("either a ChainConfig or a qubit count is required")
    if n < 1:
        raise ValidationError("need at least one qubit")
    return None, int(n)


IDLE_PATTERNS = ("alternating", "uniform")


def _idle_turns(n: int, pattern: str):
    if pattern not in IDLE_PATTERNS:
        raise ValidationError(f"idle pattern must be one of {IDLE_PATTERNS}, got {pattern!r}")
    if pattern == "uniform":
        return [0.25] * n
    return [0.25 if q % 2 == 0 else 0.75 for q in range(n)]


def plan_idle(n: int, config: ChainConfig | None = None, pattern: str = "alternating") -> FluxPlan:
    """All qubits OFF.

    ``alternating`` gives fluxes ``[0.25, 0.5, 0.5, ...]`` and phases
    alternating between +pi/2 and -pi/2; ``uniform`` keeps every phase at
    +pi/2 with fluxes ``[0.25, 0, 0, ...]``.
    """
    config, n = _resolve_n(config, n)
    turns = _idle_turns(n, pattern)
    return _build(turns, ["OFF"] * n, config, n)


def plan_tags(
    kinds: Sequence[str],
    config: ChainConfig | None = None,
    *,
    reference: FluxPlan | None = None,
    free_phases: Sequence[float] | None = None,
) -> FluxPlan:
    """General planner: each entry of ``kinds`` is ``"ON"``, ``"OFF"`` or ``"free"``.

    Degenerate choices minimise the total circular flux change from
    ``reference`` (default: the alternating idle plan). Free qubits keep
    ``free_phases`` (radians, relative to the phase offset).
    """
    kinds = list(kinds)
    config, n = _resolve_n(config, len(kinds))
    for k in kinds:
        if k not in ("ON", "OFF", FREE):
            raise ValidationError(f"unknown qubit role {k!r}")
    ref = reference.fluxes if reference is not None else _fluxes_from_turns(_idle_turns(n, "alternating"))
    if len(ref) != n:
        raise ValidationError("reference plan has the wrong number of qubits")
    free = [0.0] * n if free_phases is None else [p / (2.0 * np.pi) for p in free_phases]
    turns = _choose_turns(kinds, ref, free)
    return _build(turns, kinds, config, n)


def _index(q: int, n: int) -> int:
    if not 0 <= q < n:
        raise ValidationError(f"qubit index {q} out of range for {n} qubits")
    return int(q)


def plan_pair(i: int, j: int, config: ChainConfig | int) -> FluxPlan:
    """Qubits ``i`` and ``j`` ON, all others OFF.

    ``config`` may be a bare qubit count when every ``E_J,l`` vanishes.
    """
    cfg, n = (None, int(config)) if isinstance(config, int) else _resolve_n(config, None)
    i, j = _index(i, n), _index(j, n)
    if i == j:
        raise ValidationError("a pair needs two different qubits")
    kinds = ["ON" if q in (i, j) else "OFF" for q in range(n)]
    return plan_tags(kinds, cfg)


VARIANTS = ("uniform", "alternating")


def plan_all_to_all(n: int, variant: str = "uniform", config: ChainConfig | None = None) -> FluxPlan:
    """Every qubit ON.

    ``uniform`` puts all phases at 0 so every J_ij has the same (negative)
    sign; ``alternating`` uses 0, pi, 0, ... so J_ij < 0 for even |i - j|
    and J_ij > 0 for odd |i - j|.
    """
    config, n = _resolve_n(config, n)
    if n < 2:
        raise ValidationError("all-to-all coupling needs at least two qubits")
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")
    turns = [0.0] * n if variant == "uniform" else [0.5 * (q % 2) for q in range(n)]
    return _build(turns, ["ON"] * n, config, n)


READOUT_MODES = ("off-target", "on-target")


def plan_readout(target: int, mode: str, n: int, config: ChainConfig | None = None) -> FluxPlan:
    """Readout configurations.

    ``off-target``: target OFF, all others ON (sequential readout).
    ``on-target``: target ON, all others OFF (selective readout).
    """
    config, n = _resolve_n(config, n)
    target = _index(target, n)
    if mode not in READOUT_MODES:
        raise ValidationError(f"mode must be one of {READOUT_MODES}, got {mode!r}")
    on = mode == "on-target"
    kinds = [("ON" if on else "OFF") if q == target else ("OFF" if on else "ON") for q in range(n)]
    return plan_tags(kinds, config)


# -- flux noise ----------------------------------------------------------------

CLASSES = ("on_on", "on_off", "off_off")


@dataclass(frozen=True)
class FluxNoiseStats:
    """|J_ij| per sample and pair, grouped by the ON/OFF roles of the pair."""

    on_on: np.ndarray
    on_off: np.ndarray
    off_off: np.ndarray
    couplings: np.ndarray  # signed J, shape (samples, N, N)
    pair_class: dict
    delta: float
    seed: int

    def summary(self) -> dict:
        out = {}
        for name in CLASSES:
            vals = getattr(self, name)
            out[name] = {
                "count": int(vals.size),
                "median_GHz": float(np.median(vals)) if vals.size else 0.0,
                "max_GHz": float(np.max(vals)) if vals.size else 0.0,
            }
        on_on = out["on_on"]["median_GHz"]
        for name in ("on_off", "off_off"):
            out[f"{name}_over_on_on"] = out[name]["median_GHz"] / on_on if on_on else float("nan")
        return out

    def rows(self):
        """CSV rows ``(sample, i, j, class, J_GHz)``; qubits 1-based."""
        s_count = self.couplings.shape[0]
        for s in range(s_count):
            for (i, j), cls in self.pair_class.items():
                yield s, i + 1, j + 1, cls, float(self.couplings[s, i, j])


def sample_offsets(seed: int, sample: int, n: int, delta: float) -> np.ndarray:
    """Uniform flux offsets for one Monte Carlo sample.

    Each sample has its own generator keyed by ``(seed, sample)``, so any
    subset of samples can be recomputed in any order.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(sample),)))
    return rng.uniform(-delta, delta, size=n)


def crosstalk_monte_carlo(
    config: ChainConfig, plan: FluxPlan, delta: float, samples: int, seed: int = 0
) -> FluxNoiseStats:
    """Couplings under independent uniform flux offsets in [-delta, delta]."""
    if delta < 0:
        raise ValidationError("delta must be >= 0")
    if samples < 1:
        raise ValidationError("need at least one sample")
    n = plan.n
    if config.n != n:
        raise ValidationError(f"plan is for {n} qubits, config has {config.n}")
    base = np.asarray(plan.fluxes, dtype=float)
    offsets = np.stack([sample_offsets(seed, k, n, delta) for k in range(samples)])
    j = kernels.coupling_matrices(
        config.e_so, config.e_j_asq, config.e_j_coupling, np.ascontiguousarray(base + offsets)
    )
    on = set(plan.on_qubits)
    pair_class = {}
    for a in range(n):
        for b in range(a + 1, n):
            k = (a in on) + (b in on)
            pair_class[(a, b)] = CLASSES[2 - k]
    groups = {c: [] for c in CLASSES}
    for (a, b), cls in pair_class.items():
        groups[cls].append(np.abs(j[:, a, b]))
    arrays = {c: (np.concatenate(v) if v else np.zeros(0)) for c, v in groups.items()}
    return FluxNoiseStats(
        arrays["on_on"], arrays["on_off"], arrays["off_off"], j, pair_class, float(delta), int(seed)
    )


def crosstalk_scaling(config, plan, deltas, samples, seed=0) -> dict:
    """Log-log slopes of the median on_off and off_off couplings versus delta."""
    deltas = np.asarray(deltas, dtype=float)
    med = {"on_off": [], "off_off": []}
    for d in deltas:
        stats = crosstalk_monte_carlo(config, plan, d, samples, seed)
        med["on_off"].append(np.median(stats.on_off))
        med["off_off"].append(np.median(stats.off_off))
    out = {"deltas": deltas.tolist()}
    for name, vals in med.items():
        out[f"{name}_medians"] = [float(v) for v in vals]
        out[f"{name}_slope"] = float(np.polyfit(np.log(deltas), np.log(vals), 1)[0])
    return out


# -- flux-bias lines -------------------------------------------------------------


@dataclass(frozen=True)
class BiasModel:
    """Linear flux response: ``fluxes = mutual @ currents + offsets``.

    ``mutual`` is in flux quanta per microampere, currents in microamperes.
    """

    mutual: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.mutual, dtype=float))
        off = np.asarray(self.offsets, dtype=float).ravel()
        if m.shape[0] != m.shape[1] or off.size != m.shape[0]:
            raise ValidationError("mutual must be square with one offset per loop")
        if not np.all(np.isfinite(m)) or np.linalg.cond(m) > 1e12:
            raise ValidationError("mutual-inductance matrix is singular")
        m.setflags(write=False)
        off.setflags(write=False)
        object.__setattr__(self, "mutual", m)
        object.__setattr__(self, "offsets", off)

    @classmethod
    def diagonal(cls, n, slope, offsets=None, crosstalk=0.0):
        m = np.full((n, n), crosstalk * slope) + np.eye(n) * slope * (1.0 - crosstalk)
        return cls(m, np.zeros(n) if offsets is None else offsets)

    @property
    def n(self) -> int:
        return self.offsets.size

    @property
    def dominance_ratio(self) -> float:
        """Smallest ratio of |diagonal| to the summed |off-diagonal| per row."""
        diag = np.abs(np.diag(self.mutual))
        off = np.sum(np.abs(self.mutual), axis=1) - diag
        with np.errstate(divide="ignore"):
            return float(np.min(np.where(off > 0, diag / off, np.inf)))

    def fluxes(self, currents) -> np.ndarray:
        return self.mutual @ np.asarray(currents, dtype=float) + self.offsets

    def currents(self, fluxes) -> np.ndarray:
        return np.linalg.solve(self.mutual, np.asarray(fluxes, dtype=float) - self.offsets)


def currents_for_plan(model: BiasModel, plan: FluxPlan) -> np.ndarray:
    """Bias currents (uA) realising the plan's fluxes."""
    if model.n != plan.n:
        raise ValidationError(f"bias model has {model.n} lines, plan has {plan.n} qubits")
    return model.currents(plan.fluxes)
