"""Sequential tune-up of an ASQ chain against a simulated device.

The virtual device hides its circuit parameters and flux-bias model and
only answers two kinds of noisy measurement: the lowest readout-circuit
transition, and the dressed resonator frequency for every spin state of the
qubits that are not pinched off. Calibration follows the physical recipe:

1. pinch every qubit and read ``E_J`` off the bare readout circuit;
2. open one qubit at a time, sweep its bias current, and fit the periodic
   resonator response to get the current-to-phase map and ``E_J,i``,
   ``E_SO,i``;
3. repeat the flux mapping with every other loop at its new setpoint.

Only transmon readout is supported for step 2: the transmon spectrum depends
on the junction network solely through ``|E~(s)|``, which makes the
per-spin inversion exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, least_squares

from .errors import FitError, ValidationError
from .planner import BiasModel
from .readout import (
    TRANSMON,
    ReadoutCircuit,
    ResonatorSpec,
    circuit_levels,
    dressed_resonator_freq,
)
from .spin import AsqParams, ChainConfig

POINTS_PER_PERIOD = 41
SWEEP_PERIODS = 1.25


@dataclass
class VirtualDevice:
    """Simulated chip. ``truth`` and ``bias`` are hidden from the calibration code.

    ``design_slope`` is the nominal flux per current (Phi_0/uA) known from
    the layout; it only sets the current sweep range. ``field_shift`` is
    added to the bias offsets by :meth:`change_field`, standing in for the
    change of the flux mapping when the operating magnetic field is applied.
    """

    truth: ChainConfig
    bias: BiasModel
    circuit: ReadoutCircuit
    resonator: ResonatorSpec
    noise: float = 0.0
    seed: int = 0
    design_slope: float = 0.01
    field_shift: np.ndarray | None = None
    pinched: list = field(default_factory=list)
    _calls: int = 0

    def __post_init__(self):
        if self.noise < 0:
            raise ValidationError("measurement noise must be >= 0")
        if self.bias.n != self.truth.n:
            raise ValidationError("bias model and chain disagree on the number of qubits")
        if not self.pinched:
            self.pinched = [False] * self.truth.n

    @property
    def n(self) -> int:
        return self.truth.n

    def pinch(self, *qubits):
        for q in qubits:
            self.pinched[q] = True

    def open(self, *qubits):
        for q in qubits:
            self.pinched[q] = False

    def pinch_all_except(self, *qubits):
        self.pinched = [q not in qubits for q in range(self.n)]

    def change_field(self):
        if self.field_shift is not None:
            self.bias = BiasModel(self.bias.mutual, self.bias.offsets + self.field_shift)

    def clone(self, seed: int) -> VirtualDevice:
        return replace(self, seed=seed, pinched=list(self.pinched), _calls=0)

    # hidden-state helpers (the calibration code must not call these)
    def _config(self, currents) -> ChainConfig:
        asqs = [a.pinched() if p else a for a, p in zip(self.truth.asqs, self.pinched)]
        return ChainConfig(self.truth.e_j_coupling, asqs, tuple(self.bias.fluxes(currents)))

    def _noise(self, size):
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self._calls,)))
        self._calls += 1
        return rng.normal(0.0, self.noise, size) if self.noise else np.zeros(size)

    def open_qubits(self) -> list[int]:
        return [q for q in range(self.n) if not self.pinched[q]]

    def measure_circuit(self, currents=None) -> float:
        """Noisy lowest transition of the readout circuit (GHz)."""
        currents = np.zeros(self.n) if currents is None else currents
        cfg = self._config(currents)
        spins = [1] * self.n
        f01 = circuit_levels(self.circuit, cfg, spins, n_levels=2).transitions[0]
        return float(f01 + self._noise(1)[0])

    def measure_resonator(self, currents) -> np.ndarray:
        """Noisy dressed resonator frequencies, one per spin state of the open qubits.

        Open qubits are enumerated in basis order (first open qubit most
        significant, spin up first). With every qubit pinched a single
        value is returned.
        """
        cfg = self._config(currents)
        opened = self.open_qubits()
        freqs = []
        for row in range(1 << len(opened)):
            spins = [1] * self.n
            for k, q in enumerate(opened):
                if (row >> (len(opened) - 1 - k)) & 1:
                    spins[q] = -1
            freqs.append(dressed_resonator_freq(self.circuit, cfg, spins, self.resonator, warn=False))
        return np.asarray(freqs) + self._noise(len(freqs))


def measure_resonator(device: VirtualDevice, currents) -> np.ndarray:
    return device.measure_resonator(np.asarray(currents, dtype=float))


# -- step 1: coupling junction ---------------------------------------------------------


def _bare_config(e_j: float) -> ChainConfig:
    return ChainConfig(e_j, (AsqParams(),))


def estimate_coupling_ej(device: VirtualDevice, bracket=(0.05, 2000.0), grid=80) -> float:
    """Invert the bare readout-circuit frequency for ``E_J``.

    ``E_c`` (and ``E_L``) are known by design. A log-spaced grid locates a
    sign change of the model mismatch, which is then polished by brentq.
    """
    if not all(device.pinched):
        raise ValidationError("estimate_coupling_ej needs every qubit pinched off")
    measured = device.measure_circuit()
    circuit = device.circuit

    def mismatch(e_j):
        return circuit_levels(circuit, _bare_config(e_j), [1], n_levels=2).transitions[0] - measured

    xs = np.geomspace(*bracket, grid)
    vals = np.array([mismatch(x) for x in xs])
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
    if not flips.size:
        raise FitError(f"measured frequency {measured:.6f} GHz is outside the model range")
    i = int(flips[0])
    return float(brentq(mismatch, xs[i], xs[i + 1], xtol=1e-13, rtol=1e-14))


# -- step 2: per-qubit flux map ------------------------------------------------------------


@dataclass(frozen=True)
class QubitCalibration:
    """Fitted response of one qubit.

    The cumulative phase of the qubit is ``2 pi (slope * I + offset)`` with
    the current in uA and every other loop at its current setpoint.
    """

    index: int
    e_j: float
    e_so: float
    slope: float
    offset: float
    setpoints: tuple[float, float]
    flags: tuple[str, ...] = ()
    residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "qubit": self.index + 1,
            "e_j_GHz": self.e_j,
            "e_so_GHz": self.e_so,
            "slope_phi0_per_uA": self.slope,
            "offset_phi0": self.offset,
            "setpoint_phi0_uA": self.setpoints[0],
            "setpoint_phi1_uA": self.setpoints[1],
            "flags": list(self.flags),
        }


class _Inverter:
    """Maps a dressed resonator frequency back to ``|E~|^2`` via the exact model."""

    def __init__(self, circuit: ReadoutCircuit, resonator: ResonatorSpec, e_j: float):
        if circuit.kind != TRANSMON:
            raise ValidationError("per-qubit calibration is implemented for transmon readout")
        self.circuit, self.resonator = circuit, resonator
        # stay on the dispersive side: the bare f01 must sit 3 g above the resonator
        target = resonator.f_bare + 3.0 * resonator.g

        def f01(mag):
            return circuit_levels(circuit, _bare_config(mag), [1], n_levels=2).transitions[0] - target

        if f01(e_j) <= 0:
            raise ValidationError("transmon f01 is not above the resonator; readout is not dispersive")
        self.lo = brentq(f01, 1e-3 * e_j, e_j, xtol=1e-12)
        self.hi = 10.0 * e_j
        self.f_lo, self.f_hi = self.model(self.lo), self.model(self.hi)

    def model(self, mag):
        return dressed_resonator_freq(self.circuit, _bare_config(mag), [1], self.resonator, warn=False)

    def local_slope(self, mag: float) -> float:
        """|d f / d(|E~|^2)| at ``mag``."""
        h = 1e-4 * mag
        return abs(self.model(mag + h) - self.model(mag - h)) / (4.0 * mag * h)

    def __call__(self, freq: float) -> float:
        lo, hi = sorted((self.f_lo, self.f_hi))
        if not lo < freq < hi:
            raise FitError(f"resonator reading {freq:.6f} GHz is outside the invertible range")
        return brentq(lambda m: self.model(m) - freq, self.lo, self.hi, xtol=1e-13, rtol=1e-14) ** 2


def _initial_frequency(currents, series):
    step = currents[1] - currents[0]
    pad = 16 * currents.size
    power = 0.0
    for y in series:
        y = y - y.mean()
        if np.ptp(y) > 0:
            power = power + np.abs(np.fft.rfft(y * np.hanning(y.size), pad)) ** 2
    if np.isscalar(power):
        return None
    freqs = np.fft.rfftfreq(pad, step)
    return float(freqs[1 + int(np.argmax(power[1:]))])


def _fit_response(currents, mean, half_diff, e_j, sigma):
    """Least-squares fit of the two-series periodic model.

    ``sigma`` is the per-point noise of ``mean`` and ``half_diff`` (in
    GHz^2). A harmonic is considered present when its amplitude exceeds
    four standard errors of a single-frequency fit.
    """
    floor = max(1e-9 * e_j**2, 4.0 * sigma * math.sqrt(2.0 / currents.size))
    a0 = _initial_frequency(currents, [half_diff, mean])
    if not a0:
        raise FitError("could not locate the flux period")

    def linear(a):
        x = 2.0 * np.pi * a * currents
        basis = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
        cm, *_ = np.linalg.lstsq(basis, mean, rcond=None)
        cd, *_ = np.linalg.lstsq(basis[:, 1:], half_diff, rcond=None)
        return cm, cd

    # phase b from the sin-type spin difference where available, otherwise from the mean
    cm, cd = linear(a0)
    amp_mean, amp_diff = math.hypot(cm[1], cm[2]), math.hypot(*cd)
    if max(amp_mean, amp_diff) < floor:
        raise FitError("no measurable modulation of the resonator with this bias current")
    if amp_diff >= floor:
        b0 = math.atan2(cd[0], cd[1]) / (2.0 * np.pi)
    else:
        b0 = math.atan2(cm[2], -cm[1]) / (2.0 * np.pi)
    s0 = amp_diff / (2.0 * e_j)
    j0 = amp_mean / (2.0 * e_j)

    def resid(p):
        c, ej_i, eso, a, b = p
        th = 2.0 * np.pi * (a * currents + b)
        return np.concatenate([
            mean - (c - 2.0 * e_j * ej_i * np.cos(th)),
            half_diff - 2.0 * e_j * eso * np.sin(th),
        ])

    sol = least_squares(resid, [cm[0], j0, s0, a0, b0], x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    c, ej_i, eso, a, b = sol.x
    # the model is invariant under (S, a, b) -> (-S, -a, -b) and
    # (A, S, b) -> (-A, -S, b + 1/2); pick the branch with A >= 0 and S >= 0
    if ej_i < 0:
        ej_i, eso, b = -ej_i, -eso, b + 0.5
    if eso < 0:
        eso, a, b = -eso, -a, -b
    return ej_i, eso, a, b, float(np.sqrt(np.mean(sol.fun**2))), amp_diff >= floor


def calibrate_qubit(
    device: VirtualDevice,
    i: int,
    e_j: float,
    setpoints: dict | None = None,
) -> QubitCalibration:
    """Sweep the bias current of qubit ``i`` and fit its response.

    ``setpoints`` maps already-calibrated qubits to their Phi=0 currents;
    all other lines stay at zero current. Every qubit except ``i`` must be
    pinched.
    """
    if not 0 <= i < device.n:
        raise ValidationError(f"qubit {i} out of range")
    if device.open_qubits() != [i]:
        raise ValidationError(f"calibrating qubit {i} needs every other qubit pinched off")
    setpoints = dict(setpoints or {})
    span = SWEEP_PERIODS / abs(device.design_slope)
    points = int(math.ceil(POINTS_PER_PERIOD * SWEEP_PERIODS))
    currents = np.linspace(-0.5 * span, 0.5 * span, points)
    inv = _Inverter(device.circuit, device.resonator, e_j)

    base = np.zeros(device.n)
    for q, cur in setpoints.items():
        base[q] = cur
    mags = np.empty((points, 2))
    for k, cur in enumerate(currents):
        c = base.copy()
        c[i] = cur
        f_up, f_down = device.measure_resonator(c)
        mags[k] = inv(f_up), inv(f_down)
    mean = mags.mean(axis=1)
    half_diff = 0.5 * (mags[:, 0] - mags[:, 1])
    # readout noise propagated through the local slope of the inversion
    sigma = device.noise / math.sqrt(2.0) / inv.local_slope(e_j)
    ej_i, eso, a, b, rms, split = _fit_response(currents, mean, half_diff, e_j, sigma)
    flags = []
    if not split:
        eso = 0.0
        flags.append("no-spin-splitting")
        # the mean response is even in flux, so its sign comes from the layout
        if a * device.design_slope < 0:
            a, b = -a, -b
    # Phi = 0 and Phi = Phi_0 setpoints: the integer turn closest to zero current and the next one
    n0 = int(np.round(-b))
    i0, n_best = min((((n - b) / a, n) for n in (n0 - 1, n0, n0 + 1)), key=lambda t: abs(t[0]))
    i1 = (n_best + 1 - b) / a
    return QubitCalibration(
        i, float(ej_i), float(eso), float(a), float(b), (float(i0), float(i1)), tuple(flags), rms
    )


# -- full protocol ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Calibration:
    e_j: float
    qubits: tuple[QubitCalibration, ...]
    rounds: int = 1

    @property
    def zero_currents(self) -> np.ndarray:
        return np.array([q.setpoints[0] for q in self.qubits])

    def to_dict(self) -> dict:
        return {
            "e_j_GHz": self.e_j,
            "rounds": self.rounds,
            "qubits": [q.to_dict() for q in self.qubits],
        }


def run_tuneup(device: VirtualDevice, *, remap_rounds: int = 1) -> Calibration:
    """E_J, then each qubit in order, then ``remap_rounds`` flux re-mapping passes.

    Before the re-mapping passes the device's field shift (if any) is
    applied. A re-mapping pass recalibrates each loop with every other loop
    at its latest Phi=0 setpoint, which removes most of the bias crosstalk
    left by the sequential first pass.
    """
    device.pinch(*range(device.n))
    e_j = estimate_coupling_ej(device)
    cals: dict[int, QubitCalibration] = {}
    for i in range(device.n):
        device.pinch_all_except(i)
        cals[i] = calibrate_qubit(device, i, e_j, {q: c.setpoints[0] for q, c in cals.items()})
    if remap_rounds:
        device.change_field()
    for _ in range(remap_rounds):
        for i in range(device.n):
            device.pinch_all_except(i)
            others = {q: c.setpoints[0] for q, c in cals.items() if q != i}
            new = calibrate_qubit(device, i, e_j, others)
            # parameters from the first pass stay; only the flux map is updated
            old = cals[i]
            cals[i] = replace(new, e_j=old.e_j, e_so=old.e_so, flags=old.flags)
    device.pinch(*range(device.n))
    return Calibration(e_j, tuple(cals[i] for i in range(device.n)), 1 + remap_rounds)


def tuneup_report(device: VirtualDevice, cal: Calibration) -> list[dict]:
    """Truth-versus-estimate rows (reads the hidden state; for validation only)."""
    rows = [dict(quantity="E_J", qubit=0, truth=device.truth.e_j_coupling, estimate=cal.e_j)]
    fluxes = device.bias.fluxes(cal.zero_currents)
    phases = np.cumsum(fluxes)
    for q, c in enumerate(cal.qubits):
        a = device.truth.asqs[q]
        true_slope = float(np.sum(device.bias.mutual[: q + 1, q]))
        rows += [
            dict(quantity="E_J_i", qubit=q + 1, truth=a.e_j, estimate=c.e_j),
            dict(quantity="E_SO_i", qubit=q + 1, truth=a.e_so, estimate=c.e_so),
            dict(quantity="slope", qubit=q + 1, truth=true_slope, estimate=c.slope),
            dict(quantity="phase_at_setpoint", qubit=q + 1, truth=0.0,
                 estimate=float((phases[q] + 0.5) % 1.0 - 0.5)),
        ]
    return rows
