"""Circuit-QED readout of ASQ spins through a transmon or fluxonium.

The ASQs sit in parallel with the coupling junction, so the readout circuit
sees the spin-conditioned scalar potential

    V_s(phi) = E_J (1 - cos phi)
               + sum_l [E_J,l cos(phi + t_l) - s_l E_SO,l sin(phi + t_l)].

A transmon adds ``4 E_c (n - n_g)^2``; a fluxonium adds ``4 E_c n^2 +
E_L (phi - phi_ext)^2 / 2``. The lowest circuit eigenstates are coupled to a
resonator by ``g n (a + a^dagger)`` and the dressed one-photon transition of
the resonator-like branch is the readout frequency.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .coupling import effective_total_ej
from .errors import (
    BranchIdentificationError,
    ConvergenceError,
    DegeneracyError,
    NearResonanceWarning,
    ValidationError,
)
from .spin import ChainConfig

TRANSMON, FLUXONIUM = "transmon", "fluxonium"
DEFAULT_BASIS = {TRANSMON: 41, FLUXONIUM: 120}
DEFAULT_CIRCUIT_STATES = 8
DEFAULT_LEVELS = 10
CONVERGENCE_GHZ = 1e-6
BRANCH_OVERLAP_MIN = 0.5
DETUNING_WARN = 5.0


@dataclass(frozen=True)
class ReadoutCircuit:
    """Transmon or fluxonium shunt around the coupling junction.

    ``loop_flux`` is the fluxonium loop phase in radians; ``n_g`` the
    transmon offset charge in Cooper pairs.
    """

    kind: str
    e_c: float
    e_l: float | None = None
    loop_flux: float = 0.0
    n_g: float = 0.0
    basis_size: int | None = None

    def __post_init__(self):
        if self.kind not in DEFAULT_BASIS:
            raise ValidationError(f"circuit kind must be 'transmon' or 'fluxonium', got {self.kind!r}")
        if not self.e_c > 0:
            raise ValidationError("e_c must be > 0")
        if self.kind == FLUXONIUM and not (self.e_l is not None and self.e_l > 0):
            raise ValidationError("a fluxonium needs e_l > 0")
        size = DEFAULT_BASIS[self.kind] if self.basis_size is None else int(self.basis_size)
        if size < 20:
            raise ValidationError("basis_size must be >= 20")
        if self.kind == TRANSMON and size % 2 == 0:
            size += 1  # symmetric charge window
        object.__setattr__(self, "basis_size", size)

    def with_loop_flux(self, phi_ext: float) -> ReadoutCircuit:
        return replace(self, loop_flux=float(phi_ext))


@dataclass(frozen=True)
class ResonatorSpec:
    f_bare: float
    g: float
    levels: int = 6

    def __post_init__(self):
        if not self.f_bare > 0:
            raise ValidationError("f_bare must be > 0")
        if self.g < 0:
            raise ValidationError("g must be >= 0")
        if self.levels < 3:
            raise ValidationError("resonator needs at least 3 levels")


@dataclass(frozen=True)
class SpinBranchSpectrum:
    spins: tuple[int, ...]
    levels: np.ndarray
    transitions: np.ndarray
    convergence_delta: float | None = None


def _spins(spins, n) -> np.ndarray:
    s = np.asarray(spins if spins is not None else (1,) * n)
    if s.shape != (n,) or not np.all(np.isin(s, (-1, 1))):
        raise ValidationError(f"spin configuration must be {n} entries of +1/-1")
    return s.astype(float)


def _require_aligned(config: ChainConfig):
    if not config.aligned:
        raise ValidationError("the scalar readout potential needs Zeeman fields along the spin axis")


def josephson_potential(config: ChainConfig, spins, phi):
    """Spin-conditioned Josephson potential of the junction network (GHz)."""
    _require_aligned(config)
    s = _spins(spins, config.n)
    phi = np.asarray(phi, dtype=float)
    arg = phi[..., None] + config.phases()
    return config.e_j_coupling * (1.0 - np.cos(phi)) + np.sum(
        config.e_j_asq * np.cos(arg) - s * config.e_so * np.sin(arg), axis=-1
    )


# -- transmon -------------------------------------------------------------------


def transmon_hamiltonian(circuit: ReadoutCircuit, config: ChainConfig, spins) -> np.ndarray:
    """Dense charge-basis matrix, ``n`` running from ``-(D-1)/2`` to ``(D-1)/2``.

    ``cos(phi + t)`` and ``sin(phi + t)`` become nearest-neighbour hoppings
    ``e^{+-i t}/2`` and ``+-e^{+-i t}/(2i)``.
    """
    _require_aligned(config)
    s = _spins(spins, config.n)
    d = circuit.basis_size
    n = np.arange(d) - (d - 1) // 2
    rot = np.exp(1j * config.phases())
    hop = -0.5 * config.e_j_coupling + np.sum(
        0.5 * config.e_j_asq * rot - s * config.e_so * rot / 2j
    )
    h = np.diag(4.0 * circuit.e_c * (n - circuit.n_g) ** 2 + config.e_j_coupling).astype(complex)
    idx = np.arange(d - 1)
    h[idx + 1, idx] = hop
    h[idx, idx + 1] = np.conj(hop)
    return h


def _transmon_eig(e_c, n_g, e_j_total_abs, d, k, e_j):
    n = np.arange(d) - (d - 1) // 2
    diag = 4.0 * e_c * (n - n_g) ** 2 + e_j
    # a uniform complex hopping is removed by the gauge |n> -> e^{i n a}|n>,
    # which leaves the (diagonal) charge operator untouched
    off = np.full(d - 1, -0.5 * e_j_total_abs)
    w, v = sla.eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1))
    return w, v, n


def _transmon_solve(circuit, config, spins, k):
    _require_aligned(config)
    s = _spins(spins, config.n)
    mag = effective_total_ej(config, s).magnitude
    return _transmon_eig(circuit.e_c, circuit.n_g, mag, circuit.basis_size, k, config.e_j_coupling)


# -- fluxonium ------------------------------------------------------------------


@lru_cache(maxsize=32)
def _oscillator(m: int, length: float):
    """Truncated phase and charge matrices plus the phase eigenbasis."""
    b = np.diag(np.sqrt(np.arange(1, m)), 1)
    x = length * (b + b.T)
    p = 1j * (b.T - b) / (2.0 * length)
    lam, u = np.linalg.eigh(x)
    for arr in (x, p, lam, u):
        arr.setflags(write=False)
    return x, p, lam, u


def fluxonium_hamiltonian(circuit: ReadoutCircuit, config: ChainConfig, spins) -> np.ndarray:
    """Real symmetric matrix in the oscillator basis of ``4 E_c n^2 + E_L phi^2 / 2``.

    The quadratic part is exact; the Josephson potential is applied as a
    discrete-variable representation, ``U diag(V(lambda)) U^T`` with
    ``lambda, U`` the eigensystem of the truncated phase operator.
    """
    _require_aligned(config)
    s = _spins(spins, config.n)
    m = circuit.basis_size
    length = (2.0 * circuit.e_c / circuit.e_l) ** 0.25
    x, _, lam, u = _oscillator(m, length)
    omega = math.sqrt(8.0 * circuit.e_c * circuit.e_l)
    phi_ext = circuit.loop_flux
    h = (u * josephson_potential(config, s, lam)) @ u.T
    h[np.diag_indices(m)] += omega * (np.arange(m) + 0.5) + 0.5 * circuit.e_l * phi_ext**2
    h -= circuit.e_l * phi_ext * x
    return 0.5 * (h + h.T)


def _fluxonium_solve(circuit, config, spins, k):
    h = fluxonium_hamiltonian(circuit, config, spins)
    w, v = sla.eigh(h, subset_by_index=(0, k - 1))
    return w, v


# -- shared spectrum API ----------------------------------------------------------


def _levels(circuit, config, spins, k):
    if circuit.kind == TRANSMON:
        return _transmon_solve(circuit, config, spins, k)[0]
    return _fluxonium_solve(circuit, config, spins, k)[0]


def _spectrum(circuit, config, spins, k, check):
    k = min(k, circuit.basis_size)
    w = _levels(circuit, config, spins, k)
    delta = None
    if check:
        bigger = replace(circuit, basis_size=2 * circuit.basis_size)
        w2 = _levels(bigger, config, spins, k)
        delta = float(abs((w2[1] - w2[0]) - (w[1] - w[0])))
        if delta > CONVERGENCE_GHZ:
            raise ConvergenceError(
                f"f01 moves by {delta * 1e6:.1f} kHz when the basis is doubled "
                f"from {circuit.basis_size}"
            )
    s = tuple(int(x) for x in _spins(spins, config.n))
    return SpinBranchSpectrum(s, w, w[1:] - w[0], delta)


def transmon_levels(circuit, config, spins=None, *, n_levels=DEFAULT_LEVELS, check_convergence=False):
    """Lowest transmon eigenenergies for one spin configuration (GHz)."""
    if circuit.kind != TRANSMON:
        raise ValidationError("transmon_levels needs a transmon circuit")
    return _spectrum(circuit, config, spins, n_levels, check_convergence)


def fluxonium_levels(circuit, config, spins=None, *, n_levels=DEFAULT_LEVELS, check_convergence=False):
    """Lowest fluxonium eigenenergies for one spin configuration (GHz)."""
    if circuit.kind != FLUXONIUM:
        raise ValidationError("fluxonium_levels needs a fluxonium circuit")
    return _spectrum(circuit, config, spins, n_levels, check_convergence)


def circuit_levels(circuit, config, spins=None, **kw) -> SpinBranchSpectrum:
    fn = transmon_levels if circuit.kind == TRANSMON else fluxonium_levels
    return fn(circuit, config, spins, **kw)


def transmon_levels_phase_grid(circuit, config, spins=None, points=2048, n_levels=4) -> np.ndarray:
    """Independent check: transmon levels on a uniform periodic phase grid.

    Sixth-order central differences for the kinetic term; the offset charge
    enters as twisted boundary phases ``exp(-+ 2 pi i n_g)`` on the wrap-around
    entries (the gauge ``psi -> exp(-i n_g phi) psi``).
    """
    _require_aligned(config)
    h = 2.0 * np.pi / points
    phi = -np.pi + h * np.arange(points)
    stencil = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90]) / h**2
    twist = np.exp(-2j * np.pi * circuit.n_g)
    mat = np.zeros((points, points), dtype=complex)
    rows = np.arange(points)
    for offset, c in zip(range(-3, 4), stencil):
        cols = rows + offset
        phase = np.where(cols >= points, twist, np.where(cols < 0, np.conj(twist), 1.0))
        mat[rows, cols % points] += -4.0 * circuit.e_c * c * phase
    mat[rows, rows] += josephson_potential(config, spins, phi)
    if circuit.n_g % 1.0 == 0.0:
        return sla.eigh(mat.real, subset_by_index=(0, n_levels - 1), eigvals_only=True)
    return sla.eigh(mat, subset_by_index=(0, n_levels - 1), eigvals_only=True)


# -- resonator dressing -----------------------------------------------------------


@dataclass(frozen=True)
class DressedResult:
    frequency: float
    overlap: float
    min_detuning: float


def _circuit_states(circuit, config, spins, k):
    """Lowest ``k`` energies and the charge operator in their eigenbasis."""
    if circuit.kind == TRANSMON:
        w, v, n = _transmon_solve(circuit, config, spins, k)
        n_op = (v.T * n) @ v
    else:
        w, v = _fluxonium_solve(circuit, config, spins, k)
        length = (2.0 * circuit.e_c / circuit.e_l) ** 0.25
        p = _oscillator(circuit.basis_size, length)[1]
        n_op = v.T @ p @ v
    return w - w[0], n_op


def _dressed(w, n_op, resonator: ResonatorSpec):
    k, lv = w.size, resonator.levels
    a = np.diag(np.sqrt(np.arange(1, lv)), 1)
    h = (
        np.kron(np.diag(w), np.eye(lv))
        + np.kron(np.eye(k), resonator.f_bare * np.diag(np.arange(lv)))
        + resonator.g * np.kron(n_op, a + a.T)
    )
    e, vec = np.linalg.eigh(h)
    weights = np.abs(vec) ** 2
    i0 = int(np.argmax(weights[0]))
    i1 = int(np.argmax(weights[1]))
    return e, weights, i0, i1


def dressed_resonator(circuit, config, spins, resonator, *, circuit_states=DEFAULT_CIRCUIT_STATES, warn=True):
    """Dressed resonator frequency with branch diagnostics."""
    if circuit_states < 5:
        raise ValidationError("keep at least 5 circuit states")
    if resonator.g == 0:
        return DressedResult(float(resonator.f_bare), 1.0, math.inf)
    w, n_op = _circuit_states(circuit, config, spins, circuit_states)
    detuning = float(np.min(np.abs(w[1:] - resonator.f_bare)))
    if warn and detuning < DETUNING_WARN * resonator.g:
        warnings.warn(
            f"resonator within {detuning * 1e3:.1f} MHz of a circuit transition (< 5 g)",
            NearResonanceWarning,
            stacklevel=2,
        )
    e, weights, i0, i1 = _dressed(w, n_op, resonator)
    overlap = float(weights[1, i1])
    if overlap < BRANCH_OVERLAP_MIN or i0 == i1:
        raise BranchIdentificationError(
            f"resonator branch has only {overlap:.2f} overlap with the bare one-photon state"
        )
    return DressedResult(float(e[i1] - e[i0]), overlap, detuning)


def dressed_resonator_freq(circuit, config, spins, resonator, **kw) -> float:
    """Frequency of the dressed 0 -> 1 photon transition (GHz)."""
    return dressed_resonator(circuit, config, spins, resonator, **kw).frequency


def dispersive_sweep(circuit, config, resonator, qubit=0, fluxes=None, spins_other=None):
    """Sweep one ASQ loop flux and record ``f_r`` for both of its spin states.

    Returns ``(fluxes, f_up, f_down)``; other qubits keep their spins from
    ``spins_other`` (default all up).
    """
    fluxes = np.linspace(0.0, 1.0, 101) if fluxes is None else np.asarray(fluxes, dtype=float)
    base = list(spins_other) if spins_other is not None else [1] * config.n
    up, down = [], []
    for f in fluxes:
        fl = list(config.fluxes)
        fl[qubit] = f
        cfg = config.with_fluxes(fl)
        for val, out in ((1, up), (-1, down)):
            s = list(base)
            s[qubit] = val
            out.append(dressed_resonator_freq(circuit, cfg, s, resonator, warn=False))
    return fluxes, np.array(up), np.array(down)


# -- avoided-crossing readout --------------------------------------------------------


def _phase_config(config: ChainConfig, target: int, turns: float) -> ChainConfig:
    """Set the cumulative phase of ``target`` to ``turns`` (of 2 pi), others unchanged."""
    phases = np.cumsum(config.fluxes)
    phases[target] = turns
    return config.with_fluxes(np.diff(np.concatenate(([0.0], phases))) % 1.0)


def _sign_change_roots(func, a, b, fa, fb, depth=2, parts=8, tol=1e-9):
    """Zeros of ``func`` in [a, b], skipping sign changes caused by poles.

    Brackets are subdivided ``depth`` times before root polishing; a
    candidate is kept only if ``|func|`` at it is below ``tol``.
    """
    if not (np.isfinite(fa) and np.isfinite(fb)):
        return []
    if fa == 0.0:
        return [float(a)]
    if fa * fb > 0:
        return []
    if depth == 0:
        try:
            root = brentq(func, a, b, xtol=1e-13)
        except ValueError:
            return []
        return [float(root)] if abs(func(root)) < tol else []
    xs = np.linspace(a, b, parts + 1)
    fs = [fa] + [func(x) for x in xs[1:-1]] + [fb]
    out = []
    for i in range(parts):
        out += _sign_change_roots(func, xs[i], xs[i + 1], fs[i], fs[i + 1], depth - 1, parts, tol)
    return out


@dataclass(frozen=True)
class CrossingScan:
    """Fluxonium loop-flux scan (``loop_fluxes`` in flux quanta).

    ``table`` rows are ``(loop_flux, setpoint, spin, branch, f_GHz)`` where
    ``setpoint`` is ON or OFF for the target and ``branch`` one of
    ``resonator``, ``lower``, ``upper`` (the two dressed states carrying
    most of the bare one-photon weight), ``f02``.
    """

    loop_fluxes: np.ndarray
    resonator: dict
    lower: dict
    upper: dict
    f02: dict
    overlap: dict
    crossing_flux: float | None
    crossing_gap: float
    setpoint: float | None
    setpoint_contrast_on: float
    setpoint_contrast_off: float

    @property
    def has_anticrossing(self) -> bool:
        return self.crossing_flux is not None and self.crossing_gap > 1e-4

    def rows(self):
        for key in sorted(self.resonator):
            setpoint, spin = key
            for i, flux in enumerate(self.loop_fluxes):
                for name in ("resonator", "lower", "upper", "f02"):
                    yield float(flux), setpoint, spin, name, float(getattr(self, name)[key][i])


def _point(circuit, cfg, spins, resonator, k):
    w, n_op = _circuit_states(circuit, cfg, spins, k)
    if resonator.g == 0:
        return dict(res=resonator.f_bare, ov=1.0, lo=min(w[2], resonator.f_bare),
                    hi=max(w[2], resonator.f_bare), f02=w[2])
    e, weights, i0, i1 = _dressed(w, n_op, resonator)
    order = np.argsort(weights[1])[::-1][:2]
    f = np.sort(e[order] - e[i0])
    ov = float(weights[1, i1])
    res = float(e[i1] - e[i0]) if ov >= BRANCH_OVERLAP_MIN else math.nan
    return dict(res=res, ov=ov, lo=f[0], hi=f[1], f02=w[2])


def avoided_crossing_scan(
    circuit: ReadoutCircuit,
    config: ChainConfig,
    resonator: ResonatorSpec,
    loop_fluxes: Sequence[float],
    *,
    target: int = 0,
    spins_other=None,
    min_overlap: float = 0.9,
    circuit_states: int = DEFAULT_CIRCUIT_STATES,
) -> CrossingScan:
    """Scan the fluxonium loop flux with the target qubit ON and OFF.

    Also locates the resonance of the bare second transition with the
    resonator (and the dressed gap there) and suggests a setpoint: a zero of
    the OFF spin contrast where the resonator branch keeps at least
    ``min_overlap`` bare weight, choosing the zero with the largest ON
    contrast.
    """
    if circuit.kind != FLUXONIUM:
        raise ValidationError("avoided_crossing_scan needs a fluxonium circuit")
    loop_fluxes = np.asarray(loop_fluxes, dtype=float)
    if loop_fluxes.size < 2:
        raise ValidationError("need at least two loop-flux points")
    base = list(spins_other) if spins_other is not None else [1] * config.n
    configs = {"ON": _phase_config(config, target, 0.0), "OFF": _phase_config(config, target, 0.25)}

    def spins_for(s):
        out = list(base)
        out[target] = s
        return out

    def evaluate(flux, setpoint, s):
        c = circuit.with_loop_flux(2.0 * np.pi * flux)
        return _point(c, configs[setpoint], spins_for(s), resonator, circuit_states)

    data = {}
    for setpoint in ("ON", "OFF"):
        for s in (1, -1):
            pts = [evaluate(f, setpoint, s) for f in loop_fluxes]
            data[(setpoint, s)] = {k: np.array([p[k] for p in pts]) for k in pts[0]}

    # bare resonance of f02 with the resonator (ON, spin up)
    ref = data[("ON", 1)]
    detune = ref["f02"] - resonator.f_bare
    crossing, gap = None, 0.0
    flips = np.nonzero(np.sign(detune[:-1]) * np.sign(detune[1:]) <= 0)[0]
    if flips.size:
        i = int(flips[0])
        lo, hi = loop_fluxes[i], loop_fluxes[i + 1]

        def bare(f):
            return evaluate(f, "ON", 1)["f02"] - resonator.f_bare

        crossing = float(brentq(bare, lo, hi, xtol=1e-12)) if bare(lo) * bare(hi) < 0 else float(lo)
        at = evaluate(crossing, "ON", 1)
        gap = float(at["hi"] - at["lo"])

    def contrast(setpoint, flux):
        a, b = evaluate(flux, setpoint, 1), evaluate(flux, setpoint, -1)
        return a["res"] - b["res"], min(a["ov"], b["ov"])

    off_c = data[("OFF", 1)]["res"] - data[("OFF", -1)]["res"]
    roots = []
    for i in range(loop_fluxes.size - 1):
        roots += _sign_change_roots(
            lambda f: contrast("OFF", f)[0], loop_fluxes[i], loop_fluxes[i + 1], off_c[i], off_c[i + 1]
        )
    best, best_on, best_off = None, 0.0, math.inf
    for root in roots:
        off, ov_off = contrast("OFF", root)
        on, ov_on = contrast("ON", root)
        if min(ov_on, ov_off) >= min_overlap and abs(on) > abs(best_on):
            best, best_on, best_off = float(root), float(on), float(off)

    keyed = {name: {k: v[src] for k, v in data.items()} for name, src in
             (("resonator", "res"), ("lower", "lo"), ("upper", "hi"), ("f02", "f02"), ("overlap", "ov"))}
    return CrossingScan(
        loop_fluxes, keyed["resonator"], keyed["lower"], keyed["upper"], keyed["f02"],
        keyed["overlap"], crossing, gap, best, best_on, best_off,
    )


# -- joint readout ---------------------------------------------------------------------


@dataclass(frozen=True)
class JointLadder:
    """Dressed resonator frequency per number of up spins (0..N)."""

    frequencies: dict
    spread: dict

    def as_list(self):
        return [self.frequencies[k] for k in sorted(self.frequencies)]


def joint_readout_ladder(
    config: ChainConfig,
    circuit: ReadoutCircuit,
    resonator: ResonatorSpec,
    *,
    e_so_tolerance: float = 0.1,
    degeneracy_tol: float = 1e-6,
    samples_per_count: int = 4,
) -> JointLadder:
    """One resonator frequency per up-spin count, with permutation checks.

    All qubits must be OFF at the same sign (every relative phase +pi/2, or
    every one -pi/2); with mixed signs the spin-dependent parts of the
    potential no longer add up, and the frequency depends on which spins
    are up, not only on how many. N qubits give N + 1 entries.
    """
    n = config.n
    e_so = config.e_so
    if np.any(e_so <= 0) or (e_so.max() - e_so.min()) > e_so_tolerance * e_so.mean():
        raise ValidationError(f"E_SO values must agree within {e_so_tolerance:.0%}")
    psi = config.phases() - effective_total_ej(config).phase_offset
    sin = np.sin(psi)
    if not (np.allclose(sin, 1.0, atol=1e-9) or np.allclose(sin, -1.0, atol=1e-9)):
        raise ValidationError("joint readout needs every qubit OFF with the same phase sign")
    identical = np.all(e_so == e_so[0]) and np.all(config.e_j_asq == config.e_j_asq[0])
    freqs, spread = {}, {}
    for k in range(n + 1):
        combos = list(itertools.islice(itertools.combinations(range(n), k), samples_per_count))
        tail = tuple(range(n - k, n))
        if tail not in combos:
            combos.append(tail)
        values = []
        for up in combos:
            s = [1 if q in up else -1 for q in range(n)]
            values.append(dressed_resonator_freq(circuit, config, s, resonator, warn=False))
        freqs[k] = values[0]
        spread[k] = float(max(values) - min(values))
        if identical and spread[k] > degeneracy_tol:
            worst = int(np.argmax(np.abs(np.array(values) - values[0])))
            raise DegeneracyError(
                f"up-count {k}: configurations {combos[0]} and {combos[worst]} differ by "
                f"{spread[k] * 1e6:.2f} kHz"
            )
    return JointLadder(freqs, spread)
