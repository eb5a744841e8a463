"""State-vector dynamics under the effective spin Hamiltonian.

Evolution operators are ``exp(-2 pi i H t)`` with H in GHz and t in ns. A
diagonal Hamiltonian is exponentiated entrywise; anything else goes through
a dense Hermitian eigendecomposition, which is exact for piecewise-constant
schedules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coupling import CouplingReport, coupling_report
from .errors import ValidationError
from .spin import SIGMA_X, SIGMA_Z, ChainConfig, SpinOperator, build_spin_hamiltonian, embed
from .spin import wrap_phase

DEFAULT_MAX_QUBITS = 14
TWO_PI = 2.0 * np.pi

THREE_BODY_ONLY = "three-body-only"
WITH_RESIDUAL = "with-residual"
INFIDELITY_COEFF = {THREE_BODY_ONLY: 0.1875, WITH_RESIDUAL: 1.1875}


# -- states and propagators ----------------------------------------------------------


def basis_state(spins: Sequence[int]) -> np.ndarray:
    """Computational basis state for a list of +-1 spins (qubit 0 first)."""
    n = len(spins)
    idx = 0
    for q, s in enumerate(spins):
        if s not in (1, -1):
            raise ValidationError("spins must be +1 or -1")
        if s == -1:
            idx |= 1 << (n - 1 - q)
    psi = np.zeros(1 << n, dtype=complex)
    psi[idx] = 1.0
    return psi


def product_state(single: Sequence[Sequence[complex]]) -> np.ndarray:
    psi = np.ones(1, dtype=complex)
    for v in single:
        v = np.asarray(v, dtype=complex)
        psi = np.kron(psi, v / np.linalg.norm(v))
    return psi


@dataclass(frozen=True)
class Propagator:
    """Spectral form of a time-independent Hamiltonian."""

    energies: np.ndarray
    vectors: np.ndarray | None  # None for diagonal Hamiltonians

    @classmethod
    def of(cls, h: SpinOperator, max_qubits: int = DEFAULT_MAX_QUBITS) -> Propagator:
        if h.n > max_qubits:
            raise ValidationError(f"{h.n} qubits exceeds the dynamics cap of {max_qubits}")
        if h.is_diagonal:
            return cls(np.asarray(h.diagonal, dtype=float), None)
        dense = h.dense()
        w, v = np.linalg.eigh(0.5 * (dense + dense.conj().T))
        return cls(w, v)

    @property
    def dim(self) -> int:
        return self.energies.size

    def phases(self, t: float) -> np.ndarray:
        return np.exp(-1j * TWO_PI * self.energies * t)

    def apply(self, state: np.ndarray, t: float) -> np.ndarray:
        if self.vectors is None:
            return self.phases(t) * state
        return self.vectors @ (self.phases(t) * (self.vectors.conj().T @ state))

    def unitary(self, t: float) -> np.ndarray:
        if self.vectors is None:
            return np.diag(self.phases(t))
        return (self.vectors * self.phases(t)) @ self.vectors.conj().T


def unitary(h: SpinOperator, t: float) -> np.ndarray:
    return Propagator.of(h).unitary(t)


@dataclass(frozen=True)
class PulseSchedule:
    """Piecewise-constant flux schedule: ``(fluxes, duration_ns)`` segments."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((tuple(float(f) for f in fl), float(d)) for fl, d in self.segments)
        if not segs:
            raise ValidationError("a schedule needs at least one segment")
        n = len(segs[0][0])
        for fl, d in segs:
            if len(fl) != n:
                raise ValidationError("every segment must list one flux per qubit")
            if not d > 0:
                raise ValidationError("segment durations must be > 0")
        object.__setattr__(self, "segments", segs)

    @property
    def duration(self) -> float:
        return sum(d for _, d in self.segments)


def _check_state(state: np.ndarray, dim: int) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.shape != (dim,):
        raise ValidationError(f"state has shape {state.shape}, expected ({dim},)")
    if abs(np.linalg.norm(state) - 1.0) > 1e-10:
        raise ValidationError("initial state must be normalised")
    return state


def evolve_hamiltonian(h: SpinOperator, state, t: float) -> np.ndarray:
    prop = Propagator.of(h)
    return prop.apply(_check_state(state, prop.dim), t)


def evolve(
    config: ChainConfig,
    schedule: PulseSchedule,
    initial,
    *,
    include_triples: bool = False,
    max_qubits: int = DEFAULT_MAX_QUBITS,
) -> np.ndarray:
    """Run a flux schedule: each segment rebuilds couplings from its fluxes."""
    if config.n > max_qubits:
        raise ValidationError(f"{config.n} qubits exceeds the dynamics cap of {max_qubits}")
    state = _check_state(initial, 1 << config.n)
    for fluxes, duration in schedule.segments:
        if len(fluxes) != config.n:
            raise ValidationError("schedule and config disagree on the number of qubits")
        cfg = config.with_fluxes(fluxes)
        report = coupling_report(cfg, include_appendix_a=include_triples)
        h = build_spin_hamiltonian(cfg, report, include_triples=include_triples)
        state = Propagator.of(h, max_qubits).apply(state, duration)
    return state


# -- CPHASE ------------------------------------------------------------------------------


@dataclass(frozen=True)
class GateResult:
    unitary: np.ndarray
    pair_block: np.ndarray
    conditional_phase: float
    avg_fidelity: float
    gate_time: float

    @property
    def infidelity(self) -> float:
        return 1.0 - self.avg_fidelity


def average_gate_fidelity(block: np.ndarray, ideal: np.ndarray) -> float:
    """``(Tr(M M^dagger) + |Tr(U^dagger M)|^2) / (d (d + 1))``.

    For a unitary ``M`` this is the usual ``(|Tr(U^dagger M)|^2 + d) /
    (d (d + 1))``; the general form also covers leakage out of the block.
    """
    d = ideal.shape[0]
    return float(
        (np.real(np.trace(block @ block.conj().T)) + abs(np.trace(ideal.conj().T @ block)) ** 2)
        / (d * (d + 1))
    )


def _pair_blocks(u: np.ndarray, n: int, pair: tuple[int, int]):
    """4x4 blocks of ``u`` on ``pair`` for each spectator basis state."""
    i, j = pair
    others = [q for q in range(n) if q not in (i, j)]
    t = u.reshape((2,) * (2 * n))
    order = [i, j] + others
    t = t.transpose(order + [n + q for q in order])
    t = t.reshape(4, 1 << len(others), 4, 1 << len(others))
    return np.stack([t[:, s, :, s] for s in range(1 << len(others))])


def _local_z_correction(diag: np.ndarray) -> np.ndarray:
    """Phases that map ``(p00, p01, p10)`` to zero; the rest stays on ``p11``."""
    p = np.angle(diag)
    return np.exp(-1j * np.array([p[0], p[1], p[2], p[1] + p[2] - p[0]]))


def cphase_gate(
    config: ChainConfig | None,
    pair: tuple[int, int],
    report: CouplingReport | None = None,
    *,
    spectators: str = "up",
    gate_time: float | None = None,
    include_triples: bool = True,
) -> GateResult:
    """Evolve for ``1 / (4 |J|)`` and compare with CPHASE on ``pair``.

    Spectators start in a computational basis state. ``"up"`` keeps them all
    spin up, so every spectator three-body term shifts the conditional phase
    coherently; ``"average"`` averages the fidelity over all spectator basis
    states (with one common local-Z correction).
    """
    if report is None:
        if config is None:
            raise ValidationError("need a config or a report")
        report = coupling_report(config, include_appendix_a=include_triples)
    n = report.n
    i, j = sorted(pair)
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"invalid pair {pair}")
    jij = report.pair(i, j)
    if jij == 0:
        raise ValidationError(f"pair ({i}, {j}) is not coupled")
    t = 1.0 / (4.0 * abs(jij)) if gate_time is None else float(gate_time)
    h = build_spin_hamiltonian(config, report, include_triples=include_triples)
    u = Propagator.of(h).unitary(t)
    blocks = _pair_blocks(u, n, (i, j))
    if spectators == "up":
        blocks = blocks[:1]
    elif spectators != "average":
        raise ValidationError("spectators must be 'up' or 'average'")
    mean_diag = np.mean([np.diag(b) / np.abs(np.diag(b)) for b in blocks], axis=0)
    corr = np.diag(_local_z_correction(mean_diag))
    ideal = np.diag([1, 1, 1, -1]).astype(complex)
    fids = [average_gate_fidelity(corr @ b, ideal) for b in blocks]
    p = np.angle(np.diag(blocks[0]))
    cond = float(wrap_phase(p[3] - p[2] - p[1] + p[0]))
    return GateResult(u, corr @ blocks[0], abs(cond), float(np.mean(fids)), t)


def spectator_report(n: int, epsilon: float, j: float = -0.01, pair=(0, 1)) -> CouplingReport:
    """Report with one coupled pair and uniform spectator three-body terms.

    ``J_pair = j`` and ``J_{pair,k} = epsilon * j`` for every spectator k.
    """
    e = np.zeros(n)
    pm = np.zeros((n, n))
    a, b = pair
    pm[a, b] = pm[b, a] = j
    triples = tuple(
        tuple(sorted((a, b, k))) + (epsilon * j,) for k in range(n) if k not in (a, b)
    )
    return CouplingReport(e, pm, triples, "with-appendix-a")


def spectator_infidelity(n: int, epsilon: float, variant: str = THREE_BODY_ONLY) -> float:
    """Closed-form gate infidelity ``c ((N - 2) eps pi)^2``."""
    if n < 2 or epsilon < 0:
        raise ValidationError("need n >= 2 and epsilon >= 0")
    return INFIDELITY_COEFF[_variant(variant)] * ((n - 2) * epsilon * math.pi) ** 2


def _variant(v: str) -> str:
    if v not in INFIDELITY_COEFF:
        raise ValidationError(f"variant must be one of {tuple(INFIDELITY_COEFF)}")
    return v


def max_qubits(target_fidelity: float, epsilon: float, variant: str = THREE_BODY_ONLY) -> int:
    """Largest N whose spectator infidelity stays within ``1 - target_fidelity``."""
    if not 0 < target_fidelity < 1 or not epsilon > 0:
        raise ValidationError("need 0 < target_fidelity < 1 and epsilon > 0")
    c = INFIDELITY_COEFF[_variant(variant)]
    budget = 1.0 - target_fidelity
    n = 2 + math.floor(math.sqrt(budget / c) / (epsilon * math.pi))
    while n > 2 and spectator_infidelity(n, epsilon, variant) > budget:
        n -= 1
    while spectator_infidelity(n + 1, epsilon, variant) <= budget:
        n += 1
    return n


# -- Ising quench -------------------------------------------------------------------------


def partitioning_couplings(a: Sequence[float]) -> np.ndarray:
    """Rank-one couplings ``J_ij = a_i a_j`` with zero diagonal."""
    a = np.asarray(a, dtype=float)
    j = np.outer(a, a)
    np.fill_diagonal(j, 0.0)
    return j


def ising_hamiltonian(n, *, fields=None, jzz=None, jxx=None, max_qubits=DEFAULT_MAX_QUBITS) -> SpinOperator:
    """``sum E_i/2 Z_i + sum_{i<j} (Jzz_ij/2 Z_i Z_j + Jxx_ij/2 X_i X_j)``."""
    if n > max_qubits:
        raise ValidationError(f"{n} qubits exceeds the cap of {max_qubits}")
    fields = np.zeros(n) if fields is None else np.asarray(fields, dtype=float)
    jzz = np.zeros((n, n)) if jzz is None else np.asarray(jzz, dtype=float)
    if jxx is None or not np.any(jxx):
        report = CouplingReport(fields, 0.5 * (jzz + jzz.T))
        return build_spin_hamiltonian(None, report)
    jxx = np.asarray(jxx, dtype=float)
    z = [embed(SIGMA_Z, q, n) for q in range(n)]
    x = [embed(SIGMA_X, q, n) for q in range(n)]
    h = sum(0.5 * fields[q] * z[q] for q in range(n))
    for p in range(n):
        for q in range(p + 1, n):
            if jzz[p, q]:
                h = h + 0.5 * jzz[p, q] * (z[p] @ z[q])
            if jxx[p, q]:
                h = h + 0.5 * jxx[p, q] * (x[p] @ x[q])
    return SpinOperator(n, matrix=h.tocsr())


@dataclass(frozen=True)
class QuenchResult:
    times: np.ndarray
    z: np.ndarray  # (T, N)
    zz: np.ndarray  # (T, N, N)
    energy: np.ndarray  # <H>(t)

    def rows(self):
        n = self.z.shape[1]
        for k, t in enumerate(self.times):
            for i in range(n):
                yield float(t), f"Z{i + 1}", float(self.z[k, i])
            for i in range(n):
                for j in range(i + 1, n):
                    yield float(t), f"Z{i + 1}Z{j + 1}", float(self.zz[k, i, j])


def ising_quench(
    config: ChainConfig | None,
    report: CouplingReport | SpinOperator,
    initial,
    t_final: float,
    steps: int,
    *,
    max_qubits: int = DEFAULT_MAX_QUBITS,
) -> QuenchResult:
    """Sample ``<Z_i>`` and ``<Z_i Z_j>`` at ``steps + 1`` uniform times.

    ``report`` may be a coupling report (the Hamiltonian is then built with
    the Zeeman-frame rotation of ``config``) or a ready spin operator.
    ``initial`` is a state vector or a list of +-1 spins.
    """
    h = report if isinstance(report, SpinOperator) else build_spin_hamiltonian(config, report)
    n = h.n
    if n > max_qubits:
        raise ValidationError(f"{n} qubits exceeds the dynamics cap of {max_qubits}")
    if steps < 1 or t_final < 0:
        raise ValidationError("need steps >= 1 and t_final >= 0")
    init = np.asarray(initial)
    state0 = basis_state(list(init)) if init.shape == (n,) else _check_state(init, 1 << n)
    prop = Propagator.of(h, max_qubits)
    b = np.arange(1 << n)
    zcols = np.stack([1.0 - 2.0 * ((b >> (n - 1 - q)) & 1) for q in range(n)], axis=1)
    times = np.linspace(0.0, t_final, steps + 1)
    z = np.empty((times.size, n))
    zz = np.empty((times.size, n, n))
    energy = np.empty(times.size)
    for k, t in enumerate(times):
        psi = prop.apply(state0, t)
        prob = np.abs(psi) ** 2
        z[k] = prob @ zcols
        zz[k] = np.einsum("b,bi,bj->ij", prob, zcols, zcols)
        energy[k] = float(np.real(np.vdot(psi, h @ psi)))
    return QuenchResult(times, z, zz, energy)
