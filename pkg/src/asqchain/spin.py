"""Circuit parameter types and single/multi-qubit spin operators.

Units: energies are frequencies E/h in GHz, phases in radians, loop fluxes
in units of the flux quantum, currents in amperes. Tensor products put
qubit 0 first (most significant factor); within a qubit, index 0 is spin
up (sigma^z = +1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.constants as const
import scipy.sparse as sp

from . import kernels
from .errors import ValidationError

PLANCK = const.h
FLUX_QUANTUM = const.h / (2.0 * const.e)
GHZ = 1e9

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

DEFAULT_MAX_QUBITS = 24


def _wrap_angle(theta: float) -> float:
    """Fold an in-plane field angle onto [0, pi].

    Angles in (pi, 2 pi) are reflected, which flips the sign of the
    transverse field component; the two descriptions differ by a pi
    rotation about z and have identical spectra.
    """
    t = math.fmod(float(theta), 2.0 * math.pi)
    if t < 0:
        t += 2.0 * math.pi
    if t > math.pi:
        t = 2.0 * math.pi - t
    return t


def wrap_phase(phi):
    """Map phases onto (-pi, pi]."""
    out = np.mod(np.asarray(phi, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    out = np.where(np.isclose(out, -np.pi, rtol=0.0, atol=1e-14), np.pi, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AsqParams:
    """Parameters of one Andreev spin qubit.

    Attributes
    ----------
    e_j : float
        Spin-independent Josephson energy (GHz).
    e_so : float
        Spin-dependent Josephson energy (GHz).
    e_z : float
        Zeeman energy magnitude (GHz).
    theta : float
        Angle between the Zeeman field and the zero-field spin axis (rad),
        folded onto [0, pi].
    """

    e_j: float = 0.0
    e_so: float = 0.0
    e_z: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        for name in ("e_j", "e_so", "e_z"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"AsqParams.{name} must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "theta", _wrap_angle(self.theta))

    @property
    def aligned(self) -> bool:
        return self.theta == 0.0 or self.e_z == 0.0

    def pinched(self) -> AsqParams:
        return AsqParams(0.0, 0.0, self.e_z, self.theta)


@dataclass(frozen=True)
class ChainConfig:
    """N ASQs in parallel with one coupling junction; fluxes in flux quanta."""

    e_j_coupling: float
    asqs: tuple[AsqParams, ...]
    fluxes: tuple[float, ...] = field(default=())

    def __post_init__(self):
        e_j = float(self.e_j_coupling)
        if not (math.isfinite(e_j) and e_j > 0):
            raise ValidationError(f"e_j_coupling must be > 0, got {self.e_j_coupling}")
        asqs = tuple(a if isinstance(a, AsqParams) else AsqParams(**a) for a in self.asqs)
        if not asqs:
            raise ValidationError("a chain needs at least one ASQ")
        fluxes = tuple(self.fluxes) if len(self.fluxes) else (0.0,) * len(asqs)
        if len(fluxes) != len(asqs):
            raise ValidationError(f"got {len(fluxes)} fluxes for {len(asqs)} ASQs")
        fluxes = tuple(float(f) % 1.0 for f in fluxes)
        object.__setattr__(self, "e_j_coupling", e_j)
        object.__setattr__(self, "asqs", asqs)
        object.__setattr__(self, "fluxes", fluxes)

    @property
    def n(self) -> int:
        return len(self.asqs)

    @property
    def e_so(self) -> np.ndarray:
        return np.array([a.e_so for a in self.asqs])

    @property
    def e_j_asq(self) -> np.ndarray:
        return np.array([a.e_j for a in self.asqs])

    @property
    def e_z(self) -> np.ndarray:
        return np.array([a.e_z for a in self.asqs])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([a.theta for a in self.asqs])

    @property
    def aligned(self) -> bool:
        return all(a.aligned for a in self.asqs)

    def phases(self) -> np.ndarray:
        """Cumulative phase drops, unwrapped (radians)."""
        return 2.0 * np.pi * np.cumsum(self.fluxes)

    def with_fluxes(self, fluxes: Sequence[float]) -> ChainConfig:
        return ChainConfig(self.e_j_coupling, self.asqs, tuple(fluxes))

    def with_asqs(self, asqs: Sequence[AsqParams]) -> ChainConfig:
        return ChainConfig(self.e_j_coupling, tuple(asqs), self.fluxes)

    @classmethod
    def uniform(cls, n, e_j_coupling, *, e_so=0.0, e_j=0.0, e_z=0.0, theta=0.0, fluxes=()):
        asq = AsqParams(e_j=e_j, e_so=e_so, e_z=e_z, theta=theta)
        return cls(e_j_coupling, (asq,) * n, tuple(fluxes))


def cumulative_phases(fluxes: Sequence[float]) -> np.ndarray:
    """Phase drop across each ASQ from the loop fluxes, in (-pi, pi]."""
    return wrap_phase(2.0 * np.pi * np.cumsum(np.asarray(fluxes, dtype=float)))


def asq_hamiltonian(asq: AsqParams, phi: float) -> np.ndarray:
    """2x2 Hamiltonian of one ASQ at phase drop ``phi`` (GHz)."""
    return (
        asq.e_j * math.cos(phi) * SIGMA_0
        - asq.e_so * math.sin(phi) * SIGMA_Z
        + 0.5 * asq.e_z * math.cos(asq.theta) * SIGMA_Z
        + 0.5 * asq.e_z * math.sin(asq.theta) * SIGMA_X
    )


def supercurrent_amplitudes(asq: AsqParams, phi: float) -> tuple[float, float]:
    """Spin-dependent and spin-independent supercurrent amplitudes (A).

    Returns ``(I_s, I_0)`` with ``I_s = (2 pi / Phi_0) E_SO cos(phi)`` and
    ``I_0 = (pi / Phi_0) E_J sin(phi)``.
    """
    scale = math.pi * PLANCK * GHZ / FLUX_QUANTUM
    return 2.0 * scale * asq.e_so * math.cos(phi), scale * asq.e_j * math.sin(phi)


def current_operator(asq: AsqParams, phi: float) -> np.ndarray:
    """Current operator ``(pi / Phi_0) dH/dphi`` in amperes.

    With the amplitudes of :func:`supercurrent_amplitudes` this equals
    ``-(I_s / 2) sigma^z - I_0 sigma^0``; the sign follows from the
    derivative of :func:`asq_hamiltonian`.
    """
    if asq.e_z and asq.theta != 0.0:
        raise ValidationError("current_operator assumes a Zeeman field along the spin axis (theta = 0)")
    i_s, i_0 = supercurrent_amplitudes(asq, phi)
    return -(0.5 * i_s) * SIGMA_Z - i_0 * SIGMA_0


@dataclass(frozen=True)
class RotatedCoupling:
    j_zz: float
    j_xz: float
    j_zx: float
    j_xx: float


def rotate_coupling(theta_1: float, theta_2: float, j: float) -> RotatedCoupling:
    """ZZ coupling re-expressed in the Zeeman eigenbases of both qubits."""
    c1, s1 = math.cos(theta_1), math.sin(theta_1)
    c2, s2 = math.cos(theta_2), math.sin(theta_2)
    return RotatedCoupling(j * c1 * c2, j * s1 * c2, j * c1 * s2, j * s1 * s2)


def zeeman_basis(theta: float) -> np.ndarray:
    """Unitary whose columns are the Zeeman eigenstates (up, down).

    In this basis the zero-field operators become
    ``sigma^z -> cos(theta) Z + sin(theta) X`` and
    ``sigma^x -> sin(theta) Z - cos(theta) X``.
    """
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, s], [s, -c]], dtype=complex)


def _rotated_paulis(theta: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = math.cos(theta), math.sin(theta)
    return c * SIGMA_Z + s * SIGMA_X, s * SIGMA_Z - c * SIGMA_X


@dataclass(frozen=True)
class SpinOperator:
    """A 2^N x 2^N Hermitian operator, stored as a diagonal when possible."""

    n: int
    diagonal: np.ndarray | None = None
    matrix: sp.csr_matrix | None = None

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def is_diagonal(self) -> bool:
        return self.diagonal is not None

    def dense(self) -> np.ndarray:
        if self.diagonal is not None:
            return np.diag(self.diagonal.astype(complex))
        return self.matrix.toarray()

    def __matmul__(self, vec):
        if self.diagonal is not None:
            return self.diagonal * vec
        return self.matrix @ vec


def embed(op: np.ndarray, qubit: int, n: int) -> sp.csr_matrix:
    """Single-qubit operator acting on ``qubit`` of an ``n``-qubit register."""
    left = sp.identity(1 << qubit, format="csr")
    right = sp.identity(1 << (n - qubit - 1), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def build_spin_hamiltonian(config, report, *, include_triples=True, max_qubits=DEFAULT_MAX_QUBITS):
    """Effective spin Hamiltonian from a coupling report.

    With all Zeeman fields aligned the result is diagonal,
    ``sum_i E_i/2 Z_i + sum_{j<i} J_ij/2 Z_i Z_j (+ sum J_ijk/2 Z_i Z_j Z_k)``.
    Otherwise every zero-field operator is rewritten in the Zeeman
    eigenbasis of its qubit, which produces the XZ, ZX and XX couplings
    alongside ZZ.

    ``config`` may be ``None`` for a bare report (aligned fields assumed).
    """
    n = report.n
    if n > max_qubits:
        raise ValidationError(f"{n} qubits exceeds the cap of {max_qubits} for spin Hamiltonians")
    energies = np.asarray(report.energies, dtype=float)
    pairs = np.asarray(report.pair_couplings, dtype=float)
    triples = report.triple_couplings if include_triples else ()
    if config is None or config.aligned:
        idx = np.array([t[:3] for t in triples], dtype=np.int64).reshape(-1, 3)
        vals = np.array([t[3] for t in triples], dtype=float)
        diag = kernels.diagonal_energies(n, energies, pairs, idx, vals)
        return SpinOperator(n, diagonal=diag)

    thetas = config.thetas
    e_z = config.e_z
    z_ops, x_ops = [], []
    for q in range(n):
        zr, xr = _rotated_paulis(thetas[q])
        z_ops.append(embed(zr, q, n))
        x_ops.append(embed(xr, q, n))
    h = sp.csr_matrix((1 << n, 1 << n), dtype=complex)
    for q in range(n):
        # report energies already carry the E_Z cos(theta) part of the field
        h = h + 0.5 * energies[q] * z_ops[q] + 0.5 * e_z[q] * math.sin(thetas[q]) * x_ops[q]
        for r in range(q + 1, n):
            if pairs[q, r]:
                h = h + 0.5 * pairs[q, r] * (z_ops[q] @ z_ops[r])
    for i, j, k, val in triples:
        h = h + 0.5 * val * (z_ops[i] @ z_ops[j] @ z_ops[k])
    return SpinOperator(n, matrix=h.tocsr())
