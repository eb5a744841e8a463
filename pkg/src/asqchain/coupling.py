"""Effective spin-spin couplings mediated by the shared coupling junction.

The junction network is treated classically: the common phase ``phi``
relaxes to the minimum of

    U_s(phi) = E_J (1 - cos phi)
               + sum_l [E_J,l cos(phi + t_l) - s_l E_SO,l sin(phi + t_l)]

with ``t_l`` the cumulative phase of loop ``l`` and ``s_l = +-1`` the spin.
The minimum is ``E_J - |E~(s)|`` where

    E~(s) = E_J - sum_l E_J,l exp(i t_l) - i sum_l s_l E_SO,l exp(i t_l).

Expanding ``|E~(s)|`` in ``E_SO / |E~|`` gives the single-qubit energies,
the pair couplings and the three-body corrections reported here. The same
potential, minimised numerically for every spin configuration, is the
independent oracle used to check them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import ConvergenceError, DegenerateCouplingError, ValidationError
from .spin import ChainConfig, wrap_phase

DEGENERATE_FRACTION = 1e-6
ORACLE_TOL = 1e-12

FIRST_ORDER = "first-order"
WITH_APPENDIX_A = "with-appendix-a"
WALSH = "walsh"


@dataclass(frozen=True)
class EffectiveEj:
    magnitude: float
    phase_offset: float
    degenerate: bool = False

    @property
    def value(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase_offset), math.sin(self.phase_offset))


@dataclass(frozen=True)
class CouplingReport:
    """Coefficients of the diagonal spin Hamiltonian.

    ``H = c0 + sum_i E_i/2 Z_i + sum_{i<j} J_ij/2 Z_i Z_j
    + sum_{i<j<k} J_ijk/2 Z_i Z_j Z_k``. Triples are stored as
    ``(i, j, k, value)`` with ``i < j < k``. For reports built from the
    closed-form expansion, ``triple_parts`` keeps the two mechanisms
    (``"denominator"`` and ``"phase_offset"``) that sum to each triple.
    """

    energies: np.ndarray
    pair_couplings: np.ndarray
    triple_couplings: tuple = ()
    order: str = FIRST_ORDER
    constant: float = 0.0
    triple_parts: Mapping[str, tuple] = field(default_factory=dict)
    higher_terms: tuple = ()

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        j = np.asarray(self.pair_couplings, dtype=float)
        if j.shape != (e.size, e.size):
            raise ValidationError("pair matrix shape does not match the number of energies")
        if not np.array_equal(j, j.T) or np.any(np.diag(j) != 0):
            raise ValidationError("pair matrix must be symmetric with zero diagonal")
        for t in self.triple_couplings:
            if len({t[0], t[1], t[2]}) != 3:
                raise ValidationError(f"triple {t[:3]} has repeated indices")
        e.setflags(write=False)
        j.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "pair_couplings", j)

    @property
    def n(self) -> int:
        return self.energies.size

    def pair(self, i: int, j: int) -> float:
        return float(self.pair_couplings[i, j])

    def triple(self, i: int, j: int, k: int) -> float:
        key = tuple(sorted((i, j, k)))
        for t in self.triple_couplings:
            if t[:3] == key:
                return float(t[3])
        return 0.0

    def triples_array(self) -> np.ndarray:
        """Dense ``(N, N, N)`` symmetric tensor of the three-body terms."""
        out = np.zeros((self.n,) * 3)
        for i, j, k, v in self.triple_couplings:
            for p in itertools.permutations((i, j, k)):
                out[p] = v
        return out

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "constant_GHz": float(self.constant),
            "energies_GHz": [float(x) for x in self.energies],
            "pair_couplings_GHz": [[float(x) for x in row] for row in self.pair_couplings],
            "triple_couplings_GHz": [
                [int(i), int(j), int(k), float(v)] for i, j, k, v in self.triple_couplings
            ],
        }


def spin_configurations(n: int) -> np.ndarray:
    """All ``2**n`` spin configurations in basis order, shape ``(2**n, n)``."""
    b = np.arange(1 << n)[:, None]
    shifts = n - 1 - np.arange(n)[None, :]
    return (1 - 2 * ((b >> shifts) & 1)).astype(np.int64)


def _check_spins(spins, n: int) -> np.ndarray:
    s = np.asarray(spins)
    if s.shape != (n,) or not np.all(np.isin(s, (-1, 1))):
        raise ValidationError(f"spin configuration must be {n} entries of +1/-1, got {spins!r}")
    return s.astype(float)


def effective_total_ej(config: ChainConfig, spins: Sequence[int] | None = None) -> EffectiveEj:
    """Complex effective Josephson energy of the whole parallel network.

    Without ``spins`` only the spin-independent parts enter; with them the
    spin-dependent term ``-i sum_l s_l E_SO,l exp(i t_l)`` is added.
    """
    theta = config.phases()
    rot = np.exp(1j * theta)
    total = config.e_j_coupling - np.sum(config.e_j_asq * rot)
    if spins is not None:
        s = _check_spins(spins, config.n)
        total = total - 1j * np.sum(s * config.e_so * rot)
    mag = float(abs(total))
    phase = float(wrap_phase(np.angle(total))) if mag > 0 else 0.0
    return EffectiveEj(mag, phase, mag < DEGENERATE_FRACTION * config.e_j_coupling)


def _nondegenerate(config: ChainConfig) -> EffectiveEj:
    eff = effective_total_ej(config)
    if eff.degenerate:
        raise DegenerateCouplingError(
            f"|E~| = {eff.magnitude:.3g} GHz is below {DEGENERATE_FRACTION:g} E_J; "
            "the perturbative coupling is undefined"
        )
    return eff


def _snap_cos(x):
    c = np.cos(x)
    return np.where(np.abs(c) < kernels.COS_SNAP, 0.0, c)


def relative_phases(config: ChainConfig) -> np.ndarray:
    """Phase of each ASQ measured from the network's phase offset."""
    return config.phases() - _nondegenerate(config).phase_offset


def pairwise_coupling(config: ChainConfig, i: int, j: int) -> float:
    """First-order ZZ coupling between qubits ``i`` and ``j`` (GHz)."""
    n = config.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ValidationError(f"need two distinct qubits in [0, {n}), got ({i}, {j})")
    eff = _nondegenerate(config)
    psi = config.phases()[[i, j]] - eff.phase_offset
    c = _snap_cos(psi)
    e_so = config.e_so
    return float(-2.0 * e_so[i] * e_so[j] * c[0] * c[1] / eff.magnitude)


def coupling_report(config: ChainConfig, include_appendix_a: bool = False) -> CouplingReport:
    """Energies, pair couplings and (optionally) three-body corrections.

    The three-body term comes from expanding ``1/|E~(s)|`` to next order,
    ``J_ijk = -(J_ij e_k sin psi_k + J_jk e_i sin psi_i + J_ik e_j sin psi_j)``
    with ``e = E_SO / |E~|`` and ``psi = t - phi_E``. A spin-dependent shift of
    ``phi_E`` can be written as a second mechanism; in the exact expansion it
    is already contained in the term above, so that part is reported as zero
    (see ``triple_parts``).
    """
    eff = _nondegenerate(config)
    psi = config.phases() - eff.phase_offset
    e_so = config.e_so
    energies = -2.0 * e_so * np.sin(psi) + config.e_z * np.cos(config.thetas)
    pairs = kernels.coupling_matrices(
        e_so, config.e_j_asq, config.e_j_coupling, np.asarray([config.fluxes], dtype=float)
    )[0]
    pairs = 0.5 * (pairs + pairs.T)
    if not include_appendix_a:
        return CouplingReport(energies, pairs, (), FIRST_ORDER)

    eps_sin = e_so * np.sin(psi) / eff.magnitude
    denom, phase = [], []
    for i, j, k in itertools.combinations(range(config.n), 3):
        val = -(pairs[i, j] * eps_sin[k] + pairs[j, k] * eps_sin[i] + pairs[i, k] * eps_sin[j])
        if val != 0.0:
            denom.append((i, j, k, float(val)))
            phase.append((i, j, k, 0.0))
    return CouplingReport(
        energies,
        pairs,
        tuple(denom),
        WITH_APPENDIX_A,
        triple_parts={"denominator": tuple(denom), "phase_offset": tuple(phase)},
    )


def _oracle_inputs(config: ChainConfig):
    if not config.aligned:
        raise ValidationError("the classical oracle needs Zeeman fields along the spin axis")
    theta = config.phases()
    zeeman = config.e_z * np.cos(config.thetas)
    return theta, zeeman


def _count_minima(config: ChainConfig, theta, zeeman, spins: np.ndarray, points: int = 256):
    phi = np.linspace(-np.pi, np.pi, points, endpoint=False)
    arg = phi[None, :, None] + theta[None, None, :]
    u = config.e_j_coupling * (1 - np.cos(phi))[None, :] + np.sum(
        config.e_j_asq * np.cos(arg) - spins[:, None, :] * config.e_so * np.sin(arg), axis=2
    )
    lower = (u < np.roll(u, 1, axis=1)) & (u < np.roll(u, -1, axis=1))
    return lower.sum(axis=1)


def oracle_energies(config: ChainConfig, spins: np.ndarray | None = None, tol: float = ORACLE_TOL):
    """Classical minimum energy for each row of ``spins`` (default: all 2^N).

    Raises :class:`ConvergenceError` if the potential has more than one
    well or the bracketed bisection does not reach ``tol`` GHz/rad.
    """
    theta, zeeman = _oracle_inputs(config)
    if spins is None:
        spins = spin_configurations(config.n)
    spins = np.atleast_2d(np.asarray(spins, dtype=np.float64))
    wells = _count_minima(config, theta, zeeman, spins)
    if np.any(wells > 1):
        bad = spins[int(np.argmax(wells > 1))].astype(int).tolist()
        raise ConvergenceError(f"potential has several minima for spins {bad}")
    energies, _, ok = kernels.oracle_minima(
        config.e_j_coupling, config.e_j_asq, config.e_so, zeeman, theta, spins, tol
    )
    if not np.all(ok):
        bad = spins[int(np.argmin(ok))].astype(int).tolist()
        raise ConvergenceError(f"oracle minimisation failed for spins {bad}")
    return energies


def classical_energy_oracle(config: ChainConfig, spins: Sequence[int]) -> float:
    """Minimum over the common phase of the classical junction potential (GHz)."""
    s = _check_spins(spins, config.n)
    return float(oracle_energies(config, s[None, :])[0])


def extract_couplings_walsh(energies) -> CouplingReport:
    """Decompose a full diagonal energy table into Pauli-Z coefficients.

    ``energies`` is either an array of length ``2**N`` in basis order or a
    mapping from spin tuples to energies. Terms of order four and above are
    returned in ``higher_terms`` as ``(indices, value)`` pairs.
    """
    if isinstance(energies, Mapping):
        if not energies:
            raise ValidationError("empty energy table")
        n = len(next(iter(energies)))
        table = np.empty(1 << n)
        for row, s in enumerate(spin_configurations(n)):
            key = tuple(int(x) for x in s)
            if key not in energies:
                raise ValidationError(f"energy table is missing configuration {key}")
            table[row] = energies[key]
    else:
        table = np.asarray(energies, dtype=float).ravel()
        n = table.size.bit_length() - 1
        if table.size == 0 or table.size != 1 << n:
            raise ValidationError(f"energy table has {table.size} entries, not a power of two")
    coeffs = kernels.walsh_coefficients(np.ascontiguousarray(table, dtype=np.float64))

    def subset(mask):
        return tuple(q for q in range(n) if (mask >> (n - 1 - q)) & 1)

    e = np.zeros(n)
    j = np.zeros((n, n))
    triples, higher = [], []
    for mask in range(1, 1 << n):
        idx = subset(mask)
        val = 2.0 * coeffs[mask]
        if len(idx) == 1:
            e[idx[0]] = val
        elif len(idx) == 2:
            j[idx] = j[idx[::-1]] = val
        elif val == 0.0:
            continue
        elif len(idx) == 3:
            triples.append((*idx, float(val)))
        else:
            higher.append((idx, float(val)))
    return CouplingReport(e, j, tuple(triples), WALSH, float(coeffs[0]), higher_terms=tuple(higher))


@dataclass(frozen=True)
class OracleComparison:
    """Scaled deviations between the closed-form report and the oracle.

    Pair errors are measured in units of ``2 E_SO,i E_SO,j / |E~|`` and
    triple errors in units of ``2 E_SO,i E_SO,j E_SO,k / |E~|^2``, the
    natural size of each term. A plain relative error is ill-defined for
    pairs that sit at an OFF setpoint, where the exact coupling is zero.
    """

    pair_error: float
    triple_error: float
    energy_error: float
    bound: float

    @property
    def passed(self) -> bool:
        return max(self.pair_error, self.triple_error) <= self.bound


def compare_with_oracle(config: ChainConfig) -> OracleComparison:
    closed = coupling_report(config, include_appendix_a=True)
    walsh = extract_couplings_walsh(oracle_energies(config))
    mag = _nondegenerate(config).magnitude
    e_so = config.e_so
    ratio = float(np.max(e_so) / config.e_j_coupling)

    pair_err = 0.0
    for i, j in itertools.combinations(range(config.n), 2):
        scale = 2.0 * e_so[i] * e_so[j] / mag
        if scale > 0:
            pair_err = max(pair_err, abs(walsh.pair(i, j) - closed.pair(i, j)) / scale)
    triple_err = 0.0
    for i, j, k in itertools.combinations(range(config.n), 3):
        scale = 2.0 * e_so[i] * e_so[j] * e_so[k] / mag**2
        if scale > 0:
            triple_err = max(
                triple_err, abs(walsh.triple(i, j, k) - closed.triple(i, j, k)) / scale
            )
    e_scale = 2.0 * np.where(e_so > 0, e_so, 1.0)
    e_err = float(np.max(np.abs(walsh.energies - closed.energies) / e_scale))
    return OracleComparison(pair_err, triple_err, e_err, 3.0 * ratio)
