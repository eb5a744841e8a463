import math

import numpy as np
import pytest

from asqchain.coupling import CouplingReport, coupling_report
from asqchain.errors import ValidationError
from asqchain.spin import (
    FLUX_QUANTUM,
    PLANCK,
    SIGMA_0,
    SIGMA_X,
    SIGMA_Z,
    AsqParams,
    ChainConfig,
    asq_hamiltonian,
    build_spin_hamiltonian,
    cumulative_phases,
    current_operator,
    embed,
    rotate_coupling,
    supercurrent_amplitudes,
    zeeman_basis,
)

PI = math.pi


# -- parameter types --------------------------------------------------------------------


def test_theta_is_folded_onto_zero_pi():
    assert AsqParams(theta=-PI / 3).theta == pytest.approx(PI / 3)
    assert AsqParams(theta=2 * PI + 0.5).theta == pytest.approx(0.5)
    assert 0 <= AsqParams(theta=5.0).theta <= PI


@pytest.mark.parametrize("field", ["e_j", "e_so", "e_z"])
def test_negative_energies_rejected(field):
    with pytest.raises(ValidationError):
        AsqParams(**{field: -0.1})


def test_chain_config_stores_fluxes_mod_one():
    cfg = ChainConfig(10.0, [AsqParams(e_so=0.3)] * 3, (1.25, -0.25, 0.5))
    assert cfg.fluxes == (0.25, 0.75, 0.5)


def test_chain_config_rejects_bad_input():
    with pytest.raises(ValidationError):
        ChainConfig(0.0, [AsqParams()])
    with pytest.raises(ValidationError):
        ChainConfig(10.0, [])
    with pytest.raises(ValidationError):
        ChainConfig(10.0, [AsqParams()] * 2, (0.1,))


# -- phases and single-qubit operators ----------------------------------------------------


def test_cumulative_phases_examples():
    np.testing.assert_allclose(cumulative_phases([0.25, 0.5, 0.5]), [PI / 2, -PI / 2, PI / 2], atol=1e-15)
    np.testing.assert_array_equal(cumulative_phases([0, 0, 0]), [0, 0, 0])
    np.testing.assert_allclose(cumulative_phases([0.125, 0.125]), [PI / 4, PI / 2])


def test_cumulative_phases_range_is_half_open():
    phases = cumulative_phases([0.5, 0.5, 0.5])
    assert phases[0] == pytest.approx(PI)
    assert np.all(phases > -PI) and np.all(phases <= PI)


def test_asq_hamiltonian_examples():
    np.testing.assert_allclose(asq_hamiltonian(AsqParams(e_so=0.3), PI / 2), -0.3 * SIGMA_Z, atol=1e-15)
    np.testing.assert_array_equal(asq_hamiltonian(AsqParams(), 1.234), np.zeros((2, 2)))
    np.testing.assert_array_equal(asq_hamiltonian(AsqParams(e_j=1.0), 0.0), SIGMA_0)


def test_asq_hamiltonian_zeeman_terms():
    asq = AsqParams(e_z=2.0, theta=PI / 3)
    expected = math.cos(PI / 3) * SIGMA_Z + math.sin(PI / 3) * SIGMA_X
    np.testing.assert_allclose(asq_hamiltonian(asq, 0.7), expected, atol=1e-15)


def test_supercurrent_amplitude_value():
    # 2 pi h (0.3 GHz) / Phi_0 with Phi_0 = h / 2e
    expected = 2 * PI * PLANCK * 0.3e9 / FLUX_QUANTUM
    assert expected == pytest.approx(6.04e-10, rel=2e-3)
    i_s, i_0 = supercurrent_amplitudes(AsqParams(e_so=0.3), 0.0)
    assert i_s == pytest.approx(expected, rel=1e-12)
    assert i_0 == 0.0
    assert supercurrent_amplitudes(AsqParams(e_so=0.3), PI)[0] == pytest.approx(-expected, rel=1e-12)


def test_spin_current_vanishes_at_off():
    for phi in (PI / 2, -PI / 2):
        op = current_operator(AsqParams(e_so=0.3), phi)
        assert abs(op[0, 0] - op[1, 1]) < 1e-25


@pytest.mark.parametrize("phi", [-2.5, -PI / 2, 0.0, 0.3, 1.0, PI / 2, 3.0])
def test_current_operator_is_the_phase_derivative(phi):
    asq = AsqParams(e_j=0.7, e_so=0.3, e_z=0.2)
    delta = 1e-6
    deriv = (asq_hamiltonian(asq, phi + delta) - asq_hamiltonian(asq, phi - delta)) / (2 * delta)
    fd = (PI / FLUX_QUANTUM) * PLANCK * 1e9 * deriv
    op = current_operator(asq, phi)
    scale = np.max(np.abs(op))
    assert np.max(np.abs(op - fd)) < 1e-6 * scale


def test_spin_current_extremal_at_on():
    asq = AsqParams(e_so=0.3)
    for phi in (0.0, PI):
        h = 1e-5
        split = lambda p: np.diff(np.diag(current_operator(asq, p)).real)[0]  # noqa: E731
        slope = (split(phi + h) - split(phi - h)) / (2 * h)
        assert abs(slope) < 1e-9 * abs(split(phi))


def test_current_operator_rejects_misaligned_field():
    with pytest.raises(ValidationError):
        current_operator(AsqParams(e_so=0.3, e_z=1.0, theta=0.4), 0.0)


# -- rotated couplings ----------------------------------------------------------------------


def test_rotate_coupling_examples():
    j = -0.006
    r = rotate_coupling(0.0, 0.0, j)
    assert (r.j_zz, r.j_xz, r.j_zx, r.j_xx) == (j, 0.0, 0.0, 0.0)
    r = rotate_coupling(PI / 2, PI / 2, j)
    np.testing.assert_allclose([r.j_zz, r.j_xz, r.j_zx, r.j_xx], [0, 0, 0, j], atol=1e-18)
    r = rotate_coupling(PI / 2, 0.0, j)
    np.testing.assert_allclose([r.j_zz, r.j_xz, r.j_zx, r.j_xx], [0, j, 0, 0], atol=1e-18)


@pytest.mark.parametrize("t1,t2", [(0.3, 1.1), (2.0, 0.4), (PI, PI / 5)])
def test_rotate_coupling_identities(t1, t2):
    j = 0.0123
    r = rotate_coupling(t1, t2, j)
    assert r.j_zz * r.j_xx == pytest.approx(r.j_xz * r.j_zx, rel=1e-12)
    assert r.j_zz**2 + r.j_xz**2 + r.j_zx**2 + r.j_xx**2 == pytest.approx(j * j, rel=1e-12)


def test_zeeman_basis_diagonalizes_the_field():
    for theta in (0.0, 0.4, PI / 2, 2.5):
        u = zeeman_basis(theta)
        field = math.cos(theta) * SIGMA_Z + math.sin(theta) * SIGMA_X
        np.testing.assert_allclose(u.conj().T @ field @ u, SIGMA_Z, atol=1e-14)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-15)


# -- N-qubit Hamiltonians -----------------------------------------------------------------


def test_single_qubit_hamiltonian():
    report = CouplingReport(np.array([5.0]), np.zeros((1, 1)))
    np.testing.assert_array_equal(build_spin_hamiltonian(None, report).dense(), np.diag([2.5, -2.5]))


def test_two_qubit_zz_hamiltonian():
    pm = np.array([[0.0, -0.006], [-0.006, 0.0]])
    h = build_spin_hamiltonian(None, CouplingReport(np.zeros(2), pm))
    assert h.is_diagonal
    np.testing.assert_allclose(h.diagonal, [-0.003, 0.003, 0.003, -0.003], rtol=1e-15)


def test_perpendicular_field_gives_pure_xx():
    j = -0.006
    e_z = 5.0
    asq = AsqParams(e_so=0.0, e_z=e_z, theta=PI / 2)
    cfg = ChainConfig(30.0, (asq, asq))
    report = CouplingReport(np.zeros(2), np.array([[0, j], [j, 0]]))
    h = build_spin_hamiltonian(cfg, report).dense()
    # in the Zeeman eigenbasis the field is diagonal and the coupling is purely XX
    zeeman = 0.5 * e_z * (np.kron(SIGMA_Z, SIGMA_0) + np.kron(SIGMA_0, SIGMA_Z))
    np.testing.assert_allclose(h, 0.5 * j * np.kron(SIGMA_X, SIGMA_X) + zeeman, atol=1e-15)


def _zero_field_hamiltonian(cfg, report):
    """Zero-field ZZ model plus the full Zeeman vector, in the spin basis."""
    n = cfg.n
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    for q, asq in enumerate(cfg.asqs):
        e_spin = report.energies[q] - asq.e_z * math.cos(asq.theta)
        h += 0.5 * e_spin * embed(SIGMA_Z, q, n).toarray()
        zeeman = math.cos(asq.theta) * SIGMA_Z + math.sin(asq.theta) * SIGMA_X
        h += 0.5 * asq.e_z * embed(zeeman, q, n).toarray()
    for i in range(n):
        for k in range(i + 1, n):
            h += 0.5 * report.pair_couplings[i, k] * (embed(SIGMA_Z, i, n) @ embed(SIGMA_Z, k, n)).toarray()
    return h


@pytest.mark.parametrize("thetas", [(0.4, 1.3), (PI / 2, PI / 2), (2.8, 0.0)])
def test_spectrum_invariant_under_zeeman_rotation(thetas):
    asqs = [AsqParams(e_so=0.3, e_z=2.0, theta=t) for t in thetas]
    cfg = ChainConfig(30.0, asqs, (0.1, 0.3))
    report = coupling_report(cfg)
    rotated = build_spin_hamiltonian(cfg, report).dense()
    u = np.kron(zeeman_basis(cfg.asqs[0].theta), zeeman_basis(cfg.asqs[1].theta))
    direct = u.conj().T @ _zero_field_hamiltonian(cfg, report) @ u
    np.testing.assert_allclose(rotated, direct, atol=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(rotated), np.linalg.eigvalsh(_zero_field_hamiltonian(cfg, report)),
                               atol=1e-10)


def test_constructed_hamiltonians_are_hermitian():
    rng = np.random.default_rng(3)
    for _ in range(5):
        asqs = [AsqParams(e_j=rng.uniform(0, 0.2), e_so=rng.uniform(0, 0.3), e_z=rng.uniform(0, 2),
                          theta=rng.uniform(0, PI)) for _ in range(3)]
        cfg = ChainConfig(20.0, asqs, rng.uniform(size=3))
        h = build_spin_hamiltonian(cfg, coupling_report(cfg, include_appendix_a=True)).dense()
        assert np.max(np.abs(h - h.conj().T)) <= 1e-12 * np.max(np.abs(h))


def test_qubit_zero_is_most_significant():
    z0 = embed(SIGMA_Z, 0, 2).toarray().diagonal().real
    np.testing.assert_array_equal(z0, [1, 1, -1, -1])


def test_dimension_guard():
    report = CouplingReport(np.zeros(5), np.zeros((5, 5)))
    with pytest.raises(ValidationError):
        build_spin_hamiltonian(None, report, max_qubits=4)
