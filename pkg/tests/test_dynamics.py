import math

import numpy as np
import pytest

from asqchain.coupling import CouplingReport, coupling_report
from asqchain.dynamics import (
    PulseSchedule,
    Propagator,
    basis_state,
    cphase_gate,
    evolve,
    evolve_hamiltonian,
    ising_hamiltonian,
    ising_quench,
    max_qubits,
    partitioning_couplings,
    product_state,
    spectator_infidelity,
    spectator_report,
)
from asqchain.errors import ValidationError
from asqchain.planner import plan_idle, plan_pair
from asqchain.spin import AsqParams, ChainConfig, build_spin_hamiltonian

PI = math.pi


def zz_report(j, n=2, energies=None):
    pm = np.zeros((n, n))
    pm[0, 1] = pm[1, 0] = j
    return CouplingReport(np.zeros(n) if energies is None else np.asarray(energies, float), pm)


def plus_state(n):
    return product_state([[1, 1]] * n)


# -- propagation ---------------------------------------------------------------------------------


def test_zero_hamiltonian_is_identity():
    h = build_spin_hamiltonian(None, CouplingReport(np.zeros(3), np.zeros((3, 3))))
    psi = plus_state(3)
    np.testing.assert_array_equal(evolve_hamiltonian(h, psi, 17.3), psi)


def test_single_qubit_half_turn():
    h = build_spin_hamiltonian(None, CouplingReport(np.array([1.0]), np.zeros((1, 1))))
    out = evolve_hamiltonian(h, plus_state(1), 0.5)
    assert np.angle(out[1] / out[0]) == pytest.approx(PI, abs=1e-12) or np.angle(out[1] / out[0]) == pytest.approx(
        -PI, abs=1e-12
    )


def test_ten_mhz_coupling_gives_pi_in_25_ns():
    u = Propagator.of(build_spin_hamiltonian(None, zz_report(0.01))).unitary(25.0)
    p = np.angle(np.diag(u))
    assert abs(math.remainder(p[3] - p[2] - p[1] + p[0], 2 * PI)) == pytest.approx(PI, abs=1e-12)


def test_dense_path_is_unitary_and_norm_preserving():
    rng = np.random.default_rng(0)
    asqs = [AsqParams(e_so=0.3, e_z=rng.uniform(0.5, 2), theta=rng.uniform(0, PI)) for _ in range(4)]
    cfg = ChainConfig(30.0, asqs, rng.uniform(size=4))
    h = build_spin_hamiltonian(cfg, coupling_report(cfg))
    prop = Propagator.of(h)
    assert prop.vectors is not None
    u = prop.unitary(3.7)
    assert np.max(np.abs(u.conj().T @ u - np.eye(16))) < 1e-10
    psi = product_state([rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(4)])
    assert np.linalg.norm(prop.apply(psi, 123.0)) == pytest.approx(1.0, abs=1e-12)


def test_energy_is_conserved():
    rng = np.random.default_rng(4)
    h = ising_hamiltonian(
        4, fields=rng.normal(size=4), jzz=partitioning_couplings(rng.normal(size=4)), jxx=np.full((4, 4), 0.3)
    )
    psi = product_state([rng.normal(size=2) for _ in range(4)])
    e0 = np.real(np.vdot(psi, h @ psi))
    for t in (0.3, 5.0, 40.0):
        out = evolve_hamiltonian(h, psi, t)
        assert np.real(np.vdot(out, h @ out)) == pytest.approx(e0, rel=1e-10)


def test_longitudinal_hamiltonian_conserves_populations():
    rng = np.random.default_rng(8)
    h = ising_hamiltonian(5, fields=rng.normal(size=5), jzz=partitioning_couplings(rng.normal(size=5)))
    assert h.is_diagonal
    psi = product_state([rng.normal(size=2) for _ in range(5)])
    out = evolve_hamiltonian(h, psi, 9.1)
    np.testing.assert_allclose(np.abs(out) ** 2, np.abs(psi) ** 2, atol=1e-15)


def test_state_validation():
    h = build_spin_hamiltonian(None, zz_report(0.01))
    with pytest.raises(ValidationError):
        evolve_hamiltonian(h, np.ones(4), 1.0)
    with pytest.raises(ValidationError):
        evolve_hamiltonian(h, np.ones(8) / math.sqrt(8), 1.0)


def test_basis_state_ordering():
    np.testing.assert_array_equal(basis_state([1, -1]), [0, 1, 0, 0])
    with pytest.raises(ValidationError):
        basis_state([1, 0])


def test_dimension_cap():
    with pytest.raises(ValidationError):
        ising_hamiltonian(15)


# -- schedules -----------------------------------------------------------------------------------


def test_schedule_validation():
    with pytest.raises(ValidationError):
        PulseSchedule(())
    with pytest.raises(ValidationError):
        PulseSchedule((((0.0, 0.0), 1.0), ((0.0,), 1.0)))
    with pytest.raises(ValidationError):
        PulseSchedule((((0.0,), 0.0),))
    assert PulseSchedule((((0.0,), 1.0), ((0.5,), 2.5))).duration == 3.5


def test_idle_schedule_leaves_basis_states_alone():
    cfg = ChainConfig.uniform(3, 30.0, e_so=0.3)
    psi = basis_state([1, -1, 1])
    out = evolve(cfg, PulseSchedule(((plan_idle(3).fluxes, 100.0),)), psi)
    np.testing.assert_allclose(np.abs(out), np.abs(psi), atol=1e-15)


def test_pulse_into_pair_and_back_builds_a_cphase():
    cfg = ChainConfig.uniform(3, 30.0, e_so=0.3)
    pair = plan_pair(0, 2, cfg)
    schedule = PulseSchedule(((plan_idle(3).fluxes, 5.0), (pair.fluxes, 1 / (4 * 0.006)), (plan_idle(3).fluxes, 5.0)))
    phases = {}
    for s0 in (1, -1):
        for s2 in (1, -1):
            out = evolve(cfg, schedule, basis_state([s0, 1, s2]))
            phases[(s0, s2)] = np.angle(out[np.argmax(np.abs(out))])
    cond = phases[(1, 1)] - phases[(1, -1)] - phases[(-1, 1)] + phases[(-1, -1)]
    assert abs(math.remainder(cond, 2 * PI)) == pytest.approx(PI, abs=1e-9)


def test_evolve_checks_qubit_count():
    cfg = ChainConfig.uniform(2, 30.0, e_so=0.3)
    with pytest.raises(ValidationError):
        evolve(cfg, PulseSchedule((((0.0, 0.0, 0.0), 1.0),)), basis_state([1, 1]))


# -- CPHASE --------------------------------------------------------------------------------------


def test_ideal_cphase():
    gate = cphase_gate(None, (0, 1), zz_report(-0.006, energies=[0.3, -0.2]))
    assert gate.conditional_phase == pytest.approx(PI, abs=1e-12)
    assert gate.avg_fidelity == pytest.approx(1.0, abs=1e-9)
    assert gate.gate_time == pytest.approx(1 / 0.024)


def test_gate_time_scales_inversely_with_j():
    t1 = cphase_gate(None, (0, 1), zz_report(0.005)).gate_time
    t2 = cphase_gate(None, (0, 1), zz_report(0.010)).gate_time
    assert t1 == 2 * t2
    assert t2 == 25.0


def test_gate_on_a_planned_chain():
    cfg = ChainConfig.uniform(4, 30.0, e_so=0.3)
    planned = plan_pair(1, 3, cfg).apply(cfg)
    gate = cphase_gate(planned, (3, 1), include_triples=False)
    assert gate.avg_fidelity == pytest.approx(1.0, abs=1e-9)
    assert np.max(np.abs(gate.unitary.conj().T @ gate.unitary - np.eye(16))) < 1e-10


def test_three_qubit_spectator_infidelity_near_coefficient():
    gate = cphase_gate(None, (0, 1), spectator_report(3, 0.01))
    reference = 0.1875 * (0.01 * PI) ** 2
    assert reference / 2 < gate.infidelity < 2 * reference


def test_averaged_spectators_are_supported():
    up = cphase_gate(None, (0, 1), spectator_report(4, 0.01), spectators="up")
    avg = cphase_gate(None, (0, 1), spectator_report(4, 0.01), spectators="average")
    assert 0 < avg.infidelity < up.infidelity
    with pytest.raises(ValidationError):
        cphase_gate(None, (0, 1), spectator_report(4, 0.01), spectators="down")


def test_infidelity_scales_quadratically():
    eps = np.geomspace(1e-4, 1e-2, 5)
    inf = [cphase_gate(None, (0, 1), spectator_report(4, e)).infidelity for e in eps]
    assert np.polyfit(np.log(eps), np.log(inf), 1)[0] == pytest.approx(2.0, abs=0.1)
    ns = np.arange(3, 7)
    inf = [cphase_gate(None, (0, 1), spectator_report(int(n), 1e-3)).infidelity for n in ns]
    assert np.polyfit(np.log(ns - 2), np.log(inf), 1)[0] == pytest.approx(2.0, abs=0.1)


def test_cphase_validation():
    with pytest.raises(ValidationError):
        cphase_gate(None, (0, 1), zz_report(0.0))
    with pytest.raises(ValidationError):
        cphase_gate(None, (0, 0), zz_report(0.01))
    with pytest.raises(ValidationError):
        cphase_gate(None, (0, 1))


# -- spectator bounds --------------------------------------------------------------------------------


def test_spectator_infidelity_values():
    assert spectator_infidelity(2, 0.3) == 0.0
    assert spectator_infidelity(2, 0.3, "with-residual") == 0.0
    assert spectator_infidelity(4, 1e-3) == pytest.approx(7.40e-6, rel=1e-3)
    assert spectator_infidelity(4, 1e-3, "with-residual") == pytest.approx(4.69e-5, rel=1e-3)


def test_max_qubits_values():
    assert max_qubits(0.99, 1e-3) == 75
    assert max_qubits(0.99, 1e-4) == 737
    assert max_qubits(1 - 1e-15, 1e-3) == 2


@pytest.mark.parametrize("f", [0.9, 0.99, 0.999])
@pytest.mark.parametrize("eps", [1e-4, 3e-4, 1e-3, 1e-2])
@pytest.mark.parametrize("variant", ["three-body-only", "with-residual"])
def test_max_qubits_is_consistent(f, eps, variant):
    n = max_qubits(f, eps, variant)
    assert spectator_infidelity(n, eps, variant) <= 1 - f < spectator_infidelity(n + 1, eps, variant)


def test_bound_validation():
    with pytest.raises(ValidationError):
        spectator_infidelity(1, 0.1)
    with pytest.raises(ValidationError):
        max_qubits(1.0, 0.1)
    with pytest.raises(ValidationError):
        max_qubits(0.9, 0.0)
    with pytest.raises(ValidationError):
        max_qubits(0.9, 0.1, "bogus")


# -- quench ----------------------------------------------------------------------------------------


def test_pure_zz_quench_keeps_magnetisation():
    rng = np.random.default_rng(1)
    report = CouplingReport(rng.normal(size=4), partitioning_couplings(rng.normal(size=4)))
    res = ising_quench(None, report, [1, -1, -1, 1], 50.0, 20)
    np.testing.assert_allclose(res.z, np.tile([1.0, -1.0, -1.0, 1.0], (21, 1)), atol=1e-15)


def test_xx_flip_flop_transfers_population():
    j = 0.01
    h = ising_hamiltonian(2, jxx=np.array([[0, j], [j, 0]]))
    # H = (J/2) XX couples |ud> and |du> with matrix element J/2: full transfer at t = 1/(2J)
    res = ising_quench(None, h, [1, -1], 1 / (2 * j), 4)
    np.testing.assert_allclose(res.z[:, 0], np.cos(2 * PI * (j / 2) * 2 * res.times), atol=1e-12)
    np.testing.assert_allclose(res.z[-1], [-1.0, 1.0], atol=1e-12)


def test_uniform_partitioning_is_permutation_symmetric():
    jzz = partitioning_couplings([0.2] * 4)
    assert np.all(jzz[~np.eye(4, dtype=bool)] == pytest.approx(0.04))
    h = ising_hamiltonian(4, jzz=jzz, jxx=np.full((4, 4), 0.05))
    a = ising_quench(None, h, [1, -1, 1, 1], 30.0, 6)
    b = ising_quench(None, h, [1, 1, -1, 1], 30.0, 6)
    np.testing.assert_allclose(a.z[:, [0, 1, 2, 3]], b.z[:, [0, 2, 1, 3]], atol=1e-12)


def test_quench_energy_and_rows():
    h = ising_hamiltonian(3, fields=[0.1, 0.2, 0.3], jxx=np.full((3, 3), 0.02))
    res = ising_quench(None, h, [1, -1, 1], 100.0, 10)
    np.testing.assert_allclose(res.energy, res.energy[0], rtol=1e-10)
    rows = list(res.rows())
    assert len(rows) == 11 * 6
    assert [r[:2] for r in rows[:4]] == [(0.0, "Z1"), (0.0, "Z2"), (0.0, "Z3"), (0.0, "Z1Z2")]
    assert rows[1][2] == pytest.approx(-1.0, abs=1e-15)


def test_quench_validation():
    h = ising_hamiltonian(2)
    with pytest.raises(ValidationError):
        ising_quench(None, h, [1, 1], 1.0, 0)
    with pytest.raises(ValidationError):
        ising_quench(None, h, [1, 1], -1.0, 3)
