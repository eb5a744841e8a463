import itertools
import math

import numpy as np
import pytest

from asqchain.coupling import coupling_report, effective_total_ej, pairwise_coupling
from asqchain.errors import ValidationError
from asqchain.planner import (
    BiasModel,
    crosstalk_monte_carlo,
    crosstalk_scaling,
    currents_for_plan,
    plan_all_to_all,
    plan_idle,
    plan_pair,
    plan_readout,
    plan_tags,
    sample_offsets,
)
from asqchain.spin import AsqParams, ChainConfig, cumulative_phases, wrap_phase

PI = math.pi


def chain(n, e_so=0.3, e_j_asq=0.0, e_j=30.0):
    return ChainConfig.uniform(n, e_j, e_so=e_so, e_j=e_j_asq)


def relative_phases(config, plan):
    return np.array([wrap_phase(p - plan.phase_offset_used) for p in cumulative_phases(plan.fluxes)])


# -- idle -------------------------------------------------------------------------------------


def test_idle_ten_qubits():
    plan = plan_idle(10)
    assert plan.fluxes == (0.25,) + (0.5,) * 9
    np.testing.assert_allclose(cumulative_phases(plan.fluxes), [PI / 2, -PI / 2] * 5, atol=1e-15)
    assert plan.on_qubits == ()


def test_idle_small_chains():
    assert plan_idle(1).fluxes == (0.25,)
    assert plan_idle(1).targets == (PI / 2,)
    np.testing.assert_allclose(plan_idle(3).targets, [PI / 2, -PI / 2, PI / 2])


def test_idle_rejects_empty_chain():
    with pytest.raises(ValidationError):
        plan_idle(0)


def test_uniform_idle_pattern():
    plan = plan_idle(3, pattern="uniform")
    assert plan.fluxes == (0.25, 0.0, 0.0)
    with pytest.raises(ValidationError):
        plan_idle(3, pattern="zigzag")


# -- selective pair -----------------------------------------------------------------------------


def test_pair_three_qubits():
    plan = plan_pair(0, 2, 3)
    assert plan.targets == (0.0, PI / 2, 0.0)
    assert plan.fluxes == (0.0, 0.25, 0.75)
    assert plan.tags == ("ON-0", "OFF+", "ON-0")


def test_pair_ten_qubits_isolates_the_pair():
    cfg = chain(10)
    planned = plan_pair(4, 7, cfg).apply(cfg)
    report = coupling_report(planned)
    for i, j in itertools.combinations(range(10), 2):
        if (i, j) == (4, 7):
            assert abs(report.pair(i, j)) == pytest.approx(0.006, rel=1e-12)
        else:
            assert report.pair(i, j) == 0.0


def test_pair_without_spin_independent_energy_needs_one_iteration():
    plan = plan_pair(0, 1, chain(2))
    assert plan.phase_offset_used == 0.0
    assert plan.converged and plan.iterations == 1


@pytest.mark.parametrize("n,i,j", [(10, 4, 7), (10, 2, 7), (6, 0, 5), (5, 1, 2)])
def test_pair_only_touches_adjacent_loops(n, i, j):
    idle, plan = plan_idle(n), plan_pair(i, j, n)
    adjacent = {i, i + 1, j, j + 1}
    for q in range(n):
        if q not in adjacent:
            assert plan.fluxes[q] == idle.fluxes[q], q


def test_pair_rejects_bad_indices():
    with pytest.raises(ValidationError):
        plan_pair(1, 1, 3)
    with pytest.raises(ValidationError):
        plan_pair(0, 3, 3)


def test_tie_breaking_prefers_smaller_phase():
    # from the alternating idle plan, turning qubit 0 ON costs 0.25 either way
    assert plan_tags(["ON", "OFF"]).tags[0] == "ON-0"


def test_plan_minimises_flux_change():
    idle = plan_idle(6)
    plan = plan_pair(1, 4, 6)
    cost = sum(min(abs(a - b) % 1, 1 - abs(a - b) % 1) for a, b in zip(plan.fluxes, idle.fluxes))
    best = math.inf
    kinds = ["OFF", "ON", "OFF", "OFF", "ON", "OFF"]
    options = [(0.0, 0.5) if k == "ON" else (0.25, 0.75) for k in kinds]
    for turns in itertools.product(*options):
        fl = np.diff(np.concatenate(([0.0], turns))) % 1.0
        c = sum(min(abs(a - b) % 1, 1 - abs(a - b) % 1) for a, b in zip(fl, idle.fluxes))
        best = min(best, c)
    assert cost == pytest.approx(best, abs=1e-15)


# -- plan validity ---------------------------------------------------------------------------------


def _plans(n):
    yield plan_pair(0, n - 1, n)
    yield plan_readout(1, "on-target", n)
    yield plan_readout(1, "off-target", n)
    yield plan_all_to_all(n, "alternating")


@pytest.mark.parametrize("plan", list(_plans(5)), ids=lambda p: "-".join(p.tags))
def test_off_pairs_vanish_and_on_pairs_are_extremal(plan):
    cfg = chain(5)
    report = coupling_report(plan.apply(cfg))
    on = set(plan.on_qubits)
    scale = 0.006
    h = 1e-6
    for i, j in itertools.combinations(range(5), 2):
        if i in on and j in on:
            for k in range(5):
                bumped = [list(plan.fluxes), list(plan.fluxes)]
                bumped[0][k] += h
                bumped[1][k] -= h
                up, down = (abs(pairwise_coupling(cfg.with_fluxes(f), i, j)) for f in bumped)
                assert abs(up - down) / (2 * h) < 1e-6 * scale, (i, j, k)
        else:
            assert abs(report.pair(i, j)) <= 1e-12 * scale


@pytest.mark.parametrize("e_j_asq", [0.1, 0.5, 2.0])
def test_fixed_point_puts_phases_on_their_setpoints(e_j_asq):
    asqs = [AsqParams(e_j=e_j_asq * (1 + 0.1 * q), e_so=0.3) for q in range(6)]
    cfg = ChainConfig(30.0, asqs)
    for plan in (plan_pair(1, 4, cfg), plan_readout(2, "off-target", 6, cfg), plan_idle(6, cfg)):
        planned = plan.apply(cfg)
        offset = effective_total_ej(planned).phase_offset
        assert plan.converged
        assert offset == pytest.approx(plan.phase_offset_used, abs=1e-10)
        psi = np.array([wrap_phase(p - offset) for p in planned.phases()])
        np.testing.assert_allclose(psi, plan.targets, atol=1e-10)


def test_fixed_point_restores_zero_couplings():
    cfg = ChainConfig(30.0, [AsqParams(e_j=1.0, e_so=0.3)] * 4)
    report = coupling_report(plan_pair(0, 3, cfg).apply(cfg))
    for i, j in [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]:
        assert abs(report.pair(i, j)) < 1e-12 * 0.006


def test_plan_fluxes_reproduce_targets():
    cfg = ChainConfig(30.0, [AsqParams(e_j=0.3, e_so=0.3)] * 5)
    plan = plan_pair(1, 3, cfg)
    np.testing.assert_allclose(relative_phases(cfg, plan), plan.targets, atol=1e-10)
    assert all(0.0 <= f < 1.0 for f in plan.fluxes)


# -- all-to-all and readout -----------------------------------------------------------------------------


def test_all_to_all_uniform_signs():
    report = coupling_report(plan_all_to_all(3).apply(chain(3)))
    values = [report.pair(i, j) for i, j in itertools.combinations(range(3), 2)]
    assert all(v < 0 for v in values)
    assert values == pytest.approx([values[0]] * 3, rel=1e-14)


def test_all_to_all_alternating_signs():
    report = coupling_report(plan_all_to_all(3, "alternating").apply(chain(3)))
    assert report.pair(0, 2) < 0
    assert report.pair(0, 1) > 0 and report.pair(1, 2) > 0


def test_all_to_all_from_uniform_idle_changes_only_loop_one():
    idle, plan = plan_idle(2, pattern="uniform"), plan_all_to_all(2)
    assert plan.fluxes[1] == idle.fluxes[1]
    assert abs(plan.fluxes[0] - idle.fluxes[0]) == 0.25


def test_all_to_all_validation():
    with pytest.raises(ValidationError):
        plan_all_to_all(1)
    with pytest.raises(ValidationError):
        plan_all_to_all(3, "random")


def test_readout_off_target():
    plan = plan_readout(4, "off-target", 10)
    assert abs(abs(plan.targets[4]) - PI / 2) < 1e-15
    assert plan.on_qubits == tuple(q for q in range(10) if q != 4)


def test_readout_on_target():
    plan = plan_readout(4, "on-target", 10)
    assert plan.on_qubits == (4,)
    assert plan.targets[4] in (0.0, PI)
    assert plan_readout(0, "on-target", 1).on_qubits == (0,)


def test_readout_validation():
    with pytest.raises(ValidationError):
        plan_readout(3, "on-target", 3)
    with pytest.raises(ValidationError):
        plan_readout(0, "sideways", 3)


def test_plan_serialises():
    d = plan_pair(0, 2, 3).to_dict()
    assert d["fluxes_phi0"] == [0.0, 0.25, 0.75]
    assert d["tags"] == ["ON-0", "OFF+", "ON-0"]


# -- Monte Carlo ---------------------------------------------------------------------------------


def test_zero_noise_leaves_off_pairs_exactly_uncoupled():
    cfg = chain(6)
    stats = crosstalk_monte_carlo(cfg, plan_pair(1, 4, cfg), 0.0, 5, seed=3)
    assert not np.any(stats.on_off) and not np.any(stats.off_off)
    np.testing.assert_allclose(stats.on_on, 0.006, rtol=1e-12)


def test_classes_partition_all_pairs():
    cfg = chain(7)
    stats = crosstalk_monte_carlo(cfg, plan_pair(2, 5, cfg), 1e-3, 4, seed=1)
    assert len(stats.pair_class) == 21
    assert stats.on_on.size + stats.on_off.size + stats.off_off.size == 21 * 4
    assert (stats.on_on.size, stats.on_off.size) == (4, 10 * 4)


def test_monte_carlo_is_deterministic_and_order_free():
    cfg = chain(5)
    plan = plan_pair(0, 3, cfg)
    a = crosstalk_monte_carlo(cfg, plan, 1e-3, 20, seed=11)
    b = crosstalk_monte_carlo(cfg, plan, 1e-3, 20, seed=11)
    np.testing.assert_array_equal(a.couplings, b.couplings)
    # a sample's offsets depend only on (seed, sample)
    np.testing.assert_array_equal(sample_offsets(11, 7, 5, 1e-3), sample_offsets(11, 7, 5, 1e-3))
    shorter = crosstalk_monte_carlo(cfg, plan, 1e-3, 8, seed=11)
    np.testing.assert_array_equal(shorter.couplings, a.couplings[:8])
    assert not np.array_equal(crosstalk_monte_carlo(cfg, plan, 1e-3, 20, seed=12).couplings, a.couplings)


def test_offsets_are_bounded():
    off = sample_offsets(0, 0, 1000, 2e-3)
    assert np.all(np.abs(off) <= 2e-3)


def test_monte_carlo_scaling_slopes():
    cfg = chain(10)
    scaling = crosstalk_scaling(cfg, plan_pair(2, 7, cfg), np.geomspace(1e-4, 1e-2, 4), 200, seed=5)
    assert scaling["on_off_slope"] == pytest.approx(1.0, abs=0.1)
    assert scaling["off_off_slope"] == pytest.approx(2.0, abs=0.15)


def test_monte_carlo_rows():
    cfg = chain(3)
    stats = crosstalk_monte_carlo(cfg, plan_pair(0, 2, cfg), 1e-3, 2, seed=0)
    rows = list(stats.rows())
    assert len(rows) == 6
    assert rows[0][:4] == (0, 1, 2, "on_off")


def test_monte_carlo_validation():
    cfg = chain(3)
    plan = plan_pair(0, 2, cfg)
    with pytest.raises(ValidationError):
        crosstalk_monte_carlo(cfg, plan, -1e-3, 10)
    with pytest.raises(ValidationError):
        crosstalk_monte_carlo(cfg, plan, 1e-3, 0)
    with pytest.raises(ValidationError):
        crosstalk_monte_carlo(chain(4), plan, 1e-3, 10)


# -- bias lines --------------------------------------------------------------------------------


def test_currents_identity_mutual():
    model = BiasModel(np.eye(2), np.zeros(2))
    np.testing.assert_allclose(currents_for_plan(model, plan_idle(2)), [0.25, 0.5])


def test_currents_diagonal_slope():
    model = BiasModel.diagonal(1, 0.01)
    np.testing.assert_allclose(currents_for_plan(model, plan_idle(1)), [25.0], rtol=1e-14)


def test_currents_round_trip_with_crosstalk():
    rng = np.random.default_rng(2)
    n = 8
    mutual = 0.01 * (np.eye(n) + 0.01 * rng.uniform(-1, 1, (n, n)) * (1 - np.eye(n)))
    model = BiasModel(mutual, rng.uniform(-0.3, 0.3, n))
    plan = plan_pair(2, 6, n)
    currents = currents_for_plan(model, plan)
    assert np.max(np.abs(model.fluxes(currents) - plan.fluxes)) < 1e-12
    assert model.dominance_ratio > 10


def test_bias_model_validation():
    with pytest.raises(ValidationError):
        BiasModel(np.ones((2, 2)), np.zeros(2))
    with pytest.raises(ValidationError):
        BiasModel(np.eye(2), np.zeros(3))
    with pytest.raises(ValidationError):
        currents_for_plan(BiasModel(np.eye(2), np.zeros(2)), plan_idle(3))
