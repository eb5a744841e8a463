import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asqchain import kernels
from asqchain.coupling import spin_configurations

PI = np.pi


def coupling_case(rng, n=6, batch=20):
    return rng.uniform(0.1, 0.5, n), rng.uniform(0.0, 0.5, n), 10.0, rng.uniform(0.0, 1.0, (batch, n))


def test_coupling_matrices_backends_agree():
    args = coupling_case(np.random.default_rng(1))
    np.testing.assert_allclose(kernels.coupling_matrices_loops(*args), kernels.coupling_matrices_numpy(*args),
                               rtol=1e-12, atol=1e-15)


def test_coupling_matrix_single_sample_by_hand():
    # two qubits, no junction term on the ASQs: E~ = E_J, psi_i = theta_i
    out = kernels.coupling_matrices_numpy(np.array([0.3, 0.4]), np.zeros(2), 10.0, np.array([[0.0, 0.0]]))
    assert out[0, 0, 1] == pytest.approx(-2 * 0.3 * 0.4 / 10.0)
    assert out[0, 0, 0] == 0.0
    off = kernels.coupling_matrices_loops(np.array([0.3, 0.4]), np.zeros(2), 10.0, np.array([[0.25, 0.0]]))
    assert off[0, 0, 1] == 0.0


def test_walsh_backends_agree_and_invert():
    values = np.random.default_rng(2).normal(size=1 << 7)
    a = kernels.walsh_coefficients_loops(values.copy())
    b = kernels.walsh_coefficients_numpy(values.copy())
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
    # with the 1/size normalisation, applying it twice divides by size
    np.testing.assert_allclose(kernels.walsh_coefficients_numpy(b) * (1 << 7), values, atol=1e-12)
    assert b[0] == pytest.approx(values.mean())


def test_diagonal_energies_backends_agree():
    rng = np.random.default_rng(3)
    n = 7
    pairs = rng.normal(size=(n, n)) * 1e-3
    pairs = np.triu(pairs, 1) + np.triu(pairs, 1).T
    triples = np.array([(i, i + 1, i + 2) for i in range(n - 2)], dtype=np.int64)
    args = (n, rng.normal(size=n), pairs, triples, rng.normal(size=n - 2) * 1e-5)
    np.testing.assert_allclose(kernels.diagonal_energies_loops(*args),
                               kernels.diagonal_energies_numpy(*args), rtol=1e-12, atol=1e-15)


def test_diagonal_energies_single_field():
    # one qubit, one field: up has +E/2, down has -E/2 (or the reverse); spread is |E|
    e = kernels.diagonal_energies_numpy(1, np.array([0.4]), np.zeros((1, 1)),
                                        np.zeros((0, 3), dtype=np.int64), np.zeros(0))
    assert abs(e[0] - e[1]) == pytest.approx(0.4)


def test_oracle_backends_agree():
    rng = np.random.default_rng(4)
    nq = 4
    spins = spin_configurations(nq).astype(float)
    args = (10.0, rng.uniform(0, 0.3, nq), rng.uniform(0, 0.3, nq), np.zeros(nq),
            2 * PI * rng.uniform(size=nq), spins, 1e-12)
    ea, pa, oka = kernels.oracle_minima_loops(*args)
    eb, pb, okb = kernels.oracle_minima_numpy(*args)
    assert oka.all() and okb.all()
    np.testing.assert_allclose(ea, eb, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(np.angle(np.exp(1j * (pa - pb))), 0.0, atol=1e-8)


def test_oracle_finds_a_far_away_well():
    # E_J,i ~ E_J pushes the minimum near pi; the grid fallback must catch it
    spins = np.array([[1.0]])
    for fn in (kernels.oracle_minima_loops, kernels.oracle_minima_numpy):
        e, phi, ok = fn(1.0, np.array([0.9]), np.array([0.5]), np.zeros(1), np.array([0.3]), spins, 1e-12)
        assert ok.all()
        grid = np.linspace(-PI, PI, 200001)
        u = 2 * np.sin(grid / 2) ** 2 + 0.9 * np.cos(grid + 0.3) - 0.5 * np.sin(grid + 0.3)
        assert e[0] == pytest.approx(u.min(), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=8, max_size=8), st.floats(0.1, 3.0))
def test_walsh_is_linear(values, scale):
    v = np.array(values)
    np.testing.assert_allclose(kernels.walsh_coefficients_numpy(scale * v),
                               scale * kernels.walsh_coefficients_numpy(v), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_coupling_matrices_are_periodic_in_flux(seed):
    e_so, e_j_asq, e_j, fluxes = coupling_case(np.random.default_rng(seed), n=4, batch=3)
    a = kernels.coupling_matrices_numpy(e_so, e_j_asq, e_j, fluxes)
    b = kernels.coupling_matrices_numpy(e_so, e_j_asq, e_j, fluxes + 1.0)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("0", "numba")])
def test_environment_flag_selects_backend(flag, expected):
    env = dict(os.environ, ASQCHAIN_DISABLE_NUMBA=flag)
    code = "import asqchain, asqchain.kernels as k; print(asqchain.backend(), k.oracle_minima.__name__)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, kernel = out.stdout.split()
    assert name == expected
    assert kernel.endswith("_numpy" if expected == "numpy" else "_loops")
