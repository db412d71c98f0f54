import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from muxctl.numerics import (
    MAX_EIGH_DIM,
    NonHermitianInput,
    NormDrift,
    check_hermitian,
    eigh,
    equal_up_to_phase,
    evolve,
    expm_hermitian,
    hz,
    n_steps,
    propagate_midpoint,
    state_overlap,
    to_hz,
    wrap_phase,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


class TestUnits:
    def test_roundtrip(self):
        assert to_hz(hz(5e9)) == pytest.approx(5e9, rel=1e-15)

    def test_hz_is_angular(self):
        assert hz(1.0) == pytest.approx(2 * math.pi)

    @pytest.mark.parametrize("x,expected", [(math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi, math.pi), (0.5, 0.5), (-0.5 - 2 * math.pi, -0.5)])
    def test_wrap_phase(self, x, expected):
        assert wrap_phase(x) == pytest.approx(expected, abs=1e-12)


class TestEigh:
    def test_diagonal(self):
        w, v = eigh(np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(w, [1, 2, 3])
        np.testing.assert_allclose(v, np.eye(3), atol=1e-15)

    def test_pauli_x(self):
        w, _ = eigh(SX)
        np.testing.assert_allclose(w, [-1, 1], atol=1e-15)

    def test_random_residuals(self):
        h = random_hermitian(50, 1)
        w, v = eigh(h)
        norm = np.linalg.norm(h, 2)
        assert np.max(np.abs(h @ v - v * w)) <= 1e-9 * norm
        assert np.max(np.abs(v.conj().T @ v - np.eye(50))) <= 1e-10
        assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - h)) <= 1e-9 * norm
        assert np.all(np.diff(w) >= 0)

    def test_gauge_first_component_real_positive(self):
        _, v = eigh(random_hermitian(12, 3))
        for k in range(12):
            j = np.flatnonzero(np.abs(v[:, k]) > 1e-12)[0]
            assert abs(v[j, k].imag) < 1e-12 and v[j, k].real > 0

    def test_degenerate_is_deterministic(self):
        # two different unitary conjugations of the same degenerate spectrum
        rng = np.random.default_rng(0)
        d = np.diag([0.0, 1.0, 1.0, 1.0, 2.0])
        q, _ = np.linalg.qr(rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)))
        h = q @ d @ q.conj().T
        h = (h + h.conj().T) / 2
        _, v1 = eigh(h)
        _, v2 = eigh(h.copy())
        np.testing.assert_array_equal(v1, v2)

    def test_non_hermitian_rejected(self):
        with pytest.raises(NonHermitianInput):
            eigh(np.array([[0, 1], [0, 0]], dtype=complex))
        with pytest.raises(NonHermitianInput):
            check_hermitian(np.array([[1, 1e-9], [0, 1]], dtype=complex))

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            eigh(np.eye(MAX_EIGH_DIM + 1))


class TestEvolve:
    def test_zero_hamiltonian(self):
        psi = np.array([0.6, 0.8j])
        out = evolve(lambda t: np.zeros((2, 2)), psi, (0.0, 3.0), 0.1)
        np.testing.assert_allclose(out, psi, atol=1e-15)

    def test_resonant_rabi_transfer(self):
        om = hz(10e6)
        h = 0.5 * om * SX
        out = evolve(lambda t: h, np.array([1, 0], dtype=complex), (0, math.pi / om), 1e-10)
        assert abs(out[1]) ** 2 == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("ratio", [1.0, 0.5, 2.0])
    def test_detuned_rabi(self, ratio):
        om = hz(10e6)
        delta = ratio * om
        h = np.array([[0, om / 2], [om / 2, -delta]], dtype=complex)
        oe = math.hypot(om, delta)
        for t in (0.3 / oe * 2 * math.pi, 0.77 / oe * 2 * math.pi):
            out = evolve(lambda _: h, np.array([1, 0], dtype=complex), (0, t), 1e-10)
            expected = (om / oe) ** 2 * math.sin(oe * t / 2) ** 2
            assert abs(out[1]) ** 2 == pytest.approx(expected, abs=1e-6)

    def test_matches_spectral_exponential(self):
        h = random_hermitian(8, 5) * hz(50e6)
        psi0 = np.zeros(8, dtype=complex)
        psi0[0] = 1
        t = 40e-9
        ref = expm(-1j * h * t) @ psi0
        out = evolve(lambda _: h, psi0, (0, t), 1e-11)
        assert state_overlap(out, ref) >= 1 - 1e-7
        np.testing.assert_allclose(expm_hermitian(h, t), expm(-1j * h * t), atol=1e-10)

    def test_batch_columns_independent(self):
        h = random_hermitian(4, 2) * 1e8
        cols = np.eye(4, dtype=complex)
        batch = evolve(lambda _: h, cols, (0, 1e-8), 1e-11)
        for k in range(4):
            single = evolve(lambda _: h, cols[:, k], (0, 1e-8), 1e-11)
            np.testing.assert_allclose(batch[:, k], single, atol=1e-13)

    def test_norm_drift_raised_for_coarse_step(self):
        h = random_hermitian(4, 9) * 1e9
        with pytest.raises(NormDrift):
            evolve(lambda _: h, np.eye(4, dtype=complex)[:, 0], (0, 1e-7), 1e-9)

    def test_halving_dt_converged(self):
        om = hz(8e6)
        h = lambda t: 0.5 * om * math.sin(math.pi * t / 100e-9) ** 2 * SX  # noqa: E731
        a = evolve(h, np.array([1, 0], dtype=complex), (0, 100e-9), 0.2e-9)
        b = evolve(h, np.array([1, 0], dtype=complex), (0, 100e-9), 0.1e-9)
        assert abs(abs(a[1]) ** 2 - abs(b[1]) ** 2) < 1e-6

    def test_step_count_hits_end(self):
        assert n_steps((0.0, 1.0), 0.3) == 4
        assert n_steps((0.0, 1.0), 0.25) == 4

    def test_midpoint_matches_rk4(self):
        om = hz(5e6)
        h = lambda t: np.array([[0, 0.5 * om * t / 1e-7], [0.5 * om * t / 1e-7, hz(1e6)]], dtype=complex)  # noqa: E731
        psi0 = np.array([1, 0], dtype=complex)
        a = propagate_midpoint(h, psi0, (0, 1e-7), 0.05e-9)
        b = evolve(h, psi0, (0, 1e-7), 0.05e-9)
        assert state_overlap(a, b) >= 1 - 1e-9

    def test_equal_up_to_phase(self):
        u = expm_hermitian(random_hermitian(3, 4), 0.7)
        assert equal_up_to_phase(u, np.exp(1.3j) * u) < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=10_000))
def test_eigh_reconstruction_property(n, seed):
    h = random_hermitian(n, seed)
    w, v = eigh(h)
    assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - h)) <= 1e-9 * max(1.0, np.linalg.norm(h, 2))


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0.1, max_value=5.0), st.integers(min_value=0, max_value=1000))
def test_evolution_preserves_norm(t_ns, seed):
    h = random_hermitian(5, seed) * 1e8
    psi0 = np.ones(5, dtype=complex) / math.sqrt(5)
    out = evolve(lambda _: h, psi0, (0, t_ns * 1e-9), 5e-12)
    assert abs(np.linalg.norm(out) - 1) <= 1e-8
