import math

import numpy as np
import pytest

from rydberg_mc.analytic import rho2_analytic
from rydberg_mc.basis import BLOCKADE, FOERSTER, enumerate_basis
from rydberg_mc.hamiltonian import CouplingParams, build_blockade_hamiltonian, build_foerster_hamiltonian
from rydberg_mc.observables import rho_fraction
from rydberg_mc.propagator import (
    FRACTION,
    LORENTZIAN,
    PropagationError,
    eigensystem,
    generate_noise,
    noise_sigma,
    propagate_constant,
    propagate_noisy,
    propagate_segments,
)

ON_AXIS = np.array([[0.0, 0.0, -0.5], [0.0, 0.0, 0.5]])


def rk4(h, psi0, s=1.0, dt=1e-4):
    """Classical 4th-order Runge-Kutta for i dpsi/ds = H psi."""
    psi = np.asarray(psi0, complex)
    f = lambda y: -1j * (h @ y)  # noqa: E731
    steps = int(round(s / dt))
    for _ in range(steps):
        k1 = f(psi)
        k2 = f(psi + 0.5 * dt * k1)
        k3 = f(psi + 0.5 * dt * k2)
        k4 = f(psi + dt * k3)
        psi = psi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def _random_symmetric(n, rng, scale=3.0):
    a = rng.normal(size=(n, n)) * scale
    return (a + a.T) / 2


def _random_state(n, rng):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("n", [3, 7])
def test_matches_rk4(n):
    rng = np.random.default_rng(n)
    h = _random_symmetric(n, rng)
    psi0 = _random_state(n, rng)
    exact = propagate_constant(h, psi0)
    assert np.max(np.abs(exact - rk4(h, psi0))) < 1e-6


def test_zero_hamiltonian_is_identity():
    psi0 = _random_state(5, np.random.default_rng(0))
    np.testing.assert_allclose(propagate_constant(np.zeros((5, 5)), psi0), psi0, atol=1e-15)


def test_unitarity_and_composition():
    rng = np.random.default_rng(1)
    for n in (3, 19, 51):
        h = _random_symmetric(n, rng, scale=10.0)
        psi0 = _random_state(n, rng)
        psi = propagate_constant(h, psi0, 0.7)
        assert abs(np.linalg.norm(psi) - 1) < 1e-10
        two_step = propagate_constant(h, propagate_constant(h, psi0, 0.3), 0.4)
        np.testing.assert_allclose(two_step, psi, atol=1e-10)


def test_batched_equals_single():
    rng = np.random.default_rng(2)
    hs = np.stack([_random_symmetric(7, rng) for _ in range(4)])
    psi0 = _random_state(7, rng)
    batch = propagate_constant(hs, psi0)
    for k in range(4):
        np.testing.assert_array_equal(batch[k], propagate_constant(hs[k], psi0))


def test_two_atom_closed_form_grid():
    b = enumerate_basis(FOERSTER, 2)
    psi0 = np.eye(3)[b.initial_index()]
    worst = 0.0
    for theta in np.linspace(0, 10, 21):
        for delta in np.linspace(-20, 20, 21):
            # on-axis pair with c_geom = 2: Omega_ab t0 = theta0/sqrt(2), the closed form's theta is sqrt(2) Omega t0
            h = build_foerster_hamiltonian(b, ON_AXIS, CouplingParams(theta0=theta, delta_t0=delta), c_geom=2.0)
            rho = rho_fraction(propagate_constant(h, psi0), b)
            worst = max(worst, abs(rho - rho2_analytic(theta, delta)))
    assert worst < 1e-8


def test_eigensystem_failure_dumps_matrix():
    bad = np.array([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(PropagationError, match="matrix dump"):
        eigensystem(bad)


def test_noise_zero_linewidth():
    nt = generate_noise(0.0)
    assert len(nt) == 1
    assert nt.offsets[0] == 0.0 and nt.durations[0] == 1.0


def test_noise_fraction_calibration_std():
    # 2pi linewidth, 50 jumps, std = linewidth/2 = pi
    offs = np.concatenate([generate_noise(2 * math.pi, 50, 0, i, calibration=FRACTION).offsets for i in range(200)])
    assert offs.size == 10_000
    assert abs(offs.std(ddof=1) / math.pi - 1) < 0.03


def test_noise_lorentzian_phase_variance():
    # accumulated phase sum(offset * tau) has variance equal to the linewidth
    lw = 4 * math.pi
    phases = [np.sum(generate_noise(lw, 50, 3, i).offsets) / 50 for i in range(4000)]
    assert abs(np.var(phases, ddof=1) / lw - 1) < 0.06
    assert noise_sigma(lw, 50, LORENTZIAN) == pytest.approx(math.sqrt(lw * 50))


def test_noise_deterministic_and_durations():
    a = generate_noise(2.0, 40, seed=9, index=5)
    b = generate_noise(2.0, 40, seed=9, index=5)
    np.testing.assert_array_equal(a.offsets, b.offsets)
    assert a.durations.sum() == pytest.approx(1.0)
    assert not np.array_equal(a.offsets, generate_noise(2.0, 40, seed=9, index=6).offsets)
    with pytest.raises(ValueError):
        generate_noise(-1.0)
    with pytest.raises(ValueError):
        noise_sigma(1.0, 10, "white")


def _blockade(theta0=16.0, area=math.pi / math.sqrt(2)):
    b = enumerate_basis(BLOCKADE, 2)
    h = build_blockade_hamiltonian(b, ON_AXIS, CouplingParams(theta0=theta0, laser_area=area), c_geom=2.0)
    return h, np.eye(len(b))[b.initial_index()]


def test_noisy_zero_linewidth_equals_constant():
    h, psi0 = _blockade()
    np.testing.assert_allclose(propagate_noisy(h, psi0, generate_noise(0.0)), propagate_constant(h, psi0), atol=1e-14)


def test_noisy_unitarity_over_100_segments():
    h, psi0 = _blockade()
    psi = propagate_noisy(h, psi0, generate_noise(4 * math.pi, 100, 0, 0))
    assert abs(np.linalg.norm(psi) - 1) < 1e-8


def test_segments_with_constant_offset_match_shifted_hamiltonian():
    h, psi0 = _blockade()
    weights = np.count_nonzero(h.basis.labels != 0, axis=1).astype(float)
    shifted = h.matrix - 0.8 * np.diag(weights)
    psi = propagate_segments(h.matrix, weights, psi0, np.full(4, 0.25), np.full(4, 0.8))
    np.testing.assert_allclose(psi, propagate_constant(shifted, psi0), atol=1e-12)
