"""Reductions of final state vectors to measured quantities."""
from __future__ import annotations

import numpy as np

from .basis import FOERSTER, Basis, Level

# linear interpolation at pi needs a fine grid
MAX_PI_SPACING = 0.1


def _populations(psi) -> np.ndarray:
    psi = np.asarray(psi)
    return (psi * psi.conj()).real


def rho_fraction(psi, basis: Basis) -> np.ndarray:
    """Fraction of atoms in |1>: sum_k k/(2N) |a_k|^2. Batched over leading axes of psi."""
    if basis.mode != FOERSTER:
        raise ValueError("rho_fraction is defined on a Foerster-mode basis")
    weights = basis.pair_counts / (2.0 * basis.atom_count)
    return _populations(psi) @ weights


def excitation_probabilities(psi, basis: Basis) -> np.ndarray:
    """P_k for k = 0..N: probability that exactly k atoms are outside the ground level."""
    n_exc = basis.excited_counts
    onehot = (n_exc[:, None] == np.arange(basis.atom_count + 1)[None, :]).astype(float)
    return _populations(psi) @ onehot


def lower_level_fraction(psi, basis: Basis) -> np.ndarray:
    """Fraction of atoms in |1> for any basis mode; equals rho_fraction in Foerster mode."""
    weights = np.count_nonzero(basis.labels == Level.LOWER, axis=1) / basis.atom_count
    return _populations(psi) @ weights


def qpg_fidelity(theta0, rho, at: str = "pi", window: tuple[float, float] = (np.pi / 2, 2 * np.pi)) -> float:
    """Phase-gate fidelity F = 1 - 2 rho2 from an amplitude curve rho2(theta0).

    ``at="pi"`` interpolates the curve linearly at theta0 = pi. ``at="minimum"``
    reads the first local minimum of the curve after theta0 = pi/2 (the first
    oscillation minimum around pi), falling back to the smallest value inside
    ``window`` when the curve has no interior minimum there.
    """
    theta0 = np.asarray(theta0, float)
    rho = np.asarray(rho, float)
    order = np.argsort(theta0)
    theta0, rho = theta0[order], rho[order]
    if at == "pi":
        if theta0[0] > np.pi or theta0[-1] < np.pi:
            raise ValueError(f"theta0 grid [{theta0[0]:g}, {theta0[-1]:g}] does not cover pi")
        i = int(np.searchsorted(theta0, np.pi))
        if theta0[i] != np.pi and theta0[i] - theta0[i - 1] > MAX_PI_SPACING:
            raise ValueError(f"theta0 grid spacing around pi exceeds {MAX_PI_SPACING}")
        return float(1.0 - 2.0 * np.interp(np.pi, theta0, rho))
    if at == "minimum":
        theta_min, rho_min = first_minimum(theta0, rho, window)
        return float(1.0 - 2.0 * rho_min)
    raise ValueError(f"unknown fidelity reading {at!r}; expected 'pi' or 'minimum'")


def first_minimum(theta0, rho, window=(np.pi / 2, 2 * np.pi)) -> tuple[float, float]:
    """First local minimum of rho(theta0) past window[0]; refined by a parabola through 3 points."""
    theta0 = np.asarray(theta0, float)
    rho = np.asarray(rho, float)
    lo, hi = window
    if theta0[0] > lo or theta0[-1] < np.pi:
        raise ValueError(f"theta0 grid [{theta0[0]:g}, {theta0[-1]:g}] does not cover [{lo:g}, pi]")
    start = int(np.searchsorted(theta0, lo))
    for i in range(max(start, 1), len(theta0) - 1):
        if rho[i] <= rho[i - 1] and rho[i] < rho[i + 1]:
            x, y = theta0[i - 1 : i + 2], rho[i - 1 : i + 2]
            a, b, c = np.polyfit(x, y, 2)
            if a > 0:
                xm = -b / (2 * a)
                if x[0] <= xm <= x[2]:
                    return float(xm), float(np.polyval((a, b, c), xm))
            return float(theta0[i]), float(rho[i])
    mask = (theta0 >= lo) & (theta0 <= hi)
    i = int(np.flatnonzero(mask)[np.argmin(rho[mask])])
    return float(theta0[i]), float(rho[i])
