"""Exact propagation exp(-i H s) psi for real symmetric H via eigendecomposition.

Works on single matrices and on stacks (..., Z, Z); numpy's eigh loops over
the stack one matrix at a time, so a realization's result does not depend on
which batch it was computed in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import NOISE_STREAM, realization_rng

DEFAULT_NOISE_SEGMENTS = 50
# offset standard deviation as a fraction of the linewidth ("fraction" calibration)
DEFAULT_NOISE_SIGMA_FRACTION = 0.5

# "lorentzian": offsets sized so the accumulated phase has variance linewidth * t,
# i.e. the averaged field has a Lorentzian line of the requested FWHM.
# "fraction": offset std is a fixed fraction of the linewidth, whatever the segment count.
LORENTZIAN = "lorentzian"
FRACTION = "fraction"
NOISE_CALIBRATIONS = (LORENTZIAN, FRACTION)


class PropagationError(np.linalg.LinAlgError):
    def __init__(self, message: str, matrix: np.ndarray | None = None):
        if matrix is not None:
            with np.printoptions(precision=17, threshold=50_000):
                message = f"{message}\nmatrix dump:\n{np.array2string(np.asarray(matrix))}"
        super().__init__(message)
        self.matrix = matrix


@dataclass(frozen=True)
class NoiseTrajectory:
    """Piecewise-constant laser frequency offsets (units of 1/t0) over s in [0, 1]."""

    durations: np.ndarray
    offsets: np.ndarray

    def __len__(self) -> int:
        return len(self.durations)


def _as_array(h) -> np.ndarray:
    return np.asarray(getattr(h, "matrix", h), dtype=float)


def eigensystem(h) -> tuple[np.ndarray, np.ndarray]:
    h = _as_array(h)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise PropagationError(f"eigensolver failed: {exc}", h) from exc
    if not np.all(np.isfinite(w)):
        raise PropagationError("eigensolver returned non-finite eigenvalues", h)
    return w, v


def evolve_eigen(w: np.ndarray, v: np.ndarray, psi0: np.ndarray, s: float = 1.0) -> np.ndarray:
    """V exp(-i w s) V^T psi0, batched over leading axes of (w, v)."""
    psi0 = np.asarray(psi0)
    coeff = np.einsum("...ji,...j->...i", v, np.broadcast_to(psi0, w.shape))
    return np.einsum("...ij,...j->...i", v, np.exp(-1j * w * s) * coeff)


def propagate_constant(h, psi0, s: float = 1.0) -> np.ndarray:
    w, v = eigensystem(h)
    return evolve_eigen(w, v, psi0, s)


def noise_sigma(
    linewidth_t0: float,
    jump_count: int = DEFAULT_NOISE_SEGMENTS,
    calibration: str = LORENTZIAN,
    sigma_fraction: float = DEFAULT_NOISE_SIGMA_FRACTION,
) -> float:
    """Standard deviation of the per-segment frequency offset (units of 1/t0)."""
    if calibration == LORENTZIAN:
        # phase variance sum(sigma^2 tau^2) = sigma^2 / M must equal linewidth * 1
        return float(np.sqrt(linewidth_t0 * jump_count))
    if calibration == FRACTION:
        return sigma_fraction * linewidth_t0
    raise ValueError(f"noise calibration must be one of {NOISE_CALIBRATIONS}, got {calibration!r}")


def generate_noise(
    linewidth_t0: float,
    jump_count: int = DEFAULT_NOISE_SEGMENTS,
    seed: int = 0,
    index: int = 0,
    sigma_fraction: float = DEFAULT_NOISE_SIGMA_FRACTION,
    calibration: str = LORENTZIAN,
) -> NoiseTrajectory:
    """Random laser frequency jumps over M equal segments with Gaussian offsets.

    The offsets of realization ``index`` come from its own noise stream, so
    they do not depend on how realizations are batched.
    """
    if linewidth_t0 < 0:
        raise ValueError(f"linewidth must be >= 0, got {linewidth_t0}")
    if jump_count < 1:
        raise ValueError(f"jump_count must be >= 1, got {jump_count}")
    sigma = noise_sigma(linewidth_t0, jump_count, calibration, sigma_fraction)
    if linewidth_t0 == 0:
        return NoiseTrajectory(np.ones(1), np.zeros(1))
    rng = realization_rng(seed, index, NOISE_STREAM)
    offsets = rng.standard_normal(jump_count) * sigma
    return NoiseTrajectory(np.full(jump_count, 1.0 / jump_count), offsets)


def propagate_segments(h, detuning_weights: np.ndarray, psi0, durations, offsets) -> np.ndarray:
    """Apply exp(-i (H - offset * diag(weights)) tau) segment by segment.

    ``h`` may be a stack (n, Z, Z); ``offsets`` then has shape (n, M) or (M,).
    """
    h = _as_array(h)
    offsets = np.asarray(offsets, float)
    psi = np.broadcast_to(np.asarray(psi0, complex), h.shape[:-1]).copy()
    idx = np.arange(h.shape[-1])
    for m, tau in enumerate(np.asarray(durations, float)):
        off = offsets[..., m]
        hm = h.copy()
        hm[..., idx, idx] -= np.multiply.outer(off, detuning_weights)
        psi = propagate_constant(hm, psi, tau)
    return psi


def propagate_noisy(hamiltonian, psi0, noise: NoiseTrajectory) -> np.ndarray:
    """Blockade-mode propagation with the laser detuning shifted per noise segment.

    Every atom outside the ground level picks up the frequency offset once,
    matching the laser-detuning diagonal of the blockade Hamiltonian.
    """
    basis = hamiltonian.basis
    if basis.mode != "blockade":
        raise ValueError("propagate_noisy needs a blockade-mode Hamiltonian")
    weights = basis.excited_counts.astype(float)
    return propagate_segments(hamiltonian.matrix, weights, psi0, noise.durations, noise.offsets)
