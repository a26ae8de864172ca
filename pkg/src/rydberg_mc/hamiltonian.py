"""Dense collective Hamiltonians in units of 1/t0.

A realization contributes only through the angular-radial factors g_ab of
its atom pairs. Everything else (which basis states a pair flip connects) is
fixed by the basis and precomputed once in :class:`CouplingTemplate`, so a
batch of realizations is assembled with a single scatter.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .basis import BLOCKADE, FOERSTER, Basis, Level

FULL = "full"
SCALAR = "scalar"
DDI_MODES = (FULL, SCALAR)

# kinds of pair transitions
FOERSTER_FLIP = 0  # |22> <-> |13>, |31>
EXCHANGE_21 = 1  # |21> <-> |12>, strength ~ d21^2
EXCHANGE_23 = 2  # |23> <-> |32>, strength ~ d23^2

SINGULAR_DISTANCE = 1e-6


class SingularConfigurationError(ArithmeticError):
    """Two atoms closer than SINGULAR_DISTANCE * scale."""


@dataclass(frozen=True)
class CouplingParams:
    theta0: float = 1.0
    delta_t0: float = 0.0
    ddi_mode: str = FULL
    dipole_ratio: float = 1.0
    laser_area: float = math.pi
    delta_laser_t0: float = 0.0

    def __post_init__(self):
        if self.theta0 < 0:
            raise ValueError(f"coupling.theta0 must be >= 0, got {self.theta0}")
        if self.dipole_ratio <= 0:
            raise ValueError(f"coupling.dipole_ratio must be > 0, got {self.dipole_ratio}")
        if self.laser_area < 0:
            raise ValueError(f"coupling.laser_area must be >= 0, got {self.laser_area}")
        if self.ddi_mode not in DDI_MODES:
            raise ValueError(f"coupling.ddi must be one of {DDI_MODES}, got {self.ddi_mode!r}")


@dataclass(frozen=True)
class HamiltonianMatrix:
    basis: Basis
    matrix: np.ndarray


def atom_pairs(n_atoms: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n_atoms), 2))


def pair_coupling(pos_a, pos_b, scale: float = 1.0, ddi_mode: str = FULL) -> float:
    """g_ab = (scale/R)^3 (1 - 3 Z^2/R^2), or (scale/R)^3 for the scalar interaction."""
    g = pair_couplings(np.stack([np.asarray(pos_a, float), np.asarray(pos_b, float)]), scale, ddi_mode)
    return float(g[0])


def pair_couplings(positions: np.ndarray, scale: float = 1.0, ddi_mode: str = FULL) -> np.ndarray:
    """Couplings for every pair (a < b) of every realization.

    positions has shape (..., N, 3); the result has shape (..., N(N-1)/2)
    with pairs ordered as :func:`atom_pairs`.
    """
    positions = np.asarray(positions, float)
    a, b = np.triu_indices(positions.shape[-2], 1)
    d = positions[..., b, :] - positions[..., a, :]
    r2 = np.einsum("...i,...i->...", d, d)
    if np.any(r2 < (SINGULAR_DISTANCE * scale) ** 2):
        raise SingularConfigurationError("coincident atoms: pair distance below the singular threshold")
    g = (scale * scale / r2) ** 1.5
    if ddi_mode == FULL:
        g = g * (1.0 - 3.0 * d[..., 2] ** 2 / r2)
    elif ddi_mode != SCALAR:
        raise ValueError(f"unknown ddi mode {ddi_mode!r}")
    return g


class CouplingTemplate:
    """Sparse transition lists of a basis: DDI pair flips and laser flips."""

    def __init__(self, basis: Basis):
        self.basis = basis
        self.size = len(basis)
        self.pairs = atom_pairs(basis.atom_count)
        links = set()
        flips = {
            (2, 2): [((1, 3), FOERSTER_FLIP), ((3, 1), FOERSTER_FLIP)],
            (2, 1): [((1, 2), EXCHANGE_21)],
            (1, 2): [((2, 1), EXCHANGE_21)],
            (2, 3): [((3, 2), EXCHANGE_23)],
            (3, 2): [((2, 3), EXCHANGE_23)],
        }
        for i, s in enumerate(basis.states):
            for p, (a, b) in enumerate(self.pairs):
                for (la, lb), kind in flips.get((s[a], s[b]), ()):
                    t = list(s)
                    t[a], t[b] = la, lb
                    j = basis.index.get(tuple(t))
                    if j is not None:
                        links.add((min(i, j), max(i, j), p, kind))
        rows, cols, pair_ids, kinds = (np.array(c, dtype=np.intp) for c in zip(*sorted(links))) if links else [
            np.zeros(0, dtype=np.intp)
        ] * 4
        self.ddi_rows, self.ddi_cols, self.ddi_pair, self.ddi_kind = rows, cols, pair_ids, kinds

        lrows, lcols = [], []
        if basis.mode == BLOCKADE:
            for i, s in enumerate(basis.states):
                for a, level in enumerate(s):
                    if level == Level.GROUND:
                        t = list(s)
                        t[a] = int(Level.MIDDLE)
                        j = basis.index[tuple(t)]
                        lrows.append(min(i, j))
                        lcols.append(max(i, j))
        self.laser_rows = np.array(lrows, dtype=np.intp)
        self.laser_cols = np.array(lcols, dtype=np.intp)

        self.half_pairs = basis.pair_counts / 2.0
        self.excited = basis.excited_counts.astype(float)

    def kind_weights(self, dipole_ratio: float) -> np.ndarray:
        return np.array([1.0, dipole_ratio, 1.0 / dipole_ratio])[self.ddi_kind]

    def ddi_matrices(self, g_pairs: np.ndarray, dipole_ratio: float = 1.0, c_geom: float = 1.0) -> np.ndarray:
        """DDI part at theta0 = 1 for a batch of pair couplings (n, P) -> (n, Z, Z)."""
        g_pairs = np.atleast_2d(g_pairs)
        n = g_pairs.shape[0]
        values = g_pairs[:, self.ddi_pair] * (self.kind_weights(dipole_ratio) / (math.sqrt(2.0) * c_geom))
        h = np.zeros((n, self.size, self.size))
        h[:, self.ddi_rows, self.ddi_cols] = values
        h[:, self.ddi_cols, self.ddi_rows] = values
        return h

    def laser_matrix(self) -> np.ndarray:
        """Laser coupling for unit pulse area: Theta/2 between states one 0<->2 flip apart."""
        h = np.zeros((self.size, self.size))
        h[self.laser_rows, self.laser_cols] = 0.5
        h[self.laser_cols, self.laser_rows] = 0.5
        return h

    def diagonal(self, delta_t0: float = 0.0, delta_laser_t0: float = 0.0) -> np.ndarray:
        """-(k/2) Delta t0 for the Foerster defect, minus one laser detuning per excited atom."""
        d = -self.half_pairs * delta_t0
        if self.basis.mode == BLOCKADE:
            d = d - self.excited * delta_laser_t0
        return d


def _check_realization(basis: Basis, realization) -> np.ndarray:
    pos = np.asarray(getattr(realization, "positions", realization), float)
    if pos.shape != (basis.atom_count, 3):
        raise ValueError(f"realization has shape {pos.shape}, basis expects ({basis.atom_count}, 3)")
    return pos


def build_foerster_hamiltonian(
    basis: Basis,
    realization,
    params: CouplingParams,
    scale: float = 1.0,
    c_geom: float = 1.0,
    template: CouplingTemplate | None = None,
) -> HamiltonianMatrix:
    if basis.mode != FOERSTER:
        raise ValueError("build_foerster_hamiltonian needs a Foerster-mode basis")
    template = template or CouplingTemplate(basis)
    g = pair_couplings(_check_realization(basis, realization), scale, params.ddi_mode)
    h = params.theta0 * template.ddi_matrices(g, params.dipole_ratio, c_geom)[0]
    h[np.diag_indices_from(h)] = template.diagonal(params.delta_t0)
    return HamiltonianMatrix(basis, h)


def build_blockade_hamiltonian(
    basis: Basis,
    realization,
    params: CouplingParams,
    laser_detuning_now: float | None = None,
    scale: float = 1.0,
    c_geom: float = 1.0,
    template: CouplingTemplate | None = None,
) -> HamiltonianMatrix:
    """Rotating-wave Hamiltonian with laser drive; ``laser_detuning_now`` overrides params."""
    if basis.mode != BLOCKADE:
        raise ValueError("build_blockade_hamiltonian needs a blockade-mode basis")
    template = template or CouplingTemplate(basis)
    delta_laser = params.delta_laser_t0 if laser_detuning_now is None else laser_detuning_now
    g = pair_couplings(_check_realization(basis, realization), scale, params.ddi_mode)
    h = params.theta0 * template.ddi_matrices(g, params.dipole_ratio, c_geom)[0]
    h += params.laser_area * template.laser_matrix()
    h[np.diag_indices_from(h)] = template.diagonal(params.delta_t0, delta_laser)
    return HamiltonianMatrix(basis, h)
