"""Random atom positions for the spatial configurations of the simulations.

All lengths are dimensionless. The box edge or the trap separation is 1 in
the canonical presets; only ratios matter because every coupling enters
through the pulse area theta0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

SINGLE_BOX = "single_box"
TWO_CIGAR_TRAPS = "two_cigar_traps"
TWO_SYMMETRIC_TRAPS = "two_symmetric_traps"
SINGLE_CIGAR = "single_cigar"
TRAP_ARRAY = "trap_array"
KINDS = (SINGLE_BOX, TWO_CIGAR_TRAPS, TWO_SYMMETRIC_TRAPS, SINGLE_CIGAR, TRAP_ARRAY)
TRAP_KINDS = (TWO_CIGAR_TRAPS, TWO_SYMMETRIC_TRAPS, SINGLE_CIGAR, TRAP_ARRAY)

# FWHM of a Gaussian is FWHM_PER_SIGMA standard deviations
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

# Which distribution a trap FWHM describes: each atom's own position, or the
# separation vector between two atoms (per-atom width smaller by sqrt(2)).
PER_ATOM = "atom"
SEPARATION = "separation"
FWHM_CONVENTIONS = (PER_ATOM, SEPARATION)

# stream ids for SeedSequence spawn keys
POSITION_STREAM = 0
NOISE_STREAM = 1


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialConfig:
    """Declarative geometry.

    ``length`` is the box edge (single_box). ``separation`` is the trap
    distance R0 for two-trap kinds and the spacing for trap_array.
    ``fwhm`` holds the (x, y, z) position FWHM for trap kinds; trap_array
    defaults to spacing/5 in every direction.
    """

    kind: str
    atom_count: int = 2
    length: float = 1.0
    separation: float = 1.0
    fwhm: tuple[float, float, float] | None = None
    fwhm_convention: str = PER_ATOM

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"geometry.kind must be one of {KINDS}, got {self.kind!r}")
        if self.atom_count < 1:
            raise GeometryError(f"geometry.atoms must be >= 1, got {self.atom_count}")
        if self.kind in (TWO_CIGAR_TRAPS, TWO_SYMMETRIC_TRAPS) and self.atom_count != 2:
            raise GeometryError(f"{self.kind} holds exactly 2 atoms, got {self.atom_count}")
        if self.length <= 0 or self.separation <= 0:
            raise GeometryError("geometry lengths must be strictly positive")
        if self.fwhm_convention not in FWHM_CONVENTIONS:
            raise GeometryError(
                f"geometry.fwhm_convention must be one of {FWHM_CONVENTIONS}, got {self.fwhm_convention!r}"
            )
        if self.kind in TRAP_KINDS:
            fwhm = self.fwhm
            if fwhm is None:
                if self.kind != TRAP_ARRAY:
                    raise GeometryError(f"{self.kind} requires geometry.fwhm")
                fwhm = (self.separation / 5.0,) * 3
            fwhm = tuple(float(x) for x in np.broadcast_to(np.asarray(fwhm, float), (3,)))
            if min(fwhm) <= 0:
                raise GeometryError("geometry.fwhm entries must be strictly positive")
            object.__setattr__(self, "fwhm", fwhm)
            # only the spread along the separation axis (z) makes neighbouring traps overlap
            if self.kind != SINGLE_CIGAR and fwhm[2] >= self.separation:
                warnings.warn(
                    f"{self.kind}: position FWHM along z {fwhm[2]:g} is not smaller than the trap separation "
                    f"{self.separation:g}",
                    stacklevel=2,
                )

    @property
    def sigma(self) -> np.ndarray:
        """Per-atom, per-axis Gaussian standard deviation."""
        s = np.asarray(self.fwhm, float) / FWHM_PER_SIGMA
        if self.fwhm_convention == SEPARATION:
            s = s / math.sqrt(2.0)
        return s

    def centers(self) -> np.ndarray:
        n = self.atom_count
        c = np.zeros((n, 3))
        if self.kind in (TWO_CIGAR_TRAPS, TWO_SYMMETRIC_TRAPS, TRAP_ARRAY):
            c[:, 2] = (np.arange(n) - (n - 1) / 2.0) * self.separation
        return c


@dataclass(frozen=True)
class Realization:
    positions: np.ndarray = field(repr=False)
    index: int = 0
    attempt: int = 0

    @property
    def atom_count(self) -> int:
        return self.positions.shape[0]

    def min_distance(self) -> float:
        d = self.positions[:, None, :] - self.positions[None, :, :]
        r = np.linalg.norm(d, axis=-1)
        iu = np.triu_indices(self.atom_count, 1)
        return float(r[iu].min()) if iu[0].size else math.inf


def realization_rng(seed: int, index: int, stream: int = POSITION_STREAM, attempt: int = 0):
    """Counter-based generator: depends only on (seed, index, stream, attempt)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index), int(stream), int(attempt)))
    return np.random.default_rng(ss)


def sample(config: SpatialConfig, seed: int, index: int, attempt: int = 0) -> Realization:
    rng = realization_rng(seed, index, POSITION_STREAM, attempt)
    n = config.atom_count
    if config.kind == SINGLE_BOX:
        pos = rng.uniform(0.0, config.length, size=(n, 3))
    else:
        pos = config.centers() + rng.standard_normal((n, 3)) * config.sigma
    return Realization(pos, index, attempt)


def interaction_scale(config: SpatialConfig) -> tuple[float, float]:
    """Reference length and theta0 normalisation constant c_geom.

    The box and the single cigar define theta0 at the mean nearest-neighbour
    distance r0 (c_geom = 1); the trap kinds define it at the trap distance
    for on-axis dipoles (c_geom = 2, absorbing |1 - 3cos^2| = 2).
    """
    if config.kind == SINGLE_BOX:
        return mean_nn_distance(config), 1.0
    if config.kind == SINGLE_CIGAR:
        rx, ry, rz = config.fwhm
        volume = 4.0 * math.pi / 3.0 * (rx / 2) * (ry / 2) * (rz / 2)
        density = config.atom_count / volume
        return (3.0 / (4.0 * math.pi * density)) ** (1.0 / 3.0), 1.0
    return config.separation, 2.0


def mean_nn_distance(config: SpatialConfig) -> float:
    """r0 = [3/(4 pi n0)]^(1/3) with the two-atom density n0 = 2/L^3."""
    if config.kind != SINGLE_BOX:
        raise GeometryError(f"mean nearest-neighbour distance is defined for single_box only, not {config.kind}")
    return (3.0 * config.length**3 / (8.0 * math.pi)) ** (1.0 / 3.0)
