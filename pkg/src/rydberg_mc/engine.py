"""Monte Carlo orchestration: sample -> build -> propagate -> reduce.

Realizations are split into chunks that may run on any number of threads.
Each realization draws from its own (seed, index) stream and its result is
stored at its index, so the reduction sees the same array whatever the
partitioning and the output is bit-identical across thread counts.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .basis import BLOCKADE, FOERSTER, enumerate_basis
from .geometry import SINGLE_BOX, SpatialConfig, interaction_scale, sample
from .hamiltonian import SINGULAR_DISTANCE, CouplingParams, CouplingTemplate, pair_couplings
from .observables import excitation_probabilities, first_minimum, qpg_fidelity, rho_fraction
from .propagator import (
    DEFAULT_NOISE_SEGMENTS,
    DEFAULT_NOISE_SIGMA_FRACTION,
    FRACTION,
    LORENTZIAN,
    NOISE_CALIBRATIONS,
    eigensystem,
    evolve_eigen,
    generate_noise,
    noise_sigma,
    propagate_segments,
)

log = logging.getLogger(__name__)

FOERSTER_SPECTRUM = "foerster_spectrum"
AMPLITUDE_CURVE = "amplitude_curve"
BLOCKADE_SPECTRUM = "blockade_spectrum"
FIDELITY_CURVE = "fidelity_curve"
EXPERIMENTS = (FOERSTER_SPECTRUM, AMPLITUDE_CURVE, BLOCKADE_SPECTRUM, FIDELITY_CURVE)

# sweepable parameters
THETA0 = "theta0"
DELTA_T0 = "delta_t0"
DELTA_LASER_T0 = "delta_laser_t0"
LINEWIDTH_T0 = "linewidth_t0"
PARAMETERS = (THETA0, DELTA_T0, DELTA_LASER_T0, LINEWIDTH_T0)

# the abscissa each experiment sweeps
ABSCISSA = {
    FOERSTER_SPECTRUM: DELTA_T0,
    AMPLITUDE_CURVE: THETA0,
    BLOCKADE_SPECTRUM: DELTA_LASER_T0,
    FIDELITY_CURVE: THETA0,
}
SERIES_ALLOWED = {
    FOERSTER_SPECTRUM: (THETA0,),
    AMPLITUDE_CURVE: (DELTA_T0,),
    BLOCKADE_SPECTRUM: (THETA0, DELTA_T0, LINEWIDTH_T0),
    FIDELITY_CURVE: (DELTA_T0, LINEWIDTH_T0),
}

RESAMPLE_WARN_RATE = 1e-3
MAX_RESAMPLE_ATTEMPTS = 1000
CHUNK_SIZE = 256


def default_realizations(n_atoms: int) -> int:
    return 10_000 if n_atoms <= 2 else 500


@dataclass(frozen=True)
class RunPlan:
    experiment: str
    geometry: SpatialConfig
    coupling: CouplingParams
    sweep: tuple[float, ...]
    series_parameter: str | None = None
    series: tuple[float, ...] = ()
    realizations: int = 10_000
    seed: int = 0
    linewidth_t0: float = 0.0
    noise_segments: int = DEFAULT_NOISE_SEGMENTS
    noise_sigma_fraction: float = DEFAULT_NOISE_SIGMA_FRACTION
    noise_calibration: str = LORENTZIAN

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        sweep = tuple(float(x) for x in self.sweep)
        if not sweep:
            raise ValueError("sweep grid must not be empty")
        if any(b < a for a, b in zip(sweep, sweep[1:])):
            raise ValueError("sweep grid must be sorted ascending")
        object.__setattr__(self, "sweep", sweep)
        object.__setattr__(self, "series", tuple(float(x) for x in self.series))
        if self.series_parameter is not None:
            allowed = SERIES_ALLOWED[self.experiment]
            if self.series_parameter not in allowed:
                raise ValueError(f"{self.experiment} series must vary one of {allowed}, got {self.series_parameter!r}")
            if not self.series:
                raise ValueError("series values must not be empty")
        elif self.series:
            raise ValueError("series values given without series parameter")
        if self.realizations < 1:
            raise ValueError(f"realizations must be >= 1, got {self.realizations}")
        if self.linewidth_t0 < 0:
            raise ValueError(f"linewidth_t0 must be >= 0, got {self.linewidth_t0}")
        if self.noise_segments < 1:
            raise ValueError(f"noise_segments must be >= 1, got {self.noise_segments}")
        if self.noise_calibration not in NOISE_CALIBRATIONS:
            raise ValueError(f"noise_calibration must be one of {NOISE_CALIBRATIONS}, got {self.noise_calibration!r}")
        for name, values in ((self.abscissa, self.sweep), (self.series_parameter, self.series)):
            if name in (THETA0, LINEWIDTH_T0) and any(v < 0 for v in values):
                raise ValueError(f"{name} values must be >= 0")

    @property
    def mode(self) -> str:
        return BLOCKADE if self.experiment in (BLOCKADE_SPECTRUM, FIDELITY_CURVE) else FOERSTER

    @property
    def abscissa(self) -> str:
        return ABSCISSA[self.experiment]

    def observable_names(self) -> tuple[str, ...]:
        n = self.geometry.atom_count
        if self.mode == FOERSTER:
            return (f"rho{n}",)
        if self.experiment == FIDELITY_CURVE:
            return ("P1",)
        return tuple(f"P{k}" for k in range(1, n + 1))

    def points(self) -> list[dict[str, float]]:
        """Parameter set of every (series, abscissa) grid point, series-major."""
        base = {
            THETA0: self.coupling.theta0,
            DELTA_T0: self.coupling.delta_t0,
            DELTA_LASER_T0: self.coupling.delta_laser_t0,
            LINEWIDTH_T0: self.linewidth_t0,
        }
        out = []
        for s in self.series or (None,):
            for x in self.sweep:
                p = dict(base)
                if s is not None:
                    p[self.series_parameter] = s
                p[self.abscissa] = x
                out.append(p)
        return out


@dataclass
class ExperimentResult:
    abscissa_name: str
    abscissa: np.ndarray
    series_name: str | None
    series: np.ndarray
    observables: tuple[str, ...]
    mean: np.ndarray  # (n_series, n_points, n_observables)
    stderr: np.ndarray
    realizations: int
    resample_count: int = 0
    metadata: dict = field(default_factory=dict)

    def curve(self, observable: str, series_index: int = 0) -> tuple[np.ndarray, np.ndarray]:
        k = self.observables.index(observable)
        return self.mean[series_index, :, k], self.stderr[series_index, :, k]


class _Chunk:
    """Work of one chunk of realization indices."""

    def __init__(self, plan: RunPlan, template: CouplingTemplate, scale: float, c_geom: float):
        self.plan = plan
        self.template = template
        self.scale = scale
        self.c_geom = c_geom
        self.points = plan.points()
        basis = template.basis
        self.psi0 = np.zeros(len(basis))
        self.psi0[basis.initial_index()] = 1.0

    def positions(self, indices) -> tuple[np.ndarray, int]:
        plan = self.plan
        out, resamples = [], 0
        for i in indices:
            for attempt in range(MAX_RESAMPLE_ATTEMPTS):
                r = sample(plan.geometry, plan.seed, i, attempt)
                if r.min_distance() >= SINGULAR_DISTANCE * self.scale:
                    break
                resamples += 1
            else:
                raise RuntimeError(f"realization {i}: no non-singular configuration after {MAX_RESAMPLE_ATTEMPTS} draws")
            out.append(r.positions)
        return np.stack(out), resamples

    def __call__(self, indices) -> tuple[np.ndarray, int]:
        plan, t = self.plan, self.template
        basis = t.basis
        try:
            pos, resamples = self.positions(indices)
            g = pair_couplings(pos, self.scale, plan.coupling.ddi_mode)
        except Exception as exc:
            raise RuntimeError(f"realizations {indices[0]}..{indices[-1]}: {exc}") from exc
        ddi = t.ddi_matrices(g, plan.coupling.dipole_ratio, self.c_geom)
        n = len(indices)
        n_obs = len(plan.observable_names())
        values = np.empty((len(self.points), n_obs, n))

        if plan.mode == FOERSTER:
            reduce = lambda psi: rho_fraction(psi, basis)[..., None]  # noqa: E731
        else:
            keep = slice(1, 2) if plan.experiment == FIDELITY_CURVE else slice(1, basis.atom_count + 1)
            reduce = lambda psi: excitation_probabilities(psi, basis)[..., keep]  # noqa: E731

        idx = np.arange(t.size)
        if plan.mode == FOERSTER and all(p[DELTA_T0] == 0 for p in self.points):
            # H = theta0 * A: one eigendecomposition serves every theta0
            w, v = eigensystem(ddi)
            for j, p in enumerate(self.points):
                values[j] = reduce(evolve_eigen(p[THETA0] * w, v, self.psi0)).T
            return values, resamples

        laser = plan.coupling.laser_area * t.laser_matrix() if plan.mode == BLOCKADE else None
        normals = None
        if plan.mode == BLOCKADE and any(p[LINEWIDTH_T0] > 0 for p in self.points):
            # unit-std draws, rescaled per grid point: noise is shared across the sweep
            normals = np.stack(
                [generate_noise(1.0, plan.noise_segments, plan.seed, i, 1.0, FRACTION).offsets for i in indices]
            )
        for j, p in enumerate(self.points):
            h = p[THETA0] * ddi
            if laser is not None:
                h += laser
            h[:, idx, idx] = t.diagonal(p[DELTA_T0], p[DELTA_LASER_T0])
            if normals is not None and p[LINEWIDTH_T0] > 0:
                sigma = noise_sigma(p[LINEWIDTH_T0], plan.noise_segments, plan.noise_calibration, plan.noise_sigma_fraction)
                offsets = normals * sigma
                durations = np.full(plan.noise_segments, 1.0 / plan.noise_segments)
                psi = propagate_segments(h, t.excited, self.psi0, durations, offsets)
            else:
                w, v = eigensystem(h)
                psi = evolve_eigen(w, v, self.psi0)
            values[j] = reduce(psi).T
        return values, resamples


def _reduce(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over the last (realization) axis.

    The realization axis is contiguous, so np.sum runs numpy's pairwise
    summation in index order.
    """
    values = np.ascontiguousarray(values)
    n = values.shape[-1]
    mean = values.sum(axis=-1) / n
    if n < 2:
        return mean, np.zeros_like(mean)
    dev = values - mean[..., None]
    std = np.sqrt((dev * dev).sum(axis=-1) / (n - 1))
    return mean, std / math.sqrt(n)


def _fidelity_summary(theta0: np.ndarray, rho: np.ndarray) -> dict:
    """Phase-gate readings of a two-atom amplitude curve, when the grid allows them."""
    out = {}
    try:
        out["qpg_fidelity_at_pi"] = qpg_fidelity(theta0, rho, at="pi")
    except ValueError:
        pass
    try:
        theta_min, rho_min = first_minimum(theta0, rho)
    except ValueError:
        return out
    out["first_minimum_theta0"] = theta_min
    out["qpg_fidelity_at_minimum"] = 1.0 - 2.0 * rho_min
    return out


def run(plan: RunPlan, threads: int = 1, chunk_size: int = CHUNK_SIZE) -> ExperimentResult:
    """Execute a plan; the result does not depend on ``threads`` or ``chunk_size``."""
    started = time.perf_counter()
    basis = enumerate_basis(plan.mode, plan.geometry.atom_count)
    template = CouplingTemplate(basis)
    scale, c_geom = interaction_scale(plan.geometry)
    work = _Chunk(plan, template, scale, c_geom)
    chunks = [
        list(range(a, min(a + chunk_size, plan.realizations))) for a in range(0, plan.realizations, chunk_size)
    ]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    values = np.concatenate([p[0] for p in parts], axis=-1)
    resamples = sum(p[1] for p in parts)
    rate = resamples / plan.realizations
    if rate > RESAMPLE_WARN_RATE:
        warnings.warn(f"coincident-atom resample rate {rate:.2%} exceeds {RESAMPLE_WARN_RATE:.1%}", stacklevel=2)

    mean, stderr = _reduce(values)
    n_series = max(len(plan.series), 1)
    shape = (n_series, len(plan.sweep), len(plan.observable_names()))
    elapsed = time.perf_counter() - started
    metadata = {
        "version": __version__,
        "basis_size": len(basis),
        "theta0_reference_length": scale,
        "theta0_c_geom": c_geom,
        "theta0_convention": "mean nearest-neighbour distance"
        if plan.geometry.kind == SINGLE_BOX
        else ("FWHM-ellipsoid density r0" if c_geom == 1.0 else "trap separation, on-axis dipoles"),
        "resample_rate": rate,
        "wall_time_s": round(elapsed, 3),
    }
    if any(p[LINEWIDTH_T0] > 0 for p in work.points):
        widths = sorted({p[LINEWIDTH_T0] for p in work.points})
        metadata["noise_calibration"] = plan.noise_calibration
        metadata["noise_segments"] = plan.noise_segments
        metadata["noise_sigma_t0"] = [
            noise_sigma(w, plan.noise_segments, plan.noise_calibration, plan.noise_sigma_fraction) for w in widths
        ]
    if plan.experiment == AMPLITUDE_CURVE and plan.geometry.atom_count == 2:
        metadata.update(_fidelity_summary(np.array(plan.sweep), mean.reshape(shape)[0, :, 0]))
    log.info("%s: %d realizations x %d points in %.1fs", plan.experiment, plan.realizations, len(work.points), elapsed)
    return ExperimentResult(
        abscissa_name=plan.abscissa,
        abscissa=np.array(plan.sweep),
        series_name=plan.series_parameter,
        series=np.array(plan.series),
        observables=plan.observable_names(),
        mean=mean.reshape(shape),
        stderr=stderr.reshape(shape),
        realizations=plan.realizations,
        resample_count=resamples,
        metadata=metadata,
    )


def _require(plan: RunPlan, experiment: str) -> None:
    if plan.experiment != experiment:
        raise ValueError(f"expected a {experiment} plan, got {plan.experiment}")


def run_foerster_spectrum(plan: RunPlan, threads: int = 1) -> ExperimentResult:
    _require(plan, FOERSTER_SPECTRUM)
    return run(plan, threads)


def run_amplitude_curve(plan: RunPlan, threads: int = 1) -> ExperimentResult:
    _require(plan, AMPLITUDE_CURVE)
    return run(plan, threads)


def run_blockade_spectrum(plan: RunPlan, threads: int = 1) -> ExperimentResult:
    _require(plan, BLOCKADE_SPECTRUM)
    return run(plan, threads)


def run_fidelity_curve(plan: RunPlan, threads: int = 1) -> ExperimentResult:
    """P1 versus theta0 at each value of the series parameter (Foerster detuning or laser linewidth)."""
    _require(plan, FIDELITY_CURVE)
    return run(plan, threads)
