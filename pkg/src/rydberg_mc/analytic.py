"""Closed-form and quadrature models used as oracles for the Monte Carlo runs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .hamiltonian import FULL, pair_couplings

SATURATED_AMPLITUDE = 0.25


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class AlphaFit:
    alpha: float
    residual: float
    theta0_grid: np.ndarray

    def __post_init__(self):
        if not self.alpha > 0:
            raise FitError(f"fitted alpha must be positive, got {self.alpha}")


def rho2_analytic(theta, delta_t0=0.0):
    """Two frozen atoms: rho2 = 1/2 th^2/(th^2 + D^2/4) sin^2(sqrt(th^2 + D^2/4)).

    ``theta`` is the pulse area sqrt(2) Omega_ab t0 and ``delta_t0`` the
    Foerster detuning times t0. Broadcasts over array inputs.
    """
    theta = np.asarray(theta, float)
    delta_t0 = np.asarray(delta_t0, float)
    w2 = theta**2 + delta_t0**2 / 4.0
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 0.5 * np.where(w2 > 0, theta**2 / w2, 0.0) * np.sin(np.sqrt(w2)) ** 2
    return out if out.ndim else float(out)


def chandrasekhar_pdf(r, r0: float):
    """Nearest-neighbour distance density 3 r^2/r0^3 exp(-r^3/r0^3)."""
    r = np.asarray(r, float)
    x = (r / r0) ** 3
    out = np.where(r >= 0, 3.0 * r**2 / r0**3 * np.exp(-x), 0.0)
    return out if out.ndim else float(out)


def scalar_average_quadrature(theta0: float, tol: float = 1e-6) -> float:
    """Integral of 1/2 sin^2(theta0/x) exp(-x) over x in (0, inf).

    On x < theta0 the substitution u = theta0/x turns the infinitely fast
    oscillation into sin^2(u) under a smooth 1/u^2 envelope; the cosine part
    is then a Fourier integral handled by QUADPACK's QAWF.
    """
    if theta0 < 0:
        raise ValueError(f"theta0 must be >= 0, got {theta0}")
    if theta0 == 0:
        return 0.0
    eps = tol * 1e-3

    def envelope(u):
        return theta0 * math.exp(-theta0 / u) / (4.0 * u * u)

    smooth, _ = integrate.quad(envelope, 1.0, np.inf, epsabs=eps, epsrel=1e-10, limit=500)
    # QAWF wants a finite lower limit and an infinite upper one
    oscill, _ = integrate.quad(envelope, 1.0, np.inf, weight="cos", wvar=2.0, epsabs=eps, limlst=200)
    inner = smooth - oscill
    outer, _ = integrate.quad(
        lambda x: 0.5 * math.sin(theta0 / x) ** 2 * math.exp(-x), theta0, np.inf, epsabs=eps, epsrel=1e-10, limit=500
    )
    return inner + outer


def saturation_formula(theta0, alpha: float, amplitude: float = SATURATED_AMPLITUDE):
    """Universal saturation curve 1/4 (1 - exp(-alpha theta0))."""
    out = amplitude * (1.0 - np.exp(-alpha * np.asarray(theta0, float)))
    return out if out.ndim else float(out)


def fit_alpha(theta0, amplitude, alpha0: float = 0.5, saturation: float = SATURATED_AMPLITUDE) -> AlphaFit:
    """Least-squares alpha of the saturation curve (saturation level held fixed)."""
    theta0 = np.asarray(theta0, float)
    amplitude = np.asarray(amplitude, float)
    if theta0.shape != amplitude.shape or theta0.size < 2:
        raise FitError("fit_alpha needs matching theta0/amplitude arrays with at least 2 points")

    def resid(p):
        return saturation_formula(theta0, p[0], saturation) - amplitude

    sol = optimize.least_squares(resid, x0=[alpha0], bounds=([1e-9], [np.inf]), xtol=1e-12, ftol=1e-12)
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    if not sol.success:
        raise FitError(f"alpha fit did not converge ({sol.message}); residual rms {rms:.3g}")
    return AlphaFit(float(sol.x[0]), rms, theta0.copy())


def weak_interaction_rho_n(
    positions,
    theta0: float,
    delta_t0: float = 0.0,
    scale: float = 1.0,
    c_geom: float = 1.0,
    ddi_mode: str = FULL,
) -> float:
    """Weak-coupling estimate rho_N ~ (1/N) W^2/(W^2 + D^2/4) sin^2(sqrt(W^2 + D^2/4)).

    W^2 sums the squared Foerster couplings over ordered atom pairs, i.e.
    twice the sum over unordered pairs.
    """
    positions = np.asarray(getattr(positions, "positions", positions), float)
    n = positions.shape[0]
    omega_ab = theta0 * pair_couplings(positions, scale, ddi_mode) / (math.sqrt(2.0) * c_geom)
    w2 = 2.0 * float(np.sum(omega_ab**2))
    total = w2 + delta_t0**2 / 4.0
    if total == 0:
        return 0.0
    return w2 / total * math.sin(math.sqrt(total)) ** 2 / n
