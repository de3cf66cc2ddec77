"""Mismatched-cavity path erasure: click times, monitored tilt, and success rates.

Each cavity emits with amplitude ``sqrt(kappa_i) exp(-kappa_i t / 2)``; a click
at time ``t`` on the odd-parity sector projects onto
``cos(alpha)|01> + sin(alpha)|10>`` with

    tan(alpha) = sqrt(kappa1 / kappa2) exp(-(kappa1 - kappa2) t / 2).

Writing ``u = ln tan(alpha)``, ``u`` is linear in ``t`` and ``sin(2 alpha) = sech(u)``.
Times are in units of ``1 / kappa1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .algebra import QUARTER, p_success

QUAD_EPSREL = 1e-10


class EmptyWindowError(ValueError):
    """No click time reaches the requested fidelity."""


@dataclass(frozen=True)
class EmissionModel:
    kappa1: float = 1.0
    rate_ratio: float = 1.1
    window: float = math.inf
    sector_prob: float = 0.5

    def __post_init__(self):
        if not self.kappa1 > 0:
            raise ValueError(f"kappa1 must be positive, got {self.kappa1}")
        if not self.rate_ratio >= 1:
            raise ValueError(f"rate_ratio must be >= 1, got {self.rate_ratio}")
        if not self.window > 0:
            raise ValueError(f"window must be positive, got {self.window}")
        if not 0 < self.sector_prob <= 1:
            raise ValueError(f"sector_prob must lie in (0, 1], got {self.sector_prob}")

    @property
    def kappa2(self) -> float:
        return self.rate_ratio * self.kappa1

    @property
    def crossing_time(self) -> float:
        """Click time at which the tilt is exactly pi/4 (0 for identical cavities)."""
        if self.rate_ratio == 1:
            return 0.0
        return math.log(self.rate_ratio) / (self.kappa2 - self.kappa1)

    def window_mass(self) -> float:
        """Probability that a click falls inside the window, under the untruncated pdf."""
        if math.isinf(self.window):
            return 1.0
        w = self.window
        return 0.5 * (2 - math.exp(-self.kappa1 * w) - math.exp(-self.kappa2 * w))


@dataclass(frozen=True)
class DetectionEvent:
    time: float
    alpha: float
    detector: int = 0


def log_tan_alpha(model: EmissionModel, t):
    """``u(t) = ln tan(alpha(t))``, linear in ``t``."""
    return 0.5 * math.log(1 / model.rate_ratio) - 0.5 * (model.kappa1 - model.kappa2) * np.asarray(t, dtype=float)


def alpha_of_time(model: EmissionModel, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("click time must be non-negative")
    # beyond |u| ~ 700 the tilt is 0 or pi/2 to double precision
    out = np.arctan(np.exp(np.clip(log_tan_alpha(model, t), -700.0, 700.0)))
    return float(out) if out.ndim == 0 else out


def click_time_pdf(model: EmissionModel, t):
    """Single-click density on [0, window], renormalized to the window."""
    t = np.asarray(t, dtype=float)
    k1, k2 = model.kappa1, model.kappa2
    dens = 0.5 * (k1 * np.exp(-k1 * t) + k2 * np.exp(-k2 * t)) / model.window_mass()
    dens = np.where((t >= 0) & (t <= model.window), dens, 0.0)
    return float(dens) if dens.ndim == 0 else dens


def click_time_sample(model: EmissionModel, rng: np.random.Generator, size=None):
    """Click times drawn from ``click_time_pdf``.

    The density is an equal mixture of two exponentials, each truncated to the
    window (the truncated components keep the mixture weights proportional to
    their in-window mass).  Returns a float, or an array when ``size`` is given.
    """
    k1, k2 = model.kappa1, model.kappa2
    w = model.window
    m1 = 1.0 if math.isinf(w) else -math.expm1(-k1 * w)
    m2 = 1.0 if math.isinf(w) else -math.expm1(-k2 * w)
    n = 1 if size is None else size
    pick2 = rng.random(n) < m2 / (m1 + m2)
    u = rng.random(n)
    rate = np.where(pick2, k2, k1)
    mass = np.where(pick2, m2, m1)
    t = -np.log1p(-u * mass) / rate
    return float(t[0]) if size is None else t


def sample_event(model: EmissionModel, rng: np.random.Generator) -> DetectionEvent:
    t = click_time_sample(model, rng)
    return DetectionEvent(t, alpha_of_time(model, t), int(rng.integers(0, 2)))


def fidelity_of_alpha(alpha):
    """Overlap with the ideal (|01> + |10>)/sqrt(2): ``(1 + sin 2 alpha) / 2``."""
    out = 0.5 * (1 + np.sin(2 * np.asarray(alpha, dtype=float)))
    return float(out) if out.ndim == 0 else out


def _time_of_log_tan(model, u):
    # inverse of log_tan_alpha
    return (u - 0.5 * math.log(1 / model.rate_ratio)) / (0.5 * (model.kappa2 - model.kappa1))


def naive_window_mass(model: EmissionModel, epsilon: float) -> tuple[float, float, float]:
    """Click-time interval with fidelity >= 1 - epsilon and the resulting success rate.

    Returns ``(t_lo, t_hi, overall_success)`` where ``overall_success`` is the
    sector probability times the pdf mass of the interval.  The interval
    endpoints are found with ``brentq`` and the mass with ``quad``.
    """
    if not 0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if model.rate_ratio == 1:
        t_end = model.window
        return 0.0, t_end, model.sector_prob
    target = 1 - epsilon
    if target >= 1:
        raise EmptyWindowError(f"epsilon={epsilon} is below machine resolution")
    t_star = model.crossing_time
    f = lambda t: fidelity_of_alpha(alpha_of_time(model, t)) - target  # noqa: E731
    # the fidelity is symmetric in u around t*; bracket each side in u-space
    u_edge = math.acosh(1 / (1 - 2 * epsilon))
    span = u_edge / (0.5 * (model.kappa2 - model.kappa1))
    if span <= 0 or f(t_star) < 0:
        raise EmptyWindowError(f"no click time reaches fidelity 1 - {epsilon}")
    lo_guess = max(0.0, t_star - 2 * span)
    t_lo = 0.0 if f(0.0) >= 0 else optimize.brentq(f, lo_guess if f(lo_guess) < 0 else 0.0, t_star, xtol=1e-14, rtol=1e-14)
    t_hi = optimize.brentq(f, t_star, t_star + 2 * span, xtol=1e-14, rtol=1e-14)
    t_hi = min(t_hi, model.window)
    if t_hi <= t_lo:
        raise EmptyWindowError("the fidelity window lies outside the detection window")
    mass, _ = integrate.quad(lambda t: click_time_pdf(model, t), t_lo, t_hi, epsrel=QUAD_EPSREL, epsabs=0)
    return t_lo, t_hi, model.sector_prob * mass


def naive_window_closed_form(model: EmissionModel, epsilon: float) -> tuple[float, float, float]:
    """Same as ``naive_window_mass`` using ``|u| <= arccosh(1 / (1 - 2 epsilon))`` and exact pdf integrals."""
    if model.rate_ratio == 1:
        return 0.0, model.window, model.sector_prob
    u_edge = math.acosh(1 / (1 - 2 * epsilon))
    t_lo = max(0.0, _time_of_log_tan(model, -u_edge))
    t_hi = min(model.window, _time_of_log_tan(model, u_edge))
    k1, k2 = model.kappa1, model.kappa2
    cdf = lambda t: 1 - 0.5 * (math.exp(-k1 * t) + math.exp(-k2 * t))  # noqa: E731
    mass = (cdf(t_hi) - cdf(t_lo)) / model.window_mass()
    return t_lo, t_hi, model.sector_prob * mass


def adaptive_expected_success(model: EmissionModel) -> float:
    """Sector probability times the click-averaged first-attempt strategy success ``p_s(alpha(t))``."""
    if model.rate_ratio == 1:
        return model.sector_prob * p_success(QUARTER)
    integrand = lambda t: click_time_pdf(model, t) * p_success(alpha_of_time(model, t))  # noqa: E731
    upper = model.window
    t_star = model.crossing_time
    # split at the crossing time where the integrand peaks
    parts = [(0.0, min(t_star, upper)), (min(t_star, upper), upper)]
    total = 0.0
    for lo, hi in parts:
        if hi > lo:
            val, _ = integrate.quad(integrand, lo, hi, epsrel=QUAD_EPSREL, epsabs=0, limit=200)
            total += val
    return model.sector_prob * total
