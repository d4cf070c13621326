"""Trajectory diagnostics: decay fits, invariant sets, blow-up thresholds and
blow-up time bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np
from scipy.optimize import brentq

from .grid import ConeGrid
from .series import EnergySeries
from .variational import (
    ModelParams,
    WellConstants,
    WellLabel,
    gradient_threshold,
    total_energy,
)

__all__ = [
    "DecayMode",
    "DecayReport",
    "fit_decay",
    "nakao_bound",
    "detect_blowup",
    "subcritical_eta_range",
    "subcritical_L0",
    "subcritical_time_bound",
    "calibrate_subcritical_C",
    "HighEnergyConstants",
    "high_energy_constants",
    "high_energy_constants_for",
    "high_energy_blowup_check",
    "construct_high_energy_data",
    "BlowupTimeBound",
    "HypothesisViolation",
    "blowup_time_upper_bound",
    "norm_hypothesis_threshold",
    "holder_constant",
    "Violation",
    "MonitorReport",
    "invariant_set_monitor",
    "first_entry_into_V",
    "nehari_margin",
]


class DecayMode(str, Enum):
    Exponential = "Exponential"
    Algebraic = "Algebraic"


@dataclass(frozen=True)
class DecayReport:
    mode: DecayMode
    rate: float
    amplitude: float
    fit_window: tuple[float, float]
    r_squared: float
    slope: float
    samples: int


def fit_decay(series: EnergySeries, m: float, tail: float = 0.5, floor: float = 1e-12) -> DecayReport:
    """Fit the energy tail.

    ``m = 2``: ``log E = log K - kappa t``.  ``m > 2``: ``log E = log K +
    slope * log(1 + t)``, where the decay theory predicts ``slope =
    -2/(m-2)``.  The window is the last ``tail`` fraction of the records
    with ``E > floor``.
    """
    t = series.column("t")
    E = series.column("E")
    keep = E > floor
    t, E = t[keep], E[keep]
    start = int(math.floor(len(t) * (1.0 - tail)))
    t, E = t[start:], E[start:]
    if len(t) < 10:
        raise ValueError(f"decay fit window has {len(t)} samples; need at least 10")
    y = np.log(E)
    if m == 2:
        x, mode = t, DecayMode.Exponential
    else:
        x, mode = np.log1p(t), DecayMode.Algebraic
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    return DecayReport(
        mode, float(-slope), float(math.exp(intercept)), (float(t[0]), float(t[-1])), r2, float(slope), len(t)
    )


def nakao_bound(phi0: float, k0: float, r: float, t) -> np.ndarray | float:
    """Decay envelope for ``sup_[t,t+1] phi^(1+r) <= k0 (phi(t) - phi(t+1))``.

    ``r > 0``: ``(phi0^(-r) + (r/k0) [t-1]^+)^(-1/r)``; the rate carries
    ``1/k0``, the discrete analogue of ``phi' = -phi^(1+r)/k0``.
    ``r = 0``: ``phi0 exp(-log(k0/(k0-1)) [t-1]^+)``.
    """
    if phi0 < 0:
        raise ValueError("phi0 must be nonnegative")
    if r < 0:
        raise ValueError("r must be nonnegative")
    tt = np.maximum(np.asarray(t, dtype=float) - 1.0, 0.0)
    if r == 0:
        if not k0 > 1:
            raise ValueError("the exponential branch needs k0 > 1")
        out = phi0 * np.exp(-math.log(k0 / (k0 - 1.0)) * tt)
    else:
        if not k0 > 0:
            raise ValueError("the algebraic branch needs k0 > 0")
        if phi0 == 0:
            out = np.zeros_like(tt)
        else:
            out = np.where(tt > 0, (phi0 ** (-r) + r / k0 * tt) ** (-1.0 / r), phi0)
    return float(out) if out.ndim == 0 else out


def detect_blowup(series: EnergySeries, blowup_cap: float) -> float | None:
    """First recorded time with ``||u||_2 > blowup_cap``."""
    L2 = series.column("L2")
    hits = np.flatnonzero(L2 > blowup_cap)
    return float(series.t[hits[0]]) if hits.size else None


def subcritical_eta_range(p: float, m: float) -> tuple[float, float]:
    """Open-closed interval ``(0, eta_max]`` of admissible exponents."""
    if not p > m:
        raise ValueError(f"empty exponent range: needs p > m, got p={p}, m={m}")
    if not m >= 2:
        raise ValueError("m must be >= 2")
    return 0.0, min((p - 2) / (2 * p), (p - m) / ((m - 1) * p))


def subcritical_L0(E0: float, uv0: float, eta: float, eps: float) -> float:
    """``(-E0)^(1-eta) + 2 eps (u0, u1)`` for negative initial energy."""
    if not E0 < 0:
        raise ValueError("the negative-energy functional needs E0 < 0")
    return (-E0) ** (1.0 - eta) + 2.0 * eps * uv0


def subcritical_time_bound(L0: float, eta: float, C: float) -> float:
    """``T* = (1-eta)/(C eta) * L0^(-eta/(1-eta))``."""
    if not L0 > 0:
        raise ValueError("L0 must be positive")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if not C > 0:
        raise ValueError("C must be positive")
    return (1.0 - eta) / (C * eta) * L0 ** (-eta / (1.0 - eta))


def calibrate_subcritical_C(T_observed: float, L0: float, eta: float) -> float:
    """The constant ``C`` for which ``T*`` equals an observed blow-up time."""
    return (1.0 - eta) / (T_observed * eta) * L0 ** (-eta / (1.0 - eta))


@dataclass(frozen=True)
class HighEnergyConstants:
    M0: float
    M: float
    K_M: float
    eta_M: float
    bracket: tuple[float, float] = (math.nan, math.nan)
    phi_at_bracket: tuple[float, float] = (math.nan, math.nan)

    def rhs_factor(self, m: float) -> float:
        """``(m-1) M^(1/(m-1)) / m``."""
        return (m - 1) * self.M ** (1.0 / (m - 1)) / m


def high_energy_constants(p: float, m: float, alpha: float, lambda1: float, c: float = 1.0) -> HighEnergyConstants:
    """Solve ``K(M)/eta(M) = (m-1) M^(1/(m-1)) / m`` for ``M > M0``.

    ``c = 1 - gamma C_H^2``.  Brent's method runs on ``[M0 (1 + 1e-9), hi]``
    with ``hi`` doubled until ``phi`` changes sign.
    """
    if not p > m >= 2:
        raise ValueError(f"needs p > m >= 2, got p={p}, m={m}")
    if not alpha > 0:
        raise ValueError("alpha = inf g must be positive")
    if not (lambda1 > 0 and c > 0):
        raise ValueError("lambda1 and 1 - gamma C_H^2 must be positive")
    M0 = ((m - 2) * lambda1 * c + (p - m) * alpha) / ((p - 2) ** 2 * lambda1 * alpha * c)

    def K(M):
        return p - (m - 2) / (alpha * (p - 2) * M)

    def eta(M):
        inner = (K(M) - 2) * lambda1 * c - (p - m) / ((p - 2) * M)
        return math.sqrt((2 + K(M)) * max(inner, 0.0))

    def phi(M):
        e = eta(M)
        lhs = K(M) / e if e > 0 else math.inf
        return lhs - (m - 1) * M ** (1.0 / (m - 1)) / m

    lo = M0 * (1 + 1e-9)
    hi = 2.0 * M0
    while phi(hi) >= 0:
        hi *= 2.0
        if hi > 2.0**60 * M0:
            raise ValueError("no sign change of phi below 2^60 M0")
    M = brentq(phi, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)
    return HighEnergyConstants(M0, M, K(M), eta(M), (lo, hi), (phi(lo), phi(hi)))


def high_energy_constants_for(model: ModelParams, constants: WellConstants) -> HighEnergyConstants:
    c = 1.0 - model.gamma * constants.C_star_hardy**2
    return high_energy_constants(model.p, model.m, model.alpha, constants.lambda1, c)


def high_energy_blowup_check(u0, u1, model: ModelParams, hec: HighEnergyConstants) -> bool:
    """``(u0, u1) > (m-1) M^(1/(m-1))/m * E(0) >= 0``."""
    E0 = total_energy(u0, u1, model)
    return bool(E0 >= 0 and model.grid.inner(u0, u1) > hec.rhs_factor(model.m) * E0)


def construct_high_energy_data(
    R: float,
    omega1: np.ndarray,
    omega2: np.ndarray,
    model: ModelParams,
    hec: HighEnergyConstants,
    r1_min: float = 0.0,
    orth_tol: float = 1e-8,
):
    """Data ``u0 = r1 w1, u1 = r1 w1 + r2 w2`` with ``E(0) = R`` that pass
    :func:`high_energy_blowup_check`.

    ``r1`` starts at ``max(1, r1_min)`` and doubles until ``chi(r1) < R`` and
    ``R < r1^2 ||w1||^2 / factor``; then ``r2 = sqrt(2 (R - chi)) / ||w2||``.
    """
    grid = model.grid
    if not R > 0:
        raise ValueError("R must be positive")
    n1, n2 = grid.norm(omega1), grid.norm(omega2)
    if n1 == 0 or n2 == 0:
        raise ValueError("omega1 and omega2 must be nonzero")
    if abs(grid.inner(omega1, omega2)) > orth_tol * n1 * n2:
        raise ValueError("omega1 and omega2 are not orthogonal")
    factor = hec.rhs_factor(model.m)

    def chi(r):
        return total_energy(r * omega1, r * omega1, model)

    r1 = max(1.0, r1_min)
    for _ in range(61):
        if chi(r1) < R and R < r1**2 * n1**2 / factor:
            break
        r1 *= 2.0
    else:
        raise ValueError("no admissible r1 below 2^60")
    r2 = math.sqrt(2.0 * (R - chi(r1))) / n2
    u0 = r1 * omega1
    u1 = r1 * omega1 + r2 * omega2
    return u0, u1


class HypothesisViolation(ValueError):
    """A hypothesis of the blow-up time bound fails for the given data."""


def holder_constant(grid: ConeGrid, p: float) -> float:
    """``mu^(1/2 - 1/p)``: ``||u||_2 <= mu^(1/2-1/p) ||u||_p`` on the truncated grid."""
    return grid.measure ** (0.5 - 1.0 / p)


@dataclass(frozen=True)
class BlowupTimeBound:
    sigma: float
    eps2: float
    eps: float
    rho1: float
    rho2: float
    M1: float
    M2: float
    F0: float
    T_upper: float
    T_upper_as_printed: float
    xi: float
    C1: float
    C2: float


def _margins(E0: float, model: ModelParams, constants: WellConstants) -> tuple[float, float, float]:
    """Smallest power of two ``eps2 >= 2`` with both margins ``rho1, rho2`` positive."""
    p, m = model.p, model.m
    c = 1.0 - model.gamma * constants.C_star_hardy**2
    sigma = (p - 2) / (2 * p)
    pull = E0 ** (sigma * (m - 1)) if E0 > 0 else 0.0
    eps2 = 2.0
    while True:
        rho1 = constants.lambda1**2 * c * (p - 2) / 4 - pull * (p - m) / ((p - 2) * eps2 ** (m - 1))
        rho2 = model.alpha * (p - 2) / (2 * p) - pull / eps2 ** (m - 1)
        if rho1 > 0 and rho2 > 0:
            return eps2, rho1, rho2
        eps2 *= 2.0
        if eps2 > 2.0**60:
            raise HypothesisViolation("no eps2 <= 2^60 makes rho1, rho2 positive")


def norm_hypothesis_threshold(E0: float, model: ModelParams, constants: WellConstants, xi: float = 1.0) -> float:
    """Lower bound ``(p+2+xi)/(2 rho1) E(0)`` demanded of ``||u0||_2^2``."""
    _, rho1, _ = _margins(E0, model, constants)
    return (model.p + 2 + xi) / (2 * rho1) * E0


def blowup_time_upper_bound(
    u0, u1, model: ModelParams, constants: WellConstants, hec: HighEnergyConstants | None = None, xi: float = 1.0
) -> BlowupTimeBound:
    """Upper bound on the blow-up time for high-energy data.

    Integrating ``F^(1/(1-sigma)) <= (M2/M1) F'`` gives ``T <= F0^(-sigma/(1-sigma))
    (M2/M1) (1-sigma)/sigma``; the coefficient ratio in the other orientation
    is kept as ``T_upper_as_printed`` for comparison.
    """
    p = model.p
    grid = model.grid
    if hec is None:
        hec = high_energy_constants_for(model, constants)
    if not high_energy_blowup_check(u0, u1, model, hec):
        raise HypothesisViolation("(u0,u1) > (m-1) M^(1/(m-1))/m E(0) >= 0 fails")
    E0 = total_energy(u0, u1, model)
    sigma = (p - 2) / (2 * p)
    eps2, rho1, rho2 = _margins(E0, model, constants)
    eps = (1 - sigma) / (2 * eps2)
    need = (p + 2 + xi) / (2 * rho1) * E0
    have = grid.norm(u0) ** 2
    if have < need:
        raise HypothesisViolation(
            f"||u0||^2 = {have:.6g} < (p+2+xi)/(2 rho1) E(0) = {need:.6g}"
        )
    F0 = eps * grid.inner(u0, u1)
    if not F0 > 0:
        raise HypothesisViolation("F(0) = eps (u0, u1) must be positive")
    Cmu = holder_constant(grid, p)
    C1 = 1.0 / (2 * (1 - sigma))
    b = 2 * (1 - sigma) / (1 - 2 * sigma)
    C2 = (Cmu ** (1.0 / (1 - sigma))) ** b / b
    q = p * (1 - 2 * sigma)
    M1 = eps * min((p + 6) / 4, (p + 2) / 2, xi * E0 / 2, rho2)
    e1 = eps ** (1.0 / (1 - sigma))
    M2 = 2 ** (sigma / (1 - sigma)) * max(
        1.0, eps ** (sigma / (1 - sigma)) * C1, e1 * C2 * 2 / q, e1 * C2 * (q - 2) / q
    )
    if not M1 > 0:
        raise HypothesisViolation("M1 must be positive (needs E(0) > 0)")
    base = F0 ** (-sigma / (1 - sigma)) * (1 - sigma) / sigma
    return BlowupTimeBound(
        sigma, eps2, eps, rho1, rho2, M1, M2, F0, base * M2 / M1, base * M1 / M2, xi, C1, C2
    )


@dataclass(frozen=True)
class Violation:
    rule: str
    index: int
    t: float
    detail: str


@dataclass
class MonitorReport:
    violations: list[Violation] = field(default_factory=list)
    theta: float | None = None
    theta_min_margin: float | None = None
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Violation | None:
        return self.violations[0] if self.violations else None


_W_LABELS = (WellLabel.InsideW, WellLabel.Zero)


def invariant_set_monitor(
    series: EnergySeries, constants: WellConstants, model: ModelParams, rel_tol: float = 1e-9
) -> MonitorReport:
    """Check invariance of the well and its exterior along a record.

    Once a record has ``E < d`` inside ``W`` (or at zero), later records stay
    in ``W``; once ``E < d`` inside ``V``, later records stay in ``V``; once
    ``E < 0`` (or ``E = 0`` with ``u != 0``), later records are in ``V``.
    When the run starts in ``W`` with ``0 <= E(0) < d`` the coercivity
    ``I >= theta ||grad u||^2`` is checked as well, and every ``V`` record is
    checked against the gradient lower bound.
    """
    d = constants.d
    E = series.column("E")
    I = series.column("I")
    grad_sq = series.column("grad_sq")
    labels = series.label
    t = series.t
    report = MonitorReport(checked=len(E))
    threshold = gradient_threshold(model.p, constants.C_star_emb, model.gamma, constants.C_star_hardy)
    in_w = in_v = False
    for k in range(len(E)):
        lab = labels[k]
        if in_w and lab not in _W_LABELS:
            report.violations.append(Violation("W-invariance", k, t[k], f"label {lab.value}, E = {E[k]:.6g}"))
        if in_v and lab is not WellLabel.InsideV:
            report.violations.append(Violation("V-invariance", k, t[k], f"label {lab.value}, E = {E[k]:.6g}"))
        if lab is WellLabel.InsideV:
            gnorm = math.sqrt(grad_sq[k])
            if not gnorm > threshold * (1 - rel_tol):
                report.violations.append(
                    Violation("gradient-dichotomy", k, t[k], f"||grad u|| = {gnorm:.6g} <= {threshold:.6g}")
                )
        if E[k] < d and lab in _W_LABELS:
            in_w = True
        if E[k] < d and lab is WellLabel.InsideV:
            in_v = True
        if E[k] < 0 or (E[k] == 0 and grad_sq[k] > 0):
            in_v = True
    E0 = E[0] if len(E) else math.nan
    if len(E) and 0 <= E0 < d and labels[0] in _W_LABELS:
        theta = constants.theta(E0, model)
        report.theta = theta
        margins = I - theta * grad_sq
        scale = np.maximum(np.abs(I) + theta * grad_sq, 1e-300)
        report.theta_min_margin = float(np.min(margins / scale))
        for k in np.flatnonzero(margins < -rel_tol * scale):
            report.violations.append(
                Violation("theta-coercivity", int(k), t[k], f"I = {I[k]:.6g} < theta ||grad u||^2 = {theta * grad_sq[k]:.6g}")
            )
    return report


def first_entry_into_V(series: EnergySeries, d: float) -> float | None:
    """First record time with ``E < d`` and label ``InsideV``."""
    for k, lab in enumerate(series.label):
        if lab is WellLabel.InsideV and series.E[k] < d:
            return float(series.t[k])
    return None


def nehari_margin(series: EnergySeries) -> float:
    """``min_k |I| / (|a| + |b|)`` over records with nonzero gradient."""
    I = series.column("I")
    a = series.column("a")
    b = series.column("b")
    scale = np.abs(a) + np.abs(b)
    mask = series.column("grad_sq") > 0
    if not mask.any():
        return math.inf
    return float(np.min(np.abs(I[mask]) / scale[mask]))
