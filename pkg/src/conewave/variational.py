"""Energy functionals, Nehari scaling, best constants and the potential well.

All constants are the discrete ones of the grid in use (ground-state
eigenvalue, embedding constant, Hardy constant), so every inequality that
consumes them is literally true on the grid and can be checked field by
field.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import logging
import math
import warnings

import numpy as np

from .grid import ConeGrid
from .operators import (
    gradient_norm_sq,
    laplacian_matrix,
    potential_field,
    smallest_eigenpair,
    stiffness_factor,
)

__all__ = [
    "ModelParams",
    "make_model",
    "hp_upper",
    "WellLabel",
    "WellConstants",
    "EmbeddingEstimate",
    "NoNehariCrossing",
    "functional_parts",
    "functional_J",
    "functional_I",
    "total_energy",
    "lambda_star",
    "estimate_embedding_constant",
    "estimate_hardy_constant",
    "depth_d",
    "sample_nehari_infimum",
    "gradient_threshold",
    "well_constants",
    "classify_state",
    "label_from_parts",
    "theta_coefficient",
    "gn_theta",
    "NEHARI_TOL",
]

log = logging.getLogger(__name__)

NEHARI_TOL = 1e-8


def hp_upper(n: int) -> float:
    """Upper end ``(2n-2)/(n-2)`` of the admissible source exponents."""
    return (2.0 * n - 2.0) / (n - 2.0)


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Coefficients of the damped wave equation on a fixed grid.

    ``g`` and ``V`` are node fields; ``alpha``/``beta`` are the extreme
    values of ``g`` over the interior nodes.
    """

    grid: ConeGrid
    p: float
    m: float
    gamma: float
    potential: str
    g: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def alpha(self) -> float:
        return float(self.g.min())

    @property
    def beta(self) -> float:
        return float(self.g.max())


def make_model(
    grid: ConeGrid,
    p: float,
    m: float,
    gamma: float = 0.0,
    potential: str = "none",
    g=1.0,
    enforce_hp: bool = True,
) -> ModelParams:
    """Build and validate the model.

    ``enforce_hp=False`` skips the upper bound on ``p``; the discrete
    problem is finite dimensional, so the constants exist for any ``p > 2``.
    """
    n = grid.n
    if not p > 2:
        raise ValueError(f"source exponent p must exceed 2, got {p}")
    if enforce_hp and not p < hp_upper(n):
        raise ValueError(
            f"p = {p} violates 2 < p < (2n-2)/(n-2) = {hp_upper(n):.6g} for n = {n}"
        )
    if not m >= 2:
        raise ValueError(f"damping exponent m must be >= 2, got {m}")
    g = np.broadcast_to(np.asarray(g, dtype=float), grid.shape).copy()
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("source weight g must be finite and nonnegative")
    pot = "none" if potential in (None, "None") else potential
    V = potential_field(grid, pot)
    g.setflags(write=False)
    V.setflags(write=False)
    return ModelParams(grid, float(p), float(m), float(gamma), pot, g, V)


class WellLabel(str, Enum):
    InsideW = "InsideW"
    InsideV = "InsideV"
    OnNehari = "OnNehari"
    AboveD = "AboveD"
    Zero = "Zero"


class NoNehariCrossing(ValueError):
    """The ray through ``u`` never meets the Nehari set."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def functional_parts(u: np.ndarray, model: ModelParams) -> tuple[float, float, float]:
    """``(||grad u||^2, ||V^(1/2) u||^2, ||g^(1/p) u||_p^p)``."""
    grid = model.grid
    u = grid.check(u)
    grad_sq = gradient_norm_sq(grid, u)
    hardy_sq = grid.weight * float(np.sum(model.V * u * u)) if model.gamma else 0.0
    source = grid.weight * float(np.sum(model.g * np.abs(u) ** model.p))
    return grad_sq, hardy_sq, source


def functional_J(u: np.ndarray, model: ModelParams) -> float:
    grad_sq, hardy_sq, source = functional_parts(u, model)
    return 0.5 * (grad_sq - model.gamma * hardy_sq) - source / model.p


def functional_I(u: np.ndarray, model: ModelParams) -> float:
    grad_sq, hardy_sq, source = functional_parts(u, model)
    return grad_sq - model.gamma * hardy_sq - source


def total_energy(u: np.ndarray, ut: np.ndarray, model: ModelParams) -> float:
    return 0.5 * model.grid.norm(model.grid.check(ut)) ** 2 + functional_J(u, model)


def lambda_star(u: np.ndarray, model: ModelParams) -> float:
    """Scale at which the ray ``lambda*u`` crosses the Nehari set."""
    grad_sq, hardy_sq, b = functional_parts(u, model)
    a = grad_sq - model.gamma * hardy_sq
    if grad_sq == 0:
        raise NoNehariCrossing("zero gradient")
    if b <= 0:
        raise NoNehariCrossing("source term vanishes along this direction")
    if a <= 0:
        raise NoNehariCrossing("quadratic part is nonpositive; I < 0 on the whole ray")
    return (a / b) ** (1.0 / (model.p - 2.0))


@dataclass
class EmbeddingEstimate:
    value: float
    maximizer: np.ndarray = field(repr=False)
    history: list[float] = field(repr=False)
    converged: bool = True
    restarts: int = 0


def estimate_embedding_constant(
    model: ModelParams,
    restarts: int = 200,
    seed: int = 0,
    maxiter: int = 1000,
    tol: float = 1e-11,
    prune_after: int = 25,
    keep: int = 8,
) -> EmbeddingEstimate:
    """Best constant of ``||g^(1/p) u||_p <= C ||grad u||_2`` on the grid.

    Each restart runs a Sobolev-gradient ascent on the ratio: the source
    derivative ``g|u|^(p-2)u`` is lifted through ``(-Lap)^(-1)`` and
    renormalized.  Convexity of ``sum g|u|^p`` makes the full step monotone;
    a step-halving guard covers rounding.  All restarts advance together as
    columns of one array.  After ``prune_after`` sweeps only the ``keep``
    leading restarts continue; the rest are frozen at their current ratio
    (they either sit below the leader or duplicate it up to a symmetry of
    the cross-section).
    """
    grid = model.grid
    p = model.p
    if model.beta == 0:
        return EmbeddingEstimate(0.0, grid.zeros(), [0.0], True, restarts)
    lu = stiffness_factor(grid)
    K = -laplacian_matrix(grid)
    w = grid.weight
    gv = model.g.ravel()[:, None]
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((grid.interior_count, restarts))

    def normalize(X):
        return X / np.sqrt(w * np.einsum("ij,ij->j", X, K @ X))

    def ratio(X):
        return (w * np.sum(gv * np.abs(X) ** p, axis=0)) ** (1.0 / p)

    U = normalize(U)
    R = ratio(U)
    history = [float(R.max())]
    active = np.ones(restarts, dtype=bool)
    for it in range(maxiter):
        idx = np.flatnonzero(active)
        X = U[:, idx]
        Z = normalize(lu.solve(gv * np.abs(X) ** (p - 2) * X))
        Rz = ratio(Z)
        worse = Rz < R[idx]
        tau = 1.0
        while np.any(worse) and tau > 1e-12:
            tau *= 0.5
            cols = np.flatnonzero(worse)
            trial = normalize(X[:, cols] + tau * (Z[:, cols] - X[:, cols]))
            Rt = ratio(trial)
            Z[:, cols] = trial
            Rz[cols] = Rt
            worse[cols] = Rt < R[idx][cols]
        # columns that could not improve keep their iterate
        Z[:, worse] = X[:, worse]
        Rz[worse] = R[idx][worse]
        change = (Rz - R[idx]) / Rz
        U[:, idx] = Z
        R[idx] = Rz
        active[idx[change <= tol]] = False
        if it == prune_after and active.sum() > keep:
            leaders = np.zeros_like(active)
            leaders[np.argsort(R)[-keep:]] = True
            active &= leaders
        history.append(float(R.max()))
        if not active.any():
            break
    best = int(np.argmax(R))
    converged = not active[best]
    if not converged:
        warnings.warn(
            f"embedding-constant ascent: leading restart hit maxiter={maxiter}",
            RuntimeWarning,
            stacklevel=2,
        )
    u = U[:, best].reshape(grid.shape)
    if u.sum() < 0:
        u = -u
    return EmbeddingEstimate(float(R[best]), u, history, converged, restarts)


def estimate_hardy_constant(model: ModelParams, tol: float = 1e-15, maxiter: int = 100_000) -> float:
    """Square root of the top eigenvalue of the pencil ``V u = mu (-Lap) u``."""
    grid = model.grid
    V = model.V.ravel()
    if not np.any(V):
        return 0.0
    lu = stiffness_factor(grid)
    K = -laplacian_matrix(grid)
    u = np.ones(grid.interior_count)
    mu_old = 0.0
    for _ in range(maxiter):
        u = lu.solve(V * u)
        u /= np.linalg.norm(u)
        mu = float(np.dot(V * u, u) / np.dot(K @ u, u))
        if abs(mu - mu_old) <= tol * mu:
            break
        mu_old = mu
    else:
        warnings.warn("Hardy power iteration hit maxiter", RuntimeWarning, stacklevel=2)
    return math.sqrt(mu)


def sample_nehari_infimum(model: ModelParams, samples: int = 10_000, seed: int = 0, smoothing: int = 2) -> float:
    """``min J(lambda* u)`` over random directions ``u = (-Lap)^(-smoothing) xi``.

    Gaussian white noise ``xi`` is smoothed so the directions resemble the
    low modes where the infimum lives; the result is an upper estimate of
    the mountain-pass level.
    """
    grid = model.grid
    lu = stiffness_factor(grid)
    X = np.random.default_rng(seed).standard_normal((grid.interior_count, samples))
    for _ in range(smoothing):
        X = lu.solve(X)
    best = math.inf
    for j in range(samples):
        u = X[:, j].reshape(grid.shape)
        try:
            lam = lambda_star(u, model)
        except NoNehariCrossing:
            continue
        best = min(best, functional_J(lam * u, model))
    return best


def depth_d(p: float, C_emb: float, gamma: float = 0.0, C_hardy: float = 0.0) -> float:
    """Mountain-pass level ``(p-2)/(2p) C^(-2p/(p-2)) (1 - gamma C_H^2)^(p/(p-2))``."""
    bracket = 1.0 - gamma * C_hardy**2
    if bracket <= 0:
        raise ValueError(f"gamma * C_hardy^2 = {1 - bracket:.6g} must be < 1")
    return (p - 2) / (2 * p) * C_emb ** (-2 * p / (p - 2)) * bracket ** (p / (p - 2))


def gradient_threshold(p: float, C_emb: float, gamma: float = 0.0, C_hardy: float = 0.0) -> float:
    """Radius ``((1 - gamma C_H^2)/C^p)^(1/(p-2))`` below which ``I > 0``."""
    return ((1.0 - gamma * C_hardy**2) / C_emb**p) ** (1.0 / (p - 2))


@dataclass(frozen=True)
class WellConstants:
    lambda1: float
    C_star_emb: float
    C_star_hardy: float
    c1: float
    c2: float
    d: float
    omega1: np.ndarray = field(repr=False)
    embedding_converged: bool = True

    def theta(self, E0: float, model: ModelParams) -> float:
        return theta_coefficient(E0, model.p, self.C_star_emb, model.gamma, self.C_star_hardy)

    def as_dict(self) -> dict[str, float]:
        return {
            "lambda1": self.lambda1,
            "C_star_emb": self.C_star_emb,
            "C_star_hardy": self.C_star_hardy,
            "c1": self.c1,
            "c2": self.c2,
            "d": self.d,
        }


def well_constants(model: ModelParams, restarts: int = 200, seed: int = 0) -> WellConstants:
    eig = smallest_eigenpair(model.grid)
    emb = estimate_embedding_constant(model, restarts=restarts, seed=seed)
    C_h = estimate_hardy_constant(model)
    gC2 = model.gamma * C_h**2
    if model.gamma > 0:
        c1, c2 = 1.0 - gC2, 1.0
    else:
        c1, c2 = 1.0, 1.0 - gC2
    d = depth_d(model.p, emb.value, model.gamma, C_h)
    log.debug("lambda1=%g C_emb=%g C_hardy=%g d=%g", eig.lambda1, emb.value, C_h, d)
    return WellConstants(eig.lambda1, emb.value, C_h, c1, c2, d, eig.omega1, emb.converged)


def label_from_parts(grad_sq: float, a: float, b: float, J: float, d: float) -> WellLabel:
    if grad_sq == 0:
        return WellLabel.Zero
    I = a - b
    if abs(I) <= NEHARI_TOL * (abs(a) + abs(b)):
        return WellLabel.OnNehari
    if J < d:
        return WellLabel.InsideW if I > 0 else WellLabel.InsideV
    return WellLabel.AboveD


def classify_state(u: np.ndarray, model: ModelParams, constants: WellConstants) -> WellLabel:
    grad_sq, hardy_sq, b = functional_parts(u, model)
    a = grad_sq - model.gamma * hardy_sq
    J = 0.5 * a - b / model.p
    return label_from_parts(grad_sq, a, b, J, constants.d)


def theta_coefficient(
    E0: float, p: float, C_emb: float, gamma: float = 0.0, C_hardy: float = 0.0
) -> float:
    """Coercivity ``I(u) >= theta ||grad u||^2`` inside the well below level d."""
    d = depth_d(p, C_emb, gamma, C_hardy)
    if E0 < 0:
        raise ValueError(f"theta needs E0 >= 0, got {E0}")
    if E0 >= d:
        raise ValueError(f"theta is undefined for E0 = {E0:.6g} >= d = {d:.6g}")
    c1 = 1.0 - gamma * C_hardy**2
    return c1 - C_emb**p * (2 * p * E0 / ((p - 2) * c1)) ** ((p - 2) / 2)


def gn_theta(s1: float, s2: float, n: int) -> float:
    """Interpolation exponent of the Gagliardo-Nirenberg inequality."""
    crit = 2.0 * n / (n - 2.0)
    if not (1 <= s1 < s2 <= crit):
        raise ValueError(f"need 1 <= s1 < s2 <= {crit:.6g}, got s1={s1}, s2={s2}")
    # 1/s2 = (1-t)/s1 + t(1/2 - 1/n)
    return (1.0 / s1 - 1.0 / s2) / (1.0 / s1 - (0.5 - 1.0 / n))
