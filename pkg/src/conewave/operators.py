"""Fuchsian Laplacian, cone gradient, singular potentials and the ground state.

In log-radial coordinates ``x1 d/dx1`` is ``d/ds``, so the cone Laplacian is
``d^2/ds^2 + Laplacian on the torus``.  The radial direction carries Dirichlet
ghost values, the cross-section directions are periodic.  The gradient uses
forward (staggered) differences so that the discrete Green identity
``||grad f||^2 = -(Lap f, f)`` holds to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import ConeGrid

__all__ = [
    "POTENTIALS",
    "apply_laplacian",
    "apply_gradient",
    "gradient_norm_sq",
    "laplacian_matrix",
    "stiffness_factor",
    "stencil_eigenvalue_bound",
    "potential_value",
    "potential_field",
    "EigenPair",
    "EigenSolverError",
    "smallest_eigenpair",
    "second_eigenmode",
]

POTENTIALS = ("none", "V1", "V2")


def apply_laplacian(grid: ConeGrid, f: np.ndarray) -> np.ndarray:
    f = grid.check(f)
    hs2, hx2 = grid.hs**2, grid.hx**2
    padded = np.zeros((f.shape[0] + 2,) + f.shape[1:])
    padded[1:-1] = f
    out = (padded[2:] - 2.0 * f + padded[:-2]) / hs2
    for axis in range(1, f.ndim):
        out += (np.roll(f, -1, axis) - 2.0 * f + np.roll(f, 1, axis)) / hx2
    return out


def apply_gradient(grid: ConeGrid, f: np.ndarray) -> list[np.ndarray]:
    """Components ``(d/ds, d/dx2, ..., d/dxn)`` on staggered cells.

    The radial component lives on the ``Ns`` cells between consecutive rows
    (boundary rows included, where ``f = 0``); cross-section components live
    on the periodic edges.
    """
    f = grid.check(f)
    padded = np.zeros((f.shape[0] + 2,) + f.shape[1:])
    padded[1:-1] = f
    comps = [np.diff(padded, axis=0) / grid.hs]
    for axis in range(1, f.ndim):
        comps.append((np.roll(f, -1, axis) - f) / grid.hx)
    return comps


def gradient_norm_sq(grid: ConeGrid, f: np.ndarray) -> float:
    """``||grad_B f||_2^2``, summed over all components."""
    return grid.weight * sum(float(np.sum(c * c)) for c in apply_gradient(grid, f))


def _second_difference(N: int, h: float, periodic: bool) -> sp.csr_matrix:
    if periodic:
        shift = sp.csr_matrix(np.roll(np.eye(N), 1, axis=1))
        return ((shift + shift.T - 2.0 * sp.identity(N)) / h**2).tocsr()
    return sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(N, N), format="csr") / h**2


@lru_cache(maxsize=16)
def laplacian_matrix(grid: ConeGrid) -> sp.csr_matrix:
    """Sparse matrix of :func:`apply_laplacian` in C (row-major) node order."""
    dims = grid.shape
    blocks = [_second_difference(dims[0], grid.hs, periodic=False)]
    blocks += [_second_difference(N, grid.hx, periodic=True) for N in dims[1:]]
    total = None
    for i, block in enumerate(blocks):
        term = sp.identity(1, format="csr")
        for j, N in enumerate(dims):
            term = sp.kron(term, block if i == j else sp.identity(N), format="csr")
        total = term if total is None else total + term
    return total.tocsr()


@lru_cache(maxsize=16)
def stiffness_factor(grid: ConeGrid):
    """Sparse LU factorization of ``-Lap`` (symmetric positive definite)."""
    return spla.splu((-laplacian_matrix(grid)).tocsc())


def stencil_eigenvalue_bound(grid: ConeGrid) -> float:
    """``4/hs^2 + 4(n-1)/hx^2``, an upper bound on the spectrum of ``-Lap``."""
    cross = 4.0 * (grid.n - 1) / grid.hx**2 if grid.spec.Nx > 1 else 0.0
    return 4.0 / grid.hs**2 + cross


def potential_value(kind: str, x1, xprime_norm, n: int):
    """Pointwise value of the singular potential; vectorizes over arrays."""
    x1 = np.asarray(x1, dtype=float)
    r = np.asarray(xprime_norm, dtype=float)
    if np.any(x1 <= 0):
        raise ValueError("potential is defined for x1 > 0 only")
    if np.any(r < 0):
        raise ValueError("xprime_norm must be nonnegative")
    if kind in (None, "none", "None"):
        out = np.zeros(np.broadcast(x1, r).shape)
    elif kind == "V1":
        out = ((n - 3) / 2.0) ** 2 / (x1**2 + r**2)
    elif kind == "V2":
        # exp(-1/x1^2) / (exp(-1/x1^2) + r^2) rewritten to stay finite near the tip
        with np.errstate(over="ignore", invalid="ignore"):
            ratio = np.where(r == 0, 1.0, 1.0 / (1.0 + r**2 * np.exp(1.0 / x1**2)))
        out = ((n - 1) / 2.0) ** 2 * ratio / x1**2
    else:
        raise ValueError(f"unknown potential kind {kind!r}; expected one of {POTENTIALS}")
    return float(out) if out.ndim == 0 else out


def potential_field(grid: ConeGrid, kind: str) -> np.ndarray:
    return potential_value(kind, grid.x1_field(), grid.xprime_norm_field(), grid.n)


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    omega1: np.ndarray
    iterations: int
    residual: float


class EigenSolverError(RuntimeError):
    pass


def smallest_eigenpair(grid: ConeGrid, tol: float = 1e-10, maxiter: int = 10_000) -> EigenPair:
    """Ground state of ``-Lap`` by inverse power iteration.

    Stops once ``||-Lap w - lam w|| <= tol * lam`` (weighted norm).  The
    returned eigenfield is positive and has unit weighted ``L_2`` norm.
    """
    lu = stiffness_factor(grid)
    K = -laplacian_matrix(grid)
    w = np.ones(grid.interior_count)
    w /= math.sqrt(grid.weight * np.dot(w, w))
    lam = residual = math.inf
    for it in range(1, maxiter + 1):
        w = lu.solve(w)
        w /= math.sqrt(grid.weight * np.dot(w, w))
        Kw = K @ w
        lam = grid.weight * float(np.dot(w, Kw))
        residual = math.sqrt(grid.weight * float(np.sum((Kw - lam * w) ** 2)))
        if residual <= tol * lam:
            break
    else:
        raise EigenSolverError(
            f"inverse iteration did not converge in {maxiter} steps (residual {residual:.3e})"
        )
    if w.sum() < 0:
        w = -w
    return EigenPair(lam, w.reshape(grid.shape), it, residual)


def second_eigenmode(grid: ConeGrid, omega1: np.ndarray | None = None) -> np.ndarray:
    """A unit eigenfield of the second eigenvalue, weighted-orthogonal to ``omega1``."""
    if grid.interior_count < 3:
        raise ValueError("grid too small for a second eigenmode")
    K = (-laplacian_matrix(grid)).tocsc()
    vals, vecs = spla.eigsh(K, k=2, sigma=0.0, which="LM", v0=np.ones(grid.interior_count))
    order = np.argsort(vals)
    w2 = vecs[:, order[1]].reshape(grid.shape)
    if omega1 is None:
        omega1 = vecs[:, order[0]].reshape(grid.shape)
        omega1 = omega1 / grid.norm(omega1)
    w2 = w2 - grid.inner(w2, omega1) / grid.inner(omega1, omega1) * omega1
    w2 /= grid.norm(w2)
    # fix the sign deterministically
    flat = w2.ravel()
    if flat[np.argmax(np.abs(flat))] < 0:
        w2 = -w2
    return w2
