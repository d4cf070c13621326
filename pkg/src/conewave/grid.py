"""Discrete stretched cone in log-radial coordinates.

The collar ``[x1_min, 1] x T^{n-1}`` is mapped by ``s = ln x1`` onto the box
``[s_min, 0] x T^{n-1}``.  Under this change of variables the cone measure
``dx1/x1 dx'`` becomes ``ds dx'``, so every cone norm is an ordinary
uniformly weighted sum over the interior nodes.

Fields are plain ``numpy`` arrays of shape ``grid.shape``; the Dirichlet rows
at ``s = s_min`` and ``s = 0`` are not stored and are implicitly zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

__all__ = ["GridSpec", "ConeGrid", "build_grid", "weighted_inner", "cone_norm"]


@dataclass(frozen=True)
class GridSpec:
    n: int
    Ns: int
    Nx: int
    s_min: float
    torus_length: float = 2 * math.pi

    def validate(self) -> list[str]:
        errors = []
        if int(self.n) != self.n or self.n < 3:
            errors.append(f"n must be an integer >= 3, got {self.n}")
        if int(self.Ns) != self.Ns or self.Ns < 4:
            errors.append(f"Ns must be an integer >= 4, got {self.Ns}")
        # Nx = 1 collapses the cross-section to its constant mode
        if int(self.Nx) != self.Nx or self.Nx < 1:
            errors.append(f"Nx must be a positive integer, got {self.Nx}")
        if not self.s_min < 0:
            errors.append(f"s_min must be negative, got {self.s_min}")
        if not self.torus_length > 0:
            errors.append(f"torus_length must be positive, got {self.torus_length}")
        return errors


@dataclass(frozen=True, eq=False)
class ConeGrid:
    """Uniform lattice on the log-radial box.

    ``s`` holds the interior radial nodes ``s_j = s_min + j*hs`` for
    ``j = 1..Ns-1``; ``xprime`` holds the periodic cross-section nodes
    ``k*hx`` for ``k = 0..Nx-1``.
    """

    spec: GridSpec
    hs: float
    hx: float
    weight: float
    s: np.ndarray = field(repr=False)
    xprime: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.spec.Ns - 1,) + (self.spec.Nx,) * (self.spec.n - 1)

    @property
    def interior_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def measure(self) -> float:
        """Total cone measure ``|s_min| * L^(n-1)`` of the truncated collar."""
        return abs(self.spec.s_min) * self.spec.torus_length ** (self.n - 1)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def ones(self) -> np.ndarray:
        return np.ones(self.shape)

    def s_field(self) -> np.ndarray:
        """The radial coordinate ``s = ln x1`` broadcast to a field."""
        return np.broadcast_to(
            self.s.reshape((-1,) + (1,) * (self.n - 1)), self.shape
        ).copy()

    def x1_field(self) -> np.ndarray:
        return np.exp(self.s_field())

    def xprime_norm_field(self) -> np.ndarray:
        """Distance of each node's cross-section point to the torus origin.

        Coordinates are folded to the fundamental domain ``(-L/2, L/2]``.
        """
        L = self.spec.torus_length
        folded = np.minimum(self.xprime, L - self.xprime)
        r2 = np.zeros(self.shape[1:])
        for axis in range(self.n - 1):
            shp = [1] * (self.n - 1)
            shp[axis] = -1
            r2 = r2 + folded.reshape(shp) ** 2
        return np.broadcast_to(np.sqrt(r2), self.shape).copy()

    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ValueError(f"field of shape {f.shape} does not live on grid {self.shape}")
        return f

    def integrate(self, f: np.ndarray) -> float:
        return self.weight * float(np.sum(f))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return weighted_inner(self, f, g)

    def norm(self, f: np.ndarray, p: float = 2.0) -> float:
        return cone_norm(self, f, p)


def build_grid(spec: GridSpec) -> ConeGrid:
    errors = spec.validate()
    if errors:
        raise ValueError("; ".join(errors))
    n, Ns, Nx = int(spec.n), int(spec.Ns), int(spec.Nx)
    spec = GridSpec(n, Ns, Nx, float(spec.s_min), float(spec.torus_length))
    hs = abs(spec.s_min) / Ns
    hx = spec.torus_length / Nx
    s = spec.s_min + hs * np.arange(1, Ns)
    xprime = hx * np.arange(Nx)
    # the Ns-1 interior rows share the radial length |s_min| equally, so the
    # weights sum to the cone measure of the truncated collar
    weight = abs(spec.s_min) / (Ns - 1) * hx ** (n - 1)
    return ConeGrid(spec, hs, hx, weight, s, xprime)


def weighted_inner(grid: ConeGrid, f: np.ndarray, g: np.ndarray) -> float:
    """``(f, g) = sum_B f g dx1/x1 dx'`` by uniform quadrature."""
    f = grid.check(f)
    g = grid.check(g)
    return grid.weight * float(np.dot(f.ravel(), g.ravel()))


def cone_norm(grid: ConeGrid, f: np.ndarray, p: float = 2.0) -> float:
    """Weighted ``L_p`` norm.  Accepts staggered arrays (gradient components)
    as well as node fields, since the quadrature weight is uniform."""
    if p < 1:
        raise ValueError(f"cone_norm needs p >= 1, got {p}")
    a = np.abs(np.asarray(f, dtype=float)).ravel()
    if p == 2:
        return math.sqrt(grid.weight * float(np.dot(a, a)))
    return (grid.weight * float(np.sum(a**p))) ** (1.0 / p)
