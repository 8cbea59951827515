"""MAC grid on the unit square, the 1D interval grid, and field containers.

All inner products are h^2-weighted Euclidean sums (h-weighted in 1D), which
makes the discrete gradient exactly minus the adjoint of the divergence.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class MacGrid2D:
    """Staggered grid with ``n`` cells per side on ``[0, 1]^2``."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or self.n % 2:
            raise GridError("n must be even and >= 8")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def u1_shape(self):
        return (self.n + 1, self.n)

    @property
    def u2_shape(self):
        return (self.n, self.n + 1)

    @property
    def p_shape(self):
        return (self.n, self.n)

    @property
    def n_velocity(self) -> int:
        """Number of interior (unknown) velocity faces."""
        return 2 * self.n * (self.n - 1)

    @cached_property
    def x_centers(self):
        return (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def x_faces(self):
        return np.arange(self.n + 1) * self.h

    def u1_coords(self):
        return np.meshgrid(self.x_faces, self.x_centers, indexing="ij")

    def u2_coords(self):
        return np.meshgrid(self.x_centers, self.x_faces, indexing="ij")

    def p_coords(self):
        return np.meshgrid(self.x_centers, self.x_centers, indexing="ij")

    def corner_coords(self):
        return np.meshgrid(self.x_faces, self.x_faces, indexing="ij")

    @cached_property
    def corner_weights(self):
        """Trapezoidal quadrature weights on the (n+1)^2 corner nodes."""
        w = np.full((self.n + 1, self.n + 1), self.h * self.h)
        w[0, :] *= 0.5
        w[-1, :] *= 0.5
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
        return w


def make_mac_grid(n: int) -> MacGrid2D:
    return MacGrid2D(int(n) if isinstance(n, (int, np.integer)) else n)


@dataclass
class ScalarField:
    grid: MacGrid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.p_shape)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.p_shape))

    def mean(self) -> float:
        return float(self.values.mean())

    def normalized(self) -> "ScalarField":
        """Copy with zero mean (pressure gauge)."""
        return ScalarField(self.grid, self.values - self.values.mean())

    def dot(self, other: "ScalarField") -> float:
        return float(np.sum(self.values * other.values)) * self.grid.h**2

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))


@dataclass
class VelocityField:
    """Face-centred velocity; wall-normal boundary faces are always zero."""

    grid: MacGrid2D
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        self.u1 = np.ascontiguousarray(self.u1, dtype=float).reshape(self.grid.u1_shape)
        self.u2 = np.ascontiguousarray(self.u2, dtype=float).reshape(self.grid.u2_shape)
        self.apply_boundary()

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.u1_shape), np.zeros(grid.u2_shape))

    @classmethod
    def from_functions(cls, grid, f1, f2):
        """Sample ``f1(x, y)`` at u1 faces and ``f2(x, y)`` at u2 faces."""
        x1, y1 = grid.u1_coords()
        x2, y2 = grid.u2_coords()
        return cls(grid, f1(x1, y1) * np.ones_like(x1), f2(x2, y2) * np.ones_like(x2))

    @classmethod
    def from_stream_function(cls, grid, psi):
        """Discrete curl of a corner stream function: ``u = (psi_y, -psi_x)``.

        The result is divergence-free to round-off; boundary faces vanish
        when ``psi`` is constant along the walls.
        """
        xc, yc = grid.corner_coords()
        s = np.asarray(psi(xc, yc), dtype=float) * np.ones_like(xc)
        u1 = (s[:, 1:] - s[:, :-1]) / grid.h
        u2 = -(s[1:, :] - s[:-1, :]) / grid.h
        return cls(grid, u1, u2)

    @classmethod
    def from_interior(cls, grid, vec):
        n = grid.n
        m = (n - 1) * n
        u1 = np.zeros(grid.u1_shape)
        u2 = np.zeros(grid.u2_shape)
        u1[1:-1, :] = vec[:m].reshape(n - 1, n)
        u2[:, 1:-1] = vec[m:].reshape(n, n - 1)
        return cls(grid, u1, u2)

    def interior(self) -> np.ndarray:
        return np.concatenate((self.u1[1:-1, :].ravel(), self.u2[:, 1:-1].ravel()))

    def apply_boundary(self) -> "VelocityField":
        self.u1[0, :] = 0.0
        self.u1[-1, :] = 0.0
        self.u2[:, 0] = 0.0
        self.u2[:, -1] = 0.0
        return self

    def copy(self) -> "VelocityField":
        return VelocityField(self.grid, self.u1.copy(), self.u2.copy())

    def dot(self, other: "VelocityField") -> float:
        h2 = self.grid.h**2
        return float(np.sum(self.u1 * other.u1) + np.sum(self.u2 * other.u2)) * h2

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def max_abs(self) -> float:
        return float(max(np.abs(self.u1).max(), np.abs(self.u2).max()))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u1).all() and np.isfinite(self.u2).all())

    def __add__(self, other):
        return VelocityField(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        return VelocityField(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c):
        return VelocityField(self.grid, c * self.u1, c * self.u2)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return VelocityField(self.grid, self.u1 / c, self.u2 / c)

    def __neg__(self):
        return VelocityField(self.grid, -self.u1, -self.u2)


def discrete_divergence(v: VelocityField) -> ScalarField:
    return ScalarField(v.grid, kernels.divergence(v.u1, v.u2, v.grid.h))


def discrete_gradient(p: ScalarField) -> VelocityField:
    g1, g2 = kernels.gradient(np.ascontiguousarray(p.values), p.grid.h)
    return VelocityField(p.grid, g1, g2)


def vector_laplacian(v: VelocityField) -> VelocityField:
    """Five-point Laplacian per component with reflected tangential ghosts."""
    l1, l2 = kernels.laplacian(v.u1, v.u2, v.grid.h)
    return VelocityField(v.grid, l1, l2)


def divergence_residual(v: VelocityField) -> float:
    """Dimensionless ``h*||div v|| / ||v||`` (0 for the zero field)."""
    nv = v.norm()
    if nv == 0.0:
        return 0.0
    return discrete_divergence(v).norm() * v.grid.h / nv


def dump_fields_csv(fields: dict, stream=None) -> str:
    """Write fields as ``site_type,i,j,value`` rows sorted by site, i, j.

    ``fields`` maps a site-type label (e.g. ``"u1"``, ``"p"``) to a 2D array.
    Returns the CSV text; also writes it to ``stream`` when given.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["site_type", "i", "j", "value"])
    for site in sorted(fields):
        arr = np.asarray(fields[site])
        for i in range(arr.shape[0]):
            for j in range(arr.shape[1]):
                w.writerow([site, i, j, repr(float(arr[i, j]))])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def velocity_dump(v: VelocityField) -> dict:
    return {"u1": v.u1, "u2": v.u2}


@dataclass(frozen=True)
class Grid1D:
    """Uniform nodes ``x_i = x0 + i*h``, ``i = 0..n``, with ``h = length/n``."""

    length: float
    n: int
    x0: float = 0.0
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.length > 0:
            raise GridError("length must be positive")
        if self.n < 4:
            raise GridError("need at least 4 intervals")
        object.__setattr__(self, "x", self.x0 + self.h * np.arange(self.n + 1))

    @property
    def h(self) -> float:
        return self.length / self.n

    @classmethod
    def whole_line(cls, horizon: float, h: float) -> "Grid1D":
        """Truncation ``[-(T+8), T+8]`` used for compact-support studies."""
        half = horizon + 8.0
        n = int(np.ceil(2 * half / h))
        n += n % 2
        return cls(2 * half, n, -half)

    def pin(self, u: np.ndarray) -> np.ndarray:
        u[0] = 0.0
        u[-1] = 0.0
        return u
