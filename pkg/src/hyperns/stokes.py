"""Discrete Leray projection, Stokes operator and the D(A^{s/2}) norm scale.

The projection solves the cell-centred Neumann Poisson problem exactly with
a type-II DCT (the MAC ``div grad`` is diagonal in that basis). Stokes
solves use conjugate gradients on the solenoidal subspace; shifted systems
``(c + k*A) v = P r`` needed by the time integrators use a cached sparse LU
factorisation of the saddle-point form.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _sparse, kernels
from .grids import (
    MacGrid2D,
    ScalarField,
    VelocityField,
    discrete_divergence,
    discrete_gradient,
    divergence_residual,
)

log = logging.getLogger(__name__)

CG_RTOL = 1e-10
SOLENOIDAL_TOL = 1e-8


class StokesSolverError(RuntimeError):
    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class NotSolenoidalError(ValueError):
    pass


def _log_diag(op, residual, iters):
    if log.isEnabledFor(logging.DEBUG):
        log.debug(json.dumps({"op": op, "residual": float(residual), "iters": int(iters)}))


class ShiftedStokesSolver:
    """Solve ``c*v + k*K v + grad q = r, div v = 0`` for the velocity ``v``.

    ``K`` is the negative vector Laplacian (``kind="lap"``) or the
    strain operator ``-div(sym grad)`` (``kind="strain"``). For solenoidal
    arguments the result is ``(c + k*A)^{-1} P r``.
    """

    def __init__(self, grid: MacGrid2D, c: float, k: float, kind: str = "lap"):
        ops = _sparse.operators(grid.n)
        if kind == "lap":
            K = -ops["lap"]
        elif kind == "strain":
            K = ops["strain_op"]
        else:
            raise ValueError(f"unknown operator kind {kind!r}")
        nu = grid.n_velocity
        npr = grid.n * grid.n
        D = ops["div"]
        M = c * sp.identity(nu, format="csr") + k * K
        ones = sp.csr_matrix(np.ones((npr, 1)))
        big = sp.bmat(
            [[M, -D.T, None], [D, None, ones], [None, ones.T, None]], format="csc"
        )
        self.grid = grid
        self.c, self.k, self.kind = c, k, kind
        self._nu = nu
        self._size = big.shape[0]
        self._lu = spla.splu(big)

    def solve_interior(self, r: np.ndarray) -> np.ndarray:
        rhs = np.zeros(self._size)
        rhs[: self._nu] = r
        return self._lu.solve(rhs)[: self._nu]

    def solve(self, r: VelocityField) -> VelocityField:
        return VelocityField.from_interior(self.grid, self.solve_interior(r.interior()))


@dataclass
class StokesContext:
    """Per-grid cache of the projection, solvers and the Poincare constant."""

    grid: MacGrid2D
    _shifted: dict = field(default_factory=dict, repr=False)
    _eig: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        n, h = self.grid.n, self.grid.h
        k = np.arange(n)
        lam = -(4.0 / h**2) * np.sin(np.pi * k / (2 * n)) ** 2
        eig = lam[:, None] + lam[None, :]
        eig[0, 0] = 1.0
        self._inv_poisson = 1.0 / eig
        self._inv_poisson[0, 0] = 0.0

    # -- projection -----------------------------------------------------
    def poisson_neumann(self, rhs: np.ndarray) -> np.ndarray:
        """Zero-mean solution of ``div grad phi = rhs`` (rhs mean removed)."""
        rh = scipy.fft.dctn(rhs, type=2, norm="ortho")
        return scipy.fft.idctn(rh * self._inv_poisson, type=2, norm="ortho")

    def project(self, f: VelocityField) -> VelocityField:
        d = kernels.divergence(f.u1, f.u2, self.grid.h)
        phi = self.poisson_neumann(d)
        g1, g2 = kernels.gradient(phi, self.grid.h)
        return VelocityField(self.grid, f.u1 - g1, f.u2 - g2)

    def pressure_potential(self, f: VelocityField) -> ScalarField:
        return ScalarField(self.grid, self.poisson_neumann(discrete_divergence(f).values))

    # -- Stokes operator ------------------------------------------------
    def apply(self, u: VelocityField, check: bool = True) -> VelocityField:
        if check and divergence_residual(u) > SOLENOIDAL_TOL:
            raise NotSolenoidalError("apply_stokes requires solenoidal input")
        l1, l2 = kernels.laplacian(u.u1, u.u2, self.grid.h)
        return self.project(VelocityField(self.grid, -l1, -l2))

    def shifted(self, c: float, k: float, kind: str = "lap") -> ShiftedStokesSolver:
        key = (float(c), float(k), kind)
        solver = self._shifted.get(key)
        if solver is None:
            if len(self._shifted) > 32:
                self._shifted.clear()
            solver = ShiftedStokesSolver(self.grid, c, k, kind)
            self._shifted[key] = solver
        return solver

    def solve(self, f: VelocityField, method: str = "cg", rtol: float = CG_RTOL) -> VelocityField:
        if method == "direct":
            u = self.shifted(0.0, 1.0).solve(f)
            r = f - self.apply(u, check=False)
            _log_diag("solve_stokes/direct", r.norm() / max(f.norm(), 1e-300), 1)
            return u
        if method != "cg":
            raise ValueError(f"unknown method {method!r}")
        return self._cg(f, rtol)

    def _cg(self, f: VelocityField, rtol: float) -> VelocityField:
        fn = f.norm()
        x = VelocityField.zeros(self.grid)
        if fn == 0.0:
            return x
        r = f.copy()
        p = r.copy()
        rr = r.dot(r)
        history = []
        cap = 10 * self.grid.n**2
        for it in range(1, cap + 1):
            Ap = self.apply(p, check=False)
            alpha = rr / p.dot(Ap)
            x = x + alpha * p
            r = r - alpha * Ap
            rr_new = r.dot(r)
            res = np.sqrt(rr_new) / fn
            history.append(res)
            if res <= rtol:
                _log_diag("solve_stokes/cg", res, it)
                return x
            p = r + (rr_new / rr) * p
            rr = rr_new
        raise StokesSolverError(
            f"CG did not reach rtol={rtol:g} in {cap} iterations "
            f"(last residual {history[-1]:.3e})",
            history,
        )

    # -- spectrum -------------------------------------------------------
    def eigenpair(self):
        if self._eig is None:
            self._eig = estimate_lambda1(self)
        return self._eig

    @property
    def lambda1(self) -> float:
        return self.eigenpair()[0]


def make_context(n_or_grid) -> StokesContext:
    grid = n_or_grid if isinstance(n_or_grid, MacGrid2D) else MacGrid2D(int(n_or_grid))
    return StokesContext(grid)


def leray_project(ctx: StokesContext, f: VelocityField) -> VelocityField:
    if not f.is_finite():
        raise ValueError("leray_project: non-finite input")
    return ctx.project(f)


def apply_stokes(ctx: StokesContext, u: VelocityField) -> VelocityField:
    return ctx.apply(u)


def solve_stokes(ctx: StokesContext, f: VelocityField, method: str = "cg") -> VelocityField:
    return ctx.solve(f, method=method)


def estimate_lambda1(ctx: StokesContext, rtol: float = 1e-10, max_iter: int = 500, seed: int = 0):
    """Smallest eigenvalue of A and its unit eigenvector by inverse iteration.

    Stops when the Rayleigh quotient changes by at most ``rtol`` (relative)
    and the eigen-residual ``||A v - lam v||`` is below ``rtol * lam``.
    """
    grid = ctx.grid
    rng = np.random.default_rng(seed)
    v = VelocityField.from_stream_function(
        grid, lambda x, y: np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2
    )
    noise = VelocityField(grid, rng.standard_normal(grid.u1_shape), rng.standard_normal(grid.u2_shape))
    v = v / v.norm() + 1e-3 * ctx.project(noise) / ctx.project(noise).norm()
    v = v / v.norm()
    solver = ctx.shifted(0.0, 1.0)
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        w = solver.solve(v)
        v = w / w.norm()
        Av = ctx.apply(v, check=False)
        lam = v.dot(Av)
        res = (Av - lam * v).norm()
        if abs(lam - lam_old) <= rtol * lam and res <= rtol * lam:
            _log_diag("estimate_lambda1", res / lam, it)
            return float(lam), v
        lam_old = lam
    raise StokesSolverError(f"inverse iteration did not converge in {max_iter} steps")


def sobolev_norm(ctx: StokesContext, u: VelocityField, s: int) -> float:
    """``||u||_{D(A^{s/2})}`` for ``s`` in {-1, 0, 1, 2}."""
    if s not in (-1, 0, 1, 2):
        raise ValueError(f"unsupported s={s}; expected one of -1, 0, 1, 2")
    if divergence_residual(u) > 1e-12:
        u = ctx.project(u)
    if s == 0:
        return u.norm()
    if s == 1:
        return float(np.sqrt(max(u.dot(ctx.apply(u, check=False)), 0.0)))
    if s == 2:
        return ctx.apply(u, check=False).norm()
    return float(np.sqrt(max(u.dot(ctx.solve(u)), 0.0)))


def random_solenoidal(ctx: StokesContext, rng, smooth: bool = False) -> VelocityField:
    """Random divergence-free field of unit norm.

    ``smooth=True`` draws a random combination of low Fourier modes of a
    stream function instead of white noise.
    """
    grid = ctx.grid
    if smooth:
        a = rng.standard_normal((4, 4))

        def psi(x, y):
            out = np.zeros_like(x)
            for p in range(4):
                for q in range(4):
                    out += a[p, q] * np.sin((p + 1) * np.pi * x) * np.sin((q + 1) * np.pi * y)
            return out * np.sin(np.pi * x) * np.sin(np.pi * y)

        v = VelocityField.from_stream_function(grid, psi)
    else:
        v = ctx.project(
            VelocityField(grid, rng.standard_normal(grid.u1_shape), rng.standard_normal(grid.u2_shape))
        )
    return v / v.norm()


__all__ = [
    "StokesContext",
    "ShiftedStokesSolver",
    "StokesSolverError",
    "NotSolenoidalError",
    "make_context",
    "leray_project",
    "apply_stokes",
    "solve_stokes",
    "estimate_lambda1",
    "sobolev_norm",
    "random_solenoidal",
    "discrete_gradient",
]
