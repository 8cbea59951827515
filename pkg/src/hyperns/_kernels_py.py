"""NumPy reference implementation of the stencil kernels.

Array layout on an ``n x n`` MAC grid:

* ``u1`` has shape ``(n+1, n)``: vertical faces, ``u1[i, j]`` at ``(i*h, (j+1/2)*h)``
* ``u2`` has shape ``(n, n+1)``: horizontal faces, ``u2[i, j]`` at ``((i+1/2)*h, j*h)``
* cell-centred scalars have shape ``(n, n)``
* corner (node) scalars have shape ``(n+1, n+1)``

Wall-normal faces (``u1[0]``, ``u1[n]``, ``u2[:, 0]``, ``u2[:, n]``) are
Dirichlet zeros. Tangential ghosts use linear reflection, so the wall value
sits halfway between the first interior face and its ghost.

Every function here must agree with ``_kernels.pyx`` to round-off.
"""

import numpy as np


def divergence(u1, u2, h):
    return (u1[1:, :] - u1[:-1, :] + u2[:, 1:] - u2[:, :-1]) / h


def gradient(p, h):
    n = p.shape[0]
    g1 = np.zeros((n + 1, n))
    g2 = np.zeros((n, n + 1))
    g1[1:-1, :] = (p[1:, :] - p[:-1, :]) / h
    g2[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / h
    return g1, g2


def _ghost_y(u1):
    return np.concatenate((-u1[:, :1], u1, -u1[:, -1:]), axis=1)


def _ghost_x(u2):
    return np.concatenate((-u2[:1, :], u2, -u2[-1:, :]), axis=0)


def laplacian(u1, u2, h):
    n = u1.shape[1]
    ih2 = 1.0 / (h * h)
    l1 = np.zeros((n + 1, n))
    l2 = np.zeros((n, n + 1))
    e1 = _ghost_y(u1)
    l1[1:-1, :] = (
        u1[2:, :] + u1[:-2, :] + e1[1:-1, 2:] + e1[1:-1, :-2] - 4.0 * u1[1:-1, :]
    ) * ih2
    e2 = _ghost_x(u2)
    l2[:, 1:-1] = (
        u2[:, 2:] + u2[:, :-2] + e2[2:, 1:-1] + e2[:-2, 1:-1] - 4.0 * u2[:, 1:-1]
    ) * ih2
    return l1, l2


def advection(u1, u2, h):
    """Conservative ``div(u (x) u)`` at faces with two-point averaging."""
    n = u1.shape[1]
    a1 = np.zeros((n + 1, n))
    a2 = np.zeros((n, n + 1))
    c1 = 0.5 * (u1[1:, :] + u1[:-1, :])
    c2 = 0.5 * (u2[:, 1:] + u2[:, :-1])
    e1 = _ghost_y(u1)
    e2 = _ghost_x(u2)
    u1c = 0.5 * (e1[:, :-1] + e1[:, 1:])
    u2c = 0.5 * (e2[:-1, :] + e2[1:, :])
    f = u1c * u2c
    cc1 = c1 * c1
    cc2 = c2 * c2
    a1[1:-1, :] = (cc1[1:, :] - cc1[:-1, :] + f[1:-1, 1:] - f[1:-1, :-1]) / h
    a2[:, 1:-1] = (f[1:, 1:-1] - f[:-1, 1:-1] + cc2[:, 1:] - cc2[:, :-1]) / h
    return a1, a2


def strain_rate(u1, u2, h):
    """Symmetric gradient: ``s11, s22`` at cell centres, ``s12`` at corners."""
    s11 = (u1[1:, :] - u1[:-1, :]) / h
    s22 = (u2[:, 1:] - u2[:, :-1]) / h
    e1 = _ghost_y(u1)
    e2 = _ghost_x(u2)
    s12 = 0.5 * ((e1[:, 1:] - e1[:, :-1]) + (e2[1:, :] - e2[:-1, :])) / h
    return s11, s22, s12


def stress_divergence(s11, s22, s12, h):
    n = s11.shape[0]
    f1 = np.zeros((n + 1, n))
    f2 = np.zeros((n, n + 1))
    f1[1:-1, :] = (s11[1:, :] - s11[:-1, :] + s12[1:-1, 1:] - s12[1:-1, :-1]) / h
    f2[:, 1:-1] = (s12[1:, 1:-1] - s12[:-1, 1:-1] + s22[:, 1:] - s22[:, :-1]) / h
    return f1, f2


def burgers_flux(u, h):
    """Central difference of ``u**2`` at interior nodes; end values 0."""
    out = np.zeros_like(u)
    sq = u * u
    out[1:-1] = (sq[2:] - sq[:-2]) / (2.0 * h)
    return out


def second_difference(u, h):
    out = np.zeros_like(u)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    return out


def toeplitz_tridiag_solve(diag, off, rhs):
    """Solve ``off*x[i-1] + diag*x[i] + off*x[i+1] = rhs[i]`` (Thomas)."""
    m = rhs.shape[0]
    cp = np.empty(m)
    dp = np.empty(m)
    cp[0] = off / diag
    dp[0] = rhs[0] / diag
    for i in range(1, m):
        den = diag - off * cp[i - 1]
        cp[i] = off / den
        dp[i] = (rhs[i] - off * dp[i - 1]) / den
    x = np.empty(m)
    x[-1] = dp[-1]
    for i in range(m - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x
