"""Sparse matrices for the MAC operators on interior velocity unknowns.

Interior ordering: u1 faces ``i = 1..n-1`` (rows) by ``j = 0..n-1``, then u2
faces ``i = 0..n-1`` by ``j = 1..n-1``, both C-ordered. These matrices are
assembled from 1D stencils with Kronecker products and serve as the second,
independent route against which the stencil kernels are tested.
"""

from functools import lru_cache

import numpy as np
import scipy.sparse as sp


def _second_diff_dirichlet(m, h):
    # nodes strictly between two zero boundary values
    return sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h**2


def _second_diff_ghost(m, h):
    # cell-centred values with a reflected ghost at each end
    d = -2.0 * np.ones(m)
    d[0] = d[-1] = -3.0
    return sp.diags([np.ones(m - 1), d, np.ones(m - 1)], [-1, 0, 1]) / h**2


def _face_to_cell_diff(n, h):
    # (n cells) x (n-1 interior faces): cell i gets face(i+1) - face(i)
    d = sp.lil_matrix((n, n - 1))
    for i in range(n):
        if i < n - 1:
            d[i, i] = 1.0
        if i > 0:
            d[i, i - 1] = -1.0
    return d.tocsr() / h


def _cell_to_corner_diff_ghost(n, h):
    # (n+1 corners) x (n cells) with reflected ghosts at both ends
    e = sp.lil_matrix((n + 1, n))
    e[0, 0] = 2.0
    e[n, n - 1] = -2.0
    for k in range(1, n):
        e[k, k] = 1.0
        e[k, k - 1] = -1.0
    return e.tocsr() / h


def _interior_selector(n):
    # (n+1) x (n-1): embeds interior face indices into all n+1 positions
    s = sp.lil_matrix((n + 1, n - 1))
    for k in range(n - 1):
        s[k + 1, k] = 1.0
    return s.tocsr()


@lru_cache(maxsize=16)
def operators(n):
    """Return ``dict`` with ``lap``, ``div``, ``strain`` and weights for grid n."""
    h = 1.0 / n
    In = sp.identity(n, format="csr")
    Im = sp.identity(n - 1, format="csr")
    lap1 = sp.kron(_second_diff_dirichlet(n - 1, h), In) + sp.kron(Im, _second_diff_ghost(n, h))
    lap2 = sp.kron(_second_diff_ghost(n, h), Im) + sp.kron(In, _second_diff_dirichlet(n - 1, h))
    lap = sp.block_diag((lap1, lap2), format="csr")

    d = _face_to_cell_diff(n, h)
    div = sp.hstack((sp.kron(d, In), sp.kron(In, d)), format="csr")

    e = _cell_to_corner_diff_ghost(n, h)
    sel = _interior_selector(n)
    s11 = sp.hstack((sp.kron(d, In), sp.csr_matrix((n * n, n * (n - 1)))))
    s22 = sp.hstack((sp.csr_matrix((n * n, (n - 1) * n)), sp.kron(In, d)))
    s12 = 0.5 * sp.hstack((sp.kron(sel, e), sp.kron(e, sel)))
    strain = sp.vstack((s11, s22, s12), format="csr")

    wc = np.full((n + 1, n + 1), h * h)
    wc[0, :] *= 0.5
    wc[-1, :] *= 0.5
    wc[:, 0] *= 0.5
    wc[:, -1] *= 0.5
    w_sigma = np.concatenate((np.full(2 * n * n, h * h), 2.0 * wc.ravel()))
    # -div(gamma(u)) with the adjoint taken in the weighted products
    strain_op = (strain.T @ sp.diags(w_sigma) @ strain / (h * h)).tocsr()
    return {
        "lap": lap,
        "div": div,
        "strain": strain,
        "w_sigma": w_sigma,
        "strain_op": strain_op,
    }
