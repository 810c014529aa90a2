"""Minimal bilinear (Q1) finite elements on mapped quadrilateral grids.

Shared by the pressure recovery and the functional-inequality estimators.
Nodes are the mapped-grid nodes ordered idx = i*ny + j; elements are the
grid cells, integrated isoparametrically with 2x2 Gauss.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

_G = 1.0 / np.sqrt(3.0)
_GAUSS = [(-_G, -_G), (_G, -_G), (_G, _G), (-_G, _G)]


def _shape(xi, eta):
    n = np.array(
        [
            0.25 * (1 - xi) * (1 - eta),
            0.25 * (1 + xi) * (1 - eta),
            0.25 * (1 + xi) * (1 + eta),
            0.25 * (1 - xi) * (1 + eta),
        ]
    )
    dn_dxi = np.array(
        [-0.25 * (1 - eta), 0.25 * (1 - eta), 0.25 * (1 + eta), -0.25 * (1 + eta)]
    )
    dn_deta = np.array(
        [-0.25 * (1 - xi), -0.25 * (1 + xi), 0.25 * (1 + xi), 0.25 * (1 - xi)]
    )
    return n, dn_dxi, dn_deta


def element_connectivity(nx, ny):
    """(n_elem, 4) node indices of each cell, counterclockwise."""
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    i = i.ravel()
    j = j.ravel()
    n0 = i * ny + j
    n1 = (i + 1) * ny + j
    n2 = (i + 1) * ny + (j + 1)
    n3 = i * ny + (j + 1)
    return np.column_stack([n0, n1, n2, n3])


def assemble_q1(x, y, nx, ny, coeff=None):
    """Stiffness K, mass M, and lumped mass for nodes (x, y) flattened.

    coeff, if given, is a nodal scalar multiplying the mass integrand.
    Returns (K, M, lumped) as CSR / CSR / array.
    """
    conn = element_connectivity(nx, ny)
    ne = conn.shape[0]
    xe = x[conn]  # (ne, 4)
    ye = y[conn]
    ce = coeff[conn] if coeff is not None else None

    ke = np.zeros((ne, 4, 4))
    me = np.zeros((ne, 4, 4))
    for gx, gy in _GAUSS:
        n, dxi, deta = _shape(gx, gy)
        jx_xi = xe @ dxi
        jx_eta = xe @ deta
        jy_xi = ye @ dxi
        jy_eta = ye @ deta
        det = jx_xi * jy_eta - jx_eta * jy_xi
        # gradients of shape functions in physical coordinates
        bx = (jy_eta[:, None] * dxi[None, :] - jy_xi[:, None] * deta[None, :]) / det[
            :, None
        ]
        by = (-jx_eta[:, None] * dxi[None, :] + jx_xi[:, None] * deta[None, :]) / det[
            :, None
        ]
        w = det
        ke += w[:, None, None] * (
            bx[:, :, None] * bx[:, None, :] + by[:, :, None] * by[:, None, :]
        )
        cval = (ce @ n) if ce is not None else 1.0
        scal = w * cval if ce is not None else w
        me += scal[:, None, None] * (n[None, :, None] * n[None, None, :])

    ndof = x.size
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    K = sparse.csr_matrix((ke.ravel(), (rows, cols)), shape=(ndof, ndof))
    M = sparse.csr_matrix((me.ravel(), (rows, cols)), shape=(ndof, ndof))
    return K, M, np.asarray(M.sum(axis=1)).ravel()


def assemble_grad_load(x, y, nx, ny, fx, fy):
    """Load vector b_A = integral (fx, fy) . grad(phi_A) dx, fields nodal."""
    conn = element_connectivity(nx, ny)
    xe = x[conn]
    ye = y[conn]
    fxe = fx[conn]
    fye = fy[conn]
    be = np.zeros((conn.shape[0], 4))
    for gx, gy in _GAUSS:
        n, dxi, deta = _shape(gx, gy)
        jx_xi = xe @ dxi
        jx_eta = xe @ deta
        jy_xi = ye @ dxi
        jy_eta = ye @ deta
        det = jx_xi * jy_eta - jx_eta * jy_xi
        bx = (jy_eta[:, None] * dxi[None, :] - jy_xi[:, None] * deta[None, :]) / det[
            :, None
        ]
        by = (-jx_eta[:, None] * dxi[None, :] + jx_xi[:, None] * deta[None, :]) / det[
            :, None
        ]
        fxq = fxe @ n
        fyq = fye @ n
        be += det[:, None] * (fxq[:, None] * bx + fyq[:, None] * by)
    b = np.zeros(x.size)
    np.add.at(b, conn.ravel(), be.ravel())
    return b


def assemble_div(x, y, nx, ny):
    """B1, B2 with (B_k a_k)_A = integral phi_A * d(a_k)/d(x_k) dx (Q1-Q1)."""
    conn = element_connectivity(nx, ny)
    xe = x[conn]
    ye = y[conn]
    ne = conn.shape[0]
    b1e = np.zeros((ne, 4, 4))
    b2e = np.zeros((ne, 4, 4))
    for gx, gy in _GAUSS:
        n, dxi, deta = _shape(gx, gy)
        jx_xi = xe @ dxi
        jx_eta = xe @ deta
        jy_xi = ye @ dxi
        jy_eta = ye @ deta
        det = jx_xi * jy_eta - jx_eta * jy_xi
        bx = (jy_eta[:, None] * dxi[None, :] - jy_xi[:, None] * deta[None, :]) / det[
            :, None
        ]
        by = (-jx_eta[:, None] * dxi[None, :] + jx_xi[:, None] * deta[None, :]) / det[
            :, None
        ]
        b1e += det[:, None, None] * (n[None, :, None] * bx[:, None, :])
        b2e += det[:, None, None] * (n[None, :, None] * by[:, None, :])
    ndof = x.size
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    B1 = sparse.csr_matrix((b1e.ravel(), (rows, cols)), shape=(ndof, ndof))
    B2 = sparse.csr_matrix((b2e.ravel(), (rows, cols)), shape=(ndof, ndof))
    return B1, B2
