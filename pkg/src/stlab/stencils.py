"""Finite-difference weights and differentiation matrices on 1-D node sets.

Weights come from Fornberg's recursion, so the same machinery serves the
uniform channel grid and the stretched half-line grid of the profile solver.
"""

import numpy as np
from scipy import sparse


def fd_weights(nodes, x0, order):
    """Weights w such that sum(w * f(nodes)) approximates f^(order)(x0).

    Exact for polynomials up to degree len(nodes)-1, hence formal accuracy
    len(nodes) - order.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    if order >= n:
        raise ValueError(f"need more than {order} nodes for derivative order {order}")
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def derivative_matrix(nodes, order, accuracy=4):
    """Sparse differentiation matrix for the order-th derivative on `nodes`.

    Interior rows use symmetric windows (2*(ceil(order/2)+ceil(accuracy/2))-1
    points); rows too close to an end use one-sided/shifted windows of
    order+accuracy points so the formal accuracy is uniform.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    half = (order + 1) // 2 + (accuracy + 1) // 2 - 1
    npts_side = order + accuracy
    if n < max(2 * half + 1, npts_side):
        raise ValueError(f"{n} nodes too few for derivative {order} at accuracy {accuracy}")
    rows, cols, vals = [], [], []
    for i in range(n):
        if i - half >= 0 and i + half <= n - 1:
            lo, hi = i - half, i + half + 1
        elif i - half < 0:
            lo, hi = 0, npts_side
        else:
            lo, hi = n - npts_side, n
        w = fd_weights(nodes[lo:hi], nodes[i], order)
        rows.extend([i] * (hi - lo))
        cols.extend(range(lo, hi))
        vals.extend(w)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def boundary_derivative_row(nodes, order, accuracy=4, side="left"):
    """One-sided stencil row for f^(order) at the first or last node."""
    nodes = np.asarray(nodes, dtype=float)
    npts = order + accuracy
    if side == "left":
        idx = np.arange(npts)
        x0 = nodes[0]
    else:
        idx = np.arange(nodes.size - npts, nodes.size)
        x0 = nodes[-1]
    return idx, fd_weights(nodes[idx], x0, order)
