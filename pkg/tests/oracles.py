"""Independent numerical oracles used by the test suite.

These deliberately avoid the production code paths: spectra come from a
finite-difference (lumped P1) discretization of the vertex-coupled graph
Laplacian, and moment checks from adaptive quadrature on solved edge
functions or trapezoid sums on the discrete eigenvectors.
"""

from __future__ import annotations

import numpy as np
import scipy.integrate
import scipy.sparse
import scipy.sparse.linalg

from qgnlo.graphs import GraphSpec


def fd_graph_spectrum(graph: GraphSpec, n_states: int = 15,
                      mesh: float = 1e-4):
    """Lowest eigenpairs of -(1/2) d^2/ds^2 on the graph, discretized.

    The quadratic form (1/2) int |psi'|^2 is assembled over a uniform grid
    per edge with shared unknowns at internal vertices (continuity) and
    Dirichlet terminals; flux conservation is then automatic.  A point
    potential (strength/L) delta on a vertex adds (strength/L) u_v^2.
    Returns (energies, info) with eigenvectors for moment checks.
    """
    edges = graph.edges
    n_interior = []
    h_edge = []
    for e in edges:
        n_i = max(int(round(e.length / mesh)) - 1, 3)
        n_interior.append(n_i)
        h_edge.append(e.length / (n_i + 1))

    internal = [v.id for v in graph.vertices if v.kind == "internal"]
    v_index = {vid: i for i, vid in enumerate(internal)}
    offsets = np.concatenate([[0], np.cumsum(n_interior)]).astype(int)
    n_pts = int(offsets[-1])
    n_tot = n_pts + len(internal)

    rows, cols, vals = [], [], []
    weight = np.zeros(n_tot)

    def stiff(a, b, h):
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([0.5 / h, 0.5 / h, -0.5 / h, -0.5 / h])

    def node_index(e, end):
        vid = e.endpoints[end]
        if graph.vertices[vid].kind == "terminal":
            return None
        return n_pts + v_index[vid]

    for e in edges:
        h = h_edge[e.id]
        base = offsets[e.id]
        n_i = n_interior[e.id]
        weight[base:base + n_i] += h
        for i in range(n_i - 1):
            stiff(base + i, base + i + 1, h)
        left = node_index(e, 0)
        right = node_index(e, 1)
        if left is None:
            rows.append(base)
            cols.append(base)
            vals.append(0.5 / h)
        else:
            stiff(left, base, h)
            weight[left] += 0.5 * h
        if right is None:
            rows.append(base + n_i - 1)
            cols.append(base + n_i - 1)
            vals.append(0.5 / h)
        else:
            stiff(right, base + n_i - 1, h)
            weight[right] += 0.5 * h

    if graph.delta is not None:
        vidx = n_pts + v_index[graph.delta.vertex]
        rows.append(vidx)
        cols.append(vidx)
        vals.append(graph.delta.strength / graph.total_length)

    a_mat = scipy.sparse.csr_matrix((vals, (rows, cols)),
                                    shape=(n_tot, n_tot))
    w_mat = scipy.sparse.diags(weight)
    energies, vecs = scipy.sparse.linalg.eigsh(
        a_mat, k=n_states, M=w_mat, sigma=-1e-8, which="LM")
    order = np.argsort(energies)
    info = {"offsets": offsets, "n_interior": n_interior, "h": h_edge,
            "n_pts": n_pts, "v_index": v_index, "vecs": vecs[:, order],
            "graph": graph}
    return energies[order], info


def fd_eigenfunction_samples(info, state: int):
    """Per-edge (s_values, psi_values) including endpoint vertex values."""
    graph = info["graph"]
    vecs = info["vecs"]
    out = []
    for e in graph.edges:
        n_i = info["n_interior"][e.id]
        h = info["h"][e.id]
        base = info["offsets"][e.id]
        s = np.concatenate([[0.0], (np.arange(n_i) + 1) * h, [e.length]])
        psi = np.empty(n_i + 2)
        psi[1:-1] = vecs[base:base + n_i, state]
        for pos, node in ((0, e.endpoints[0]), (-1, e.endpoints[1])):
            if graph.vertices[node].kind == "terminal":
                psi[pos] = 0.0
            else:
                psi[pos] = vecs[info["n_pts"] + info["v_index"][node], state]
        out.append((s, psi))
    return out


def fd_transition_moments(graph: GraphSpec, info, n_states: int):
    """Trapezoid x/y moment matrices from normalized FD eigenfunctions."""
    states = [fd_eigenfunction_samples(info, n) for n in range(n_states)]
    norms = np.zeros(n_states)
    for n in range(n_states):
        for s, psi in states[n]:
            norms[n] += np.trapezoid(psi * psi, s)
    norms = np.sqrt(norms)
    x = np.zeros((n_states, n_states))
    y = np.zeros((n_states, n_states))
    for e in graph.edges:
        x0, y0 = e.origin_offset
        cth = np.cos(e.angle)
        sth = np.sin(e.angle)
        for n in range(n_states):
            s_n, psi_n = states[n][e.id]
            for m in range(n, n_states):
                prod = psi_n * states[m][e.id][1] / (norms[n] * norms[m])
                x[n, m] += np.trapezoid(prod * (x0 + cth * s_n), s_n)
                y[n, m] += np.trapezoid(prod * (y0 + sth * s_n), s_n)
    x = x + np.triu(x, 1).T
    y = y + np.triu(y, 1).T
    return x, y


def quad_edge_moment(solution, state_n: int, state_m: int, axis: str = "x"):
    """Adaptive-quadrature moment between two solved states."""
    graph = solution.graph
    total = 0.0
    for e in graph.edges:
        x0, y0 = e.origin_offset
        c = np.cos(e.angle) if axis == "x" else np.sin(e.angle)
        base = x0 if axis == "x" else y0

        def integrand(s):
            fn = solution.edge_values(state_n, e.id, s)
            fm = solution.edge_values(state_m, e.id, s)
            return fn * fm * (base + c * s)

        val, _ = scipy.integrate.quad(integrand, 0.0, e.length,
                                      limit=200, epsabs=1e-12, epsrel=1e-12)
        total += val
    return total
