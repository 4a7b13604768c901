"""Normalization, closed-form transition moments, and sum-rule diagnostics.

Eigenstates live on edges as p*sin(ks) + q*cos(ks) (constant for the zero
mode), so every overlap and position-moment integral reduces to primitives
of cos(w s) and s*cos(w s) over an edge.  Those primitives are evaluated in
closed form with series fallbacks at small w*a; no numerical quadrature is
used anywhere in the production path.

Units are hbar = m = e = 1 with a single electron, so the
Thomas-Reiche-Kuhn sum rule for the combined x+y channel saturates at 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .graphs import GraphSpec
from .secular import SolverError, SpectralSolution

def _first_vertex_sign(solution: SpectralSolution, state: int) -> float:
    scale = float(np.max(np.abs(solution.coeffs[state])))
    for v in solution.graph.vertices:
        val = solution.vertex_value(state, v.id)
        if abs(val) > 1e-9 * scale:
            return math.copysign(1.0, val)
    return 1.0


def normalize(solution: SpectralSolution) -> SpectralSolution:
    """Normalize eigenstates over the edge-sum Hilbert space.

    Uses the closed-form overlap integrals; degenerate pairs are
    re-orthogonalized, and each state's sign is fixed so its first nonzero
    vertex amplitude is positive.
    """
    g = solution.graph
    n = solution.n_states
    coeffs = solution.coeffs.copy()
    ks = solution.ks

    gram = overlap_matrix(solution)
    norms = np.diag(gram).copy()
    if np.any(norms <= 0) or not np.all(np.isfinite(norms)):
        raise SolverError("zero-norm eigenstate: amplitude solver failure")
    coeffs /= np.sqrt(norms)[:, None, None]

    # re-orthogonalize degenerate pairs (Gram-Schmidt on the second member)
    for i in range(n - 1):
        if solution.degenerate[i] and solution.degenerate[i + 1] \
                and ks[i] == ks[i + 1]:
            c = gram[i, i + 1] / math.sqrt(norms[i] * norms[i + 1])
            if abs(c) > 1e-15:
                coeffs[i + 1] -= c * coeffs[i]
                coeffs[i + 1] /= math.sqrt(max(1.0 - c * c, 1e-300))

    out = SpectralSolution(g, ks, solution.families, coeffs,
                           solution.degenerate, normalized=True)
    for i in range(n):
        if _first_vertex_sign(out, i) < 0:
            coeffs[i] = -coeffs[i]
    return SpectralSolution(g, ks, solution.families, coeffs,
                            solution.degenerate, normalized=True)


# ---------------------------------------------------------------------------
# moment tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentTable:
    """Transition-moment matrices and energies for the retained basis."""
    energies: np.ndarray   # ascending, E_0 first
    x: np.ndarray          # (K, K), symmetric
    y: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.energies)

    @property
    def e10(self) -> float:
        return float(self.energies[1] - self.energies[0])

    @property
    def r01_max(self) -> float:
        """Largest possible |r_01|, sqrt(1/(2 E_10)) in hbar = m = 1 units."""
        return math.sqrt(1.0 / (2.0 * self.e10))

    @property
    def e(self) -> np.ndarray:
        """Normalized excitation energies; e_0 = 0, e_1 = 1."""
        return (self.energies - self.energies[0]) / self.e10

    @property
    def xi_x(self) -> np.ndarray:
        return self.x / self.r01_max

    @property
    def xi_y(self) -> np.ndarray:
        return self.y / self.r01_max

    def truncated(self, n: int) -> "MomentTable":
        if n > self.n_states:
            raise ValueError("cannot extend a moment table")
        return MomentTable(self.energies[:n], self.x[:n, :n], self.y[:n, :n])

    def rotated(self, phi: float) -> "MomentTable":
        """Moments in a frame whose x-axis points at angle phi."""
        c, s = math.cos(phi), math.sin(phi)
        return MomentTable(self.energies, c * self.x + s * self.y,
                           -s * self.x + c * self.y)

    def translated(self, dx: float, dy: float) -> "MomentTable":
        """Moments after shifting the whole graph by (dx, dy)."""
        eye = np.eye(self.n_states)
        return MomentTable(self.energies, self.x + dx * eye, self.y + dy * eye)

    def to_dict(self) -> dict:
        return {"energies": self.energies.tolist(), "x": self.x.tolist(),
                "y": self.y.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "MomentTable":
        return MomentTable(np.asarray(d["energies"], dtype=float),
                           np.asarray(d["x"], dtype=float),
                           np.asarray(d["y"], dtype=float))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @staticmethod
    def from_json(text: str) -> "MomentTable":
        return MomentTable.from_dict(json.loads(text))


def transition_moments(solution: SpectralSolution) -> MomentTable:
    """Position-moment matrices x_nm, y_nm summed over edges.

    The position weight on each edge is its origin offset plus the
    s-projection, so moments are measured from the graph origin, not the
    edge.  All integrals are closed-form.
    """
    if not solution.normalized:
        solution = normalize(solution)
    g = solution.graph
    n = solution.n_states
    x = np.zeros((n, n))
    y = np.zeros((n, n))
    o_all, m_all = _all_edge_integrals(solution)
    for e in g.edges:
        x0, y0 = e.origin_offset
        cth, sth = math.cos(e.angle), math.sin(e.angle)
        x += x0 * o_all[e.id] + cth * m_all[e.id]
        y += y0 * o_all[e.id] + sth * m_all[e.id]
    x = 0.5 * (x + x.T)
    y = 0.5 * (y + y.T)
    return MomentTable(solution.energies.copy(), x, y)


def _all_edge_integrals(solution: SpectralSolution):
    g = solution.graph
    lengths = np.array([e.length for e in g.edges])
    p = solution.coeffs[:, :, 0].T
    q = solution.coeffs[:, :, 1].T
    return _kernels.edge_integrals(solution.ks, p, q, lengths)


def overlap_matrix(solution: SpectralSolution) -> np.ndarray:
    """Gram matrix of the states under the edge-sum inner product."""
    o, _ = _all_edge_integrals(solution)
    return o.sum(axis=0)


def edge_moment_matrices(solution: SpectralSolution):
    """Per-edge overlap and first-moment matrices of a solution.

    Returns (O, M1) arrays of shape (n_edges, K, K) with
    O[e] = int phi_n phi_m ds and M1[e] = int phi_n phi_m s ds on edge e, so
    x_nm = sum_e x0_e O[e] + cos(theta_e) M1[e] and analogously for y.
    Useful for sweeping edge angles without re-solving the spectrum.
    """
    return _all_edge_integrals(solution)


# ---------------------------------------------------------------------------
# sum rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SumRuleDiagnostics:
    """Truncated Thomas-Reiche-Kuhn sums for one (n, m) index pair."""
    n: int
    m: int
    combined: float
    x_channel: float
    y_channel: float
    trace: dict[int, float]  # excited-state count -> combined S_nm


def sum_rule(table: MomentTable, n: int = 0, m: int = 0,
             channel: str = "combined",
             excited_terms: Optional[int] = None) -> float:
    """Truncated TRK sum S_nm = sum_p [2 E_p0 - (E_n0 + E_m0)] r_np r_pm.

    `excited_terms` counts the excited states p >= 1 retained (the ground
    state contributes whenever n, m > 0 and is always included).  The
    combined channel sums x and y contributions; the exact value is
    delta_nm in hbar = m = N = 1 units.
    """
    en = table.energies - table.energies[0]
    k = table.n_states if excited_terms is None else excited_terms + 1
    k = min(k, table.n_states)
    w = 2.0 * en[:k] - (en[n] + en[m])
    total = 0.0
    if channel in ("x", "combined"):
        total += float(np.sum(w * table.x[n, :k] * table.x[:k, m]))
    if channel in ("y", "combined"):
        total += float(np.sum(w * table.y[n, :k] * table.y[:k, m]))
    if channel not in ("x", "y", "combined"):
        raise ValueError(f"unknown channel {channel!r}")
    return total


def sum_rule_diagnostics(table: MomentTable, n: int = 0, m: int = 0,
                         trace_terms: Sequence[int] = (3, 4, 5, 6, 7)
                         ) -> SumRuleDiagnostics:
    """Truncated S_nm per channel plus a term-count convergence trace."""
    return SumRuleDiagnostics(
        n, m,
        combined=sum_rule(table, n, m, "combined"),
        x_channel=sum_rule(table, n, m, "x"),
        y_channel=sum_rule(table, n, m, "y"),
        trace={t: sum_rule(table, n, m, "combined", excited_terms=t)
               for t in trace_terms},
    )


def solve_moments(graph: GraphSpec, n_states: int = 32) -> MomentTable:
    """Convenience pipeline: solve, normalize, and build the moment table."""
    from .secular import solve_graph
    return transition_moments(normalize(solve_graph(graph, n_states)))
