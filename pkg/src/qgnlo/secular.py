"""Secular systems, eigen-wavenumber search, and per-edge amplitudes.

Flux balance at each amplitude-carrying center gives one row of a small
coupling matrix M(k); rows are rationalized (multiplied through by the sines
and cosines of the incident chains) so every entry is analytic in k and the
determinant F(k) reproduces the canonical motif secular functions: a fully
terminated 3-star reduces to the quarter-sum-of-cosines form, a loop plus
stick to the lollipop form, and composites to products of motif secular
functions minus coupling terms.

Eigenmode families:

* determinant modes -- F(k_n) = 0, nonzero center amplitudes;
* loop-only modes   -- k = 2*pi*n/L_loop on a terminated loop, vanishing at
                       its center;
* the zero mode     -- k = 0, constant amplitude, closed graphs only.

Wires and bare cycles (no centers) are solved in closed form.  Solutions
store per-edge sin/cos coefficients so one moment engine serves all mode
families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .graphs import (Chain, EffectiveStructure, GraphSpec, MotifInstance,
                     effective_structure)

SIN_GUARD = 1e-8          # |sin(k*length)| below this routes to limit formulas
DEGENERATE_TOL = 1e-9     # |F| threshold for a double root on a separator
ROOT_SCAN_DIVISOR = 20.0  # initial scan step = pi / (divisor * total length)
MAX_SCAN_REFINES = 6
FLUX_GATE = 1e-6          # internal sanity gate, looser than the test bound


class SolverError(RuntimeError):
    """Raised when the spectral solver cannot complete reliably."""


# ---------------------------------------------------------------------------
# canonical secular functions
# ---------------------------------------------------------------------------

def secular_3star(a: float, b: float, c: float, k):
    """Canonical 3-star secular function.

    0.25*[cos(k*L1) + cos(k*L2) + cos(k*L3) - 3*cos(k*L)] with L = a+b+c and
    combination lengths L1 = |a+b-c|, L2 = |a-b+c|, L3 = |a-b-c|.
    """
    k = np.asarray(k, dtype=float)
    return 0.25 * (np.cos(k * abs(a + b - c)) + np.cos(k * abs(a - b + c))
                   + np.cos(k * abs(a - b - c)) - 3.0 * np.cos(k * (a + b + c)))


def secular_Nstar(lengths: Sequence[float], k):
    """N-pronged star secular function (rationalized cotangent sum).

    sum_i cos(k a_i) prod_{j != i} sin(k a_j); equals secular_3star at N = 3
    and the explicit 4-star trigonometric form at N = 4.
    """
    lengths = np.asarray(lengths, dtype=float)
    if lengths.size < 3:
        raise ValueError("a star needs at least 3 prongs")
    k = np.asarray(k, dtype=float)
    s = np.sin(np.multiply.outer(lengths, k))
    c = np.cos(np.multiply.outer(lengths, k))
    total = np.zeros(np.shape(k))
    n = lengths.size
    for i in range(n):
        term = c[i].copy()
        for j in range(n):
            if j != i:
                term = term * s[j]
        total = total + term
    return total if total.shape else float(total)


def secular_4star_explicit(a: float, b: float, c: float, d: float, k):
    """Explicit trigonometric form of the 4-star secular function."""
    k = np.asarray(k, dtype=float)
    return 0.5 * (np.sin(k * (a + b)) * np.cos(k * (c - d))
                  + np.cos(k * (a - b)) * np.sin(k * (c + d))
                  - np.sin(k * (a + b + c + d)))


def secular_lollipop(a: float, l_tot: float, k):
    """Lollipop secular function: stick length a, loop length l_tot.

    0.5*[3 cos k(a + l_tot/2) - cos k(a - l_tot/2)]; roots are the
    determinant modes.  Loop-only modes k = 2*pi*n/l_tot form a separate
    family.
    """
    k = np.asarray(k, dtype=float)
    return 0.5 * (3.0 * np.cos(k * (a + 0.5 * l_tot))
                  - np.cos(k * (a - 0.5 * l_tot)))


def secular_delta_wire(length: float, s0: float, g: float, k):
    """Secular function of a wire dressed with a (g/length)*delta at s0.

    Obtained by matching the derivative jump 2*(g/length)*psi(s0) across the
    point potential: sin(kL) + (2g/(kL)) sin(k s0) sin(k (L-s0)).  Reduces to
    sin(kL) at g = 0; as g -> inf the roots approach those of the two
    sub-boxes of lengths s0 and L-s0.
    """
    if not 0.0 < s0 < length:
        raise ValueError("delta position must lie strictly inside the wire")
    k = np.asarray(k, dtype=float)
    return (np.sin(k * length)
            + (2.0 * g / (k * length)) * np.sin(k * s0)
            * np.sin(k * (length - s0)))


# ---------------------------------------------------------------------------
# secular systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SecularSystem:
    """Rationalized motif coupling matrix M(k) and its determinant F(k)."""
    encoding: _kernels.SystemEncoding
    graph: Optional[GraphSpec] = None
    structure: Optional[EffectiveStructure] = None

    @property
    def n_centers(self) -> int:
        return self.encoding.n_centers

    def det(self, k: float) -> float:
        return float(_kernels.det_grid(self.encoding, np.array([float(k)]))[0])

    def det_grid(self, ks) -> np.ndarray:
        return _kernels.det_grid(self.encoding, np.asarray(ks, dtype=float))

    def matrix(self, k: float) -> np.ndarray:
        """Dense rationalized coupling matrix at one wavenumber."""
        enc = self.encoding
        n = enc.n_centers
        m = np.zeros((n, n))
        f = np.where(enc.elem_kind == 2, np.cos(0.5 * enc.elem_len * k),
                     np.sin(enc.elem_len * k))
        g = np.where(enc.elem_kind == 2, -2.0 * np.sin(0.5 * enc.elem_len * k),
                     np.cos(enc.elem_len * k))
        for v in range(n):
            idx = np.nonzero(enc.elem_row == v)[0]
            for j in idx:
                loo = 1.0
                for i in idx:
                    if i != j:
                        loo *= f[i]
                m[v, v] += g[j] * loo
                if enc.elem_kind[j] == 1:
                    m[v, enc.elem_other[j]] -= loo
            if enc.delta_coef[v] != 0.0:
                m[v, v] += enc.delta_coef[v] / k * np.prod(f[idx])
        return m

    def matrix_cot(self, ks) -> np.ndarray:
        """Unrationalized (cotangent-form) coupling matrices on a k grid.

        Symmetric, with poles at the element resonances; its eigenvalue
        branches are strictly decreasing in k between poles (every element
        contributes a negative-semidefinite k-derivative for g >= 0), which
        makes exact root counts per pole gap available.
        """
        enc = self.encoding
        ks = np.atleast_1d(np.asarray(ks, dtype=float))
        n = enc.n_centers
        m = np.zeros((len(ks), n, n))
        for i in range(enc.elem_row.shape[0]):
            v = enc.elem_row[i]
            if enc.elem_kind[i] == 2:
                m[:, v, v] -= 2.0 * np.tan(0.5 * enc.elem_len[i] * ks)
            else:
                m[:, v, v] += 1.0 / np.tan(enc.elem_len[i] * ks)
                if enc.elem_kind[i] == 1:
                    m[:, v, enc.elem_other[i]] -= 1.0 / np.sin(
                        enc.elem_len[i] * ks)
        for v in range(n):
            if enc.delta_coef[v] != 0.0:
                m[:, v, v] += enc.delta_coef[v] / ks
        return m

    def n_positive(self, ks) -> np.ndarray:
        """Number of positive eigenvalues of the cot-form matrix at each k."""
        m = self.matrix_cot(ks)
        n = self.encoding.n_centers
        if n == 1:
            return (m[:, 0, 0] > 0).astype(np.int64)
        if n == 2:
            det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
            tr = m[:, 0, 0] + m[:, 1, 1]
            return np.where(det < 0, 1, np.where(tr > 0, 2, 0)).astype(
                np.int64)
        return np.array([int(np.sum(np.linalg.eigvalsh(mm) > 0))
                         for mm in m], dtype=np.int64)


def _encode(centers: Sequence[int], pendants: Sequence[Chain],
            connectors: Sequence[Chain], loops: Sequence[Chain],
            delta_vertex: Optional[int] = None,
            delta_coef_value: float = 0.0) -> _kernels.SystemEncoding:
    index = {c: i for i, c in enumerate(centers)}
    rows, kinds, lens, others = [], [], [], []
    for ch in pendants:
        rows.append(index[ch.v_start])
        kinds.append(0)
        lens.append(ch.length)
        others.append(-1)
    for ch in connectors:
        u, v = index[ch.v_start], index[ch.v_end]
        rows.extend([u, v])
        kinds.extend([1, 1])
        lens.extend([ch.length, ch.length])
        others.extend([v, u])
    for ch in loops:
        rows.append(index[ch.v_start])
        kinds.append(2)
        lens.append(ch.length)
        others.append(-1)
    delta = np.zeros(len(centers))
    if delta_vertex is not None:
        delta[index[delta_vertex]] = delta_coef_value
    return _kernels.SystemEncoding(len(centers), np.array(rows, dtype=np.int64),
                                   np.array(kinds, dtype=np.int64),
                                   np.array(lens, dtype=float),
                                   np.array(others, dtype=np.int64), delta)


def assemble_system(graph: GraphSpec) -> SecularSystem:
    """Build the secular system of a composite graph (>= 1 center)."""
    eff = effective_structure(graph)
    if eff.special is not None:
        raise SolverError("bare wires and cycles have no secular system; "
                          "they are solved in closed form")
    delta_vertex = None
    coef = 0.0
    if graph.delta is not None:
        delta_vertex = graph.delta.vertex
        coef = 2.0 * graph.delta.strength / graph.total_length
    enc = _encode(eff.centers, eff.pendants, eff.connectors, eff.loops,
                  delta_vertex, coef)
    return SecularSystem(enc, graph, eff)


def assemble_composite(motifs: Sequence[MotifInstance]) -> SecularSystem:
    """Assemble a secular system directly from motif instances.

    Coupling chains shared by two motifs become connector elements; a chain
    claimed by more than two motifs is inconsistent wiring and is rejected.
    """
    centers = sorted(m.center for m in motifs)
    if len(set(centers)) != len(centers):
        raise SolverError("duplicate motif centers")
    claims: dict[tuple, list[Chain]] = {}
    pendants, loops = [], []
    for m in motifs:
        coupling_keys = set()
        for ch in m.couplings:
            key = tuple(sorted(link.edge_id for link in ch.links))
            coupling_keys.add(key)
            claims.setdefault(key, []).append(ch)
        for ch in m.prongs:
            key = tuple(sorted(link.edge_id for link in ch.links))
            if key in coupling_keys:
                continue
            if ch.kind == "pendant":
                pendants.append(ch)
            else:
                raise SolverError("non-pendant prong not declared as a "
                                  "coupling channel")
        loops.extend(m.loops)
    connectors = []
    center_set = set(centers)
    for key, chains in claims.items():
        if len(chains) > 2:
            raise SolverError(f"edges {sorted(key)} claimed by more than two "
                              "motifs; inconsistent wiring")
        ch = chains[0]
        if ch.v_start not in center_set or ch.v_end not in center_set:
            raise SolverError("coupling channel must join two motif centers")
        connectors.append(ch)
    return SecularSystem(_encode(centers, pendants, connectors, loops))


# ---------------------------------------------------------------------------
# spectral solutions
# ---------------------------------------------------------------------------

FAMILY_DET = "det"
FAMILY_LOOP = "loop-only"
FAMILY_ZERO = "zero"


@dataclass(frozen=True)
class SpectralSolution:
    graph: GraphSpec
    ks: np.ndarray                 # ascending; k = 0 first for closed graphs
    families: tuple[str, ...]
    coeffs: np.ndarray             # (n_states, n_edges, 2): sin/cos coefficients
    degenerate: np.ndarray         # bool per state: member of a degenerate pair
    normalized: bool = False

    @property
    def energies(self) -> np.ndarray:
        return 0.5 * self.ks ** 2

    @property
    def n_states(self) -> int:
        return len(self.ks)

    def edge_values(self, state: int, edge: int, s) -> np.ndarray:
        """Evaluate one state's edge function at edge coordinates s."""
        s = np.asarray(s, dtype=float)
        k = self.ks[state]
        c1, c2 = self.coeffs[state, edge]
        if k == 0.0:
            return np.full_like(s, c2)
        return c1 * np.sin(k * s) + c2 * np.cos(k * s)

    def vertex_value(self, state: int, vid: int) -> float:
        for e in self.graph.edges:
            if e.endpoints[0] == vid:
                return float(self.edge_values(state, e.id, 0.0))
            if e.endpoints[1] == vid:
                return float(self.edge_values(state, e.id, e.length))
        raise ValueError(f"vertex {vid} not on any edge")


# --- chain -> per-edge coefficient helpers ---------------------------------

def _chain_to_edges(graph: GraphSpec, chain: Chain, k: float, a_sin: float,
                    b_cos: float, out: np.ndarray) -> None:
    """Write the chain function a_sin*sin(k t) + b_cos*cos(k t) onto edges."""
    for link in chain.links:
        e = graph.edges[link.edge_id]
        if link.forward:
            p = link.offset
            c1 = a_sin * math.cos(k * p) - b_cos * math.sin(k * p)
            c2 = a_sin * math.sin(k * p) + b_cos * math.cos(k * p)
        else:
            q = link.offset + e.length
            c1 = -a_sin * math.cos(k * q) + b_cos * math.sin(k * q)
            c2 = a_sin * math.sin(k * q) + b_cos * math.cos(k * q)
        out[link.edge_id, 0] += c1
        out[link.edge_id, 1] += c2


def _guarded_sin(k: float, length: float) -> float:
    s = math.sin(k * length)
    if abs(s) < SIN_GUARD:
        raise SolverError("chain sine vanishes at this root; degenerate "
                          "configuration (rationally related lengths)")
    return s


def _edge_coeffs_from_centers(system: SecularSystem, k: float,
                              z: np.ndarray) -> np.ndarray:
    graph = system.graph
    eff = system.structure
    index = {c: i for i, c in enumerate(eff.centers)}
    out = np.zeros((len(graph.edges), 2))
    for ch in eff.pendants:
        zz = z[index[ch.v_start]]
        s = _guarded_sin(k, ch.length)
        _chain_to_edges(graph, ch, k, -zz * math.cos(k * ch.length) / s, zz,
                        out)
    for ch in eff.connectors:
        zu = z[index[ch.v_start]]
        zv = z[index[ch.v_end]]
        s = _guarded_sin(k, ch.length)
        _chain_to_edges(graph, ch, k, (zv - zu * math.cos(k * ch.length)) / s,
                        zu, out)
    for ch in eff.loops:
        zz = z[index[ch.v_start]]
        s = _guarded_sin(k, ch.length)
        _chain_to_edges(graph, ch, k,
                        zz * (1.0 - math.cos(k * ch.length)) / s, zz, out)
    return out


def solve_amplitudes(system: SecularSystem, k: float) -> np.ndarray:
    """Per-edge sin/cos coefficients of the determinant mode at root k.

    The null space of the rationalized coupling matrix gives the center
    amplitudes up to one normalization constant; edge coefficients follow
    from the canonical chain forms.  A two-dimensional null space routes to
    the degenerate solver.
    """
    if system.graph is None:
        raise SolverError("amplitude solving needs a geometry-backed system")
    if system.n_centers == 1:
        return _edge_coeffs_from_centers(system, k, np.array([1.0]))
    m = system.matrix(k)
    u, s, vh = np.linalg.svd(m)
    scale = max(s[0], 1.0)
    if s[-2] < 1e-8 * scale:
        raise SolverError("two-dimensional null space: degenerate composite "
                          "root")
    z = vh[-1]
    pivot = z[int(np.argmax(np.abs(z)))]
    if pivot < 0:
        z = -z
    return _edge_coeffs_from_centers(system, k, z)


def _full_system_amplitudes(graph: GraphSpec, k: float) -> list[np.ndarray]:
    """Null space of the full 2E x 2E boundary-condition system.

    Robust fallback when the motif-matrix construction is ill-conditioned
    (near-degenerate roots, chains near resonance).  Unknowns are the per
    edge sin/cos coefficients; rows are terminal amplitudes, continuity at
    internal vertices, and flux conservation (with the delta jump).  A
    two-dimensional null space yields an orthogonal pair.
    """
    ne = len(graph.edges)
    rows = []

    def value_row(eid, s, coef=1.0):
        row = np.zeros(2 * ne)
        row[2 * eid] = coef * math.sin(k * s)
        row[2 * eid + 1] = coef * math.cos(k * s)
        return row

    def deriv_away(eid, at_start):
        # d(phi)/ds away from the vertex, divided by k for conditioning
        row = np.zeros(2 * ne)
        ln = graph.edges[eid].length
        if at_start:
            row[2 * eid] = 1.0
        else:
            row[2 * eid] = -math.cos(k * ln)
            row[2 * eid + 1] = math.sin(k * ln)
        return row

    for v in graph.vertices:
        incident = []
        for e in graph.edges:
            if e.endpoints[0] == v.id:
                incident.append((e.id, True))
            if e.endpoints[1] == v.id:
                incident.append((e.id, False))
        if v.kind == "terminal":
            eid, at_start = incident[0]
            rows.append(value_row(eid, 0.0 if at_start
                                  else graph.edges[eid].length))
            continue
        first = None
        for eid, at_start in incident:
            s = 0.0 if at_start else graph.edges[eid].length
            if first is None:
                first = value_row(eid, s)
            else:
                rows.append(first - value_row(eid, s))
        flux = np.zeros(2 * ne)
        for eid, at_start in incident:
            flux += deriv_away(eid, at_start)
        if graph.delta is not None and graph.delta.vertex == v.id:
            eid, at_start = incident[0]
            s = 0.0 if at_start else graph.edges[eid].length
            flux -= value_row(
                eid, s, 2.0 * graph.delta.strength
                / (graph.total_length * k))
        rows.append(flux)

    m = np.array(rows)
    u, sv, vh = np.linalg.svd(m)
    scale = max(sv[0], 1.0)
    if sv[-1] > 1e-6 * scale:
        raise SolverError("full boundary system has no null space at this "
                          "wavenumber")
    return [vh[-1].reshape(ne, 2)]


def flux_residual(solution: SpectralSolution, state: int) -> float:
    """Largest relative probability-flux imbalance at any internal vertex."""
    g = solution.graph
    k = solution.ks[state]
    scale = float(np.max(np.abs(solution.coeffs[state]))) * max(k, 1.0)
    if scale == 0.0:
        return math.inf
    worst = 0.0
    for v in g.vertices:
        if v.kind == "terminal":
            continue
        total = 0.0
        for e in g.edges:
            c1, c2 = solution.coeffs[state, e.id]
            if e.endpoints[0] == v.id:
                total += k * c1  # derivative away from the vertex at s = 0
            if e.endpoints[1] == v.id:
                total += -k * (c1 * math.cos(k * e.length)
                               - c2 * math.sin(k * e.length))
        if g.delta is not None and g.delta.vertex == v.id:
            psi = solution.vertex_value(state, v.id)
            total -= 2.0 * g.delta.strength / g.total_length * psi
        worst = max(worst, abs(total) / scale)
    return worst


# ---------------------------------------------------------------------------
# degenerate 3-star machinery
# ---------------------------------------------------------------------------

def solve_degenerate(a: float, b: float, c: float, k_r: float):
    """Amplitude sets of a 3-star at a degenerate or singlet root.

    Edge functions are X_i sin(k (a_i - s)) with s measured from the center.
    When all three sines vanish (a double root on a separator) the limit
    formulas give two states, orthogonal under the weighted condition
    a*A1*A2 + b*B1*B2 + c*C1*C2 = 0.  When one or two sines vanish the
    singlet solution set applies and a single state is returned.
    """
    lengths = (a, b, c)
    sines = [math.sin(k_r * x) for x in lengths]
    small = [abs(s) < SIN_GUARD for s in sines]
    n_small = sum(small)
    if n_small == 0:
        raise SolverError("solve_degenerate called at a non-degenerate root")

    if n_small == 3:
        # cosines take exact +-1 values in the rational limit
        ca, cb, cc = (1.0 if math.cos(k_r * x) >= 0 else -1.0
                      for x in lengths)
        b1 = -(cc + ca) / cb
        c2 = -(a * cb - b * b1 * ca) / (c * cb - b * b1 * cc)
        b2 = -(ca + c2 * cc) / cb
        return [(1.0, b1, 1.0), (1.0, b2, c2)]

    if n_small == 2:
        # supported on the two vanishing-sine edges, zero on the third
        i, j = (x for x in range(3) if small[x])
        amps = [0.0, 0.0, 0.0]
        amps[j] = 1.0
        amps[i] = -math.cos(k_r * lengths[j]) / math.cos(k_r * lengths[i])
        return [tuple(amps)]

    # one sine vanishes: singlet solution set
    i = small.index(True)
    j, l = (x for x in range(3) if x != i)
    c_m = 1.0
    b_m = c_m * sines[l] / sines[j]
    a_m = -b_m * math.sin(k_r * (lengths[j] + lengths[l])) / (
        math.cos(k_r * lengths[i]) * sines[l])
    amps = [0.0, 0.0, 0.0]
    amps[i], amps[j], amps[l] = a_m, b_m, c_m
    return [tuple(amps)]


def _pendant_amp_states(system: SecularSystem, k: float) -> list[np.ndarray]:
    """Edge coefficients from center-referenced amplitude sets.

    Used for degenerate and singlet roots of pendant-only centers, where
    states are X_i sin(k (len_i - t)) with t measured from the center.
    """
    chains = system.structure.pendants
    graph = system.graph
    if len(chains) == 3:
        amp_sets = solve_degenerate(chains[0].length, chains[1].length,
                                    chains[2].length, k)
    else:
        amp_sets = _vanishing_pendant_amps(
            [ch.length for ch in chains], k)
    states = []
    for amps in amp_sets:
        out = np.zeros((len(graph.edges), 2))
        for x, ch in zip(amps, chains):
            # X sin(k(len-t)) = X sin(k len) cos(kt) - X cos(k len) sin(kt)
            _chain_to_edges(graph, ch, k, -x * math.cos(k * ch.length),
                            x * math.sin(k * ch.length), out)
        states.append(out)
    return states


def _singlet_states(system: SecularSystem, k: float) -> list[np.ndarray]:
    """States at a root where a center's element sines vanish together.

    Pendants resonating at k (sin(k len) = 0) and loops at an antisymmetric
    resonance (sin(k L) = 0 with cos(k L) = -1) support eigenstates with
    zero amplitude at the center, confined to those elements and tied by a
    single flux-balance relation.  Bare 3-stars route through the published
    limit formulas instead.
    """
    eff = system.structure
    graph = system.graph
    if (len(eff.centers) == 1 and not eff.connectors and not eff.loops
            and len(eff.pendants) == 3):
        return _pendant_amp_states(system, k)
    states = []
    for c in eff.centers:
        vanish = []
        for ch in eff.pendants:
            if ch.v_start == c and abs(math.sin(k * ch.length)) < SIN_GUARD:
                # flux of X sin(k (len - t)) away from the center
                vanish.append((ch, math.cos(k * ch.length), "pendant"))
        for ch in eff.loops:
            if ch.v_start == c and abs(math.sin(k * ch.length)) < SIN_GUARD \
                    and math.cos(k * ch.length) < 0.0:
                vanish.append((ch, -2.0, "loop"))
        if len(vanish) < 2:
            continue
        cos_row = np.array([v[1] for v in vanish])
        weights = np.array([v[0].length for v in vanish])
        for amps in _null_space_basis(cos_row, weights):
            out = np.zeros((len(graph.edges), 2))
            for x, (ch, _, kind) in zip(amps, vanish):
                if kind == "pendant":
                    _chain_to_edges(graph, ch, k,
                                    -x * math.cos(k * ch.length),
                                    x * math.sin(k * ch.length), out)
                else:
                    _chain_to_edges(graph, ch, k, x, 0.0, out)
            states.append(out)
    if not states:
        raise SolverError("vanishing chain sine at a determinant root that "
                          "is not a pendant or loop singlet; degenerate "
                          "composite")
    return states


def _null_space_basis(row: np.ndarray, weights: np.ndarray) -> list:
    """Basis of the hyperplane row . x = 0, orthogonal under the weights."""
    dim = len(row) - 1
    basis = []
    for seed in range(len(row)):
        v = np.zeros(len(row))
        v[seed] = 1.0
        v -= row * (row @ v) / (row @ row)
        for b in basis:
            v -= b * np.sum(weights * b * v) / np.sum(weights * b * b)
        if np.max(np.abs(v)) > 1e-10:
            basis.append(v / np.max(np.abs(v)))
        if len(basis) == dim:
            break
    return basis


def _vanishing_pendant_amps(lengths, k: float) -> list[tuple]:
    """Amplitude sets at a root where >= 2 pendant sines vanish.

    The states live on the vanishing-sine pendants with zero center
    amplitude; flux conservation restricts the amplitudes to the null space
    of the cosine row, orthogonalized under the length weighting.
    """
    sines = [math.sin(k * x) for x in lengths]
    vanish = [i for i, s in enumerate(sines) if abs(s) < SIN_GUARD]
    if len(vanish) < 2:
        raise SolverError("singlet construction needs two vanishing sines")
    cos_row = np.array([math.cos(k * lengths[i]) for i in vanish])
    w = np.array([lengths[i] for i in vanish])
    out = []
    for b in _null_space_basis(cos_row, w):
        amps = [0.0] * len(lengths)
        for i, vi in zip(vanish, b):
            amps[i] = float(vi)
        out.append(tuple(amps))
    return out


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def _is_bare_star(eff: EffectiveStructure) -> bool:
    return (eff.special is None and len(eff.centers) == 1
            and not eff.connectors and not eff.loops
            and len(eff.pendants) >= 3)


def _star_cell_roots(system: SecularSystem, k_max: float) -> np.ndarray:
    """One bracketed root per separator cell (n*pi/L, (n+1)*pi/L).

    A double root sitting on a separator (rationally related prongs) shows
    up as a vanishing determinant at the cell boundary and is returned with
    multiplicity two.
    """
    l_star = sum(ch.length for ch in system.structure.pendants)
    cell = math.pi / l_star
    n_cells = int(math.ceil(k_max / cell)) + 1
    bounds = cell * np.arange(n_cells + 1)
    eps = 1e-9 * cell
    lo = bounds[:-1] + eps
    hi = bounds[1:] - eps
    flo = system.det_grid(lo)
    fhi = system.det_grid(hi)
    have = (flo < 0) != (fhi < 0)
    roots = list(_kernels.bisect(system.encoding, lo[have], hi[have],
                                 flo[have]))

    fb = system.det_grid(bounds[1:])
    for kb, f in zip(bounds[1:], fb):
        if abs(f) < DEGENERATE_TOL:
            h = 1e-6 * cell
            df = (system.det(kb + h) - system.det(kb - h)) / (2 * h)
            if abs(df) * cell < 1e-6:
                roots.extend([kb, kb])
    roots = np.sort(np.asarray(roots))
    return roots[(roots > 0) & (roots <= k_max)]


SPURIOUS_SIN_TOL = 1e-10


def _drop_spurious(system: SecularSystem, roots: np.ndarray) -> np.ndarray:
    """Remove rationalization artifacts at connector sine zeros.

    A connector's sine multiplies both incident rows, so the rationalized
    determinant vanishes identically at sin(k e) = 0 even though the
    coupling matrix itself only has a simple pole there; such points are
    not eigenvalues unless the remaining flux terms happen to balance.
    """
    if system.structure is None or not system.structure.connectors:
        return roots
    keep = np.ones(len(roots), dtype=bool)
    for ch in system.structure.connectors:
        keep &= np.abs(np.sin(roots * ch.length)) > SPURIOUS_SIN_TOL
    return roots[keep]


def _raw_scan(system: SecularSystem, grid: np.ndarray) -> np.ndarray:
    vals = system.det_grid(grid)
    idx = np.nonzero((vals[:-1] < 0) != (vals[1:] < 0))[0]
    return _kernels.bisect(system.encoding, grid[idx], grid[idx + 1],
                           vals[idx])


def _scan_roots(system: SecularSystem, k_max: float, l_tot: float,
                expected: float) -> np.ndarray:
    """Dense grid scan with sign-change bisection and Weyl-count refinement.

    Around every connector resonance m*pi/e the grid is locally refined so a
    genuine root sharing a cell with the spurious zero there is still found;
    roots below pi/(4 L) are underflow artifacts of closed graphs and are
    discarded.
    """
    k_floor = 0.25 * math.pi / l_tot
    step = math.pi / (ROOT_SCAN_DIVISOR * l_tot)
    conns = system.structure.connectors if system.structure else ()
    roots = np.empty(0)
    for _ in range(MAX_SCAN_REFINES + 1):
        found = [_raw_scan(system,
                           np.append(np.arange(step * 1e-3, k_max, step),
                                     k_max))]
        for ch in conns:
            m = 1
            while m * math.pi / ch.length <= k_max + step:
                r = m * math.pi / ch.length
                local = np.linspace(max(r - step, step * 1e-3), r + step, 161)
                found.append(_raw_scan(system, local))
                m += 1
        roots = np.concatenate(found)
        roots = np.sort(roots[(roots > k_floor) & (roots <= k_max)])
        if len(roots) > 1:
            distinct = np.append(True, np.diff(roots) > 1e-9 * (1 + roots[1:]))
            roots = roots[distinct]
        roots = _drop_spurious(system, roots)
        if len(roots) >= expected:
            break
        step *= 0.5
    return roots


def _loop_only_ks(eff: EffectiveStructure, k_max: float):
    out = []
    for ch in eff.loops:
        n = 1
        while 2 * math.pi * n / ch.length <= k_max:
            out.append((2 * math.pi * n / ch.length, ch))
            n += 1
    return out


def enumerate_special_modes(graph: GraphSpec,
                            k_max: float) -> list[tuple[float, str]]:
    """Extra mode families: the closed-graph zero mode and loop-only modes."""
    eff = effective_structure(graph)
    out = []
    if graph.closed:
        out.append((0.0, FAMILY_ZERO))
    for k, _ in _loop_only_ks(eff, k_max):
        out.append((k, FAMILY_LOOP))
    return sorted(out)


def _pole_points(system: SecularSystem, k_max: float) -> np.ndarray:
    """Resonances of the cot-form matrix in (0, k_max], sorted and merged."""
    enc = system.encoding
    poles = []
    for i in range(enc.elem_row.shape[0]):
        ln = enc.elem_len[i]
        if enc.elem_kind[i] == 2:
            base = math.pi / ln
            vals = base * (2 * np.arange(0, int(k_max / (2 * base)) + 1) + 1)
        else:
            base = math.pi / ln
            vals = base * np.arange(1, int(k_max / base) + 2)
        poles.append(vals[vals <= k_max])
    poles = np.sort(np.concatenate(poles)) if poles else np.empty(0)
    if len(poles) > 1:
        poles = poles[np.append(True, np.diff(poles) > 1e-12)]
    return poles


def _rescue_gap(system: SecularSystem, lo: float, hi: float,
                missing: int) -> list[float]:
    """Recover `missing` roots in (lo, hi) by eigenvalue-count subdivision."""
    out = []
    stack = [(lo, hi, missing)]
    depth = 0
    while stack and depth < 4096:
        depth += 1
        a, b, c = stack.pop()
        if c <= 0 or b - a <= 1e-13 * (1.0 + b):
            continue
        if c == 1:
            fa = system.det(a)
            root = float(_kernels.bisect(system.encoding, np.array([a]),
                                         np.array([b]), np.array([fa]))[0])
            out.append(root)
            continue
        mid = 0.5 * (a + b)
        left = int(system.n_positive(a)[0] - system.n_positive(mid)[0])
        stack.append((a, mid, left))
        stack.append((mid, b, c - left))
    return out


def _verify_counts(system: SecularSystem, roots: np.ndarray,
                   k_max: float, k_floor: float) -> np.ndarray:
    """Exact per-gap root counts from the monotone eigenvalue branches.

    Between consecutive poles of the cot-form matrix every eigenvalue branch
    decreases strictly, so the root count in a gap is the drop in the number
    of positive eigenvalues across it.  Gaps where the dense scan found
    fewer roots are subdivided until the stragglers are bracketed.
    """
    bounds = np.concatenate([[k_floor], _pole_points(system, k_max), [k_max]])
    bounds = np.unique(bounds)
    bounds = bounds[(bounds >= k_floor) & (bounds <= k_max)]
    if len(bounds) < 2:
        return roots
    eps = 1e-9
    lo = bounds[:-1] + eps * (1.0 + bounds[:-1])
    hi = bounds[1:] - eps * (1.0 + bounds[1:])
    ok = hi > lo
    lo, hi = lo[ok], hi[ok]
    n_lo = system.n_positive(lo)
    n_hi = system.n_positive(hi)
    exact = n_lo - n_hi
    found = np.searchsorted(roots, hi) - np.searchsorted(roots, lo)
    rescued = []
    for a, b, ce, cf in zip(lo, hi, exact, found):
        if cf < ce:
            got = _rescue_gap(system, a, b, int(ce - cf))
            rescued.extend(g for g in got
                           if not np.any(np.abs(roots - g) < 1e-9 * (1 + g)))
    if rescued:
        roots = np.sort(np.concatenate([roots, rescued]))
    return roots


def find_roots(system: SecularSystem, k_max: float) -> np.ndarray:
    """All determinant-mode roots in (0, k_max], ascending.

    Bare stars use separator-cell bracketing.  Composites use a dense scan
    at initial step pi/(20 L) with sign-change bisection, halving the step
    until the count reaches the Weyl estimate L*k_max/pi less the special
    modes and a small slack; the result is then verified gap-by-gap against
    the exact interlacing count and any stragglers (close pairs the grid
    stepped over) are rescued by subdivision.
    """
    if system.graph is None or system.structure is None:
        raise SolverError("root search needs a geometry-backed system")
    graph = system.graph
    eff = system.structure
    l_tot = graph.total_length
    if _is_bare_star(eff):
        roots = _star_cell_roots(system, k_max)
    else:
        n_special = len(_loop_only_ks(eff, k_max)) + (1 if graph.closed else 0)
        slack = 1 + len(graph.vertices) / 2
        expected = graph.total_length * k_max / math.pi - n_special - slack
        roots = _scan_roots(system, k_max, l_tot, expected)
    return _verify_counts(system, roots, k_max, 0.25 * math.pi / l_tot)


# ---------------------------------------------------------------------------
# closed-form wire and cycle solutions
# ---------------------------------------------------------------------------

def _solve_path(graph: GraphSpec, chain: Chain, n_states: int):
    entries = []
    for n in range(1, n_states + 1):
        k = n * math.pi / chain.length
        out = np.zeros((len(graph.edges), 2))
        _chain_to_edges(graph, chain, k, 1.0, 0.0, out)
        entries.append((k, FAMILY_DET, out, False))
    return entries


def _solve_cycle(graph: GraphSpec, chain: Chain, n_states: int):
    ne = len(graph.edges)
    entries = [(0.0, FAMILY_ZERO,
                np.column_stack([np.zeros(ne), np.ones(ne)]), False)]
    n = 1
    while len(entries) < n_states:
        k = 2 * math.pi * n / chain.length
        for a_sin, b_cos in ((0.0, 1.0), (1.0, 0.0)):
            out = np.zeros((ne, 2))
            _chain_to_edges(graph, chain, k, a_sin, b_cos, out)
            entries.append((k, FAMILY_DET, out, True))
        n += 1
    return entries


# ---------------------------------------------------------------------------
# top-level solver
# ---------------------------------------------------------------------------

def _trim_completing_pairs(entries, n_states):
    """Keep n_states entries, extending to finish a split degenerate pair."""
    if len(entries) <= n_states:
        return entries
    cut = n_states
    if entries[cut - 1][3] and entries[cut][3] \
            and entries[cut][0] == entries[cut - 1][0]:
        cut += 1
    return entries[:cut]


def solve_graph(graph: GraphSpec, n_states: int = 32,
                k_max: Optional[float] = None) -> SpectralSolution:
    """Solve a graph for its lowest eigenmodes (unnormalized amplitudes).

    Returns at least n_states modes, ascending in k, with the zero mode
    first for closed graphs.  Degenerate pairs are never split by the state
    cut.  Flux conservation is checked at every internal vertex.
    """
    eff = effective_structure(graph)

    if eff.special is not None:
        if eff.kind == "path":
            entries = _solve_path(graph, eff.special, n_states)
        else:
            entries = _solve_cycle(graph, eff.special, n_states)
        entries = _trim_completing_pairs(entries, n_states)
        return SpectralSolution(graph, np.array([e[0] for e in entries]),
                                tuple(e[1] for e in entries),
                                np.array([e[2] for e in entries]),
                                np.array([e[3] for e in entries]))

    system = assemble_system(graph)
    l_tot = graph.total_length
    if k_max is None:
        k_max = math.pi * (n_states + 3 + len(graph.vertices)) / l_tot

    for _ in range(8):
        det_ks = find_roots(system, k_max)
        special = enumerate_special_modes(graph, k_max)
        if len(det_ks) + len(special) >= n_states:
            break
        k_max *= 1.4
    else:
        raise SolverError("could not collect the requested number of states")

    raw = [(k, FAMILY_DET, None) for k in det_ks]
    raw.extend((k, FAMILY_LOOP, ch) for k, ch in _loop_only_ks(eff, k_max))
    if graph.closed:
        raw.append((0.0, FAMILY_ZERO, None))
    raw.sort(key=lambda t: (t[0], t[1]))

    ne = len(graph.edges)
    entries = []
    i = 0
    while i < len(raw):
        k, fam, ch = raw[i]
        if fam == FAMILY_ZERO:
            entries.append((k, fam,
                            np.column_stack([np.zeros(ne), np.ones(ne)]),
                            False))
            i += 1
            continue
        if fam == FAMILY_LOOP:
            out = np.zeros((ne, 2))
            _chain_to_edges(graph, ch, k, 1.0, 0.0, out)
            entries.append((k, fam, out, False))
            i += 1
            continue
        # determinant modes: a duplicated root means a separator double root
        pendant_only = (len(eff.centers) == 1 and not eff.connectors
                        and not eff.loops)
        if (i + 1 < len(raw) and raw[i + 1][1] == FAMILY_DET
                and raw[i + 1][0] == k and pendant_only):
            for out in _pendant_amp_states(system, k):
                entries.append((k, fam, out, True))
            i += 2
            continue
        try:
            entries.append((k, fam, solve_amplitudes(system, k), False))
        except SolverError:
            try:
                # singlet root: the state vanishes at a resonating center
                outs = _singlet_states(system, k)
            except SolverError:
                # near-degenerate composite: fall back to the full
                # boundary-condition null space
                outs = _full_system_amplitudes(graph, k)
            for out in outs:
                entries.append((k, fam, out, False))
        i += 1

    entries = _trim_completing_pairs(entries, n_states)
    sol = SpectralSolution(graph, np.array([e[0] for e in entries]),
                           tuple(e[1] for e in entries),
                           np.array([e[2] for e in entries]),
                           np.array([e[3] for e in entries]))
    _validate(sol)
    return sol


def _validate(sol: SpectralSolution) -> None:
    for i, fam in enumerate(sol.families):
        if fam == FAMILY_ZERO:
            continue
        res = flux_residual(sol, i)
        if res > FLUX_GATE:
            raise SolverError(f"flux residual {res:.2e} at state {i} "
                              f"(k = {sol.ks[i]:.6f})")
