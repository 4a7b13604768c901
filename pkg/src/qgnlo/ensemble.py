"""Monte Carlo geometry sampling, parameter scans, and ensemble summaries.

Geometry sampling laws: tree-like classes draw edge lengths uniformly on
(0.05, 1] (then rescale so the longest edge is 1, harmless for intrinsic
tensors) and edge angles uniformly on [0, 2 pi).  Loop-bearing classes draw
vertex positions uniformly in a box, rejecting graphs whose shortest edge
falls below 0.05 after the rescale.  The barbell family draws one closed
two-bell geometry and derives the open variants by splitting vertices, so
all five variants range over the same vertex distribution and differ only
in topology.

Every sample owns an independent RNG stream derived from (seed, sample id),
so records are reproducible individually and ensembles merge
deterministically regardless of execution order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .graphs import DeltaSpec, GraphError, GraphSpec, build_graph
from .secular import SolverError, solve_graph
from .states import MomentTable, edge_moment_matrices, normalize, sum_rule, \
    transition_moments
from .tensors import TensorSet, beta_tensor, compute_tensor_set, \
    f_three_level, g_three_level, optimal_orientation, three_level

MIN_EDGE = 0.05
MAX_REJECT = 500
N_LOW_KS = 10
DELTA_G_MAX = 30.0


# ---------------------------------------------------------------------------
# geometry builders
# ---------------------------------------------------------------------------

def _lengths(rng, n):
    ln = rng.uniform(MIN_EDGE, 1.0, n)
    return ln / ln.max()

def _angles(rng, n):
    return rng.uniform(0.0, 2.0 * math.pi, n)


def _chain_positions(start, lengths, angles):
    pos = [start]
    for ln, th in zip(lengths, angles):
        x, y = pos[-1]
        pos.append((x + ln * math.cos(th), y + ln * math.sin(th)))
    return pos


def _normalize_scale(positions, adjacency):
    pts = np.asarray(positions, dtype=float)
    longest = max(np.hypot(*(pts[u] - pts[v])) for u, v in adjacency)
    return [tuple(p) for p in pts / longest]


def _reject_short(positions, adjacency):
    pts = np.asarray(positions, dtype=float)
    return any(np.hypot(*(pts[u] - pts[v])) < MIN_EDGE
               for u, v in adjacency)


def _positions_graph(rng, n_box, adjacency, cls, extra_prongs=()):
    """Vertex-position sampling with rescale and short-edge rejection.

    extra_prongs: (attach_vertex, ...) pendant edges appended by angle and
    length draws after the box vertices.
    """
    for _ in range(MAX_REJECT):
        pos = [tuple(p) for p in rng.uniform(0.0, 1.0, (n_box, 2))]
        adj = list(adjacency)
        for attach in extra_prongs:
            th = rng.uniform(0.0, 2.0 * math.pi)
            ln = rng.uniform(MIN_EDGE, 1.0)
            x, y = pos[attach]
            adj.append((attach, len(pos)))
            pos.append((x + ln * math.cos(th), y + ln * math.sin(th)))
        pos = _normalize_scale(pos, adj)
        if _reject_short(pos, adj):
            continue
        try:
            return build_graph(pos, adj, topology_class=cls)
        except GraphError:
            continue
    raise SolverError(f"could not sample a valid {cls} geometry")


def _wire(rng, n_edges, cls):
    pos = _chain_positions((0.0, 0.0), _lengths(rng, n_edges),
                           _angles(rng, n_edges))
    return build_graph(pos, [(i, i + 1) for i in range(n_edges)],
                       topology_class=cls)


def _nstar(rng, n):
    ln = _lengths(rng, n)
    th = _angles(rng, n)
    pos = [(0.0, 0.0)] + [(l * math.cos(t), l * math.sin(t))
                          for l, t in zip(ln, th)]
    return build_graph(pos, [(0, i + 1) for i in range(n)],
                       topology_class=f"{n}-star")


def _open_lollipop(rng):
    ln = _lengths(rng, 4)
    th = _angles(rng, 4)
    pos = [(0.0, 0.0),
           (ln[0] * math.cos(th[0]), ln[0] * math.sin(th[0])),
           (ln[1] * math.cos(th[1]), ln[1] * math.sin(th[1]))]
    pos += _chain_positions((0.0, 0.0), ln[2:], th[2:])[1:]
    return build_graph(pos, [(0, 1), (0, 2), (0, 3), (3, 4)],
                       topology_class="open-lollipop")


def _star_star(rng):
    ln = _lengths(rng, 5)
    th = _angles(rng, 5)
    c2 = (ln[4] * math.cos(th[4]), ln[4] * math.sin(th[4]))
    pos = [(0.0, 0.0),
           (ln[0] * math.cos(th[0]), ln[0] * math.sin(th[0])),
           (ln[1] * math.cos(th[1]), ln[1] * math.sin(th[1])),
           c2,
           (c2[0] + ln[2] * math.cos(th[2]), c2[1] + ln[2] * math.sin(th[2])),
           (c2[0] + ln[3] * math.cos(th[3]), c2[1] + ln[3] * math.sin(th[3]))]
    return build_graph(pos, [(0, 1), (0, 2), (0, 3), (3, 4), (3, 5)],
                       topology_class="star-star")


def _pop_star(rng):
    # triangle loop (0,1,2) + stick 0-3 + two prongs at 3
    for _ in range(MAX_REJECT):
        tri = [tuple(p) for p in rng.uniform(0.0, 1.0, (3, 2))]
        th = _angles(rng, 3)
        ln = rng.uniform(MIN_EDGE, 1.0, 3)
        c = (tri[0][0] + ln[0] * math.cos(th[0]),
             tri[0][1] + ln[0] * math.sin(th[0]))
        pos = tri + [c,
                     (c[0] + ln[1] * math.cos(th[1]),
                      c[1] + ln[1] * math.sin(th[1])),
                     (c[0] + ln[2] * math.cos(th[2]),
                      c[1] + ln[2] * math.sin(th[2]))]
        adj = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (3, 5)]
        pos = _normalize_scale(pos, adj)
        if _reject_short(pos, adj):
            continue
        return build_graph(pos, adj, topology_class="pop-star")
    raise SolverError("could not sample a valid pop-star geometry")


def _bubble(rng):
    # two 4-valent centers joined by two 2-edge arcs, plus two prongs each
    for _ in range(MAX_REJECT):
        z1 = (0.0, 0.0)
        z2 = tuple(rng.uniform(-1.0, 1.0, 2))
        m1 = tuple(rng.uniform(-1.0, 1.0, 2))
        m2 = tuple(rng.uniform(-1.0, 1.0, 2))
        pos = [z1, z2, m1, m2]
        adj = [(0, 2), (2, 1), (0, 3), (3, 1)]
        for attach in (0, 0, 1, 1):
            th = rng.uniform(0.0, 2.0 * math.pi)
            ln = rng.uniform(MIN_EDGE, 1.0)
            x, y = pos[attach]
            adj.append((attach, len(pos)))
            pos.append((x + ln * math.cos(th), y + ln * math.sin(th)))
        pos = _normalize_scale(pos, adj)
        if _reject_short(pos, adj):
            continue
        return build_graph(pos, adj, topology_class="bubble")
    raise SolverError("could not sample a valid bubble geometry")


def _barbell_positions(rng):
    """Closed two-bell geometry: triangles in side-by-side boxes + bridge."""
    for _ in range(MAX_REJECT):
        t1 = rng.uniform(0.0, 1.0, (3, 2))
        t2 = rng.uniform(0.0, 1.0, (3, 2)) + np.array([1.3, 0.0])
        pos = [tuple(p) for p in np.vstack([t1, t2])]
        adj = [(0, 1), (1, 2), (2, 0), (1, 3), (3, 4), (4, 5), (5, 3)]
        pos = _normalize_scale(pos, adj)
        if not _reject_short(pos, adj):
            return pos
    raise SolverError("could not sample a valid barbell geometry")


def _split_vertex(pos, adj, edge_idx, end):
    """Detach one end of an edge onto a fresh coincident terminal."""
    pos = list(pos)
    adj = [list(e) for e in adj]
    old = adj[edge_idx][end]
    adj[edge_idx][end] = len(pos)
    pos.append(pos[old])
    return pos, [tuple(e) for e in adj]


# closed barbell adjacency: bells (0,1,2) and (3,4,5), bridge 1-3;
# edge ids: 0:(0,1) 1:(1,2) 2:(2,0) 3:(1,3) 4:(3,4) 5:(4,5) 6:(5,3)
_BARBELL_ADJ = [(0, 1), (1, 2), (2, 0), (1, 3), (3, 4), (4, 5), (5, 3)]


def _barbell_variant(rng, cls):
    pos = _barbell_positions(rng)
    adj = _BARBELL_ADJ
    if cls == "barbell-loop":
        pass
    elif cls == "barbell-star-loop":
        # open bell 2 at its bridge vertex 3: lollipop with a long bent tail
        pos, adj = _split_vertex(pos, adj, 6, 1)
    elif cls == "barbell-2fork-pop":
        # open bell 2 at a non-bridge vertex: loop + bridge + bent 2-fork
        pos, adj = _split_vertex(pos, adj, 5, 1)
    elif cls == "barbell-dual-2fork":
        # open both bells at non-bridge vertices
        pos, adj = _split_vertex(pos, adj, 5, 1)
        pos, adj = _split_vertex(pos, adj, 2, 0)
    elif cls == "barbell-line":
        # open both bells at the bridge vertices: a 7-edge wire
        pos, adj = _split_vertex(pos, adj, 6, 1)
        pos, adj = _split_vertex(pos, adj, 2, 0)
    else:
        raise ValueError(f"unknown barbell variant {cls}")
    return build_graph(pos, adj, topology_class=cls)


def _delta_wire(rng):
    s0 = rng.uniform(0.05, 0.95)
    g = rng.uniform(0.0, DELTA_G_MAX)
    return build_graph([(0.0, 0.0), (s0, 0.0), (1.0, 0.0)], [(0, 1), (1, 2)],
                       topology_class="delta-wire", delta=DeltaSpec(1, g))


GEOMETRY_BUILDERS: dict[str, Callable] = {
    "bent-wire": lambda rng: _wire(rng, 2, "bent-wire"),
    "loop": lambda rng: _positions_graph(rng, 3, [(0, 1), (1, 2), (2, 0)],
                                         "loop"),
    "3-star": lambda rng: _nstar(rng, 3),
    "4-star": lambda rng: _nstar(rng, 4),
    "5-star": lambda rng: _nstar(rng, 5),
    "6-star": lambda rng: _nstar(rng, 6),
    "7-star": lambda rng: _nstar(rng, 7),
    "lollipop": lambda rng: _positions_graph(
        rng, 3, [(0, 1), (1, 2), (2, 0)], "lollipop", extra_prongs=(0,)),
    "bull": lambda rng: _positions_graph(
        rng, 3, [(0, 1), (1, 2), (2, 0)], "bull", extra_prongs=(0, 1)),
    "lollipop-bull": lambda rng: _positions_graph(
        rng, 3, [(0, 1), (1, 2), (2, 0)], "lollipop-bull",
        extra_prongs=(0, 0)),
    "open-lollipop": _open_lollipop,
    "wire-lollipop": lambda rng: _wire(rng, 4, "wire-lollipop"),
    "star-star": _star_star,
    "pop-star": _pop_star,
    "bubble": _bubble,
    "barbell-2fork-pop": lambda rng: _barbell_variant(rng, "barbell-2fork-pop"),
    "barbell-dual-2fork": lambda rng: _barbell_variant(rng,
                                                       "barbell-dual-2fork"),
    "barbell-star-loop": lambda rng: _barbell_variant(rng,
                                                      "barbell-star-loop"),
    "barbell-line": lambda rng: _barbell_variant(rng, "barbell-line"),
    "barbell-loop": lambda rng: _barbell_variant(rng, "barbell-loop"),
    "delta-wire": _delta_wire,
}


def available_classes() -> list[str]:
    return list(GEOMETRY_BUILDERS)


# ---------------------------------------------------------------------------
# records and summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleRecord:
    sample_id: int
    class_name: str
    lengths: tuple[float, ...]
    angles: tuple[float, ...]
    extra: dict
    low_ks: tuple[float, ...]
    tensors: Optional[TensorSet]
    failed: bool = False
    error: str = ""

    CSV_PREFIX = ("sample_id", "failed", "lengths", "angles", "extra")

    @staticmethod
    def csv_header() -> list[str]:
        return list(EnsembleRecord.CSV_PREFIX) \
            + [f"k{i + 1}" for i in range(N_LOW_KS)] \
            + list(TensorSet.CSV_FIELDS)

    def csv_row(self) -> list[str]:
        ks = list(self.low_ks) + [math.nan] * (N_LOW_KS - len(self.low_ks))
        tensor_vals = (self.tensors.csv_values() if self.tensors is not None
                       else [math.nan] * len(TensorSet.CSV_FIELDS))
        return ([str(self.sample_id), "1" if self.failed else "0",
                 ";".join(repr(v) for v in self.lengths),
                 ";".join(repr(v) for v in self.angles),
                 json.dumps(self.extra, sort_keys=True)]
                + [repr(float(v)) for v in ks]
                + [repr(float(v)) for v in tensor_vals])


@dataclass(frozen=True)
class EnsembleSummary:
    class_name: str
    n_samples: int
    seed: int
    n_states: int
    n_failed: int
    max_abs_beta_xxx: float
    argmax_id: int
    argmax_lengths: tuple[float, ...]
    argmax_angles: tuple[float, ...]
    max_beta_norm: float
    gamma_min: float
    gamma_max: float

    def to_dict(self) -> dict:
        return {
            "class": self.class_name,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "n_states": self.n_states,
            "n_failed": self.n_failed,
            "max_abs_beta_xxx": self.max_abs_beta_xxx,
            "argmax_id": self.argmax_id,
            "argmax_lengths": list(self.argmax_lengths),
            "argmax_angles": list(self.argmax_angles),
            "max_beta_norm": self.max_beta_norm,
            "gamma_min": self.gamma_min,
            "gamma_max": self.gamma_max,
        }


@dataclass(frozen=True)
class EnsembleResult:
    records: list[EnsembleRecord]
    summary: EnsembleSummary


def _geometry_params(graph: GraphSpec):
    lengths = tuple(e.length for e in graph.edges)
    angles = tuple(e.angle for e in graph.edges)
    extra = {}
    if graph.delta is not None:
        extra["delta_strength"] = graph.delta.strength
        extra["delta_vertex"] = graph.delta.vertex
    return lengths, angles, extra


def sample_rng(seed: int, sample_id: int) -> np.random.Generator:
    """Independent, reproducible RNG stream for one sample."""
    return np.random.default_rng(np.random.SeedSequence((seed, sample_id)))


def solve_record(class_name: str, seed: int, sample_id: int,
                 n_states: int = 30) -> EnsembleRecord:
    """Sample one geometry and solve it end to end.

    Near-degenerate solver failures are retried once with a 1e-9 relative
    length jitter; a second failure marks the record failed.
    """
    rng = sample_rng(seed, sample_id)
    builder = GEOMETRY_BUILDERS[class_name]
    graph = builder(rng)
    lengths, angles, extra = _geometry_params(graph)
    for attempt in (0, 1):
        try:
            sol = normalize(solve_graph(graph, n_states + 2))
            table = transition_moments(sol)
            tensors = compute_tensor_set(table, n_states)
            low = tuple(float(k) for k in sol.ks[:N_LOW_KS])
            return EnsembleRecord(sample_id, class_name, lengths, angles,
                                  extra, low, tensors)
        except (SolverError, GraphError) as exc:
            if attempt == 1:
                return EnsembleRecord(sample_id, class_name, lengths, angles,
                                      extra, (), None, failed=True,
                                      error=str(exc))
            jitter = 1e-9
            pts = np.array([v.position for v in graph.vertices])
            pts = pts * (1.0 + jitter) + jitter * rng.standard_normal(
                pts.shape)
            try:
                graph = build_graph(
                    [tuple(p) for p in pts],
                    [e.endpoints for e in graph.edges],
                    topology_class=graph.topology_class, delta=graph.delta)
            except GraphError as exc2:
                return EnsembleRecord(sample_id, class_name, lengths, angles,
                                      extra, (), None, failed=True,
                                      error=str(exc2))


def _solve_chunk(args):
    class_name, seed, ids, n_states = args
    return [solve_record(class_name, seed, i, n_states) for i in ids]


def summarize(class_name: str, seed: int, n_states: int,
              records: Sequence[EnsembleRecord]) -> EnsembleSummary:
    ok = [r for r in records if not r.failed]
    if not ok:
        raise SolverError(f"all {len(records)} samples failed for "
                          f"{class_name}")
    best = max(ok, key=lambda r: abs(r.tensors.beta_xxx_opt))
    return EnsembleSummary(
        class_name=class_name,
        n_samples=len(records),
        seed=seed,
        n_states=n_states,
        n_failed=len(records) - len(ok),
        max_abs_beta_xxx=abs(best.tensors.beta_xxx_opt),
        argmax_id=best.sample_id,
        argmax_lengths=best.lengths,
        argmax_angles=best.angles,
        max_beta_norm=max(r.tensors.beta_norm for r in ok),
        gamma_min=min(r.tensors.gamma_xxxx_min for r in ok),
        gamma_max=max(r.tensors.gamma_xxxx_max for r in ok),
    )


def sample_topology(class_name: str, n_samples: int, seed: int,
                    n_states: int = 30, workers: int = 1) -> EnsembleResult:
    """Monte Carlo ensemble over one topology class.

    Deterministic for fixed (class, seed, n_samples, n_states) regardless of
    worker count: every record depends only on its own (seed, id) stream and
    records are merged in id order.
    """
    if class_name not in GEOMETRY_BUILDERS:
        raise ValueError(f"unknown topology class {class_name!r}; "
                         f"known: {sorted(GEOMETRY_BUILDERS)}")
    ids = list(range(n_samples))
    if workers <= 1:
        records = _solve_chunk((class_name, seed, ids, n_states))
    else:
        chunks = [(class_name, seed, ids[i::workers], n_states)
                  for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_solve_chunk, chunks))
        records = sorted((r for part in parts for r in part),
                         key=lambda r: r.sample_id)
    return EnsembleResult(records,
                          summarize(class_name, seed, n_states, records))


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

def _star_radial(lengths, n_states: int):
    """Spectrum and per-prong radial moment matrices of a bare star.

    Angles only project the radial integrals, so one spectral solve serves
    every angle draw: x = sum_p cos(th_p) R_p and y = sum_p sin(th_p) R_p.
    """
    n = len(lengths)
    pos = [(0.0, 0.0)]
    for i, ln in enumerate(lengths):
        th = 2.0 * math.pi * i / n  # placement direction is irrelevant
        pos.append((ln * math.cos(th), ln * math.sin(th)))
    g = build_graph(pos, [(0, i + 1) for i in range(n)])
    sol = normalize(solve_graph(g, n_states + 2))
    _, radial = edge_moment_matrices(sol)
    return sol.energies, radial


def _beta_opt_for_angles(energies, radial, thetas, n_states: int) -> float:
    x = sum(math.cos(t) * r for t, r in zip(thetas, radial))
    y = sum(math.sin(t) * r for t, r in zip(thetas, radial))
    table = MomentTable(energies, x, y).truncated(n_states)
    _, best = optimal_orientation(beta_tensor(table))
    return best


@dataclass(frozen=True)
class ProngScanResult:
    middle: np.ndarray          # grid of middle-prong lengths
    short: np.ndarray           # grid of short-prong lengths
    beta_max: np.ndarray        # (len(middle), len(short)); NaN where s > m
    argmax_angles: tuple[float, float, float]
    peak: tuple[float, float]   # (middle, short) at the grid maximum

    def rows(self):
        out = []
        for i, m in enumerate(self.middle):
            for j, s in enumerate(self.short):
                if not math.isnan(self.beta_max[i, j]):
                    out.append((float(m), float(s),
                                float(self.beta_max[i, j])))
        return out


def prong_scan_3star(middle: Sequence[float], short: Sequence[float],
                     n_angles: int = 300, seed: int = 0,
                     n_states: int = 30) -> ProngScanResult:
    """Largest rotated beta_xxx over sampled prong angles, per length pair.

    The longest prong is fixed at unit length; cells with short > middle are
    skipped (they relabel other cells).
    """
    middle = np.asarray(middle, dtype=float)
    short = np.asarray(short, dtype=float)
    beta_max = np.full((len(middle), len(short)), math.nan)
    best = (-1.0, None, None)
    for i, m in enumerate(middle):
        for j, s in enumerate(short):
            if s > m:
                continue
            energies, radial = _star_radial((1.0, float(m), float(s)),
                                            n_states)
            rng = np.random.default_rng(np.random.SeedSequence((seed, i, j)))
            cell = -1.0
            cell_angles = None
            for _ in range(n_angles):
                th = (0.0, rng.uniform(0.0, 2.0 * math.pi),
                      rng.uniform(0.0, 2.0 * math.pi))
                b = _beta_opt_for_angles(energies, radial, th, n_states)
                if b > cell:
                    cell = b
                    cell_angles = th
            beta_max[i, j] = cell
            if cell > best[0]:
                best = (cell, (float(m), float(s)), cell_angles)
    return ProngScanResult(middle, short, beta_max, best[2], best[1])


@dataclass(frozen=True)
class AngleScanResult:
    swept: np.ndarray
    beta_opt: np.ndarray     # (n_swept, n_draws) rotated maxima
    beta_raw: np.ndarray     # signed beta_xxx in the graph frame
    short_angles: np.ndarray


def angle_scan(lengths: Sequence[float], swept: Sequence[float],
               n_draws: int = 40, seed: int = 0, n_states: int = 30,
               short_angle: Optional[float] = None) -> AngleScanResult:
    """beta_xxx versus the middle-prong angle, other angles sampled.

    The long prong lies along +x; `swept` rotates the middle prong; the
    short prong angle is drawn uniformly per draw unless fixed.
    """
    lengths = tuple(float(v) for v in lengths)
    energies, radial = _star_radial(lengths, n_states)
    swept = np.asarray(swept, dtype=float)
    n_draws = 1 if short_angle is not None else n_draws
    beta_opt = np.empty((len(swept), n_draws))
    beta_raw = np.empty((len(swept), n_draws))
    shorts = np.empty((len(swept), n_draws))
    for i, th_mid in enumerate(swept):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        for d in range(n_draws):
            th3 = short_angle if short_angle is not None else \
                rng.uniform(0.0, 2.0 * math.pi)
            th = (0.0, float(th_mid), float(th3))
            x = sum(math.cos(t) * r for t, r in zip(th, radial))
            y = sum(math.sin(t) * r for t, r in zip(th, radial))
            table = MomentTable(energies, x, y).truncated(n_states)
            bt = beta_tensor(table)
            _, best = optimal_orientation(bt)
            beta_opt[i, d] = best
            beta_raw[i, d] = bt.xxx
            shorts[i, d] = th3
    return AngleScanResult(swept, beta_opt, beta_raw, shorts)


def spectrum_vs_beta(class_name: str, n_samples: int, seed: int,
                     n_states: int = 30, workers: int = 1) -> np.ndarray:
    """Low eigenvalues of an ensemble sorted by rising rotated beta_xxx.

    Returns an array of rows [beta_xxx_opt, k_1 .. k_10].
    """
    result = sample_topology(class_name, n_samples, seed, n_states, workers)
    ok = [r for r in result.records if not r.failed]
    ok.sort(key=lambda r: abs(r.tensors.beta_xxx_opt))
    rows = np.full((len(ok), 1 + N_LOW_KS), np.nan)
    for i, r in enumerate(ok):
        rows[i, 0] = abs(r.tensors.beta_xxx_opt)
        rows[i, 1:1 + len(r.low_ks)] = r.low_ks
    return rows


@dataclass(frozen=True)
class DeltaScanResult:
    rows: list[dict]
    max_abs_beta: float
    arg_g: float
    arg_s0: float

    def at_max(self) -> dict:
        return max(self.rows, key=lambda r: abs(r["beta_full"]))


def delta_wire_scan(length: float = 1.0,
                    g_values: Sequence[float] = tuple(np.linspace(0, 30, 61)),
                    s0_values: Sequence[float] = tuple(np.linspace(0.05, 0.95,
                                                                   37)),
                    n_states: int = 30) -> DeltaScanResult:
    """Dressed-wire scan over delta strength and position (g >= 0).

    Per grid point: the full rotated-frame beta (the wire lies along x), the
    two-excited-state truncation, the extreme surface value f(E) G(X), and
    the truncated ground-state sum rule with 3..7 excited terms.
    """
    rows = []
    best = (0.0, 0.0, float(s0_values[0]))
    for g in g_values:
        for s0 in s0_values:
            graph = build_graph([(0.0, 0.0), (float(s0), 0.0),
                                 (float(length), 0.0)], [(0, 1), (1, 2)],
                                topology_class="delta-wire",
                                delta=DeltaSpec(1, float(g)))
            sol = normalize(solve_graph(graph, n_states + 2))
            table = transition_moments(sol).truncated(n_states)
            bt = beta_tensor(table)
            diag = three_level(table)
            row = {
                "g": float(g), "s0": float(s0),
                "beta_full": bt.xxx,
                "beta_three_level": diag.beta_three_level,
                "beta_extreme": diag.beta_extreme,
                "e_ratio": diag.e_ratio,
                "x_ratio": diag.x_ratio,
            }
            for terms in (3, 4, 5, 6, 7):
                row[f"s00_{terms}"] = sum_rule(table, 0, 0, "combined",
                                               excited_terms=terms)
            rows.append(row)
            if abs(bt.xxx) > best[0]:
                best = (abs(bt.xxx), float(g), float(s0))
    return DeltaScanResult(rows, best[0], best[1], best[2])


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def write_records_csv(path, records: Sequence[EnsembleRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EnsembleRecord.csv_header())
        for r in records:
            writer.writerow(r.csv_row())


def write_summary_json(path, summary: EnsembleSummary, **extra) -> None:
    payload = summary.to_dict()
    payload.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
