"""Hot numeric kernels for secular-determinant evaluation and root refinement.

The secular system of a composite graph is encoded as flat arrays (one entry
per pendant/connector/loop element) so the same data drive two
implementations:

* a numba ``@njit`` path compiled lazily on first use, and
* a pure-numpy path vectorized over the wavenumber grid.

The path is selected once at import time: numba is used when importable
unless the environment variable ``QGNLO_NUMBA`` is set to ``0``/``false``/
``off``.  Both paths accumulate terms in the same order, so for systems with
up to three coupled centers (everything in the topology catalog) their
results are bit-identical.

Element kinds: 0 = pendant chain, 1 = connector chain, 2 = self-loop.
Row entries are assembled in rationalized form (products of sines/cosines,
no divisions), so the determinant is analytic in k.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("QGNLO_NUMBA", "").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "off")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
        NUMBA_ENABLED = False

MAX_BISECT = 80


def kernel_path() -> str:
    """Name of the active kernel implementation ("numba" or "numpy")."""
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# scalar/njit implementation
# ---------------------------------------------------------------------------

def _det_at_py(k, n_centers, elem_row, elem_kind, elem_len, elem_other,
               delta_coef):
    n_el = elem_row.shape[0]
    f = np.empty(n_el)
    g = np.empty(n_el)
    for i in range(n_el):
        if elem_kind[i] == 2:
            half = 0.5 * elem_len[i] * k
            f[i] = np.cos(half)
            g[i] = -2.0 * np.sin(half)
        else:
            f[i] = np.sin(elem_len[i] * k)
            g[i] = np.cos(elem_len[i] * k)

    m = np.zeros((n_centers, n_centers))
    for v in range(n_centers):
        # leave-one-out products of this row's factors, by prefix/suffix scan
        idx = np.empty(n_el, dtype=np.int64)
        cnt = 0
        for i in range(n_el):
            if elem_row[i] == v:
                idx[cnt] = i
                cnt += 1
        pre = np.empty(cnt + 1)
        suf = np.empty(cnt + 1)
        pre[0] = 1.0
        suf[cnt] = 1.0
        for j in range(cnt):
            pre[j + 1] = pre[j] * f[idx[j]]
        for j in range(cnt - 1, -1, -1):
            suf[j] = suf[j + 1] * f[idx[j]]
        for j in range(cnt):
            i = idx[j]
            loo = pre[j] * suf[j + 1]
            m[v, v] += g[i] * loo
            if elem_kind[i] == 1:
                m[v, elem_other[i]] -= loo
        if delta_coef[v] != 0.0:
            m[v, v] += delta_coef[v] / k * pre[cnt]
    return _small_det(m, n_centers)


def _small_det(m, n):
    if n == 1:
        return m[0, 0]
    if n == 2:
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if n == 3:
        return (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
                - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
                + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
    # Gaussian elimination with partial pivoting
    a = m.copy()
    det = 1.0
    for c in range(n):
        p = c
        big = abs(a[c, c])
        for r in range(c + 1, n):
            if abs(a[r, c]) > big:
                big = abs(a[r, c])
                p = r
        if big == 0.0:
            return 0.0
        if p != c:
            for j in range(n):
                tmp = a[c, j]
                a[c, j] = a[p, j]
                a[p, j] = tmp
            det = -det
        det *= a[c, c]
        for r in range(c + 1, n):
            fac = a[r, c] / a[c, c]
            for j in range(c, n):
                a[r, j] -= fac * a[c, j]
    return det


def _det_grid_py(ks, n_centers, elem_row, elem_kind, elem_len, elem_other,
                 delta_coef):
    out = np.empty(ks.shape[0])
    for i in range(ks.shape[0]):
        out[i] = _det_at_py(ks[i], n_centers, elem_row, elem_kind, elem_len,
                            elem_other, delta_coef)
    return out


def _bisect_py(lo, hi, flo, n_centers, elem_row, elem_kind, elem_len,
               elem_other, delta_coef):
    roots = np.empty(lo.shape[0])
    for b in range(lo.shape[0]):
        a = lo[b]
        c = hi[b]
        fa = flo[b]
        for _ in range(MAX_BISECT):
            mid = 0.5 * (a + c)
            if mid <= a or mid >= c:
                break
            fm = _det_at_py(mid, n_centers, elem_row, elem_kind, elem_len,
                            elem_other, delta_coef)
            if fm == 0.0:
                a = mid
                c = mid
                break
            if (fa < 0.0) == (fm < 0.0):
                a = mid
                fa = fm
            else:
                c = mid
        roots[b] = 0.5 * (a + c)
    return roots


# ---------------------------------------------------------------------------
# numpy-vectorized implementation (fallback path)
# ---------------------------------------------------------------------------

def _det_grid_numpy(ks, n_centers, elem_row, elem_kind, elem_len, elem_other,
                    delta_coef):
    nk = ks.shape[0]
    n_el = elem_row.shape[0]
    f = np.empty((n_el, nk))
    g = np.empty((n_el, nk))
    for i in range(n_el):
        if elem_kind[i] == 2:
            half = 0.5 * elem_len[i] * ks
            f[i] = np.cos(half)
            g[i] = -2.0 * np.sin(half)
        else:
            f[i] = np.sin(elem_len[i] * ks)
            g[i] = np.cos(elem_len[i] * ks)

    m = np.zeros((n_centers, n_centers, nk))
    for v in range(n_centers):
        idx = np.nonzero(elem_row == v)[0]
        cnt = idx.shape[0]
        pre = np.empty((cnt + 1, nk))
        suf = np.empty((cnt + 1, nk))
        pre[0] = 1.0
        suf[cnt] = 1.0
        for j in range(cnt):
            pre[j + 1] = pre[j] * f[idx[j]]
        for j in range(cnt - 1, -1, -1):
            suf[j] = suf[j + 1] * f[idx[j]]
        for j in range(cnt):
            i = idx[j]
            loo = pre[j] * suf[j + 1]
            m[v, v] += g[i] * loo
            if elem_kind[i] == 1:
                m[v, elem_other[i]] -= loo
        if delta_coef[v] != 0.0:
            m[v, v] += delta_coef[v] / ks * pre[cnt]

    if n_centers == 1:
        return m[0, 0].copy()
    if n_centers == 2:
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if n_centers == 3:
        return (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
                - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
                + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
    return np.linalg.det(np.moveaxis(m, 2, 0))


def _bisect_numpy(lo, hi, flo, n_centers, elem_row, elem_kind, elem_len,
                  elem_other, delta_coef):
    a = lo.copy()
    c = hi.copy()
    fa = flo.copy()
    active = np.ones(a.shape[0], dtype=bool)
    for _ in range(MAX_BISECT):
        mid = 0.5 * (a + c)
        stalled = (mid <= a) | (mid >= c)
        active &= ~stalled
        if not active.any():
            break
        fm = _det_grid_numpy(mid[active], n_centers, elem_row, elem_kind,
                             elem_len, elem_other, delta_coef)
        sub_a = a[active]
        sub_c = c[active]
        sub_fa = fa[active]
        sub_mid = mid[active]
        hit = fm == 0.0
        same = (sub_fa < 0.0) == (fm < 0.0)
        sub_a = np.where(same | hit, sub_mid, sub_a)
        sub_c = np.where(~same | hit, sub_mid, sub_c)
        sub_fa = np.where(same & ~hit, fm, sub_fa)
        a[active] = sub_a
        c[active] = sub_c
        fa[active] = sub_fa
        if hit.any():
            done = np.nonzero(active)[0][hit]
            active[done] = False
    return 0.5 * (a + c)


# ---------------------------------------------------------------------------
# closed-form edge integrals (overlap and first moment of state pairs)
# ---------------------------------------------------------------------------

_SMALL_T = 1e-5  # switch w*a below this to series forms


def _edge_integrals_py(ks, p, q, lengths):
    """O[e,n,m] = int phi_n phi_m ds, M1[e,n,m] = int phi_n phi_m s ds.

    The state on edge e is p[e,n] sin(k_n s) + q[e,n] cos(k_n s); integrals
    reduce to primitives of cos(w s) and s cos(w s) at w = k_n -+ k_m, with
    series forms near w = 0.
    """
    n_edges = lengths.shape[0]
    n = ks.shape[0]
    o = np.empty((n_edges, n, n))
    m1 = np.empty((n_edges, n, n))
    for e in range(n_edges):
        a = lengths[e]
        for i in range(n):
            for j in range(i, n):
                wm = ks[i] - ks[j]
                wp = ks[i] + ks[j]
                tm = wm * a
                tp = wp * a
                if abs(tm) < _SMALL_T:
                    c_m = a * (1.0 - tm * tm / 6.0)
                    s_m = 0.5 * a * tm * (1.0 - tm * tm / 12.0)
                    cs_m = a * a * (0.5 - tm * tm / 8.0)
                    ss_m = a * a * tm * (1.0 / 3.0 - tm * tm / 30.0)
                else:
                    sn = np.sin(tm)
                    h = np.sin(0.5 * tm)
                    cs2 = 2.0 * h * h
                    c_m = sn / wm
                    s_m = cs2 / wm
                    cs_m = a * sn / wm - cs2 / (wm * wm)
                    ss_m = sn / (wm * wm) - a * np.cos(tm) / wm
                if abs(tp) < _SMALL_T:
                    c_p = a * (1.0 - tp * tp / 6.0)
                    s_p = 0.5 * a * tp * (1.0 - tp * tp / 12.0)
                    cs_p = a * a * (0.5 - tp * tp / 8.0)
                    ss_p = a * a * tp * (1.0 / 3.0 - tp * tp / 30.0)
                else:
                    sn = np.sin(tp)
                    h = np.sin(0.5 * tp)
                    cs2 = 2.0 * h * h
                    c_p = sn / wp
                    s_p = cs2 / wp
                    cs_p = a * sn / wp - cs2 / (wp * wp)
                    ss_p = sn / (wp * wp) - a * np.cos(tp) / wp
                iss = 0.5 * (c_m - c_p)
                icc = 0.5 * (c_m + c_p)
                isc = 0.5 * (s_p + s_m)
                ics = 0.5 * (s_p - s_m)
                jss = 0.5 * (cs_m - cs_p)
                jcc = 0.5 * (cs_m + cs_p)
                jsc = 0.5 * (ss_p + ss_m)
                jcs = 0.5 * (ss_p - ss_m)
                pi, qi = p[e, i], q[e, i]
                pj, qj = p[e, j], q[e, j]
                ov = (pi * pj * iss + pi * qj * isc
                      + qi * pj * ics + qi * qj * icc)
                mv = (pi * pj * jss + pi * qj * jsc
                      + qi * pj * jcs + qi * qj * jcc)
                o[e, i, j] = ov
                o[e, j, i] = ov
                m1[e, i, j] = mv
                m1[e, j, i] = mv
    return o, m1


def _series_or(w, a, small_val, direct):
    t = w * a
    return np.where(np.abs(t) < _SMALL_T, small_val, direct)


def _edge_integrals_numpy(ks, p, q, lengths):
    """Vectorized fallback of `_edge_integrals_py` (same math, grid form)."""
    n_edges = lengths.shape[0]
    n = ks.shape[0]
    wm = ks[:, None] - ks[None, :]
    wp = ks[:, None] + ks[None, :]
    o = np.empty((n_edges, n, n))
    m1 = np.empty((n_edges, n, n))
    for e in range(n_edges):
        a = lengths[e]
        prim = {}
        for name, w in (("m", wm), ("p", wp)):
            t = w * a
            ws = np.where(np.abs(t) < _SMALL_T, 1.0, w)
            sn = np.sin(t)
            cs2 = 2.0 * np.sin(0.5 * t) ** 2
            c_d = sn / ws
            s_d = cs2 / ws
            cs_d = a * sn / ws - cs2 / (ws * ws)
            ss_d = sn / (ws * ws) - a * np.cos(t) / ws
            prim["c" + name] = _series_or(w, a, a * (1.0 - t * t / 6.0), c_d)
            prim["s" + name] = _series_or(
                w, a, 0.5 * a * t * (1.0 - t * t / 12.0), s_d)
            prim["cs" + name] = _series_or(
                w, a, a * a * (0.5 - t * t / 8.0), cs_d)
            prim["ss" + name] = _series_or(
                w, a, a * a * t * (1.0 / 3.0 - t * t / 30.0), ss_d)
        iss = 0.5 * (prim["cm"] - prim["cp"])
        icc = 0.5 * (prim["cm"] + prim["cp"])
        isc = 0.5 * (prim["sp"] + prim["sm"])
        ics = 0.5 * (prim["sp"] - prim["sm"])
        jss = 0.5 * (prim["csm"] - prim["csp"])
        jcc = 0.5 * (prim["csm"] + prim["csp"])
        jsc = 0.5 * (prim["ssp"] + prim["ssm"])
        jcs = 0.5 * (prim["ssp"] - prim["ssm"])
        pp = p[e][:, None] * p[e][None, :]
        pq = p[e][:, None] * q[e][None, :]
        qp = q[e][:, None] * p[e][None, :]
        qq = q[e][:, None] * q[e][None, :]
        o[e] = pp * iss + pq * isc + qp * ics + qq * icc
        m1[e] = pp * jss + pq * jsc + qp * jcs + qq * jcc
    return o, m1


if NUMBA_ENABLED:
    _small_det = njit(cache=True)(_small_det)
    _det_at_py = njit(cache=True)(_det_at_py)
    _det_grid_impl = njit(cache=True)(_det_grid_py)
    _bisect_impl = njit(cache=True)(_bisect_py)
    _edge_integrals_impl = njit(cache=True)(_edge_integrals_py)
else:
    _det_grid_impl = _det_grid_numpy
    _bisect_impl = _bisect_numpy
    _edge_integrals_impl = _edge_integrals_numpy


def edge_integrals(ks, p, q, lengths):
    """Overlap and first-moment matrices for all state pairs on all edges."""
    return _edge_integrals_impl(np.ascontiguousarray(ks, dtype=np.float64),
                                np.ascontiguousarray(p, dtype=np.float64),
                                np.ascontiguousarray(q, dtype=np.float64),
                                np.ascontiguousarray(lengths,
                                                     dtype=np.float64))


class SystemEncoding:
    """Flat-array description of a rationalized secular system."""

    __slots__ = ("n_centers", "elem_row", "elem_kind", "elem_len",
                 "elem_other", "delta_coef")

    def __init__(self, n_centers, elem_row, elem_kind, elem_len, elem_other,
                 delta_coef):
        self.n_centers = int(n_centers)
        self.elem_row = np.ascontiguousarray(elem_row, dtype=np.int64)
        self.elem_kind = np.ascontiguousarray(elem_kind, dtype=np.int64)
        self.elem_len = np.ascontiguousarray(elem_len, dtype=np.float64)
        self.elem_other = np.ascontiguousarray(elem_other, dtype=np.int64)
        self.delta_coef = np.ascontiguousarray(delta_coef, dtype=np.float64)

    def _args(self):
        return (self.n_centers, self.elem_row, self.elem_kind, self.elem_len,
                self.elem_other, self.delta_coef)


def det_grid(encoding: SystemEncoding, ks: np.ndarray) -> np.ndarray:
    """Rationalized secular determinant evaluated on a wavenumber grid."""
    ks = np.ascontiguousarray(ks, dtype=np.float64)
    return _det_grid_impl(ks, *encoding._args())


def bisect(encoding: SystemEncoding, lo: np.ndarray, hi: np.ndarray,
           flo: np.ndarray) -> np.ndarray:
    """Bisection-refine bracketed sign changes of the secular determinant."""
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    flo = np.ascontiguousarray(flo, dtype=np.float64)
    return _bisect_impl(lo, hi, flo, *encoding._args())
