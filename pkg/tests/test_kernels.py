"""The numba path and the pure-numpy fallback must agree exactly."""

import numpy as np
import pytest

from qgnlo import _kernels
from qgnlo.ensemble import GEOMETRY_BUILDERS, sample_rng
from qgnlo.secular import assemble_system, solve_graph
from qgnlo.states import normalize


def _encodings():
    out = []
    for i, cls in enumerate(("3-star", "lollipop", "star-star", "bull",
                             "barbell-loop", "delta-wire", "bubble")):
        g = GEOMETRY_BUILDERS[cls](sample_rng(55, i))
        out.append((cls, assemble_system(g).encoding))
    return out


def test_det_grid_paths_agree():
    ks = np.linspace(0.1, 40.0, 2000)
    for cls, enc in _encodings():
        a = _kernels._det_grid_py(ks, *enc._args())
        b = _kernels._det_grid_numpy(ks, *enc._args())
        assert np.allclose(a, b, rtol=1e-12, atol=1e-13), cls


def test_bisect_paths_agree():
    for cls, enc in _encodings():
        ks = np.linspace(0.1, 30.0, 3000)
        vals = _kernels._det_grid_numpy(ks, *enc._args())
        idx = np.nonzero((vals[:-1] < 0) != (vals[1:] < 0))[0]
        lo, hi, flo = ks[idx], ks[idx + 1], vals[idx]
        a = _kernels._bisect_py(lo, hi, flo, *enc._args())
        b = _kernels._bisect_numpy(lo, hi, flo, *enc._args())
        assert np.allclose(a, b, rtol=1e-14, atol=0.0), cls


def test_edge_integral_paths_agree():
    for i, cls in enumerate(("3-star", "lollipop", "barbell-loop")):
        g = GEOMETRY_BUILDERS[cls](sample_rng(56, i))
        sol = normalize(solve_graph(g, 20))
        lengths = np.array([e.length for e in g.edges])
        p = np.ascontiguousarray(sol.coeffs[:, :, 0].T)
        q = np.ascontiguousarray(sol.coeffs[:, :, 1].T)
        o1, m1 = _kernels._edge_integrals_py(sol.ks, p, q, lengths)
        o2, m2 = _kernels._edge_integrals_numpy(sol.ks, p, q, lengths)
        assert np.allclose(o1, o2, rtol=1e-12, atol=1e-14), cls
        assert np.allclose(m1, m2, rtol=1e-12, atol=1e-14), cls


def test_active_path_is_reported():
    assert _kernels.kernel_path() in ("numba", "numpy")
    if _kernels.NUMBA_ENABLED:
        assert _kernels.kernel_path() == "numba"


def test_small_det_matches_numpy_for_larger_systems():
    rng = np.random.default_rng(0)
    for n in (4, 5):
        m = rng.normal(size=(n, n))
        assert _kernels._small_det(m, n) == pytest.approx(
            np.linalg.det(m), rel=1e-10)
