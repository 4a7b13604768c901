"""Intrinsic hyperpolarizability tensors, rotations, norms, diagnostics.

All tensors are dimensionless: moments are normalized by the largest
allowed ground-to-first transition moment and energies by the first gap, so
the sum-over-states expressions carry (3/4)^(3/4) and 1/4 prefactors and the
values are bounded by the fundamental limits (|beta| <= 1, and the rotated
diagonal gamma component never drops below -1/4).

Components are symmetrized over index orderings, which makes the four beta
and five gamma numbers exact symmetric tensors at any truncation; rotation
of the component set then commutes with the diagonal-component rotation
formulas and leaves the full contractions invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from itertools import permutations
from typing import Optional

import numpy as np

from .states import MomentTable

BETA_PREFACTOR = (3.0 / 4.0) ** 0.75
CONVERGENCE_TOL = 1e-3
CONVERGENCE_LAG = 5


@dataclass(frozen=True)
class BetaTensor:
    xxx: float
    xxy: float
    xyy: float
    yyy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.xxx, self.xxy, self.xyy, self.yyy])


@dataclass(frozen=True)
class GammaTensor:
    xxxx: float
    xxxy: float
    xxyy: float
    xyyy: float
    yyyy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.xxxx, self.xxxy, self.xxyy, self.xyyy,
                         self.yyyy])


class _SosWork:
    """Shared pieces of the primed sums for one truncated table."""

    def __init__(self, table: MomentTable):
        e = table.e
        xi = (table.xi_x, table.xi_y)
        n = table.n_states
        eye = np.eye(n - 1)
        self.u = [xi[i][0, 1:] / e[1:] for i in range(2)]        # xi_0n / e_n
        self.g = [xi[i][0, 1:] for i in range(2)]                # xi_0n
        self.bar = [xi[i][1:, 1:] - eye * xi[i][0, 0] for i in range(2)]
        self.inv_e = 1.0 / e[1:]
        self._mid = {}
        self._a2 = {}
        self._b1 = {}

    def beta(self, i, j, k) -> float:
        return BETA_PREFACTOR * float(self.u[i] @ self.bar[j] @ self.u[k])

    def gamma(self, i, j, k, l) -> float:
        if (j, k) not in self._mid:
            self._mid[j, k] = self.bar[j] * self.inv_e[None, :] @ self.bar[k]
        if (i, j) not in self._a2:
            self._a2[i, j] = float(np.sum(self.g[i] * self.g[j]
                                          * self.inv_e ** 2))
        if (k, l) not in self._b1:
            self._b1[k, l] = float(np.sum(self.g[k] * self.g[l] * self.inv_e))
        triple = float(self.u[i] @ self._mid[j, k] @ self.u[l])
        return 0.25 * (triple - self._a2[i, j] * self._b1[k, l])


def _symmetrized(fun, indices) -> float:
    perms = sorted(set(permutations(indices)))
    return float(np.mean([fun(*p) for p in perms]))


def beta_tensor(table: MomentTable, n_retained: Optional[int] = None
                ) -> BetaTensor:
    """Intrinsic first-hyperpolarizability components from a moment table.

    beta_ijk = (3/4)^(3/4) * sum'_{n,m} xi^i_0n xibar^j_nm xi^k_m0 /
    (e_n e_m), ground state excluded from the primed sums, symmetrized over
    the orderings of each component's index multiset.
    """
    t = table if n_retained is None else table.truncated(n_retained)
    if t.n_states < 3:
        raise ValueError("beta needs at least two excited states")
    w = _SosWork(t)
    return BetaTensor(_symmetrized(w.beta, (0, 0, 0)),
                      _symmetrized(w.beta, (0, 0, 1)),
                      _symmetrized(w.beta, (0, 1, 1)),
                      _symmetrized(w.beta, (1, 1, 1)))


def gamma_tensor(table: MomentTable, n_retained: Optional[int] = None
                 ) -> GammaTensor:
    """Intrinsic second-hyperpolarizability components.

    One quarter of the primed triple sum minus the primed double sum, in
    normalized moments and energies, symmetrized over index orderings.
    """
    t = table if n_retained is None else table.truncated(n_retained)
    if t.n_states < 4:
        raise ValueError("gamma needs at least three excited states")
    w = _SosWork(t)
    return GammaTensor(_symmetrized(w.gamma, (0, 0, 0, 0)),
                       _symmetrized(w.gamma, (0, 0, 0, 1)),
                       _symmetrized(w.gamma, (0, 0, 1, 1)),
                       _symmetrized(w.gamma, (0, 1, 1, 1)),
                       _symmetrized(w.gamma, (1, 1, 1, 1)))


# ---------------------------------------------------------------------------
# rotations and norms
# ---------------------------------------------------------------------------

def rotate_beta(beta: BetaTensor, phi) -> np.ndarray | float:
    """Diagonal component beta_xxx in a frame rotated by phi."""
    c, s = np.cos(phi), np.sin(phi)
    return (beta.xxx * c ** 3 + 3.0 * beta.xxy * c * c * s
            + 3.0 * beta.xyy * c * s * s + beta.yyy * s ** 3)


def rotate_gamma(gamma: GammaTensor, theta) -> np.ndarray | float:
    """Diagonal component gamma_xxxx in a frame rotated by theta."""
    c, s = np.cos(theta), np.sin(theta)
    return (gamma.xxxx * c ** 4 + 4.0 * gamma.xxxy * c ** 3 * s
            + 6.0 * gamma.xxyy * c * c * s * s
            + 4.0 * gamma.xyyy * c * s ** 3 + gamma.yyyy * s ** 4)


def _full_tensor_beta(beta: BetaTensor) -> np.ndarray:
    t = np.empty((2, 2, 2))
    vals = {0: beta.xxx, 1: beta.xxy, 2: beta.xyy, 3: beta.yyy}
    for i in range(2):
        for j in range(2):
            for k in range(2):
                t[i, j, k] = vals[i + j + k]
    return t


def _full_tensor_gamma(gamma: GammaTensor) -> np.ndarray:
    t = np.empty((2, 2, 2, 2))
    vals = {0: gamma.xxxx, 1: gamma.xxxy, 2: gamma.xxyy, 3: gamma.xyyy,
            4: gamma.yyyy}
    for idx in np.ndindex(2, 2, 2, 2):
        t[idx] = vals[sum(idx)]
    return t


def rotate_beta_components(beta: BetaTensor, phi: float) -> BetaTensor:
    """All four components in a frame rotated by phi."""
    r = np.array([[math.cos(phi), math.sin(phi)],
                  [-math.sin(phi), math.cos(phi)]])
    t = np.einsum("ia,jb,kc,abc->ijk", r, r, r, _full_tensor_beta(beta))
    return BetaTensor(t[0, 0, 0], t[0, 0, 1], t[0, 1, 1], t[1, 1, 1])


def rotate_gamma_components(gamma: GammaTensor, theta: float) -> GammaTensor:
    """All five components in a frame rotated by theta."""
    r = np.array([[math.cos(theta), math.sin(theta)],
                  [-math.sin(theta), math.cos(theta)]])
    t = np.einsum("ia,jb,kc,ld,abcd->ijkl", r, r, r, r,
                  _full_tensor_gamma(gamma))
    return GammaTensor(t[0, 0, 0, 0], t[0, 0, 0, 1], t[0, 0, 1, 1],
                       t[0, 1, 1, 1], t[1, 1, 1, 1])


def tensor_norms(beta: BetaTensor, gamma: GammaTensor) -> tuple[float, float]:
    """Full self-contractions: rotation-invariant tensor magnitudes."""
    b = math.sqrt(beta.xxx ** 2 + 3.0 * beta.xxy ** 2 + 3.0 * beta.xyy ** 2
                  + beta.yyy ** 2)
    g = math.sqrt(gamma.xxxx ** 2 + 4.0 * gamma.xxxy ** 2
                  + 6.0 * gamma.xxyy ** 2 + 4.0 * gamma.xyyy ** 2
                  + gamma.yyyy ** 2)
    return b, g


def beta_norm(beta: BetaTensor) -> float:
    return tensor_norms(beta, GammaTensor(0, 0, 0, 0, 0))[0]


_SCAN_STEP = 1e-3
_REFINE_POINTS = 81


class _PhiGrid:
    """Cached trig powers on the dense orientation grid."""

    def __init__(self, step: float):
        self.phis = np.arange(0.0, 2.0 * math.pi, step)
        c, s = np.cos(self.phis), np.sin(self.phis)
        c2, s2 = c * c, s * s
        self.b = (c * c2, 3.0 * c2 * s, 3.0 * c * s2, s * s2)
        self.g = (c2 * c2, 4.0 * c2 * c * s, 6.0 * c2 * s2, 4.0 * c * s * s2,
                  s2 * s2)


_GRID = _PhiGrid(_SCAN_STEP)


def _zoom(fun, phi0: float) -> tuple[float, float]:
    width = _SCAN_STEP
    best = phi0
    for _ in range(2):
        grid = np.linspace(best - width, best + width, _REFINE_POINTS)
        best = grid[int(np.argmax(fun(grid)))]
        width = 2.0 * width / (_REFINE_POINTS - 1)
    return float(best % (2.0 * math.pi)), float(fun(best))


def optimal_orientation(beta: BetaTensor, gamma: Optional[GammaTensor] = None):
    """Rotation angles extremizing the diagonal components.

    Returns (phi_star, beta_xxx(phi_star)) for beta and, when gamma is
    given, also (theta_max, max) and (theta_min, min) for gamma; dense scan
    at 1e-3 rad refined to better than 1e-6 rad.
    """
    bb = beta.as_array()
    bvals = sum(coef * arr for coef, arr in zip(bb, _GRID.b))
    phi_star, beta_best = _zoom(lambda p: rotate_beta(beta, p),
                                _GRID.phis[int(np.argmax(bvals))])
    if gamma is None:
        return phi_star, beta_best
    gg = np.array([gamma.xxxx, gamma.xxxy, gamma.xxyy, gamma.xyyy,
                   gamma.yyyy])
    gvals = sum(coef * arr for coef, arr in zip(gg, _GRID.g))
    gmax = _zoom(lambda p: rotate_gamma(gamma, p),
                 _GRID.phis[int(np.argmax(gvals))])
    tmin, vmin = _zoom(lambda p: -rotate_gamma(gamma, p),
                       _GRID.phis[int(np.argmin(gvals))])
    return (phi_star, beta_best), gmax, (tmin, -vmin)


# ---------------------------------------------------------------------------
# three-level diagnostics
# ---------------------------------------------------------------------------

def f_three_level(e_ratio) -> np.ndarray | float:
    """Energy factor of the extreme three-level value, (1-E)^1.5 (E^2+1.5E+1)."""
    e = np.asarray(e_ratio, dtype=float)
    return (1.0 - e) ** 1.5 * (e * e + 1.5 * e + 1.0)


def g_three_level(x_ratio) -> np.ndarray | float:
    """Moment factor 3^(1/4) X sqrt(1.5 (1 - X^4)); unit maximum at 3^(-1/4)."""
    x = np.asarray(x_ratio, dtype=float)
    return 3.0 ** 0.25 * x * np.sqrt(1.5 * np.clip(1.0 - x ** 4, 0.0, None))


@dataclass(frozen=True)
class ThreeLevelDiagnostics:
    e_ratio: float        # E_10 / E_20
    x_ratio: float        # x_01 / x_01^max
    beta_three_level: float
    beta_extreme: float   # f(E) G(X)

    def to_dict(self) -> dict:
        return asdict(self)


def three_level(table: MomentTable) -> ThreeLevelDiagnostics:
    """Three-level diagnostics in the table's x direction.

    The three-level beta is the full intrinsic expression truncated to the
    two lowest excited states; the extreme value replaces the moments with
    their truncated-sum-rule extremes, giving the two-parameter surface
    f(E) G(X).
    """
    if table.n_states < 3:
        raise ValueError("three-level diagnostics need at least 3 states")
    t3 = table.truncated(3)
    e_ratio = 1.0 / float(t3.e[2])
    x_ratio = float(t3.xi_x[0, 1])
    b3 = _SosWork(t3).beta(0, 0, 0)
    return ThreeLevelDiagnostics(
        e_ratio, x_ratio, b3,
        float(f_three_level(e_ratio) * g_three_level(x_ratio)))


# ---------------------------------------------------------------------------
# the full tensor bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorSet:
    beta: BetaTensor
    gamma: GammaTensor
    beta_norm: float
    gamma_norm: float
    phi_star: float
    beta_xxx_opt: float       # beta_xxx at phi_star (the rotated maximum)
    theta_star_max: float
    gamma_xxxx_max: float
    theta_star_min: float
    gamma_xxxx_min: float
    three_level: ThreeLevelDiagnostics
    beta_converged: bool
    gamma_converged: bool

    def to_dict(self) -> dict:
        return {
            "beta": asdict(self.beta),
            "gamma": asdict(self.gamma),
            "beta_norm": self.beta_norm,
            "gamma_norm": self.gamma_norm,
            "phi_star": self.phi_star,
            "beta_xxx_opt": self.beta_xxx_opt,
            "theta_star_max": self.theta_star_max,
            "gamma_xxxx_max": self.gamma_xxxx_max,
            "theta_star_min": self.theta_star_min,
            "gamma_xxxx_min": self.gamma_xxxx_min,
            "three_level": self.three_level.to_dict(),
            "beta_converged": self.beta_converged,
            "gamma_converged": self.gamma_converged,
        }

    CSV_FIELDS = ("beta_xxx", "beta_xxy", "beta_xyy", "beta_yyy",
                  "gamma_xxxx", "gamma_xxxy", "gamma_xxyy", "gamma_xyyy",
                  "gamma_yyyy", "beta_norm", "gamma_norm", "phi_star",
                  "beta_xxx_opt", "gamma_xxxx_max", "gamma_xxxx_min",
                  "e_ratio", "x_ratio", "beta_three_level", "beta_extreme")

    def csv_values(self) -> list[float]:
        return [self.beta.xxx, self.beta.xxy, self.beta.xyy, self.beta.yyy,
                self.gamma.xxxx, self.gamma.xxxy, self.gamma.xxyy,
                self.gamma.xyyy, self.gamma.yyyy, self.beta_norm,
                self.gamma_norm, self.phi_star, self.beta_xxx_opt,
                self.gamma_xxxx_max, self.gamma_xxxx_min,
                self.three_level.e_ratio, self.three_level.x_ratio,
                self.three_level.beta_three_level,
                self.three_level.beta_extreme]


def compute_tensor_set(table: MomentTable,
                       n_retained: Optional[int] = None) -> TensorSet:
    """Tensors, optimal orientations, norms, and three-level diagnostics.

    Convergence is flagged (not fatal) when any component moves by more than
    1e-3 between n_retained and n_retained - 5 states.  The three-level
    diagnostics are evaluated in the orientation that maximizes beta_xxx.
    """
    t = table if n_retained is None else table.truncated(n_retained)
    beta = beta_tensor(t)
    gamma = gamma_tensor(t)
    lag = t.n_states - CONVERGENCE_LAG
    beta_conv = gamma_conv = True
    if lag >= 4:
        beta_prev = beta_tensor(t, lag)
        beta_conv = bool(np.max(np.abs(beta.as_array()
                                       - beta_prev.as_array()))
                         <= CONVERGENCE_TOL)
        gamma_prev = gamma_tensor(t, lag)
        gamma_conv = bool(np.max(np.abs(gamma.as_array()
                                        - gamma_prev.as_array()))
                          <= CONVERGENCE_TOL)
    (phi_star, beta_best), (th_max, g_max), (th_min, g_min) = \
        optimal_orientation(beta, gamma)
    bn, gn = tensor_norms(beta, gamma)
    diag = three_level(t.rotated(phi_star))
    return TensorSet(beta, gamma, bn, gn, phi_star, beta_best, th_max, g_max,
                     th_min, g_min, diag, beta_conv, gamma_conv)
