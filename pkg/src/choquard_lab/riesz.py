"""Riesz potential engine for radial fields.

The reduced radial kernel is the exact angular average of
A_alpha(N) |x-y|^(alpha-N) over a sphere, evaluated in closed form through
a Gauss hypergeometric function.  A per-(grid, alpha) table turns the
convolution into a dense matrix-vector product; panels near the diagonal,
where the kernel has a kink (alpha = 2), a logarithmic singularity
(alpha = 1) or an integrable algebraic one (alpha < 1), are assembled by
product integration on geometrically refined sub-panels.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import gamma, pi

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import hyp2f1

from .errors import IncompatibleGrid, InvalidParameter
from .grid import RadialField, RadialGrid, _moment_weights

__all__ = ["kernel_value", "RieszKernelTable", "kernel_table", "convolve",
           "interaction_energy", "potential_at"]

_GL8 = np.polynomial.legendre.leggauss(8)


def riesz_normalization(N: int, alpha: float) -> float:
    """A_alpha(N) = Gamma((N-alpha)/2) / (Gamma(alpha/2) pi^(N/2) 2^alpha)."""
    if not 0 < alpha < N:
        raise InvalidParameter(f"alpha={alpha} outside (0, N={N})")
    return gamma((N - alpha) / 2) / (gamma(alpha / 2) * pi ** (N / 2) * 2 ** alpha)


def _sphere_surface(d: int) -> float:
    return 2.0 * pi ** (d / 2) / gamma(d / 2)


def kernel_value(N: int, alpha: float, r, s):
    """Reduced radial kernel K(r, s) with (I_alpha * g)(r) = int K(r,s) g(s) s^(N-1) ds.

    Exact angular average of A_alpha(N)|x-y|^(alpha-N) over the sphere |y| = s:
        K = A_alpha |S^(N-2)| B((N-1)/2, 1/2) max(r,s)^(alpha-N)
            * 2F1((N-alpha)/2, 1-alpha/2; N/2; (min/max)^2).
    Diverges on the diagonal for alpha <= 1; the convolution table never
    samples it there (product integration takes over).
    """
    if not 0 < alpha < N:
        raise InvalidParameter(f"alpha={alpha} outside (0, N={N})")
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    hi = np.maximum(r, s)
    lo = np.minimum(r, s)
    z2 = np.where(hi > 0, (lo / np.where(hi > 0, hi, 1.0)) ** 2, 0.0)
    if alpha == 2.0:
        F = np.ones_like(z2)
    else:
        F = hyp2f1((N - alpha) / 2.0, 1.0 - alpha / 2.0, N / 2.0, z2)
    pref = (riesz_normalization(N, alpha) * _sphere_surface(N - 1)
            * beta_fn((N - 1) / 2.0, 0.5))
    out = pref * hi ** (alpha - N) * F
    return out


def _refined_pieces(a: float, b: float, sing: float, depth: int = 14, ratio: float = 0.25):
    """Sub-intervals of [a, b] geometrically graded toward the endpoint `sing`."""
    L = b - a
    if sing <= a:
        pts = [a] + [a + L * ratio ** k for k in range(depth - 1, 0, -1)] + [b]
    else:
        pts = [a] + [b - L * ratio ** k for k in range(1, depth)] + [b]
    return [(lo, hi) for lo, hi in zip(pts[:-1], pts[1:]) if hi > lo]


def _panel_product_row(N: int, alpha: float, t: float, a: float, b: float, nodes):
    """int_a^b K(t, s) l_m(s) s^(N-1) ds for the quadratic Lagrange basis l_m.

    Split at s = t when it falls inside, refining geometrically toward the
    singular point; handles the |r-s|^(alpha-1)-type local behavior.
    """
    if a < t < b:
        pieces = _refined_pieces(a, t, t) + _refined_pieces(t, b, t)
    elif t <= a:
        pieces = _refined_pieces(a, b, a)
    else:
        pieces = _refined_pieces(a, b, b)
    xs = []
    ws = []
    for lo, hi in pieces:
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        xs.append(mid + half * _GL8[0])
        ws.append(half * _GL8[1])
    xs = np.concatenate(xs)
    ws = np.concatenate(ws)
    K = kernel_value(N, alpha, t, xs) if t > 0 else (
        riesz_normalization(N, alpha) * _sphere_surface(N) * xs ** (alpha - N))
    x0, x1, x2 = nodes
    l0 = (xs - x1) * (xs - x2) / ((x0 - x1) * (x0 - x2))
    l1 = (xs - x0) * (xs - x2) / ((x1 - x0) * (x1 - x2))
    l2 = (xs - x0) * (xs - x1) / ((x2 - x0) * (x2 - x1))
    base = K * xs ** (N - 1) * ws
    return np.array([np.dot(base, l0), np.dot(base, l1), np.dot(base, l2)])


@dataclass(frozen=True)
class RieszKernelTable:
    """Cached discrete convolution for one (grid, alpha).

    `M` maps nodal values of g to nodal values of I_alpha * g; `G` is the
    symmetrized bilinear form so that int (I_alpha*f) g = f^T G g exactly
    symmetric; `origin_row` evaluates the potential at r = 0.
    """

    grid: RadialGrid
    alpha: float
    M: np.ndarray
    G: np.ndarray
    origin_row: np.ndarray

    def convolve_values(self, gvals: np.ndarray) -> np.ndarray:
        """Pointwise potential via the product-integration rows.

        (The bilinear form goes through `G`, the symmetrized pairing; the two
        agree to quadrature accuracy, but dividing G by the tiny origin-side
        weights would amplify the symmetrization residue pointwise.)
        """
        return self.M @ gvals

    def origin_value(self, gvals: np.ndarray) -> float:
        return float(np.dot(self.origin_row, gvals))

    def bilinear(self, fvals: np.ndarray, gvals: np.ndarray) -> float:
        return float(fvals @ (self.G @ gvals))

    @property
    def key_hash(self) -> str:
        h = hashlib.sha256(repr((self.grid.key, self.alpha)).encode())
        return h.hexdigest()[:16]

    def save(self, path):
        np.savez_compressed(path, M=self.M, G=self.G, origin_row=self.origin_row,
                            meta=np.array(repr((self.grid.key, self.alpha))))

    @classmethod
    def load(cls, path, grid: RadialGrid, alpha: float) -> "RieszKernelTable":
        data = np.load(path, allow_pickle=False)
        if str(data["meta"]) != repr((grid.key, alpha)):
            raise IncompatibleGrid("kernel table on disk was built for another grid")
        return cls(grid=grid, alpha=alpha, M=data["M"], G=data["G"],
                   origin_row=data["origin_row"])


def _build_table(grid: RadialGrid, alpha: float) -> RieszKernelTable:
    N = grid.N
    r = grid.r
    w = grid.w
    n = len(r)
    R, S = np.meshgrid(r, r, indexing="ij")
    K = kernel_value(N, alpha, R, S)
    np.fill_diagonal(K, 0.0)  # replaced by product integration below
    M = K * w[None, :]
    # near-diagonal corrections: for each target, redo the panels whose
    # interval lies within one panel-width of it
    starts = np.array([p[0] for p in grid.panels])
    ends = np.array([p[1] for p in grid.panels])
    for i in range(n):
        t = r[i]
        width = ends - starts
        near = (starts - width <= t) & (t <= ends + width)
        near[0] = t <= r[2]  # head segment
        for pi in np.nonzero(near)[0]:
            a, b, idx = grid.panels[pi]
            nodes = tuple(r[list(idx)])
            old = grid.panel_weights[pi]
            cor = _panel_product_row(N, alpha, t, a, b, nodes)
            for m, j in enumerate(idx):
                M[i, j] += cor[m] - K[i, j] * old[m]
    Wf = grid.weights_full
    WM = Wf[:, None] * M
    G = 0.5 * (WM + WM.T)
    # origin row: kernel ~ s^(alpha-N), integrand ~ s^(alpha-1) near 0
    c0 = riesz_normalization(N, alpha) * _sphere_surface(N)
    row0 = c0 * r ** (alpha - N) * w
    for pi in range(min(3, len(grid.panels))):
        a, b, idx = grid.panels[pi]
        nodes = tuple(r[list(idx)])
        old = grid.panel_weights[pi]
        cor = _panel_product_row(N, alpha, 0.0, a, b, nodes)
        for m, j in enumerate(idx):
            row0[j] += cor[m] - c0 * r[j] ** (alpha - N) * old[m]
    return RieszKernelTable(grid=grid, alpha=alpha, M=M, G=G, origin_row=row0)


_TABLE_CACHE: dict = {}


def kernel_table(grid: RadialGrid, alpha: float) -> RieszKernelTable:
    """Build or reuse the convolution table for (grid, alpha)."""
    key = (id(grid), float(alpha))
    tab = _TABLE_CACHE.get(key)
    if tab is None:
        tab = _build_table(grid, alpha)
        _TABLE_CACHE[key] = tab
    return tab


def convolve(grid: RadialGrid, g: RadialField, alpha: float) -> RadialField:
    """I_alpha * g on the grid; positive whenever g is nontrivial and >= 0."""
    if g.grid is not grid and not g.grid.same_as(grid):
        raise IncompatibleGrid("field lives on a different grid")
    tab = kernel_table(grid, alpha)
    vals = tab.convolve_values(g.values)
    return RadialField(grid=grid, values=vals, origin=tab.origin_value(g.values),
                       deriv=None, tail_floor=g.tail_floor)


def potential_at(grid: RadialGrid, g: RadialField, alpha: float, r_targets) -> np.ndarray:
    """Potential values at arbitrary radii (rows built on demand)."""
    r_targets = np.atleast_1d(np.asarray(r_targets, dtype=float))
    N = grid.N
    r = grid.r
    w = grid.w
    out = np.zeros(len(r_targets))
    starts = np.array([p[0] for p in grid.panels])
    ends = np.array([p[1] for p in grid.panels])
    for k, t in enumerate(r_targets):
        if t == 0.0:
            tab = kernel_table(grid, alpha)
            out[k] = tab.origin_value(g.values)
            continue
        row = kernel_value(N, alpha, t, r)
        row[np.isclose(r, t)] = 0.0
        row = row * w
        width = ends - starts
        near = (starts - width <= t) & (t <= ends + width)
        near[0] = t <= r[2]
        for pi in np.nonzero(near)[0]:
            a, b, idx = grid.panels[pi]
            nodes = tuple(r[list(idx)])
            old = grid.panel_weights[pi]
            kv = kernel_value(N, alpha, t, np.array(nodes))
            kv[np.isclose(np.array(nodes), t)] = 0.0
            cor = _panel_product_row(N, alpha, t, a, b, nodes)
            for m, j in enumerate(idx):
                row[j] += cor[m] - kv[m] * old[m]
        out[k] = np.dot(row, g.values)
    return out


def interaction_energy(grid: RadialGrid, u: RadialField, p: float, alpha: float) -> float:
    """int (I_alpha * u^p) u^p  (nonnegative, bilinear-symmetric)."""
    if u.grid is not grid and not u.grid.same_as(grid):
        raise IncompatibleGrid("field lives on a different grid")
    tab = kernel_table(grid, alpha)
    up = np.abs(u.values) ** p
    return tab.bilinear(up, up)
