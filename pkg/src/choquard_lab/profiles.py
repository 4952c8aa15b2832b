"""Closed-form radial profiles: the Sobolev extremal bubble, HLS extremizer,
Gaussian seeds, and the fixed cutoff used by the bubble family."""

from __future__ import annotations

import numpy as np

from .grid import RadialField, RadialGrid

__all__ = ["talenti_peak", "talenti", "hls_extremizer", "gaussian", "smoothstep_cutoff"]


def talenti_peak(N: int) -> float:
    return (N * (N - 2.0)) ** ((N - 2.0) / 4.0)


def talenti(grid: RadialGrid, eps: float = 1.0) -> RadialField:
    """Sobolev extremal profile at concentration scale eps, with exact derivative.

    W_eps(r) = eps^(-(N-2)/2) W_1(r/eps),  W_1(r) = [N(N-2)]^((N-2)/4) (1+r^2)^(-(N-2)/2).
    """
    N = grid.N
    c = talenti_peak(N) * eps ** (-(N - 2) / 2.0)
    s = grid.r / eps

    def w(sv):
        return c * (1.0 + sv ** 2) ** (-(N - 2) / 2.0)

    vals = w(s)
    dvals = c * (-(N - 2.0)) * s * (1.0 + s ** 2) ** (-(N - 2) / 2.0 - 1) / eps
    return RadialField.from_values(grid, vals, deriv=dvals, origin=float(c))


def hls_extremizer(grid: RadialGrid, alpha: float) -> RadialField:
    """(1 + r^2)^(-(N+alpha)/2): saturates the diagonal HLS inequality."""
    N = grid.N
    e = -(N + alpha) / 2.0
    vals = (1.0 + grid.r ** 2) ** e
    dvals = e * 2.0 * grid.r * (1.0 + grid.r ** 2) ** (e - 1)
    return RadialField.from_values(grid, vals, deriv=dvals, origin=1.0)


def gaussian(grid: RadialGrid, width: float = 1.0, amplitude: float = 1.0) -> RadialField:
    vals = amplitude * np.exp(-(grid.r / width) ** 2)
    dvals = vals * (-2.0 * grid.r / width ** 2)
    return RadialField.from_values(grid, vals, deriv=dvals, origin=float(amplitude))


def smoothstep_cutoff(x):
    """Quintic cutoff: 1 on x<=1, 0 on x>=2, C^2 monotone bridge in between.

    Pinned library-wide so every O(.) constant in bubble sweeps is reproducible.
    """
    x = np.asarray(x, dtype=float)
    t = np.clip(x - 1.0, 0.0, 1.0)
    s = 6 * t ** 5 - 15 * t ** 4 + 10 * t ** 3
    return 1.0 - s
