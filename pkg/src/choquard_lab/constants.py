"""Named constants of the variational problems.

Gamma-formula constants (Riesz normalization, sharp HLS, sharp
Gagliardo-Nirenberg, Sobolev) are evaluated in closed form; the
Rayleigh-quotient constants are computed from supplied extremal fields.
The smallness thresholds K_q / K_p gate the mass-constrained two-branch
construction.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from math import gamma, pi

from .errors import DependencyMissing, InvalidParameter
from .grid import RadialField, RadialGrid, gradient_seminorm, integrate
from .riesz import interaction_energy, riesz_normalization

__all__ = [
    "riesz_normalization", "hls_constant", "interaction_bound_constant",
    "sobolev_constant", "gn_constant", "rayleigh_constants",
    "coefficient_table", "CoefficientTable", "ConstantsReport",
]


def hls_constant(N: int, alpha: float) -> float:
    """Sharp constant of the diagonal Hardy-Littlewood-Sobolev inequality.

    Bounds the bare double integral of u(x)v(y)|x-y|^(alpha-N) with
    exponents p = r = 2N/(N+alpha); the Riesz normalization A_alpha is not
    included (see `interaction_bound_constant`).
    """
    if not 0 < alpha < N:
        raise InvalidParameter(f"alpha={alpha} outside (0, N={N})")
    return (pi ** ((N - alpha) / 2) * gamma(alpha / 2) / gamma((N + alpha) / 2)
            * (gamma(N / 2) / gamma(N)) ** (-alpha / N))


def interaction_bound_constant(N: int, alpha: float) -> float:
    """Sharp bound for the A_alpha-normalized interaction:
    int (I_alpha*g) g <= this * ||g||_{2N/(N+alpha)}^2."""
    return riesz_normalization(N, alpha) * hls_constant(N, alpha)


def sobolev_constant(N: int) -> float:
    """Best constant of ||grad u||_2^2 >= S ||u||_{2*}^2 on R^N."""
    return pi * N * (N - 2) * (gamma(N / 2) / gamma(N)) ** (2.0 / N)


def gn_constant(N: int, q: float, q_norm2: float) -> float:
    """Sharp Gagliardo-Nirenberg constant C_Nq from the L2 norm of the
    (unique) positive radial ground state of -Q'' - (N-1)/r Q' + Q = Q^(q-1).

    C_Nq^q = 2q/(2N-q(N-2)) * ((2N-q(N-2))/(N(q-2)))^(N(q-2)/4) / ||Q_q||_2^(q-2).
    """
    if not 2 < q < 2 * N / (N - 2):
        raise InvalidParameter(f"q={q} outside (2, 2*) for N={N}")
    gam = 2 * N - q * (N - 2)
    cq = (2 * q / gam) * (gam / (N * (q - 2))) ** (N * (q - 2) / 4.0) / q_norm2 ** (q - 2)
    return cq ** (1.0 / q)


def _h1_quotient_terms(grid: RadialGrid, u: RadialField):
    kin = gradient_seminorm(u)
    mass = integrate(grid, u.values ** 2)
    if kin == 0.0 and mass == 0.0:
        raise InvalidParameter("Rayleigh quotient of the zero field")
    return kin, mass


@dataclass(frozen=True)
class RayleighConstants:
    S: float
    S_alpha: float
    S_q: float | None
    S_p: float | None


def rayleigh_constants(grid: RadialGrid, alpha: float, w1: RadialField,
                       q: float | None = None, q_ground: RadialField | None = None,
                       p: float | None = None, choquard_ground: RadialField | None = None,
                       ) -> RayleighConstants:
    """Grid Rayleigh-quotient constants evaluated at supplied extremal fields.

    S from the Sobolev quotient of the bubble; S_alpha from its HLS-critical
    quotient; S_q / S_p from the H1 quotients at the local and Choquard
    ground states (optional, None when the field is not supplied).
    """
    if w1 is None:
        raise DependencyMissing("extremal bubble field required for S and S_alpha")
    N = grid.N
    two_star = 2 * N / (N - 2)
    kin = gradient_seminorm(w1)
    if kin == 0.0:
        raise InvalidParameter("Rayleigh quotient of the zero field")
    lq = integrate(grid, w1.values ** two_star)
    S = kin / lq ** (2.0 / two_star)
    t2a = (N + alpha) / (N - 2)
    D = interaction_energy(grid, w1, t2a, alpha)
    S_alpha = kin / D ** ((N - 2.0) / (N + alpha))
    S_q = None
    if q_ground is not None:
        if q is None:
            raise InvalidParameter("exponent q required with q_ground")
        k2, m2 = _h1_quotient_terms(grid, q_ground)
        P = integrate(grid, q_ground.values ** q)
        S_q = (k2 + m2) / P ** (2.0 / q)
    S_p = None
    if choquard_ground is not None:
        if p is None:
            raise InvalidParameter("exponent p required with choquard_ground")
        k3, m3 = _h1_quotient_terms(grid, choquard_ground)
        R = interaction_energy(grid, choquard_ground, p, alpha)
        S_p = (k3 + m3) / R ** (1.0 / p)
    return RayleighConstants(S=S, S_alpha=S_alpha, S_q=S_q, S_p=S_p)


@dataclass(frozen=True)
class CoefficientTable:
    """Mass-scaling exponents, smallness thresholds and critical levels."""

    N: int
    alpha: float
    p: float
    q: float
    gamma_q: float
    eta_p: float
    K_q: float | None
    K_p: float | None
    nu_bound_hls: float | None
    nu_bound_sob: float | None
    crit_level_hls: float
    crit_level_sob: float


def mass_scaling_exponents(N: int, alpha: float, p: float, q: float):
    gamma_q = N * (q - 2.0) / (2.0 * q)
    eta_p = (N * p - N - alpha) / (2.0 * p)
    return gamma_q, eta_p


def coefficient_table(N: int, alpha: float, p: float, q: float,
                      S_alpha: float, S: float | None = None,
                      C_Nq: float | None = None, C_Np: float | None = None,
                      ) -> CoefficientTable:
    """Evaluate gamma_q, eta_p, the K_q/K_p thresholds and critical levels.

    K_q (HLS-critical branch gate) needs C_Nq and S_alpha and is defined for
    q in (2, 2+4/N); K_p (Sobolev-critical gate) needs C_Np, the HLS bound
    constant and S, for p in ((N+alpha)/N, 1+(2+alpha)/N).  Outside those
    windows the corresponding entries are None.
    """
    two_star = 2.0 * N / (N - 2)
    t2a = (N + alpha) / (N - 2.0)
    if not 0 < alpha < N:
        raise InvalidParameter(f"alpha={alpha} outside (0, N={N})")
    if not (N + alpha) / N < p <= t2a:
        raise InvalidParameter(f"p={p} outside ((N+alpha)/N, (N+alpha)/(N-2)]")
    if not 2 < q <= two_star:
        raise InvalidParameter(f"q={q} outside (2, 2*]")
    gamma_q, eta_p = mass_scaling_exponents(N, alpha, p, q)
    if not 0 < gamma_q:
        raise InvalidParameter(f"gamma_q={gamma_q} violates gamma_q > 0 (q={q} at boundary)")
    crit_level_hls = (2 + alpha) / (2 * (N + alpha)) * S_alpha ** ((N + alpha) / (2 + alpha))
    if S is None:
        S = sobolev_constant(N)
    crit_level_sob = S ** (N / 2.0) / N
    K_q = nu_bound_hls = None
    if q < 2 + 4.0 / N and C_Nq is not None:
        qg = q * gamma_q
        A = t2a * (2 - qg) * C_Nq ** q * S_alpha ** t2a / (q * (t2a - 1))
        K_q = ((2 * t2a - qg) / (2 * t2a * (2 - qg) * S_alpha ** t2a)
               * A ** (2 * (t2a - 1) / (2 * t2a - qg)))
        nu_bound_hls = (2 * K_q) ** (-(2 * (N + alpha) - qg * (N - 2)) / (2 * (2 + alpha)))
    K_p = nu_bound_sob = None
    if p < 1 + (2.0 + alpha) / N and C_Np is not None:
        # max_rho f_(a,nu)(rho) = 1/2 - K_p varpi^(2/(N - p eta_p (N-2))); the
        # bracket carries the S^(N/(N-2)) factor of the maximizing rho
        Ca = interaction_bound_constant(N, alpha)
        peta = p * eta_p
        K_p = ((N * (alpha - (p - 1) * (N - 2)) + 2 * (N - alpha))
               / (2 * N * (2 + alpha - N * (p - 1))) * S ** (-N / (N - 2.0))
               * (N * (1 - peta) * Ca * C_Np ** (2 * p) * S ** (N / (N - 2.0)) / (2 * p))
               ** (2.0 / (N - peta * (N - 2))))
        nu_bound_sob = (2 * K_p) ** (-(N - peta * (N - 2)) / 2.0)
    return CoefficientTable(N=N, alpha=alpha, p=p, q=q, gamma_q=gamma_q, eta_p=eta_p,
                            K_q=K_q, K_p=K_p, nu_bound_hls=nu_bound_hls,
                            nu_bound_sob=nu_bound_sob, crit_level_hls=crit_level_hls,
                            crit_level_sob=crit_level_sob)


@dataclass(frozen=True)
class ConstantsReport:
    """Everything the experiments need, in one serializable bundle."""

    N: int
    alpha: float
    p: float
    q: float
    A_alpha: float
    C_alpha: float
    C_Nq: float | None
    S: float
    S_analytic: float
    S_alpha: float
    S_q: float | None
    S_p: float | None
    gamma_q: float
    eta_p: float
    K_q: float | None
    K_p: float | None
    crit_level_hls: float
    crit_level_sob: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def table(self) -> str:
        lines = [f"{'quantity':<16} value"]
        for k, v in asdict(self).items():
            lines.append(f"{k:<16} {v}")
        return "\n".join(lines)
