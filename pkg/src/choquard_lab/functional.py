"""Energies, constraint functionals and fibering maps.

Four problem modes share one parts-based implementation:

* ``lambda``  : I(u) = 1/2 (K + M) - R/(2p) - (lam/q) P
* ``mu``      : I(u) = 1/2 (K + M) - (mu/2p) R - P/q
* ``general`` : I(u) = 1/2 (K + mc M) - (mu/2p) R - (lam/q) P
* ``normalized-hls`` / ``normalized-sobolev`` : mass-constrained energies
  with the critical term carrying coefficient one.

K, M, R, P are the four integrals (kinetic, mass, Riesz interaction,
q-power).  Fibers are evaluated from the exact scaling laws of the parts,
never by re-quadrature, so critical-point classification is free of
interpolation noise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import (ConstraintViolation, InvalidParameter, NoProjection,
                     UndefinedDefect)
from .grid import RadialField, RadialGrid, integrate, kinetic_energy, gradient_seminorm
from .riesz import kernel_table

__all__ = ["ProblemParams", "EnergyBreakdown", "Parts", "compute_parts",
           "energy_breakdown", "energy_from_parts", "stationarity_defects",
           "nehari_project", "fiber_profile", "FiberProfile",
           "mass_fiber_classify", "FiberPoint"]

_MODES = ("lambda", "mu", "general", "normalized-hls", "normalized-sobolev")


@dataclass(frozen=True)
class ProblemParams:
    """Problem family: dimension, Riesz order, exponents and couplings.

    ``mass_coeff`` scales the L2 term of the free energies; rescaled frames
    (small-coupling studies) use values != 1.  Derived exponents are
    recomputed on access, never stored.
    """

    N: int
    alpha: float
    p: float
    q: float
    mode: str = "general"
    lam: float = 0.0
    mu: float = 0.0
    nu: float = 0.0
    a: float = 1.0
    mass_coeff: float = 1.0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise InvalidParameter(f"unknown mode {self.mode!r}")
        if self.N < 3:
            raise InvalidParameter("N must be >= 3")
        if not 0 < self.alpha < self.N:
            raise InvalidParameter(f"alpha={self.alpha} outside (0, N)")
        lo, hi = (self.N + self.alpha) / self.N, self.two_alpha_star
        if not lo < self.p <= hi:
            raise InvalidParameter(f"p={self.p} outside ({lo}, {hi}]")
        if not 2 < self.q <= self.two_star:
            raise InvalidParameter(f"q={self.q} outside (2, {self.two_star}]")
        if self.mode == "lambda" and self.lam <= 0:
            raise InvalidParameter("lambda mode needs lam > 0")
        if self.mode == "mu" and self.mu <= 0:
            raise InvalidParameter("mu mode needs mu > 0")
        if self.mode == "normalized-hls" and self.p != self.two_alpha_star:
            raise InvalidParameter("normalized-hls mode requires p = (N+alpha)/(N-2)")
        if self.mode == "normalized-sobolev" and self.q != self.two_star:
            raise InvalidParameter("normalized-sobolev mode requires q = 2N/(N-2)")
        if self.normalized and (self.nu < 0 or self.a <= 0):
            raise InvalidParameter("normalized modes need nu >= 0 and a > 0")

    # derived exponents -------------------------------------------------
    @property
    def two_star(self) -> float:
        return 2.0 * self.N / (self.N - 2)

    @property
    def two_alpha_star(self) -> float:
        return (self.N + self.alpha) / (self.N - 2)

    @property
    def gamma_q(self) -> float:
        return self.N * (self.q - 2) / (2.0 * self.q)

    @property
    def eta_p(self) -> float:
        return (self.N * self.p - self.N - self.alpha) / (2.0 * self.p)

    @property
    def sigma(self) -> float:
        """Frame exponent of the coupling->frequency rescalings."""
        if self.mode == "mu" or self.mode == "normalized-sobolev":
            return 2.0 / ((self.N - 2) * (self.p - 1) - self.alpha)
        return (self.two_star - 2) / (self.q - 2)

    @property
    def gamma_exp(self) -> float:
        return 2.0 * self.N - (self.N - 2) * self.q

    @property
    def eta_exp(self) -> float:
        return self.N + self.alpha - self.p * (self.N - 2)

    @property
    def normalized(self) -> bool:
        return self.mode.startswith("normalized")

    # energy coefficients ----------------------------------------------
    @property
    def riesz_coeff(self) -> float:
        if self.mode == "lambda":
            return 1.0
        if self.mode in ("mu", "general"):
            return self.mu
        if self.mode == "normalized-hls":
            return 1.0
        return self.nu

    @property
    def power_coeff(self) -> float:
        if self.mode == "lambda":
            return self.lam
        if self.mode == "mu":
            return 1.0
        if self.mode == "general":
            return self.lam
        if self.mode == "normalized-hls":
            return self.nu
        return 1.0

    def with_couplings(self, **kw) -> "ProblemParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class Parts:
    """The four integrals of a field under given params."""

    kinetic: float
    mass: float
    riesz: float
    power: float


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    mass: float
    riesz: float
    power: float
    total: float
    nehari_defect: float
    pohozaev_defect: float


def compute_parts(params: ProblemParams, u: RadialField, use_deriv: bool = True) -> Parts:
    """Kinetic / mass / Riesz / power integrals of u.

    The kinetic term uses the stored derivative when the field carries one
    (high-accuracy path for analytic or ODE-produced profiles) and the
    stiffness form otherwise (the form the solver is stationary for).
    """
    grid = u.grid
    if use_deriv and u.deriv is not None:
        K = gradient_seminorm(u)
    else:
        K = kinetic_energy(grid, u.values)
    M = integrate(grid, u.values ** 2)
    tab = kernel_table(grid, params.alpha)
    up = np.abs(u.values) ** params.p
    R = tab.bilinear(up, up)
    P = integrate(grid, np.abs(u.values) ** params.q)
    return Parts(kinetic=K, mass=M, riesz=R, power=P)


def energy_from_parts(params: ProblemParams, parts: Parts) -> float:
    """Total energy from precomputed parts (exact algebraic identity)."""
    K, M, R, P = parts.kinetic, parts.mass, parts.riesz, parts.power
    if params.normalized:
        if params.mode == "normalized-hls":
            return 0.5 * K - R / (2 * params.two_alpha_star) - params.nu / params.q * P
        return 0.5 * K - params.nu / (2 * params.p) * R - P / params.two_star
    return (0.5 * (K + params.mass_coeff * M)
            - params.riesz_coeff / (2 * params.p) * R
            - params.power_coeff / params.q * P)


def _defects_from_parts(params: ProblemParams, parts: Parts):
    K, M, R, P = parts.kinetic, parts.mass, parts.riesz, parts.power
    N, alpha, p, q = params.N, params.alpha, params.p, params.q
    if params.normalized:
        # multiplier-free constraint P_nu(u) plus the free Pohozaev identity
        # with the least-squares multiplier
        cR = params.riesz_coeff
        cP = params.power_coeff
        if params.mode == "normalized-hls":
            pnu = K - cR * R - params.nu * params.gamma_q * P
        else:
            pnu = K - params.nu * params.eta_p * R - P
        lam_hat = (cR * R + cP * P - K) / params.a ** 2
        poho = (0.5 * (N - 2) * K + 0.5 * N * lam_hat * M
                - (N + alpha) / (2 * p) * cR * R - N / q * cP * P)
        scale = max(abs(K), abs(cR * R), abs(cP * P), abs(lam_hat) * M, 1e-300)
        return pnu / scale, poho / scale
    cR = params.riesz_coeff
    cP = params.power_coeff
    mc = params.mass_coeff
    nehari = K + mc * M - cR * R - cP * P
    poho = (0.5 * (N - 2) * K + 0.5 * N * mc * M
            - (N + alpha) / (2 * p) * cR * R - N / q * cP * P)
    scale = max(abs(K), abs(mc * M), abs(cR * R), abs(cP * P), 1e-300)
    return nehari / scale, poho / scale


def energy_breakdown(params: ProblemParams, u: RadialField) -> EnergyBreakdown:
    parts = compute_parts(params, u)
    nd, pd = _defects_from_parts(params, parts)
    return EnergyBreakdown(kinetic=parts.kinetic, mass=parts.mass, riesz=parts.riesz,
                           power=parts.power, total=energy_from_parts(params, parts),
                           nehari_defect=nd, pohozaev_defect=pd)


def stationarity_defects(params: ProblemParams, u: RadialField):
    """(nehari_defect, pohozaev_defect), both relative to the largest term.

    Free modes: the Nehari identity and Lemma-type Pohozaev identity.
    Normalized modes: the multiplier-free dilation constraint and the free
    Pohozaev identity evaluated with the extracted Lagrange multiplier.
    """
    if not np.any(u.values):
        raise UndefinedDefect("defects undefined for the zero field")
    parts = compute_parts(params, u)
    return _defects_from_parts(params, parts)


# fibering maps ---------------------------------------------------------

_FIBER_KINDS = ("ray", "dilation", "mass")


def _fiber_exponents(params: ProblemParams, kind: str):
    """Exponents (eK, eM, eR, eP) of the four parts under the fiber map."""
    N, alpha, p, q = params.N, params.alpha, params.p, params.q
    if kind == "ray":
        return 2.0, 2.0, 2.0 * p, q
    if kind == "dilation":
        return float(N - 2), float(N), float(N + alpha), float(N)
    if kind == "mass":
        return 2.0, 0.0, float(N * p - N - alpha), q * params.gamma_q
    raise InvalidParameter(f"unknown fiber kind {kind!r}")


def fiber_energy(params: ProblemParams, parts: Parts, kind: str, t):
    """Energy along the fiber, from the closed scaling laws of the parts."""
    t = np.asarray(t, dtype=float)
    eK, eM, eR, eP = _fiber_exponents(params, kind)
    scaled = Parts(kinetic=parts.kinetic, mass=parts.mass, riesz=parts.riesz,
                   power=parts.power)
    K, M, R, P = scaled.kinetic, scaled.mass, scaled.riesz, scaled.power
    if params.normalized:
        if params.mode == "normalized-hls":
            return (0.5 * t ** eK * K - t ** eR * R / (2 * params.two_alpha_star)
                    - params.nu / params.q * t ** eP * P)
        return (0.5 * t ** eK * K - params.nu / (2 * params.p) * t ** eR * R
                - t ** eP * P / params.two_star)
    return (0.5 * (t ** eK * K + params.mass_coeff * t ** eM * M)
            - params.riesz_coeff / (2 * params.p) * t ** eR * R
            - params.power_coeff / params.q * t ** eP * P)


def _fiber_derivative(params: ProblemParams, parts: Parts, kind: str):
    """d/dt of the fiber energy as a callable, from exact exponents."""
    eK, eM, eR, eP = _fiber_exponents(params, kind)
    K, M, R, P = parts.kinetic, parts.mass, parts.riesz, parts.power
    if params.normalized:
        if params.mode == "normalized-hls":
            cK, cM = 0.5 * K, 0.0
            cR = R / (2 * params.two_alpha_star)
            cP = params.nu / params.q * P
        else:
            cK, cM = 0.5 * K, 0.0
            cR = params.nu / (2 * params.p) * R
            cP = P / params.two_star
    else:
        cK = 0.5 * K
        cM = 0.5 * params.mass_coeff * M
        cR = params.riesz_coeff / (2 * params.p) * R
        cP = params.power_coeff / params.q * P

    def d(t):
        out = eK * cK * t ** (eK - 1)
        if cM:
            out = out + eM * cM * t ** (eM - 1)
        return out - eR * cR * t ** (eR - 1) - eP * cP * t ** (eP - 1)

    def d2(t):
        out = eK * (eK - 1) * cK * t ** (eK - 2)
        if cM:
            out = out + eM * (eM - 1) * cM * t ** (eM - 2)
        return (out - eR * (eR - 1) * cR * t ** (eR - 2)
                - eP * (eP - 1) * cP * t ** (eP - 2))

    def dscale(t):
        """Magnitude of the individual t-derivative pieces (for degeneracy tests)."""
        return (eK * cK * t ** (eK - 1) + (eM * cM * t ** (eM - 1) if cM else 0.0)
                + eR * cR * t ** (eR - 1) + eP * cP * t ** (eP - 1))

    return d, d2, dscale


@dataclass(frozen=True)
class FiberProfile:
    kind: str
    ts: np.ndarray
    energies: np.ndarray
    critical_ts: tuple
    second_derivative_signs: tuple


def fiber_profile(params: ProblemParams, u: RadialField, kind: str, ts) -> FiberProfile:
    """Energy profile along a fiber with located critical points.

    Critical points are found on the sampled window by sign changes of the
    exact t-derivative, refined by bisection; second-derivative signs
    classify them (+1 local min, -1 local max, 0 degenerate).
    """
    ts = np.asarray(ts, dtype=float)
    if ts.size == 0:
        raise InvalidParameter("empty fiber grid")
    if np.any(ts <= 0):
        raise InvalidParameter("fiber grid must be positive")
    parts = compute_parts(params, u)
    energies = fiber_energy(params, parts, kind, ts)
    d, d2, dscale = _fiber_derivative(params, parts, kind)
    tdense = np.exp(np.linspace(np.log(ts.min()), np.log(ts.max()), max(4 * len(ts), 400)))
    vals = d(tdense)
    crit = []
    signs = []
    for i in range(len(tdense) - 1):
        if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0:
            t0 = brentq(d, tdense[i], tdense[i + 1], xtol=1e-14, rtol=1e-13) \
                if vals[i] * vals[i + 1] < 0 else tdense[i]
            if crit and abs(t0 - crit[-1]) < 1e-10 * t0:
                continue
            curv = d2(t0)
            crit.append(t0)
            signs.append(0 if abs(curv) * t0 < 1e-10 * dscale(t0)
                         else int(np.sign(curv)))
    return FiberProfile(kind=kind, ts=ts, energies=energies,
                        critical_ts=tuple(crit), second_derivative_signs=tuple(signs))


def nehari_project(params: ProblemParams, u: RadialField):
    """Unique t* > 0 with t*u on the Nehari manifold, and the projected field.

    Solves t^2 (K + mc M) = cR t^(2p) R + cP t^q P; uniqueness holds because
    the right side divided by t^2 is strictly increasing (p > 1, q > 2).
    """
    if params.normalized:
        raise InvalidParameter("ray projection applies to the free modes only")
    parts = compute_parts(params, u)
    A = parts.kinetic + params.mass_coeff * parts.mass
    B = params.riesz_coeff * parts.riesz
    C = params.power_coeff * parts.power
    if B <= 0.0 and C <= 0.0:
        raise NoProjection("both nonlinear terms vanish; no Nehari projection")
    p2, q2 = 2 * params.p - 2, params.q - 2

    def f(t):
        return B * t ** p2 + C * t ** q2 - A

    t_hi = 1.0
    while f(t_hi) < 0:
        t_hi *= 2.0
        if t_hi > 1e12:
            raise NoProjection("projection bracket exceeded range")
    t_lo = 0.5 * t_hi
    while f(t_lo) > 0:
        t_lo *= 0.5
        if t_lo < 1e-12:
            break
    t_star = brentq(f, t_lo, t_hi, xtol=1e-15, rtol=1e-14)
    deriv = t_star * u.deriv if u.deriv is not None else None
    return t_star, u.with_values(t_star * u.values, deriv=deriv)


@dataclass(frozen=True)
class FiberPoint:
    t: float
    branch: str  # "+", "0", or "-"


def mass_fiber_classify(params: ProblemParams, u: RadialField,
                        mass_rtol: float = 1e-8, degenerate_rtol: float = 1e-9):
    """Critical points of the mass-preserving fiber with P+/P0/P- labels.

    A local minimum of t -> E(u^t) is a P+ point (the defining second-variation
    inequality is exactly positivity of the fiber curvature on the constraint),
    a local maximum a P- point; near-zero curvature is flagged P0.
    """
    if not params.normalized:
        raise InvalidParameter("mass-fiber classification needs a normalized mode")
    parts = compute_parts(params, u)
    mdef = abs(parts.mass - params.a ** 2) / params.a ** 2
    if mdef > mass_rtol:
        raise ConstraintViolation(f"field off the mass sphere: |mass - a^2|/a^2 = {mdef:.2e}")
    d, d2, dscale = _fiber_derivative(params, parts, "mass")
    tdense = np.exp(np.linspace(np.log(1e-6), np.log(1e6), 6001))
    vals = d(tdense)
    points = []
    for i in range(len(tdense) - 1):
        if vals[i] * vals[i + 1] < 0:
            t0 = brentq(d, tdense[i], tdense[i + 1], xtol=1e-14, rtol=1e-13)
            curv = d2(t0) * t0
            if abs(curv) < degenerate_rtol * dscale(t0):
                branch = "0"
            elif curv > 0:
                branch = "+"
            else:
                branch = "-"
            points.append(FiberPoint(t=t0, branch=branch))
    return points
