"""Physical systems and kinematics in dimensionless units.

Units: hbar = 1, 2m = 1 and the well width a = 1.  Energies are therefore
measured in (2 m a^2)^-1 and times in 2 m a^2.

Box system: an infinite wall at x = -1, a flat well of depth G0 on
[-1, 0], a rectangular barrier of height G/u on [0, u] and free motion
beyond.  The initial state is the lowest well eigenstate sqrt(2) sin(pi x).

Trapezoid system: a wall at x = 0, V = 0 up to ``pos_a``, a linear ramp to
``h1`` at ``pos_b``, a plateau up to ``pos_c`` and a linear descent to the
asymptotic level ``h2`` at ``pos_d``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .errors import ModelValidityError, NumericalError

PI2 = math.pi**2


class UnitsConvention:
    """Conversion between dimensionful and dimensionless quantities.

    Only pure scalings are provided; every other function in the package
    takes dimensionless input.
    """

    hbar = 1.0
    two_m = 1.0
    a = 1.0

    @staticmethod
    def energy_unit(mass: float, width: float, hbar: float = 1.0) -> float:
        """Size of one dimensionless energy unit, hbar^2 / (2 m a^2)."""
        return hbar**2 / (2.0 * mass * width**2)

    @staticmethod
    def time_unit(mass: float, width: float, hbar: float = 1.0) -> float:
        """Size of one dimensionless time unit, 2 m a^2 / hbar."""
        return 2.0 * mass * width**2 / hbar

    @classmethod
    def to_dimensionless_energy(cls, energy, mass, width, hbar=1.0):
        return energy / cls.energy_unit(mass, width, hbar)

    @classmethod
    def to_dimensionless_time(cls, time, mass, width, hbar=1.0):
        return time / cls.time_unit(mass, width, hbar)


@dataclass(frozen=True)
class BoxSystem:
    """Wall + well + rectangular barrier.

    Parameters
    ----------
    G : float
        Barrier strength; the barrier height is ``G / u``.
    G0 : float
        Well depth.
    u : float
        Barrier width in units of the well width.
    """

    G: float
    G0: float
    u: float

    def __post_init__(self):
        for name in ("G", "G0", "u"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ModelValidityError(f"{name} must be a finite number, got {v!r}")
        if self.G < 0 or self.G0 < 0:
            raise ModelValidityError("G and G0 must be nonnegative")
        if self.u <= 0:
            raise ModelValidityError("barrier width u must be positive")
        object.__setattr__(self, "G", float(self.G))
        object.__setattr__(self, "G0", float(self.G0))
        object.__setattr__(self, "u", float(self.u))

    # derived accessors in the dimensionless convention
    @property
    def a(self) -> float:
        return 1.0

    @property
    def b(self) -> float:
        return self.u

    @property
    def U(self) -> float:
        return self.G

    @property
    def U0(self) -> float:
        return self.G0

    @property
    def barrier_height(self) -> float:
        return self.G / self.u

    @property
    def eps_th(self) -> float:
        return 0.0

    def params(self) -> dict:
        return {"model": "box", "G": self.G, "G0": self.G0, "u": self.u}


@dataclass(frozen=True)
class TrapezoidSystem:
    """Trapezoidal barrier geometry (positions in units of ``pos_a``)."""

    pos_b: float
    pos_c: float
    pos_d: float
    h1: float
    h2: float
    pos_a: float = 1.0

    def __post_init__(self):
        vals = (self.pos_a, self.pos_b, self.pos_c, self.pos_d, self.h1, self.h2)
        if not all(math.isfinite(float(v)) for v in vals):
            raise ModelValidityError("trapezoid parameters must be finite")
        if not 0 < self.pos_a < self.pos_b < self.pos_c < self.pos_d:
            raise ModelValidityError("need 0 < a < b < c < d")
        if not self.h1 > self.h2 > 0:
            raise ModelValidityError("need h1 > h2 > 0")

    @property
    def L(self) -> float:
        return self.h1 / (self.pos_b - self.pos_a)

    @property
    def R(self) -> float:
        return (self.h1 - self.h2) / (self.pos_d - self.pos_c)

    @property
    def eps_th(self) -> float:
        return self.h2

    def params(self) -> dict:
        return {
            "model": "trapezoid",
            "a": self.pos_a,
            "b": self.pos_b,
            "c": self.pos_c,
            "d": self.pos_d,
            "h1": self.h1,
            "h2": self.h2,
        }


@dataclass(frozen=True)
class Kinematics:
    q: float
    r: float
    s: float
    branch: str  # "evanescent" or "propagating"

    @property
    def evanescent(self) -> bool:
        return self.branch == "evanescent"


def bare_level(sys: BoxSystem) -> float:
    """Energy expectation of the initial well state, pi^2 - G0."""
    return PI2 - sys.G0


def kinematics(sys: BoxSystem, eps: float) -> Kinematics:
    if eps < 0:
        raise ModelValidityError(f"energy must be nonnegative, got {eps}")
    vb = sys.barrier_height
    q = math.sqrt(eps)
    r = math.sqrt(eps + sys.G0)
    # the matching point itself goes to the evanescent formula
    if eps <= vb:
        return Kinematics(q, r, math.sqrt(vb - eps), "evanescent")
    return Kinematics(q, r, math.sqrt(eps - vb), "propagating")


def barrier_transfer(sys: BoxSystem, eps: float) -> np.ndarray:
    """2x2 matrix carrying (psi, psi') across the barrier at real energy."""
    u = sys.u
    d = sys.barrier_height - eps
    if d > 0:
        s = math.sqrt(d)
        x = s * u
        sh_over_s = u if x < 1e-8 else math.sinh(x) / s
        return np.array([[math.cosh(x), sh_over_s], [s * math.sinh(x), math.cosh(x)]])
    if d < 0:
        st = math.sqrt(-d)
        x = st * u
        return np.array([[math.cos(x), math.sin(x) / st], [-st * math.sin(x), math.cos(x)]])
    return np.array([[1.0, u], [0.0, 1.0]])


def zero_energy_node_count(sys: BoxSystem) -> int:
    """Number of bound states, by counting nodes of the zero-energy solution.

    Oscillation theorem on the half line: the count equals the number of
    zeros of the E = 0 solution beyond the wall (the asymptotic linear
    piece contributes one node if it crosses zero at finite x).
    """
    r0 = math.sqrt(sys.G0)
    nodes = int(math.floor(r0 / math.pi))
    psi, dpsi = math.sin(r0), r0 * math.cos(r0)
    if sys.G0 == 0:
        psi, dpsi = 0.0, 1.0
        nodes = 0
    s0 = math.sqrt(sys.barrier_height)
    if s0 > 0 and psi * dpsi < 0:
        # psi cosh + dpsi sinh / s0 = 0  <=>  tanh(s0 x) = -psi s0 / dpsi
        t = -psi * s0 / dpsi
        if t < 1.0 and math.atanh(t) / s0 <= sys.u:
            nodes += 1
    psi_u, dpsi_u = barrier_transfer(sys, 0.0) @ np.array([psi, dpsi])
    if psi_u * dpsi_u < 0:
        nodes += 1
    return nodes


def validate_box(sys: BoxSystem, n_grid: int = 10_000) -> BoxSystem:
    """Reject systems whose initial level is not a continuum resonance.

    Two checks run.  The grid check evaluates the denominator function on
    ``n_grid`` points of (0, eps0]; it is a heuristic.  The node count of
    the zero-energy solution is the decisive bound-state test.
    """
    from .spectral import alpha_box_array

    e0 = bare_level(sys)
    if e0 <= 0:
        raise ModelValidityError(
            f"bare level pi^2 - G0 = {e0:.6g} is not above threshold"
        )
    grid = np.linspace(e0 / n_grid, e0, n_grid)
    if np.any(alpha_box_array(sys, grid) <= 0):
        raise ModelValidityError("denominator not positive on (0, eps0]")
    n = zero_energy_node_count(sys)
    if n:
        raise ModelValidityError(f"system has {n} bound state(s) below threshold")
    return sys


@dataclass(frozen=True)
class JunctionSolution:
    """Delta-normalized eigenstate coefficients of the box system."""

    eps: float
    A: float  # well amplitude, psi = A sin(r (x + 1))
    barrier: tuple  # coefficients of the barrier basis functions
    D: float  # free region: D sin(q x) + E cos(q x)
    E: float
    condition: float

    @property
    def implied_alpha(self) -> float:
        return math.sqrt(self.eps) / (math.pi * self.A**2)


def solve_junction(sys: BoxSystem, eps: float) -> JunctionSolution:
    """Solve the matching conditions at x = 0 and x = u as a linear system.

    Unknowns are the barrier coefficients and the free-region (D, E), with
    the well amplitude set to one; the scale is then fixed by
    D^2 + E^2 = 1/(pi q), the energy delta normalization.
    """
    if eps <= 0:
        raise ModelValidityError("junction solution needs eps > 0")
    k = kinematics(sys, eps)
    q, r, u = k.q, k.r, sys.u
    # barrier basis f1, f2 with values and slopes at x = 0 and x = u
    if k.branch == "evanescent" and k.s > 0:
        s = k.s
        # e^{s (x - u)} and e^{-s x}: both bounded on [0, u]
        eu = math.exp(-s * u)
        f = [(eu, s * eu, 1.0, s), (1.0, -s, eu, -s * eu)]
    elif k.branch == "propagating":
        s = k.s
        f = [
            (1.0, 0.0, math.cos(s * u), -s * math.sin(s * u)),
            (0.0, s, math.sin(s * u), s * math.cos(s * u)),
        ]
    else:
        f = [(1.0, 0.0, 1.0, 0.0), (0.0, 1.0, u, 1.0)]
    (f1_0, g1_0, f1_u, g1_u), (f2_0, g2_0, f2_u, g2_u) = f
    sq, cq = math.sin(q * u), math.cos(q * u)
    # unknowns: B1, B2, D, E
    M = np.array(
        [
            [f1_0, f2_0, 0.0, 0.0],
            [g1_0, g2_0, 0.0, 0.0],
            [f1_u, f2_u, -sq, -cq],
            [g1_u, g2_u, -q * cq, q * sq],
        ]
    )
    rhs = np.array([math.sin(r), r * math.cos(r), 0.0, 0.0])
    cond = np.linalg.cond(M)
    if not math.isfinite(cond) or cond > 1e14:
        raise NumericalError(f"junction system ill-conditioned (cond = {cond:.3g})")
    B1, B2, D, E = linalg.solve(M, rhs)
    scale = 1.0 / math.sqrt(math.pi * q * (D * D + E * E))
    return JunctionSolution(eps, scale, (B1 * scale, B2 * scale), D * scale, E * scale, cond)


def initial_state_overlap_oracle(sys: BoxSystem, eps: float) -> float:
    """|<eps|0>|^2 from the junction solution and a direct overlap quadrature."""
    sol = solve_junction(sys, eps)
    r = math.sqrt(eps + sys.G0)
    # psi on [-1, 0] is A sin(r (x+1)); initial state sqrt(2) sin(pi (x+1)) up to sign
    with warnings.catch_warnings():
        # quad reports roundoff once it is at the double-precision floor
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        ov, _ = integrate.quad(
            lambda y: math.sqrt(2.0) * math.sin(math.pi * y) * math.sin(r * y),
            0.0,
            1.0,
            epsabs=0.0,
            epsrel=1e-13,
            limit=200,
        )
    return (sol.A * ov) ** 2
