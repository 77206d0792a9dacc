"""Special functions used by the spectral models.

``airy_basis`` evaluates the pair

    B_{+-1/3}(z) = sqrt(-pi z)/3 * J_{+-1/3}((2/3) (-z)^{3/2})

together with their z-derivatives.  Both are entire in z and solve
w'' = z w, and B_{+-1/3} = (sqrt(pi)/2) (Ai -+ Bi/sqrt(3)).

Three regimes:

* |z| <= SERIES_LIMIT: the J_{+-1/3} power series written directly in z,
  so z > 0 needs no separate modified-Bessel path;
* |z| >= ASYMPTOTIC_LIMIT: large-argument expansions of Ai and Bi;
* in between, a short Taylor step of the ODE from the nearest tabulated
  anchor.  The anchors are filled once at import by stepping outwards from
  the series region, except for the recessive Ai on z > 0, which is stepped
  inwards from the asymptotic region where it is accurate.

Ai and Bi are kept separately in :class:`AiryBasisValue`, so the Wronskian
does not suffer the cancellation that B_{+1/3} B'_{-1/3} - B_{-1/3} B'_{+1/3}
has once both functions are dominated by Bi.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

SQRT_PI = math.sqrt(math.pi)
SQRT3 = math.sqrt(3.0)
_H = SQRT_PI / 2.0

#: |z| up to which the J_{+-1/3} power series is summed.
SERIES_LIMIT = 2.0
#: |z| from which the asymptotic expansions are used.  Their smallest term
#: is about exp(-2 zeta), below 3e-16 here.
ASYMPTOTIC_LIMIT = 9.0
#: Default bound on z.  Beyond it values are returned scaled by exp(-zeta).
Z_MAX = 50.0
ANCHOR_SPACING = 0.25

_C_PLUS = SQRT_PI / 3.0 * 3.0 ** (-1.0 / 3.0)
_C_MINUS = SQRT_PI / 3.0 * 3.0 ** (1.0 / 3.0)
_G23 = math.gamma(2.0 / 3.0)
_G43 = math.gamma(4.0 / 3.0)
_G53 = math.gamma(5.0 / 3.0)


def _asymptotic_coefficients(n: int) -> tuple[list[float], list[float]]:
    u = [1.0]
    for k in range(1, n):
        u.append(
            u[-1] * (3 * k - 0.5) * (3 * k - 1.5) * (3 * k - 2.5) / (54.0 * k * (k - 0.5))
        )
    v = [1.0] + [-(6 * k + 1) / (6 * k - 1) * u[k] for k in range(1, n)]
    return u, v


_U, _V = _asymptotic_coefficients(40)


@dataclass(frozen=True)
class AiryBasisValue:
    """B_{1/3}, B_{-1/3} and their z-derivatives at one point.

    ``ai, aip, bi, bip`` hold Ai, Ai', Bi, Bi' behind the pair.  When
    ``log_scale`` is nonzero every field has been multiplied by
    ``exp(-log_scale)``.
    """

    b_plus: float
    b_minus: float
    db_plus: float
    db_minus: float
    log_scale: float = 0.0
    ai: float = math.nan
    aip: float = math.nan
    bi: float = math.nan
    bip: float = math.nan

    @property
    def scaled_wronskian(self) -> float:
        """b_plus db_minus - b_minus db_plus of the stored (scaled) fields.

        Evaluated through Ai and Bi when available, which avoids the
        cancellation on z > 0.
        """
        if math.isfinite(self.ai):
            return _H * _H * (2.0 / SQRT3) * (self.ai * self.bip - self.bi * self.aip)
        return self.b_plus * self.db_minus - self.b_minus * self.db_plus

    @property
    def wronskian(self) -> float:
        w = self.scaled_wronskian
        return w * math.exp(2.0 * self.log_scale) if self.log_scale else w


def _from_airy(ai, aip, bi, bip, log_scale=0.0) -> AiryBasisValue:
    return AiryBasisValue(
        _H * (ai - bi / SQRT3),
        _H * (ai + bi / SQRT3),
        _H * (aip - bip / SQRT3),
        _H * (aip + bip / SQRT3),
        log_scale,
        ai,
        aip,
        bi,
        bip,
    )


def _series(z: float) -> AiryBasisValue:
    w = z * z * z / 9.0
    # B_{-1/3}: sum_k w^k / (k! Gamma(k + 2/3))
    tm = 1.0 / _G23
    sm = tm
    # derivative sum: sum_{k>=1} w^{k-1} / ((k-1)! Gamma(k + 2/3))
    dm_t = 1.0 / _G53
    dm = dm_t
    # B_{1/3}: sum_k (1 + 3k) w^k / (k! Gamma(k + 4/3)) for the derivative
    tp = 1.0 / _G43
    sp = tp
    dp = tp
    for k in range(1, 200):
        tm *= w / (k * (k - 1.0 / 3.0))
        dm_t *= w / (k * (k + 2.0 / 3.0))
        tp *= w / (k * (k + 1.0 / 3.0))
        sm += tm
        dm += dm_t
        sp += tp
        dp += (1 + 3 * k) * tp
        big = max(abs(sm), abs(sp), abs(dm), abs(dp), 1.0)
        if max(abs(tm), abs(tp), abs(dm_t), (1 + 3 * k) * abs(tp)) < 1e-18 * big:
            break
    b_minus = _C_MINUS * sm
    db_minus = _C_MINUS * (z * z / 3.0) * dm
    b_plus = -_C_PLUS * z * sp
    db_plus = -_C_PLUS * dp
    ai = (b_plus + b_minus) / (2.0 * _H)
    aip = (db_plus + db_minus) / (2.0 * _H)
    bi = SQRT3 * (b_minus - b_plus) / (2.0 * _H)
    bip = SQRT3 * (db_minus - db_plus) / (2.0 * _H)
    return AiryBasisValue(b_plus, b_minus, db_plus, db_minus, 0.0, ai, aip, bi, bip)


def _taylor_step(z0: float, w: float, dw: float, t: float) -> tuple[float, float]:
    """Advance a solution of w'' = z w from z0 to z0 + t by its Taylor series.

    With b_n = a_n t^n the coefficients obey
    b_{n+2} = (z0 t^2 b_n + t^3 b_{n-1}) / ((n+1)(n+2)).
    """
    if t == 0.0:
        return w, dw
    t2, t3 = t * t, t * t * t
    b0, b1 = w, dw * t
    b2 = 0.5 * z0 * t2 * b0
    val = b0 + b1 + b2
    der = b1 + 2.0 * b2
    prev2, prev1, cur = b0, b1, b2  # b_{n-1}, b_n, b_{n+1} with n = 1
    n = 1
    while n < 200:
        nxt = (z0 * t2 * prev1 + t3 * prev2) / ((n + 1) * (n + 2))
        val += nxt
        der += (n + 2) * nxt
        size = abs(val) + abs(der)
        if abs(nxt) * (n + 2) <= 1e-18 * size and abs(cur) * (n + 1) <= 1e-17 * size:
            break
        prev2, prev1, cur = prev1, cur, nxt
        n += 1
    return val, der / t


def _anchor_tables():
    """Ai, Ai', Bi, Bi' on the anchor grid for SERIES_LIMIT <= |z| <= ASYMPTOTIC_LIMIT."""
    h = ANCHOR_SPACING
    k0 = int(round(SERIES_LIMIT / h))
    k1 = int(round(ASYMPTOTIC_LIMIT / h))
    neg, pos = {}, {}
    # oscillatory side: both solutions stepped outwards from the series
    v = _series(-k0 * h)
    state = [v.ai, v.aip, v.bi, v.bip]
    neg[k0] = tuple(state)
    for k in range(k0, k1):
        z = -k * h
        a, da = _taylor_step(z, state[0], state[1], -h)
        b, db = _taylor_step(z, state[2], state[3], -h)
        state = [a, da, b, db]
        neg[k + 1] = tuple(state)
    # growing side: Bi outwards from the series, Ai inwards from the asymptotics
    v = _series(k0 * h)
    b, db = v.bi, v.bip
    bis = {k0: (b, db)}
    for k in range(k0, k1):
        b, db = _taylor_step(k * h, b, db, h)
        bis[k + 1] = (b, db)
    va = _asymptotic_positive(k1 * h, math.inf)
    a, da = va.ai, va.aip
    ais = {k1: (a, da)}
    for k in range(k1, k0, -1):
        a, da = _taylor_step(k * h, a, da, -h)
        ais[k - 1] = (a, da)
    for k in range(k0, k1 + 1):
        pos[k] = ais[k] + bis[k]
    return neg, pos


def _anchored(z: float) -> AiryBasisValue:
    h = ANCHOR_SPACING
    k = int(round(abs(z) / h))
    table = _NEG if z < 0 else _POS
    k = min(max(k, min(table)), max(table))
    z0 = math.copysign(k * h, z)
    a0, da0, b0, db0 = table[k]
    a, da = _taylor_step(z0, a0, da0, z - z0)
    b, db = _taylor_step(z0, b0, db0, z - z0)
    return _from_airy(a, da, b, db)


def _alternating_pair(coef: list[float], inv: float) -> tuple[float, float]:
    """Even/odd alternating partial sums of sum_k coef_k inv^k, optimally truncated."""
    even = odd = 0.0
    p = 1.0
    last = math.inf
    for k, c in enumerate(coef):
        term = c * p
        if abs(term) > last:
            break
        last = abs(term)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            even += sign * term
        else:
            odd += sign * term
        if last < 1e-18:
            break
        p *= inv
    return even, odd


def _plain_sum(coef: list[float], inv: float, alternate: bool) -> float:
    s = 0.0
    p = 1.0
    last = math.inf
    for k, c in enumerate(coef):
        term = c * p * (-1.0 if alternate and k % 2 else 1.0)
        if abs(term) > last:
            break
        last = abs(term)
        s += term
        if last < 1e-18:
            break
        p *= inv
    return s


def _asymptotic_negative(z: float) -> AiryBasisValue:
    x = -z
    zeta = 2.0 / 3.0 * x**1.5
    theta = zeta + math.pi / 4.0
    s, c = math.sin(theta), math.cos(theta)
    ue, uo = _alternating_pair(_U, 1.0 / zeta)
    ve, vo = _alternating_pair(_V, 1.0 / zeta)
    amp = x**-0.25 / SQRT_PI
    damp = x**0.25 / SQRT_PI
    ai = amp * (s * ue - c * uo)
    bi = amp * (c * ue + s * uo)
    aip = -damp * (c * ve + s * vo)
    bip = damp * (s * ve - c * vo)
    return _from_airy(ai, aip, bi, bip)


def _asymptotic_positive(z: float, z_max: float) -> AiryBasisValue:
    zeta = 2.0 / 3.0 * z**1.5
    inv = 1.0 / zeta
    # everything below is scaled by exp(-zeta)
    recessive = math.exp(-2.0 * zeta)
    ai = recessive * _plain_sum(_U, inv, True) / (2.0 * SQRT_PI * z**0.25)
    aip = -recessive * z**0.25 * _plain_sum(_V, inv, True) / (2.0 * SQRT_PI)
    bi = _plain_sum(_U, inv, False) / (SQRT_PI * z**0.25)
    bip = z**0.25 * _plain_sum(_V, inv, False) / SQRT_PI
    if z > z_max:
        return _from_airy(ai, aip, bi, bip, zeta)
    e = math.exp(zeta)
    return _from_airy(ai * e, aip * e, bi * e, bip * e)


_NEG, _POS = _anchor_tables()


def airy_basis(z: float, z_max: float = Z_MAX) -> AiryBasisValue:
    """B_{+-1/3}(z) and derivatives for real z.

    Values for z < -z_max are still returned (the oscillatory expansion is
    well behaved there); for z > z_max the result carries ``log_scale``.
    """
    z = float(z)
    if not math.isfinite(z):
        raise ValueError(f"airy_basis needs a finite argument, got {z!r}")
    if abs(z) <= SERIES_LIMIT:
        return _series(z)
    if abs(z) < ASYMPTOTIC_LIMIT:
        return _anchored(z)
    if z < 0:
        return _asymptotic_negative(z)
    return _asymptotic_positive(z, z_max)


def stable_cosh_sinh(x: float) -> tuple[float, float, float]:
    """Return ``(c, s, e)`` with cosh x = c e^e and sinh x = s e^e, e = |x|."""
    e = abs(x)
    t = math.exp(-2.0 * e)
    c = 0.5 * (1.0 + t)
    s = math.copysign(0.5 * -math.expm1(-2.0 * e), x) if x != 0 else 0.0
    return c, s, e


def complex_sqrt_branch(z: complex, sheet: str = "first") -> complex:
    """Square root on the first (principal) or second (negated) sheet."""
    z = complex(z)
    if z == 0:
        raise ValueError("branch point z = 0 has no sheet assignment")
    root = cmath.sqrt(z)
    if sheet == "first":
        return root
    if sheet == "second":
        return -root
    raise ValueError(f"sheet must be 'first' or 'second', got {sheet!r}")
