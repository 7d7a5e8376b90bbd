"""Closed-form limits of random radio networks: radii, degree and diameter
bounds, success probabilities, and the real branches of the Lambert W function.

Everything here is a pure function of its arguments; simulation modules use
these as analytic oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

__all__ = [
    "RangeParams",
    "DegreeBounds",
    "SfrSchedule",
    "UpperBounds",
    "lambert_w",
    "r_connectivity",
    "r_superconnectivity",
    "degree_bounds",
    "diameter_bound",
    "DIAMETER_ELL_THRESHOLD",
    "lens_area",
    "send_success_probability",
    "mellin_constant",
    "sfr_schedule",
    "upper_bounds_from_p0",
    "broadcast_time",
]

_INV_E = math.exp(-1.0)

# ell threshold separating the 3-hop-per-cell regime from the 5-hop one:
# (4 - pi) / (pi - 2)
DIAMETER_ELL_THRESHOLD = (4.0 - math.pi) / (math.pi - 2.0)


@dataclass(frozen=True)
class RangeParams:
    """Parameters of a deployment: node count, square surface, and the
    superconnectivity margin / slack used by the radius formulas."""

    n: int
    area: float
    ell: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.area <= 0:
            raise ValueError(f"area must be > 0, got {self.area}")


@dataclass(frozen=True)
class DegreeBounds:
    """Multipliers of ln(n) bounding every node degree in the
    superconnectivity regime."""

    low_coeff: float
    high_coeff: float

    def __post_init__(self):
        if not (0.0 < self.low_coeff <= self.high_coeff):
            raise ValueError(
                f"need 0 < low_coeff <= high_coeff, got {self.low_coeff}, {self.high_coeff}"
            )


@dataclass(frozen=True)
class SfrSchedule:
    """Schedule functions of the search-for-range protocol.

    ``R_of_p`` maps the range exponent p to a radius (meters), ``B_of_p`` to
    a broadcast-time budget (slots), ``t_of_p`` to the inner-loop length, and
    ``C1`` is the repetition count for deconnexion broadcasts.
    """

    R_of_p: Callable[[float], float]
    B_of_p: Callable[[float], int]
    t_of_p: Callable[[float, float], int]
    C1: int
    p_init: int


@dataclass(frozen=True)
class UpperBounds:
    """Integer upper bounds on node count, max degree, and hop diameter, as
    derived from a range exponent estimate."""

    n_max: int
    delta_max: int
    diam_max: int

    def __post_init__(self):
        if self.n_max <= 0 or self.delta_max <= 0 or self.diam_max <= 0:
            raise ValueError("all bounds must be positive")
        if self.n_max & (self.n_max - 1):
            raise ValueError(f"n_max must be a power of two, got {self.n_max}")


def _halley(x: float, w: float) -> float:
    """Halley iteration for w*e^w = x from initial guess w."""
    tol = 1e-12 * max(1.0, abs(x))
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol:
            return w
        wp1 = w + 1.0
        if wp1 == 0.0:
            w += 1e-12
            continue
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        w -= f / denom
    raise ArithmeticError(f"Lambert W iteration did not converge for x={x!r}")


def lambert_w(branch: str, x: float) -> float:
    """Real Lambert W: the solution w of w*e^w = x on the requested branch.

    ``branch`` is ``"principal"`` (W0, w >= -1, defined for x >= -1/e) or
    ``"minus-one"`` (W-1, w <= -1, defined for -1/e <= x < 0).  The result
    satisfies |w*e^w - x| <= 1e-12 * max(1, |x|).
    """
    if branch not in ("principal", "minus-one"):
        raise ValueError(f"unknown branch {branch!r}")
    # 1/e is not exactly representable; allow x to sit a hair below -1/e.
    if x < -_INV_E:
        if x > -_INV_E - 1e-15:
            x = -_INV_E
        else:
            raise ValueError(f"x={x!r} is below -1/e, outside the real domain")

    # Series about the branch point M = (-1/e, -1): w = -1 + p - p^2/3 + ...
    # with p = +/- sqrt(2(e*x + 1)).  Sign picks the branch.
    arg = 2.0 * (math.e * x + 1.0)
    if arg <= 0.0:
        return -1.0

    if branch == "principal":
        if abs(x) < 1e-290:
            return x  # w ~ x - x^2 near 0; exact-to-double for tiny x
        if x < -_INV_E + 0.05:
            p = math.sqrt(arg)
            w0 = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
        elif abs(x) < _INV_E:
            w0 = x
        elif x <= math.e:
            w0 = 0.5
        else:
            lg = math.log(x)
            w0 = lg - math.log(lg)
        return _halley(x, w0)

    # minus-one branch
    if x >= 0.0:
        raise ValueError(f"minus-one branch needs -1/e <= x < 0, got x={x!r}")
    if x < -_INV_E + 0.05:
        p = -math.sqrt(arg)
        w0 = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
    else:
        lg = math.log(-x)
        w0 = lg - math.log(-lg)
    return _halley(x, w0)


def r_connectivity(params: RangeParams) -> float:
    """Transmission radius at the connectivity threshold with slack omega:
    r = sqrt((ln n + omega) * area / (pi * n))."""
    if params.n < 2:
        raise ValueError("need n >= 2")
    num = math.log(params.n) + params.omega
    if num <= 0:
        raise ValueError(f"ln(n) + omega must be positive, got {num}")
    return math.sqrt(num * params.area / (math.pi * params.n))


def r_superconnectivity(params: RangeParams) -> float:
    """Radius in the superconnectivity regime:
    r = sqrt((1 + ell) * ln(n) * area / (pi * n))."""
    if params.n < 2:
        raise ValueError("need n >= 2")
    if params.ell <= 0:
        raise ValueError(f"ell must be > 0, got {params.ell}")
    return math.sqrt((1.0 + params.ell) * math.log(params.n) * params.area / (math.pi * params.n))


def degree_bounds(ell: float) -> DegreeBounds:
    """Degree bounds (as multipliers of ln n) in the superconnectivity
    regime: -ell / W_{-1}(-ell/(e(1+ell))) below, -ell / W_0(...) above."""
    if ell <= 0:
        raise ValueError(f"ell must be > 0, got {ell}")
    arg = -ell / (math.e * (1.0 + ell))
    if not (-_INV_E <= arg < 0.0):
        raise ValueError(f"Lambert argument {arg} outside [-1/e, 0)")
    low = -ell / lambert_w("minus-one", arg)
    high = -ell / lambert_w("principal", arg)
    return DegreeBounds(low_coeff=low, high_coeff=high)


def diameter_bound(n: int, ell: float) -> float:
    """Leading-term hop-diameter bound c * sqrt(pi*n / ((1+ell) ln n)),
    with c = 3 above the lens threshold ell = (4-pi)/(pi-2) and c = 5 at or
    below it.  The additive O(1) term is not represented."""
    if n < 2:
        raise ValueError("need n >= 2")
    if ell <= 0:
        raise ValueError(f"ell must be > 0, got {ell}")
    c = 3.0 if ell > DIAMETER_ELL_THRESHOLD else 5.0
    return c * math.sqrt(math.pi * n / ((1.0 + ell) * math.log(n)))


def lens_area(kind: str, r: float) -> float:
    """Area of the lens between two radius-r disks: kind "L1" has centers at
    distance r, kind "L2" at distance sqrt(2)*r."""
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    if kind == "L1":
        return (4.0 * math.pi - 3.0 * math.sqrt(3.0)) * r * r / 6.0
    if kind == "L2":
        return (math.pi - 2.0) * r * r / 2.0
    raise ValueError(f"unknown lens kind {kind!r}")


def send_success_probability(T: int, d: int, base: float = 2.0) -> float:
    """Probability that a node with d neighbors, all running the
    transmit-with-probability-base^-i game for slots i = 0..T, hears at
    least one clean message.

    Evaluates 1 - prod_i (1 - d*base^-i * (1 - base^-i)^(d-1)) in slot
    order, with the 0^0 = 1 convention so d = 1 succeeds at i = 0.
    """
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if base <= 1.0:
        raise ValueError(f"base must be > 1, got {base}")
    prod = 1.0
    for i in range(T + 1):
        q = base ** (-i)
        prod *= 1.0 - d * q * (1.0 - q) ** (d - 1)
    return 1.0 - prod


def mellin_constant() -> float:
    """Limit constant exp(-sum_{m>=1} m!/(m^(m+2) ln 2)) ~ 0.188209 of the
    residual failure probability of the transmission game."""
    total = 0.0
    m = 1
    term = 1.0
    while term >= 1e-15:
        term = math.factorial(m) / (m ** (m + 2) * math.log(2.0))
        total += term
        m += 1
    return math.exp(-total)


def sfr_schedule(area: float, epsilon: float, r_max: float) -> SfrSchedule:
    """Build the radius / broadcast-budget / inner-loop schedule used by the
    search-for-range protocol.

    R(p) = sqrt((ln(2^p) + 2 ln 2) * area / (pi 2^p)),
    B(p) = 24 * ceil(ln(p) * (sqrt(2^p / p) + p - log2(epsilon))),
    t(p, eps) = max(4 * ceil(log2 p), ceil(ln(2/eps) / ln 5)),
    C1 = ceil(ln(epsilon/2) / ln(2 epsilon)), initial p = ceil(log2 r_max).
    """
    if area <= 0:
        raise ValueError(f"area must be > 0, got {area}")
    if r_max <= 0:
        raise ValueError(f"r_max must be > 0, got {r_max}")
    if not (0.0 < epsilon < 0.5):
        raise ValueError(f"epsilon must be in (0, 1/2), got {epsilon}")

    def R_of_p(p: float) -> float:
        two_p = 2.0**p
        return math.sqrt((math.log(two_p) + 2.0 * math.log(2.0)) * area / (math.pi * two_p))

    def B_of_p(p: float) -> int:
        if p < 1:
            raise ValueError(f"B(p) needs p >= 1, got {p}")
        return 24 * math.ceil(math.log(p) * (math.sqrt(2.0**p / p) + p - math.log2(epsilon)))

    def t_of_p(p: float, eps: float) -> int:
        if p < 2:
            raise ValueError(f"t(p) needs p >= 2, got {p}")
        return max(4 * math.ceil(math.log2(p)), math.ceil(math.log(2.0 / eps) / math.log(5.0)))

    c1 = math.ceil(math.log(epsilon / 2.0) / math.log(2.0 * epsilon))
    p_init = math.ceil(math.log2(r_max))
    return SfrSchedule(R_of_p=R_of_p, B_of_p=B_of_p, t_of_p=t_of_p, C1=c1, p_init=p_init)


def upper_bounds_from_p0(p0: int) -> UpperBounds:
    """Integer network bounds advertised once the range exponent p0 is known:
    n <= 2^(p0+1), max degree < 3*p0, hop diameter < 12*ceil(sqrt(2^p0/p0))."""
    if p0 < 2:
        raise ValueError(f"p0 must be >= 2, got {p0}")
    return UpperBounds(
        n_max=2 ** (p0 + 1),
        delta_max=3 * p0,
        diam_max=12 * math.ceil(math.sqrt(2.0**p0 / p0)),
    )


def broadcast_time(D: int, N: int, delta: int, epsilon: float) -> int:
    """Termination bound (slots) of the relay broadcast: with
    T = 2D + 5 max(sqrt D, sqrt(log2(N/eps))) sqrt(log2(N/eps)), all nodes
    are done by 2*ceil(log2 delta) * (T + ceil(log2(N/eps)))."""
    if D < 1 or N < 2 or delta < 2:
        raise ValueError("need D >= 1, N >= 2, delta >= 2")
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    tau2 = math.log2(N / epsilon)
    T = 2.0 * D + 5.0 * max(math.sqrt(D), math.sqrt(tau2)) * math.sqrt(tau2)
    return math.ceil(2 * math.ceil(math.log2(delta)) * (T + math.ceil(tau2)))
