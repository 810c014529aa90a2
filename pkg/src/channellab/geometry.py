"""Channel geometry: wall profiles, standing assumptions, and mapped grids.

A channel is the set f1(x1) < x2 < f2(x1).  Everything downstream (carrier,
solver, harness) consumes a :class:`ChannelProfile` through its closed-form
wall evaluators and their first two derivatives.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import AssumptionViolation, DegenerateGrid, OutOfRange, ParseError
from .expressions import parse_expression

__all__ = [
    "Family",
    "KRangeCase",
    "ChannelProfile",
    "ChannelMetrics",
    "Grid",
    "straight",
    "linear_widen",
    "power_law",
    "straight_outlet",
    "custom",
    "validate",
    "weight_integral",
    "h_parameterization",
    "inverse_k",
    "classify",
    "make_grid",
]


class Family(enum.Enum):
    STRAIGHT = "straight"
    LINEAR_WIDEN = "linear_widen"
    POWER_LAW = "power_law"
    STRAIGHT_OUTLET = "straight_outlet"
    CUSTOM = "custom"


class KRangeCase(enum.Enum):
    """Divergence pattern of the two tail integrals of f^(-5/3)."""

    BOTH_INFINITE = "both_infinite"
    BOTH_FINITE = "both_finite"
    FINITE_LEFT = "finite_left"
    FINITE_RIGHT = "finite_right"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ChannelProfile:
    """Analytic description of the two walls and their derivatives."""

    family: Family
    params: dict
    f1: Callable
    f2: Callable
    f1p: Callable
    f2p: Callable
    f1pp: Callable
    f2pp: Callable

    def width(self, x):
        return self.f2(x) - self.f1(x)

    def widthp(self, x):
        return self.f2p(x) - self.f1p(x)

    def widthpp(self, x):
        return self.f2pp(x) - self.f1pp(x)

    def center(self, x):
        return 0.5 * (self.f1(x) + self.f2(x))

    def centerp(self, x):
        return 0.5 * (self.f1p(x) + self.f2p(x))

    def centerpp(self, x):
        return 0.5 * (self.f1pp(x) + self.f2pp(x))

    def label(self):
        items = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family.value}({items})"


@dataclass(frozen=True)
class ChannelMetrics:
    """Sampled geometric constants of a profile on a window."""

    d_lower: float
    beta: float
    beta_star: float
    gamma: float
    window: tuple
    k_range_case: Optional[KRangeCase] = None
    t_star: Optional[float] = None
    t_hat: Optional[float] = None


# ---------------------------------------------------------------------------
# Profile families
# ---------------------------------------------------------------------------


def straight(d0=1.0, c1=None, c2=None):
    """Straight channel.  Either half-width d0 (walls at +-d0) or walls c1<c2."""
    if c1 is None and c2 is None:
        c1, c2 = -float(d0), float(d0)
    if not c2 > c1:
        raise AssumptionViolation(f"straight walls need c2 > c1, got ({c1}, {c2})")
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return ChannelProfile(
        Family.STRAIGHT,
        {"c1": c1, "c2": c2},
        f1=lambda x: np.full_like(np.asarray(x, dtype=float), c1),
        f2=lambda x: np.full_like(np.asarray(x, dtype=float), c2),
        f1p=zero,
        f2p=zero,
        f1pp=zero,
        f2pp=zero,
    )


def linear_widen(d0=1.0, slope=0.25):
    """Symmetric channel widening asymptotically linearly: f2 = d0 + s*sqrt(1+x^2)."""
    d0, s = float(d0), float(slope)
    if d0 <= 0 or s < 0:
        raise AssumptionViolation("linear_widen needs d0 > 0 and slope >= 0")

    def f2(x):
        x = np.asarray(x, dtype=float)
        return d0 + s * np.sqrt(1.0 + x * x)

    def f2p(x):
        x = np.asarray(x, dtype=float)
        return s * x / np.sqrt(1.0 + x * x)

    def f2pp(x):
        x = np.asarray(x, dtype=float)
        return s / (1.0 + x * x) ** 1.5

    return ChannelProfile(
        Family.LINEAR_WIDEN,
        {"d0": d0, "slope": s},
        f1=lambda x: -f2(x),
        f2=f2,
        f1p=lambda x: -f2p(x),
        f2p=f2p,
        f1pp=lambda x: -f2pp(x),
        f2pp=f2pp,
    )


def power_law(d0=1.0, alpha=0.5):
    """Symmetric power-law channel: f2 = -f1 = d0*(1+|x|)^alpha, alpha in [0,1)."""
    d0, a = float(d0), float(alpha)
    if d0 <= 0 or not (0.0 <= a < 1.0):
        raise AssumptionViolation("power_law needs d0 > 0 and alpha in [0,1)")

    def f2(x):
        x = np.asarray(x, dtype=float)
        return d0 * (1.0 + np.abs(x)) ** a

    def f2p(x):
        x = np.asarray(x, dtype=float)
        return d0 * a * np.sign(x) * (1.0 + np.abs(x)) ** (a - 1.0)

    def f2pp(x):
        x = np.asarray(x, dtype=float)
        return d0 * a * (a - 1.0) * (1.0 + np.abs(x)) ** (a - 2.0)

    return ChannelProfile(
        Family.POWER_LAW,
        {"d0": d0, "alpha": a},
        f1=lambda x: -f2(x),
        f2=f2,
        f1p=lambda x: -f2p(x),
        f2p=f2p,
        f1pp=lambda x: -f2pp(x),
        f2pp=f2pp,
    )


def _bump(x, half_len):
    """C^2 compactly supported bump (1-(x/k)^2)^3 on |x| < k, 0 outside."""
    x = np.asarray(x, dtype=float)
    s = x / half_len
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    q = 1.0 - s[inside] ** 2
    out[inside] = q**3
    return out


def _bump_p(x, half_len):
    x = np.asarray(x, dtype=float)
    s = x / half_len
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = -6.0 * si * (1.0 - si**2) ** 2 / half_len
    return out


def _bump_pp(x, half_len):
    x = np.asarray(x, dtype=float)
    s = x / half_len
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    si = s[inside]
    q = 1.0 - si**2
    out[inside] = (-6.0 * q**2 + 24.0 * si**2 * q) / half_len**2
    return out


def straight_outlet(c1=-1.0, c2=1.0, amp=0.5, k=4.0):
    """Straight outlets beyond |x| >= k, symmetric C^2 bump widening inside."""
    c1, c2, amp, k = float(c1), float(c2), float(amp), float(k)
    if not c2 > c1 or k <= 0:
        raise AssumptionViolation("straight_outlet needs c2 > c1 and k > 0")
    if amp <= 0.5 * (c1 - c2):
        raise AssumptionViolation("bump amplitude closes the channel")
    return ChannelProfile(
        Family.STRAIGHT_OUTLET,
        {"c1": c1, "c2": c2, "amp": amp, "k": k},
        f1=lambda x: c1 - amp * _bump(x, k),
        f2=lambda x: c2 + amp * _bump(x, k),
        f1p=lambda x: -amp * _bump_p(x, k),
        f2p=lambda x: amp * _bump_p(x, k),
        f1pp=lambda x: -amp * _bump_pp(x, k),
        f2pp=lambda x: amp * _bump_pp(x, k),
    )


def custom(f1, f2):
    """Profile from two wall expressions in x (see :mod:`.expressions`)."""
    f1_expr, f2_expr = f1, f2
    try:
        e1 = parse_expression(f1_expr)
        e2 = parse_expression(f2_expr)
    except ParseError:
        raise
    e1p, e2p = e1.diff().simplified(), e2.diff().simplified()
    e1pp, e2pp = e1p.diff().simplified(), e2p.diff().simplified()
    return ChannelProfile(
        Family.CUSTOM,
        {"f1": f1_expr, "f2": f2_expr},
        f1=e1,
        f2=e2,
        f1p=e1p,
        f2p=e2p,
        f1pp=e1pp,
        f2pp=e2pp,
    )


_FACTORIES = {
    Family.STRAIGHT: straight,
    Family.LINEAR_WIDEN: linear_widen,
    Family.POWER_LAW: power_law,
    Family.STRAIGHT_OUTLET: straight_outlet,
    Family.CUSTOM: custom,
}


def make_profile(family, **params):
    """Construct a profile by family name (string or :class:`Family`)."""
    fam = Family(family) if not isinstance(family, Family) else family
    return _FACTORIES[fam](**params)


# ---------------------------------------------------------------------------
# Assumption checking
# ---------------------------------------------------------------------------

_BETA_FLOOR = 0.25  # keeps beta* = 1/(4*beta_eff) <= 1 for flat walls
_SAMPLES = 4096


def _refined_extremum(fn, xs, vals, mode):
    """Refine the sampled extremum of fn with a bounded scalar search."""
    idx = int(np.argmin(vals) if mode == "min" else np.argmax(vals))
    lo = xs[max(idx - 1, 0)]
    hi = xs[min(idx + 1, len(xs) - 1)]
    if hi <= lo:
        return float(vals[idx])
    sign = 1.0 if mode == "min" else -1.0
    res = optimize.minimize_scalar(
        lambda x: sign * float(fn(x)), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12 * max(1.0, abs(hi - lo))},
    )
    best = sign * res.fun
    return float(min(best, vals[idx]) if mode == "min" else max(best, vals[idx]))


def validate(profile, window, classify_case=False):
    """Check the standing assumptions on a window and return the metrics.

    Sampling is dense (4096 points) with a local golden-section style
    refinement around the worst sample of each quantity.  Raises
    :class:`AssumptionViolation` if the width degenerates or a derivative
    bound blows up on the window.
    """
    a, b = float(window[0]), float(window[1])
    if not (math.isfinite(a) and math.isfinite(b) and b > a):
        raise OutOfRange(f"window must be finite with b > a, got ({a}, {b})")
    xs = np.linspace(a, b, _SAMPLES)

    width = profile.width(xs)
    if not np.all(np.isfinite(width)):
        raise AssumptionViolation("width is not finite on the window")
    d_lower = _refined_extremum(profile.width, xs, width, "min")
    if d_lower <= 0.0:
        raise AssumptionViolation(
            f"width must stay positive: inf f = {d_lower:.3e} on [{a}, {b}]"
        )

    slopes = np.maximum(np.abs(profile.f1p(xs)), np.abs(profile.f2p(xs)))
    if not np.all(np.isfinite(slopes)):
        raise AssumptionViolation("wall slope is unbounded on the window")
    beta = _refined_extremum(
        lambda x: max(abs(float(profile.f1p(x))), abs(float(profile.f2p(x)))),
        xs,
        slopes,
        "max",
    )
    if beta > 1e6:
        raise AssumptionViolation(f"wall slope bound beta = {beta:.3e} is unbounded")

    curv = np.maximum(
        np.abs(profile.f1pp(xs) * width), np.abs(profile.f2pp(xs) * width)
    )
    if not np.all(np.isfinite(curv)):
        raise AssumptionViolation("f''*f is unbounded on the window")
    gamma = _refined_extremum(
        lambda x: max(
            abs(float(profile.f1pp(x) * profile.width(x))),
            abs(float(profile.f2pp(x) * profile.width(x))),
        ),
        xs,
        curv,
        "max",
    )
    if gamma > 1e6:
        raise AssumptionViolation(f"curvature bound gamma = {gamma:.3e} is unbounded")

    beta_star = 1.0 / (4.0 * max(beta, _BETA_FLOOR))

    case = None
    t_star = None
    t_hat = None
    if classify_case:
        case = classify(profile).case
        t_star = _try_t_star(profile, beta_star)
        t_hat = _try_t_hat(profile, beta_star)

    return ChannelMetrics(
        d_lower=d_lower,
        beta=beta,
        beta_star=beta_star,
        gamma=gamma,
        window=(a, b),
        k_range_case=case,
        t_star=t_star,
        t_hat=t_hat,
    )


# ---------------------------------------------------------------------------
# Weight integrals and the k/h parameterization
# ---------------------------------------------------------------------------


def weight_integral(profile, a, b, p):
    """Adaptive quadrature of integral_a^b f(x)^p dx (relative 1e-10)."""
    a, b = float(a), float(b)
    if a > b:
        raise OutOfRange(f"need a <= b, got ({a}, {b})")
    if a == b:
        return 0.0

    def integrand(x):
        return profile.width(x) ** p

    # split at 0 (families built from |x| have a slope kink there) and into
    # dyadic blocks far out so quad never sees a wildly scaled interval
    cuts = [a, b]
    if a < 0.0 < b:
        cuts.insert(1, 0.0)
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        pieces.extend(_dyadic_blocks(lo, hi))
    total = 0.0
    for lo, hi in pieces:
        val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12,
                                limit=200)
        total += val
    return total


def _dyadic_blocks(lo, hi, start=64.0):
    """Split [lo, hi] into blocks that grow geometrically away from 0."""
    if hi <= lo:
        return []
    if lo >= 0.0:
        blocks = []
        edge = lo
        step = start
        while edge + step < hi and edge < 1e300:
            nxt = max(edge + step, step)
            if nxt >= hi:
                break
            blocks.append((edge, nxt))
            edge = nxt
            step = 2.0 * nxt
        blocks.append((edge, hi))
        return blocks
    if hi <= 0.0:
        return [(-b, -a) for a, b in reversed(_dyadic_blocks(-hi, -lo, start))]
    return _dyadic_blocks(lo, 0.0, start) + _dyadic_blocks(0.0, hi, start)


def k_of(profile, t):
    """k(t) = integral_0^t f^(-5/3)."""
    t = float(t)
    if t >= 0.0:
        return weight_integral(profile, 0.0, t, -5.0 / 3.0)
    return -weight_integral(profile, t, 0.0, -5.0 / 3.0)


def inverse_k(profile, t, bracket_start=1.0):
    """Solve k(h) = t for h by bracketed root-finding on the monotone k."""
    t = float(t)
    if t == 0.0:
        return 0.0
    sign = 1.0 if t > 0.0 else -1.0
    hi = bracket_start
    val = k_of(profile, sign * hi)
    guard = 0
    while abs(val) < abs(t):
        hi *= 4.0
        guard += 1
        if guard > 120 or hi > 1e280:
            raise OutOfRange(
                f"t={t:.6g} lies outside the range of k for this profile"
            )
        val = k_of(profile, sign * hi)
    lo = 0.0
    res = optimize.brentq(
        lambda h: k_of(profile, sign * h) - t,
        lo,
        hi,
        xtol=1e-300,
        rtol=1e-14,
        maxiter=200,
    )
    return sign * res


def h_parameterization(profile, t, beta_star=None):
    """Return (h(t), h_L(t), h_R(t)) for the reparameterized windows.

    h inverts k; h_L(t) = h(-t) + beta* f(h(-t)) and
    h_R(t) = h(t) - beta* f(h(t)).
    """
    if beta_star is None:
        beta_star = default_beta_star(profile)
    hp = inverse_k(profile, t)
    hm = inverse_k(profile, -t)
    h_L = hm + beta_star * float(profile.width(hm))
    h_R = hp - beta_star * float(profile.width(hp))
    return hp, h_L, h_R


def default_beta_star(profile, window=(-64.0, 64.0)):
    xs = np.linspace(window[0], window[1], _SAMPLES)
    slopes = np.maximum(np.abs(profile.f1p(xs)), np.abs(profile.f2p(xs)))
    beta = float(np.max(slopes))
    return 1.0 / (4.0 * max(beta, _BETA_FLOOR))


def _try_t_star(profile, beta_star):
    """sup{t>0 : h_L(t) >= h_R(t)} by bracketed root-finding, None if out of range."""

    def gap(t):
        _, hl, hr = h_parameterization(profile, t, beta_star)
        return hl - hr

    try:
        t_hi = 1.0
        for _ in range(60):
            if gap(t_hi) < 0.0:
                break
            t_hi *= 2.0
        else:
            return None
        return float(optimize.brentq(gap, 1e-12, t_hi, rtol=1e-12))
    except (OutOfRange, ValueError):
        return None


def _try_t_hat(profile, beta_star):
    """sup{t>0 : h_R(t) <= 0}: solve X = beta* f(X) for X, then t = k(X)."""

    def g(x):
        return x - beta_star * float(profile.width(x))

    try:
        hi = 1.0
        for _ in range(200):
            if g(hi) > 0.0:
                break
            hi *= 2.0
        else:
            return None
        x_root = optimize.brentq(g, 0.0, hi, rtol=1e-13)
        return k_of(profile, x_root)
    except (OutOfRange, ValueError):
        return None


# ---------------------------------------------------------------------------
# Divergence classification of the tail integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassificationReport:
    case: KRangeCase
    right_diverges: Optional[bool]
    left_diverges: Optional[bool]
    condition_16: bool
    condition_17: bool
    details: dict = field(default_factory=dict)


def _tail_increments(profile, p, side, t0=64.0, n_windows=36):
    """Partial-integral increments of f^p over dyadic windows on one side."""
    edges = t0 * 2.0 ** np.arange(n_windows + 1)
    incs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if side < 0:
            lo, hi = -hi, -lo
        val, _ = integrate.quad(
            lambda x: profile.width(x) ** p, lo, hi, epsabs=0.0, epsrel=1e-10,
            limit=200,
        )
        incs.append(val)
    return edges, np.asarray(incs)


def _diverges(incs, margin=0.02):
    """True/False/None for divergence from the dyadic increment ratios.

    On [T, 2T] an integrand ~ x^-q contributes ~ T^(1-q); the increment
    ratio tends to 2^(1-q), so ratio > 1 <=> q < 1 <=> divergence.
    """
    incs = np.asarray(incs)
    if np.all(incs == 0.0):
        return False
    tail = incs[-6:]
    if np.any(tail <= 0.0):
        return None
    ratios = tail[1:] / tail[:-1]
    r = float(np.median(ratios))
    if r >= 1.0 + margin:
        return True
    if r <= 1.0 - margin:
        return False
    return None


def _slope_limit_zero(edges, sups):
    """Does sup|f'| over dyadic windows tend to 0?  Trend-based surrogate."""
    sups = np.asarray(sups)
    if np.all(sups <= 1e-12):
        return True
    tail = sups[-6:]
    if np.any(tail <= 0.0):
        return bool(tail[-1] <= 1e-9)
    mids = np.sqrt(edges[-7:-1] * edges[-6:])
    slope = np.polyfit(np.log(mids), np.log(tail), 1)[0]
    return bool(slope < -0.02 or tail[-1] < 1e-9)


def classify(profile, t0=64.0, n_windows=36):
    """Classify the k-range case and evaluate the uniqueness hypotheses.

    The divergence of integral f^(-5/3) on each side fixes the case; the
    uniqueness conditions compare sup f' against the tail of integral f^(-3).
    Results are finite-window surrogates of asymptotic statements.
    """
    edges_r, inc53_r = _tail_increments(profile, -5.0 / 3.0, +1, t0, n_windows)
    edges_l, inc53_l = _tail_increments(profile, -5.0 / 3.0, -1, t0, n_windows)
    right = _diverges(inc53_r)
    left = _diverges(inc53_l)

    if right is None or left is None:
        case = KRangeCase.INCONCLUSIVE
    elif right and left:
        case = KRangeCase.BOTH_INFINITE
    elif not right and not left:
        case = KRangeCase.BOTH_FINITE
    elif right and not left:
        case = KRangeCase.FINITE_LEFT
    else:
        case = KRangeCase.FINITE_RIGHT

    _, inc3_r = _tail_increments(profile, -3.0, +1, t0, n_windows)
    _, inc3_l = _tail_increments(profile, -3.0, -1, t0, n_windows)
    div3_r = _diverges(inc3_r)
    div3_l = _diverges(inc3_l)

    sup_slope = []
    for lo, hi in zip(edges_r[:-1], edges_r[1:]):
        xs = np.linspace(lo, hi, 257)
        sup_slope.append(
            float(np.max(np.maximum(np.abs(profile.f1p(xs)), np.abs(profile.f2p(xs)))))
        )
    sup_slope = np.asarray(sup_slope)
    # symmetric-profile shortcut is not assumed: sample the left too
    sup_slope_l = []
    for lo, hi in zip(edges_l[:-1], edges_l[1:]):
        xs = np.linspace(-hi, -lo, 257)
        sup_slope_l.append(
            float(np.max(np.maximum(np.abs(profile.f1p(xs)), np.abs(profile.f2p(xs)))))
        )
    sup_slope_l = np.asarray(sup_slope_l)

    cond16 = bool(
        div3_r is True
        and div3_l is True
        and _slope_limit_zero(edges_r, sup_slope)
        and _slope_limit_zero(edges_l, sup_slope_l)
    )

    cond17 = False
    if div3_r is False and div3_l is False:
        cond17 = _ratio_limit_zero(inc3_r, sup_slope, edges_r) and _ratio_limit_zero(
            inc3_l, sup_slope_l, edges_l
        )

    return ClassificationReport(
        case=case,
        right_diverges=right,
        left_diverges=left,
        condition_16=cond16,
        condition_17=cond17,
        details={
            "f3_right_diverges": div3_r,
            "f3_left_diverges": div3_l,
            "sup_slope_last": float(sup_slope[-1]),
        },
    )


def _ratio_limit_zero(inc3, sup_slope, edges):
    """sup_{tau>=t} f' / sqrt(tail integral f^-3) -> 0, trend surrogate."""
    inc3 = np.asarray(inc3)
    # running sup of the slope from each window outward
    run_sup = np.maximum.accumulate(sup_slope[::-1])[::-1]
    # geometric extrapolation of the remainder beyond the last window
    tail_ratio = inc3[-1] / inc3[-2] if inc3[-2] > 0 else 0.0
    remainder = inc3[-1] * tail_ratio / (1.0 - tail_ratio) if tail_ratio < 1.0 else 0.0
    tails = np.cumsum(inc3[::-1])[::-1] + remainder
    mask = tails > 0
    if np.count_nonzero(mask[-8:]) < 4:
        return False
    ratios = run_sup[mask] / np.sqrt(tails[mask])
    if np.all(ratios[-4:] < 1e-9):
        return True
    mids = np.sqrt(edges[:-1] * edges[1:])[mask]
    good = ratios > 0
    if np.count_nonzero(good) < 4:
        return bool(np.all(ratios[-4:] < 1e-6))
    slope = np.polyfit(np.log(mids[good][-8:]), np.log(ratios[good][-8:]), 1)[0]
    return bool(slope < -0.02)


# ---------------------------------------------------------------------------
# Mapped grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform grid in mapped coordinates (xi, eta) over Omega_{a,b}.

    xi = x1 in [a, b]; eta = (x2 - f1(xi)) / f(xi) in [0, 1].  Arrays are
    indexed [i, j] = [xi, eta].  Metric terms are the analytic chain-rule
    factors at the nodes; column masses integrate f exactly per xi-cell so
    quadrature of a constant reproduces the area.
    """

    a: float
    b: float
    nx: int
    ny: int
    xi: np.ndarray          # (nx,)
    eta: np.ndarray         # (ny,)
    x2: np.ndarray          # (nx, ny) physical x2
    f: np.ndarray           # (nx,) width at xi
    fp: np.ndarray          # (nx,)
    fbar_p: np.ndarray      # (nx,) center-line slope
    f1p: np.ndarray         # (nx,)
    j1: np.ndarray          # (nx, ny) d(eta)/d(x1)
    lap_s: np.ndarray       # (nx, ny) first-order eta coefficient of Delta
    col_mass: np.ndarray    # (nx,) exact integral of f over the xi-cell
    wq: np.ndarray          # (nx, ny) nodal quadrature weights (dx measure)

    @property
    def hx(self):
        return (self.b - self.a) / (self.nx - 1)

    @property
    def hy(self):
        return 1.0 / (self.ny - 1)


_GL8_NODES, _GL8_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _cell_mass(profile, lo, hi):
    """integral of f over [lo, hi] by 8-point Gauss-Legendre (exact to rounding)."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    xs = mid + half * _GL8_NODES
    return half * float(np.dot(_GL8_WEIGHTS, profile.width(xs)))


def make_grid(profile, a, b, nx, ny):
    """Build the mapped grid; raises :class:`DegenerateGrid` below 8x8."""
    a, b = float(a), float(b)
    if not b > a:
        raise OutOfRange(f"need b > a, got ({a}, {b})")
    if nx < 8 or ny < 8:
        raise DegenerateGrid(f"need nx, ny >= 8, got ({nx}, {ny})")

    xi = np.linspace(a, b, nx)
    eta = np.linspace(0.0, 1.0, ny)
    f = np.asarray(profile.width(xi), dtype=float)
    if np.any(f <= 0.0):
        raise AssumptionViolation("width vanishes inside the grid window")
    f1 = np.asarray(profile.f1(xi), dtype=float)
    f1p = np.asarray(profile.f1p(xi), dtype=float)
    f2p = np.asarray(profile.f2p(xi), dtype=float)
    f1pp = np.asarray(profile.f1pp(xi), dtype=float)
    f2pp = np.asarray(profile.f2pp(xi), dtype=float)
    fp = f2p - f1p
    fpp = f2pp - f1pp

    x2 = f1[:, None] + eta[None, :] * f[:, None]
    j1 = -(f1p[:, None] + eta[None, :] * fp[:, None]) / f[:, None]
    lap_s = (
        -(f1pp[:, None] + eta[None, :] * fpp[:, None]) / f[:, None]
        + 2.0
        * (f1p[:, None] + eta[None, :] * fp[:, None])
        * fp[:, None]
        / f[:, None] ** 2
    )

    hx = (b - a) / (nx - 1)
    col_mass = np.empty(nx)
    for i in range(nx):
        lo = max(a, xi[i] - 0.5 * hx)
        hi = min(b, xi[i] + 0.5 * hx)
        col_mass[i] = _cell_mass(profile, lo, hi)

    wy = np.full(ny, 1.0 / (ny - 1))
    wy[0] *= 0.5
    wy[-1] *= 0.5
    wq = col_mass[:, None] * wy[None, :]

    return Grid(
        a=a,
        b=b,
        nx=nx,
        ny=ny,
        xi=xi,
        eta=eta,
        x2=x2,
        f=f,
        fp=fp,
        fbar_p=0.5 * (f1p + f2p),
        f1p=f1p,
        j1=j1,
        lap_s=lap_s,
        col_mass=col_mass,
        wq=wq,
    )
