"""Differential-inequality comparison toolkit.

The growth estimates all reduce to one pattern: a nondecreasing energy
z(t) satisfying z <= Psi(t, z') + (1 - delta1)*phi(t) stays below any
majorant phi with phi >= Psi(t, phi')/delta1 and z(T) <= phi(T).  This
module checks those hypotheses on sampled data, builds saturating
majorants by integrating phi' = Psi^(-1)(delta1*phi), and classifies
blow-up rates for the pure inequality z <= Psi(z').
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from .errors import (
    InsufficientTail,
    LemmaViolation,
    NonMonotoneSamples,
    OutOfRange,
    RootBracketFailure,
)

__all__ = [
    "PsiSpec",
    "separable_psi",
    "ComparisonProblem",
    "HypothesisReport",
    "Verdict",
    "check_hypotheses",
    "comparison_conclude",
    "solve_majorant",
    "blowup_rate",
]


@dataclass(frozen=True)
class PsiSpec:
    """Monotone-in-s comparison function Psi(t, s) with Psi(t, 0) = 0.

    The separable form carries closed-form coefficients; a time-dependent
    one wraps a callable.  The inverse in s is analytic where possible and
    a bracketed root otherwise.
    """

    c1: float = 0.0
    c2: float = 0.0
    exponent: float = 1.5
    fn: Optional[Callable] = None  # fn(t, s), overrides the separable form

    def __post_init__(self):
        if self.fn is None:
            if self.c1 < 0 or self.c2 < 0 or (self.c2 > 0 and self.exponent <= 1):
                raise OutOfRange(
                    "separable Psi needs c1, c2 >= 0 and exponent > 1"
                )
            if self.c1 == 0 and self.c2 == 0:
                raise OutOfRange("Psi must be nontrivial")

    def __call__(self, t, s):
        if self.fn is not None:
            return self.fn(t, s)
        s = np.asarray(s, dtype=float)
        return self.c1 * s + self.c2 * s**self.exponent

    def inverse(self, t, y):
        """Solve Psi(t, s) = y for s >= 0."""
        y = float(y)
        if y < 0:
            raise OutOfRange("Psi inverse needs y >= 0")
        if y == 0.0:
            return 0.0
        if self.fn is None:
            if self.c2 == 0.0:
                return y / self.c1
            if self.c1 == 0.0:
                return (y / self.c2) ** (1.0 / self.exponent)
        hi = 1.0
        for _ in range(400):
            if self(t, hi) >= y:
                break
            hi *= 2.0
        else:
            raise RootBracketFailure(f"could not bracket Psi(t,s)={y}")
        root = optimize.brentq(
            lambda s: self(t, s) - y,
            0.0,
            hi,
            xtol=1e-300,
            rtol=4 * np.finfo(float).eps,
            maxiter=300,
        )
        if self.fn is None and root > 0.0:
            # one Newton polish against the closed form
            for _ in range(2):
                deriv = self.c1 + self.c2 * self.exponent * root ** (
                    self.exponent - 1.0
                )
                if deriv > 0:
                    root -= (float(self(t, root)) - y) / deriv
        return root


def separable_psi(c1=0.0, c2=0.0, exponent=1.5):
    return PsiSpec(c1=c1, c2=c2, exponent=exponent)


FunctionLike = Union[Callable, np.ndarray]


@dataclass
class ComparisonProblem:
    psi: PsiSpec
    delta1: float
    t: np.ndarray
    z: np.ndarray
    phi: FunctionLike  # callable phi(t) or samples on the same grid
    monotone_tol: float = 1e-9

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if not (0.0 < self.delta1 < 1.0):
            raise OutOfRange("delta1 must lie in (0,1)")
        if self.t.ndim != 1 or self.t.size < 4:
            raise OutOfRange("need at least 4 samples")
        if np.any(np.diff(self.t) <= 0):
            raise NonMonotoneSamples("sample grid must be strictly increasing")
        if np.any(self.z < -self.monotone_tol * max(1.0, np.abs(self.z).max())):
            raise NonMonotoneSamples("z must be nonnegative")
        scale = max(1.0, float(np.abs(self.z).max()))
        if np.any(np.diff(self.z) < -self.monotone_tol * scale):
            raise NonMonotoneSamples("z samples must be nondecreasing")

    def z_interp(self):
        # clip tiny decreasing jitter so the shape-preserving interpolant
        # cannot manufacture negative slopes
        z = np.maximum.accumulate(self.z)
        return PchipInterpolator(self.t, z)

    def phi_values(self, ts):
        if callable(self.phi):
            return np.asarray(self.phi(ts), dtype=float)
        return PchipInterpolator(self.t, np.asarray(self.phi, dtype=float))(ts)

    def phi_derivative(self, ts):
        if callable(self.phi):
            h = 1e-6 * max(1.0, float(self.t[-1] - self.t[0]))
            return (self.phi_values(ts + h) - self.phi_values(ts - h)) / (2 * h)
        return PchipInterpolator(
            self.t, np.asarray(self.phi, dtype=float)
        ).derivative()(ts)

    def phi_derivative_band(self, ts):
        """Derivative reconstruction ambiguity of sampled phi.

        Two independent estimators (shape-preserving interpolant vs plain
        centered differences) disagree by the sampling error; hypothesis
        margins give saturated inequalities the benefit of that band.
        """
        if callable(self.phi):
            return np.zeros_like(np.asarray(ts, dtype=float))
        samples = np.asarray(self.phi, dtype=float)
        alt = np.gradient(samples, self.t)
        main = PchipInterpolator(self.t, samples).derivative()(self.t)
        band = np.abs(alt - main)
        return np.interp(ts, self.t, band)


# relative slack for hypothesis margins: saturating majorants sit at exact
# equality and the interpolated derivative of sampled data wobbles O(h^2)
MARGIN_TOL = 1e-6


@dataclass(frozen=True)
class HypothesisReport:
    growth_margin: float       # min over grid of Psi(t,z') + (1-d1)phi - z
    majorant_margin: float     # min over grid of phi - Psi(t,phi')/d1
    endpoint_ok: bool
    endpoint_gap: float        # phi(T) - z(T)
    margin_tol: float = MARGIN_TOL
    all_hold: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "all_hold",
            bool(
                self.growth_margin >= -self.margin_tol
                and self.majorant_margin >= -self.margin_tol
                and self.endpoint_ok
            ),
        )


class Verdict(enum.Enum):
    DOMINATED = "dominated"
    HYPOTHESIS_FAILED_GROWTH = "hypothesis_failed_growth"
    HYPOTHESIS_FAILED_MAJORANT = "hypothesis_failed_majorant"
    HYPOTHESIS_FAILED_ENDPOINT = "hypothesis_failed_endpoint"


def check_hypotheses(problem, n_fine=512, margin_tol=MARGIN_TOL):
    """Evaluate both differential inequalities on a fine grid.

    Margins are normalized by the local scale so they compare across
    problems; small negative margins within margin_tol on an exactly
    saturated majorant count as holding.
    """
    ts = np.linspace(problem.t[0], problem.t[-1], n_fine)
    zi = problem.z_interp()
    z = zi(ts)
    zp = np.maximum(zi.derivative()(ts), 0.0)
    phi = problem.phi_values(ts)
    phip = problem.phi_derivative(ts)
    band = problem.phi_derivative_band(ts)

    # z' carries the same sampled-derivative ambiguity as phi'
    z_samples = np.maximum.accumulate(problem.z)
    z_band = np.interp(
        ts, problem.t,
        np.abs(np.gradient(z_samples, problem.t) - zi.derivative()(problem.t)),
    )

    psi_z = problem.psi(ts, zp + z_band)
    lhs_scale = np.maximum(1.0, np.abs(z).max())
    growth_margin = float(
        np.min(psi_z + (1.0 - problem.delta1) * phi - z) / lhs_scale
    )

    psi_phi = problem.psi(ts, np.maximum(phip - band, 0.0))
    maj_scale = np.maximum(1.0, np.abs(phi).max())
    majorant_margin = float(np.min(phi - psi_phi / problem.delta1) / maj_scale)

    gap = float(problem.phi_values(problem.t[-1]) - zi(problem.t[-1]))
    endpoint_ok = bool(gap >= -margin_tol * maj_scale)
    return HypothesisReport(
        growth_margin=growth_margin,
        majorant_margin=majorant_margin,
        endpoint_ok=endpoint_ok,
        endpoint_gap=gap,
        margin_tol=margin_tol,
    )


def comparison_conclude(problem, report=None, n_fine=512):
    """Conclude z <= phi on the interval when the hypotheses hold.

    The conclusion is a theorem: if the hypotheses pass but z exceeds phi
    anywhere, that is an implementation bug and LemmaViolation is raised.
    """
    if report is None:
        report = check_hypotheses(problem, n_fine)
    if report.growth_margin < -report.margin_tol:
        return Verdict.HYPOTHESIS_FAILED_GROWTH
    if report.majorant_margin < -report.margin_tol:
        return Verdict.HYPOTHESIS_FAILED_MAJORANT
    if not report.endpoint_ok:
        return Verdict.HYPOTHESIS_FAILED_ENDPOINT

    ts = np.linspace(problem.t[0], problem.t[-1], n_fine)
    z = problem.z_interp()(ts)
    phi = problem.phi_values(ts)
    scale = max(1.0, float(np.abs(phi).max()))
    worst = float(np.min(phi - z))
    if worst < -1e-8 * scale:
        raise LemmaViolation(
            f"hypotheses hold but z exceeds phi by {-worst:.3e}"
        )
    return Verdict.DOMINATED


def solve_majorant(psi, delta1, phi0, t0, t1, step=1e-3):
    """Integrate the saturating majorant phi' = Psi^(-1)(delta1 * phi).

    Classic fourth-order Runge-Kutta with the monotone inverse at each
    stage; returns (t, phi) samples including both endpoints.
    """
    if phi0 <= 0:
        raise OutOfRange("phi0 must be positive")
    if not (0.0 < delta1 < 1.0):
        raise OutOfRange("delta1 must lie in (0,1)")
    n = max(2, int(math.ceil((t1 - t0) / step)) + 1)
    ts = np.linspace(t0, t1, n)
    h = ts[1] - ts[0]
    phi = np.empty(n)
    phi[0] = phi0

    def rate(t, y):
        return psi.inverse(t, delta1 * max(y, 0.0))

    for k in range(n - 1):
        t, y = ts[k], phi[k]
        k1 = rate(t, y)
        k2 = rate(t + h / 2, y + h * k1 / 2)
        k3 = rate(t + h / 2, y + h * k2 / 2)
        k4 = rate(t + h, y + h * k3)
        phi[k + 1] = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return ts, phi


@dataclass(frozen=True)
class BlowupReport:
    exponent: float
    critical_exponent: float
    hypothesis_holds: bool
    worst_hypothesis_margin: float
    passes: bool


def blowup_rate(t, z, psi, c0=None, m=None, tail_fraction=0.1, tol=0.05,
                hyp_tol=0.02):
    """Fit the tail growth exponent of z and compare with m/(m-1).

    The hypothesis z <= Psi(z') is evaluated on the tail; when it holds,
    the comparison lemma forces liminf t^(-m/(m-1)) z > 0, so the fitted
    log-log slope must reach m/(m-1) - tol.  Needs at least 10 samples in
    the final decade of t.  hyp_tol is the relative slack for the
    hypothesis margin: exact saturators sit at equality and interpolation
    of the sampled derivative wobbles around it.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    if m is None:
        m = psi.exponent
    if m <= 1:
        raise OutOfRange("need m > 1")
    tail = t >= t[-1] * tail_fraction
    if np.count_nonzero(tail) < 10:
        raise InsufficientTail(
            f"only {np.count_nonzero(tail)} samples in the final decade"
        )
    tt, zz = t[tail], z[tail]
    if np.any(zz <= 0):
        raise OutOfRange("tail samples must be positive for a log-log fit")
    interp = PchipInterpolator(tt, zz)
    zp = np.maximum(interp.derivative()(tt), 0.0)
    margin = float(np.min((psi(tt, zp) - zz) / np.maximum(zz, 1e-300)))
    holds = margin >= -hyp_tol

    slope = float(np.polyfit(np.log(tt), np.log(zz), 1)[0])
    critical = m / (m - 1.0)
    return BlowupReport(
        exponent=slope,
        critical_exponent=critical,
        hypothesis_holds=holds,
        worst_hypothesis_margin=margin,
        passes=bool((not holds) or slope >= critical - tol),
    )
