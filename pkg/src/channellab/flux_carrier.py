"""Divergence-free flux carrier built from a streamfunction plateau.

The carrier g = (d2 G, -d1 G) pushes the prescribed flux through a band in
the upper half of the channel while vanishing near both walls, with
G = phi * mu(1 + eps*ln((f2-x2)/(x2-fbar))) above the center line and 0
below.  All derivatives are closed-form; the finite-difference oracle in the
tests guards the hand-derived gradient.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import BoundViolation, OutOfRange

__all__ = [
    "CutoffKind",
    "Cutoff",
    "CarrierParams",
    "default_epsilon",
    "stream_G",
    "velocity_g",
    "grad_g",
    "carrier_vorticity",
    "slice_flux",
    "slice_carrier_density",
    "carrier_volume_integral",
    "support_and_bounds_report",
    "weighted_inequality_constant",
]


class CutoffKind(enum.Enum):
    QUINTIC = "quintic"
    EXP_BUMP = "exp_bump"


@dataclass(frozen=True)
class Cutoff:
    """Smooth transition: mu = 1 for t <= 0, mu = 0 for t >= 1, monotone."""

    kind: CutoffKind = CutoffKind.QUINTIC

    def mu(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind is CutoffKind.QUINTIC:
            tc = np.clip(t, 0.0, 1.0)
            s = tc * tc * tc * (10.0 + tc * (-15.0 + 6.0 * tc))
            return 1.0 - s
        return _expbump_mu(t)

    def mup(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind is CutoffKind.QUINTIC:
            inside = (t > 0.0) & (t < 1.0)
            out = np.zeros_like(t)
            ti = t[inside]
            out[inside] = -30.0 * ti * ti * (1.0 - ti) ** 2
            return out
        return _expbump_mup(t)

    def mupp(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind is CutoffKind.QUINTIC:
            inside = (t > 0.0) & (t < 1.0)
            out = np.zeros_like(t)
            ti = t[inside]
            out[inside] = -60.0 * ti * (1.0 - ti) * (1.0 - 2.0 * ti)
            return out
        return _expbump_mupp(t)


def _expbump_q(t):
    # logistic exponent 1/(1-t) - 1/t, +-inf outside (0,1)
    q = np.empty_like(t)
    inside = (t > 0.0) & (t < 1.0)
    q[~inside] = np.where(t[~inside] <= 0.0, -np.inf, np.inf)
    ti = t[inside]
    q[inside] = 1.0 / (1.0 - ti) - 1.0 / ti
    return q, inside


def _expbump_mu(t):
    q, _ = _expbump_q(t)
    out = np.empty_like(t)
    neg = q <= 0
    out[neg] = 1.0 / (1.0 + np.exp(q[neg]))
    eq = np.exp(-q[~neg])
    out[~neg] = eq / (1.0 + eq)
    return out


def _expbump_mup(t):
    # mu(1-mu) decays like exp(-1/t) at the edges: cut before 1/t^2 overflows
    inside = (t > 1e-6) & (t < 1.0 - 1e-6)
    out = np.zeros_like(t)
    ti = t[inside]
    mu = _expbump_mu(np.asarray(ti))
    qp = 1.0 / (1.0 - ti) ** 2 + 1.0 / ti**2
    out[inside] = -mu * (1.0 - mu) * qp
    return out


def _expbump_mupp(t):
    inside = (t > 1e-6) & (t < 1.0 - 1e-6)
    out = np.zeros_like(t)
    ti = t[inside]
    mu = _expbump_mu(np.asarray(ti))
    mup = _expbump_mup(np.asarray(ti))
    qp = 1.0 / (1.0 - ti) ** 2 + 1.0 / ti**2
    qpp = 2.0 / (1.0 - ti) ** 3 - 2.0 / ti**3
    out[inside] = -mup * (1.0 - 2.0 * mu) * qp - mu * (1.0 - mu) * qpp
    return out


def default_epsilon(phi):
    """Regularization default: small enough for the advective smallness,
    large enough that the carrier band stays resolvable on desk grids."""
    return min(0.5, 1.0 / max(float(phi), 1.0))


@dataclass(frozen=True)
class CarrierParams:
    phi: float
    epsilon: float = None
    cutoff: Cutoff = field(default_factory=Cutoff)

    def __post_init__(self):
        if self.phi < 0.0:
            raise OutOfRange(f"flux must be nonnegative, got {self.phi}")
        eps = self.epsilon
        if eps is None:
            eps = default_epsilon(self.phi)
            object.__setattr__(self, "epsilon", eps)
        if not (0.0 < eps < 1.0):
            raise OutOfRange(f"epsilon must lie in (0,1), got {eps}")


def _split_point(x):
    x1 = np.asarray(x[0], dtype=float)
    x2 = np.asarray(x[1], dtype=float)
    return np.broadcast_arrays(x1, x2)


def _band_quantities(x1, x2, profile):
    """A = f2-x2, B = x2-fbar on the upper half; mask of x2 > fbar."""
    f2 = np.asarray(profile.f2(x1), dtype=float)
    fbar = np.asarray(profile.center(x1), dtype=float)
    A = f2 - x2
    B = x2 - fbar
    upper = B > 0.0
    return A, B, upper, f2, fbar


def stream_G(x, params, profile):
    """Carrier streamfunction G at points x = (x1, x2)."""
    x1, x2 = _split_point(x)
    A, B, upper, _, _ = _band_quantities(x1, x2, profile)
    out = np.zeros_like(A)
    if np.any(upper):
        Au = A[upper]
        Bu = B[upper]
        s = np.empty_like(Au)
        pos = Au > 0.0
        s[pos] = 1.0 + params.epsilon * (np.log(Au[pos]) - np.log(Bu[pos]))
        s[~pos] = -np.inf  # at/above the top wall the cutoff saturates at 1
        out[upper] = params.phi * params.cutoff.mu(s)
    return out if out.ndim else float(out)


def _s_and_derivs(x1, x2, params, profile):
    """Cutoff argument s and the pieces shared by g and grad g."""
    eps = params.epsilon
    A, B, upper, _, _ = _band_quantities(x1, x2, profile)
    inside = upper & (A > 0.0)
    s = np.full_like(A, np.inf)
    s[upper & ~(A > 0.0)] = -np.inf
    s[inside] = 1.0 + eps * (np.log(A[inside]) - np.log(B[inside]))
    return A, B, inside, s


def velocity_g(x, params, profile):
    """Carrier velocity (g1, g2) from the closed-form derivatives of G."""
    x1, x2 = _split_point(x)
    eps, phi = params.epsilon, params.phi
    A, B, inside, s = _s_and_derivs(x1, x2, params, profile)
    g1 = np.zeros_like(A)
    g2 = np.zeros_like(A)
    if np.any(inside):
        mup = params.cutoff.mup(s[inside])
        f2p = np.asarray(profile.f2p(x1), dtype=float)
        fbp = np.asarray(profile.centerp(x1), dtype=float)
        f2p = np.broadcast_to(f2p, A.shape)[inside]
        fbp = np.broadcast_to(fbp, A.shape)[inside]
        Ai, Bi = A[inside], B[inside]
        g1[inside] = eps * phi * mup * (-1.0 / Ai - 1.0 / Bi)
        g2[inside] = -eps * phi * mup * (f2p / Ai + fbp / Bi)
    if g1.ndim:
        return np.stack([g1, g2], axis=-1)
    return np.array([float(g1), float(g2)])


def grad_g(x, params, profile):
    """Jacobian of g: entry [i, j] = d g_i / d x_j (hand-derived chain rule)."""
    x1, x2 = _split_point(x)
    eps, phi = params.epsilon, params.phi
    A, B, inside, s = _s_and_derivs(x1, x2, params, profile)
    out = np.zeros(A.shape + (2, 2))
    if np.any(inside):
        Ai, Bi = A[inside], B[inside]
        si = s[inside]
        mup = params.cutoff.mup(si)
        mupp = params.cutoff.mupp(si)
        f2p = np.broadcast_to(np.asarray(profile.f2p(x1), dtype=float), A.shape)[inside]
        fbp = np.broadcast_to(np.asarray(profile.centerp(x1), dtype=float), A.shape)[inside]
        f2pp = np.broadcast_to(np.asarray(profile.f2pp(x1), dtype=float), A.shape)[inside]
        fbpp = np.broadcast_to(np.asarray(profile.centerpp(x1), dtype=float), A.shape)[inside]

        s1 = eps * (f2p / Ai + fbp / Bi)              # d s / d x1
        s2 = eps * (-1.0 / Ai - 1.0 / Bi)             # d s / d x2
        s12 = eps * (f2p / Ai**2 - fbp / Bi**2)       # d2 s / dx1 dx2
        s22 = eps * (-1.0 / Ai**2 + 1.0 / Bi**2)      # d2 s / dx2^2
        s11 = eps * (
            f2pp / Ai - f2p**2 / Ai**2 + fbpp / Bi + fbp**2 / Bi**2
        )

        # g1 = phi * mu'(s) * s2 ; g2 = -phi * mu'(s) * s1
        d1g1 = phi * (mupp * s1 * s2 + mup * s12)
        d2g1 = phi * (mupp * s2 * s2 + mup * s22)
        d1g2 = -phi * (mupp * s1 * s1 + mup * s11)
        d2g2 = -phi * (mupp * s2 * s1 + mup * s12)

        out[inside, 0, 0] = d1g1
        out[inside, 0, 1] = d2g1
        out[inside, 1, 0] = d1g2
        out[inside, 1, 1] = d2g2
    return out if A.ndim else out.reshape(2, 2)


def carrier_vorticity(x, params, profile):
    """curl g = d1 g2 - d2 g1 (= -Laplacian G)."""
    J = grad_g(x, params, profile)
    return J[..., 1, 0] - J[..., 0, 1]


# ---------------------------------------------------------------------------
# Quadratures that resolve the near-wall band exactly
# ---------------------------------------------------------------------------


def _band_gauss_nodes(params, profile, x1, n_panels=32, n_gauss=8):
    """Gauss nodes in tau = -ln((f2-x2)/(f2-fbar)) covering the carrier band.

    The substitution x2 = f2 - (f/2) e^(-tau) makes the integrand smooth and
    O(1) however thin the band is; d x2 = A d tau.  Panels are aligned with
    the exact band edges (cutoff argument 1 and 0) where the quintic cutoff
    is only C^1, so composite Gauss converges at full order.
    """
    eps = params.epsilon
    f2 = float(profile.f2(x1))
    half = 0.5 * float(profile.width(x1))
    tau_lo = math.log(2.0)                       # cutoff argument = 1
    tau_hi = 1.0 / eps + math.log1p(math.exp(-1.0 / eps))  # argument = 0
    edges = np.linspace(tau_lo, tau_hi, n_panels + 1)
    nodes, weights = np.polynomial.legendre.leggauss(n_gauss)
    taus = []
    ws = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
        taus.append(mid + rad * nodes)
        ws.append(rad * weights)
    tau = np.concatenate(taus)
    w = np.concatenate(ws)
    x2 = f2 - half * np.exp(-tau)
    jac = half * np.exp(-tau)  # = A = f2 - x2
    return x2, w * jac


def slice_flux(params, profile, x1, n_panels=32, n_gauss=8):
    """Gauss quadrature of integral g1 dx2 over the cross-section at x1."""
    x2, w = _band_gauss_nodes(params, profile, x1, n_panels, n_gauss)
    g = velocity_g((np.full_like(x2, float(x1)), x2), params, profile)
    return float(np.dot(w, g[:, 0]))


def slice_carrier_density(params, profile, x1, n_panels=32, n_gauss=8):
    """integral (|grad g|^2 + |g|^4) dx2 over the cross-section at x1."""
    x2, w = _band_gauss_nodes(params, profile, x1, n_panels, n_gauss)
    pts = (np.full_like(x2, float(x1)), x2)
    g = velocity_g(pts, params, profile)
    J = grad_g(pts, params, profile)
    dens = (J**2).sum(axis=(-2, -1)) + (g**2).sum(axis=-1) ** 2
    return float(np.dot(w, dens))


def carrier_volume_integral(params, profile, a, b, n_x=256):
    """integral over Omega_{a,b} of |grad g|^2 + |g|^4 (composite Gauss in x1)."""
    nodes, weights = np.polynomial.legendre.leggauss(8)
    n_panels = max(8, int(n_x // 8))
    edges = np.linspace(a, b, n_panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
        for xn, wn in zip(mid + rad * nodes, rad * weights):
            total += wn * slice_carrier_density(params, profile, xn)
    return total


# ---------------------------------------------------------------------------
# Support and size report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CarrierReport:
    n_support_points: int
    violations: int
    sup_f_g: float
    sup_f2_grad_g: float
    volume_integral: float
    weight_integral_f3: float
    volume_ratio: float
    flux_error: float


def support_and_bounds_report(
    params, profile, window, n_x=64, n_y=256, rng=None, raise_on_violation=True
):
    """Check the support/ratio bounds on a dense sample and report sizes.

    The inequalities are theorem-backed, so any violation signals an
    implementation bug (:class:`BoundViolation`).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    a, b = float(window[0]), float(window[1])
    eps, phi = params.epsilon, params.phi

    x1s = np.linspace(a, b, n_x)
    violations = 0
    checked = 0
    sup_fg = 0.0
    sup_f2dg = 0.0
    exp_inv = math.exp(1.0 / eps)
    exp_minv = math.exp(-1.0 / eps)

    for x1 in x1s:
        x2, _ = _band_gauss_nodes(params, profile, x1, n_panels=max(8, n_y // 8))
        jitter = rng.uniform(-0.2, 0.2, size=x2.shape) * np.gradient(x2)
        x2 = np.clip(x2 + jitter, profile.center(x1) + 1e-14, profile.f2(x1) - 1e-300)
        pts = (np.full_like(x2, x1), x2)
        g = velocity_g(pts, params, profile)
        J = grad_g(pts, params, profile)
        gn = np.hypot(g[:, 0], g[:, 1])
        on_supp = gn > 0.0
        checked += int(np.count_nonzero(on_supp))
        if np.any(on_supp):
            A = float(profile.f2(x1)) - x2[on_supp]
            B = x2[on_supp] - float(profile.center(x1))
            f = float(profile.width(x1))
            tol = 1e-12 * f
            ok = (
                (A <= B + tol)
                & (B <= exp_inv * A + tol)
                & (B >= f / 4.0 - tol)
                & (B <= f / 2.0 + tol)
                & (A >= exp_minv * f / 4.0 - tol)
            )
            violations += int(np.count_nonzero(~ok))
            sup_fg = max(sup_fg, f * float(gn[on_supp].max()))
            dg = np.sqrt((J[on_supp] ** 2).sum(axis=(-2, -1)))
            sup_f2dg = max(sup_f2dg, f * f * float(dg.max()))

    if violations and raise_on_violation:
        raise BoundViolation(
            f"{violations} sampled points violate the carrier support bounds"
        )

    vol = carrier_volume_integral(params, profile, a, b, n_x=max(64, n_x))
    from .geometry import weight_integral

    wint = weight_integral(profile, a, b, -3.0)
    flux_err = 0.0
    for x1 in np.linspace(a, b, 9):
        flux_err = max(flux_err, abs(slice_flux(params, profile, x1) - phi))

    return CarrierReport(
        n_support_points=checked,
        violations=violations,
        sup_f_g=sup_fg,
        sup_f2_grad_g=sup_f2dg,
        volume_integral=vol,
        weight_integral_f3=wint,
        volume_ratio=vol / wint if wint > 0 else math.inf,
        flux_error=flux_err,
    )


# ---------------------------------------------------------------------------
# Weighted (Hardy-type) inequality constant
# ---------------------------------------------------------------------------


def weighted_inequality_constant(params, profile, x1, n_coarse=200, n_band=2400):
    """Best constant of integral |g|^2 w^2 <= c * phi^2 * integral |d2 w|^2.

    Slicewise 1D generalized eigenproblem over w vanishing at both walls.
    The carrier concentrates exponentially at the upper wall, so the
    admissible functions are written as w = phi*v with the ground-state
    factor phi = sqrt(max(A, f/4)/(f/2)), A = f2 - x2, and the band is
    discretized in the log coordinate tau = -ln(2A/f).  In these variables
    every matrix entry is O(1) regardless of epsilon; a direct physical
    discretization loses the eigenvalue to conditioning once the band gets
    thin.  Solved by power iteration on the tridiagonal pencil.
    """
    if params.phi <= 0.0:
        return 0.0
    eps = params.epsilon
    f1 = float(profile.f1(x1))
    f2 = float(profile.f2(x1))
    f = f2 - f1
    half = 0.5 * f

    # nodes: physical below the band edge x2 = fbar + f/4, tau inside
    x_low = np.linspace(f1, f2 - half / 2.0, n_coarse + 1)  # A from f down to f/4
    tau_end = 1.0 / eps + 8.0
    tau = np.linspace(math.log(2.0), tau_end, n_band + 1)  # A from f/4 downward

    n_low = x_low.size  # nodes 0 .. n_low-1, node n_low-1 is the interface
    n_tot = n_low + n_band  # band appends n_band new nodes
    diag_K = np.zeros(n_tot)
    off_K = np.zeros(n_tot - 1)
    diag_M = np.zeros(n_tot)
    off_M = np.zeros(n_tot - 1)

    # below the band: w = sqrt(1/2) v, carrier vanishes, pure stiffness
    h_low = np.diff(x_low)
    diag_K[: n_low - 1] += 0.5 / h_low
    diag_K[1:n_low] += 0.5 / h_low
    off_K[: n_low - 1] -= 0.5 / h_low

    # inside the band (element integrals of (2/f)(v_tau - v/2)^2 exactly,
    # carrier weight by 2-pt Gauss); s, A/B formed from tau with no huge
    # intermediates
    h_b = np.diff(tau)
    tl, tr = tau[:-1], tau[1:]
    # exact element integrals for linear v:
    # int v_tau^2 = (vr-vl)^2/h ; int v v_tau = (vr^2-vl^2)/2 ;
    # int v^2/4 = h (vl^2 + vl vr + vr^2)/12
    d_ll = 1.0 / h_b + 0.5 + h_b / 12.0
    d_rr = 1.0 / h_b - 0.5 + h_b / 12.0
    d_lr = -1.0 / h_b + h_b / 24.0
    scale = 2.0 / f
    i0 = n_low - 1
    diag_K[i0 : i0 + n_band] += scale * d_ll
    diag_K[i0 + 1 : i0 + n_band + 1] += scale * d_rr
    off_K[i0 : i0 + n_band] += scale * d_lr

    gauss_x = np.array([-1.0, 1.0]) / math.sqrt(3.0)
    co = Cutoff(params.cutoff.kind)
    for gx in gauss_x:
        tq = 0.5 * (tl + tr) + 0.5 * h_b * gx
        ratio = np.exp(-tq) / (1.0 - np.exp(-tq))  # A/B
        s = 1.0 + eps * np.log(ratio)
        mup = co.mup(s)
        dens = (eps**2) * mup**2 * (1.0 + ratio) ** 2 / half  # A*q*phi^2/phi_flux^2
        wq = 0.5 * h_b
        phi_l = 0.5 * (1.0 - gx)
        phi_r = 0.5 * (1.0 + gx)
        diag_M[i0 : i0 + n_band] += wq * dens * phi_l * phi_l
        diag_M[i0 + 1 : i0 + n_band + 1] += wq * dens * phi_r * phi_r
        off_M[i0 : i0 + n_band] += wq * dens * phi_l * phi_r

    # Dirichlet at both ends
    dK = diag_K[1:-1]
    oK = off_K[1:-1]
    dM = diag_M[1:-1]
    oM = off_M[1:-1]
    m = dK.size
    ab = np.zeros((3, m))
    ab[0, 1:] = oK
    ab[1, :] = dK
    ab[2, :-1] = oK

    def tri_apply(d, o, v):
        out = d * v
        out[:-1] += o * v[1:]
        out[1:] += o * v[:-1]
        return out

    rng = np.random.default_rng(1234)
    v = rng.standard_normal(m)
    lam = 0.0
    for _ in range(400):
        v_new = solve_banded((1, 1), ab, tri_apply(dM, oM, v))
        nrm = math.sqrt(abs(float(v_new @ tri_apply(dM, oM, v_new))))
        if nrm == 0.0:
            return 0.0
        v_new /= nrm
        lam_new = float(v_new @ tri_apply(dM, oM, v_new)) / float(
            v_new @ tri_apply(dK, oK, v_new)
        )
        done = abs(lam_new - lam) <= 1e-13 * max(abs(lam_new), 1e-300)
        lam, v = lam_new, v_new
        if done:
            break
    return lam
