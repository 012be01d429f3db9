"""Constructive witnesses for non-compactness and strong irreducibility of
the closed group generated by the random transfer matrices, plus the dimer
conjugation normal form and the finite dimer critical set.

Everything here is a direct, checkable construction: products of at most
four transfer matrices whose trace exceeds 2, explicit triples of distinct
projective images, and a greedy norm-growth iteration for the elliptic
dimer case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ualyap.core import (
    DisorderParam,
    ProjPoint,
    act,
    angles_close,
    proj_distance,
    transfer_matrix,
    wrap_angle,
)

DISTINCT_TOL = 1e-8


# --------------------------------------------------------------------------
# non-compactness witness (independent-phase model)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupWitness:
    """Group elements certifying non-compactness for a support pair.

    D, E are single-step quotients of transfer matrices, L = DE, J = ED,
    and K = J^{-1} L is self-adjoint positive definite with det 1; its
    trace exceeding 2 forces an eigenvalue > 1, hence unbounded powers.
    """

    D: np.ndarray
    E: np.ndarray
    L: np.ndarray
    J: np.ndarray
    K: np.ndarray
    trace_K: float
    noncompact: bool


def build_witness(theta: float, eta: float, d: DisorderParam) -> GroupWitness:
    """Witness matrices for the pair of shifted phases (theta, eta).

    trace K obeys the closed form 2 + (r^2/t^4) |x conj(z) - 1|^4 with
    x = e^{-i theta}, z = e^{-i eta}; theta = eta is degenerate (K = I).
    """
    r, t = d.r, d.t
    x = np.exp(-1j * theta)
    z = np.exp(-1j * eta)
    xzb = x * np.conj(z)
    D = np.array([[xzb, 0.0], [(r / t) * (xzb - 1.0), 1.0]])
    E = np.array([[1.0, (r / t) * (1.0 - np.conj(xzb))], [0.0, np.conj(xzb)]])
    L = D @ E
    J = E @ D
    K = np.linalg.solve(J, L)
    trace_K = float(np.trace(K).real)
    degenerate = angles_close(theta, eta, 1e-10)
    return GroupWitness(
        D=D,
        E=E,
        L=L,
        J=J,
        K=K,
        trace_K=trace_K,
        noncompact=(not degenerate) and trace_K > 2.0 + 1e-10,
    )


def trace_K_closed_form(theta: float, eta: float, d: DisorderParam) -> float:
    x = np.exp(-1j * theta)
    z = np.exp(-1j * eta)
    return float(2.0 + (d.r**2 / d.t**4) * abs(x * np.conj(z) - 1.0) ** 4)


# --------------------------------------------------------------------------
# strong irreducibility witnesses
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PiIrreducibilityResult:
    v_plus: ProjPoint
    v_minus: ProjPoint
    distinct_images: bool
    min_distance: float
    degenerate: bool


def pi_case_irreducibility(
    lam: float, a: float, d: DisorderParam
) -> PiIrreducibilityResult:
    """Three-image witness for the diametrically-opposed support off its
    two critical quasi-energies.

    The hyperbolic product element has eigendirections (1, (r+-1)/t); for
    each, the images under T(theta,theta), T(theta,eta), T(eta,theta) with
    theta = a + lam, eta = a + pi + lam must be pairwise distinct.  At
    lam in {-a, -a-pi} the construction degenerates; this is reported,
    not raised.
    """
    r, t = d.r, d.t
    theta = a + lam
    eta = a + np.pi + lam
    degenerate = angles_close(lam, -a, 1e-10) or angles_close(lam, -a - np.pi, 1e-10)
    mats = [
        transfer_matrix(theta, theta, d),
        transfer_matrix(theta, eta, d),
        transfer_matrix(eta, theta, d),
    ]
    v_plus = ProjPoint([1.0, (r + 1.0) / t])
    v_minus = ProjPoint([1.0, (r - 1.0) / t])
    min_dist = np.inf
    for v in (v_plus, v_minus):
        images = [act(m, v) for m in mats]
        for i in range(3):
            for j in range(i + 1, 3):
                min_dist = min(min_dist, proj_distance(images[i], images[j]))
    return PiIrreducibilityResult(
        v_plus=v_plus,
        v_minus=v_minus,
        distinct_images=(not degenerate) and min_dist > DISTINCT_TOL,
        min_distance=float(min_dist),
        degenerate=degenerate,
    )


def general_irreducibility_witness(
    lam: float,
    theta0: float,
    eta0: float,
    d: DisorderParam,
    vbar: ProjPoint,
) -> list[ProjPoint]:
    """Three pairwise-distinct images of vbar under explicit group elements,
    valid whenever the two shifted support phases are neither equal nor
    opposite (x conj(z) not in {-1, 1}).

    Recipe: the E-orbit {v, Ev, E^2 v} works for v = (0, 1) and for
    v = (1, r/t); for the remaining directions (1, alpha), alpha != r/t,
    the D-orbit works, r/t being the unique fixed point of the induced
    Moebius map.  Raises when the phase hypothesis fails.
    """
    theta = theta0 + lam
    eta = eta0 + lam
    xzb = np.exp(-1j * (theta - eta))
    if min(abs(xzb - 1.0), abs(xzb + 1.0)) <= 1e-10:
        raise ValueError(
            "witness construction needs shifted phases neither equal nor opposite"
        )
    w = build_witness(theta, eta, d)
    v = vbar.v
    r_over_t = d.r / d.t
    use_E = abs(v[0]) <= 1e-12 or (
        abs(v[0]) > 1e-12 and abs(v[1] / v[0] - r_over_t) <= 1e-12
    )
    g = w.E if use_E else w.D
    images = [vbar, act(g, vbar), act(g @ g, vbar)]
    for i in range(3):
        for j in range(i + 1, 3):
            if proj_distance(images[i], images[j]) <= DISTINCT_TOL:
                raise ValueError("witness images degenerate unexpectedly")
    return images


# --------------------------------------------------------------------------
# dimer conjugation and critical set
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DimerConjugation:
    """Normal form of the dimer pair (T(theta,theta), T(eta,eta)).

    regime follows the trace of T(theta,theta): elliptic (|tr| < 2,
    rho = e^{iy}), hyperbolic (|tr| > 2, rho real > 1 in modulus) or
    parabolic (|tr| = 2, no conjugation attempted).  When defined,
    N T(theta,theta) N^{-1} = diag(rho, 1/rho) and F = N T(eta,eta) N^{-1}
    is also produced from its explicit entry formulas.
    """

    trace: float
    regime: str
    rho: complex
    N: Optional[np.ndarray]
    E_diag: Optional[np.ndarray]
    F: Optional[np.ndarray]
    F_formula: Optional[np.ndarray]


PARABOLIC_TOL = 1e-12


def dimer_trace(theta: float, d: DisorderParam) -> float:
    """tr T(theta, theta) = (2 r^2 - 2 cos theta) / t^2 (real)."""
    return float((2.0 * d.r**2 - 2.0 * np.cos(theta)) / d.t**2)


def dimer_conjugation(theta: float, eta: float, d: DisorderParam) -> DimerConjugation:
    r, t = d.r, d.t
    x = np.exp(-1j * theta)
    z = np.exp(-1j * eta)
    tr = dimer_trace(theta, d)
    if abs(abs(tr) - 2.0) <= PARABOLIC_TOL:
        return DimerConjugation(
            trace=tr, regime="parabolic", rho=complex(np.sign(tr)),
            N=None, E_diag=None, F=None, F_formula=None,
        )
    if abs(tr) < 2.0:
        regime = "elliptic"
        y = np.arccos(tr / 2.0)
        rho = np.exp(1j * y)
    else:
        regime = "hyperbolic"
        rho = tr / 2.0 + np.sign(tr) * np.sqrt(tr * tr / 4.0 - 1.0)
    N = np.array(
        [[(r / t) * (1.0 - x), x + rho], [x + rho, -(r / t) * (1.0 - x)]]
    )
    Ninv = np.linalg.inv(N)
    E_diag = N @ transfer_matrix(theta, theta, d) @ Ninv
    F = N @ transfer_matrix(eta, eta, d) @ Ninv
    denom = t * t * (rho - 1.0 / rho)
    xz_sym = (z * np.conj(x) + np.conj(z) * x).real
    z_sym = (z + np.conj(z)).real
    F11 = (2.0 * r * r * (1.0 + rho) - xz_sym - rho * z_sym) / denom
    F12 = (
        2j
        * r
        * (x.imag - z.imag + (z * np.conj(x)).imag)
        / (t**3 * (rho - 1.0 / rho))
    )
    F22 = -(2.0 * r * r * (1.0 + 1.0 / rho) - xz_sym - z_sym / rho) / denom
    F_formula = np.array([[F11, F12], [F12, F22]])
    return DimerConjugation(
        trace=tr, regime=regime, rho=complex(rho),
        N=N, E_diag=E_diag, F=F, F_formula=F_formula,
    )


@dataclass(frozen=True)
class CriticalSet:
    """Finite set M = {-a, -b} union (M_a intersect M_b) outside which the
    dimer Lyapunov exponent is certified positive."""

    points: tuple[float, ...]
    minus_a: float
    minus_b: float
    extra: tuple[float, ...]


def _candidate_set(shift: float, d: DisorderParam) -> list[float]:
    c1 = float(np.arccos(d.r**2))
    c2 = float(np.arccos(d.r**2 - d.t**2))
    return [
        wrap_angle(c1 - shift),
        wrap_angle(2.0 * np.pi - c1 - shift),
        wrap_angle(c2 - shift),
        wrap_angle(2.0 * np.pi - c2 - shift),
    ]


def dimer_critical_set(
    a: float, b: float, d: DisorderParam, tol: float = 1e-10
) -> CriticalSet:
    """M_a, M_b from the closed formulas; intersection with torus tolerance.

    Generic (a, b) gives an empty intersection, so M = {-a, -b}.
    """
    if angles_close(a, b, tol):
        raise ValueError("dimer support needs two distinct atoms")
    Ma = _candidate_set(a, d)
    Mb = _candidate_set(b, d)
    extra = sorted(
        {wrap_angle(x) for x in Ma if any(angles_close(x, y, tol) for y in Mb)}
    )
    minus_a, minus_b = wrap_angle(-a), wrap_angle(-b)
    pts = sorted({minus_a, minus_b, *extra}, key=float)
    return CriticalSet(
        points=tuple(pts), minus_a=minus_a, minus_b=minus_b, extra=tuple(extra)
    )


def dimer_candidate_set(a: float, d: DisorderParam) -> tuple[float, ...]:
    """The four-angle candidate set attached to one support atom."""
    return tuple(_candidate_set(a, d))


# --------------------------------------------------------------------------
# elliptic orbit-growth witness
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitGrowthResult:
    achieved_log_norm: float
    achieved_norm: float
    word: tuple[str, ...]
    certified: bool


def dimer_noncompact_orbit_witness(
    E_diag: np.ndarray,
    F: np.ndarray,
    growth_target: float,
    max_words: int = 10_000,
) -> OrbitGrowthResult:
    """Greedy unbounded-orbit construction in the elliptic dimer regime.

    F must have the normal form [[alpha e^{ic}, beta], [beta, alpha e^{-ic}]]
    with alpha > 0, real beta != 0 and alpha^2 - beta^2 = 1.  Each F
    application with the chart angle u in the favorable interval multiplies
    the squared Euclidean norm by at least 1 + beta^2; E powers steer u back
    into that interval without changing the norm.  Returns the word built
    and the log-norm reached (certified when it exceeds ln growth_target).
    """
    rho = E_diag[0, 0]
    if abs(abs(rho) - 1.0) > 1e-10:
        raise ValueError("orbit witness needs the elliptic regime (|rho| = 1)")
    y = float(np.angle(rho))
    alpha = abs(F[0, 0])
    c = float(np.angle(F[0, 0]))
    beta = float(F[0, 1].real)
    if abs(F[0, 1].imag) > 1e-9 * max(1.0, abs(beta)):
        raise ValueError("F is not in the elliptic normal form")
    if beta == 0.0:
        return OrbitGrowthResult(0.0, 1.0, (), certified=False)

    def favorable(u: float) -> bool:
        cosv = np.cos(2.0 * u + c)
        return cosv > -beta / (4.0 * alpha) if beta > 0 else cosv < -beta / (4.0 * alpha)

    # start from a direction with u favorable and v = pi/4 (both components
    # active, so the F lower bound applies with margin)
    u = 0.0
    for _ in range(64):
        if favorable(u):
            break
        u += np.pi / 64.0
    v_ang = np.pi / 4.0
    vec = np.array([np.exp(1j * u) * np.cos(v_ang), np.exp(-1j * u) * np.sin(v_ang)])
    log_norm = 0.0
    word: list[str] = []
    target_log = float(np.log(growth_target))
    for _ in range(max_words):
        if log_norm >= target_log:
            break
        if favorable(u):
            vec = F @ vec
            s = float(np.linalg.norm(vec))
            log_norm += np.log(s)
            vec = vec / s
            word.append("F")
        else:
            # smallest E power rotating u into the favorable set
            k = 1
            while k < 4 * max_words and not favorable(np.remainder(u + k * y, np.pi)):
                k += 1
            vec = np.array([rho**k * vec[0], np.conj(rho) ** k * vec[1]])
            word.extend(["E"] * k)
        u = float(
            np.remainder((np.angle(vec[0]) - np.angle(vec[1])) / 2.0, np.pi)
        )
        if len(word) >= max_words:
            break
    return OrbitGrowthResult(
        achieved_log_norm=float(log_norm),
        achieved_norm=float(np.exp(min(log_norm, 700.0))),
        word=tuple(word),
        certified=log_norm >= target_log,
    )
