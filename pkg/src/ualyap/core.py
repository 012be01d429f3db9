"""Core domain types: band-operator stencil, transfer matrices, spectral
arcs and projective-space utilities.

Conventions used throughout the package:

* angles live on [0, 2*pi) (``wrap_angle``),
* the matrix norm is the maximum row sum (``mat_norm``),
* the vector norm is the max-norm,
* 2x2 complex matrices are plain ``numpy`` arrays of shape (2, 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

ANGLE_TOL = 1e-12
PROJ_TOL = 1e-8


def wrap_angle(theta: float) -> float:
    """Canonical representative of an angle in [0, 2*pi)."""
    out = np.remainder(theta, TWO_PI)
    # remainder can return 2*pi itself for tiny negative inputs
    return float(np.where(out >= TWO_PI, 0.0, out))


def angles_close(a: float, b: float, tol: float = ANGLE_TOL) -> bool:
    """Equality on the torus, measuring the wrapped difference."""
    d = abs(wrap_angle(a - b))
    return d <= tol or TWO_PI - d <= tol


@dataclass(frozen=True)
class DisorderParam:
    """Off-diagonal coupling t of the band operator, with r = +sqrt(1-t^2).

    Degenerate t in {0, 1} is rejected: the model is trivial there.
    """

    t: float
    r: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.t < 1.0:
            raise ValueError(f"t must lie strictly in (0, 1), got {self.t}")
        object.__setattr__(self, "r", float(np.sqrt(1.0 - self.t * self.t)))


def mat_norm(m: np.ndarray) -> float:
    """Maximum-row-sum norm of a matrix."""
    return float(np.abs(m).sum(axis=-1).max())


def vec_norm(v: np.ndarray) -> float:
    """Max-norm of a vector."""
    return float(np.abs(v).max())


def eigen_frame(d: DisorderParam) -> tuple[np.ndarray, np.ndarray]:
    """Fixed basis P with columns (1, (r+1)/t) and (1, (r-1)/t), and its
    exact inverse.

    Conjugation by P turns the transfer factors of the diametrically-opposed
    critical case into signed (anti)diagonal matrices; long products are
    multiplied in this frame so that the structural zeros survive floating
    point.  The closed-form inverse keeps P @ Pinv within one ulp of the
    identity.
    """
    r, t = d.r, d.t
    u = (r + 1.0) / t
    w = (r - 1.0) / t
    det = w - u
    P = np.array([[1.0, 1.0], [u, w]], dtype=complex)
    Pinv = np.array([[w, -1.0], [-u, 1.0]], dtype=complex) / det
    return P, Pinv


def transfer_matrix(theta: float, eta: float, d: DisorderParam) -> np.ndarray:
    """One 2-site transfer step of the eigenvalue recursion.

    det = e^{i(theta - eta)}; in particular every factor lies in GL(2, C).
    """
    r, t = d.r, d.t
    e_mth = np.exp(-1j * eta)
    e_pth = np.exp(1j * theta)
    e_dif = np.exp(1j * (theta - eta))
    return np.array(
        [
            [-e_mth, (r / t) * (e_dif - e_mth)],
            [
                (r / t) * (1.0 - e_mth),
                -e_pth / t**2 + (r**2 / t**2) * (1.0 + e_dif - e_mth),
            ],
        ]
    )


def transfer_matrix_shifted(
    theta: float, eta: float, lam: float, d: DisorderParam
) -> np.ndarray:
    """Transfer step at quasi-energy lam: both phases shifted by lam."""
    return transfer_matrix(theta + lam, eta + lam, d)


def s_matrix_window(d: DisorderParam, k_min: int, k_max: int) -> np.ndarray:
    """Rows k_min..k_max of the five-diagonal band operator.

    Returned as a dense (k_max-k_min+1) x (k_max-k_min+5) block whose columns
    cover k_min-2 .. k_max+2, i.e. every nonzero entry of the requested rows.
    Even rows carry (rt, r^2, rt, -t^2) at offsets (-1..2); odd rows carry
    (-t^2, -tr, r^2, -rt) at offsets (-2..1).  The parity is anchored by the
    entry -t^2 in row 2k-2, column 2k.
    """
    if k_max - k_min < 6:
        raise ValueError("window too small: need k_max - k_min >= 6")
    r, t = d.r, d.t
    c_min = k_min - 2
    n_rows = k_max - k_min + 1
    n_cols = k_max + 2 - c_min + 1
    S = np.zeros((n_rows, n_cols))
    even = (r * t, r * r, r * t, -t * t)  # offsets -1, 0, 1, 2
    odd = (-t * t, -t * r, r * r, -r * t)  # offsets -2, -1, 0, 1
    for k in range(k_min, k_max + 1):
        i = k - k_min
        if k % 2 == 0:
            for off, val in zip((-1, 0, 1, 2), even):
                S[i, k + off - c_min] = val
        else:
            for off, val in zip((-2, -1, 0, 1), odd):
                S[i, k + off - c_min] = val
    return S


def verify_eigen_recursion(
    phases, lam: float, d: DisorderParam, c_init
) -> float:
    """Max relative residual of the windowed eigenvalue equation.

    Coefficients c_{-1}..c_{2n} are generated by iterating the transfer
    recursion from c_init = (c_{-1}, c_0); the residual of row k of
    D_omega S psi - e^{i lam} psi is then computed for every row whose band
    is covered by generated coefficients, normalized by the largest
    coefficient the row touches.
    """
    phases = np.asarray(phases, dtype=float)
    if len(phases) % 2 != 0 or len(phases) < 8:
        raise ValueError("phases must have even length >= 8")
    c_init = np.asarray(c_init, dtype=complex)
    if vec_norm(c_init) == 0.0:
        raise ValueError("initial coefficient vector must be nonzero")
    n = len(phases) // 2
    # c[j] holds coefficient index j-1, i.e. indices -1 .. 2n
    c = np.zeros(2 * n + 2, dtype=complex)
    c[0], c[1] = c_init
    for k in range(n):
        T = transfer_matrix_shifted(phases[2 * k], phases[2 * k + 1], lam, d)
        c[2 * k + 2 : 2 * k + 4] = T @ c[2 * k : 2 * k + 2]
    S = s_matrix_window(d, -1, 2 * n)  # columns cover -3 .. 2n+2
    psi = np.zeros(S.shape[1], dtype=complex)
    psi[2 : 2 + len(c)] = c  # column j corresponds to index j-3
    phase_factor = np.exp(1j * lam)
    worst = 0.0
    for k in range(1, 2 * n - 1):  # rows with full band inside the window
        row = S[k + 1]
        lhs = np.exp(-1j * phases[k]) * (row @ psi)
        rhs = phase_factor * c[k + 1]
        scale = max(np.abs(c[max(k - 1, 0) : k + 4]).max(), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


@dataclass(frozen=True)
class SpectralArc:
    """Arc {e^{i v} : |v - center| <= half_width on the torus}."""

    center: float
    half_width: float

    def __post_init__(self):
        if not 0.0 <= self.half_width <= np.pi:
            raise ValueError("half_width must lie in [0, pi]")
        object.__setattr__(self, "center", wrap_angle(self.center))

    def contains(self, angle: float, tol: float = 0.0) -> bool:
        d = abs(wrap_angle(angle - self.center))
        d = min(d, TWO_PI - d)
        return d <= self.half_width + tol


def spectral_arc(d: DisorderParam) -> SpectralArc:
    """Spectrum of the unperturbed band operator: arc of half-width
    arccos(1 - 2 t^2) centered at angle 0."""
    return SpectralArc(0.0, float(np.arccos(1.0 - 2.0 * d.t**2)))


def almost_sure_spectrum(mu, d: DisorderParam) -> list[SpectralArc]:
    """Union over the support atoms of the rotated unperturbed arc, with
    overlapping arcs merged; sorted by center.

    Only finite-support measures are accepted.
    """
    atoms = getattr(mu, "atoms", None)
    if getattr(mu, "kind", None) != "finite" or atoms is None:
        raise ValueError("almost-sure spectrum needs a finite-support measure")
    base = spectral_arc(d)
    if base.half_width >= np.pi:
        return [SpectralArc(0.0, np.pi)]
    # collect arcs as [lo, hi] intervals on the line, then merge mod 2*pi
    intervals = []
    for a, _p in atoms:
        lo = wrap_angle(a + base.center - base.half_width)
        hi = lo + 2.0 * base.half_width
        intervals.append((lo, hi))
    intervals.sort()
    # unwrap: duplicate shifted copies so wrap-around overlaps merge
    doubled = intervals + [(lo + TWO_PI, hi + TWO_PI) for lo, hi in intervals]
    merged: list[list[float]] = []
    for lo, hi in doubled:
        if merged and lo <= merged[-1][1] + ANGLE_TOL:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    # keep the components whose start lies in [0, 2*pi)
    out = []
    for lo, hi in merged:
        if lo >= TWO_PI:
            continue
        if hi - lo >= TWO_PI:
            return [SpectralArc(0.0, np.pi)]
        out.append(SpectralArc((lo + hi) / 2.0, (hi - lo) / 2.0))
    # drop components fully contained in the wrap-extension of another
    out = [
        arc
        for arc in out
        if not any(
            other is not arc
            and other.half_width >= arc.half_width
            and other.contains(arc.center - arc.half_width, ANGLE_TOL)
            and other.contains(arc.center + arc.half_width, ANGLE_TOL)
            for other in out
        )
    ]
    out.sort(key=lambda arc: arc.center)
    return out


class ProjPoint:
    """Direction in P(C^2), stored as a canonical representative.

    The representative has max-norm 1 and its first nonzero entry is real
    and positive, which makes reprs stable under the basis changes used in
    the witness constructions.
    """

    __slots__ = ("v",)

    def __init__(self, v):
        v = np.asarray(v, dtype=complex).reshape(2)
        nrm = np.abs(v).max()
        if nrm == 0.0:
            raise ValueError("zero vector has no direction")
        v = v / nrm
        lead = v[0] if abs(v[0]) > 1e-14 else v[1]
        v = v * (abs(lead) / lead)
        self.v = v

    def __repr__(self):
        return f"ProjPoint({self.v[0]:.6g}, {self.v[1]:.6g})"

    def __eq__(self, other):
        if not isinstance(other, ProjPoint):
            return NotImplemented
        return proj_distance(self, other) <= PROJ_TOL

    def __hash__(self):
        raise TypeError("ProjPoint equality is tolerance-based; not hashable")

    def uv_chart(self) -> tuple[float, float]:
        """Chart (u, v) in [0, pi) x [0, pi/2] with representative
        e^{i phi} (e^{iu} cos v, e^{-iu} sin v)."""
        w1, w2 = self.v
        v = float(np.arctan2(abs(w2), abs(w1)))
        u = (np.angle(w1) - np.angle(w2)) / 2.0
        u = float(np.remainder(u, np.pi))
        return u, v

    @staticmethod
    def from_uv(u: float, v: float) -> "ProjPoint":
        return ProjPoint([np.exp(1j * u) * np.cos(v), np.exp(-1j * u) * np.sin(v)])


def proj_distance(vbar: ProjPoint, wbar: ProjPoint) -> float:
    """sin of the angle between directions: sqrt(1 - |<v,w>|^2 / (|v|^2 |w|^2)).

    Evaluated through the Lagrange identity |v1 w2 - v2 w1| / (|v| |w|),
    which avoids the catastrophic cancellation of the direct formula for
    nearly parallel directions.
    """
    v, w = vbar.v, wbar.v
    cross = abs(v[0] * w[1] - v[1] * w[0])
    denom = float(np.sqrt(np.vdot(v, v).real * np.vdot(w, w).real))
    return float(min(cross / denom, 1.0))


def act(m: np.ndarray, vbar: ProjPoint) -> ProjPoint:
    """Projective action: direction of m @ v."""
    if abs(np.linalg.det(m)) <= 1e-14:
        raise ValueError("cannot act with a (numerically) singular matrix")
    return ProjPoint(m @ vbar.v)
