"""Exact analysis of the diametrically-opposed Bernoulli critical case.

With support {a, a + pi} and quasi-energy lam = -a, the shifted transfer
factors take only four values.  Conjugating by the fixed eigen-basis turns
them into signed (anti)diagonal matrices with entries rho^{+-1}, and the
log-magnitude of the running product reduces to an integer-valued Markov
chain x_n.  The chain's first two moments obey closed recursions, giving
the n^{-1/2} decay of the Lyapunov estimate and the diffusive second
moment limit (ln rho)^2 q / (2p).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ualyap.core import DisorderParam, mat_norm, transfer_matrix
from ualyap.lyapunov import PhaseMeasure, RealizationStream


@dataclass(frozen=True)
class PiBernoulliParams:
    """Bernoulli measure p*delta_a + q*delta_{a+pi} and the derived scale
    rho = (r+1)^2 / t^2 > 1."""

    a: float
    p: float
    d: DisorderParam
    q: float = field(init=False)
    rho: float = field(init=False)
    alpha: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        object.__setattr__(self, "q", 1.0 - self.p)
        object.__setattr__(self, "rho", (self.d.r + 1.0) ** 2 / self.d.t**2)
        object.__setattr__(self, "alpha", self.q - self.p)

    @property
    def b(self) -> float:
        return self.a + np.pi

    def measure(self) -> PhaseMeasure:
        return PhaseMeasure.pi_bernoulli(self.a, self.p)


def basis_matrix(d: DisorderParam) -> np.ndarray:
    """Columns (1, (r+1)/t) and (1, (r-1)/t): eigenvectors of the hyperbolic
    product element of the critical case."""
    r, t = d.r, d.t
    return np.array([[1.0, 1.0], [(r + 1.0) / t, (r - 1.0) / t]], dtype=complex)


def basis_change_A(theta: float, eta: float, d: DisorderParam) -> np.ndarray:
    """Transfer matrix conjugated into the eigen-basis.

    On {0, pi}^2 this evaluates to -I, diag(rho, 1/rho), antidiag(1, 1) or
    antidiag(-1/rho, -rho).
    """
    P = basis_matrix(d)
    return np.linalg.solve(P, transfer_matrix(theta, eta, d) @ P)


# step codes for the four shifted-phase outcomes (theta, eta) in {a, b}^2,
# encoded as 2 * [theta == b] + [eta == b]
STEP_KEEP = 0  # (a, a): -I             x -> x
STEP_NEGATE = 1  # (a, b): antidiag(1,1)   x -> -x
STEP_NEGATE_DEC = 2  # (b, a): antidiag(-1/rho,-rho)  x -> -x - 1
STEP_INCREMENT = 3  # (b, b): diag(rho, 1/rho)       x -> x + 1


def markov_step(x: int, draw: tuple[int, int]) -> int:
    """Advance the integer chain by one phase-pair outcome.

    draw is a pair of atom indices (0 for a, 1 for a + pi).
    """
    code = 2 * draw[0] + draw[1]
    if code == STEP_KEEP:
        return x
    if code == STEP_NEGATE:
        return -x
    if code == STEP_NEGATE_DEC:
        return -x - 1
    return x + 1


def simulate_chain(stream: RealizationStream, params: PiBernoulliParams, n: int) -> np.ndarray:
    """Path x_1..x_n of the integer chain, driven by the same phase-pair
    draws the transfer product would consume."""
    idx = stream.pair_indices(params.measure(), n)
    code = 2 * idx[:, 0] + idx[:, 1]
    xs = np.empty(n, dtype=np.int64)
    x = 0
    for k in range(n):
        c = code[k]
        if c == STEP_NEGATE:
            x = -x
        elif c == STEP_NEGATE_DEC:
            x = -x - 1
        elif c == STEP_INCREMENT:
            x = x + 1
        xs[k] = x
    return xs


def simulate_chain_ensemble(
    params: PiBernoulliParams, n: int, R: int, seed: int
) -> np.ndarray:
    """Final chain values x_n for R seeded realizations (vectorized)."""
    rng = np.random.default_rng([seed, 0])
    p, q = params.p, params.q
    probs = [p * p, p * q, p * q, q * q]  # codes 0..3
    x = np.zeros(R, dtype=np.int64)
    for _ in range(n):
        c = rng.choice(4, size=R, p=probs)
        x = np.where(c == STEP_NEGATE, -x, x)
        x = np.where(c == STEP_NEGATE_DEC, -x - 1, x)  # uses already-updated x only when c==2
        x = np.where(c == STEP_INCREMENT, x + 1, x)
    return x


def exact_moments(n: int, p: float) -> tuple[float, float]:
    """(E x_n, E x_n^2) by iterating the exact conditional-moment recursions
    E x_k = alpha^2 E x_{k-1} + q alpha and
    E x_k^2 = E x_{k-1}^2 + 2 q E x_{k-1} + q from zero initial moments."""
    if n < 0:
        raise ValueError("n must be non-negative")
    q = 1.0 - p
    alpha = q - p
    ex = 0.0
    ex2 = 0.0
    for _ in range(n):
        ex2 = ex2 + 2.0 * q * ex + q
        ex = alpha * alpha * ex + q * alpha
    return ex, ex2


def gamma_upper_bound(n: int, p: float, d: DisorderParam) -> float:
    """Cauchy-Schwarz bound (ln rho / n) * sqrt(E x_n^2) for the critical
    Lyapunov estimate at chain length n; decays like n^{-1/2}."""
    if n < 1:
        raise ValueError("n must be positive")
    rho = (d.r + 1.0) ** 2 / d.t**2
    _, ex2 = exact_moments(n, p)
    return float(np.log(rho) / n * np.sqrt(ex2))


def chain_vs_transfer_consistency(
    stream: RealizationStream, params: PiBernoulliParams, n: int
) -> float:
    """Pathwise check that the conjugated product and the integer chain
    agree: max over k of | ln ||Lambda_k u0||_inf - |x_k| ln rho |.

    Both are driven by the identical draw sequence; the product uses
    per-step renormalized bookkeeping so large rho stays safe.

    Valid while max_k |x_k| ln rho stays below ~350: beyond that the
    renormalized small vector component (rho^{-2|x_k|}) underflows and can
    no longer recover when the chain returns toward zero.  At desk scales
    (n up to a few thousand) this is never binding.
    """
    mu = params.measure()
    idx = stream.pair_indices(mu, n)
    code = 2 * idx[:, 0] + idx[:, 1]
    d = params.d
    lam = -params.a
    angles = mu.support_angles
    A_table = np.stack(
        [
            basis_change_A(angles[i] + lam, angles[j] + lam, d)
            for i in (0, 1)
            for j in (0, 1)
        ]
    )
    # restore the exact structural zeros of the (anti)diagonal factors;
    # without this, roundoff dirt outgrows the rho^{-2|x|} component and
    # the pathwise identity degrades over long products
    A_table[np.abs(A_table) < 1e-12 * np.abs(A_table).max()] = 0.0
    log_rho = np.log(params.rho)
    w = np.array([1.0, 1.0], dtype=complex)  # u0 in the conjugated basis
    log_scale = 0.0
    x = 0
    worst = 0.0
    for k in range(n):
        c = code[k]
        w = A_table[c] @ w
        s = np.abs(w).max()
        log_scale += np.log(s)
        w = w / s
        if c == STEP_NEGATE:
            x = -x
        elif c == STEP_NEGATE_DEC:
            x = -x - 1
        elif c == STEP_INCREMENT:
            x = x + 1
        worst = max(worst, abs(log_scale - abs(x) * log_rho))
    return worst
