"""Monte Carlo Lyapunov-exponent machinery.

Estimates gamma(lambda) = lim E(ln ||T_n||)/n by renormalized transfer
cocycle products, together with second-moment anomaly statistics, the
single-step average Phi, empirical invariant measures on P(C^2), and a
quasi-energy classifier separating the positive / diffusive-critical /
bounded-critical regimes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from ualyap.core import (
    DisorderParam,
    ProjPoint,
    TWO_PI,
    eigen_frame,
    vec_norm,
    wrap_angle,
)
from ualyap.kernels import (
    _indexed_log_norm,
    _orbit_scan,
    _product_log_norm,
    _product_scan,
)


# --------------------------------------------------------------------------
# phase measures and reproducible streams
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseMeasure:
    """Law of a single random phase on the torus.

    kind is one of "finite", "uniform", "custom"; finite measures carry
    (angle, probability) atoms, custom ones a sampler(rng, size) callable.
    """

    kind: str
    atoms: Optional[tuple[tuple[float, float], ...]] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def __post_init__(self):
        if self.kind == "finite":
            if not self.atoms:
                raise ValueError("finite measure needs at least one atom")
            probs = np.array([p for _, p in self.atoms])
            if (probs <= 0).any() or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("atom probabilities must be positive and sum to 1")
            canon = tuple((wrap_angle(a), float(p)) for a, p in self.atoms)
            object.__setattr__(self, "atoms", canon)
        elif self.kind == "uniform":
            pass
        elif self.kind == "custom":
            if self.sampler is None:
                raise ValueError("custom measure needs a sampler")
        else:
            raise ValueError(f"unknown measure kind {self.kind!r}")

    @classmethod
    def finite(cls, atoms) -> "PhaseMeasure":
        return cls("finite", atoms=tuple(atoms))

    @classmethod
    def point(cls, a: float) -> "PhaseMeasure":
        return cls.finite([(a, 1.0)])

    @classmethod
    def bernoulli(cls, a: float, b: float, p: float) -> "PhaseMeasure":
        return cls.finite([(a, p), (b, 1.0 - p)])

    @classmethod
    def pi_bernoulli(cls, a: float, p: float) -> "PhaseMeasure":
        """Two diametrically opposed atoms a and a + pi."""
        return cls.bernoulli(a, a + np.pi, p)

    @classmethod
    def uniform(cls) -> "PhaseMeasure":
        return cls("uniform")

    @property
    def support_angles(self) -> np.ndarray:
        if self.kind != "finite":
            raise ValueError("support enumeration needs a finite measure")
        return np.array([a for a, _ in self.atoms])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    @property
    def nontrivial(self) -> bool:
        """True when the support has at least two elements."""
        return self.kind != "finite" or len(self.atoms) >= 2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "finite":
            return self.support_angles[self.sample_indices(rng, size)]
        if self.kind == "uniform":
            return rng.uniform(0.0, TWO_PI, size)
        return np.asarray(self.sampler(rng, size), dtype=float)

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind != "finite":
            raise ValueError("index sampling needs a finite measure")
        return rng.choice(len(self.atoms), size=size, p=self.probabilities)


@dataclass
class RealizationStream:
    """Seeded source of i.i.d. torus phases for one realization.

    The generator is derived from (seed, index), so distinct realization
    indices give independent streams while (seed, index, position) always
    reproduces the same phase.  In dimer mode consecutive phases come in
    identical pairs: (theta_{2k}, theta_{2k+1}) share one draw.
    """

    seed: int
    index: int = 0
    mode: str = "independent"

    def __post_init__(self):
        if self.mode not in ("independent", "dimer"):
            raise ValueError(f"unknown stream mode {self.mode!r}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng([self.seed, self.index])

    def pair_angles(self, mu: PhaseMeasure, n: int, rng=None) -> np.ndarray:
        """(n, 2) array of phase pairs driving n transfer steps."""
        rng = rng or self.rng()
        if self.mode == "dimer":
            draws = mu.sample(rng, n)
            return np.stack([draws, draws], axis=1)
        return mu.sample(rng, 2 * n).reshape(n, 2)

    def pair_indices(self, mu: PhaseMeasure, n: int, rng=None) -> np.ndarray:
        """Atom-index pairs, shape (n, 2); finite measures only."""
        rng = rng or self.rng()
        if self.mode == "dimer":
            idx = mu.sample_indices(rng, n)
            return np.stack([idx, idx], axis=1)
        return mu.sample_indices(rng, 2 * n).reshape(n, 2)


def derive_seed(seed: int, index: int) -> int:
    """Stable 64-bit child seed for grid points / sub-experiments."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


# --------------------------------------------------------------------------
# transfer factors
# --------------------------------------------------------------------------


def _transfer_batch(thetas, etas, d: DisorderParam) -> np.ndarray:
    """Vectorized transfer matrices, shape (n, 2, 2)."""
    thetas = np.asarray(thetas, dtype=float)
    etas = np.asarray(etas, dtype=float)
    r, t = d.r, d.t
    e_mth = np.exp(-1j * etas)
    e_pth = np.exp(1j * thetas)
    e_dif = np.exp(1j * (thetas - etas))
    out = np.empty(thetas.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = -e_mth
    out[..., 0, 1] = (r / t) * (e_dif - e_mth)
    out[..., 1, 0] = (r / t) * (1.0 - e_mth)
    out[..., 1, 1] = -e_pth / t**2 + (r**2 / t**2) * (1.0 + e_dif - e_mth)
    return out


def transfer_table(mu: PhaseMeasure, lam: float, d: DisorderParam) -> np.ndarray:
    """All m^2 transfer factors T(a_i + lam, a_j + lam) for a finite measure,
    indexed by i * m + j."""
    angles = mu.support_angles + lam
    m = len(angles)
    th = np.repeat(angles, m)
    et = np.tile(angles, m)
    return _transfer_batch(th, et, d)


SNAP_TOL = 1e-12


def _conjugate_snap(factors: np.ndarray, d: DisorderParam) -> np.ndarray:
    """Factors conjugated into the eigen frame, with sub-tolerance entries
    snapped to exact zero.

    At the critical quasi-energies of a diametrically-opposed Bernoulli
    measure the conjugated factors are signed (anti)diagonal; snapping the
    roundoff dirt restores the exact structural zeros, so long products do
    not pick up the spurious positive growth rate that raw double-precision
    products exhibit there.  Away from those points the snap never fires on
    anything but genuine zeros and the conjugation is a bounded change of
    frame that the norm reporting undoes.
    """
    P, Pinv = eigen_frame(d)
    out = Pinv @ factors @ P
    scale = np.abs(out).sum(axis=-1).max(axis=-1)
    out[np.abs(out) < SNAP_TOL * scale[..., None, None]] = 0.0
    return out


def _realization_factors(
    stream: RealizationStream,
    lam: float,
    mu: PhaseMeasure,
    d: DisorderParam,
    n: int,
    framed: bool = True,
):
    """Either ("table", table, flat_idx) or ("dense", factors, None).

    With framed=True the factors live in the eigen frame (see
    _conjugate_snap); norms must then be evaluated through eigen_frame(d).
    """
    if mu.kind == "finite":
        m = len(mu.atoms)
        idx = stream.pair_indices(mu, n)
        table = transfer_table(mu, lam, d)
        if framed:
            table = _conjugate_snap(table, d)
        return "table", table, (idx[:, 0] * m + idx[:, 1]).astype(np.int64)
    pairs = stream.pair_angles(mu, n)
    factors = _transfer_batch(pairs[:, 0] + lam, pairs[:, 1] + lam, d)
    if framed:
        factors = _conjugate_snap(factors, d)
    return "dense", factors, None


def _realization_log_norm(
    stream: RealizationStream,
    lam: float,
    mu: PhaseMeasure,
    d: DisorderParam,
    n: int,
) -> tuple[float, float]:
    """(ln ||T_n||, sup_k ln ||T_k||) for one seeded realization."""
    kind, a, b = _realization_factors(stream, lam, mu, d, n)
    P, Pinv = eigen_frame(d)
    if kind == "table":
        return _indexed_log_norm(a, b, P, Pinv)
    return _product_log_norm(np.ascontiguousarray(a), P, Pinv)


def renormalized_log_norm(
    stream: RealizationStream,
    lam: float,
    mu: PhaseMeasure,
    d: DisorderParam,
    n: int,
    history: bool = False,
):
    """ln ||T_n|| for one realization, computed without overflow.

    The running product is rescaled by its norm every step and the logs
    accumulated; with history=True the partial log-norms ln ||T_k||,
    k = 1..n, are returned as well.
    """
    if n < 1:
        raise ValueError("need at least one factor")
    if not history:
        return _realization_log_norm(stream, lam, mu, d, n)[0], None
    kind, a, b = _realization_factors(stream, lam, mu, d, n)
    factors = a[b] if kind == "table" else a
    P, Pinv = eigen_frame(d)
    logs = _product_scan(np.ascontiguousarray(factors), P, Pinv)
    return float(logs[-1]), logs


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------


class LyapunovEstimate(NamedTuple):
    """Monte Carlo estimate of gamma at one quasi-energy (nats per 2-site
    transfer step)."""

    lam: float
    mean: float
    stderr: float
    n: int
    realizations: int


def _per_realization_values(
    lam, mu, d, n, R, seed, mode, workers
) -> np.ndarray:
    if R < 1:
        raise ValueError("need at least one realization")
    vals = np.empty(R)

    def run(r):
        stream = RealizationStream(seed, r, mode)
        vals[r] = _realization_log_norm(stream, lam, mu, d, n)[0]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(R)))
    else:
        for r in range(R):
            run(r)
    return vals


def estimate_lyapunov(
    lam: float,
    mu: PhaseMeasure,
    d: DisorderParam,
    n: int,
    R: int,
    seed: int,
    mode: str = "independent",
    workers: int = 1,
) -> LyapunovEstimate:
    """Average of ln ||T_n|| / n over R independent seeded realizations.

    Deterministic given (seed, n, R) regardless of the worker count: the
    accumulation order is fixed by the realization index.
    """
    if R < 2:
        raise ValueError("need R >= 2 for a standard error")
    vals = _per_realization_values(lam, mu, d, n, R, seed, mode, workers) / n
    return LyapunovEstimate(
        lam=wrap_angle(lam),
        mean=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / np.sqrt(R)),
        n=n,
        realizations=R,
    )


def estimate_second_moment(
    lam: float,
    mu: PhaseMeasure,
    d: DisorderParam,
    n: int,
    R: int,
    seed: int,
    mode: str = "independent",
    workers: int = 1,
) -> float:
    """Monte Carlo estimate of (1/n) E((ln ||T_n||)^2)."""
    vals = _per_realization_values(lam, mu, d, n, R, seed, mode, workers)
    return float((vals**2).mean() / n)


def sweep(
    lam_grid: Sequence[float],
    mu: PhaseMeasure,
    d: DisorderParam,
    n: int,
    R: int,
    seed: int,
    mode: str = "independent",
    workers: int = 1,
) -> list[LyapunovEstimate]:
    """One Lyapunov estimate per grid point; realizations are independent
    across points but every point is reproducible from (seed, point index)."""
    if len(lam_grid) == 0:
        raise ValueError("empty quasi-energy grid")
    return [
        estimate_lyapunov(
            lam, mu, d, n, R, derive_seed(seed, i), mode=mode, workers=workers
        )
        for i, lam in enumerate(lam_grid)
    ]


# --------------------------------------------------------------------------
# anomaly classification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassifyThresholds:
    """Decision constants separating the three regimes at desk scale."""

    positive_sigma: float = 5.0
    positive_floor: float = 1e-3
    # a genuinely positive exponent is n-stable; an n^{-1/2} critical decay
    # loses a factor ~3 per ladder decade, so 0.5 separates them cleanly
    positive_stability: float = 0.5
    diffusive_drift: float = 0.10
    sqrt_drift: float = 0.15
    bounded_log: float = float(np.log(50.0))


@dataclass(frozen=True)
class ClassifyBudget:
    n_ladder: tuple[int, ...] = (1_000, 10_000, 100_000)
    R: int = 200
    sup_chain: int = 100_000
    sup_realizations: int = 8


@dataclass(frozen=True)
class AnomalyReport:
    lam: float
    gamma_hat: LyapunovEstimate
    second_moment_per_n: float
    sup_norm_log: float
    classification: str


def classify_quasi_energy(
    lam: float,
    mu: PhaseMeasure,
    d: DisorderParam,
    thresholds: Optional[ClassifyThresholds] = None,
    budget: Optional[ClassifyBudget] = None,
    seed: int = 0,
    mode: str = "independent",
    workers: int = 1,
) -> AnomalyReport:
    """Classify one quasi-energy as positive / diffusive-critical /
    bounded-critical / inconclusive from an n-ladder of estimates."""
    th = thresholds or ClassifyThresholds()
    bud = budget or ClassifyBudget()
    gammas = [
        estimate_lyapunov(
            lam, mu, d, n, bud.R, derive_seed(seed, k), mode=mode, workers=workers
        )
        for k, n in enumerate(bud.n_ladder)
    ]
    moments = [
        estimate_second_moment(
            lam, mu, d, n, bud.R, derive_seed(seed, 100 + k), mode=mode, workers=workers
        )
        for k, n in enumerate(bud.n_ladder)
    ]
    sups = [
        _realization_log_norm(
            RealizationStream(derive_seed(seed, 200), r, mode), lam, mu, d, bud.sup_chain
        )[1]
        for r in range(bud.sup_realizations)
    ]
    gamma_hat = gammas[-1]
    sup_norm_log = float(max(sups))
    sm_per_n = moments[-1]

    positive = all(
        g.mean > max(th.positive_sigma * g.stderr, th.positive_floor) for g in gammas
    ) and gammas[-1].mean > th.positive_stability * gammas[0].mean
    scaled = np.array([g.mean * np.sqrt(g.n) for g in gammas])
    sqrt_stable = scaled.min() > 0 and (
        scaled.max() / scaled.min() - 1.0 <= 3.0 * th.sqrt_drift
    )
    m = np.array(moments)
    diffusive = (
        m.min() > 0
        and (m.max() / m.min() - 1.0) <= th.diffusive_drift
        and sqrt_stable
    )

    if positive:
        cls = "positive"
    elif sup_norm_log < th.bounded_log:
        cls = "bounded-critical"
    elif diffusive:
        cls = "diffusive-critical"
    else:
        cls = "inconclusive"
    return AnomalyReport(
        lam=wrap_angle(lam),
        gamma_hat=gamma_hat,
        second_moment_per_n=sm_per_n,
        sup_norm_log=sup_norm_log,
        classification=cls,
    )


# --------------------------------------------------------------------------
# Phi and the invariant measure
# --------------------------------------------------------------------------


class PhiEstimate(NamedTuple):
    value: float
    stderr: float


def _phi_many(lam: float, V: np.ndarray, mu: PhaseMeasure, d: DisorderParam):
    """Exact Phi(lam, v) for a batch of directions V (N, 2); finite mu."""
    table = transfer_table(mu, lam, d)
    probs = mu.probabilities
    w = np.outer(probs, probs).ravel()  # weight of pair (i, j)
    norms_v = np.abs(V).max(axis=1)
    out = np.zeros(V.shape[0])
    for k in range(table.shape[0]):
        tv = V @ table[k].T
        out += w[k] * np.log(np.abs(tv).max(axis=1) / norms_v)
    return out


def phi(
    lam: float,
    vbar: ProjPoint,
    mu: PhaseMeasure,
    d: DisorderParam,
    n_samples: int = 4096,
    seed: int = 0,
) -> PhiEstimate:
    """Single-step expectation Phi(lam, v) = E(ln ||T_lam v|| / ||v||).

    Finite measures are summed exactly over support pairs (stderr 0);
    samplable ones are averaged by Monte Carlo with a reported stderr.
    Norms are max-norms, consistent with the rest of the package.
    """
    v = vbar.v
    if mu.kind == "finite":
        val = _phi_many(lam, v[None, :], mu, d)[0]
        return PhiEstimate(float(val), 0.0)
    rng = np.random.default_rng([seed, 0])
    pairs = mu.sample(rng, 2 * n_samples).reshape(n_samples, 2)
    factors = _transfer_batch(pairs[:, 0] + lam, pairs[:, 1] + lam, d)
    vals = np.log(np.abs(factors @ v).max(axis=1) / vec_norm(v))
    return PhiEstimate(
        float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_samples))
    )


@dataclass(frozen=True)
class InvariantMeasureSample:
    """Empirical invariant measure: orbit points on P(C^2) after burn-in.

    points are max-norm-1 representatives; histogram bins the (u, v) chart
    on a 64 x 64 grid.  converged is False when the histograms of the two
    orbit halves disagree beyond split_distance_tol (expected at critical
    quasi-energies, where no attracting direction exists).
    """

    lam: float
    points: np.ndarray
    histogram: np.ndarray
    converged: bool
    split_distance: float


HIST_BINS = 64
SPLIT_TOL = 0.25


def _uv_histogram(points: np.ndarray) -> np.ndarray:
    u = np.remainder((np.angle(points[:, 0]) - np.angle(points[:, 1])) / 2.0, np.pi)
    v = np.arctan2(np.abs(points[:, 1]), np.abs(points[:, 0]))
    hist, _, _ = np.histogram2d(
        u, v, bins=HIST_BINS, range=[[0, np.pi], [0, np.pi]], density=False
    )
    return hist / len(points)


def empirical_invariant_measure(
    lam: float,
    mu: PhaseMeasure,
    d: DisorderParam,
    burn_in: int,
    samples: int,
    seed: int,
    mode: str = "independent",
) -> InvariantMeasureSample:
    """Orbit of a random initial direction under the random transfer action.

    Valid as a stand-in for the invariant measure only where gamma > 0;
    elsewhere the convergence flag fires.
    """
    stream = RealizationStream(seed, 0, mode)
    rng = stream.rng()
    v0 = rng.normal(size=2) + 1j * rng.normal(size=2)
    v0 /= np.abs(v0).max()
    kind, a, b = _realization_factors(
        stream_tail(stream, rng), lam, mu, d, burn_in + samples, framed=False
    )
    factors = np.ascontiguousarray(a[b] if kind == "table" else a)
    orbit = _orbit_scan(factors, v0)
    points = orbit[burn_in:]
    half = len(points) // 2
    h1, h2 = _uv_histogram(points[:half]), _uv_histogram(points[half:])
    split = float(np.abs(h1 - h2).sum())
    return InvariantMeasureSample(
        lam=wrap_angle(lam),
        points=points,
        histogram=_uv_histogram(points),
        converged=split <= SPLIT_TOL,
        split_distance=split,
    )


def stream_tail(stream: RealizationStream, rng) -> RealizationStream:
    """Stream view that keeps drawing from an already-advanced generator."""
    tail = RealizationStream(stream.seed, stream.index, stream.mode)
    tail.rng = lambda: rng  # type: ignore[method-assign]
    return tail


@dataclass(frozen=True)
class CrossCheckBudget:
    n: int = 10_000
    R: int = 100
    burn_in: int = 2_000
    samples: int = 20_000
    batches: int = 20


class CrossCheckResult(NamedTuple):
    gamma_direct: LyapunovEstimate
    gamma_integral: float
    integral_stderr: float
    agreement: bool
    converged: bool


def furstenberg_cross_check(
    lam: float,
    mu: PhaseMeasure,
    d: DisorderParam,
    budgets: Optional[CrossCheckBudget] = None,
    seed: int = 0,
    mode: str = "independent",
) -> CrossCheckResult:
    """Compare the direct gamma estimate against the integral of Phi over
    the empirical invariant measure.

    The integral stderr uses batch means over the (autocorrelated) orbit;
    agreement requires the two estimates to match within 3 combined stderr.
    A non-converged measure (critical lambda) is propagated as a flag.
    """
    bud = budgets or CrossCheckBudget()
    direct = estimate_lyapunov(
        lam, mu, d, bud.n, bud.R, derive_seed(seed, 1), mode=mode
    )
    nu = empirical_invariant_measure(
        lam, mu, d, bud.burn_in, bud.samples, derive_seed(seed, 2), mode=mode
    )
    if mu.kind == "finite":
        vals = _phi_many(lam, nu.points, mu, d)
    else:
        vals = np.array(
            [phi(lam, ProjPoint(p), mu, d, seed=derive_seed(seed, 3)).value
             for p in nu.points]
        )
    batches = np.array_split(vals, bud.batches)
    means = np.array([b.mean() for b in batches])
    integral = float(vals.mean())
    integral_se = float(means.std(ddof=1) / np.sqrt(len(means)))
    combined = float(np.hypot(direct.stderr, integral_se))
    agreement = nu.converged and abs(direct.mean - integral) <= 3.0 * combined
    return CrossCheckResult(direct, integral, integral_se, agreement, nu.converged)
