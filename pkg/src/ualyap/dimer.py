"""Paired-phase (dimer) variant: Lyapunov sweeps with doubled phases and
the closed-form dichotomy at the critical quasi-energies -a, -b.

With Bernoulli phases and lam = -a every transfer factor is either -I or
the fixed matrix T(b-a, b-a); the product therefore grows like the q-th
power of its spectral radius (resolvent case) or stays uniformly bounded
(spectrum case, elliptic factor).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ualyap.core import DisorderParam, angles_close, mat_norm, transfer_matrix, wrap_angle
from ualyap.furstenberg import dimer_critical_set, dimer_trace
from ualyap.lyapunov import (
    AnomalyReport,
    ClassifyBudget,
    ClassifyThresholds,
    PhaseMeasure,
    RealizationStream,
    _realization_log_norm,
    classify_quasi_energy,
    derive_seed,
    renormalized_log_norm,
)


@dataclass(frozen=True)
class DimerParams:
    """Dimer disorder description; Bernoulli when p is given, general
    finite/samplable measures via mu."""

    a: float
    b: float
    d: DisorderParam
    p: Optional[float] = None
    mu: Optional[PhaseMeasure] = None

    def __post_init__(self):
        if angles_close(self.a, self.b, 1e-12):
            raise ValueError("dimer support needs a != b")
        if self.p is not None and not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if self.p is None and self.mu is None:
            raise ValueError("give either a Bernoulli weight p or a measure mu")

    @property
    def q(self) -> float:
        if self.p is None:
            raise ValueError("q is only defined for Bernoulli parameters")
        return 1.0 - self.p

    def measure(self) -> PhaseMeasure:
        if self.p is not None:
            return PhaseMeasure.bernoulli(self.a, self.b, self.p)
        return self.mu


def dimer_transfer_product(
    stream: RealizationStream,
    lam: float,
    mu: PhaseMeasure,
    d: DisorderParam,
    n: int,
) -> float:
    """Renormalized ln ||T_n|| for n i.i.d. paired-phase factors
    T(omega_k + lam, omega_k + lam)."""
    if stream.mode != "dimer":
        raise ValueError("dimer product needs a stream in dimer mode")
    log_norm, _ = renormalized_log_norm(stream, lam, mu, d, n)
    return log_norm


class DimerCriticalValue(NamedTuple):
    value: float
    case: str  # "in_spectrum" | "in_resolvent"
    boundary: bool


def dimer_gamma_critical(params: DimerParams) -> DimerCriticalValue:
    """Closed-form gamma(-a) for the Bernoulli dimer model.

    Case decided by the trace criterion: |tr T(b-a, b-a)| <= 2 exactly when
    e^{i(b-a)} lies in the closed unperturbed spectral arc.  In the
    spectrum case the value is 0; in the resolvent case it is
    q * ln(spectral radius of T(b-a, b-a)).  Parabolic traces (|tr| = 2)
    are classified in_spectrum with a boundary flag.
    """
    if params.p is None:
        raise ValueError("closed-form critical value needs Bernoulli parameters")
    eta = params.b - params.a
    tr = dimer_trace(eta, params.d)
    boundary = abs(abs(tr) - 2.0) <= 1e-10
    if abs(tr) <= 2.0 + 1e-10:
        return DimerCriticalValue(0.0, "in_spectrum", boundary)
    radius = abs(tr) / 2.0 + np.sqrt(tr * tr / 4.0 - 1.0)
    return DimerCriticalValue(
        float(params.q * np.log(radius)), "in_resolvent", boundary
    )


def dimer_boundedness_check(
    params: DimerParams, n_max: int, seed: int, realizations: int = 4
) -> float:
    """sup over n <= n_max of ln ||T_n|| at lam = -a, maximized over a few
    seeded realizations.

    Meaningful when |a-b| is strictly interior to the spectral arc, where
    the fixed factor is elliptic and the sup stays below the conditioning
    constant of its diagonalizing basis.
    """
    mu = params.measure()
    lam = -params.a
    sups = []
    for r in range(realizations):
        stream = RealizationStream(seed, r, "dimer")
        sups.append(_realization_log_norm(stream, lam, mu, params.d, n_max)[1])
    return float(max(sups))


def diagonalization_bound(params: DimerParams) -> float:
    """ln of the row-sum-norm condition number of the eigenbasis of
    T(b-a, b-a); an a-priori bound for the critical dimer sup."""
    T = transfer_matrix(params.b - params.a, params.b - params.a, params.d)
    _, V = np.linalg.eig(T)
    return float(np.log(mat_norm(V) * mat_norm(np.linalg.inv(V))))


def dimer_sweep(
    lam_grid: Sequence[float],
    params: DimerParams,
    n: int,
    R: int,
    seed: int,
    thresholds: Optional[ClassifyThresholds] = None,
    budget: Optional[ClassifyBudget] = None,
    critical_tol: float = 1e-6,
) -> list[tuple[AnomalyReport, bool]]:
    """Pointwise anomaly classification over a quasi-energy grid.

    Each entry is (report, near_critical): the flag marks grid points within
    critical_tol of the computed finite critical set.
    """
    if len(lam_grid) == 0:
        raise ValueError("empty quasi-energy grid")
    mu = params.measure()
    crit = dimer_critical_set(params.a, params.b, params.d)
    bud = budget or ClassifyBudget(n_ladder=(max(n // 10, 10), n), R=R)
    out = []
    for i, lam in enumerate(lam_grid):
        report = classify_quasi_energy(
            lam,
            mu,
            params.d,
            thresholds=thresholds,
            budget=bud,
            seed=derive_seed(seed, i),
            mode="dimer",
        )
        near = any(angles_close(lam, c, critical_tol) for c in crit.points)
        out.append((report, near))
    return out
