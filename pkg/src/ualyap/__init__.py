"""Numerical laboratory for a random five-diagonal unitary band model.

Core objects: the deterministic band operator, 2x2 transfer-matrix cocycles,
Monte Carlo Lyapunov-exponent estimation with overflow-safe renormalized
products, exact analysis of the diametrically-opposed Bernoulli critical
case, constructive group witnesses (non-compactness / strong irreducibility),
and the paired-phase (dimer) variant.
"""

from ualyap.core import (
    DisorderParam,
    ProjPoint,
    SpectralArc,
    act,
    almost_sure_spectrum,
    eigen_frame,
    mat_norm,
    proj_distance,
    s_matrix_window,
    spectral_arc,
    transfer_matrix,
    transfer_matrix_shifted,
    verify_eigen_recursion,
    wrap_angle,
)
from ualyap.lyapunov import (
    AnomalyReport,
    ClassifyBudget,
    ClassifyThresholds,
    LyapunovEstimate,
    PhaseMeasure,
    RealizationStream,
    classify_quasi_energy,
    empirical_invariant_measure,
    estimate_lyapunov,
    estimate_second_moment,
    furstenberg_cross_check,
    phi,
    renormalized_log_norm,
    sweep,
)
from ualyap.bernoulli_pi import (
    PiBernoulliParams,
    basis_change_A,
    chain_vs_transfer_consistency,
    exact_moments,
    gamma_upper_bound,
    markov_step,
    simulate_chain,
)
from ualyap.furstenberg import (
    CriticalSet,
    DimerConjugation,
    GroupWitness,
    build_witness,
    dimer_conjugation,
    dimer_critical_set,
    dimer_noncompact_orbit_witness,
    general_irreducibility_witness,
    pi_case_irreducibility,
)
from ualyap.dimer import (
    DimerParams,
    diagonalization_bound,
    dimer_boundedness_check,
    dimer_gamma_critical,
    dimer_sweep,
    dimer_transfer_product,
)

__version__ = "0.1.0"
