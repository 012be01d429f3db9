"""Tests for the Monte Carlo engine: renormalized products, estimators,
classification, Phi and the invariant measure."""

import numpy as np
import pytest

from ualyap.core import DisorderParam, ProjPoint, eigen_frame, mat_norm
from ualyap.lyapunov import (
    ClassifyBudget,
    ClassifyThresholds,
    CrossCheckBudget,
    PhaseMeasure,
    RealizationStream,
    _realization_factors,
    classify_quasi_energy,
    derive_seed,
    empirical_invariant_measure,
    estimate_lyapunov,
    estimate_second_moment,
    furstenberg_cross_check,
    phi,
    renormalized_log_norm,
    sweep,
)

T_HALF = 1.0 / np.sqrt(2.0)
D = DisorderParam(T_HALF)


class TestPhaseMeasure:
    def test_finite_validation(self):
        with pytest.raises(ValueError):
            PhaseMeasure.finite([(0.0, 0.6), (1.0, 0.6)])
        with pytest.raises(ValueError):
            PhaseMeasure.finite([])

    def test_nontrivial(self):
        assert not PhaseMeasure.point(0.3).nontrivial
        assert PhaseMeasure.bernoulli(0.0, 1.0, 0.5).nontrivial
        assert PhaseMeasure.uniform().nontrivial

    def test_pi_bernoulli_atoms(self):
        mu = PhaseMeasure.pi_bernoulli(0.4, 0.3)
        assert mu.support_angles == pytest.approx([0.4, 0.4 + np.pi])
        assert mu.probabilities == pytest.approx([0.3, 0.7])

    def test_sampling_law(self):
        mu = PhaseMeasure.bernoulli(0.0, 1.0, 0.25)
        rng = np.random.default_rng(0)
        draws = mu.sample(rng, 40_000)
        assert np.mean(draws == 0.0) == pytest.approx(0.25, abs=0.01)


class TestRealizationStream:
    def test_reproducible(self):
        mu = PhaseMeasure.uniform()
        a = RealizationStream(5, 2).pair_angles(mu, 50)
        b = RealizationStream(5, 2).pair_angles(mu, 50)
        assert np.array_equal(a, b)

    def test_independent_indices(self):
        mu = PhaseMeasure.uniform()
        a = RealizationStream(5, 0).pair_angles(mu, 50)
        b = RealizationStream(5, 1).pair_angles(mu, 50)
        assert not np.array_equal(a, b)

    def test_dimer_pairs_identical(self):
        mu = PhaseMeasure.uniform()
        pairs = RealizationStream(5, 0, "dimer").pair_angles(mu, 50)
        assert np.array_equal(pairs[:, 0], pairs[:, 1])

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            RealizationStream(0, 0, "weird")


class TestRenormalizedProduct:
    def test_trivial_measure_zero(self):
        mu = PhaseMeasure.point(0.0)
        for n in (1, 10, 500):
            val, _ = renormalized_log_norm(RealizationStream(0, 0), 0.0, mu, D, n)
            assert abs(val) < 1e-12

    @pytest.mark.parametrize(
        "mu",
        [
            PhaseMeasure.uniform(),
            PhaseMeasure.pi_bernoulli(0.0, 0.5),
            PhaseMeasure.bernoulli(0.3, 1.2, 0.4),
        ],
        ids=["uniform", "pi-bernoulli", "bernoulli"],
    )
    def test_matches_naive_product(self, mu):
        """Oracle: dense product of the raw factors for short chains."""
        lam = 0.7
        for trial in range(100):
            stream = RealizationStream(99, trial)
            n = 5 + trial % 26  # up to 30
            val, _ = renormalized_log_norm(stream, lam, mu, D, n)
            kind, a, b = _realization_factors(stream, lam, mu, D, n, framed=False)
            factors = a[b] if kind == "table" else a
            prod = np.eye(2, dtype=complex)
            for f in factors:
                prod = f @ prod
            naive = np.log(mat_norm(prod))
            assert val == pytest.approx(naive, rel=1e-10, abs=1e-10)

    def test_history_consistent(self):
        mu = PhaseMeasure.uniform()
        val, hist = renormalized_log_norm(
            RealizationStream(3, 0), 0.2, mu, D, 200, history=True
        )
        assert hist is not None and len(hist) == 200
        assert val == pytest.approx(hist[-1])
        # history must agree with the no-history value at each prefix length
        v50, _ = renormalized_log_norm(RealizationStream(3, 0), 0.2, mu, D, 50)
        assert v50 == pytest.approx(hist[49], rel=1e-12, abs=1e-9)

    def test_subadditive_consistency(self):
        """ln||T_{n+m}|| <= ln||T_n|| + ln||second block|| + frame slack."""
        mu = PhaseMeasure.uniform()
        stream = RealizationStream(17, 0)
        kind, factors, _ = _realization_factors(stream, 0.9, mu, D, 60, framed=False)
        P, Pinv = eigen_frame(D)
        prod = lambda fs: np.log(mat_norm(np.linalg.multi_dot([*fs[::-1]])))
        full = prod(factors)
        first, second = prod(factors[:30]), prod(factors[30:])
        assert full <= first + second + 1e-9


class TestEstimators:
    def test_requires_two_realizations(self):
        with pytest.raises(ValueError):
            estimate_lyapunov(0.0, PhaseMeasure.uniform(), D, 10, 1, 0)

    def test_deterministic_across_workers(self):
        mu = PhaseMeasure.uniform()
        e1 = estimate_lyapunov(0.5, mu, D, 500, 8, 7, workers=1)
        e4 = estimate_lyapunov(0.5, mu, D, 500, 8, 7, workers=4)
        assert e1 == e4  # bitwise

    def test_single_matrix_hyperbolic(self):
        """Trivial measure: the estimate is the log spectral radius."""
        mu = PhaseMeasure.point(0.0)
        lam = 2.0  # |tr T(2,2)| > 2 at t = 1/sqrt(2)
        from ualyap.core import transfer_matrix

        T = transfer_matrix(lam, lam, D)
        expected = float(np.log(np.abs(np.linalg.eigvals(T)).max()))
        e = estimate_lyapunov(lam, mu, D, 4000, 4, 0)
        assert e.mean == pytest.approx(expected, rel=1e-2)

    def test_single_matrix_elliptic(self):
        mu = PhaseMeasure.point(0.0)
        lam = 0.3  # |tr| < 2: bounded powers
        e = estimate_lyapunov(lam, mu, D, 4000, 4, 0)
        assert abs(e.mean) < 1e-3

    def test_gamma_nonnegative(self):
        mu = PhaseMeasure.pi_bernoulli(0.0, 0.5)
        for i, lam in enumerate((0.0, 0.4, 1.0, 3.0)):
            e = estimate_lyapunov(lam, mu, D, 2000, 8, derive_seed(11, i))
            assert e.mean >= -3.0 * e.stderr

    def test_second_moment_trivial(self):
        val = estimate_second_moment(0.0, PhaseMeasure.point(0.0), D, 100, 4, 0)
        assert val == pytest.approx(0.0, abs=1e-20)

    def test_second_moment_grows_like_n_gamma_sq(self):
        mu = PhaseMeasure.bernoulli(0.0, np.pi / 2, 0.5)
        lam, n = 1.0, 4000
        e = estimate_lyapunov(lam, mu, D, n, 32, 3)
        sm = estimate_second_moment(lam, mu, D, n, 32, 3)
        assert sm == pytest.approx(n * e.mean**2, rel=0.05)

    def test_sweep_matches_pointwise(self):
        mu = PhaseMeasure.uniform()
        [e] = sweep([0.8], mu, D, 300, 4, 21)
        direct = estimate_lyapunov(0.8, mu, D, 300, 4, derive_seed(21, 0))
        assert e == direct

    def test_sweep_rejects_empty(self):
        with pytest.raises(ValueError):
            sweep([], PhaseMeasure.uniform(), D, 10, 2, 0)

    def test_sweep_dips_at_criticals(self):
        mu = PhaseMeasure.pi_bernoulli(0.0, 0.5)
        grid = [0.0, 1.0, np.pi, 4.0]
        ests = sweep(grid, mu, D, 20_000, 8, 5)
        assert ests[0].mean < 0.05 and ests[2].mean < 0.05
        assert ests[1].mean > 0.3 and ests[3].mean > 0.3


class TestClassification:
    def test_positive(self):
        mu = PhaseMeasure.pi_bernoulli(0.0, 0.5)
        bud = ClassifyBudget(n_ladder=(500, 2000, 8000), R=64,
                             sup_chain=10_000, sup_realizations=2)
        rep = classify_quasi_energy(1.0, mu, D, budget=bud, seed=1)
        assert rep.classification == "positive"

    def test_diffusive_critical(self):
        mu = PhaseMeasure.pi_bernoulli(0.0, 0.5)
        bud = ClassifyBudget(n_ladder=(1000, 4000, 16_000), R=1000,
                             sup_chain=50_000, sup_realizations=2)
        th = ClassifyThresholds(diffusive_drift=0.20)
        rep = classify_quasi_energy(0.0, mu, D, thresholds=th, budget=bud, seed=1)
        assert rep.classification == "diffusive-critical"
        assert rep.sup_norm_log > np.log(50.0)

    def test_bounded_critical_dimer(self):
        mu = PhaseMeasure.bernoulli(0.0, 0.3, 0.5)
        bud = ClassifyBudget(n_ladder=(500, 2000, 8000), R=64,
                             sup_chain=100_000, sup_realizations=2)
        rep = classify_quasi_energy(0.0, mu, D, budget=bud, seed=1, mode="dimer")
        assert rep.classification == "bounded-critical"
        assert rep.sup_norm_log < np.log(50.0)


class TestPhi:
    def test_trivial(self):
        est = phi(0.0, ProjPoint([1.0, 0.5]), PhaseMeasure.point(0.0), D)
        assert est.value == pytest.approx(0.0, abs=1e-14)
        assert est.stderr == 0.0

    def test_exact_matches_monte_carlo(self):
        atoms = [(0.0, 0.5), (np.pi / 2, 0.5)]
        mu_exact = PhaseMeasure.finite(atoms)

        def sampler(rng, size):
            angs = np.array([a for a, _ in atoms])
            return angs[rng.choice(2, size=size, p=[0.5, 0.5])]

        mu_mc = PhaseMeasure("custom", sampler=sampler)
        v = ProjPoint([1.0, 0.7 - 0.2j])
        exact = phi(0.7, v, mu_exact, D)
        mc = phi(0.7, v, mu_mc, D, n_samples=20_000, seed=2)
        assert abs(exact.value - mc.value) <= 3.0 * mc.stderr

    def test_lipschitz_ratio_stable_under_refinement(self):
        mu = PhaseMeasure.bernoulli(0.0, np.pi / 2, 0.5)
        v = ProjPoint([1.0, 0.3])

        def fitted_C(h):
            lams = np.arange(0.2, 1.2, h)
            vals = np.array([phi(l, v, mu, D).value for l in lams])
            dists = np.abs(np.exp(1j * lams[1:]) - np.exp(1j * lams[:-1]))
            return np.max(np.abs(np.diff(vals)) / dists)

        c1, c2 = fitted_C(0.02), fitted_C(0.01)
        assert c2 <= 1.5 * c1


class TestInvariantMeasure:
    def test_converges_where_positive(self):
        mu = PhaseMeasure.pi_bernoulli(0.0, 0.5)
        nu = empirical_invariant_measure(1.0, mu, D, 2000, 20_000, seed=4)
        assert nu.converged
        assert nu.histogram.sum() == pytest.approx(1.0)

    def test_flagged_at_critical(self):
        mu = PhaseMeasure.pi_bernoulli(0.0, 0.5)
        nu = empirical_invariant_measure(0.0, mu, D, 2000, 20_000, seed=4)
        assert not nu.converged

    def test_one_step_invariance(self):
        """Pushing the empirical measure forward by one random step leaves
        the histogram nearly unchanged."""
        from ualyap.lyapunov import _transfer_batch, _uv_histogram

        mu = PhaseMeasure.pi_bernoulli(0.0, 0.5)
        lam = 1.0
        nu = empirical_invariant_measure(lam, mu, D, 2000, 20_000, seed=4)
        rng = np.random.default_rng(8)
        pairs = mu.sample(rng, 2 * len(nu.points)).reshape(-1, 2)
        factors = _transfer_batch(pairs[:, 0] + lam, pairs[:, 1] + lam, D)
        pushed = np.einsum("nij,nj->ni", factors, nu.points)
        pushed /= np.abs(pushed).max(axis=1, keepdims=True)
        dist = np.abs(_uv_histogram(pushed) - nu.histogram).sum()
        assert dist < 0.25

    def test_weak_continuity(self):
        mu = PhaseMeasure.pi_bernoulli(0.0, 0.5)
        nu1 = empirical_invariant_measure(1.0, mu, D, 2000, 20_000, seed=4)
        nu2 = empirical_invariant_measure(1.0 + 1e-3, mu, D, 2000, 20_000, seed=4)
        assert np.abs(nu1.histogram - nu2.histogram).sum() < 0.25


class TestCrossCheck:
    def test_agreement_off_critical(self):
        mu = PhaseMeasure.bernoulli(0.0, np.pi / 2, 0.5)
        res = furstenberg_cross_check(0.7, mu, D, seed=5)
        assert res.converged and res.agreement

    def test_single_hyperbolic_matrix(self):
        from ualyap.core import transfer_matrix

        mu = PhaseMeasure.point(0.0)
        lam = 2.0
        T = transfer_matrix(lam, lam, D)
        expected = float(np.log(np.abs(np.linalg.eigvals(T)).max()))
        res = furstenberg_cross_check(
            lam, mu, D, budgets=CrossCheckBudget(n=2000, R=8), seed=5
        )
        assert res.gamma_direct.mean == pytest.approx(expected, rel=1e-2)
        assert res.gamma_integral == pytest.approx(expected, rel=1e-2)

    def test_flagged_at_critical(self):
        mu = PhaseMeasure.pi_bernoulli(0.0, 0.5)
        res = furstenberg_cross_check(0.0, mu, D, seed=5)
        assert not res.agreement
