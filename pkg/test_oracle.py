"""
Test script for exhaustive L0 search, coherence and exact recovery
Run with: pytest test_oracle.py -v
"""

from itertools import combinations

import numpy as np
import pytest

from dataset import Dataset, ResponseFamily
from errors import ExhaustiveCapError, ValidationError
from oracle import (
    best_subset_l0,
    exact_recovery_check,
    hard_threshold_oracle,
    mutual_coherence,
    recovery_design,
)


def small_problem(n=30, p=6, seed=0, intercept=True):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = 2.0 * X[:, 0] - 1.0 * X[:, 2] + 0.5 * rng.standard_normal(n) + 1.0
    return Dataset(X, y, intercept=intercept)


def brute_force(data, lam):
    """Plain enumeration with numpy least squares."""
    Xc, yc, _, _ = data.centered()
    best = (0.5 * float(yc @ yc), ())
    for size in range(1, data.p + 1):
        for subset in combinations(range(data.p), size):
            b, *_ = np.linalg.lstsq(Xc[:, subset], yc, rcond=None)
            resid = yc - Xc[:, subset] @ b
            value = 0.5 * float(resid @ resid) + 0.5 * lam ** 2 * size
            if value < best[0] - 1e-12:
                best = (value, subset)
    return best


@pytest.mark.parametrize("lam", [0.5, 1.5, 3.0])
def test_best_subset_matches_enumeration(lam):
    """Test the Gram-based search against direct enumeration"""
    data = small_problem(seed=1)
    solution = best_subset_l0(data, lam)
    value, subset = brute_force(data, lam)
    assert solution.subset == subset
    assert solution.l0_objective == pytest.approx(value, rel=1e-9)
    assert solution.subsets_examined == 2 ** data.p


def test_best_subset_extremes():
    """Test lambda = 0 keeps every predictor and a huge lambda keeps none"""
    data = small_problem(seed=2)
    assert best_subset_l0(data, 0.0).subset == tuple(range(data.p))
    empty = best_subset_l0(data, 1e6)
    assert empty.subset == ()
    assert np.all(empty.beta == 0)
    assert empty.intercept == pytest.approx(data.y.mean())


def test_best_subset_orthonormal_is_hard_threshold():
    """Test the L0 solution on an orthonormal design is hard-thresholding of X'y"""
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.standard_normal((30, 6)))
    z = np.array([3.0, -0.4, 1.1, 0.0, -2.5, 0.9])
    data = Dataset(Q, Q @ z, intercept=False)
    solution = best_subset_l0(data, 1.0)
    assert solution.beta == pytest.approx(hard_threshold_oracle(z, 1.0), abs=1e-10)


def test_best_subset_tie_break_is_lexicographic():
    """Test duplicated columns resolve to the lexicographically first subset"""
    rng = np.random.default_rng(4)
    x = rng.standard_normal(25)
    X = np.column_stack([x, x, rng.standard_normal(25)])
    data = Dataset(X, 2.0 * x, intercept=False)
    assert best_subset_l0(data, 0.1).subset == (0,)


def test_best_subset_is_thread_count_invariant():
    """Test the answer does not depend on n_jobs"""
    data = small_problem(p=8, seed=5)
    single = best_subset_l0(data, 1.0, n_jobs=1)
    pooled = best_subset_l0(data, 1.0, n_jobs=4)
    assert single.subset == pooled.subset
    assert np.array_equal(single.beta, pooled.beta)


def test_subset_size_is_nonincreasing_in_lambda():
    """Test a larger lambda never selects a larger subset"""
    for seed in range(5):
        data = small_problem(p=7, seed=20 + seed)
        sizes = [len(best_subset_l0(data, lam).subset) for lam in np.linspace(0.0, 8.0, 25)]
        assert np.all(np.diff(sizes) <= 0)


def test_best_subset_cap():
    """Test p above the cap is refused with a computation error"""
    rng = np.random.default_rng(6)
    data = Dataset(rng.standard_normal((40, 25)), rng.standard_normal(40))
    with pytest.raises(ExhaustiveCapError) as exc_info:
        best_subset_l0(data, 1.0)
    assert exc_info.value.status_code == 2
    assert "p exceeds exhaustive cap" in exc_info.value.detail


def test_best_subset_rejects_binomial_and_bad_lambda():
    """Test input validation"""
    X = np.random.default_rng(7).standard_normal((20, 3))
    binomial = Dataset(X, (X[:, 0] > 0).astype(float), family=ResponseFamily.BINOMIAL)
    with pytest.raises(ValidationError):
        best_subset_l0(binomial, 1.0)
    with pytest.raises(ValidationError):
        best_subset_l0(small_problem(), -1.0)


def test_subset_solution_json():
    """Test the subset JSON payload"""
    payload = best_subset_l0(small_problem(seed=8), 1.0).to_json()
    assert set(payload) == {"subset", "beta", "intercept", "l0_objective", "subsets_examined"}


def test_hard_threshold_oracle():
    """Test hard-thresholding keeps only |z| > lambda"""
    out = hard_threshold_oracle(np.array([-2.0, 0.5, 1.0, 1.5]), 1.0)
    assert list(out) == [-2.0, 0.0, 0.0, 1.5]


def test_mutual_coherence():
    """Test coherence on orthonormal, duplicated and degenerate designs"""
    Q, _ = np.linalg.qr(np.random.default_rng(9).standard_normal((10, 4)))
    assert mutual_coherence(Q) == pytest.approx(0.0, abs=1e-12)

    x = np.arange(1.0, 6.0)
    assert mutual_coherence(np.column_stack([x, -3 * x])) == pytest.approx(1.0)

    with pytest.raises(ValidationError):
        mutual_coherence(np.column_stack([x, np.zeros(5)]))
    with pytest.raises(ValidationError):
        mutual_coherence(x.reshape(-1, 1))


def test_recovery_design():
    """Test generated designs have the requested shape and sparsity"""
    X, beta = recovery_design(30, 12, 3, kind="rademacher", seed=1)
    assert X.shape == (30, 12)
    assert np.count_nonzero(beta) == 3
    assert np.allclose(np.abs(X), 1 / np.sqrt(30))
    assert np.all(np.abs(beta[beta != 0]) >= 1.0)
    with pytest.raises(ValidationError):
        recovery_design(30, 12, 3, kind="uniform")
    with pytest.raises(ValidationError):
        recovery_design(30, 12, 13)


def test_recovery_on_orthonormal_design():
    """Test a zero-coherence design recovers the support with both penalties"""
    Q, _ = np.linalg.qr(np.random.default_rng(10).standard_normal((20, 6)))
    beta = np.array([0.0, 1.5, 0.0, -2.0, 0.0, 0.0])
    record = exact_recovery_check(Q, beta)
    assert record.bound_satisfied
    assert record.recovered
    assert record.l1_support == (1, 3)
    assert record.l0_support == (1, 3)


def test_recovery_whenever_bound_holds():
    """Test that designs satisfying the coherence bound are recovered"""
    checked = 0
    for seed in range(20):
        X, beta = recovery_design(64, 12, 1 + seed % 2, kind="rademacher", seed=seed)
        record = exact_recovery_check(X, beta)
        if record.bound_satisfied:
            checked += 1
            assert record.recovered
    assert checked > 0


def test_recovery_skips_l0_above_cap():
    """Test the L0 branch is skipped and recorded when p exceeds the cap"""
    X, beta = recovery_design(40, 10, 1, seed=3)
    record = exact_recovery_check(X, beta, p_cap=5)
    assert record.l0_skipped
    assert record.l0_support is None
    payload = record.to_json()
    assert payload["l0_support"] is None
    assert set(payload) == {"mu", "k", "bound_satisfied", "recovered", "l1_support", "l0_support", "l0_skipped"}


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
