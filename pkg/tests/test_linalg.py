import numpy as np
import pytest

from tcalign import (
    CovarianceAccumulator,
    InsufficientSamples,
    InvalidInput,
    SingularMatrix,
    correlation_distance,
    covariance,
    shrink,
    spd_power,
    sym_eig,
)
from conftest import make_spd, make_symmetric


class TestCovariance:
    def test_two_symmetric_points(self):
        mean, sigma = covariance([[1.0, 0.0], [-1.0, 0.0]])
        assert np.array_equal(mean, [0.0, 0.0])
        assert np.array_equal(sigma, [[2.0, 0.0], [0.0, 0.0]])

    def test_identical_rows_zero_covariance(self):
        mean, sigma = covariance([[1.0, 1.0], [1.0, 1.0]])
        assert np.array_equal(mean, [1.0, 1.0])
        assert np.array_equal(sigma, np.zeros((2, 2)))

    def test_unit_variance_column(self):
        mean, sigma = covariance([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        assert np.allclose(mean, [1.0, 0.0])
        assert np.allclose(sigma, [[1.0, 0.0], [0.0, 0.0]])

    def test_single_row_rejected(self):
        with pytest.raises(InsufficientSamples):
            covariance([[1.0, 2.0]])

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInput):
            covariance([[1.0, np.nan], [0.0, 1.0]])

    def test_row_permutation_invariance(self, rng):
        z = rng.standard_normal((40, 5))
        mean_a, sigma_a = covariance(z)
        perm = rng.permutation(40)
        mean_b, sigma_b = covariance(z[perm])
        assert np.allclose(mean_a, mean_b, rtol=1e-10, atol=1e-12)
        assert np.linalg.norm(sigma_a - sigma_b) <= 1e-10 * np.linalg.norm(sigma_a)

    def test_output_is_psd(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 30))
            d = int(rng.integers(1, 8))
            _, sigma = covariance(rng.standard_normal((n, d)) * 10)
            floor = -1e-9 * max(1.0, np.trace(sigma))
            assert np.linalg.eigvalsh(sigma).min() >= floor


class TestCorrelationDistance:
    def test_identical_matrices(self, rng):
        a = make_symmetric(rng, 4)
        assert correlation_distance(a, a) == 0.0

    def test_identity_vs_zero(self):
        assert correlation_distance(np.eye(2), np.zeros((2, 2))) == 0.125

    def test_matches_elementwise_oracle(self, rng):
        a = make_symmetric(rng, 3)
        b = make_symmetric(rng, 3)
        acc = 0.0
        for i in range(3):
            for j in range(3):
                acc += (a[i, j] - b[i, j]) ** 2
        expected = acc / (4 * 3 * 3)
        assert correlation_distance(a, b) == pytest.approx(expected, rel=1e-14)

    def test_symmetric_in_arguments(self, rng):
        a = make_symmetric(rng, 5)
        b = make_symmetric(rng, 5)
        assert correlation_distance(a, b) == correlation_distance(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInput):
            correlation_distance(np.eye(2), np.eye(3))


class TestShrink:
    def test_floor_only(self):
        out = shrink(np.eye(2), 0.0)
        assert np.allclose(out, np.eye(2) * (1.0 + 1e-12), rtol=0, atol=1e-18)

    def test_trace_scaled_ridge(self):
        out = shrink(np.diag([2.0, 2.0]), 0.5)
        assert np.allclose(np.diag(out), 3.0 + 1e-12)

    def test_zero_matrix_gets_floor(self):
        out = shrink(np.zeros((4, 4)), 0.1)
        assert np.allclose(out, 1e-12 * np.eye(4), rtol=0, atol=1e-20)

    def test_asymmetric_rejected(self):
        bad = np.array([[1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(InvalidInput):
            shrink(bad, 0.1)

    def test_makes_psd_matrix_definite(self, rng):
        _, sigma = covariance(rng.standard_normal((3, 8)))  # rank-deficient
        out = shrink(sigma, 1e-3)
        assert np.linalg.eigvalsh(out).min() > 0


class TestSymEig:
    def test_identity(self):
        eig = sym_eig(np.eye(3))
        assert np.allclose(eig.values, [1.0, 1.0, 1.0])

    def test_diagonal_ascending_signed_permutation(self):
        eig = sym_eig(np.diag([3.0, 2.0]))
        assert np.allclose(eig.values, [2.0, 3.0])
        assert np.allclose(np.abs(eig.vectors), [[0.0, 1.0], [1.0, 0.0]])

    def test_reconstruction_oracle(self, rng):
        a = make_symmetric(rng, 5, scale=3.0)
        eig = sym_eig(a)
        rebuilt = eig.vectors @ np.diag(eig.values) @ eig.vectors.T
        assert np.linalg.norm(rebuilt - a) <= 1e-8 * np.linalg.norm(a)

    def test_orthogonality(self, rng):
        eig = sym_eig(make_symmetric(rng, 6))
        assert np.linalg.norm(eig.vectors @ eig.vectors.T - np.eye(6)) <= 1e-8

    def test_deterministic_repeat(self, rng):
        a = make_symmetric(rng, 4)
        e1 = sym_eig(a)
        e2 = sym_eig(a.copy())
        assert np.array_equal(e1.values, e2.values)
        assert np.array_equal(e1.vectors, e2.vectors)

    def test_sign_convention(self, rng):
        eig = sym_eig(make_symmetric(rng, 5))
        for col in eig.vectors.T:
            assert col[np.argmax(np.abs(col))] >= 0

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidInput):
            sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_one_by_one(self):
        eig = sym_eig(np.array([[4.0]]))
        assert eig.values[0] == 4.0
        assert eig.vectors[0, 0] == 1.0


class TestSpdPower:
    def test_identity_sqrt(self):
        assert np.allclose(spd_power(np.eye(3), 0.5), np.eye(3))

    def test_diagonal_powers(self):
        s = np.diag([4.0, 9.0])
        assert np.allclose(spd_power(s, 0.5), np.diag([2.0, 3.0]))
        assert np.allclose(spd_power(s, -0.5), np.diag([0.5, 1.0 / 3.0]))

    def test_sqrt_squares_back(self, rng):
        s = make_spd(rng, 4, cond=50.0)
        root = spd_power(s, 0.5)
        assert np.linalg.norm(root @ root - s) <= 1e-8 * np.linalg.norm(s)

    def test_sqrt_times_inverse_sqrt_is_identity(self, rng):
        for cond in (10.0, 1e3, 1e6):
            s = make_spd(rng, 5, cond=cond)
            prod = spd_power(s, 0.5) @ spd_power(s, -0.5)
            assert np.linalg.norm(prod - np.eye(5)) <= 1e-8

    def test_negative_power_of_singular_rejected(self):
        with pytest.raises(SingularMatrix):
            spd_power(np.diag([1.0, 0.0]), -0.5)

    def test_fractional_power_of_indefinite_rejected(self):
        with pytest.raises(SingularMatrix):
            spd_power(np.diag([1.0, -1.0]), 0.5)


class TestCovarianceAccumulator:
    def test_single_batch_equals_covariance(self, rng):
        z = rng.standard_normal((25, 4))
        acc = CovarianceAccumulator(4).update(z)
        mean, sigma = acc.finalize()
        mean_ref, sigma_ref = covariance(z)
        assert np.allclose(mean, mean_ref, rtol=1e-12)
        assert np.allclose(sigma, sigma_ref, rtol=1e-12)

    def test_one_eight_rest_partition_matches_batch_oracle(self, rng):
        z = rng.standard_normal((40, 3)) * 5 + 2
        acc = CovarianceAccumulator(3)
        acc.update(z[:1])
        acc.update(z[1:9])
        acc.update(z[9:])
        mean, sigma = acc.finalize()
        mean_ref, sigma_ref = covariance(z)
        assert np.linalg.norm(mean - mean_ref) <= 1e-10 * max(1.0, np.linalg.norm(mean_ref))
        assert np.linalg.norm(sigma - sigma_ref) <= 1e-10 * np.linalg.norm(sigma_ref)

    def test_empty_finalize_rejected(self):
        with pytest.raises(InsufficientSamples):
            CovarianceAccumulator(2).finalize()

    def test_single_row_finalize_rejected(self):
        acc = CovarianceAccumulator(2).update([[1.0, 2.0]])
        with pytest.raises(InsufficientSamples):
            acc.finalize()

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInput):
            CovarianceAccumulator(3).update([[1.0, 2.0]])

    def test_random_partitions_match_batch(self, rng):
        z = rng.standard_normal((120, 6)) * 3
        _, sigma_ref = covariance(z)
        for _ in range(15):
            cuts = np.sort(rng.choice(np.arange(1, 120), size=int(rng.integers(0, 8)), replace=False))
            acc = CovarianceAccumulator(6)
            for part in np.split(z, cuts):
                if len(part):
                    acc.update(part)
            _, sigma = acc.finalize()
            assert np.linalg.norm(sigma - sigma_ref) <= 1e-10 * np.linalg.norm(sigma_ref)

    def test_merge_matches_sequential(self, rng):
        z = rng.standard_normal((60, 3))
        left = CovarianceAccumulator(3).update(z[:20])
        right = CovarianceAccumulator(3).update(z[20:])
        left.merge(right)
        mean, sigma = left.finalize()
        mean_ref, sigma_ref = covariance(z)
        assert np.allclose(mean, mean_ref, rtol=1e-11)
        assert np.linalg.norm(sigma - sigma_ref) <= 1e-10 * np.linalg.norm(sigma_ref)

    def test_merge_associativity(self, rng):
        z = rng.standard_normal((30, 2))
        parts = [z[:5], z[5:12], z[12:]]

        def build(order):
            accs = [CovarianceAccumulator(2).update(p) for p in parts]
            merged = accs[order[0]]
            for i in order[1:]:
                merged.merge(accs[i])
            return merged.finalize()

        _, sig_a = build([0, 1, 2])
        # merging (1, 2) first then 0 reaches the same totals
        acc_bc = CovarianceAccumulator(2).update(parts[1]).merge(
            CovarianceAccumulator(2).update(parts[2])
        )
        acc_a = CovarianceAccumulator(2).update(parts[0]).merge(acc_bc)
        _, sig_b = acc_a.finalize()
        assert np.linalg.norm(sig_a - sig_b) <= 1e-10 * np.linalg.norm(sig_a)

    def test_scatter_stays_symmetric(self, rng):
        acc = CovarianceAccumulator(4)
        for _ in range(10):
            acc.update(rng.standard_normal((int(rng.integers(1, 7)), 4)) * 100)
        assert np.max(np.abs(acc.scatter - acc.scatter.T)) <= 1e-12
