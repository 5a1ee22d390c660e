"""Dense linear algebra for small symmetric matrices.

Everything here operates on float64 regardless of what precision the caller
hands in: eigensolves on near-singular covariances are the accuracy
bottleneck of the whole alignment pipeline, so inputs are upcast on entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamples, InvalidInput, NumericalFailure, SingularMatrix

SHRINK_FLOOR = 1e-12
SYMMETRY_ATOL = 1e-9


def validate_embeddings(z, name: str = "embeddings") -> np.ndarray:
    """Check an n x d embedding matrix and return it as a float64 array."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise InvalidInput(f"{name} must be a 2-D matrix, got ndim={z.ndim}")
    if z.shape[0] < 1 or z.shape[1] < 1:
        raise InvalidInput(f"{name} must have at least one row and one column, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return z


def _square(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {a.shape}")
    return a


def _check_symmetric(a: np.ndarray, name: str) -> None:
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_ATOL:
        raise InvalidInput(f"{name} is not symmetric within {SYMMETRY_ATOL}")


def covariance(z) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and unbiased sample covariance of an n x d batch.

    Uses the centered-scatter form (Z - mean)^T (Z - mean) / (n - 1); the
    result is symmetrized to kill the last-bit asymmetry of the matmul.
    """
    z = validate_embeddings(z)
    n = z.shape[0]
    if n < 2:
        raise InsufficientSamples(f"covariance needs at least 2 rows, got {n}")
    mean = z.mean(axis=0)
    centered = z - mean
    sigma = centered.T @ centered / (n - 1)
    sigma = (sigma + sigma.T) / 2.0
    return mean, sigma


def correlation_distance(a, b) -> float:
    """Covariance discrepancy ||a - b||_F^2 / (4 d^2) between two d x d matrices."""
    a = _square(a, "a")
    b = _square(b, "b")
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a.shape[0]
    diff = a - b
    return float(np.sum(diff * diff) / (4.0 * d * d))


def shrink(sigma, eps: float) -> np.ndarray:
    """Trace-scaled ridge: sigma + (eps * trace/d + floor) * I.

    Keeps inverse square roots finite when sigma is rank-deficient, e.g. a
    pseudo-source covariance built from fewer samples than dimensions.
    """
    sigma = _square(sigma, "sigma")
    _check_symmetric(sigma, "sigma")
    if eps < 0:
        raise InvalidInput(f"eps must be >= 0, got {eps}")
    d = sigma.shape[0]
    lam = eps * float(np.trace(sigma)) / d + SHRINK_FLOOR
    return sigma + lam * np.eye(d)


@dataclass
class EigPair:
    """Orthogonal eigenvectors (columns) and ascending eigenvalues of a symmetric matrix."""

    vectors: np.ndarray
    values: np.ndarray


def sym_eig(sigma) -> EigPair:
    """Deterministic symmetric eigendecomposition, eigenvalues ascending.

    Sign convention: the largest-magnitude component of each eigenvector is
    made nonnegative (first such index on ties), so repeated calls on the
    same input yield identical output.
    """
    sigma = _square(sigma, "sigma")
    _check_symmetric(sigma, "sigma")
    sym = (sigma + sigma.T) / 2.0
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition did not converge: {exc}") from exc
    # eigh returns ascending order already; fix the sign of each column
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return EigPair(vectors=vectors * signs, values=values)


def spd_power(sigma, p: float) -> np.ndarray:
    """Matrix power U diag(lambda^p) U^T of a symmetric positive definite matrix."""
    eig = sym_eig(sigma)
    min_val = float(eig.values.min()) if eig.values.size else 0.0
    if p < 0 and min_val <= 0:
        raise SingularMatrix(
            f"power {p} undefined: smallest eigenvalue {min_val:.3e} is not positive"
        )
    if p != int(p) and min_val < 0:
        raise SingularMatrix(
            f"fractional power {p} undefined for negative eigenvalue {min_val:.3e}"
        )
    powered = (eig.vectors * eig.values**p) @ eig.vectors.T
    return (powered + powered.T) / 2.0


class CovarianceAccumulator:
    """Streaming mean/scatter accumulator with exact pairwise merging.

    Batches are folded in with the standard pooled-moment correction, so
    finalize() reproduces covariance() of the concatenated rows no matter
    how the stream was partitioned. Not safe for concurrent mutation.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidInput(f"dimension must be >= 1, got {dim}")
        self.dim = int(dim)
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.scatter = np.zeros((self.dim, self.dim))

    def update(self, batch) -> "CovarianceAccumulator":
        """Fold an n x d batch into the running moments."""
        batch = validate_embeddings(batch, "batch")
        if batch.shape[1] != self.dim:
            raise InvalidInput(
                f"batch dimension {batch.shape[1]} does not match accumulator dimension {self.dim}"
            )
        n = batch.shape[0]
        bmean = batch.mean(axis=0)
        centered = batch - bmean
        bscatter = centered.T @ centered
        self._merge_moments(n, bmean, bscatter)
        return self

    def merge(self, other: "CovarianceAccumulator") -> "CovarianceAccumulator":
        """Fold another accumulator into this one (parallel-merge form)."""
        if other.dim != self.dim:
            raise InvalidInput(
                f"cannot merge accumulators of dimension {other.dim} and {self.dim}"
            )
        self._merge_moments(other.count, other.mean, other.scatter)
        return self

    def _merge_moments(self, n: int, mean: np.ndarray, scatter: np.ndarray) -> None:
        if n == 0:
            return
        if self.count == 0:
            self.count = n
            self.mean = mean.copy()
            self.scatter = scatter.copy()
            return
        total = self.count + n
        delta = mean - self.mean
        self.scatter = (
            self.scatter + scatter + np.outer(delta, delta) * (self.count * n / total)
        )
        self.scatter = (self.scatter + self.scatter.T) / 2.0
        self.mean = self.mean + delta * (n / total)
        self.count = total

    def finalize(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (mean, sigma) over everything accumulated so far."""
        if self.count < 2:
            raise InsufficientSamples(
                f"finalize needs at least 2 accumulated rows, got {self.count}"
            )
        return self.mean.copy(), self.scatter / (self.count - 1)
