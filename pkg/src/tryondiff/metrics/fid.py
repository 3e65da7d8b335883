"""Distribution distances between feature sets: Fréchet distance and the
unbiased kernel (MMD²) estimator with a cubic polynomial kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, TryonError


@dataclass
class FeatureSet:
    features: np.ndarray      # n×d
    extractor_id: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ContractError(f"features must be n×d, got {self.features.shape}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(real: FeatureSet, fake: FeatureSet) -> float:
    """Fréchet distance between Gaussian fits of two feature sets.

    The covariance-product square root is computed from the symmetrized
    product sqrt(Σr)·Σf·sqrt(Σr) with negative eigenvalues clipped at zero.
    """
    if real.d != fake.d:
        raise ContractError(f"feature dims differ: {real.d} vs {fake.d}")
    if real.n < 2 or fake.n < 2:
        raise ContractError("Fréchet distance needs at least 2 samples per set")
    if not (np.isfinite(real.features).all() and np.isfinite(fake.features).all()):
        raise TryonError("non-finite feature values")

    mu_r = real.features.mean(axis=0)
    mu_f = fake.features.mean(axis=0)
    cov_r = np.cov(real.features, rowvar=False, ddof=1)
    cov_f = np.cov(fake.features, rowvar=False, ddof=1)
    cov_r = np.atleast_2d(cov_r)
    cov_f = np.atleast_2d(cov_f)

    sqrt_r = _sqrtm_psd(cov_r)
    inner = sqrt_r @ cov_f @ sqrt_r
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    tr_sqrt = float(np.sqrt(vals).sum())

    diff = mu_r - mu_f
    return float(diff @ diff + np.trace(cov_r) + np.trace(cov_f) - 2.0 * tr_sqrt)


def _poly_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def mmd2_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    """Unbiased squared MMD with the cubic polynomial kernel."""
    m, n = len(x), len(y)
    if m < 2 or n < 2:
        raise ContractError("unbiased MMD needs at least 2 samples per set")
    k_xx = _poly_kernel(x, x)
    k_yy = _poly_kernel(y, y)
    k_xy = _poly_kernel(x, y)
    sum_xx = (k_xx.sum() - np.trace(k_xx)) / (m * (m - 1))
    sum_yy = (k_yy.sum() - np.trace(k_yy)) / (n * (n - 1))
    sum_xy = 2.0 * k_xy.mean()
    return float(sum_xx + sum_yy - sum_xy)


def kid(
    real: FeatureSet,
    fake: FeatureSet,
    subset_size: int | None = None,
    n_subsets: int = 100,
    seed: int = 0,
) -> float:
    """Kernel distance: unbiased MMD² averaged over random subsets.

    Default subset size is min(1000, n); passing a size larger than either
    set is a contract error.
    """
    if real.d != fake.d:
        raise ContractError(f"feature dims differ: {real.d} vs {fake.d}")
    n = min(real.n, fake.n)
    if subset_size is None:
        subset_size = min(1000, n)
    if subset_size > real.n or subset_size > fake.n:
        raise ContractError(
            f"subset size {subset_size} exceeds set sizes ({real.n}, {fake.n})"
        )
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(n_subsets):
        idx_r = rng.choice(real.n, subset_size, replace=False)
        idx_f = rng.choice(fake.n, subset_size, replace=False)
        vals.append(mmd2_unbiased(real.features[idx_r], fake.features[idx_f]))
    return float(np.mean(vals))
