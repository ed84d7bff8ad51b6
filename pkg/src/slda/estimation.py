"""Sample statistics and thresholding estimators: class means, pooled
covariance S (divisor n, the MLE), hard-thresholded Sigma-tilde and
delta-tilde, and the inverse / generalized-inverse strategies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotPositiveDefiniteError, ShapeError, UnusableMatrixError
from .model import Dataset
from .numerics import SpdFactor, cholesky_spd, eigen_sym, spd_solve

DEFAULT_FLOOR_EPS = 1e-8


@dataclass(frozen=True)
class ClassSummary:
    """Per-class means, pooled covariance and two-class derived vectors.

    ``delta_hat`` and ``grand_mid`` are None for K >= 3 (pairwise
    contrasts are formed from ``class_means`` instead).
    """

    class_means: np.ndarray          # (K, p)
    pooled_cov: np.ndarray           # (p, p), divisor n
    delta_hat: np.ndarray | None     # xbar_1 - xbar_2
    grand_mid: np.ndarray | None     # (xbar_1 + xbar_2)/2


def class_means(dataset: Dataset) -> np.ndarray:
    """Per-class feature means, shape (K, p)."""
    x = dataset.features
    means = np.empty((dataset.n_classes, dataset.p))
    for cls in range(1, dataset.n_classes + 1):
        means[cls - 1] = x[dataset.labels == cls].mean(axis=0)
    return means


def summarize(dataset: Dataset) -> ClassSummary:
    """Maximum likelihood class means and pooled covariance.

    S = (1/n) sum_k sum_i (x_ki - xbar_k)(x_ki - xbar_k)', divisor n
    rather than n-K; the result is symmetrized exactly.
    """
    x = dataset.features
    n, p = x.shape
    k = dataset.n_classes
    means = class_means(dataset)
    centered = np.empty_like(x)
    for cls in range(1, k + 1):
        mask = dataset.labels == cls
        centered[mask] = x[mask] - means[cls - 1]
    s = centered.T @ centered / n
    s = 0.5 * (s + s.T)
    if k == 2:
        delta = means[0] - means[1]
        mid = 0.5 * (means[0] + means[1])
    else:
        delta = None
        mid = None
    return ClassSummary(class_means=means, pooled_cov=s, delta_hat=delta, grand_mid=mid)


def compute_tn(m1: float, n: int, p: int) -> float:
    """Covariance threshold t_n = M1 sqrt(log p / n) (natural log)."""
    if p < 2:
        raise DomainError(f"compute_tn requires p >= 2, got {p}")
    if n < 1:
        raise DomainError(f"compute_tn requires n >= 1, got {n}")
    return float(m1) * math.sqrt(math.log(p) / n)


def compute_an(m2: float, n: int, p: int, alpha: float) -> float:
    """Mean-difference threshold a_n = M2 (log p / n)^alpha."""
    if p < 2:
        raise DomainError(f"compute_an requires p >= 2, got {p}")
    if n < 1:
        raise DomainError(f"compute_an requires n >= 1, got {n}")
    if not (0.0 < alpha < 0.5):
        raise DomainError(f"alpha must lie strictly inside (0, 1/2), got {alpha}")
    return float(m2) * (math.log(p) / n) ** alpha


@dataclass(frozen=True)
class SparseSymMatrix:
    """Symmetric matrix with dense diagonal and sparse off-diagonal.

    Off-diagonal entries are stored once with rows < cols; every stored
    magnitude exceeds the threshold that produced the matrix, and the
    diagonal is the source diagonal copied untouched.
    """

    dim: int
    diagonal: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @property
    def nnz_offdiag(self) -> int:
        """Number of kept strictly-upper-triangle entries."""
        return int(self.values.shape[0])

    def densify(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim))
        a[self.rows, self.cols] = self.values
        a += a.T
        a[np.diag_indices(self.dim)] = self.diagonal
        return a


def threshold_covariance(s: np.ndarray, t_n: float) -> SparseSymMatrix:
    """Keep off-diagonal entries with |s_jl| > t_n (strict); copy the diagonal.

    With t_n = 0 only exact zeros are dropped, so densifying reproduces
    the input except for those.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeError(f"threshold_covariance requires a square matrix, got {s.shape}")
    p = s.shape[0]
    iu = np.triu_indices(p, k=1)
    vals = s[iu]
    keep = np.abs(vals) > t_n
    return SparseSymMatrix(
        dim=p,
        diagonal=np.diag(s).copy(),
        rows=iu[0][keep],
        cols=iu[1][keep],
        values=vals[keep],
    )


@dataclass(frozen=True)
class ThresholdedDelta:
    """Hard-thresholded mean-difference vector with its kept-index set."""

    vector: np.ndarray   # dense, zeros where dropped
    kept: np.ndarray     # indices with |delta_hat_j| > a_n

    @property
    def q_hat(self) -> int:
        return int(self.kept.shape[0])


def threshold_delta(delta_hat: np.ndarray, a_n: float) -> ThresholdedDelta:
    """Keep components with |delta_hat_j| > a_n (strict), zero the rest."""
    if a_n < 0:
        raise DomainError(f"a_n must be >= 0, got {a_n}")
    d = np.asarray(delta_hat, dtype=float)
    keep = np.abs(d) > a_n
    out = np.where(keep, d, 0.0)
    return ThresholdedDelta(vector=out, kept=np.flatnonzero(keep))


@dataclass(frozen=True)
class InverseOperator:
    """Linear operator representing an inverse or generalized inverse.

    kind is one of "cholesky", "eigen_floor", "pseudo". ``pd_flag`` is
    True only on the clean Cholesky path; ``floor_count`` counts floored
    (eigen_floor) or zeroed (pseudo) eigenvalues.
    """

    kind: str
    dim: int
    pd_flag: bool
    floor_count: int
    _chol: SpdFactor | None = None
    _vectors: np.ndarray | None = None
    _inv_values: np.ndarray | None = None

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Apply the (generalized) inverse to a vector or matrix of columns."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.dim:
            raise ShapeError(f"apply: length {v.shape[0]} != dimension {self.dim}")
        if self.kind == "cholesky":
            return spd_solve(self._chol, v)
        w = self._vectors.T @ v
        if w.ndim == 1:
            return self._vectors @ (self._inv_values * w)
        return self._vectors @ (self._inv_values[:, None] * w)


def invert_sparse_sym(sigma_tilde: SparseSymMatrix, floor_eps: float = DEFAULT_FLOOR_EPS) -> InverseOperator:
    """Invert a thresholded covariance, falling back to an eigenvalue floor.

    Cholesky on the densified matrix is attempted first. If a pivot
    fails, eigenvalues are floored at floor_eps * lambda_max and the
    operator is flagged (pd_flag False, floor_count = number floored).
    Thresholding can destroy positive definiteness, so callers should
    surface the flag.
    """
    if floor_eps <= 0:
        raise DomainError(f"floor_eps must be > 0, got {floor_eps}")
    dense = sigma_tilde.densify()
    try:
        factor = cholesky_spd(dense)
        return InverseOperator(kind="cholesky", dim=sigma_tilde.dim,
                               pd_flag=True, floor_count=0, _chol=factor)
    except NotPositiveDefiniteError:
        pass
    eig = eigen_sym(dense)
    lam_max = float(eig.eigenvalues[0])
    if lam_max <= 0:
        raise UnusableMatrixError(
            f"thresholded covariance has no positive part (lambda_max={lam_max:.3e})"
        )
    floor = floor_eps * lam_max
    floored = np.maximum(eig.eigenvalues, floor)
    n_floored = int(np.sum(eig.eigenvalues < floor))
    return InverseOperator(kind="eigen_floor", dim=sigma_tilde.dim,
                           pd_flag=False, floor_count=n_floored,
                           _vectors=eig.eigenvectors, _inv_values=1.0 / floored)


def pseudo_inverse_sym(s: np.ndarray, rtol: float) -> InverseOperator:
    """Moore-Penrose pseudo-inverse of a symmetric matrix.

    Eigenvalues with |lambda| > rtol * max|lambda| are inverted, the
    rest zeroed. If everything falls below the cutoff the operator is
    the zero map (floor_count == dim).
    """
    if rtol <= 0:
        raise DomainError(f"rtol must be > 0, got {rtol}")
    eig = eigen_sym(np.asarray(s, dtype=float))
    absvals = np.abs(eig.eigenvalues)
    cutoff = rtol * (absvals.max() if absvals.size else 0.0)
    keep = absvals > cutoff
    inv = np.zeros_like(eig.eigenvalues)
    inv[keep] = 1.0 / eig.eigenvalues[keep]
    return InverseOperator(kind="pseudo", dim=eig.eigenvalues.shape[0],
                           pd_flag=False, floor_count=int(np.sum(~keep)),
                           _vectors=eig.eigenvectors, _inv_values=inv)


def default_pseudo_rtol(p: int) -> float:
    """Spectral-cutoff default: p times double-precision epsilon."""
    return p * np.finfo(float).eps
