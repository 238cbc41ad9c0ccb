"""Regression problem distributions and seeded samplers.

Samplers are pure functions of their arguments (seed included) and are safe
to call concurrently.  Gaussian designs are produced through the Cholesky
factor of the covariance; random projections through QR orthonormalization
of a Gaussian matrix with the sign correction that makes the rows
Haar-distributed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import substream

__all__ = [
    "GaussianProblem",
    "ProjectionProblem",
    "SampleBatch",
    "sample_design",
    "sample_responses",
    "sample_batch",
    "sample_orthonormal",
]


def _check_covariance(covariance: np.ndarray) -> np.ndarray:
    cov = np.asarray(covariance, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    scale = max(np.abs(cov).max(), 1.0)
    if np.abs(cov - cov.T).max() > 1e-10 * scale:
        raise ValueError("covariance must be symmetric")
    eigenvalues = np.linalg.eigvalsh(cov)
    if eigenvalues[0] <= 0:
        raise ValueError(
            f"covariance is not positive definite: smallest eigenvalue "
            f"{eigenvalues[0]:.6g} <= 0"
        )
    return cov


@dataclass(frozen=True)
class GaussianProblem:
    """A linear regression data distribution x ~ N(0, covariance),
    y = <x, beta_star> + N(0, sigma^2)."""

    d: int
    covariance: np.ndarray
    beta_star: np.ndarray
    sigma: float

    def __post_init__(self):
        cov = _check_covariance(self.covariance)
        beta = np.asarray(self.beta_star, dtype=float)
        if self.d != beta.shape[0] or cov.shape[0] != self.d:
            raise ValueError(
                f"dimension mismatch: d={self.d}, beta_star has "
                f"{beta.shape[0]} entries, covariance side {cov.shape[0]}"
            )
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "beta_star", beta)

    @classmethod
    def isotropic(cls, d: int, beta_norm: float, sigma: float) -> "GaussianProblem":
        """Identity covariance with ground truth beta_norm * e_1 (isotropic
        risk depends on the truth only through its norm)."""
        beta = np.zeros(d)
        beta[0] = beta_norm
        return cls(d=d, covariance=np.eye(d), beta_star=beta, sigma=sigma)

    @property
    def beta_norm(self) -> float:
        return float(np.linalg.norm(self.beta_star))

    @property
    def is_isotropic(self) -> bool:
        return bool(np.allclose(self.covariance, np.eye(self.d), atol=1e-12))


@dataclass(frozen=True)
class ProjectionProblem:
    """Ambient regression y = <x, theta> + noise with x ~ N(0, I_p); models
    act on a random d-dimensional projection of x (d chosen per experiment)."""

    p: int
    theta: np.ndarray
    sigma: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (self.p,):
            raise ValueError(f"theta must have length p={self.p}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        object.__setattr__(self, "theta", theta)

    @property
    def theta_norm(self) -> float:
        return float(np.linalg.norm(self.theta))


@dataclass(frozen=True)
class SampleBatch:
    """A drawn design matrix with its responses and the seed that made it."""

    design: np.ndarray
    responses: np.ndarray
    seed: int

    def __post_init__(self):
        if self.design.ndim != 2:
            raise ValueError("design must be a matrix")
        if self.responses.shape != (self.design.shape[0],):
            raise ValueError("responses must have one entry per design row")


def sample_design(n: int, d: int, covariance: np.ndarray, seed: int) -> np.ndarray:
    """n i.i.d. rows from N(0, covariance); deterministic given seed."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if d < 1:
        raise ValueError("d must be >= 1")
    cov = _check_covariance(covariance)
    if cov.shape[0] != d:
        raise ValueError(f"covariance side {cov.shape[0]} != d={d}")
    rng = substream(seed)
    z = rng.standard_normal((n, d))
    chol = np.linalg.cholesky(cov)
    return z @ chol.T


def sample_responses(
    design: np.ndarray, beta_star: np.ndarray, sigma: float, seed: int
) -> np.ndarray:
    """y = X beta_star + N(0, sigma^2) noise; deterministic given seed."""
    design = np.asarray(design, dtype=float)
    beta = np.asarray(beta_star, dtype=float)
    if design.ndim != 2 or design.shape[1] != beta.shape[0]:
        raise ValueError(
            f"design has {design.shape[1] if design.ndim == 2 else '?'} columns "
            f"but beta_star has {beta.shape[0]} entries"
        )
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = substream(seed, 1)
    noise = sigma * rng.standard_normal(design.shape[0])
    return design @ beta + noise


def sample_batch(problem: GaussianProblem, n: int, seed: int) -> SampleBatch:
    """Draw a design and its responses from one seed (design stream and
    noise stream are distinct substreams of the seed)."""
    design = sample_design(n, problem.d, problem.covariance, seed)
    responses = sample_responses(design, problem.beta_star, problem.sigma, seed)
    return SampleBatch(design=design, responses=responses, seed=seed)


def sample_orthonormal(d: int, p: int, seed: int) -> np.ndarray:
    """Random d x p matrix with orthonormal rows, Haar-distributed.

    Obtained by QR-orthonormalizing a standard Gaussian matrix and fixing
    signs so the triangular factor has positive diagonal.
    """
    if d > p:
        raise ValueError(f"need d <= p, got d={d} > p={p}")
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = substream(seed, 2)
    g = rng.standard_normal((p, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return (q * signs).T
