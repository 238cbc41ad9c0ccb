"""Exact risk of tuned ridge regression on a two-point heteroscedastic
distribution where more data hurts.

The covariate distribution puts mass 1-eps on (e_1, 1) (a clean coordinate)
and mass eps on (e_2, +-A) with a uniform random sign (a noisy coordinate).
The best linear predictor is beta* = (1, 0), and the population risk of any
estimate is

    R(b) = (1-eps) (b_1 - 1)^2 + eps (b_2^2 + A^2).

With n restricted to {1, 2} every sample configuration can be enumerated,
so expected risks are exact closed forms in u = 1/(1+lambda) and
v = 1/(2+lambda) - no Monte Carlo noise.  Tuning lambda separately for
n = 1 and n = 2 exhibits risk that increases with the sample count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import accumulate_blocks, substream
from .spectrum import RiskEstimate
from .tuning import LambdaSearchResult, minimize_over_lambda

__all__ = [
    "TwoPointDistribution",
    "CounterexampleReport",
    "exact_expected_risk",
    "optimal_counterexample",
    "verify_nonmonotonicity",
    "mc_expected_risk",
    "clean_conditional_risk",
    "noisy_conditional_risk",
]


@dataclass(frozen=True)
class TwoPointDistribution:
    """Noisy-coordinate magnitude A and noisy-coordinate probability eps."""

    A: float = 20.0
    eps: float = 0.02

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("A must be > 0")
        if not 0 < self.eps < 1:
            raise ValueError("eps must be in (0, 1)")

    @property
    def null_risk(self) -> float:
        """Risk of the zero estimator (lambda -> infinity)."""
        return (1 - self.eps) + self.eps * self.A**2


def exact_expected_risk(n: int, lam: float, dist: TwoPointDistribution) -> float:
    """Exact expected test risk of ridge with parameter lam on n samples.

    n = 1 enumerates {clean} and {noisy}; n = 2 enumerates {clean, clean},
    {clean, noisy} and {noisy, noisy} (the latter split by sign agreement).
    ``lam = inf`` gives the null-estimator risk.
    """
    if n not in (1, 2):
        raise ValueError("exact enumeration supports n in {1, 2} only")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    A, eps = dist.A, dist.eps
    if math.isinf(lam):
        return dist.null_risk
    u = 1.0 / (1.0 + lam)
    if n == 1:
        # clean draw w.p. 1-eps: estimate (u, 0); noisy: (0, +-A u)
        risk_clean = (1 - eps) * (u - 1) ** 2 + eps * A**2
        risk_noisy = (1 - eps) + eps * (A**2 * u**2 + A**2)
        return (1 - eps) * risk_clean + eps * risk_noisy
    v = 1.0 / (2.0 + lam)
    risk_cc = (1 - eps) * (2 * v - 1) ** 2 + eps * A**2
    risk_cn = (1 - eps) * (u - 1) ** 2 + eps * (A**2 * u**2 + A**2)
    risk_nn_same = (1 - eps) + eps * (4 * A**2 * v**2 + A**2)
    risk_nn_opposite = (1 - eps) + eps * A**2
    return (
        (1 - eps) ** 2 * risk_cc
        + 2 * eps * (1 - eps) * risk_cn
        + eps**2 * 0.5 * (risk_nn_same + risk_nn_opposite)
    )


def clean_conditional_risk(lam: float, dist: TwoPointDistribution) -> float:
    """n = 1 risk conditioned on having drawn the clean coordinate."""
    u = 1.0 / (1.0 + lam)
    return (1 - dist.eps) * (u - 1) ** 2 + dist.eps * dist.A**2


def noisy_conditional_risk(lam: float, dist: TwoPointDistribution) -> float:
    """n = 1 risk conditioned on having drawn the noisy coordinate."""
    u = 1.0 / (1.0 + lam)
    return (1 - dist.eps) + dist.eps * (dist.A**2 * u**2 + dist.A**2)


def analytic_lambda_one(dist: TwoPointDistribution) -> float:
    """Closed-form minimizer of the n = 1 risk: eps^2 A^2 / (1-eps)^2."""
    return dist.eps**2 * dist.A**2 / (1 - dist.eps) ** 2


def optimal_counterexample(n: int, dist: TwoPointDistribution) -> LambdaSearchResult:
    """Minimize the exact n-sample risk over lambda >= 0.

    For n = 1 the search result is polished to the analytic minimizer,
    which is also attached as ``analytic_lambda`` for cross-checking.
    """
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    hi = 10.0 * (1.0 + dist.A**2)
    result = minimize_over_lambda(
        lambda lam: exact_expected_risk(n, lam, dist),
        lo=0.0,
        hi=hi,
        rel_tol=1e-7,
        null_risk=dist.null_risk,
    )
    if n == 1:
        lam1 = analytic_lambda_one(dist)
        value = exact_expected_risk(1, lam1, dist)
        return LambdaSearchResult(
            lambda_opt=lam1,
            risk_at_opt=value,
            bracket=result.bracket,
            evaluations=result.evaluations,
            converged=abs(result.lambda_opt - lam1) <= 1e-4 * max(lam1, 1e-12),
            analytic_lambda=lam1,
        )
    return result


@dataclass(frozen=True)
class CounterexampleReport:
    risk_one: float
    risk_two: float
    gap: float
    lambda_one: float
    lambda_two: float

    @property
    def nonmonotonic(self) -> bool:
        return self.gap > 0


def verify_nonmonotonicity(dist: TwoPointDistribution) -> CounterexampleReport:
    """Tuned risks at n = 1 and n = 2 and their gap (positive gap means
    more data hurt).  No assertion is made about the gap's sign; for the
    standard (A=20, eps=0.02) instance it is positive."""
    one = optimal_counterexample(1, dist)
    two = optimal_counterexample(2, dist)
    return CounterexampleReport(
        risk_one=one.risk_at_opt,
        risk_two=two.risk_at_opt,
        gap=two.risk_at_opt - one.risk_at_opt,
        lambda_one=one.lambda_opt,
        lambda_two=two.lambda_opt,
    )


def mc_expected_risk(
    n: int,
    lam: float,
    dist: TwoPointDistribution,
    trials: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    """Monte-Carlo oracle for the exact enumeration.

    Simulates the ridge estimator on the two-point distribution directly.
    The design is axis-aligned, so the normal equations are diagonal:
    b_1 = (sum of clean responses) / (#clean + lam), similarly for b_2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    A, eps = dist.A, dist.eps

    def block_fn(block: int, start: int, count: int) -> np.ndarray:
        rng = substream(seed, block)
        noisy = rng.random((count, n)) < eps
        signs = np.where(rng.random((count, n)) < 0.5, -1.0, 1.0)
        n_clean = (~noisy).sum(axis=1)
        sum_clean = n_clean.astype(float)  # clean responses are all 1
        sum_noisy = (noisy * signs * A).sum(axis=1)
        # lam = 0 with an unobserved coordinate is the pseudoinverse limit:
        # that coordinate's estimate is 0 (0/0 -> 0).
        den1 = n_clean + lam
        den2 = (n - n_clean) + lam
        b1 = np.divide(sum_clean, den1, out=np.zeros(count), where=den1 > 0)
        b2 = np.divide(sum_noisy, den2, out=np.zeros(count), where=den2 > 0)
        return (1 - eps) * (b1 - 1.0) ** 2 + eps * (b2**2 + A**2)

    acc = accumulate_blocks(block_fn, trials, workers=workers)
    return RiskEstimate(
        mean=float(acc.mean),
        std_error=float(acc.std_error),
        trials=trials,
        lam=lam,
    )
