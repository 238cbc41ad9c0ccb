"""Expected test risk of isotropic ridge regression via singular spectra.

The expected risk of the ridge estimator on n isotropic Gaussian samples in
d dimensions can be written as an expectation over the singular values
(gamma_1 >= ... >= gamma_d, zero-padded when n < d) of the design matrix:

    risk(lambda) = E[ sum_i (|b|^2 lambda^2 / d + sigma^2 g_i^2)
                             / (g_i^2 + lambda)^2 ] + sigma^2

with the optimal ridge parameter constant in n:  lambda* = d sigma^2 / |b|^2,
at which each term collapses to sigma^2 / (g_i^2 + lambda*).

Monte-Carlo estimation draws spectra in fixed blocks (see `ridgelab.rng`);
risk curves over a lambda grid reuse one set of draws per n (common random
numbers), which makes monotonicity comparisons meaningful at modest trial
counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import accumulate_blocks, substream, trial_blocks

__all__ = [
    "RiskEstimate",
    "SpectrumSample",
    "singular_spectrum",
    "draw_squared_spectra",
    "draw_coupled_squared_spectra",
    "coupled_spectrum_pair",
    "risk_terms",
    "summand",
    "expected_risk_iso",
    "iso_risk_curve",
    "iso_risk_sweep",
    "optimal_lambda_iso",
    "optimal_risk_iso",
]

#: Singular values below RANK_RTOL * gamma_1 count as exact zeros in the
#: lambda -> 0+ (pseudoinverse) limit.
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class RiskEstimate:
    """A Monte-Carlo mean risk with standard error."""

    mean: float
    std_error: float
    trials: int
    lam: float
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.std_error < 0:
            raise ValueError("std_error must be >= 0")


@dataclass(frozen=True)
class SpectrumSample:
    """Sorted singular values of a design matrix, zero-padded to length d."""

    gammas: np.ndarray
    n: int
    d: int

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=float)
        if g.shape != (self.d,):
            raise ValueError(f"gammas must have length d={self.d}")
        if self.d > 1 and np.any(np.diff(g) > 1e-12 * max(g[0], 1.0)):
            raise ValueError("gammas must be sorted non-increasing")
        object.__setattr__(self, "gammas", g)

    @property
    def squared(self) -> np.ndarray:
        return self.gammas**2


def _gram_squared_spectra(x: np.ndarray) -> np.ndarray:
    """Squared singular values of a stack of matrices, padded and sorted.

    x has shape (..., n, d); the eigendecomposition runs on the smaller
    Gram side (min(n, d)^3 cost).  Returns shape (..., d), non-increasing.
    """
    n, d = x.shape[-2], x.shape[-1]
    if n == 0:
        return np.zeros(x.shape[:-2] + (d,))
    if n >= d:
        gram = np.einsum("...ij,...ik->...jk", x, x)
        g2 = np.linalg.eigvalsh(gram)
    else:
        gram = np.einsum("...ij,...kj->...ik", x, x)
        g2 = np.linalg.eigvalsh(gram)
        pad = np.zeros(x.shape[:-2] + (d - n,))
        g2 = np.concatenate([pad, g2], axis=-1)
    return np.clip(g2[..., ::-1], 0.0, None)


def singular_spectrum(design: np.ndarray) -> SpectrumSample:
    """Padded, sorted singular values of one design matrix."""
    x = np.asarray(design, dtype=float)
    if x.ndim != 2:
        raise ValueError("design must be a matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("design must be finite")
    n, d = x.shape
    g2 = _gram_squared_spectra(x)
    return SpectrumSample(gammas=np.sqrt(g2), n=n, d=d)


def draw_squared_spectra(n: int, d: int, trials: int, seed: int) -> np.ndarray:
    """(trials, d) squared singular values of i.i.d. standard Gaussian
    n x d designs, one row per trial, padded and sorted non-increasing."""
    chunks = []
    for block, start, count in trial_blocks(trials):
        x = substream(seed, block).standard_normal((count, n, d))
        chunks.append(_gram_squared_spectra(x))
    return np.concatenate(chunks, axis=0)


def draw_coupled_squared_spectra(
    n: int, d: int, trials: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Coupled squared spectra for n and n+1 rows of the same design.

    Trial t draws one (n+1) x d matrix; the first spectrum uses its first
    n rows, so the pair interlaces path by path.
    """
    lo, hi = [], []
    for block, start, count in trial_blocks(trials):
        x = substream(seed, block).standard_normal((count, n + 1, d))
        lo.append(_gram_squared_spectra(x[:, :n, :]))
        hi.append(_gram_squared_spectra(x))
    return np.concatenate(lo, axis=0), np.concatenate(hi, axis=0)


def coupled_spectrum_pair(
    n: int, d: int, covariance: np.ndarray, seed: int
) -> tuple[SpectrumSample, SpectrumSample]:
    """Spectra of X_n and of X_{n+1} = X_n plus one appended row.

    Both matrices come from the same draw, so Cauchy interlacing holds
    pathwise: gamma_i(X_{n+1}) >= gamma_i(X_n) >= gamma_{i+1}(X_{n+1}).
    """
    from .problems import sample_design

    x = sample_design(n + 1, d, covariance, seed)
    return (
        SpectrumSample(np.sqrt(_gram_squared_spectra(x[:n])), n=n, d=d),
        SpectrumSample(np.sqrt(_gram_squared_spectra(x)), n=n + 1, d=d),
    )


def risk_terms(
    g2: np.ndarray, lam: float, d: int, beta_norm: float, sigma: float
) -> np.ndarray:
    """Per-singular-value risk summand, with the lambda -> 0+ limit.

    For lambda > 0:   (|b|^2 lambda^2 / d + sigma^2 g^2) / (g^2 + lambda)^2.
    For lambda == 0 (pseudoinverse limit): sigma^2 / g^2 where g > 0 and
    |b|^2 / d on the zero pads; near-zero values below RANK_RTOL * gamma_1
    count as zeros.
    """
    g2 = np.asarray(g2, dtype=float)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0.0:
        gmax = g2.max(axis=-1, keepdims=True)
        positive = g2 > gmax * RANK_RTOL**2
        safe = np.where(positive, g2, 1.0)
        return np.where(positive, sigma**2 / safe, beta_norm**2 / d)
    return (beta_norm**2 * lam**2 / d + sigma**2 * g2) / (g2 + lam) ** 2


def summand(
    gamma: np.ndarray, lam: float, d: int, beta_norm: float, sigma: float
) -> np.ndarray:
    """Risk summand as a function of the singular value itself."""
    return risk_terms(np.asarray(gamma, dtype=float) ** 2, lam, d, beta_norm, sigma)


def _curve_from_blocks(
    n: int,
    d: int,
    lambdas: np.ndarray,
    term_fn,
    trials: int,
    seed: int,
    workers: int,
    flags: tuple[str, ...] = (),
) -> list[RiskEstimate]:
    """Common-random-number risk curve: one spectrum draw set, all lambdas."""

    def block_fn(block: int, start: int, count: int) -> np.ndarray:
        x = substream(seed, block).standard_normal((count, n, d))
        g2 = _gram_squared_spectra(x)
        out = np.empty((count, len(lambdas)))
        for j, lam in enumerate(lambdas):
            out[:, j] = term_fn(g2, lam).sum(axis=-1)
        return out

    acc = accumulate_blocks(block_fn, trials, workers=workers)
    mean = np.atleast_1d(acc.mean)
    se = np.atleast_1d(acc.std_error)
    return [
        RiskEstimate(
            mean=float(mean[j]),
            std_error=float(se[j]),
            trials=trials,
            lam=float(lam),
            flags=flags + (("pseudoinverse-limit",) if lam == 0.0 and n < d else ()),
        )
        for j, lam in enumerate(lambdas)
    ]


def expected_risk_iso(
    n: int,
    lam: float,
    d: int,
    beta_norm: float,
    sigma: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    """Monte-Carlo expected test risk of isotropic ridge regression.

    Averages the spectrum-formula summand over `trials` independent design
    spectra and adds the irreducible sigma^2.  lambda == 0 means the
    pseudoinverse limit.
    """
    return iso_risk_curve(n, [lam], d, beta_norm, sigma, trials, seed, workers)[0]


def iso_risk_curve(
    n: int,
    lambdas,
    d: int,
    beta_norm: float,
    sigma: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> list[RiskEstimate]:
    """Risk at each lambda using one shared set of spectrum draws."""
    lambdas = np.asarray(list(lambdas), dtype=float)
    if np.any(lambdas < 0):
        raise ValueError("lambda must be >= 0")
    if trials < 1:
        raise ValueError("trials must be >= 1")

    def term_fn(g2, lam):
        return risk_terms(g2, lam, d, beta_norm, sigma)

    estimates = _curve_from_blocks(n, d, lambdas, term_fn, trials, seed, workers)
    return [
        RiskEstimate(
            mean=e.mean + sigma**2,
            std_error=e.std_error,
            trials=e.trials,
            lam=e.lam,
            flags=e.flags,
        )
        for e in estimates
    ]


def iso_risk_sweep(
    ns,
    lambdas,
    d: int,
    beta_norm: float,
    sigma: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> dict[int, list[RiskEstimate]]:
    """Risk on an (n, lambda) grid with fully coupled draws.

    Trial t draws one max(ns) x d design; each n sees its first n rows and
    every lambda shares the draw, so adjacent sweep points are positively
    coupled and monotonicity comparisons are low-variance.
    """
    from .rng import MomentAccumulator, map_blocks

    ns = [int(n) for n in ns]
    if not ns or any(n < 0 for n in ns):
        raise ValueError("ns must be non-empty non-negative sample counts")
    lambdas = np.asarray(list(lambdas), dtype=float)
    if np.any(lambdas < 0):
        raise ValueError("lambda must be >= 0")
    n_max = max(ns)
    accs = {n: MomentAccumulator() for n in ns}

    def block_fn(block: int, start: int, count: int):
        x = substream(seed, block).standard_normal((count, n_max, d))
        out = {}
        for n in ns:
            g2 = _gram_squared_spectra(x[:, :n, :])
            vals = np.empty((count, len(lambdas)))
            for j, lam in enumerate(lambdas):
                vals[:, j] = risk_terms(g2, lam, d, beta_norm, sigma).sum(axis=-1)
            out[n] = vals
        return out

    for out in map_blocks(block_fn, trials, workers):
        for n in ns:
            accs[n].add_block(out[n])

    result = {}
    for n in ns:
        mean = np.atleast_1d(accs[n].mean)
        se = np.atleast_1d(accs[n].std_error)
        result[n] = [
            RiskEstimate(
                mean=float(mean[j] + sigma**2),
                std_error=float(se[j]),
                trials=trials,
                lam=float(lam),
                flags=("pseudoinverse-limit",) if lam == 0.0 and n < d else (),
            )
            for j, lam in enumerate(lambdas)
        ]
    return result


def optimal_lambda_iso(d: int, sigma: float, beta_norm: float) -> float:
    """Optimal ridge parameter d sigma^2 / |b|^2; independent of n.

    A zero ground-truth norm makes infinite regularization (the null
    estimator) optimal, signalled by returning ``math.inf``.
    """
    if beta_norm == 0:
        return math.inf if sigma > 0 else 0.0
    return d * sigma**2 / beta_norm**2


def optimal_risk_iso(
    n: int,
    d: int,
    sigma: float,
    beta_norm: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    """Expected risk at the optimal lambda, via the collapsed summand
    sigma^2 / (g^2 + lambda*).

    Algebraically identical to ``expected_risk_iso`` evaluated at
    ``optimal_lambda_iso`` with the same seed.
    """
    lam = optimal_lambda_iso(d, sigma, beta_norm)
    if not math.isfinite(lam):
        return RiskEstimate(mean=sigma**2, std_error=0.0, trials=trials, lam=lam)
    return expected_risk_iso(n, lam, d, beta_norm, sigma, trials, seed, workers)
