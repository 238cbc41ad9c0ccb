"""Risk of ridge regression on randomly projected covariates.

Covariates live in R^p with identity covariance; a model of size d <= p
observes x~ = P x for a Haar-random orthonormal P in R^{d x p} and fits
ridge on the projected design X~ = X P^T.  Conditioned on nothing, X~ is an
n x d standard Gaussian matrix in distribution, so spectrum draws reuse the
isotropic machinery and never materialize the ambient space.

With sigma~^2 := sigma^2 + ((p-d)/p) |theta|^2 the expected risk is

    risk(lambda) = sigma~^2
        + E[ sum_{i=1}^{d} (sigma~^2 g_i^2 + (|theta|^2/p) lambda^2)
                            / (g_i^2 + lambda)^2 ]

(spectrum padded to d values; the per-term lambda^2 coefficient |theta|^2/p
and the d-term range are validated against the brute-force oracle below,
which samples (P, X, y) explicitly and evaluates the population risk
sigma^2 + |theta - P^T b|^2).
"""

from __future__ import annotations

import numpy as np

from .rng import accumulate_blocks, substream
from .spectrum import RiskEstimate, _gram_squared_spectra
from .problems import sample_orthonormal

__all__ = [
    "sigma_tilde_sq",
    "optimal_lambda_proj",
    "expected_risk_proj",
    "proj_risk_curve",
    "proj_risk_sweep",
    "optimal_risk_proj",
    "brute_force_risk_proj",
    "coupled_optimal_summands",
]


def _check_pd(p: int, d: int) -> None:
    if d < 1 or d > p:
        raise ValueError(f"need 1 <= d <= p, got d={d}, p={p}")


def sigma_tilde_sq(p: int, d: int, sigma: float, theta_norm: float) -> float:
    """Effective noise variance sigma^2 + ((p-d)/p) |theta|^2: the signal
    energy outside the projected subspace acts as extra response noise."""
    _check_pd(p, d)
    return sigma**2 + (p - d) / p * theta_norm**2


def optimal_lambda_proj(p: int, d: int, sigma: float, theta_norm: float) -> float:
    """Ridge parameter p^2 sigma~^2 / (d |theta|^2), constant in n.

    This is the model-size-indexed tuning constant under which the
    model-size sweep is provably non-increasing (see
    ``coupled_optimal_summands``); it reduces to the isotropic optimum
    p sigma^2 / |theta|^2 at d = p.
    """
    _check_pd(p, d)
    if theta_norm == 0:
        return float("inf") if sigma > 0 else 0.0
    return p**2 * sigma_tilde_sq(p, d, sigma, theta_norm) / (d * theta_norm**2)


def _proj_terms(g2: np.ndarray, lam: float, p: int, theta_norm: float, st2: float):
    if lam == 0.0:
        from .spectrum import RANK_RTOL

        gmax = g2.max(axis=-1, keepdims=True)
        positive = g2 > gmax * RANK_RTOL**2
        safe = np.where(positive, g2, 1.0)
        return np.where(positive, st2 / safe, theta_norm**2 / p)
    c = theta_norm**2 / p
    return (st2 * g2 + c * lam**2) / (g2 + lam) ** 2


def proj_risk_curve(
    p: int,
    d: int,
    n: int,
    lambdas,
    theta_norm: float,
    sigma: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> list[RiskEstimate]:
    """Projected-model risk at each lambda over one shared set of spectrum
    draws (X~ spectra are n x d standard Gaussian spectra)."""
    _check_pd(p, d)
    lambdas = np.asarray(list(lambdas), dtype=float)
    if np.any(lambdas < 0):
        raise ValueError("lambda must be >= 0")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    st2 = sigma_tilde_sq(p, d, sigma, theta_norm)

    def block_fn(block: int, start: int, count: int) -> np.ndarray:
        x = substream(seed, block).standard_normal((count, n, d))
        g2 = _gram_squared_spectra(x)
        out = np.empty((count, len(lambdas)))
        for j, lam in enumerate(lambdas):
            out[:, j] = _proj_terms(g2, lam, p, theta_norm, st2).sum(axis=-1)
        return out

    acc = accumulate_blocks(block_fn, trials, workers=workers)
    mean = np.atleast_1d(acc.mean)
    se = np.atleast_1d(acc.std_error)
    return [
        RiskEstimate(
            mean=float(st2 + mean[j]),
            std_error=float(se[j]),
            trials=trials,
            lam=float(lam),
            flags=("pseudoinverse-limit",) if lam == 0.0 and n < d else (),
        )
        for j, lam in enumerate(lambdas)
    ]


def expected_risk_proj(
    p: int,
    d: int,
    n: int,
    lam: float,
    theta_norm: float,
    sigma: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    """Monte-Carlo expected risk of the size-d projected ridge model."""
    return proj_risk_curve(p, d, n, [lam], theta_norm, sigma, trials, seed, workers)[0]


def optimal_risk_proj(
    p: int,
    d: int,
    n: int,
    theta_norm: float,
    sigma: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    """Expected risk at ``optimal_lambda_proj``; same draws as
    ``expected_risk_proj`` with the same seed, so the two agree exactly."""
    lam = optimal_lambda_proj(p, d, sigma, theta_norm)
    if not np.isfinite(lam):
        return RiskEstimate(
            mean=sigma**2 + theta_norm**2, std_error=0.0, trials=trials, lam=lam
        )
    return expected_risk_proj(p, d, n, lam, theta_norm, sigma, trials, seed, workers)


def brute_force_risk_proj(
    p: int,
    d: int,
    n: int,
    lam: float,
    theta: np.ndarray,
    sigma: float,
    trials: int,
    seed: int,
    workers: int = 1,
    return_components: bool = False,
):
    """Independent oracle: simulate (P, X, y), solve ridge explicitly, and
    evaluate the population risk sigma^2 + |theta - P^T b|^2.

    With ``return_components`` the per-trial three-way split
    (projection loss |theta - P^T P theta|^2, estimation loss |P theta - b|^2,
    cross term) is returned alongside, for decomposition checks.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (p,):
        raise ValueError("theta must have length p")
    _check_pd(p, d)
    eye = lam * np.eye(d)
    components: list[np.ndarray] = []

    def block_fn(block: int, start: int, count: int) -> np.ndarray:
        rng = substream(seed, block)
        vals = np.empty(count)
        comps = np.empty((count, 3))
        for t in range(count):
            g = rng.standard_normal((p, d))
            q, r = np.linalg.qr(g)
            proj = (q * np.sign(np.diag(r))).T  # d x p Haar rows
            x = rng.standard_normal((n, p))
            y = x @ theta + sigma * rng.standard_normal(n)
            xt = x @ proj.T
            gram = xt.T @ xt + eye
            if lam == 0.0:
                b = np.linalg.lstsq(xt, y, rcond=None)[0]
            else:
                b = np.linalg.solve(gram, xt.T @ y)
            resid = theta - proj.T @ b
            vals[t] = sigma**2 + resid @ resid
            if return_components:
                beta_star = proj @ theta
                proj_loss = theta - proj.T @ beta_star
                comps[t, 0] = proj_loss @ proj_loss
                comps[t, 1] = np.sum((beta_star - b) ** 2)
                comps[t, 2] = 2.0 * proj_loss @ (proj.T @ (beta_star - b))
        if return_components:
            components.append(comps)
        return vals

    acc = accumulate_blocks(block_fn, trials, workers=1 if return_components else workers)
    estimate = RiskEstimate(
        mean=float(acc.mean), std_error=float(acc.std_error), trials=trials, lam=lam
    )
    if return_components:
        return estimate, np.concatenate(components, axis=0)
    return estimate


def proj_risk_sweep(
    p: int,
    ds,
    n: int,
    lambda_grids: dict,
    theta_norm: float,
    sigma: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> dict[int, list[RiskEstimate]]:
    """Risk over a model-size grid with column-coupled draws.

    ``lambda_grids`` maps each d to its lambda list (typically a shared
    grid plus that d's optimal lambda).  Trial t draws one n x max(ds)
    design; the size-d model sees its first d columns, so adjacent model
    sizes interlace pathwise.
    """
    from .rng import MomentAccumulator, map_blocks

    ds = [int(d) for d in ds]
    if not ds or any(d < 1 or d > p for d in ds):
        raise ValueError("ds must be non-empty with 1 <= d <= p")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d_max = max(ds)
    grids = {d: np.asarray(list(lambda_grids[d]), dtype=float) for d in ds}
    for d, grid in grids.items():
        if np.any(grid < 0):
            raise ValueError("lambda must be >= 0")
    st2 = {d: sigma_tilde_sq(p, d, sigma, theta_norm) for d in ds}
    accs = {d: MomentAccumulator() for d in ds}

    def block_fn(block: int, start: int, count: int):
        x = substream(seed, block).standard_normal((count, n, d_max))
        out = {}
        for d in ds:
            g2 = _gram_squared_spectra(x[:, :, :d])
            grid = grids[d]
            vals = np.empty((count, len(grid)))
            for j, lam in enumerate(grid):
                vals[:, j] = _proj_terms(g2, lam, p, theta_norm, st2[d]).sum(axis=-1)
            out[d] = vals
        return out

    for out in map_blocks(block_fn, trials, workers):
        for d in ds:
            accs[d].add_block(out[d])

    result = {}
    for d in ds:
        mean = np.atleast_1d(accs[d].mean)
        se = np.atleast_1d(accs[d].std_error)
        result[d] = [
            RiskEstimate(
                mean=float(st2[d] + mean[j]),
                std_error=float(se[j]),
                trials=trials,
                lam=float(lam),
                flags=("pseudoinverse-limit",) if lam == 0.0 and n < d else (),
            )
            for j, lam in enumerate(grids[d])
        ]
    return result


def coupled_optimal_summands(
    p: int, d: int, n: int, theta_norm: float, sigma: float, trials: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-draw optimal-lambda risk values at model sizes d and d+1, coupled.

    Trial t draws one n x (d+1) Gaussian matrix; the size-d model sees its
    first d columns.  Column interlacing plus the exact sigma~^2 bookkeeping
    make the size-(d+1) value pathwise <= the size-d value.
    """
    _check_pd(p, d + 1)
    st2_lo = sigma_tilde_sq(p, d, sigma, theta_norm)
    st2_hi = sigma_tilde_sq(p, d + 1, sigma, theta_norm)
    lam_lo = optimal_lambda_proj(p, d, sigma, theta_norm)
    lam_hi = optimal_lambda_proj(p, d + 1, sigma, theta_norm)
    from .rng import trial_blocks

    lo_vals, hi_vals = [], []
    for block, start, count in trial_blocks(trials):
        x = substream(seed, block).standard_normal((count, n, d + 1))
        g2_hi = _gram_squared_spectra(x)
        g2_lo = _gram_squared_spectra(x[:, :, :d])
        lo_vals.append(
            st2_lo + _proj_terms(g2_lo, lam_lo, p, theta_norm, st2_lo).sum(axis=-1)
        )
        hi_vals.append(
            st2_hi + _proj_terms(g2_hi, lam_hi, p, theta_norm, st2_hi).sum(axis=-1)
        )
    return np.concatenate(lo_vals), np.concatenate(hi_vals)
