"""Numerical verification of the two PSD conditions behind tuned-ridge
sample monotonicity with a non-identity penalty.

For isotropic designs and a diagonal PD penalty Q, define G and H as in
`ridgelab.general`.  The two tested conditions are

    (1)  G^n - G^{n+1}  is PSD,
    (2)  (G^n - G^{n+1}) - (H^n - H^{n+1}) * dG^n/dH^n  is PSD,

estimated from coupled draws (the (n+1)-sample design extends the n-sample
design row by row) and judged against Monte-Carlo error: a matrix "holds"
when its smallest eigenvalue is above -3 standard errors, is "violated"
when below -3 SE with magnitude beyond 10 SE, and is "inconclusive"
otherwise.  The SE of the minimum eigenvalue is bounded by the Frobenius
norm of the entrywise-SE matrix (Weyl perturbation bound - conservative and
assumption-free).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .general import GHEstimate, estimate_GH_pair, risk_from_GH
from .rng import substream
from .tuning import minimize_over_lambda

__all__ = [
    "PSDReport",
    "ImplicationReport",
    "condition_one",
    "condition_two",
    "implication_check",
    "battery_instances",
    "run_battery",
    "export_battery_csv",
]

DEFAULT_TRIALS = 100_000
MAX_DEFAULT_DIMENSION = 12


@dataclass(frozen=True)
class PSDInstance:
    n: int
    d: int
    q_diag: tuple[float, ...]
    lam: float
    trials: int
    seed: int


@dataclass(frozen=True)
class PSDReport:
    """Verdict on one tested matrix: smallest eigenvalue, its Monte-Carlo
    error bound, and the holds / violated / inconclusive classification."""

    condition: str
    min_eigenvalue: float
    std_error: float
    verdict: str
    instance: PSDInstance
    diagnostics: dict = field(default_factory=dict)


def _verdict(min_eig: float, se: float) -> str:
    if min_eig >= -3.0 * se:
        return "holds"
    if abs(min_eig) > 10.0 * se:
        return "violated"
    return "inconclusive"


def _min_eig_symmetrized(matrix: np.ndarray) -> tuple[float, float]:
    """Smallest eigenvalue after symmetrization, plus the asymmetry seen."""
    asym = float(np.abs(matrix - matrix.T).max())
    sym = 0.5 * (matrix + matrix.T)
    return float(np.linalg.eigvalsh(sym)[0]), asym


def _weyl_se(se_matrix: np.ndarray) -> float:
    """Frobenius norm of the entrywise-SE matrix bounds the spectral-norm
    perturbation of any eigenvalue (Weyl)."""
    return float(np.sqrt(np.sum(np.asarray(se_matrix) ** 2)))


def _normalize_q(Q) -> np.ndarray:
    q = np.asarray(Q, dtype=float)
    if q.ndim == 2:
        offdiag = q - np.diag(np.diag(q))
        if np.abs(offdiag).max() > 1e-12 * max(np.abs(q).max(), 1.0):
            raise ValueError("conditions are verified for diagonal Q")
        q = np.diag(q)
    if np.any(q <= 0):
        raise ValueError("Q must be positive definite")
    return q


def condition_one(
    n: int, Q, lam: float, trials: int, seed: int, workers: int = 1
) -> PSDReport:
    """Test G^n - G^{n+1} >= 0 (PSD) from one coupled estimate pair.

    The sign of H^n - H^{n+1} is reported alongside: the monotonicity
    argument only consumes this condition when that gap is non-negative
    (condition two carries the other branch of the case split).
    """
    q = _normalize_q(Q)
    lo, hi = estimate_GH_pair(n, q, lam, trials, seed, workers)
    diff = lo.G - hi.G
    min_eig, asym = _min_eig_symmetrized(diff)
    se = _weyl_se(np.sqrt(lo.se_G**2 + hi.se_G**2))
    return PSDReport(
        condition="one",
        min_eigenvalue=min_eig,
        std_error=se,
        verdict=_verdict(min_eig, se),
        instance=PSDInstance(n, q.shape[0], tuple(q), lam, trials, seed),
        diagnostics={
            "asymmetry": asym,
            "H_gap": lo.H - hi.H,
            "H_gap_se": math.hypot(lo.se_H, hi.se_H),
        },
    )


def condition_two(
    n: int, Q, lam: float, trials: int, seed: int, workers: int = 1
) -> PSDReport:
    """Test (G^n - G^{n+1}) - (H^n - H^{n+1}) dG^n/dH^n >= 0.

    Requires dH^n bounded away from zero (|dH| > 3 SE); otherwise the ratio
    is meaningless and the verdict is "inconclusive".  Also reports the sign
    of H^n - H^{n+1}, the case split of the monotonicity argument.
    """
    q = _normalize_q(Q)
    lo, hi = estimate_GH_pair(n, q, lam, trials, seed, workers)
    h_gap = lo.H - hi.H
    h_gap_se = math.hypot(lo.se_H, hi.se_H)
    diagnostics = {
        "H_gap": h_gap,
        "H_gap_se": h_gap_se,
        "dH": lo.dH,
        "dH_se": lo.se_dH,
    }
    instance = PSDInstance(n, q.shape[0], tuple(q), lam, trials, seed)
    if abs(lo.dH) <= 3.0 * lo.se_dH:
        return PSDReport(
            condition="two",
            min_eigenvalue=math.nan,
            std_error=math.nan,
            verdict="inconclusive",
            instance=instance,
            diagnostics=diagnostics,
        )
    ratio = lo.dG / lo.dH
    combined = (lo.G - hi.G) - h_gap * ratio
    min_eig, asym = _min_eig_symmetrized(combined)
    # linear error propagation: difference terms, plus the ratio's own
    # delta-method uncertainty scaled by |H_gap|
    se_ratio = np.abs(ratio) * np.sqrt(
        (lo.se_dG / np.maximum(np.abs(lo.dG), 1e-300)) ** 2
        + (lo.se_dH / abs(lo.dH)) ** 2
    )
    se_entries = np.sqrt(
        lo.se_G**2
        + hi.se_G**2
        + (h_gap_se * np.abs(ratio)) ** 2
        + (abs(h_gap) * se_ratio) ** 2
    )
    se = _weyl_se(se_entries)
    diagnostics["asymmetry"] = asym
    return PSDReport(
        condition="two",
        min_eigenvalue=min_eig,
        std_error=se,
        verdict=_verdict(min_eig, se),
        instance=instance,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class ImplicationReport:
    """Trace of the case analysis showing why the PSD conditions force the
    tuned risk at n+1 below the tuned risk at n."""

    n: int
    lam_opt: float
    case: str  # "interior", "zero-boundary", or "infinite"
    risk_n: float
    risk_n_se: float
    risk_n_plus_1: float
    risk_n_plus_1_se: float
    monotone_within_error: bool
    first_order_residual: float
    first_order_residual_se: float
    noise_bound: float  # -beta^T dG beta / dH at lam_opt, must be >= sigma^2
    noise_bound_ok: bool


def implication_check(
    n: int,
    Q,
    beta_star: np.ndarray,
    sigma: float,
    lambda_range: tuple[float, float],
    trials: int,
    seed: int,
    workers: int = 1,
) -> ImplicationReport:
    """Locate the tuned lambda for n samples on the G/H risk curve, classify
    the optimum (interior / boundary / infinite), and verify the monotone
    step risk_n(lam*) >= risk_{n+1}(lam*) within Monte-Carlo error."""
    q = _normalize_q(Q)
    beta = np.asarray(beta_star, dtype=float)
    lo_lim, hi_lim = lambda_range
    if not 0 <= lo_lim < hi_lim:
        raise ValueError("lambda_range must satisfy 0 <= lo < hi")
    lo_search = max(lo_lim, 1e-8 * hi_lim)

    cache: dict[float, tuple[GHEstimate, GHEstimate]] = {}

    def pair_at(lam: float) -> tuple[GHEstimate, GHEstimate]:
        if lam not in cache:
            cache[lam] = estimate_GH_pair(n, q, lam, trials, seed, workers)
        return cache[lam]

    def curve(lam: float) -> float:
        return risk_from_GH(pair_at(lam)[0], beta, sigma).mean

    null_risk = float(beta @ beta + sigma**2)
    search = minimize_over_lambda(
        curve, lo=lo_search, hi=hi_lim, rel_tol=1e-3, null_risk=null_risk
    )
    lam_opt = search.lambda_opt

    gh_n, gh_n1 = pair_at(lam_opt)
    risk_n = risk_from_GH(gh_n, beta, sigma)
    risk_n1 = risk_from_GH(gh_n1, beta, sigma)

    first_order = float(beta @ gh_n.dG @ beta + sigma**2 * gh_n.dH)
    first_order_se = float(
        np.abs(beta) @ gh_n.se_dG @ np.abs(beta) + sigma**2 * gh_n.se_dH
    )
    if gh_n.dH < 0:
        noise_bound = float(-(beta @ gh_n.dG @ beta) / gh_n.dH)
    else:
        noise_bound = math.inf
    if search.risk_at_opt >= null_risk - 1e-12:
        case = "infinite"
    elif lam_opt <= lo_search * (1 + 1e-9):
        case = "zero-boundary"
    else:
        case = "interior"
    gap = risk_n.mean - risk_n1.mean
    gap_se = math.hypot(risk_n.std_error, risk_n1.std_error)
    return ImplicationReport(
        n=n,
        lam_opt=lam_opt,
        case=case,
        risk_n=risk_n.mean,
        risk_n_se=risk_n.std_error,
        risk_n_plus_1=risk_n1.mean,
        risk_n_plus_1_se=risk_n1.std_error,
        monotone_within_error=bool(gap >= -3.0 * gap_se),
        first_order_residual=first_order,
        first_order_residual_se=first_order_se,
        noise_bound=noise_bound,
        noise_bound_ok=bool(sigma**2 <= noise_bound + 3.0 * first_order_se),
    )


def battery_instances(
    count: int = 50,
    seed: int = 20240601,
    n_range: tuple[int, int] = (2, 12),
    d_range: tuple[int, int] = (2, 12),
    lambdas: tuple[float, ...] = (0.1, 1.0, 10.0),
    q_log_bounds: tuple[float, float] = (0.1, 10.0),
) -> list[tuple[int, np.ndarray, float]]:
    """The pinned verification battery: `count` random instances with
    diagonal Q entries log-uniform in `q_log_bounds`, n and d uniform in
    their ranges, and lambda cycling through `lambdas`.  Deterministic
    given the seed."""
    rng = substream(seed, 4)
    instances = []
    for i in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        d = int(rng.integers(d_range[0], d_range[1] + 1))
        q = np.exp(
            rng.uniform(np.log(q_log_bounds[0]), np.log(q_log_bounds[1]), size=d)
        )
        lam = lambdas[i % len(lambdas)]
        instances.append((n, q, lam))
    return instances


def run_battery(
    instances,
    trials: int,
    seed: int,
    workers: int = 1,
) -> list[PSDReport]:
    """Both PSD conditions on every instance; one report per condition."""
    reports = []
    for idx, (n, q, lam) in enumerate(instances):
        instance_seed = seed + idx
        reports.append(condition_one(n, q, lam, trials, instance_seed, workers))
        reports.append(condition_two(n, q, lam, trials, instance_seed, workers))
    return reports


def export_battery_csv(reports, path) -> None:
    """Battery results as CSV rows: instance parameters, minimum eigenvalue,
    standard error, verdict."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["condition", "n", "d", "q_diag", "lambda", "trials", "seed",
             "min_eigenvalue", "std_error", "verdict"]
        )
        for r in reports:
            inst = r.instance
            writer.writerow(
                [
                    r.condition,
                    inst.n,
                    inst.d,
                    ";".join(repr(v) for v in inst.q_diag),
                    repr(inst.lam),
                    inst.trials,
                    inst.seed,
                    repr(r.min_eigenvalue),
                    repr(r.std_error),
                    r.verdict,
                ]
            )
