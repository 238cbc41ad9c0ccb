"""Non-isotropic ridge risk: direct Monte Carlo, the G/H decomposition, and
the change-of-variables reduction to the isotropic problem.

Estimator under study:  b(lambda) = argmin |X b - y|^2 + lambda |b|_M^2
                                  = (X^T X + lambda M)^{-1} X^T y,
with x ~ N(0, Sigma) rows and population risk |b - beta*|_Sigma^2 + sigma^2.

For isotropic covariates and a PD penalty matrix Q the risk splits as

    risk = beta*^T G beta* + sigma^2 H + sigma^2,
    G = lambda^2 E[Q (X^T X + lambda Q)^{-2} Q],
    H = E[ |(X^T X + lambda Q)^{-1} X^T|_F^2 ],

(the Q factors in G come from the bias -lambda M^{-1} Q beta* of the
penalized estimator; they cancel at Q = I).  The lambda-derivatives have
closed per-sample forms, validated against central finite differences in
the tests:

    dG = Q [2 lambda M^{-2} - lambda^2 (M^{-1} Q M^{-2} + M^{-2} Q M^{-1})] Q,
    dH = -2 tr(M^{-1} X^T X M^{-1} Q M^{-1}),         M := X^T X + lambda Q.

PSD verdicts on differences of G (or of the combined condition matrix) are
unchanged by the extra Q factors: congruence by an invertible Q preserves
positive semidefiniteness.

The reduction: a problem with covariance Sigma, truth b and penalty M is
draw-by-draw equivalent (couple the designs by X~ = X Sigma^{1/2}) to the
isotropic problem with truth Sigma^{1/2} b and penalty
Sigma^{-1/2} M Sigma^{-1/2}.  Penalty M = Sigma therefore turns
non-isotropic regression into plain isotropic ridge, which is the
sample-monotonic adaptive regularizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import GaussianProblem, _check_covariance
from .rng import MomentAccumulator, map_blocks, substream
from .spectrum import RANK_RTOL, RiskEstimate

__all__ = [
    "RegularizerSpec",
    "GHEstimate",
    "mc_risk_general",
    "mc_risk_sweep",
    "adaptive_risk",
    "adaptive_regularizer",
    "estimate_GH",
    "estimate_GH_pair",
    "gh_sample",
    "risk_from_GH",
    "reduce_to_isotropic",
    "coupled_reduction_risks",
]


@dataclass(frozen=True)
class RegularizerSpec:
    """A PSD matrix M defining the penalty lambda |b|_M^2, with a tag naming
    its relation to the problem (identity / covariance / inverse-covariance /
    custom)."""

    matrix: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("regularizer matrix must be square")
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m - m.T).max() > 1e-10 * scale:
            raise ValueError("regularizer matrix must be symmetric")
        if np.linalg.eigvalsh(m)[0] < -1e-10 * scale:
            raise ValueError("regularizer matrix must be PSD")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, d: int) -> "RegularizerSpec":
        return cls(np.eye(d), kind="identity")

    @classmethod
    def inverse_covariance(cls, covariance: np.ndarray) -> "RegularizerSpec":
        cov = _check_covariance(np.asarray(covariance, dtype=float))
        return cls(np.linalg.inv(cov), kind="inverse-covariance")


def adaptive_regularizer(problem: GaussianProblem) -> RegularizerSpec:
    """The covariance penalty M = Sigma, under which the reduction turns the
    problem into plain isotropic ridge (hence provably sample-monotonic at
    the tuned lambda)."""
    return RegularizerSpec(problem.covariance.copy(), kind="covariance")


def _sqrt_pd(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric PD square root and its inverse."""
    w, v = np.linalg.eigh(matrix)
    if w[0] <= 0:
        raise ValueError(
            f"matrix is not positive definite: smallest eigenvalue {w[0]:.6g}"
        )
    root = (v * np.sqrt(w)) @ v.T
    inv_root = (v / np.sqrt(w)) @ v.T
    return root, inv_root


# ---------------------------------------------------------------------------
# direct Monte-Carlo risk
# ---------------------------------------------------------------------------


def mc_risk_sweep(
    problem: GaussianProblem,
    ns,
    lambdas,
    regularizer: RegularizerSpec,
    trials: int,
    seed: int,
    workers: int = 1,
    include_train: bool = False,
):
    """Risk estimates on the (n, lambda) grid with full coupling.

    Trial t draws one max(ns) x d design; the n-sample problem uses its
    first n rows, and all lambdas share each draw (common random numbers in
    both directions).  Returns a dict {n: [RiskEstimate per lambda]} and,
    when ``include_train``, a parallel dict of train-MSE estimates.
    """
    ns = [int(n) for n in ns]
    if not ns or any(n < 1 for n in ns):
        raise ValueError("ns must be non-empty positive sample counts")
    lambdas = np.asarray(list(lambdas), dtype=float)
    if np.any(lambdas < 0):
        raise ValueError("lambda must be >= 0")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = problem.d
    if regularizer.matrix.shape[0] != d:
        raise ValueError("regularizer dimension does not match problem")
    n_max = max(ns)
    chol_cov = np.linalg.cholesky(problem.covariance)
    sqrt_cov, _ = _sqrt_pd(problem.covariance)
    # whiten the penalty: M = L L^T, solve in phi = X L^{-T} coordinates
    pen_w, pen_v = np.linalg.eigh(regularizer.matrix)
    pen_w = np.clip(pen_w, 0.0, None)
    if pen_w[0] <= pen_w[-1] * 1e-14:
        raise ValueError("regularizer must be positive definite for the sweep")
    inv_sqrt_pen = (pen_v / np.sqrt(pen_w)) @ pen_v.T
    map_back = sqrt_cov @ inv_sqrt_pen  # beta-hat in whitened coords -> Sigma^{1/2} beta
    target = sqrt_cov @ problem.beta_star
    sigma = problem.sigma

    risk_acc = {n: MomentAccumulator() for n in ns}
    train_acc = {n: MomentAccumulator() for n in ns} if include_train else None
    rank_deficient = {n: False for n in ns}
    ill_conditioned = {n: np.zeros(len(lambdas), dtype=bool) for n in ns}

    def block_fn(block: int, start: int, count: int):
        rng = substream(seed, block)
        z = rng.standard_normal((count, n_max, d))
        x = z @ chol_cov.T
        noise = sigma * rng.standard_normal((count, n_max))
        y = np.einsum("tij,j->ti", x, problem.beta_star) + noise
        phi_full = x @ inv_sqrt_pen.T  # (count, n_max, d), inv_sqrt_pen symmetric
        out_risk = {}
        out_train = {}
        flags = {}
        for n in ns:
            phi = phi_full[:, :n, :]
            yn = y[:, :n]
            gram = np.einsum("tij,tik->tjk", phi, phi)
            w, v = np.linalg.eigh(gram)
            w = np.clip(w, 0.0, None)
            head = np.einsum("tjk,tj->tk", v, np.einsum("tij,ti->tj", phi, yn))
            carrier = np.einsum("jk,tkl->tjl", map_back, v)  # map to risk coords
            risks = np.empty((count, len(lambdas)))
            trains = np.empty((count, len(lambdas))) if include_train else None
            wmax = w[:, -1:]
            deficient = bool(np.any(w[:, 0] <= wmax * RANK_RTOL**2)) or n < d
            conditioning = np.zeros(len(lambdas), dtype=bool)
            for j, lam in enumerate(lambdas):
                if lam == 0.0:
                    keep = w > wmax * RANK_RTOL**2
                    coef = np.where(keep, head / np.where(keep, w, 1.0), 0.0)
                else:
                    coef = head / (w + lam)
                    conditioning[j] = bool(
                        np.any((w[:, -1] + lam) > 1e12 * (w[:, 0] + lam))
                    )
                bh = np.einsum("tjl,tl->tj", carrier, coef)
                risks[:, j] = np.sum((bh - target) ** 2, axis=1) + sigma**2
                if include_train:
                    fitted = np.einsum(
                        "tij,tj->ti", phi, np.einsum("tkl,tl->tk", v, coef)
                    )
                    trains[:, j] = np.mean((fitted - yn) ** 2, axis=1)
            out_risk[n] = risks
            if include_train:
                out_train[n] = trains
            flags[n] = (deficient, conditioning)
        return out_risk, out_train, flags

    for out_risk, out_train, flags in map_blocks(block_fn, trials, workers):
        for n in ns:
            risk_acc[n].add_block(out_risk[n])
            if include_train:
                train_acc[n].add_block(out_train[n])
            rank_deficient[n] = rank_deficient[n] or flags[n][0]
            ill_conditioned[n] |= flags[n][1]

    def finish(accs, n):
        mean = np.atleast_1d(accs[n].mean)
        se = np.atleast_1d(accs[n].std_error)
        ests = []
        for j, lam in enumerate(lambdas):
            fl = ()
            if lam == 0.0 and rank_deficient[n]:
                fl = ("pseudoinverse-limit",)
            if ill_conditioned[n][j]:
                fl = fl + ("ill-conditioned",)
            ests.append(
                RiskEstimate(
                    mean=float(mean[j]),
                    std_error=float(se[j]),
                    trials=trials,
                    lam=float(lam),
                    flags=fl,
                )
            )
        return ests

    risk_out = {n: finish(risk_acc, n) for n in ns}
    if include_train:
        return risk_out, {n: finish(train_acc, n) for n in ns}
    return risk_out


def mc_risk_general(
    problem: GaussianProblem,
    n: int,
    lam: float,
    regularizer: RegularizerSpec,
    trials: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    """Monte-Carlo risk of the M-penalized estimator on n samples."""
    return mc_risk_sweep(problem, [n], [lam], regularizer, trials, seed, workers)[n][0]


def adaptive_risk(
    problem: GaussianProblem, n: int, lam: float, trials: int, seed: int, workers: int = 1
) -> RiskEstimate:
    """Risk of the covariance-penalized (adaptive) estimator."""
    return mc_risk_general(
        problem, n, lam, adaptive_regularizer(problem), trials, seed, workers
    )


def null_risk_general(problem: GaussianProblem) -> float:
    """Risk of the zero estimator: beta*^T Sigma beta* + sigma^2."""
    return float(
        problem.beta_star @ problem.covariance @ problem.beta_star + problem.sigma**2
    )


# ---------------------------------------------------------------------------
# G / H machinery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GHEstimate:
    """Monte-Carlo estimates of G, H and their lambda-derivatives, with
    entrywise standard errors."""

    n: int
    lam: float
    q_diag: np.ndarray
    G: np.ndarray
    H: float
    dG: np.ndarray
    dH: float
    se_G: np.ndarray
    se_H: float
    se_dG: np.ndarray
    se_dH: float
    trials: int

    @property
    def max_se(self) -> float:
        return float(
            max(self.se_G.max(), self.se_H, self.se_dG.max(), self.se_dH)
        )


def _gh_block_samples(x: np.ndarray, q_diag: np.ndarray, lam: float):
    """Per-trial G, H, dG, dH samples for a stack of designs (count, n, d).

    G carries the Q factors of the bias term lambda^2 |M^-1 Q beta*|^2,
    i.e. the sample is lambda^2 Q M^-2 Q; its derivative is the
    Q-congruence of d(lambda^2 M^-2)/dlambda.  (At Q = I this reduces to
    the bare lambda^2 M^-2.)
    """
    a = np.einsum("tij,tik->tjk", x, x)  # X^T X
    m = a + lam * np.diag(q_diag)
    minv = np.linalg.inv(m)
    minv = 0.5 * (minv + np.transpose(minv, (0, 2, 1)))
    minv2 = minv @ minv
    q_outer = q_diag[:, None] * q_diag[None, :]
    g = lam**2 * minv2 * q_outer
    aminv = a @ minv
    h = np.einsum("tij,tji->t", minv, aminv)  # tr(M^-1 A M^-1) via cycle
    core = 2 * lam * minv2 - lam**2 * (
        (minv * q_diag[None, None, :]) @ minv2
        + (minv2 * q_diag[None, None, :]) @ minv
    )
    dg = core * q_outer
    s1 = minv @ aminv  # M^-1 A M^-1, symmetric
    # tr(S1 Q M^-1) with diagonal Q: sum_ij S1_ij (M^-1)_ij q_j
    dh = -2.0 * np.einsum("tij,tij->t", s1, minv * q_diag[None, None, :])
    return g, h, dg, dh


def gh_sample(x: np.ndarray, Q: np.ndarray, lam: float):
    """G, H, dG, dH evaluated on one given design matrix (a deterministic
    function of X; used to validate derivatives by finite differences)."""
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    x = np.asarray(x, dtype=float)
    q = np.asarray(Q, dtype=float)
    if q.ndim == 1:
        q_diag = q
    else:
        offdiag = q - np.diag(np.diag(q))
        if np.abs(offdiag).max() > 1e-12 * max(np.abs(q).max(), 1.0):
            raise ValueError("gh_sample requires a diagonal Q")
        q_diag = np.diag(q)
    g, h, dg, dh = _gh_block_samples(x[None, ...], q_diag, lam)
    return g[0], float(h[0]), dg[0], float(dh[0])


def _diagonalize_q(Q) -> tuple[np.ndarray, np.ndarray | None]:
    q = np.asarray(Q, dtype=float)
    if q.ndim == 1:
        q_diag = q.copy()
        rotation = None
    else:
        _check_covariance(q)
        offdiag = q - np.diag(np.diag(q))
        if np.abs(offdiag).max() <= 1e-14 * max(np.abs(q).max(), 1.0):
            q_diag, rotation = np.diag(q).copy(), None
        else:
            # X is isotropic, so Q may be rotated to its eigenbasis w.l.o.g.;
            # results rotate back per block.
            w, u = np.linalg.eigh(q)
            q_diag, rotation = w, u
    if np.any(q_diag <= 0):
        raise ValueError("Q must be positive definite")
    return q_diag, rotation


def _estimate_gh_impl(
    n_list: list[int],
    Q,
    lam: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> list[GHEstimate]:
    if lam <= 0:
        raise ValueError("lambda must be > 0 (derivative formulas need interior lambda)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    q_diag, rotation = _diagonalize_q(Q)
    d = q_diag.shape[0]
    n_max = max(n_list)

    accs = {
        n: {k: MomentAccumulator() for k in ("G", "H", "dG", "dH")} for n in n_list
    }

    def block_fn(block: int, start: int, count: int):
        x = substream(seed, block).standard_normal((count, n_max, d))
        result = {}
        for n in n_list:
            g, h, dg, dh = _gh_block_samples(x[:, :n, :], q_diag, lam)
            if rotation is not None:
                g = np.einsum("ij,tjk,lk->til", rotation, g, rotation)
                dg = np.einsum("ij,tjk,lk->til", rotation, dg, rotation)
            result[n] = (g, h, dg, dh)
        return result

    for result in map_blocks(block_fn, trials, workers):
        for n in n_list:
            g, h, dg, dh = result[n]
            accs[n]["G"].add_block(g)
            accs[n]["H"].add_block(h)
            accs[n]["dG"].add_block(dg)
            accs[n]["dH"].add_block(dh)

    out = []
    q_report = q_diag if rotation is None else np.diag(np.asarray(Q, dtype=float))
    for n in n_list:
        a = accs[n]
        out.append(
            GHEstimate(
                n=n,
                lam=lam,
                q_diag=q_report,
                G=np.asarray(a["G"].mean),
                H=float(a["H"].mean),
                dG=np.asarray(a["dG"].mean),
                dH=float(a["dH"].mean),
                se_G=np.asarray(a["G"].std_error),
                se_H=float(a["H"].std_error),
                se_dG=np.asarray(a["dG"].std_error),
                se_dH=float(a["dH"].std_error),
                trials=trials,
            )
        )
    return out


def estimate_GH(
    n: int, Q, lam: float, trials: int, seed: int, workers: int = 1
) -> GHEstimate:
    """Estimate G, H and their lambda-derivatives for n isotropic samples.

    Q may be a diagonal vector, a diagonal matrix, or a general PD matrix
    (rotated to diagonal internally).  All four quantities share the same
    draws (common random numbers).
    """
    return _estimate_gh_impl([n], Q, lam, trials, seed, workers)[0]


def estimate_GH_pair(
    n: int, Q, lam: float, trials: int, seed: int, workers: int = 1
) -> tuple[GHEstimate, GHEstimate]:
    """Coupled estimates at n and n+1 samples: trial t's (n+1)-row design
    extends its n-row design by one row, the variance-reduction coupling
    behind the PSD difference tests."""
    pair = _estimate_gh_impl([n, n + 1], Q, lam, trials, seed, workers)
    return pair[0], pair[1]


def risk_from_GH(gh: GHEstimate, beta_star: np.ndarray, sigma: float) -> RiskEstimate:
    """Assemble beta*^T G beta* + sigma^2 H + sigma^2 with linearly
    propagated standard error."""
    beta = np.asarray(beta_star, dtype=float)
    if beta.shape != (gh.G.shape[0],):
        raise ValueError("beta_star dimension does not match G")
    mean = float(beta @ gh.G @ beta + sigma**2 * gh.H + sigma**2)
    abs_beta = np.abs(beta)
    se = float(abs_beta @ gh.se_G @ abs_beta + sigma**2 * gh.se_H)
    return RiskEstimate(mean=mean, std_error=se, trials=gh.trials, lam=gh.lam)


# ---------------------------------------------------------------------------
# reduction to the isotropic problem
# ---------------------------------------------------------------------------


def reduce_to_isotropic(
    problem: GaussianProblem, regularizer: RegularizerSpec
) -> tuple[GaussianProblem, RegularizerSpec]:
    """Map a covariance-Sigma problem with penalty M to the equivalent
    isotropic problem.

    The isotropic twin has ground truth Sigma^{1/2} beta* and penalty
    Sigma^{-1/2} M Sigma^{-1/2}; coupling the designs by X~ = X Sigma^{1/2}
    makes the two estimators' population risks equal draw by draw.
    """
    root, inv_root = _sqrt_pd(problem.covariance)
    beta_iso = root @ problem.beta_star
    m_iso = inv_root @ regularizer.matrix @ inv_root
    m_iso = 0.5 * (m_iso + m_iso.T)
    d = problem.d
    if np.allclose(m_iso, np.eye(d), atol=1e-12):
        kind = "identity"
        m_iso = np.eye(d)
    elif regularizer.kind == "identity":
        kind = "inverse-covariance"
    else:
        kind = "custom"
    iso_problem = GaussianProblem(
        d=d, covariance=np.eye(d), beta_star=beta_iso, sigma=problem.sigma
    )
    return iso_problem, RegularizerSpec(m_iso, kind=kind)


def coupled_reduction_risks(
    problem: GaussianProblem,
    regularizer: RegularizerSpec,
    n: int,
    lam: float,
    seed: int,
) -> tuple[float, float]:
    """One coupled draw; returns (non-isotropic risk, isotropic-twin risk).

    The two numbers agree to floating-point accuracy: the estimators are
    images of each other under the change of variables.
    """
    iso_problem, iso_reg = reduce_to_isotropic(problem, regularizer)
    root, _ = _sqrt_pd(problem.covariance)
    rng = substream(seed, 3)
    x_iso = rng.standard_normal((n, problem.d))
    noise = problem.sigma * rng.standard_normal(n)
    x_noniso = x_iso @ root  # rows ~ N(0, Sigma), coupled
    y = x_noniso @ problem.beta_star + noise  # equals x_iso @ beta_iso + noise

    def ridge(x, y, m, lam):
        if lam == 0.0:
            raise ValueError("coupled check requires lambda > 0")
        return np.linalg.solve(x.T @ x + lam * m, x.T @ y)

    b_noniso = ridge(x_noniso, y, regularizer.matrix, lam)
    diff = b_noniso - problem.beta_star
    risk_noniso = float(diff @ problem.covariance @ diff + problem.sigma**2)

    b_iso = ridge(x_iso, y, iso_reg.matrix, lam)
    diff_iso = b_iso - iso_problem.beta_star
    risk_iso = float(diff_iso @ diff_iso + problem.sigma**2)
    return risk_noniso, risk_iso
