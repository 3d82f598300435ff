"""Weighted GLM fitting: logistic, log-link binomial, identity-link (WLS).

All fitters are Newton/Fisher-scoring with a deviance-monitored step-halving
line search, and return both model-based and HC0 sandwich covariance matrices.
The log-binomial fitter keeps fitted probabilities strictly below 1; when it
cannot reach an interior optimum it falls back to Poisson regression with a
log link and robust standard errors (fallback flag set).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ITER_LOGISTIC = 100
MAX_ITER_LOG_BINOMIAL = 200
SCORE_TOL = 1e-8
SCORE_TOL_LOOSE = 1e-6
DEV_REL_TOL = 1e-10
SEPARATION_ETA = 30.0
PROB_FLOOR = 1e-10


class RankDeficiencyError(np.linalg.LinAlgError):
    """Design matrix is not full column rank on the weighted support."""

    def __init__(self, labels):
        self.labels = list(labels)
        super().__init__(f"collinear design columns: {self.labels}")


@dataclass
class GlmFit:
    """Result of a weighted GLM fit."""

    link: str
    coefficients: np.ndarray
    covariance: np.ndarray
    robust_covariance: np.ndarray
    converged: bool
    iterations: int
    deviance: float
    fallback: bool = False
    labels: list[str] | None = None
    clamp_count: int = 0

    def se(self, robust: bool = True) -> np.ndarray:
        cov = self.robust_covariance if robust else self.covariance
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def invlogit(x):
    """Numerically safe inverse logit."""
    return 1.0 / (1.0 + np.exp(-np.clip(x, -700, 700)))


def check_rank(X: np.ndarray, w: np.ndarray, labels=None) -> None:
    """Raise RankDeficiencyError naming (near-)collinear columns."""
    Xw = X * np.sqrt(w)[:, None]
    q, r = np.linalg.qr(Xw)
    d = np.abs(np.diag(r))
    tol = d.max() * max(Xw.shape) * np.finfo(float).eps * 100
    bad = np.where(d <= tol)[0]
    if len(bad):
        if labels is None:
            labels = [f"col{j}" for j in range(X.shape[1])]
        raise RankDeficiencyError([labels[j] for j in bad])


def _safe_inv(A):
    try:
        return np.linalg.inv(A), True
    except np.linalg.LinAlgError:
        return np.linalg.pinv(A), False


def _binom_dev(y, mu, w):
    mu = np.clip(mu, 1e-300, 1 - 1e-12)
    return -2 * np.sum(w * (y * np.log(mu) + (1 - y) * np.log1p(-mu)))


def _pois_dev(y, mu, w):
    mu = np.clip(mu, 1e-300, None)
    return -2 * np.sum(w * (y * np.log(mu) - mu))


def _covariances(X, W_diag, resid):
    """Model-based and HC0 sandwich covariances from IRLS weights and scores.

    W_diag is the Fisher information weight per row; resid is the per-row
    score factor so that the score vector is X' resid.
    """
    A = (X * W_diag[:, None]).T @ X
    B = (X * (resid * resid)[:, None]).T @ X
    Ai, ok = _safe_inv(A)
    return Ai, Ai @ B @ Ai, ok


def fit_logistic(X, y, w=None, max_iter=MAX_ITER_LOGISTIC, labels=None) -> GlmFit:
    """Weighted logistic regression via iteratively reweighted least squares."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n, p = X.shape
    w = np.ones(n) if w is None else np.asarray(w, float)
    check_rank(X, w, labels)
    beta = np.zeros(p)
    mu = invlogit(X @ beta)
    dev = _binom_dev(y, mu, w)
    conv = False
    it = 0
    for it in range(1, max_iter + 1):
        score = X.T @ (w * (y - mu))
        info = (X * (w * mu * (1 - mu))[:, None]).T @ X
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        dn = dev
        for _ in range(50):
            bn = beta + lam * step
            dn = _binom_dev(y, invlogit(X @ bn), w)
            if dn <= dev + 1e-10 * (abs(dev) + 1):
                break
            lam /= 2
        beta = bn
        mu = invlogit(X @ beta)
        score = X.T @ (w * (y - mu))
        if np.max(np.abs(score)) < SCORE_TOL or abs(dev - dn) < DEV_REL_TOL * (abs(dev) + 1):
            conv = np.max(np.abs(score)) < SCORE_TOL_LOOSE
            dev = dn
            break
        dev = dn
    if np.max(np.abs(X @ beta)) > SEPARATION_ETA:
        conv = False  # quasi-separated: estimates on the boundary
    cov, rcov, ok = _covariances(X, w * mu * (1 - mu), w * (y - mu))
    return GlmFit("logit", beta, cov, rcov, conv and ok, it, dev, labels=labels)


def fit_poisson(X, y, w=None, max_iter=MAX_ITER_LOGISTIC, labels=None) -> GlmFit:
    """Weighted Poisson regression with log link (log-binomial fallback)."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n, p = X.shape
    w = np.ones(n) if w is None else np.asarray(w, float)
    check_rank(X, w, labels)
    beta = np.zeros(p)
    beta[0] = np.log(max(np.average(y, weights=w), 1e-8))
    mu = np.exp(np.clip(X @ beta, -500, 500))
    dev = _pois_dev(y, mu, w)
    conv = False
    it = 0
    for it in range(1, max_iter + 1):
        score = X.T @ (w * (y - mu))
        info = (X * (w * mu)[:, None]).T @ X
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            break
        lam, ok = 1.0, False
        dn = dev
        for _ in range(50):
            bn = beta + lam * step
            eta = X @ bn
            if eta.max() < 500:
                dn = _pois_dev(y, np.exp(eta), w)
                if dn <= dev + 1e-10 * (abs(dev) + 1):
                    ok = True
                    break
            lam /= 2
        if not ok:
            break
        beta = bn
        mu = np.exp(np.clip(X @ beta, -500, 500))
        score = X.T @ (w * (y - mu))
        if np.max(np.abs(score)) < SCORE_TOL or abs(dev - dn) < DEV_REL_TOL * (abs(dev) + 1):
            conv = np.max(np.abs(score)) < SCORE_TOL_LOOSE
            dev = dn
            break
        dev = dn
    cov, rcov, ok = _covariances(X, w * mu, w * (y - mu))
    return GlmFit("log", beta, cov, rcov, conv and ok, it, dev, fallback=True,
                  labels=labels)


def fit_log_binomial(X, y, w=None, max_iter=MAX_ITER_LOG_BINOMIAL, labels=None) -> GlmFit:
    """Weighted binomial regression with log link (risk-ratio model).

    Fisher scoring with step-halving that keeps every fitted probability at
    or below 1 - 1e-10.  When the constrained search stalls without reaching
    an interior stationary point (the MLE sits on the boundary of the
    parameter space), the fit is handed to fit_poisson and the result carries
    fallback=True.
    """
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n, p = X.shape
    w = np.ones(n) if w is None else np.asarray(w, float)
    check_rank(X, w, labels)
    beta = np.zeros(p)
    beta[0] = np.log(np.clip(np.average(y, weights=w), 1e-8, 1 - 1e-8))
    bound = np.log(1 - PROB_FLOOR)
    mu = np.exp(X @ beta)
    dev = _binom_dev(y, mu, w)
    conv = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = np.clip(np.exp(X @ beta), 1e-300, 1 - 1e-12)
        score = X.T @ (w * (y - mu) / (1 - mu))
        info = (X * (w * mu / (1 - mu))[:, None]).T @ X
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            break
        lam, ok = 1.0, False
        dn = dev
        for _ in range(60):
            bn = beta + lam * step
            eta = X @ bn
            if eta.max() <= bound:
                dn = _binom_dev(y, np.exp(eta), w)
                if dn <= dev + 1e-12 * (abs(dev) + 1):
                    ok = True
                    break
            lam /= 2
        if not ok:
            break
        beta = bn
        mu = np.clip(np.exp(X @ beta), 1e-300, 1 - 1e-12)
        score = X.T @ (w * (y - mu) / (1 - mu))
        if np.max(np.abs(score)) < SCORE_TOL or abs(dev - dn) < DEV_REL_TOL * (abs(dev) + 1):
            conv = np.max(np.abs(score)) < SCORE_TOL_LOOSE
            dev = dn
            break
        dev = dn
    if not conv:
        return fit_poisson(X, y, w, labels=labels)
    cov, rcov, ok = _covariances(X, w * mu / (1 - mu), w * (y - mu) / (1 - mu))
    return GlmFit("log", beta, cov, rcov, conv and ok, it, dev, labels=labels)


def fit_identity_binomial(X, y, w=None, labels=None) -> GlmFit:
    """Linear probability model by weighted least squares (risk differences).

    Fitted values may leave [0, 1]; robust covariance is the HC0 sandwich.
    """
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n = len(y)
    w = np.ones(n) if w is None else np.asarray(w, float)
    check_rank(X, w, labels)
    Xw = X * w[:, None]
    A = X.T @ Xw
    try:
        beta = np.linalg.solve(A, Xw.T @ y)
        ok = True
    except np.linalg.LinAlgError:
        beta = np.linalg.pinv(A) @ (Xw.T @ y)
        ok = False
    r = y - X @ beta
    rss = float(np.sum(w * r * r))
    Ai, inv_ok = _safe_inv(A)
    dof = max(n - X.shape[1], 1)
    sigma2 = rss / dof
    cov = Ai * sigma2
    B = (X * ((w * r) ** 2)[:, None]).T @ X
    rcov = Ai @ B @ Ai
    return GlmFit("identity", beta, cov, rcov, ok and inv_ok, 1, rss, labels=labels)


def sandwich_se(fit: GlmFit) -> np.ndarray:
    """Per-coefficient robust (HC0 sandwich) standard errors."""
    if not (fit.converged or fit.fallback):
        raise ValueError("sandwich SEs requested from a failed fit")
    return fit.se(robust=True)


def predict_prob(fit: GlmFit, X) -> np.ndarray:
    """Predicted probabilities with link-appropriate clamping.

    Out-of-range predictions under the log and identity links are clamped
    into (0, 1); the number of clamped records is recorded on the fit.
    """
    eta = np.asarray(X, float) @ fit.coefficients
    if fit.link == "logit":
        return invlogit(eta)
    if fit.link == "log":
        mu = np.exp(np.clip(eta, -700, 700))
    elif fit.link == "identity":
        mu = eta
    else:
        raise ValueError(f"unknown link {fit.link!r}")
    clamped = np.clip(mu, PROB_FLOOR, 1 - PROB_FLOOR)
    fit.clamp_count += int(np.sum(clamped != mu))
    return clamped
